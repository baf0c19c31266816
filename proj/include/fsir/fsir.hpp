#pragma once

// Functional single- and multiple-index regression with nonparametric link:
// grid-sampled curves, eigenbasis expansion of the direction function,
// leave-one-out kernel least squares for the index coefficients, and
// recursive/backfit additive extensions.

#include "fsir/curve.hpp"
#include "fsir/csv.hpp"
#include "fsir/errors.hpp"
#include "fsir/fpca.hpp"
#include "fsir/kernel.hpp"
#include "fsir/nelder_mead.hpp"
#include "fsir/index_model.hpp"
#include "fsir/cross_validation.hpp"
#include "fsir/multi_index.hpp"
#include "fsir/simulation.hpp"
#include "fsir/serialize.hpp"
