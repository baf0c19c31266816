#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsir/curve.hpp"
#include "fsir/errors.hpp"
#include "fsir/index_model.hpp"
#include "fsir/multi_index.hpp"

namespace fsir {

/// Model persistence: versioned JSON holding the grid, per-component basis
/// slice, coefficients, smoother settings and training pairs, so prediction
/// needs no original data. Numbers round-trip exactly.
inline constexpr int kModelFormatVersion = 1;

struct SavedModel {
    MultiIndexModel model;
    bool normalize_area = false; ///< apply area normalization to inputs before prediction
};

namespace detail {

inline nlohmann::json component_to_json(const IndexModel& c) {
    nlohmann::json j;
    j["mean"] = c.mean.values();
    nlohmann::json funcs = nlohmann::json::array();
    for (const auto& f : c.functions) funcs.push_back(f.values());
    j["functions"] = std::move(funcs);
    j["coefficients"] = c.coefficients;
    j["bandwidth"] = c.smoother.bandwidth;
    j["lambda"] = c.smoother.lambda;
    j["kind"] = c.smoother.kind == SmootherKind::LocalLinear ? "local_linear" : "local_constant";
    j["training_index"] = c.training_index;
    j["training_targets"] = c.training_targets;
    return j;
}

inline IndexModel component_from_json(const nlohmann::json& j, const GridPtr& grid) {
    SmootherConfig cfg;
    cfg.bandwidth = j.at("bandwidth").get<double>();
    cfg.lambda = j.at("lambda").get<double>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "local_linear")
        cfg.kind = SmootherKind::LocalLinear;
    else if (kind == "local_constant")
        cfg.kind = SmootherKind::LocalConstant;
    else
        throw ParseError("model file: unknown smoother kind '" + kind + "'");

    Curve mean(grid, j.at("mean").get<std::vector<double>>());
    std::vector<Curve> funcs;
    for (const auto& f : j.at("functions"))
        funcs.emplace_back(grid, f.get<std::vector<double>>());
    return make_index_model(grid, std::move(mean), std::move(funcs),
                            j.at("coefficients").get<std::vector<double>>(), cfg,
                            j.at("training_index").get<std::vector<double>>(),
                            j.at("training_targets").get<std::vector<double>>());
}

} // namespace detail

inline nlohmann::json model_to_json(const SavedModel& saved) {
    const auto& m = saved.model;
    if (m.components.empty()) throw std::invalid_argument("model_to_json: empty model");
    nlohmann::json j;
    j["format"] = "fsir-model";
    j["version"] = kModelFormatVersion;
    j["type"] = m.components.size() == 1 ? "single" : "multi";
    j["normalize_area"] = saved.normalize_area;
    j["grid"] = m.components.front().grid->points();
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m.components) comps.push_back(detail::component_to_json(c));
    j["components"] = std::move(comps);
    j["iterations_used"] = m.iterations_used;
    j["converged"] = m.converged;
    if (std::isfinite(m.final_delta)) j["final_delta"] = m.final_delta;
    return j;
}

inline SavedModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != "fsir-model")
        throw ParseError("model file: missing fsir-model format marker");
    if (j.value("version", -1) != kModelFormatVersion)
        throw ParseError("model file: unsupported version");
    SavedModel saved;
    saved.normalize_area = j.value("normalize_area", false);
    const GridPtr grid =
        std::make_shared<const TimeGrid>(j.at("grid").get<std::vector<double>>());
    for (const auto& c : j.at("components"))
        saved.model.components.push_back(detail::component_from_json(c, grid));
    if (saved.model.components.empty()) throw ParseError("model file: no components");
    saved.model.iterations_used = j.value("iterations_used", std::size_t{0});
    saved.model.converged = j.value("converged", false);
    saved.model.final_delta =
        j.contains("final_delta") ? j.at("final_delta").get<double>()
                                  : std::numeric_limits<double>::infinity();
    return saved;
}

inline void save_model(const SavedModel& saved, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file " + path);
    out << model_to_json(saved).dump(2) << '\n';
}

inline SavedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
}

} // namespace fsir
