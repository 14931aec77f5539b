#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gr3d/errors.hpp"
#include "gr3d/sha256.hpp"

namespace gr3d {

namespace fs = std::filesystem;

struct QueryConfig {
    std::string endpoint = "http://127.0.0.1:8741/v1/chat/completions";
    std::string model = "mock-model";
    std::string api_key_env;       ///< env var holding the key; empty = no auth header
    int max_images = 8;
    double temperature = 0.0;
    double timeout_s = 60.0;
    int max_attempts = 3;
    double backoff_base_s = 0.25;
    std::string reasoning_effort;  ///< provider-specific passthrough; empty = omit
};

/// Everything the pipeline stages need, parsed strictly: unknown keys are
/// rejected so typos fail loudly instead of silently using defaults.
struct PipelineConfig {
    int version = 1;
    int stride = 1;
    double voxel_size = 0.05;
    int min_points_per_voxel = 3;
    int min_voxels_per_object = 8;
    std::set<std::string> floor_categories = {"floor"};
    std::set<std::string> wall_categories = {"wall"};
    std::set<std::string> ceiling_categories = {"ceiling"};
    std::set<std::string> round_categories = {"round_table", "column", "trash_bin", "stool"};
    double cylinder_residual_threshold = 0.5; ///< fraction of voxel size
    std::map<std::string, double> reference_heights = {
        {"ceiling", 2.4}, {"countertop", 0.9}, {"desk", 0.75}, {"door", 2.0}};
    std::size_t min_category_points = 20;
    double neighbor_radius = 0.15;
    double occlusion_tau_floor = 0.1;
    int precision = 2;
    std::string prompt_mode = "full";
    bool prompt_include_polygon = false;
    int jobs = 1;
    QueryConfig query;
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                         const std::string& ctx) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw ConfigError("config: unknown key \"" + key + "\" in " + ctx);
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config: bad value for \"") + key + "\"");
    }
}

inline std::set<std::string> get_string_set(const nlohmann::json& obj, const char* key,
                                            std::set<std::string> fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_array()) throw ConfigError(std::string("config: \"") + key + "\" must be an array");
    std::set<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string())
            throw ConfigError(std::string("config: \"") + key + "\" entries must be strings");
        out.insert(v.get<std::string>());
    }
    return out;
}

} // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    detail::require_keys(
        j,
        {"version", "stride", "voxel_size", "min_points_per_voxel", "min_voxels_per_object",
         "floor_categories", "wall_categories", "ceiling_categories", "round_categories",
         "cylinder_residual_threshold", "reference_heights", "min_category_points",
         "neighbor_radius", "occlusion_tau_floor", "precision", "prompt_mode",
         "prompt_include_polygon", "jobs", "query"},
        "top level");

    PipelineConfig c;
    if (!j.contains("version")) throw ConfigError("config: missing \"version\"");
    c.version = detail::get_or(j, "version", 1);
    if (c.version != 1) throw ConfigError("config: unsupported version");

    c.stride = detail::get_or(j, "stride", c.stride);
    c.voxel_size = detail::get_or(j, "voxel_size", c.voxel_size);
    c.min_points_per_voxel = detail::get_or(j, "min_points_per_voxel", c.min_points_per_voxel);
    c.min_voxels_per_object = detail::get_or(j, "min_voxels_per_object", c.min_voxels_per_object);
    c.floor_categories = detail::get_string_set(j, "floor_categories", c.floor_categories);
    c.wall_categories = detail::get_string_set(j, "wall_categories", c.wall_categories);
    c.ceiling_categories = detail::get_string_set(j, "ceiling_categories", c.ceiling_categories);
    c.round_categories = detail::get_string_set(j, "round_categories", c.round_categories);
    c.cylinder_residual_threshold =
        detail::get_or(j, "cylinder_residual_threshold", c.cylinder_residual_threshold);
    if (j.contains("reference_heights")) {
        if (!j["reference_heights"].is_object())
            throw ConfigError("config: \"reference_heights\" must be an object");
        c.reference_heights.clear();
        for (const auto& [category, height] : j["reference_heights"].items()) {
            if (!height.is_number())
                throw ConfigError("config: reference height for \"" + category +
                                  "\" must be a number");
            c.reference_heights[category] = height.get<double>();
        }
    }
    c.min_category_points =
        detail::get_or<std::size_t>(j, "min_category_points", c.min_category_points);
    c.neighbor_radius = detail::get_or(j, "neighbor_radius", c.neighbor_radius);
    c.occlusion_tau_floor = detail::get_or(j, "occlusion_tau_floor", c.occlusion_tau_floor);
    c.precision = detail::get_or(j, "precision", c.precision);
    c.prompt_mode = detail::get_or<std::string>(j, "prompt_mode", c.prompt_mode);
    c.prompt_include_polygon =
        detail::get_or(j, "prompt_include_polygon", c.prompt_include_polygon);
    c.jobs = detail::get_or(j, "jobs", c.jobs);

    if (j.contains("query")) {
        const auto& q = j["query"];
        if (!q.is_object()) throw ConfigError("config: \"query\" must be an object");
        detail::require_keys(q,
                             {"endpoint", "model", "api_key_env", "max_images", "temperature",
                              "timeout_s", "max_attempts", "backoff_base_s", "reasoning_effort"},
                             "query");
        c.query.endpoint = detail::get_or<std::string>(q, "endpoint", c.query.endpoint);
        c.query.model = detail::get_or<std::string>(q, "model", c.query.model);
        c.query.api_key_env = detail::get_or<std::string>(q, "api_key_env", c.query.api_key_env);
        c.query.max_images = detail::get_or(q, "max_images", c.query.max_images);
        c.query.temperature = detail::get_or(q, "temperature", c.query.temperature);
        c.query.timeout_s = detail::get_or(q, "timeout_s", c.query.timeout_s);
        c.query.max_attempts = detail::get_or(q, "max_attempts", c.query.max_attempts);
        c.query.backoff_base_s = detail::get_or(q, "backoff_base_s", c.query.backoff_base_s);
        c.query.reasoning_effort =
            detail::get_or<std::string>(q, "reasoning_effort", c.query.reasoning_effort);
    }

    if (c.stride < 1) throw ConfigError("config: stride must be >= 1");
    if (!(c.voxel_size > 0)) throw ConfigError("config: voxel_size must be > 0");
    if (c.min_points_per_voxel < 1) throw ConfigError("config: min_points_per_voxel must be >= 1");
    if (c.min_voxels_per_object < 1)
        throw ConfigError("config: min_voxels_per_object must be >= 1");
    if (!(c.cylinder_residual_threshold > 0))
        throw ConfigError("config: cylinder_residual_threshold must be > 0");
    for (const auto& [category, height] : c.reference_heights)
        if (!(height > 0))
            throw ConfigError("config: reference height for \"" + category + "\" must be > 0");
    if (c.min_category_points < 1) throw ConfigError("config: min_category_points must be >= 1");
    if (!(c.neighbor_radius > 0)) throw ConfigError("config: neighbor_radius must be > 0");
    if (c.occlusion_tau_floor < 0) throw ConfigError("config: occlusion_tau_floor must be >= 0");
    if (c.precision < 0 || c.precision > 9)
        throw ConfigError("config: precision must be in [0, 9]");
    if (c.prompt_mode != "full" && c.prompt_mode != "no-annotation" &&
        c.prompt_mode != "camera-params" && c.prompt_mode != "scene-description")
        throw ConfigError("config: prompt_mode must be one of full, no-annotation, "
                          "camera-params, scene-description");
    if (c.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (c.query.max_images < 1) throw ConfigError("config: query.max_images must be >= 1");
    if (c.query.temperature < 0) throw ConfigError("config: query.temperature must be >= 0");
    if (!(c.query.timeout_s > 0)) throw ConfigError("config: query.timeout_s must be > 0");
    if (c.query.max_attempts < 1) throw ConfigError("config: query.max_attempts must be >= 1");
    if (c.query.backoff_base_s < 0)
        throw ConfigError("config: query.backoff_base_s must be >= 0");
    return c;
}

inline PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse failure in " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

/// Canonical JSON re-serialization of the effective config, so the hash is
/// independent of the input file's formatting and key order.
inline nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["version"] = c.version;
    j["stride"] = c.stride;
    j["voxel_size"] = c.voxel_size;
    j["min_points_per_voxel"] = c.min_points_per_voxel;
    j["min_voxels_per_object"] = c.min_voxels_per_object;
    j["floor_categories"] = c.floor_categories;
    j["wall_categories"] = c.wall_categories;
    j["ceiling_categories"] = c.ceiling_categories;
    j["round_categories"] = c.round_categories;
    j["cylinder_residual_threshold"] = c.cylinder_residual_threshold;
    j["reference_heights"] = c.reference_heights;
    j["min_category_points"] = c.min_category_points;
    j["neighbor_radius"] = c.neighbor_radius;
    j["occlusion_tau_floor"] = c.occlusion_tau_floor;
    j["precision"] = c.precision;
    j["prompt_mode"] = c.prompt_mode;
    j["prompt_include_polygon"] = c.prompt_include_polygon;
    j["jobs"] = c.jobs;
    j["query"] = {{"endpoint", c.query.endpoint},
                  {"model", c.query.model},
                  {"api_key_env", c.query.api_key_env},
                  {"max_images", c.query.max_images},
                  {"temperature", c.query.temperature},
                  {"timeout_s", c.query.timeout_s},
                  {"max_attempts", c.query.max_attempts},
                  {"backoff_base_s", c.query.backoff_base_s},
                  {"reasoning_effort", c.query.reasoning_effort}};
    return j;
}

inline std::string config_hash(const PipelineConfig& c) {
    return sha256_hex(config_to_json(c).dump());
}

} // namespace gr3d
