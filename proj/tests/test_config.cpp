#include <catch2/catch_amalgamated.hpp>
#include <fstream>

#include "gr3d/config.hpp"
#include "helpers.hpp"

using namespace gr3d;

TEST_CASE("config defaults survive a canonical json round-trip") {
    const PipelineConfig def;
    const PipelineConfig back = parse_config(config_to_json(def));
    CHECK(back.stride == def.stride);
    CHECK(back.voxel_size == def.voxel_size);
    CHECK(back.min_points_per_voxel == def.min_points_per_voxel);
    CHECK(back.min_voxels_per_object == def.min_voxels_per_object);
    CHECK(back.round_categories == def.round_categories);
    CHECK(back.reference_heights == def.reference_heights);
    CHECK(back.prompt_mode == def.prompt_mode);
    CHECK(back.query.endpoint == def.query.endpoint);
    CHECK(back.query.max_attempts == def.query.max_attempts);
    CHECK(config_hash(back) == config_hash(def));
}

TEST_CASE("unknown keys are rejected and named") {
    nlohmann::json j = {{"version", 1}, {"strride", 2}};
    try {
        parse_config(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("strride") != std::string::npos);
    }

    nlohmann::json q = {{"version", 1}, {"query", {{"modell", "x"}}}};
    CHECK_THROWS_AS(parse_config(q), ConfigError);
}

TEST_CASE("config validation rejects out-of-range values") {
    auto with = [](const char* key, nlohmann::json value) {
        nlohmann::json j = {{"version", 1}};
        j[key] = std::move(value);
        return j;
    };
    CHECK_THROWS_AS(parse_config({{"version", 2}}), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::array()), ConfigError);
    CHECK_THROWS_AS(parse_config(with("stride", 0)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("voxel_size", 0.0)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("min_points_per_voxel", 0)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("min_voxels_per_object", 0)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("cylinder_residual_threshold", -1.0)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("reference_heights", {{"desk", 0.0}})), ConfigError);
    CHECK_THROWS_AS(parse_config(with("occlusion_tau_floor", -0.1)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("precision", 10)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("prompt_mode", "verbose")), ConfigError);
    CHECK_THROWS_AS(parse_config(with("jobs", 0)), ConfigError);
    CHECK_THROWS_AS(parse_config(with("stride", "two")), ConfigError);
    CHECK_THROWS_AS(parse_config(with("floor_categories", "floor")), ConfigError);
    nlohmann::json j = {{"version", 1}, {"query", {{"max_attempts", 0}}}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("missing version is an error, partial overrides keep other defaults") {
    CHECK_THROWS_AS(parse_config(nlohmann::json::object()), ConfigError);

    nlohmann::json j = {{"version", 1},
                        {"stride", 4},
                        {"reference_heights", {{"door", 2.1}}},
                        {"query", {{"model", "tiny"}, {"max_images", 2}}}};
    const PipelineConfig c = parse_config(j);
    CHECK(c.stride == 4);
    CHECK(c.reference_heights == std::map<std::string, double>{{"door", 2.1}});
    CHECK(c.query.model == "tiny");
    CHECK(c.query.max_images == 2);
    CHECK(c.voxel_size == PipelineConfig{}.voxel_size);
    CHECK(c.query.max_attempts == PipelineConfig{}.query.max_attempts);
}

TEST_CASE("config hash ignores formatting but tracks values") {
    testutil::TempDir tmp("config");
    const auto path = tmp.path / "cfg.json";
    {
        std::ofstream out(path);
        out << "{\n  \"stride\": 1,\n  \"version\": 1\n}\n";
    }
    const PipelineConfig a = load_config(path);
    const PipelineConfig b = parse_config({{"version", 1}, {"stride", 1}});
    CHECK(config_hash(a) == config_hash(b));

    PipelineConfig c = b;
    c.precision = 3;
    CHECK(config_hash(c) != config_hash(b));
    c = b;
    c.query.temperature = 0.5;
    CHECK(config_hash(c) != config_hash(b));
}

TEST_CASE("unreadable or malformed config files fail loudly") {
    testutil::TempDir tmp("config_bad");
    CHECK_THROWS_AS(load_config(tmp.path / "absent.json"), ConfigError);
    const auto path = tmp.path / "broken.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_config(path), ConfigError);
}
