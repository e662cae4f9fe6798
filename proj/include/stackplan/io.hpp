#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "stackplan/planner.hpp"
#include "stackplan/pomdp.hpp"
#include "stackplan/scene.hpp"
#include "stackplan/simulator.hpp"

namespace stackplan {

using Json = nlohmann::json;

/// Everything the CLI and harness read from a config file. Missing keys keep
/// their defaults.
struct Config {
    NoiseProfile noise = NoiseProfile::defaults();
    RewardParams reward;
    GeneratorConfig generator;
    /// 0 selects two steps per object.
    int horizon = 0;
    int retry_cap = 3;
    double presence_prior = 1.0;
    /// Initial NoRelation mass of each relation factor; real tables are sparse.
    double no_relation_prior = 0.8;
    /// Simulated minutes charged per grasp attempt.
    double minutes_per_grasp = 0.9;

    void check() const;
};

Json to_json(const SceneGraph& graph);
/// Parses {"objects":[{"id","category"}], "edges":[{"parent","child","kind"}]}.
/// Ids must be dense. Throws InvalidInput on malformed data.
SceneGraph scene_from_json(const Json& j);
/// Same, and rejects categories missing from `noise`.
SceneGraph scene_from_json(const Json& j, const NoiseProfile& noise);

Json to_json(const NoiseProfile& noise);
NoiseProfile noise_from_json(const Json& j);

Json to_json(const Config& config);
Config config_from_json(const Json& j);

/// Plan as steps with action, object, moved, dest and a readable label.
Json to_json(const Plan& plan, const SceneGraph& graph);

Json read_json_file(const std::filesystem::path& path);
/// Writes pretty JSON followed by a newline. Throws InvalidInput if the file
/// cannot be written.
void write_json_file(const std::filesystem::path& path, const Json& j);

Config load_config(const std::filesystem::path& path);
SceneGraph load_scene(const std::filesystem::path& path, const NoiseProfile& noise);

}  // namespace stackplan
