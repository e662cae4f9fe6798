#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stackplan/io.hpp"
#include "stackplan/planner.hpp"
#include "stackplan/simulator.hpp"

namespace stackplan {

enum class TaskKind : std::uint8_t { ST, MT, TC };

const char* to_string(TaskKind t);
TaskKind parse_task(std::string_view id);
std::span<const TaskKind> all_tasks();

/// Target draws per scene and task: ST and MT use two draws, TC one.
int draws_for(TaskKind t);

/// ST: one random object. MT: 2 to 4 distinct random objects (capped at the
/// scene size). TC: every object.
TargetDesignation sample_targets(TaskKind task, std::size_t n_objects, std::uint64_t seed);

/// (first_step, whole). whole is AOS equality; first_step is membership of
/// the first executed grasp in the reference AOS. Two empty chains score
/// (true, true).
std::pair<bool, bool> metric_aos_rationality(std::span<const AosEntry> executed, const ActionObjectSet& reference);

struct EpisodeRecord {
    std::size_t scene = 0;
    std::string planner;
    std::string task;
    int draw = 0;
    int repeat = 0;
    std::vector<ObjectId> targets;
    bool first_step_rational = false;
    bool chain_rational = false;
    int grasp_count = 0;
    bool success = false;
    double simulated_time = 0.0;
    int belief_resets = 0;
    std::string failure;
};

Json to_json(const EpisodeRecord& r);
EpisodeRecord episode_from_json(const Json& j);

struct EpisodeOutput {
    EpisodeRecord record;
    std::vector<TraceRecord> trace;
    ActionObjectSet reference;
    std::vector<AosEntry> executed;
};

/// One closed-loop episode on a fresh copy of `scene`.
EpisodeOutput run_episode(const GroundTruthScene& scene, const TargetDesignation& targets, PlannerKind planner,
                          const Config& config, std::uint64_t episode_seed);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// 95% Wilson score interval for k successes out of n.
Interval wilson_interval(std::size_t k, std::size_t n);

struct AggregateRow {
    std::string planner;
    std::string task;
    std::size_t episodes = 0;
    double ar_f = 0.0;
    double ar_w = 0.0;
    double success_rate = 0.0;
    double mean_grasps = 0.0;
    double mean_time = 0.0;
    Interval ar_f_ci, ar_w_ci, success_ci, grasps_ci;
};

/// Groups by (planner, task) in first-seen order of planners and tasks.
std::vector<AggregateRow> aggregate(std::span<const EpisodeRecord> records);

Json to_json(const AggregateRow& row);
/// Fixed-width text table with a short legend.
std::string format_report(std::span<const AggregateRow> rows);

struct EvaluateOptions {
    std::vector<PlannerKind> planners{all_planners().begin(), all_planners().end()};
    std::vector<TaskKind> tasks{all_tasks().begin(), all_tasks().end()};
    int episodes_per_scene = 1;
    std::uint64_t seed = 0;
    /// 0 picks the hardware concurrency.
    unsigned threads = 0;
};

/// Runs every (scene, task, draw, repeat, planner) episode. Target draws and
/// episode seeds do not depend on the planner, so planners face identical
/// designations and noise streams. Output order is fixed regardless of the
/// thread count. Throws InvalidInput on an empty corpus.
std::vector<EpisodeRecord> evaluate(std::span<const GroundTruthScene> corpus, const Config& config,
                                    const EvaluateOptions& options);

/// One scene file per seed plus manifest.json.
void write_corpus(const std::filesystem::path& dir, std::span<const GroundTruthScene> scenes);
std::vector<GroundTruthScene> load_corpus(const std::filesystem::path& dir, const NoiseProfile& noise);
std::vector<GroundTruthScene> generate_corpus(const GeneratorConfig& config, std::size_t count, std::uint64_t seed);

Json to_json(const TraceRecord& t);

}  // namespace stackplan
