#include "stackplan/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace stackplan {

namespace {

constexpr std::array kTasks{TaskKind::ST, TaskKind::MT, TaskKind::TC};

std::string scene_file_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%05zu.json", i);
    return buf;
}

}  // namespace

const char* to_string(TaskKind t) {
    switch (t) {
        case TaskKind::ST: return "ST";
        case TaskKind::MT: return "MT";
        case TaskKind::TC: return "TC";
    }
    return "?";
}

TaskKind parse_task(std::string_view id) {
    for (TaskKind t : kTasks) {
        if (id == to_string(t)) return t;
    }
    throw InvalidInput("unknown task '" + std::string(id) + "' (expected ST, MT or TC)");
}

std::span<const TaskKind> all_tasks() { return kTasks; }

int draws_for(TaskKind t) { return t == TaskKind::TC ? 1 : 2; }

TargetDesignation sample_targets(TaskKind task, std::size_t n_objects, std::uint64_t seed) {
    if (n_objects == 0) throw InvalidInput("cannot designate targets in an empty scene");
    if (task == TaskKind::TC) return TargetDesignation::all(n_objects);
    Rng rng(seed);
    std::size_t k = 1;
    if (task == TaskKind::MT) k = std::min<std::size_t>(static_cast<std::size_t>(rng.between(2, 4)), n_objects);
    std::vector<std::uint32_t> pool(n_objects);
    std::iota(pool.begin(), pool.end(), 0u);
    std::vector<ObjectId> picked;
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n_objects - i));
        std::swap(pool[i], pool[j]);
        picked.push_back(ObjectId{pool[i]});
    }
    return TargetDesignation(std::move(picked), n_objects);
}

std::pair<bool, bool> metric_aos_rationality(std::span<const AosEntry> executed, const ActionObjectSet& reference) {
    if (executed.empty() && reference.empty()) return {true, true};
    const bool first = !executed.empty() && reference.contains(executed.front());
    const ActionObjectSet got(executed.begin(), executed.end());
    return {first, got == reference};
}

Json to_json(const EpisodeRecord& r) {
    Json targets = Json::array();
    for (ObjectId t : r.targets) targets.push_back(t.value);
    return {{"scene", r.scene},
            {"planner", r.planner},
            {"task", r.task},
            {"draw", r.draw},
            {"repeat", r.repeat},
            {"targets", targets},
            {"first_step_rational", r.first_step_rational},
            {"chain_rational", r.chain_rational},
            {"grasps", r.grasp_count},
            {"success", r.success},
            {"time", r.simulated_time},
            {"belief_resets", r.belief_resets},
            {"failure", r.failure}};
}

EpisodeRecord episode_from_json(const Json& j) {
    try {
        EpisodeRecord r;
        r.scene = j.at("scene").get<std::size_t>();
        r.planner = j.at("planner").get<std::string>();
        r.task = j.at("task").get<std::string>();
        r.draw = j.value("draw", 0);
        r.repeat = j.value("repeat", 0);
        for (const auto& t : j.value("targets", Json::array())) r.targets.push_back(ObjectId{t.get<std::uint32_t>()});
        r.first_step_rational = j.at("first_step_rational").get<bool>();
        r.chain_rational = j.at("chain_rational").get<bool>();
        r.grasp_count = j.at("grasps").get<int>();
        r.success = j.at("success").get<bool>();
        r.simulated_time = j.value("time", 0.0);
        r.belief_resets = j.value("belief_resets", 0);
        r.failure = j.value("failure", std::string());
        return r;
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("malformed episode record: ") + e.what());
    }
}

EpisodeOutput run_episode(const GroundTruthScene& scene, const TargetDesignation& targets, PlannerKind planner,
                          const Config& config, std::uint64_t episode_seed) {
    const SceneGraph& graph = *scene.graph;
    GroundTruthScene world = scene;
    const NoiseModel noise(config.noise, graph.categories());
    SimExecutor executor(world, noise, episode_seed);

    const PlannerModels models{noise, config.reward};
    const ReplanConfig rc{planner, config.horizon, config.retry_cap, config.presence_prior, config.no_relation_prior};
    const ReplanResult result = replan_loop(executor, graph.categories(), targets, models, rc);

    EpisodeOutput out;
    out.reference = annotate_reference(graph, scene.present, targets, config.reward, config.horizon).aos;
    for (const auto& step : result.chain) out.executed.push_back({step.action.object, step.action.destination()});
    out.trace = executor.trace();

    auto& r = out.record;
    r.planner = to_string(planner);
    r.targets.assign(targets.ids().begin(), targets.ids().end());
    std::tie(r.first_step_rational, r.chain_rational) = metric_aos_rationality(out.executed, out.reference);
    r.grasp_count = static_cast<int>(result.chain.size());
    r.success = result.completed && (targets.mask() & ~executor.in_target_area()) == 0;
    r.simulated_time = r.grasp_count * config.minutes_per_grasp;
    r.belief_resets = result.belief_resets;
    r.failure = result.failure;
    if (result.completed && !r.success) r.failure = "reported done with targets outside the target area";
    return out;
}

Interval wilson_interval(std::size_t k, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    constexpr double z = 1.959963984540054;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double denom = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::vector<AggregateRow> aggregate(std::span<const EpisodeRecord> records) {
    std::vector<std::string> planners, tasks;
    auto note = [](std::vector<std::string>& seen, const std::string& s) {
        if (std::find(seen.begin(), seen.end(), s) == seen.end()) seen.push_back(s);
    };
    struct Acc {
        std::size_t n = 0, first = 0, whole = 0, success = 0;
        double grasps = 0.0, grasps_sq = 0.0, time = 0.0;
    };
    std::map<std::pair<std::string, std::string>, Acc> acc;
    for (const auto& r : records) {
        note(planners, r.planner);
        note(tasks, r.task);
        auto& a = acc[{r.planner, r.task}];
        ++a.n;
        a.first += r.first_step_rational;
        a.whole += r.chain_rational;
        a.success += r.success;
        a.grasps += r.grasp_count;
        a.grasps_sq += static_cast<double>(r.grasp_count) * r.grasp_count;
        a.time += r.simulated_time;
    }

    std::vector<AggregateRow> rows;
    for (const auto& p : planners) {
        for (const auto& t : tasks) {
            const auto it = acc.find({p, t});
            if (it == acc.end()) continue;
            const Acc& a = it->second;
            const double n = static_cast<double>(a.n);
            AggregateRow row;
            row.planner = p;
            row.task = t;
            row.episodes = a.n;
            row.ar_f = a.first / n;
            row.ar_w = a.whole / n;
            row.success_rate = a.success / n;
            row.mean_grasps = a.grasps / n;
            row.mean_time = a.time / n;
            row.ar_f_ci = wilson_interval(a.first, a.n);
            row.ar_w_ci = wilson_interval(a.whole, a.n);
            row.success_ci = wilson_interval(a.success, a.n);
            const double var = a.n > 1 ? std::max(0.0, (a.grasps_sq - a.grasps * a.grasps / n) / (n - 1.0)) : 0.0;
            const double half = 1.959963984540054 * std::sqrt(var / n);
            row.grasps_ci = {row.mean_grasps - half, row.mean_grasps + half};
            rows.push_back(row);
        }
    }
    return rows;
}

Json to_json(const AggregateRow& row) {
    auto ci = [](const Interval& i) { return Json::array({i.lo, i.hi}); };
    return {{"planner", row.planner},
            {"task", row.task},
            {"episodes", row.episodes},
            {"ar_f", row.ar_f},
            {"ar_w", row.ar_w},
            {"success_rate", row.success_rate},
            {"mean_grasps", row.mean_grasps},
            {"mean_time", row.mean_time},
            {"ar_f_ci", ci(row.ar_f_ci)},
            {"ar_w_ci", ci(row.ar_w_ci)},
            {"success_ci", ci(row.success_ci)},
            {"grasps_ci", ci(row.grasps_ci)}};
}

std::string format_report(std::span<const AggregateRow> rows) {
    std::ostringstream out;
    out << "AR_f: first executed grasp lies in the reference action object set.\n"
        << "AR_w: executed action object set equals the reference set.\n"
        << "Intervals are 95% (Wilson for rates, normal for grasp counts).\n\n";
    out << std::left << std::setw(12) << "planner" << std::setw(6) << "task" << std::right << std::setw(9)
        << "episodes" << std::setw(22) << "AR_f %" << std::setw(22) << "AR_w %" << std::setw(22) << "success %"
        << std::setw(20) << "grasps" << std::setw(10) << "minutes" << '\n';
    auto pct = [](double v, const Interval& ci) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << 100.0 * v << " [" << std::setprecision(1) << 100.0 * ci.lo << ","
          << 100.0 * ci.hi << "]";
        return s.str();
    };
    for (const auto& r : rows) {
        std::ostringstream g;
        g << std::fixed << std::setprecision(2) << r.mean_grasps << " +/- " << (r.grasps_ci.hi - r.mean_grasps);
        out << std::left << std::setw(12) << r.planner << std::setw(6) << r.task << std::right << std::setw(9)
            << r.episodes << std::setw(22) << pct(r.ar_f, r.ar_f_ci) << std::setw(22) << pct(r.ar_w, r.ar_w_ci)
            << std::setw(22) << pct(r.success_rate, r.success_ci) << std::setw(20) << g.str() << std::setw(10)
            << std::fixed << std::setprecision(2) << r.mean_time << '\n';
    }
    return out.str();
}

std::vector<EpisodeRecord> evaluate(std::span<const GroundTruthScene> corpus, const Config& config,
                                    const EvaluateOptions& options) {
    if (corpus.empty()) throw InvalidInput("corpus is empty");
    if (options.episodes_per_scene < 1) throw InvalidInput("episodes per scene must be positive");
    if (options.planners.empty() || options.tasks.empty()) throw InvalidInput("no planners or tasks selected");

    struct Job {
        std::size_t scene;
        TaskKind task;
        int draw;
        int repeat;
        PlannerKind planner;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        for (TaskKind t : options.tasks) {
            for (int d = 0; d < draws_for(t); ++d) {
                for (int k = 0; k < options.episodes_per_scene; ++k) {
                    for (PlannerKind p : options.planners) jobs.push_back({s, t, d, k, p});
                }
            }
        }
    }

    std::vector<EpisodeRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
            const Job& job = jobs[i];
            try {
                const auto task_id = static_cast<std::uint64_t>(job.task);
                const GroundTruthScene& scene = corpus[job.scene];
                const TargetDesignation targets =
                    sample_targets(job.task, scene.graph->size(), derive_seed(options.seed, job.scene, task_id, job.draw));
                const std::uint64_t episode_seed =
                    derive_seed(options.seed, job.scene, (task_id << 32) | static_cast<std::uint64_t>(job.draw),
                                static_cast<std::uint64_t>(job.repeat) + 1);
                EpisodeRecord r = run_episode(scene, targets, job.planner, config, episode_seed).record;
                r.scene = job.scene;
                r.task = to_string(job.task);
                r.draw = job.draw;
                r.repeat = job.repeat;
                records[i] = std::move(r);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(jobs.size());
            }
        }
    };
    unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return records;
}

std::vector<GroundTruthScene> generate_corpus(const GeneratorConfig& config, std::size_t count, std::uint64_t seed) {
    std::vector<GroundTruthScene> scenes;
    scenes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) scenes.push_back(generate_scene(config, derive_seed(seed, i)));
    return scenes;
}

void write_corpus(const std::filesystem::path& dir, std::span<const GroundTruthScene> scenes) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InvalidInput("cannot create " + dir.string() + ": " + ec.message());
    Json entries = Json::array();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        Json j = to_json(*scenes[i].graph);
        j["seed"] = scenes[i].seed;
        const std::string name = scene_file_name(i);
        write_json_file(dir / name, j);
        entries.push_back({{"file", name}, {"seed", scenes[i].seed}, {"objects", scenes[i].graph->size()}});
    }
    write_json_file(dir / "manifest.json", {{"count", scenes.size()}, {"scenes", entries}});
}

std::vector<GroundTruthScene> load_corpus(const std::filesystem::path& dir, const NoiseProfile& noise) {
    const Json manifest = read_json_file(dir / "manifest.json");
    if (!manifest.contains("scenes") || !manifest.at("scenes").is_array()) {
        throw InvalidInput(dir.string() + "/manifest.json has no 'scenes' array");
    }
    std::vector<GroundTruthScene> scenes;
    for (const auto& e : manifest.at("scenes")) {
        if (!e.contains("file")) throw InvalidInput("manifest entry without 'file'");
        SceneGraph graph = load_scene(dir / e.at("file").get<std::string>(), noise);
        const auto v = validate_scene(graph);
        if (!v.ok()) throw InvalidInput(e.at("file").get<std::string>() + ": " + v.violations.front().message);
        scenes.push_back(make_ground_truth(std::move(graph), e.value("seed", std::uint64_t{0})));
    }
    return scenes;
}

Json to_json(const TraceRecord& t) {
    Json moved = Json::array();
    for (ObjectId m : t.moved) moved.push_back(m.value);
    Json action = {{"kind", to_string(t.action.kind)}};
    if (t.action.is_grasp()) action["object"] = t.action.object.value;
    char digest_hex[20];
    std::snprintf(digest_hex, sizeof digest_hex, "%016llx", static_cast<unsigned long long>(t.observation_digest));
    return {{"step", t.step}, {"action", action}, {"outcome", t.outcome}, {"moved", moved},
            {"observation_digest", digest_hex}};
}

}  // namespace stackplan
