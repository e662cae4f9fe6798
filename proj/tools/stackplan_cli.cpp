// Command-line front end: generate, plan, simulate, evaluate, report.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stackplan/harness.hpp"

using namespace stackplan;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2 };

struct Globals {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out;
};

Config load(const Globals& g) { return g.config_path.empty() ? Config{} : load_config(g.config_path); }

TargetDesignation parse_targets(const std::string& text, std::size_t n) {
    if (text == "all") return TargetDesignation::all(n);
    std::vector<ObjectId> ids;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        std::size_t used = 0;
        long long v = -1;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
        }
        if (v < 0 || used != item.size()) throw InvalidInput("bad target id '" + item + "'");
        ids.push_back(ObjectId{static_cast<std::uint32_t>(v)});
    }
    return TargetDesignation(std::move(ids), n);
}

SceneGraph load_valid_scene(const std::string& path, const Config& config) {
    SceneGraph graph = load_scene(path, config.noise);
    const auto v = validate_scene(graph);
    if (!v.ok()) throw InvalidInput(path + ": " + v.violations.front().message);
    return graph;
}

// Writes to --out when given, otherwise stdout.
void emit(const Globals& g, const std::string& text) {
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(g.out);
    if (!f) throw InvalidInput("cannot write " + g.out);
    f << text;
}

std::vector<EpisodeRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    std::vector<EpisodeRecord> records;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(episode_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw InvalidInput(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Target-oriented grasp ordering for stacked tabletop scenes"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--config", g.config_path, "JSON config (noise, reward, generator, horizon, retry_cap)");
    app.add_option("--out", g.out, "Output file or directory");

    auto* generate = app.add_subcommand("generate", "Write a scene corpus and manifest");
    std::size_t count = 3200;
    generate->add_option("-n,--count", count, "Number of scenes")->capture_default_str();

    std::string scene_path, targets_text = "all", planner_id = "pomdp";
    auto* plan = app.add_subcommand("plan", "Plan on a scene file and print the chain");
    plan->add_option("scene", scene_path, "Scene JSON")->required();
    plan->add_option("-t,--targets", targets_text, "Comma-separated ids or 'all'")->capture_default_str();
    plan->add_option("-p,--planner", planner_id, "pomdp, one_by_one or rule_only")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Run one closed-loop episode and print its trace");
    simulate->add_option("scene", scene_path, "Scene JSON")->required();
    simulate->add_option("-t,--targets", targets_text, "Comma-separated ids or 'all'")->capture_default_str();
    simulate->add_option("-p,--planner", planner_id, "pomdp, one_by_one or rule_only")->capture_default_str();

    std::string corpus_dir, planners_text = "pomdp,one_by_one,rule_only", tasks_text = "ST,MT,TC";
    int episodes = 1;
    unsigned threads = 0;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Run episodes over a corpus and aggregate metrics");
    evaluate_cmd->add_option("corpus", corpus_dir, "Corpus directory")->required();
    evaluate_cmd->add_option("--planners", planners_text)->capture_default_str();
    evaluate_cmd->add_option("--tasks", tasks_text)->capture_default_str();
    evaluate_cmd->add_option("--episodes", episodes, "Episodes per scene and draw")->capture_default_str();
    evaluate_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");

    std::string records_path;
    auto* report = app.add_subcommand("report", "Summarize episode records");
    report->add_option("records", records_path, "records.jsonl from evaluate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const Config config = load(g);
        if (generate->parsed()) {
            const std::string dir = g.out.empty() ? "corpus" : g.out;
            const auto scenes = generate_corpus(config.generator, count, g.seed);
            write_corpus(dir, scenes);
            std::cout << "wrote " << scenes.size() << " scenes to " << dir << '\n';
        } else if (plan->parsed()) {
            const SceneGraph graph = load_valid_scene(scene_path, config);
            const TargetDesignation targets = parse_targets(targets_text, graph.size());
            const PlannerKind kind = parse_planner(planner_id);
            const auto shared = std::make_shared<const SceneGraph>(graph);
            const NoiseModel noise(config.noise, graph.categories());
            const BeliefState belief = BeliefState::point_mass(JointState::all_present(shared));
            const int horizon = config.horizon > 0 ? config.horizon : std::max(1, default_horizon(graph.size()));
            const Plan p = plan_with(kind, belief, graph.categories(), targets, {noise, config.reward}, horizon);
            Json j = to_json(p, graph);
            j["planner"] = to_string(kind);
            emit(g, j.dump(2) + "\n");
        } else if (simulate->parsed()) {
            const SceneGraph graph = load_valid_scene(scene_path, config);
            const TargetDesignation targets = parse_targets(targets_text, graph.size());
            const PlannerKind kind = parse_planner(planner_id);
            const auto out = run_episode(make_ground_truth(graph, g.seed), targets, kind, config, g.seed);
            std::string lines;
            for (const auto& t : out.trace) lines += to_json(t).dump() + "\n";
            emit(g, lines);
            std::cerr << to_json(out.record).dump() << '\n';
        } else if (evaluate_cmd->parsed()) {
            EvaluateOptions opt;
            opt.planners.clear();
            opt.tasks.clear();
            for (const auto& s : CLI::detail::split(planners_text, ',')) opt.planners.push_back(parse_planner(s));
            for (const auto& s : CLI::detail::split(tasks_text, ',')) opt.tasks.push_back(parse_task(s));
            opt.episodes_per_scene = episodes;
            opt.seed = g.seed;
            opt.threads = threads;
            const auto scenes = load_corpus(corpus_dir, config.noise);
            const auto records = evaluate(scenes, config, opt);
            const auto rows = aggregate(records);
            const std::string table = format_report(rows);
            if (!g.out.empty()) {
                std::filesystem::create_directories(g.out);
                std::ofstream rec(std::filesystem::path(g.out) / "records.jsonl");
                for (const auto& r : records) rec << to_json(r).dump() << '\n';
                Json summary = Json::array();
                for (const auto& r : rows) summary.push_back(to_json(r));
                write_json_file(std::filesystem::path(g.out) / "summary.json", summary);
                std::ofstream(std::filesystem::path(g.out) / "summary.txt") << table;
            }
            std::cout << table;
        } else if (report->parsed()) {
            const auto records = read_records(records_path);
            const auto rows = aggregate(records);
            if (!g.out.empty()) {
                Json summary = Json::array();
                for (const auto& r : rows) summary.push_back(to_json(r));
                write_json_file(g.out, summary);
            }
            std::cout << format_report(rows);
        }
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
    return kOk;
}
