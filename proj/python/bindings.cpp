#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stackplan/harness.hpp"

namespace py = pybind11;
using namespace stackplan;

namespace {

// Python objects cross the boundary as JSON text.
Json from_py(const py::handle& obj) {
    if (obj.is_none()) return Json::object();
    const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return Json::parse(text);
}

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Config config_arg(const py::object& config) { return config.is_none() ? Config{} : config_from_json(from_py(config)); }

TargetDesignation targets_arg(const py::object& targets, std::size_t n) {
    if (targets.is_none()) return TargetDesignation::all(n);
    std::vector<ObjectId> ids;
    for (auto v : targets.cast<std::vector<std::int64_t>>()) {
        if (v < 0) throw InvalidInput("target ids must be nonnegative");
        ids.push_back(ObjectId{static_cast<std::uint32_t>(v)});
    }
    return TargetDesignation(std::move(ids), n);
}

py::object generate(std::uint64_t seed, const py::object& config) {
    return to_py(to_json(*generate_scene(config_arg(config).generator, seed).graph));
}

py::object plan(const py::object& scene, const py::object& targets, const std::string& planner,
                const py::object& config) {
    const Config cfg = config_arg(config);
    const SceneGraph g = scene_from_json(from_py(scene), cfg.noise);
    const PlannerModels models{NoiseModel(cfg.noise, g.categories()), cfg.reward};
    const auto belief = BeliefState::point_mass(JointState::all_present(std::make_shared<const SceneGraph>(g)));
    const int horizon = cfg.horizon > 0 ? cfg.horizon : default_horizon(g.size());
    const Plan p = plan_with(parse_planner(planner), belief, g.categories(), targets_arg(targets, g.size()), models, horizon);
    return to_py(to_json(p, g));
}

py::object simulate(const py::object& scene, const py::object& targets, const std::string& planner,
                    std::uint64_t seed, const py::object& config) {
    const Config cfg = config_arg(config);
    const GroundTruthScene truth = make_ground_truth(scene_from_json(from_py(scene), cfg.noise));
    const auto out = run_episode(truth, targets_arg(targets, truth.graph->size()), parse_planner(planner), cfg, seed);
    Json trace = Json::array();
    for (const auto& t : out.trace) trace.push_back(to_json(t));
    return to_py({{"record", to_json(out.record)}, {"trace", trace}});
}

py::object evaluate_py(const py::list& scenes, const std::vector<std::string>& planners,
                       const std::vector<std::string>& tasks, std::uint64_t seed, int episodes, unsigned threads,
                       const py::object& config) {
    const Config cfg = config_arg(config);
    std::vector<GroundTruthScene> corpus;
    for (const auto& s : scenes) corpus.push_back(make_ground_truth(scene_from_json(from_py(s), cfg.noise)));
    EvaluateOptions opt;
    opt.seed = seed;
    opt.episodes_per_scene = episodes;
    opt.threads = threads;
    if (!planners.empty()) {
        opt.planners.clear();
        for (const auto& p : planners) opt.planners.push_back(parse_planner(p));
    }
    if (!tasks.empty()) {
        opt.tasks.clear();
        for (const auto& t : tasks) opt.tasks.push_back(parse_task(t));
    }
    std::vector<EpisodeRecord> records;
    {
        py::gil_scoped_release release;
        records = evaluate(corpus, cfg, opt);
    }
    Json out = Json::array();
    for (const auto& r : records) out.push_back(to_json(r));
    return to_py(out);
}

py::object aggregate_py(const py::list& records) {
    std::vector<EpisodeRecord> recs;
    for (const auto& r : records) recs.push_back(episode_from_json(from_py(r)));
    Json out = Json::array();
    for (const auto& row : aggregate(recs)) out.push_back(to_json(row));
    return to_py(out);
}

std::vector<std::string> validate(const py::object& scene) {
    const Json j = from_py(scene);
    std::vector<std::string> problems;
    try {
        for (const auto& v : validate_scene(scene_from_json(j)).violations) problems.push_back(v.message);
    } catch (const InvalidInput& e) {
        problems.emplace_back(e.what());
    }
    return problems;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stacked-object grasp planning under uncertainty";
    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);

    m.def("generate_scene", &generate, py::arg("seed"), py::arg("config") = py::none());
    m.def("plan", &plan, py::arg("scene"), py::arg("targets") = py::none(), py::arg("planner") = "pomdp",
          py::arg("config") = py::none());
    m.def("simulate", &simulate, py::arg("scene"), py::arg("targets") = py::none(), py::arg("planner") = "pomdp",
          py::arg("seed") = 0, py::arg("config") = py::none());
    m.def("evaluate", &evaluate_py, py::arg("scenes"), py::arg("planners") = std::vector<std::string>{},
          py::arg("tasks") = std::vector<std::string>{}, py::arg("seed") = 0, py::arg("episodes") = 1,
          py::arg("threads") = 0, py::arg("config") = py::none());
    m.def("aggregate", &aggregate_py, py::arg("records"));
    m.def("validate_scene", &validate, py::arg("scene"));
    m.def(
        "reward",
        [](int natural_children, int ordinary_children, int natural_parents) {
            return reward(RelationCounts{natural_children, ordinary_children, natural_parents}, RewardParams{});
        },
        py::arg("natural_children") = 0, py::arg("ordinary_children") = 0, py::arg("natural_parents") = 0);
    m.def("planners", [] {
        std::vector<std::string> out;
        for (auto k : all_planners()) out.emplace_back(to_string(k));
        return out;
    });
}
