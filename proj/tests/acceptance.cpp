// Acceptance checks. Prints one PASS/FAIL line per criterion, plus indented
// detail lines, and exits nonzero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "stackplan/harness.hpp"

using namespace stackplan;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void verdict(int k, bool ok, const std::string& what, double secs) {
    std::printf("criterion %d %s: %s (%.2fs)\n", k, ok ? "PASS" : "FAIL", what.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
}

#define info(...)               \
    do {                        \
        std::printf("    ");    \
        std::printf(__VA_ARGS__); \
        std::printf("\n");      \
    } while (0)

ObjectId oid(std::size_t i) { return ObjectId{static_cast<std::uint32_t>(i)}; }

PlannerModels models_for(const SceneGraph& g, const NoiseProfile& profile) {
    return {NoiseModel(profile, g.categories()), RewardParams{}};
}

BeliefState truth_belief(const SceneGraph& g) {
    return BeliefState::point_mass(JointState::all_present(std::make_shared<const SceneGraph>(g)));
}

// ---------------------------------------------------------------------------
// 1

void bowl_spoon() {
    const auto t0 = Clock::now();
    const SceneGraph g({"bowl", "spoon"}, {{oid(0), oid(1), SupportKind::Stable}});
    const TargetDesignation targets = TargetDesignation::all(2);
    const auto m = models_for(g, NoiseProfile::noiseless(g.categories()));
    const Plan p = plan_with(PlannerKind::Pomdp, truth_belief(g), g.categories(), targets, m, default_horizon(2));
    const Plan b = plan_with(PlannerKind::OneByOne, truth_belief(g), g.categories(), targets, m, default_horizon(2));

    const bool pomdp_ok = p.steps.size() == 1 && p.steps[0].action == Action::grasp_to_target(oid(0)) &&
                          p.steps[0].moved == std::vector<ObjectId>{oid(0), oid(1)};
    const bool base_ok = b.steps.size() == 2;
    info("pomdp grasps %zu (value %.6f), one_by_one grasps %zu", p.steps.size(), p.value, b.steps.size());
    const double secs = seconds_since(t0);
    verdict(1, pomdp_ok && base_ok && secs < 1.0, "bowl carrying spoon: pomdp 1 grasp, one_by_one 2",
            secs);
}

// ---------------------------------------------------------------------------
// 2: exhaustive enumeration written against the problem statement, sharing
// only the target grouping with the planner.

namespace oracle {

ObjectMask closure(const SceneGraph& g, ObjectId o, ObjectMask present) {
    ObjectMask out = bit(o);
    std::vector<ObjectId> stack{o};
    while (!stack.empty()) {
        const ObjectId x = stack.back();
        stack.pop_back();
        for (const auto& e : g.edges()) {
            if (e.parent == x && e.kind == SupportKind::Stable && contains(present, e.child) && !contains(out, e.child)) {
                out |= bit(e.child);
                stack.push_back(e.child);
            }
        }
    }
    return out;
}

ObjectMask below(const SceneGraph& g, ObjectId o, ObjectMask present) {
    ObjectMask out = 0;
    std::vector<ObjectId> stack{o};
    while (!stack.empty()) {
        const ObjectId x = stack.back();
        stack.pop_back();
        for (const auto& e : g.edges()) {
            if (e.parent == x && contains(present, e.child) && !contains(out, e.child)) {
                out |= bit(e.child);
                stack.push_back(e.child);
            }
        }
    }
    return out;
}

double grasp_reward(const SceneGraph& g, ObjectMask present, ObjectId o) {
    int nc = 0, oc = 0, np = 0;
    for (const auto& e : g.edges()) {
        if (e.parent == o && contains(present, e.child)) (e.kind == SupportKind::Stable ? nc : oc)++;
        if (e.child == o && contains(present, e.parent) && e.kind == SupportKind::Stable) ++np;
    }
    if (nc > 0) return -10.0 + 5.0 * std::tanh(nc);
    if (oc > 0) return -10.0 - 10.0 * std::tanh(oc);
    if (np > 0) return -12.0;
    return -10.0;
}

struct Chain {
    double value = 0.0;
    Action first;
};

void enumerate(const WorkingScene& ws, ObjectMask present, double discount, double value, std::optional<Action> first,
               std::vector<Chain>& out) {
    if ((present & ws.targets) == 0) {
        out.push_back({value, first.value_or(Action::report())});
        return;
    }
    const TargetGroup* group = nullptr;
    for (const auto& grp : ws.groups) {
        if ((grp.mask() & present) != 0) {
            group = &grp;
            break;
        }
    }
    if (group == nullptr) return;
    ObjectMask reach = group->mask() & present;
    for (ObjectId m : group->members) reach |= below(ws.graph, m, present);

    for (std::size_t i = 0; i < ws.graph.size(); ++i) {
        const ObjectId o = oid(i);
        if (!contains(reach, o)) continue;
        const ObjectMask moved = closure(ws.graph, o, present);
        if ((below(ws.graph, o, present) & ~moved) != 0) continue;  // something rests on it outside the stack
        for (Destination d : {Destination::Target, Destination::NonTarget}) {
            const bool all_targets = (moved & ws.targets) == moved;
            const bool no_targets = (moved & ws.targets) == 0;
            if (d == Destination::Target && !(all_targets && contains(group->mask(), o))) continue;
            if (d == Destination::NonTarget && !no_targets) continue;
            const Action a = Action::grasp(o, d);
            enumerate(ws, present & ~moved, discount * 0.8, value + discount * grasp_reward(ws.graph, present, o),
                      first ? first : std::optional<Action>(a), out);
        }
    }
}

}  // namespace oracle

void brute_force() {
    const auto t0 = Clock::now();
    std::size_t scenes = 0, value_mismatch = 0, action_mismatch = 0, multi_step = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        GeneratorConfig gen;
        gen.min_objects = 1;
        gen.max_objects = 4;
        if (seed % 2 == 1) {
            gen.p_stable = 0.45;
            gen.p_weak = 0.45;
        }
        const GroundTruthScene scene = generate_scene(gen, derive_seed(7, seed));
        const SceneGraph& g = *scene.graph;
        Rng rng(derive_seed(8, seed));
        std::vector<ObjectId> chosen;
        while (chosen.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (rng.bernoulli(0.5)) chosen.push_back(oid(i));
            }
        }
        const TargetDesignation targets(chosen, g.size());
        const WorkingScene ws = group_targets(g, full_mask(g.size()), targets);
        const auto m = models_for(g, NoiseProfile::noiseless(g.categories()));
        const auto got = plan_lookahead(ws, working_belief(truth_belief(g), targets.mask()), m, default_horizon(g.size()));

        std::vector<oracle::Chain> chains;
        oracle::enumerate(ws, ws.present, 1.0, 0.0, std::nullopt, chains);
        ++scenes;
        if (got.plan.steps.size() > 1) ++multi_step;
        if (chains.empty()) {
            ++value_mismatch;
            continue;
        }
        double best = chains.front().value;
        for (const auto& c : chains) best = std::max(best, c.value);
        worst = std::max(worst, std::abs(best - got.plan.value));
        if (std::abs(best - got.plan.value) > 1e-9) ++value_mismatch;

        // documented tie-break: Target before NonTarget, then lowest id
        std::optional<Action> preferred;
        auto rank = [](const Action& a) { return std::pair{a.kind != ActionKind::GraspToTarget, a.object.value}; };
        for (const auto& c : chains) {
            if (c.value < best - 1e-9) continue;
            if (!preferred || rank(c.first) < rank(*preferred)) preferred = c.first;
        }
        if (!(got.best_action == *preferred)) ++action_mismatch;
    }
    const double secs = seconds_since(t0);
    info("%zu scenes (%zu with multi-step optima), value mismatches %zu, first-action mismatches %zu, max |dv| %.3g",
         scenes, multi_step, value_mismatch, action_mismatch, worst);
    verdict(2, scenes >= 200 && value_mismatch == 0 && action_mismatch == 0 && secs < 60.0,
            "lookahead value and first action equal exhaustive enumeration on <=4-object scenes", secs);
}

// ---------------------------------------------------------------------------
// 3

void reward_suite() {
    const auto t0 = Clock::now();
    const RewardParams p;
    bool ok = true;
    auto expect = [&](const char* label, RelationCounts c, double want) {
        const double got = reward(c, p);
        const bool good = std::abs(got - want) <= 1e-9;
        ok = ok && good;
        info("%-6s got %.9f want %.9f %s", label, got, want, good ? "" : "MISMATCH");
    };
    for (int k = 1; k <= 3; ++k) {
        const std::string nc = "nc=" + std::to_string(k), oc = "oc=" + std::to_string(k);
        expect(nc.c_str(), {k, 0, 0}, -10.0 + 5.0 * std::tanh(static_cast<double>(k)));
        expect(oc.c_str(), {0, k, 0}, -10.0 - 10.0 * std::tanh(static_cast<double>(k)));
    }
    expect("np=1", {0, 0, 1}, -12.0);
    expect("none", {0, 0, 0}, -10.0);
    expect("nc+oc", {1, 2, 1}, -10.0 + 5.0 * std::tanh(1.0));

    // The written literals disagree with tanh past the fourth decimal and two
    // of them lie above -5, which the nc branch cannot reach.
    const std::array<std::pair<const char*, double>, 6> literals{{{"-6.19208", -6.19208},
                                                                  {"-4.82476", -4.82476},
                                                                  {"-4.75263", -4.75263},
                                                                  {"-19.64028", -19.64028},
                                                                  {"-12", -12.0},
                                                                  {"-10", -10.0}}};
    std::vector<double> all_values;
    for (int k = 1; k <= 3; ++k) {
        all_values.push_back(reward({k, 0, 0}, p));
        all_values.push_back(reward({0, k, 0}, p));
    }
    all_values.push_back(-12.0);
    all_values.push_back(-10.0);
    for (const auto& [text, v] : literals) {
        double nearest = all_values.front();
        for (double x : all_values) {
            if (std::abs(x - v) < std::abs(nearest - v)) nearest = x;
        }
        info("literal %-9s nearest branch value %.9f (|d| = %.2g)", text, nearest, std::abs(nearest - v));
    }

    std::size_t checked = 0, nonneg = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const GroundTruthScene s = generate_scene(GeneratorConfig{}, derive_seed(3, seed));
        Rng rng(seed);
        const ObjectMask present = full_mask(s.graph->size()) & (rng.bernoulli(0.5) ? rng.next() : ~ObjectMask{0});
        for (ObjectId o : to_ids(present)) {
            for (Destination d : {Destination::Target, Destination::NonTarget}) {
                ++checked;
                if (reward(*s.graph, present, Action::grasp(o, d), p) >= 0.0) ++nonneg;
            }
        }
    }
    info("%zu grasp rewards over 10000 graphs, %zu nonnegative", checked, nonneg);
    verdict(3, ok && nonneg == 0, "reward branches match direct tanh evaluation; every reward negative", seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 4

void calibration() {
    const auto t0 = Clock::now();
    constexpr std::size_t kEpisodes = 10000;
    constexpr std::size_t kMinBucket = 1000;
    std::array<double, 10> sum_p{}, sum_hit{};
    std::array<std::size_t, 10> count{};
    double worst_norm = 0.0;
    bool presence_in_range = true;

    for (std::size_t e = 0; e < kEpisodes; ++e) {
        GroundTruthScene scene = generate_scene(GeneratorConfig{}, derive_seed(41, e));
        const auto categories = scene.graph->categories();
        const std::vector<std::string> cats(categories.begin(), categories.end());
        const std::size_t n = cats.size();
        const NoiseProfile profile = NoiseProfile::uniform(cats, 0.9, 0.8);
        const PlannerModels m{NoiseModel(profile, cats), RewardParams{}};
        const TaskKind task = all_tasks()[e % 3];
        const TargetDesignation targets = sample_targets(task, n, derive_seed(42, e));
        Rng rng(derive_seed(43, e));

        auto update = [&](const BeliefState& b, const Action& a, const Observation& obs) {
            try {
                return belief_update(b, a, obs, m.noise);
            } catch (const ImpossibleObservation&) {
                return belief_update(BeliefState(n, 1.0, 0.8), Action::report(), obs, m.noise);
            }
        };
        auto record = [&](const BeliefState& b) {
            worst_norm = std::max(worst_norm, b.max_normalization_error());
            for (std::size_t i = 0; i < n; ++i) {
                const double p = b.presence(oid(i));
                if (!(p >= 0.0 && p <= 1.0)) presence_in_range = false;
                const std::size_t k = std::min<std::size_t>(9, static_cast<std::size_t>(p * 10.0));
                sum_p[k] += p;
                sum_hit[k] += contains(scene.present, oid(i)) ? 1.0 : 0.0;
                ++count[k];
            }
        };

        BeliefState belief = update(BeliefState(n, 1.0, 0.8), Action::report(), observe(scene, m.noise, rng));
        record(belief);
        for (std::size_t step = 0; step < 6 * n; ++step) {
            const Plan plan = plan_with(PlannerKind::Pomdp, belief, cats, targets, m, default_horizon(n));
            const Action a = plan.first_action();
            if (!a.is_grasp()) break;
            belief = update(belief, a, execute(scene, a, m.noise, rng).observation);
            record(belief);
        }
    }

    bool ok = presence_in_range && worst_norm <= 1e-9;
    std::size_t scored = 0;
    for (std::size_t k = 0; k < 10; ++k) {
        if (count[k] == 0) {
            info("decile %zu: empty", k);
            continue;
        }
        const double mean_p = sum_p[k] / count[k], freq = sum_hit[k] / count[k];
        const bool enough = count[k] >= kMinBucket;
        const bool good = std::abs(mean_p - freq) <= 0.03;
        if (enough) {
            ++scored;
            ok = ok && good;
        }
        info("decile %zu: n=%zu mean belief %.4f observed %.4f |d| %.4f%s", k, count[k], mean_p, freq,
             std::abs(mean_p - freq), enough ? (good ? "" : " OUT OF TOLERANCE") : " (too few samples, not scored)");
    }
    info("max factor normalization error %.3g", worst_norm);
    verdict(4, ok && scored > 0, "presence belief calibrated within 0.03 per decile; factors sum to 1", seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 5

void noiseless() {
    const auto t0 = Clock::now();
    const auto corpus = generate_corpus(GeneratorConfig{}, 500, 5);
    Config cfg;
    cfg.noise = NoiseProfile::noiseless(default_categories());
    EvaluateOptions opt;
    opt.planners = {PlannerKind::Pomdp};
    opt.seed = 5;
    bool ok = true;
    for (const auto& row : aggregate(evaluate(corpus, cfg, opt))) {
        info("%s %s: AR_f %.4f AR_w %.4f success %.4f over %zu episodes", row.planner.c_str(), row.task.c_str(), row.ar_f,
             row.ar_w, row.success_rate, row.episodes);
        ok = ok && row.ar_f == 1.0 && row.ar_w == 1.0 && row.success_rate == 1.0;
    }
    verdict(5, ok, "noiseless pomdp scores AR_f = AR_w = success = 1 on every task", seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 6

void table_ordering() {
    const auto t0 = Clock::now();
    Config cfg;
    cfg.generator.p_stable = 0.7;
    cfg.generator.p_weak = 0.1;
    for (auto& c : cfg.generator.categories) {
        if (c.container) c.weight *= 3.0;
    }
    const auto corpus = generate_corpus(cfg.generator, 500, 2024);
    EvaluateOptions opt;
    opt.seed = 99;
    const auto rows = aggregate(evaluate(corpus, cfg, opt));
    auto row = [&](const char* planner, const char* task) -> const AggregateRow& {
        for (const auto& r : rows) {
            if (r.planner == planner && r.task == task) return r;
        }
        throw std::logic_error("missing aggregate row");
    };

    bool ok = true;
    for (const char* t : {"ST", "MT", "TC"}) {
        const auto& p = row("pomdp", t);
        const auto& b = row("one_by_one", t);
        const auto& r = row("rule_only", t);
        const double gap = 100.0 * (p.ar_w - b.ar_w);
        const double ratio = p.mean_grasps / b.mean_grasps;
        info("%s: AR_w pomdp %.2f one_by_one %.2f rule_only %.2f | gap %.2f pp | grasps %.3f / %.3f = %.3f", t,
             100 * p.ar_w, 100 * b.ar_w, 100 * r.ar_w, gap, p.mean_grasps, b.mean_grasps, ratio);
        if (std::string(t) != "ST") ok = ok && gap >= 20.0;
        if (std::string(t) == "MT") ok = ok && r.ar_w < p.ar_w;
        ok = ok && ratio <= 0.85;
    }
    verdict(6, ok, "stable-rich corpus: pomdp beats one_by_one by >=20pp AR_w on MT/TC, rule_only below pomdp on MT, "
                   "grasp ratio <= 0.85",
            seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 7

void stable_split() {
    const auto t0 = Clock::now();
    const SceneGraph g({"plate", "apple"}, {{oid(0), oid(1), SupportKind::Stable}});
    NoiseProfile profile = NoiseProfile::uniform(g.categories(), 1.0, 1.0);
    profile.grasp_success["plate"] = 0.3;
    profile.grasp_success["apple"] = 0.95;
    const auto m = models_for(g, profile);
    const TargetDesignation targets = TargetDesignation::all(2);
    const int horizon = default_horizon(2);
    const double gamma = 0.8;

    // Expected discounted return of a fixed policy, by state and depth.
    // joint: grasp the plate until it goes. split: apple until it goes, then plate.
    const double r_joint = -10.0 + 5.0 * std::tanh(1.0), r_apple = -12.0, r_plate = -10.0;
    std::function<double(int)> joint = [&](int d) { return d == 0 ? 0.0 : r_joint + gamma * 0.7 * joint(d - 1); };
    std::function<double(int)> plate_alone = [&](int d) {
        return d == 0 ? 0.0 : r_plate + gamma * 0.7 * plate_alone(d - 1);
    };
    std::function<double(int)> split = [&](int d) {
        return d == 0 ? 0.0 : r_apple + gamma * (0.95 * plate_alone(d - 1) + 0.05 * split(d - 1));
    };
    const double v_joint = joint(horizon), v_split = split(horizon);

    const auto got = plan_lookahead(group_targets(g, full_mask(2), targets),
                                    working_belief(truth_belief(g), targets.mask()), m, horizon);
    const bool split_better = v_split > v_joint;
    const Action want = split_better ? Action::grasp_to_target(oid(1)) : Action::grasp_to_target(oid(0));
    const bool ok = got.best_action == want && std::abs(got.plan.value - std::max(v_joint, v_split)) <= 1e-9;
    info("horizon %d: joint chain %.6f, split chain %.6f; planner picks grasp of %s with value %.6f", horizon, v_joint,
         v_split, g.category(got.best_action.object).c_str(), got.plan.value);
    if (!split_better) {
        info("split is not optimal here: both chains need the 0.3 plate grasp, and splitting adds an apple grasp");
    }
    verdict(7, ok, "planner takes the enumerated optimum of joint vs split chains on the plate/apple pair",
            seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 8

class ScriptedExecutor : public Executor {
public:
    ScriptedExecutor(GroundTruthScene scene, int fail_at) : scene_(std::move(scene)), fail_at_(fail_at) {}
    Observation observe() override { return scene_.state().exact_observation(); }
    Observation execute(const Action& a) override {
        if (a.is_grasp()) {
            const bool ok = grasps_++ != fail_at_;
            if (ok) scene_.present &= ~stable_closure(*scene_.graph, a.object, scene_.present);
        }
        return observe();
    }
    ObjectMask present() const { return scene_.present; }

private:
    GroundTruthScene scene_;
    int fail_at_;
    int grasps_ = 0;
};

void robustness() {
    const auto t0 = Clock::now();
    std::size_t good = 0, total = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const GroundTruthScene scene = generate_scene(GeneratorConfig{}, derive_seed(81, s));
        const auto cats = scene.graph->categories();
        const std::size_t n = cats.size();
        const auto m = models_for(*scene.graph, NoiseProfile::uniform(cats, 1.0, 0.9));
        const TargetDesignation targets = sample_targets(all_tasks()[s % 3], n, derive_seed(82, s));
        ReplanConfig rc;

        ScriptedExecutor clean(scene, -1);
        const auto base = replan_loop(clean, cats, targets, m, rc);
        Rng rng(derive_seed(83, s));
        const int fail_at = static_cast<int>(rng.below(std::max<std::size_t>(base.chain.size(), 1)));
        ScriptedExecutor faulty(scene, fail_at);
        const auto run = replan_loop(faulty, cats, targets, m, rc);

        auto aos = [](const ReplanResult& r) {
            ActionObjectSet out;
            for (const auto& st : r.chain) out.insert({st.action.object, st.action.destination()});
            return out;
        };
        ++total;
        const bool ok = base.completed && run.completed && run.chain.size() == base.chain.size() + 1 &&
                        aos(run) == aos(base) && (faulty.present() & targets.mask()) == 0 &&
                        run.chain[static_cast<std::size_t>(fail_at)].action == run.chain[static_cast<std::size_t>(fail_at) + 1].action;
        if (ok) ++good;
        else info("scenario %llu: base %zu steps, with failure %zu steps, completed %d", static_cast<unsigned long long>(s),
                  base.chain.size(), run.chain.size(), run.completed);
    }
    info("%zu of %zu scenarios recovered with one extra step and the same AOS", good, total);
    verdict(8, good == total && total == 100, "one forced grasp failure costs exactly one reissued step", seconds_since(t0));
}

}  // namespace

int main() {
    bowl_spoon();
    brute_force();
    reward_suite();
    calibration();
    noiseless();
    table_ordering();
    stable_split();
    robustness();
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "SOME FAIL", failures);
    return failures == 0 ? 0 : 1;
}
