#include "stackplan/simulator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace stackplan {

namespace {

ObjectId id_of(std::size_t i) { return ObjectId{static_cast<std::uint32_t>(i)}; }

enum class Role { Table, Stable, Weak };

std::size_t pick_weighted(const std::vector<CategorySpec>& specs, const std::vector<std::size_t>& allowed, Rng& rng) {
    double total = 0.0;
    for (std::size_t k : allowed) total += specs[k].weight;
    double u = rng.uniform() * total;
    for (std::size_t k : allowed) {
        u -= specs[k].weight;
        if (u < 0.0) return k;
    }
    return allowed.back();
}

}  // namespace

std::vector<CategorySpec> GeneratorConfig::default_catalog() {
    return {
        {"plate", 1.0, true, 5},   {"bowl", 1.2, true, 4},    {"mug", 0.8, true, 3},
        {"cup", 0.6, true, 3},     {"spoon", 1.0, false, 1},  {"fork", 0.8, false, 1},
        {"knife", 0.6, false, 1},  {"chopsticks", 0.4, false, 1}, {"apple", 0.8, false, 2},
        {"banana", 0.6, false, 2}, {"orange", 0.6, false, 2}, {"pear", 0.4, false, 2},
        {"lemon", 0.4, false, 2},  {"peach", 0.4, false, 2},  {"strawberry", 0.4, false, 1},
    };
}

void GeneratorConfig::check() const {
    if (min_objects > max_objects) throw InvalidInput("generator min_objects exceeds max_objects");
    if (max_objects > kMaxObjects) throw InvalidInput("generator max_objects exceeds the supported object count");
    if (p_stable < 0.0 || p_weak < 0.0 || p_stable + p_weak > 1.0) {
        throw InvalidInput("generator p_stable and p_weak must be nonnegative and sum to at most 1");
    }
    if (p_second_support < 0.0 || p_second_support > 1.0) throw InvalidInput("generator p_second_support outside [0, 1]");
    double total = 0.0;
    for (const auto& c : categories) {
        if (c.weight < 0.0) throw InvalidInput("category '" + c.name + "' has a negative weight");
        total += c.weight;
    }
    if (!(total > 0.0)) throw InvalidInput("generator has no enabled categories");
}

std::vector<std::string> GeneratorConfig::category_names() const {
    std::vector<std::string> names;
    for (const auto& c : categories) names.push_back(c.name);
    return names;
}

GroundTruthScene make_ground_truth(SceneGraph graph, std::uint64_t seed) {
    const auto n = graph.size();
    return GroundTruthScene{std::make_shared<const SceneGraph>(std::move(graph)), full_mask(n), seed};
}

GroundTruthScene generate_scene(const GeneratorConfig& config, std::uint64_t seed) {
    config.check();
    Rng rng(seed);
    const auto& specs = config.categories;
    const auto n = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(config.min_objects), static_cast<std::int64_t>(config.max_objects)));

    std::vector<std::size_t> enabled;
    std::vector<std::size_t> containers;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        if (specs[k].weight > 0.0) {
            enabled.push_back(k);
            if (specs[k].container) containers.push_back(k);
        }
    }

    std::vector<std::size_t> cat(n);
    std::vector<Role> role(n);
    for (std::size_t i = 0; i < n; ++i) {
        cat[i] = pick_weighted(specs, enabled, rng);
        const double u = rng.uniform();
        role[i] = u < config.p_stable ? Role::Stable : u < config.p_stable + config.p_weak ? Role::Weak : Role::Table;
    }

    // Stable children need a container that is not itself a stable child.
    const bool wants_stable = std::any_of(role.begin(), role.end(), [](Role r) { return r == Role::Stable; });
    if (wants_stable) {
        if (containers.empty()) {
            for (auto& r : role) {
                if (r == Role::Stable) r = Role::Table;
            }
        } else {
            bool has_host = false;
            std::size_t first_free = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (role[i] == Role::Stable) continue;
                if (first_free == n) first_free = i;
                if (specs[cat[i]].container) has_host = true;
            }
            if (first_free == n) {
                role[0] = Role::Table;
                first_free = 0;
            }
            if (!has_host && !specs[cat[first_free]].container) cat[first_free] = pick_weighted(specs, containers, rng);
        }
    }

    // Placement order doubles as id order: free containers, then stacked
    // containers, then everything else; larger objects first within a tier.
    auto tier = [&](std::size_t i) {
        if (!specs[cat[i]].container) return 2;
        return role[i] == Role::Stable ? 1 : 0;
    };
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (tier(a) != tier(b)) return tier(a) < tier(b);
        return specs[cat[a]].size > specs[cat[b]].size;
    });

    std::vector<std::string> names(n);
    std::vector<SupportEdge> edges;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t i = order[pos];
        const auto& spec = specs[cat[i]];
        names[pos] = spec.name;
        const ObjectId self = id_of(pos);

        if (role[i] == Role::Stable) {
            std::vector<std::size_t> hosts;
            std::vector<std::size_t> fallback;
            for (std::size_t q = 0; q < pos; ++q) {
                const auto& host = specs[cat[order[q]]];
                if (!host.container) continue;
                fallback.push_back(q);
                if (!spec.container || host.size >= spec.size) hosts.push_back(q);
            }
            if (hosts.empty()) hosts = fallback;
            if (!hosts.empty()) {
                edges.push_back({id_of(hosts[rng.below(hosts.size())]), self, SupportKind::Stable});
            }
        } else if (role[i] == Role::Weak) {
            std::vector<std::size_t> hosts;
            for (std::size_t q = 0; q < pos; ++q) {
                if (specs[cat[order[q]]].size > spec.size) hosts.push_back(q);
            }
            if (!hosts.empty()) {
                const std::size_t first = rng.below(hosts.size());
                edges.push_back({id_of(hosts[first]), self, SupportKind::Weak});
                if (hosts.size() > 1 && rng.bernoulli(config.p_second_support)) {
                    std::size_t second = rng.below(hosts.size() - 1);
                    if (second >= first) ++second;
                    edges.push_back({id_of(hosts[second]), self, SupportKind::Weak});
                }
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    return make_ground_truth(SceneGraph(std::move(names), std::move(edges)), seed);
}

Observation observe(const GroundTruthScene& scene, const NoiseModel& noise, Rng& rng) {
    const std::size_t n = scene.graph->size();
    Observation obs(n);
    for (ObjectId id : to_ids(scene.present)) {
        if (rng.bernoulli(noise.recall(id))) obs.detect(id);
    }
    const JointState state = scene.state();
    const auto seen = to_ids(obs.detected());
    for (std::size_t a = 0; a < seen.size(); ++a) {
        for (std::size_t b = a + 1; b < seen.size(); ++b) {
            const ObjectId i = seen[a];
            const ObjectId j = seen[b];
            const RelationClass truth = *state.relation(i, j);
            const double q = noise.recall(i) * noise.recall(j);
            if (rng.bernoulli(q)) {
                obs.set_relation(i, j, truth);
            } else {
                auto wrong = static_cast<std::size_t>(rng.below(kRelationClasses - 1));
                if (wrong >= slot(truth)) ++wrong;
                obs.set_relation(i, j, static_cast<RelationClass>(wrong));
            }
        }
    }
    return obs;
}

ExecutionResult execute(GroundTruthScene& scene, const Action& action, const NoiseModel& noise, Rng& rng) {
    ExecutionResult result;
    if (action.is_grasp() && contains(scene.present, action.object)) {
        result.success = rng.bernoulli(noise.grasp_success(action.object));
        if (result.success) {
            result.moved = stable_closure(*scene.graph, action.object, scene.present);
            scene.present &= ~result.moved;
        }
    }
    result.observation = observe(scene, noise, rng);
    return result;
}

ActionObjectSet aos_of(const Plan& plan) {
    ActionObjectSet aos;
    for (const auto& step : plan.steps) aos.insert({step.action.object, step.destination});
    return aos;
}

AnnotatedChain annotate_reference(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets,
                                  const RewardParams& params, int horizon) {
    auto shared = std::make_shared<const SceneGraph>(graph);
    const NoiseProfile perfect = NoiseProfile::noiseless(graph.categories());
    const PlannerModels models{NoiseModel(perfect, graph.categories()), params};
    const WorkingScene scene = group_targets(graph, present, targets);
    const BeliefState belief = working_belief(BeliefState::point_mass(JointState{shared, present}), targets.mask());
    const int h = horizon > 0 ? horizon : std::max(1, default_horizon(graph.size()));

    AnnotatedChain chain;
    chain.plan = plan_lookahead(scene, belief, models, h).plan;
    chain.aos = aos_of(chain.plan);
    return chain;
}

Observation SimExecutor::observe() {
    Observation obs = stackplan::observe(scene_, noise_, rng_);
    trace_.push_back({trace_.size(), Action::report(), "observe", {}, digest(obs)});
    return obs;
}

Observation SimExecutor::execute(const Action& action) {
    ExecutionResult r = stackplan::execute(scene_, action, noise_, rng_);
    if (r.success) {
        (action.destination() == Destination::Target ? target_area_ : non_target_area_) |= r.moved;
    }
    const char* outcome = !action.is_grasp() ? "observe" : r.success ? "success" : "failure";
    trace_.push_back({trace_.size(), action, outcome, to_ids(r.moved), digest(r.observation)});
    return std::move(r.observation);
}

}  // namespace stackplan
