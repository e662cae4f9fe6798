#include "stackplan/planner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace stackplan {

namespace {

ObjectId id_of(std::size_t i) { return ObjectId{static_cast<std::uint32_t>(i)}; }

// Values closer than this are ties and fall back to action order.
constexpr double kTieTolerance = 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// Targets and groups

TargetDesignation::TargetDesignation(std::vector<ObjectId> targets, std::size_t n_objects) {
    if (targets.empty()) throw InvalidInput("target designation is empty");
    for (ObjectId t : targets) {
        if (t.index() >= n_objects) {
            throw InvalidInput("target " + std::to_string(t.value) + " is not an object of this scene (" +
                               std::to_string(n_objects) + " objects)");
        }
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    ids_ = std::move(targets);
    mask_ = to_mask(ids_);
}

TargetDesignation TargetDesignation::all(std::size_t n_objects) {
    std::vector<ObjectId> ids(n_objects);
    for (std::size_t i = 0; i < n_objects; ++i) ids[i] = id_of(i);
    return TargetDesignation(std::move(ids), n_objects);
}

WorkingScene group_targets(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets) {
    const std::size_t n = graph.size();
    for (ObjectId t : targets.ids()) {
        if (t.index() >= n) throw std::invalid_argument("group_targets: unknown target " + std::to_string(t.value));
    }

    WorkingScene scene;
    scene.present = present;
    scene.targets = targets.mask();

    std::vector<SupportEdge> edges(graph.edges().begin(), graph.edges().end());
    for (auto& e : edges) {
        if (e.kind == SupportKind::Stable && targets.contains(e.parent) != targets.contains(e.child)) {
            e.kind = SupportKind::Weak;
        }
    }
    scene.graph = SceneGraph(std::vector<std::string>(graph.categories().begin(), graph.categories().end()),
                             std::move(edges));

    // Components of present targets under the remaining stable edges.
    std::vector<std::size_t> component(n);
    std::iota(component.begin(), component.end(), 0);
    auto find = [&](std::size_t x) {
        while (component[x] != x) x = component[x] = component[component[x]];
        return x;
    };
    const ObjectMask live_targets = targets.mask() & present;
    for (const auto& e : scene.graph.edges()) {
        if (e.kind == SupportKind::Stable && contains(live_targets, e.parent) && contains(live_targets, e.child)) {
            component[find(e.parent.index())] = find(e.child.index());
        }
    }
    std::vector<TargetGroup> groups;
    std::vector<std::size_t> group_of(n, SIZE_MAX);
    for (ObjectId t : to_ids(live_targets)) {
        const std::size_t c = find(t.index());
        if (group_of[c] == SIZE_MAX) {
            group_of[c] = groups.size();
            groups.push_back({});
        }
        groups[group_of[c]].members.push_back(t);
    }
    for (auto& g : groups) {
        const ObjectMask members = g.mask();
        g.root = g.members.front();
        for (ObjectId m : g.members) {
            bool has_member_parent = false;
            for (ObjectId p : scene.graph.parents(m)) {
                if (contains(members, p) && scene.graph.edge_kind(p, m) == SupportKind::Stable) has_member_parent = true;
            }
            if (!has_member_parent) g.root = m;
        }
    }
    // Creation order already follows the smallest member id.

    std::vector<ObjectMask> below(groups.size(), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        ObjectMask subtree = 0;
        for (ObjectId m : groups[g].members) subtree |= descendants(scene.graph, m, present);
        for (std::size_t h = 0; h < groups.size(); ++h) {
            if (h != g && (groups[h].mask() & subtree) != 0) below[g] |= ObjectMask{1} << h;
        }
    }
    for (std::size_t g : leaf_to_root_order(groups.size(), full_mask(groups.size()),
                                            [&](std::size_t k) { return below[k]; })) {
        scene.groups.push_back(std::move(groups[g]));
    }
    return scene;
}

std::optional<Destination> legal_destination(const WorkingScene& scene, ObjectMask present, ObjectId o) {
    if (!contains(present, o)) return std::nullopt;
    const ObjectMask closure = stable_closure(scene.graph, o, present);
    if ((descendants(scene.graph, o, present) & ~closure) != 0) return std::nullopt;
    const ObjectMask carried_targets = closure & scene.targets;
    if (carried_targets == closure) return Destination::Target;
    if (carried_targets == 0) return Destination::NonTarget;
    return std::nullopt;
}

const TargetGroup* active_group(const WorkingScene& scene, ObjectMask present) {
    for (const auto& g : scene.groups) {
        if ((g.mask() & present) != 0) return &g;
    }
    return nullptr;
}

std::vector<Action> action_space(const WorkingScene& scene, const DescendantTable& table, const TargetGroup* group,
                                 ObjectMask present) {
    if ((scene.targets & present) == 0) return {Action::report()};
    if (group == nullptr) return {};

    ObjectMask candidates = 0;
    for (ObjectId m : group->members) {
        for (ObjectId o : table.entry(m)) candidates |= bit(o);
    }
    candidates &= present;

    std::vector<Action> to_target;
    std::vector<Action> to_non_target;
    const ObjectMask members = group->mask();
    for (ObjectId o : to_ids(candidates)) {
        const auto dest = legal_destination(scene, present, o);
        if (!dest) continue;
        if (*dest == Destination::Target && contains(members, o)) {
            to_target.push_back(Action::grasp_to_target(o));
        } else if (*dest == Destination::NonTarget && !contains(scene.targets, o)) {
            to_non_target.push_back(Action::grasp_to_non_target(o));
        }
    }
    to_target.insert(to_target.end(), to_non_target.begin(), to_non_target.end());
    return to_target;
}

BeliefState working_belief(const BeliefState& belief, ObjectMask targets) {
    BeliefState out = belief;
    const std::size_t n = belief.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (contains(targets, id_of(i)) == contains(targets, id_of(j))) continue;
            RelationBelief r = belief.relation(id_of(i), id_of(j));
            r[slot(RelationClass::OrdinaryParent)] += r[slot(RelationClass::NaturalParent)];
            r[slot(RelationClass::OrdinaryChild)] += r[slot(RelationClass::NaturalChild)];
            r[slot(RelationClass::NaturalParent)] = 0.0;
            r[slot(RelationClass::NaturalChild)] = 0.0;
            out.set_relation(id_of(i), id_of(j), r);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lookahead

namespace {

class Lookahead {
public:
    Lookahead(const WorkingScene& scene, const BeliefState& belief, const PlannerModels& models, int horizon)
        : scene_(scene),
          table_(build_descendant_table(scene.graph)),
          belief_(belief),
          models_(models),
          memo_(static_cast<std::size_t>(horizon) + 1) {}

    struct Choice {
        double value = 0.0;
        int action = -1;
    };

    struct Edge {
        Action action;
        double reward = 0.0;
        double success = 1.0;
        ObjectMask moved = 0;
    };

    const std::vector<Edge>& edges(ObjectMask present) {
        auto it = edges_.find(present);
        if (it != edges_.end()) return it->second;
        std::vector<Edge> out;
        for (const Action& a : action_space(scene_, table_, active_group(scene_, present), present)) {
            if (!a.is_grasp()) continue;
            out.push_back({a, expected_reward(belief_, a, models_.reward, present),
                           models_.noise.grasp_success(a.object), stable_closure(scene_.graph, a.object, present)});
        }
        return edges_.emplace(present, std::move(out)).first->second;
    }

    Choice solve(ObjectMask present, int depth) {
        if ((scene_.targets & present) == 0 || depth == 0) return {};
        auto& level = memo_[static_cast<std::size_t>(depth)];
        if (auto it = level.find(present); it != level.end()) return it->second;

        const double gamma = models_.reward.discount;
        Choice best;
        const auto& options = edges(present);
        for (std::size_t k = 0; k < options.size(); ++k) {
            const Edge& e = options[k];
            double future = e.success * solve(present & ~e.moved, depth - 1).value;
            if (e.success < 1.0) future += (1.0 - e.success) * solve(present, depth - 1).value;
            const double q = e.reward + gamma * future;
            if (best.action < 0 || q > best.value + kTieTolerance) best = {q, static_cast<int>(k)};
        }
        level.emplace(present, best);
        return best;
    }

    LookaheadResult run(int horizon) {
        LookaheadResult result;
        const Choice root = solve(scene_.present, horizon);
        result.plan.value = root.value;

        ObjectMask present = scene_.present;
        for (int depth = horizon; depth > 0; --depth) {
            const Choice c = solve(present, depth);
            if (c.action < 0) break;
            const Edge& e = edges(present)[static_cast<std::size_t>(c.action)];
            result.plan.steps.push_back({e.action, to_ids(e.moved), e.action.destination()});
            present &= ~e.moved;
        }
        result.best_action = result.plan.first_action();
        return result;
    }

private:
    const WorkingScene& scene_;
    DescendantTable table_;
    const BeliefState& belief_;
    const PlannerModels& models_;
    std::unordered_map<ObjectMask, std::vector<Edge>> edges_;
    std::vector<std::unordered_map<ObjectMask, Choice>> memo_;
};

}  // namespace

LookaheadResult plan_lookahead(const WorkingScene& scene, const BeliefState& belief, const PlannerModels& models,
                               int horizon) {
    if (horizon < 1) throw std::invalid_argument("plan_lookahead: horizon must be at least 1");
    if (belief.size() != scene.graph.size() || models.noise.size() != scene.graph.size()) {
        throw std::invalid_argument("plan_lookahead: belief, noise model and scene sizes differ");
    }
    Lookahead search(scene, belief, models, horizon);
    return search.run(horizon);
}

LookaheadResult plan_lookahead(const BeliefState& belief, std::span<const std::string> categories,
                               const TargetDesignation& targets, const PlannerModels& models, int horizon) {
    if (horizon < 1) throw std::invalid_argument("plan_lookahead: horizon must be at least 1");
    const MapScene map = most_likely_scene(belief, categories);
    const WorkingScene scene = group_targets(map.graph, map.present, targets);
    return plan_lookahead(scene, working_belief(belief, targets.mask()), models, horizon);
}

// ---------------------------------------------------------------------------
// Baselines

namespace {

void append_step(Plan& plan, const SceneGraph& graph, ObjectMask present, ObjectId o, ObjectMask moved,
                 Destination dest, const RewardParams& params) {
    const double r = reward(graph, present, Action::grasp(o, dest), params);
    plan.value += std::pow(params.discount, static_cast<double>(plan.steps.size())) * r;
    plan.steps.push_back({Action::grasp(o, dest), to_ids(moved), dest});
}

std::vector<std::size_t> targets_leaf_to_root(const SceneGraph& graph, ObjectMask present, ObjectMask targets) {
    return leaf_to_root_order(graph.size(), targets & present, [&](std::size_t k) {
        return descendants(graph, id_of(k), present);
    });
}

}  // namespace

Plan baseline_one_by_one(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets,
                         const RewardParams& params) {
    Plan plan;
    const DescendantTable table = build_descendant_table(graph);
    for (std::size_t t : targets_leaf_to_root(graph, present, targets.mask())) {
        for (ObjectId o : table.entry(id_of(t))) {
            if (!contains(present, o)) continue;
            const Destination dest = targets.contains(o) ? Destination::Target : Destination::NonTarget;
            append_step(plan, graph, present, o, bit(o), dest, params);
            present &= ~bit(o);
        }
    }
    return plan;
}

Plan baseline_rule_only(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets,
                        const RewardParams& params) {
    Plan plan;
    const std::size_t n = graph.size();
    ObjectMask pending = 0;
    for (ObjectId t : to_ids(targets.mask() & present)) pending |= descendants(graph, t, present) | bit(t);

    while ((pending & present) != 0) {
        pending &= present;
        const auto order = leaf_to_root_order(n, pending, [&](std::size_t k) { return graph.children_mask(id_of(k)); });
        std::optional<ObjectId> pick;
        for (std::size_t k : order) {
            const ObjectId o = id_of(k);
            bool has_stable_parent = false;
            for (ObjectId p : graph.parents(o)) {
                if (contains(pending, p) && graph.edge_kind(p, o) == SupportKind::Stable) has_stable_parent = true;
            }
            if (has_stable_parent) continue;
            const ObjectMask closure = stable_closure(graph, o, present);
            if ((descendants(graph, o, present) & ~closure) != 0) continue;
            pick = o;
            break;
        }
        if (!pick) break;
        const ObjectMask closure = stable_closure(graph, *pick, present);
        const Destination dest = (closure & targets.mask()) != 0 ? Destination::Target : Destination::NonTarget;
        append_step(plan, graph, present, *pick, closure, dest, params);
        present &= ~closure;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Planner selection

const char* to_string(PlannerKind kind) {
    switch (kind) {
    case PlannerKind::Pomdp: return "pomdp";
    case PlannerKind::OneByOne: return "one_by_one";
    case PlannerKind::RuleOnly: return "rule_only";
    }
    return "?";
}

std::span<const PlannerKind> all_planners() {
    static constexpr PlannerKind kinds[] = {PlannerKind::Pomdp, PlannerKind::OneByOne, PlannerKind::RuleOnly};
    return kinds;
}

PlannerKind parse_planner(std::string_view id) {
    for (PlannerKind k : all_planners()) {
        if (id == to_string(k)) return k;
    }
    throw InvalidInput("unknown planner '" + std::string(id) + "'; expected one of: pomdp, one_by_one, rule_only");
}

Plan plan_with(PlannerKind kind, const BeliefState& belief, std::span<const std::string> categories,
               const TargetDesignation& targets, const PlannerModels& models, int horizon) {
    if (kind == PlannerKind::Pomdp) return plan_lookahead(belief, categories, targets, models, horizon).plan;
    const MapScene map = most_likely_scene(belief, categories);
    return kind == PlannerKind::OneByOne ? baseline_one_by_one(map.graph, map.present, targets, models.reward)
                                         : baseline_rule_only(map.graph, map.present, targets, models.reward);
}

// ---------------------------------------------------------------------------
// Closed loop

ReplanResult replan_loop(Executor& executor, std::span<const std::string> categories,
                         const TargetDesignation& targets, const PlannerModels& models, const ReplanConfig& config) {
    const std::size_t n = categories.size();
    const int horizon = config.horizon > 0 ? config.horizon : std::max(1, default_horizon(n));
    const int retry_cap = std::max(0, config.retry_cap);
    const std::size_t max_steps = 2 * n * static_cast<std::size_t>(std::max(retry_cap, 1));

    ReplanResult result;
    auto update = [&](const BeliefState& prior, const Action& a, const Observation& obs) {
        try {
            return belief_update(prior, a, obs, models.noise);
        } catch (const ImpossibleObservation&) {
            // The model ruled this observation out; restart from the prior.
            ++result.belief_resets;
            return belief_update(BeliefState(n, config.presence_prior, config.no_relation_prior), Action::report(), obs, models.noise);
        }
    };

    BeliefState belief = update(BeliefState(n, config.presence_prior, config.no_relation_prior), Action::report(), executor.observe());
    std::vector<int> attempts(n, 0);
    ObjectMask delivered = 0;
    // Targets seen to vanish go wherever the last successful grasp went. The
    // belief can lag a step when an unexpected object came along.
    std::optional<Destination> last_destination;
    auto believed_present = [&] {
        ObjectMask m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (belief.presence(ObjectId{static_cast<std::uint32_t>(i)}) >= 0.5) m |= bit(ObjectId{static_cast<std::uint32_t>(i)});
        }
        return m;
    };
    auto account = [&](ObjectMask before) {
        const ObjectMask vanished = before & ~believed_present() & targets.mask();
        if (last_destination == Destination::Target) delivered |= vanished;
    };
    int idle = 0;
    std::size_t steps = 0;

    for (;;) {
        const Plan plan = plan_with(config.planner, belief, categories, targets, models, horizon);
        const Action a = plan.first_action();
        const ObjectMask before = believed_present();
        if (!a.is_grasp()) {
            if ((targets.mask() & ~delivered) == 0) {
                result.completed = true;
                break;
            }
            if (++idle > retry_cap || steps >= max_steps) {
                result.failure = "designated targets were not delivered";
                break;
            }
            ++steps;
            belief = update(belief, a, executor.execute(a));
            account(before);
            continue;
        }
        if (steps >= max_steps) {
            result.failure = "step budget exhausted";
            break;
        }
        if (++attempts[a.object.index()] > 1 + retry_cap) {
            result.failure = "retry cap exceeded for object " + std::to_string(a.object.value);
            break;
        }
        ++steps;
        const auto& moved = plan.steps.front().moved;
        belief = update(belief, a, executor.execute(a));
        const bool believed_success = belief.presence(a.object) < 0.5;
        if (believed_success) last_destination = a.destination();
        account(before);
        result.chain.push_back({a, moved, believed_success});
    }
    result.final_belief = std::move(belief);
    return result;
}

}  // namespace stackplan
