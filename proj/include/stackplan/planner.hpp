#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stackplan/pomdp.hpp"
#include "stackplan/scene.hpp"

namespace stackplan {

/// Nonempty set of designated target objects.
class TargetDesignation {
public:
    /// Throws InvalidInput if `targets` is empty or names an id >= n_objects.
    TargetDesignation(std::vector<ObjectId> targets, std::size_t n_objects);
    static TargetDesignation all(std::size_t n_objects);

    std::span<const ObjectId> ids() const { return ids_; }
    ObjectMask mask() const { return mask_; }
    bool contains(ObjectId id) const { return stackplan::contains(mask_, id); }

private:
    std::vector<ObjectId> ids_;
    ObjectMask mask_ = 0;
};

/// Targets joined by Stable edges; one grasp of `root` delivers all of them.
struct TargetGroup {
    std::vector<ObjectId> members;
    ObjectId root;

    ObjectMask mask() const { return to_mask(members); }
};

/// The planner's working copy of a scene: stable edges between a target group
/// and a non-target are downgraded to weak, and groups are ordered leaf to
/// root.
struct WorkingScene {
    SceneGraph graph;
    ObjectMask present = 0;
    ObjectMask targets = 0;
    std::vector<TargetGroup> groups;
};

/// Groups the present targets and prepares the working graph. Groups whose
/// root lies in another group's subtree come first; remaining ties go to the
/// group with the smallest member id.
WorkingScene group_targets(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets);

/// Destination a grasp of `o` may use in `present`, if any. The moved stack
/// must carry nothing that rests on it only weakly, and must be all targets
/// or all non-targets.
std::optional<Destination> legal_destination(const WorkingScene& scene, ObjectMask present, ObjectId o);

/// First group with a member still present.
const TargetGroup* active_group(const WorkingScene& scene, ObjectMask present);

/// Candidate actions for the active group, drawn from its members' descendant
/// table entries. Ordered GraspToTarget before GraspToNonTarget, then by id.
/// Report is the only action once every target is gone.
std::vector<Action> action_space(const WorkingScene& scene, const DescendantTable& table, const TargetGroup* group,
                                 ObjectMask present);

struct PlanStep {
    Action action;
    /// Objects moved by the grasp, ascending. The grasped object is included.
    std::vector<ObjectId> moved;
    Destination destination = Destination::NonTarget;
};

struct Plan {
    std::vector<PlanStep> steps;
    /// Expected discounted return of the plan from the planning belief.
    double value = 0.0;

    std::size_t grasp_count() const { return steps.size(); }
    /// First action, or Report for an empty plan.
    Action first_action() const { return steps.empty() ? Action::report() : steps.front().action; }
};

struct PlannerModels {
    NoiseModel noise;
    RewardParams reward;
};

/// Default horizon: two steps per object.
constexpr int default_horizon(std::size_t n_objects) { return static_cast<int>(2 * n_objects); }

struct LookaheadResult {
    Action best_action;
    Plan plan;
};

/// Exhaustive expectimax over the pruned action space of a prepared working
/// scene. `belief` supplies the relation marginals for rewards; grasp outcomes
/// branch on success, observations collapse to the predicted state. Leaves at
/// task completion or at the horizon are worth 0.
LookaheadResult plan_lookahead(const WorkingScene& scene, const BeliefState& belief, const PlannerModels& models,
                               int horizon);

/// Builds the working scene from the belief's most likely scene, then plans.
LookaheadResult plan_lookahead(const BeliefState& belief, std::span<const std::string> categories,
                               const TargetDesignation& targets, const PlannerModels& models, int horizon);

/// Belief with the target/non-target downgrade applied to the relation
/// factors: natural mass moves to ordinary for every mixed pair.
BeliefState working_belief(const BeliefState& belief, ObjectMask targets);

/// One grasp per object: every descendant of each target, leaf to root, then
/// the target. Stable and weak support are not distinguished.
Plan baseline_one_by_one(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets,
                         const RewardParams& params = {});

/// Grasp the deepest stable root of the pending subtrees, carrying its stable
/// children, with no grouping or downgrade.
Plan baseline_rule_only(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets,
                        const RewardParams& params = {});

enum class PlannerKind : std::uint8_t { Pomdp, OneByOne, RuleOnly };

const char* to_string(PlannerKind kind);
/// Throws InvalidInput listing the known ids.
PlannerKind parse_planner(std::string_view id);
std::span<const PlannerKind> all_planners();

/// Plans from a belief with any planner. Baselines run on the most likely
/// scene.
Plan plan_with(PlannerKind kind, const BeliefState& belief, std::span<const std::string> categories,
               const TargetDesignation& targets, const PlannerModels& models, int horizon);

/// Environment side of the closed loop.
class Executor {
public:
    virtual ~Executor() = default;
    virtual Observation observe() = 0;
    virtual Observation execute(const Action& action) = 0;
};

struct ReplanConfig {
    PlannerKind planner = PlannerKind::Pomdp;
    /// 0 selects default_horizon(n).
    int horizon = 0;
    /// Extra attempts allowed per object after its first grasp.
    int retry_cap = 3;
    double presence_prior = 1.0;
    /// Initial NoRelation mass of each relation factor.
    double no_relation_prior = 0.8;
};

struct ExecutedStep {
    Action action;
    /// Stable closure the planner expected to move.
    std::vector<ObjectId> planned_moved;
    bool believed_success = false;
};

struct ReplanResult {
    std::vector<ExecutedStep> chain;
    bool completed = false;
    std::string failure;
    int belief_resets = 0;
    BeliefState final_belief;
};

/// Plan, execute the first action, update the belief, repeat until the
/// planner reports. Fails when an object exceeds its retry budget, when a
/// report leaves designated targets undelivered for more than retry_cap
/// re-observations, or after 2 * n * max(retry_cap, 1) steps.
ReplanResult replan_loop(Executor& executor, std::span<const std::string> categories,
                         const TargetDesignation& targets, const PlannerModels& models, const ReplanConfig& config);

}  // namespace stackplan
