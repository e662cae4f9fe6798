#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stackplan/scene.hpp"

namespace stackplan {

// ---------------------------------------------------------------------------
// Model parameters

/// The fifteen tableware and fruit categories shipped in the default tables.
std::span<const std::string> default_categories();

/// Per-category detection recall and grasp success rate. Values in (0, 1].
struct NoiseProfile {
    std::map<std::string, double> recall;
    std::map<std::string, double> grasp_success;

    /// Illustrative defaults: recall 0.9 everywhere, grasp success 0.9
    /// except plate 0.3 and knife/fork/spoon 0.7.
    static NoiseProfile defaults();
    /// Every category in `categories` with recall = grasp_success = 1.
    static NoiseProfile noiseless(std::span<const std::string> categories);
    /// Every category in `categories` with the given constant values.
    static NoiseProfile uniform(std::span<const std::string> categories, double recall, double grasp_success);

    /// Throws InvalidInput on out-of-range values.
    void check() const;
    /// Throws InvalidInput naming the first category missing from either table.
    void check_covers(std::span<const std::string> categories) const;
};

/// NoiseProfile resolved against one scene's categories.
class NoiseModel {
public:
    NoiseModel() = default;
    NoiseModel(const NoiseProfile& profile, std::span<const std::string> categories);

    std::size_t size() const { return recall_.size(); }
    double recall(ObjectId id) const { return recall_.at(id.index()); }
    double grasp_success(ObjectId id) const { return success_.at(id.index()); }

private:
    std::vector<double> recall_;
    std::vector<double> success_;
};

struct RewardParams {
    double base_penalty = -10.0;
    double nc_gain = 5.0;
    double oc_gain = -10.0;
    double np_penalty = -2.0;
    double discount = 0.8;

    void check() const;
};

// ---------------------------------------------------------------------------
// Actions and observations

enum class ActionKind : std::uint8_t { GraspToTarget, GraspToNonTarget, Report };
enum class Destination : std::uint8_t { Target, NonTarget };

struct Action {
    ActionKind kind = ActionKind::Report;
    ObjectId object{};

    static Action report() { return {}; }
    static Action grasp_to_target(ObjectId o) { return {ActionKind::GraspToTarget, o}; }
    static Action grasp_to_non_target(ObjectId o) { return {ActionKind::GraspToNonTarget, o}; }
    static Action grasp(ObjectId o, Destination d) {
        return d == Destination::Target ? grasp_to_target(o) : grasp_to_non_target(o);
    }

    bool is_grasp() const { return kind != ActionKind::Report; }
    Destination destination() const {
        return kind == ActionKind::GraspToTarget ? Destination::Target : Destination::NonTarget;
    }

    bool operator==(const Action& other) const {
        return kind == other.kind && (kind == ActionKind::Report || object == other.object);
    }
};

/// Size of the full (unpruned) action space: two destinations per object
/// plus Report.
constexpr std::size_t action_space_size(std::size_t n_objects) { return 2 * n_objects + 1; }

const char* to_string(ActionKind k);
const char* to_string(Destination d);

/// Detected objects and the relation classes reported among them.
class Observation {
public:
    Observation() = default;
    explicit Observation(std::size_t n);

    std::size_t size() const { return n_; }
    ObjectMask detected() const { return detected_; }
    bool is_detected(ObjectId id) const { return contains(detected_, id); }

    void detect(ObjectId id) { detected_ |= bit(id); }
    /// Sets (i, j) and its mirror. Both endpoints must already be detected.
    void set_relation(ObjectId i, ObjectId j, RelationClass r);
    /// Empty unless both endpoints are detected.
    std::optional<RelationClass> relation(ObjectId i, ObjectId j) const;

    bool operator==(const Observation&) const = default;

private:
    std::size_t n_ = 0;
    ObjectMask detected_ = 0;
    std::vector<RelationClass> relations_;
};

/// 64-bit FNV-1a digest of the observation contents, for traces.
std::uint64_t digest(const Observation& obs);

// ---------------------------------------------------------------------------
// States

/// Factored joint state: per-object presence over a fixed support graph.
/// The relation of a pair is Absent whenever either endpoint is absent.
struct JointState {
    std::shared_ptr<const SceneGraph> graph;
    ObjectMask present = 0;

    static JointState all_present(std::shared_ptr<const SceneGraph> graph);

    std::size_t size() const { return graph ? graph->size() : 0; }
    bool is_present(ObjectId id) const { return contains(present, id); }
    /// Empty means Absent. Rejects i == j.
    std::optional<RelationClass> relation(ObjectId i, ObjectId j) const;
    /// Observation that reports this state exactly.
    Observation exact_observation() const;

    bool operator==(const JointState& other) const {
        return present == other.present && (graph == other.graph || (graph && other.graph && *graph == *other.graph));
    }
};

/// Categorical over the five relation classes plus Absent (last slot).
using RelationBelief = std::array<double, kRelationClasses + 1>;
inline constexpr std::size_t kAbsentSlot = kRelationClasses;

constexpr std::size_t slot(RelationClass r) { return static_cast<std::size_t>(r); }

/// Mean-field belief: one presence probability per object and one relation
/// categorical per ordered pair. The diagonal is a point mass on Absent.
class BeliefState {
public:
    BeliefState() = default;
    /// Presence prior for every object. Relation mass of present pairs puts
    /// `no_relation_prior` on NoRelation and splits the rest evenly; the
    /// default is uniform over the five classes.
    BeliefState(std::size_t n, double presence_prior, double no_relation_prior = 1.0 / kRelationClasses);

    /// Point mass on a joint state.
    static BeliefState point_mass(const JointState& state);

    std::size_t size() const { return n_; }
    double presence(ObjectId id) const { return presence_.at(id.index()); }
    const RelationBelief& relation(ObjectId i, ObjectId j) const { return relations_.at(i.index() * n_ + j.index()); }

    void set_presence(ObjectId id, double p);
    /// Sets (i, j) and the mirrored distribution on (j, i).
    void set_relation(ObjectId i, ObjectId j, const RelationBelief& dist);
    /// Marks the object absent: presence 0 and every incident relation Absent.
    void remove(ObjectId id);

    /// Largest deviation from 1 over all relation factors.
    double max_normalization_error() const;

private:
    std::size_t n_ = 0;
    std::vector<double> presence_;
    std::vector<RelationBelief> relations_;
};

RelationBelief mirror(const RelationBelief& dist);

/// Objects with presence >= 0.5 and, among them, the most likely support
/// edges, repaired into a valid graph (acyclic, sole stable parent).
struct MapScene {
    SceneGraph graph;
    ObjectMask present = 0;
};
MapScene most_likely_scene(const BeliefState& belief, std::span<const std::string> categories);

// ---------------------------------------------------------------------------
// Models

struct RelationCounts {
    int natural_children = 0;
    int ordinary_children = 0;
    int natural_parents = 0;
};

/// Grasp reward from relation counts. First matching branch wins.
double reward(const RelationCounts& counts, const RewardParams& params);

/// Counts over present neighbours of `o`.
RelationCounts relation_counts(const SceneGraph& graph, ObjectMask present, ObjectId o);

/// Reward of `action` in the given scene. Report yields 0. Throws
/// std::invalid_argument when grasping an absent object.
double reward(const SceneGraph& graph, ObjectMask present, const Action& action, const RewardParams& params);

/// Expected reward under the belief's relation marginals for the grasped
/// object. Equals reward() for point-mass beliefs. Report yields 0.
double expected_reward(const BeliefState& belief, const Action& action, const RewardParams& params);
/// Same, with every object outside `present` treated as absent.
double expected_reward(const BeliefState& belief, const Action& action, const RewardParams& params,
                       ObjectMask present);

struct TransitionOutcome {
    double probability = 0.0;
    JointState next;
    bool grasp_succeeded = false;
};

/// Success removes the grasped object's stable closure; failure leaves the
/// state untouched. Report is the identity. Throws std::invalid_argument for
/// grasps of absent objects.
std::vector<TransitionOutcome> transition_outcomes(const JointState& state, const Action& action,
                                                   const NoiseModel& noise);

/// p(obs | next_state, action). `moved` is the stable closure the action
/// removed or tried to remove; its members are scored with the closure
/// factor rc_j when observed correctly.
double observation_probability(const JointState& next_state, const Action& action, ObjectMask moved,
                               const Observation& obs, const NoiseModel& noise);

/// Probability that each object belongs to the stable closure of `o`,
/// propagated over believed natural-parent relations.
std::vector<double> closure_membership(const BeliefState& belief, ObjectId o);

/// Thrown when an observation has zero likelihood under the belief.
class ImpossibleObservation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factored Bayes filter: predict each factor through the transition model,
/// weight by the observation likelihood, renormalize.
BeliefState belief_update(const BeliefState& belief, const Action& action, const Observation& obs,
                          const NoiseModel& noise);

}  // namespace stackplan
