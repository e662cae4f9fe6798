#pragma once

#include <compare>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "stackplan/planner.hpp"
#include "stackplan/pomdp.hpp"
#include "stackplan/rng.hpp"
#include "stackplan/scene.hpp"

namespace stackplan {

struct CategorySpec {
    std::string name;
    double weight = 1.0;
    /// Containers host stable children and are placed first.
    bool container = false;
    /// Coarse size rank; weak children lean on strictly larger objects.
    int size = 1;
};

struct GeneratorConfig {
    std::size_t min_objects = 8;
    std::size_t max_objects = 12;
    /// Probability that an object is placed as the stable child of a container.
    double p_stable = 0.35;
    /// Probability that an object leans on larger objects (weak support).
    double p_weak = 0.25;
    /// Chance that a weak child gets a second supporter when one is available.
    double p_second_support = 0.3;
    std::vector<CategorySpec> categories = default_catalog();

    static std::vector<CategorySpec> default_catalog();
    void check() const;
    std::vector<std::string> category_names() const;
};

struct GroundTruthScene {
    std::shared_ptr<const SceneGraph> graph;
    ObjectMask present = 0;
    std::uint64_t seed = 0;

    JointState state() const { return {graph, present}; }
};

/// Topological scene synthesis: containers first, then stable and weak
/// stacking sampled from the configured probabilities. Always valid.
GroundTruthScene generate_scene(const GeneratorConfig& config, std::uint64_t seed);

GroundTruthScene make_ground_truth(SceneGraph graph, std::uint64_t seed = 0);

/// Noisy perception: each present object is detected with its recall; each
/// relation between detected objects is reported correctly with probability
/// rc_i * rc_j and otherwise as a uniformly chosen wrong class.
Observation observe(const GroundTruthScene& scene, const NoiseModel& noise, Rng& rng);

struct ExecutionResult {
    bool success = false;
    /// Objects removed from the scene by this action.
    ObjectMask moved = 0;
    Observation observation;
};

/// Resolves a grasp by a Bernoulli draw on the grasped object's success rate.
/// Grasping an absent object fails without a draw. Report only observes.
ExecutionResult execute(GroundTruthScene& scene, const Action& action, const NoiseModel& noise, Rng& rng);

/// One (object, destination) entry of an action object set.
struct AosEntry {
    ObjectId object;
    Destination destination;

    auto operator<=>(const AosEntry&) const = default;
};
using ActionObjectSet = std::set<AosEntry>;

ActionObjectSet aos_of(const Plan& plan);

struct AnnotatedChain {
    ActionObjectSet aos;
    Plan plan;
};

/// Reference chain: the lookahead planner on ground truth with perfect
/// perception and grasping.
AnnotatedChain annotate_reference(const SceneGraph& graph, ObjectMask present, const TargetDesignation& targets,
                                  const RewardParams& params = {}, int horizon = 0);

struct TraceRecord {
    std::size_t step = 0;
    Action action;
    /// "observe", "success" or "failure".
    std::string outcome;
    std::vector<ObjectId> moved;
    std::uint64_t observation_digest = 0;
};

/// Executor backed by a ground-truth scene. Records every grasp attempt.
class SimExecutor : public Executor {
public:
    SimExecutor(GroundTruthScene& scene, NoiseModel noise, std::uint64_t seed)
        : scene_(scene), noise_(std::move(noise)), rng_(seed) {}

    Observation observe() override;
    Observation execute(const Action& action) override;

    const std::vector<TraceRecord>& trace() const { return trace_; }
    /// Objects that reached the target area.
    ObjectMask in_target_area() const { return target_area_; }
    ObjectMask in_non_target_area() const { return non_target_area_; }

private:
    GroundTruthScene& scene_;
    NoiseModel noise_;
    Rng rng_;
    std::vector<TraceRecord> trace_;
    ObjectMask target_area_ = 0;
    ObjectMask non_target_area_ = 0;
};

}  // namespace stackplan
