#include "stackplan/pomdp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stackplan {

namespace {

ObjectId id_of(std::size_t i) { return ObjectId{static_cast<std::uint32_t>(i)}; }

void check_probability(const std::string& table, const std::string& category, double value) {
    if (!(value > 0.0 && value <= 1.0)) {
        throw InvalidInput(table + "[" + category + "] = " + std::to_string(value) + " is outside (0, 1]");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

std::span<const std::string> default_categories() {
    static const std::vector<std::string> names = {
        "plate", "bowl", "mug", "cup", "spoon", "fork", "knife", "chopsticks",
        "apple", "banana", "orange", "pear", "lemon", "peach", "strawberry",
    };
    return names;
}

NoiseProfile NoiseProfile::defaults() {
    NoiseProfile profile;
    for (const auto& c : default_categories()) {
        profile.recall[c] = 0.9;
        profile.grasp_success[c] = 0.9;
    }
    profile.grasp_success["plate"] = 0.3;
    profile.grasp_success["knife"] = 0.7;
    profile.grasp_success["fork"] = 0.7;
    profile.grasp_success["spoon"] = 0.7;
    return profile;
}

NoiseProfile NoiseProfile::noiseless(std::span<const std::string> categories) {
    return uniform(categories, 1.0, 1.0);
}

NoiseProfile NoiseProfile::uniform(std::span<const std::string> categories, double recall, double grasp_success) {
    NoiseProfile profile;
    for (const auto& c : categories) {
        profile.recall[c] = recall;
        profile.grasp_success[c] = grasp_success;
    }
    return profile;
}

void NoiseProfile::check() const {
    for (const auto& [c, v] : recall) check_probability("recall", c, v);
    for (const auto& [c, v] : grasp_success) check_probability("grasp_success", c, v);
}

void NoiseProfile::check_covers(std::span<const std::string> categories) const {
    for (const auto& c : categories) {
        if (!recall.contains(c)) {
            throw InvalidInput("category '" + c + "' has no entry in the noise profile's recall table");
        }
        if (!grasp_success.contains(c)) {
            throw InvalidInput("category '" + c + "' has no entry in the noise profile's grasp_success table");
        }
    }
}

NoiseModel::NoiseModel(const NoiseProfile& profile, std::span<const std::string> categories) {
    profile.check_covers(categories);
    recall_.reserve(categories.size());
    success_.reserve(categories.size());
    for (const auto& c : categories) {
        const double rc = profile.recall.at(c);
        const double p = profile.grasp_success.at(c);
        check_probability("recall", c, rc);
        check_probability("grasp_success", c, p);
        recall_.push_back(rc);
        success_.push_back(p);
    }
}

void RewardParams::check() const {
    if (!(base_penalty < 0.0)) throw InvalidInput("reward base_penalty must be negative");
    if (!(discount > 0.0 && discount < 1.0)) throw InvalidInput("reward discount must lie in (0, 1)");
}

const char* to_string(ActionKind k) {
    switch (k) {
    case ActionKind::GraspToTarget: return "grasp_to_target";
    case ActionKind::GraspToNonTarget: return "grasp_to_non_target";
    case ActionKind::Report: return "report";
    }
    return "?";
}

const char* to_string(Destination d) { return d == Destination::Target ? "target" : "non_target"; }

// ---------------------------------------------------------------------------
// Observation

Observation::Observation(std::size_t n) : n_(n), relations_(n * n, RelationClass::NoRelation) {
    if (n > kMaxObjects) throw InvalidInput("observation larger than the supported object count");
}

void Observation::set_relation(ObjectId i, ObjectId j, RelationClass r) {
    if (i == j) throw std::invalid_argument("observation relation of an object with itself");
    if (!is_detected(i) || !is_detected(j)) {
        throw std::logic_error("observation relations may only reference detected objects");
    }
    relations_.at(i.index() * n_ + j.index()) = r;
    relations_.at(j.index() * n_ + i.index()) = mirror(r);
}

std::optional<RelationClass> Observation::relation(ObjectId i, ObjectId j) const {
    if (i == j) throw std::invalid_argument("observation relation of an object with itself");
    if (!is_detected(i) || !is_detected(j)) return std::nullopt;
    return relations_.at(i.index() * n_ + j.index());
}

std::uint64_t digest(const Observation& obs) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v, int bytes) {
        for (int b = 0; b < bytes; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(obs.size(), 8);
    mix(obs.detected(), 8);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        for (std::size_t j = i + 1; j < obs.size(); ++j) {
            if (auto r = obs.relation(id_of(i), id_of(j))) mix(static_cast<std::uint64_t>(*r), 1);
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// JointState

JointState JointState::all_present(std::shared_ptr<const SceneGraph> graph) {
    const auto n = graph->size();
    return JointState{std::move(graph), full_mask(n)};
}

std::optional<RelationClass> JointState::relation(ObjectId i, ObjectId j) const {
    if (i == j) throw std::invalid_argument("relation of an object with itself is undefined");
    if (!is_present(i) || !is_present(j)) return std::nullopt;
    if (auto k = graph->edge_kind(i, j)) {
        return *k == SupportKind::Stable ? RelationClass::NaturalParent : RelationClass::OrdinaryParent;
    }
    if (auto k = graph->edge_kind(j, i)) {
        return *k == SupportKind::Stable ? RelationClass::NaturalChild : RelationClass::OrdinaryChild;
    }
    return RelationClass::NoRelation;
}

Observation JointState::exact_observation() const {
    Observation obs(size());
    for (ObjectId id : to_ids(present)) obs.detect(id);
    for (std::size_t i = 0; i < size(); ++i) {
        for (std::size_t j = i + 1; j < size(); ++j) {
            if (auto r = relation(id_of(i), id_of(j))) obs.set_relation(id_of(i), id_of(j), *r);
        }
    }
    return obs;
}

// ---------------------------------------------------------------------------
// BeliefState

RelationBelief mirror(const RelationBelief& dist) {
    RelationBelief out{};
    for (std::size_t c = 0; c < kRelationClasses; ++c) {
        out[slot(mirror(static_cast<RelationClass>(c)))] = dist[c];
    }
    out[kAbsentSlot] = dist[kAbsentSlot];
    return out;
}

BeliefState::BeliefState(std::size_t n, double presence_prior, double no_relation_prior)
    : n_(n), presence_(n, presence_prior), relations_(n * n) {
    if (n > kMaxObjects) throw InvalidInput("belief larger than the supported object count");
    if (!(presence_prior >= 0.0 && presence_prior <= 1.0)) {
        throw InvalidInput("presence prior must lie in [0, 1]");
    }
    if (!(no_relation_prior > 0.0 && no_relation_prior < 1.0)) {
        throw InvalidInput("no-relation prior must lie in (0, 1)");
    }
    const double other = (1.0 - no_relation_prior) / (kRelationClasses - 1);
    const double both = presence_prior * presence_prior;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            RelationBelief& r = relations_[i * n + j];
            if (i == j) {
                r[kAbsentSlot] = 1.0;
                continue;
            }
            for (std::size_t c = 0; c < kRelationClasses; ++c) {
                r[c] = both * (c == slot(RelationClass::NoRelation) ? no_relation_prior : other);
            }
            r[kAbsentSlot] = 1.0 - both;
        }
    }
}

BeliefState BeliefState::point_mass(const JointState& state) {
    const std::size_t n = state.size();
    BeliefState b(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        b.presence_[i] = state.is_present(id_of(i)) ? 1.0 : 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            RelationBelief r{};
            if (auto rel = state.relation(id_of(i), id_of(j))) {
                r[slot(*rel)] = 1.0;
            } else {
                r[kAbsentSlot] = 1.0;
            }
            b.relations_[i * n + j] = r;
        }
    }
    return b;
}

void BeliefState::set_presence(ObjectId id, double p) { presence_.at(id.index()) = std::clamp(p, 0.0, 1.0); }

void BeliefState::set_relation(ObjectId i, ObjectId j, const RelationBelief& dist) {
    if (i == j) throw std::invalid_argument("belief relation of an object with itself is fixed");
    relations_.at(i.index() * n_ + j.index()) = dist;
    relations_.at(j.index() * n_ + i.index()) = mirror(dist);
}

void BeliefState::remove(ObjectId id) {
    presence_.at(id.index()) = 0.0;
    RelationBelief absent{};
    absent[kAbsentSlot] = 1.0;
    for (std::size_t j = 0; j < n_; ++j) {
        if (j != id.index()) set_relation(id, id_of(j), absent);
    }
}

double BeliefState::max_normalization_error() const {
    double worst = 0.0;
    for (const auto& r : relations_) {
        worst = std::max(worst, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0));
    }
    return worst;
}

MapScene most_likely_scene(const BeliefState& belief, std::span<const std::string> categories) {
    const std::size_t n = belief.size();
    if (categories.size() != n) throw std::invalid_argument("most_likely_scene: category count mismatch");

    MapScene out;
    for (std::size_t i = 0; i < n; ++i) {
        if (belief.presence(id_of(i)) >= 0.5) out.present |= bit(id_of(i));
    }

    struct Candidate {
        double confidence;
        SupportEdge edge;
    };
    std::vector<Candidate> candidates;
    for (ObjectId i : to_ids(out.present)) {
        for (ObjectId j : to_ids(out.present)) {
            if (j <= i) continue;
            const auto& r = belief.relation(i, j);
            double mass = 0.0;
            for (std::size_t c = 0; c < kRelationClasses; ++c) mass += r[c];
            if (mass <= 0.0) continue;
            // Ties resolve to NoRelation.
            auto best = RelationClass::NoRelation;
            for (std::size_t c = 0; c < kRelationClasses; ++c) {
                if (r[c] > r[slot(best)]) best = static_cast<RelationClass>(c);
            }
            const double confidence = r[slot(best)] / mass;
            switch (best) {
            case RelationClass::NaturalParent: candidates.push_back({confidence, {i, j, SupportKind::Stable}}); break;
            case RelationClass::OrdinaryParent: candidates.push_back({confidence, {i, j, SupportKind::Weak}}); break;
            case RelationClass::NaturalChild: candidates.push_back({confidence, {j, i, SupportKind::Stable}}); break;
            case RelationClass::OrdinaryChild: candidates.push_back({confidence, {j, i, SupportKind::Weak}}); break;
            case RelationClass::NoRelation: break;
            }
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.edge < b.edge;
    });

    std::vector<ObjectMask> children(n, 0);
    std::vector<int> parent_count(n, 0);
    std::vector<bool> stable_child(n, false);
    auto reaches = [&](ObjectId from, ObjectId to) {
        ObjectMask seen = bit(from);
        ObjectMask frontier = seen;
        while (frontier != 0) {
            ObjectMask next = 0;
            for (ObjectId k : to_ids(frontier)) next |= children[k.index()];
            frontier = next & ~seen;
            seen |= frontier;
        }
        return contains(seen, to);
    };

    std::vector<SupportEdge> edges;
    for (auto [confidence, edge] : candidates) {
        const auto c = edge.child.index();
        if (stable_child[c]) continue;
        if (edge.kind == SupportKind::Stable && parent_count[c] > 0) edge.kind = SupportKind::Weak;
        if (reaches(edge.child, edge.parent)) continue;
        children[edge.parent.index()] |= bit(edge.child);
        ++parent_count[c];
        stable_child[c] = edge.kind == SupportKind::Stable;
        edges.push_back(edge);
    }
    std::sort(edges.begin(), edges.end());
    out.graph = SceneGraph(std::vector<std::string>(categories.begin(), categories.end()), std::move(edges));
    return out;
}

// ---------------------------------------------------------------------------
// Reward

double reward(const RelationCounts& counts, const RewardParams& params) {
    double bonus = 0.0;
    if (counts.natural_children > 0) {
        bonus = params.nc_gain * std::tanh(static_cast<double>(counts.natural_children));
    } else if (counts.ordinary_children > 0) {
        bonus = params.oc_gain * std::tanh(static_cast<double>(counts.ordinary_children));
    } else if (counts.natural_parents > 0) {
        bonus = params.np_penalty;
    }
    return params.base_penalty + bonus;
}

RelationCounts relation_counts(const SceneGraph& graph, ObjectMask present, ObjectId o) {
    RelationCounts counts;
    for (const auto& e : graph.edges()) {
        if (e.parent == e.child) continue;
        if (e.parent == o && contains(present, e.child)) {
            if (e.kind == SupportKind::Stable) {
                ++counts.natural_children;
            } else {
                ++counts.ordinary_children;
            }
        } else if (e.child == o && contains(present, e.parent) && e.kind == SupportKind::Stable) {
            ++counts.natural_parents;
        }
    }
    return counts;
}

double reward(const SceneGraph& graph, ObjectMask present, const Action& action, const RewardParams& params) {
    if (!action.is_grasp()) return 0.0;
    if (!contains(present, action.object)) {
        throw std::invalid_argument("reward: grasp of absent object " + std::to_string(action.object.value));
    }
    return reward(relation_counts(graph, present, action.object), params);
}

double expected_reward(const BeliefState& belief, const Action& action, const RewardParams& params,
                       ObjectMask present) {
    if (!action.is_grasp()) return 0.0;
    const std::size_t n = belief.size();
    const ObjectId o = action.object;
    if (o.index() >= n) throw std::invalid_argument("expected_reward: unknown object");

    // Joint distribution of (natural children, ordinary children, has natural
    // parent) under independent pair factors.
    const std::size_t dim = n + 1;
    auto at = [dim](std::size_t nc, std::size_t oc, std::size_t np) { return (nc * dim + oc) * 2 + np; };
    std::vector<double> dist(dim * dim * 2, 0.0);
    std::vector<double> next(dist.size(), 0.0);
    dist[at(0, 0, 0)] = 1.0;
    std::size_t reach = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == o.index() || !contains(present, id_of(j))) continue;
        const auto& r = belief.relation(o, id_of(j));
        const double p_nc = r[slot(RelationClass::NaturalParent)];
        const double p_oc = r[slot(RelationClass::OrdinaryParent)];
        const double p_np = r[slot(RelationClass::NaturalChild)];
        const double p_none = 1.0 - p_nc - p_oc - p_np;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t nc = 0; nc <= reach; ++nc) {
            for (std::size_t oc = 0; oc + nc <= reach; ++oc) {
                for (std::size_t np = 0; np < 2; ++np) {
                    const double w = dist[at(nc, oc, np)];
                    if (w == 0.0) continue;
                    next[at(nc + 1, oc, np)] += w * p_nc;
                    next[at(nc, oc + 1, np)] += w * p_oc;
                    next[at(nc, oc, 1)] += w * p_np;
                    next[at(nc, oc, np)] += w * p_none;
                }
            }
        }
        dist.swap(next);
        ++reach;
    }

    double expected = 0.0;
    for (std::size_t nc = 0; nc <= reach; ++nc) {
        for (std::size_t oc = 0; oc + nc <= reach; ++oc) {
            for (std::size_t np = 0; np < 2; ++np) {
                const double w = dist[at(nc, oc, np)];
                if (w == 0.0) continue;
                expected += w * reward(RelationCounts{static_cast<int>(nc), static_cast<int>(oc), static_cast<int>(np)},
                                       params);
            }
        }
    }
    return expected;
}

double expected_reward(const BeliefState& belief, const Action& action, const RewardParams& params) {
    return expected_reward(belief, action, params, full_mask(belief.size()));
}

// ---------------------------------------------------------------------------
// Transition and observation models

std::vector<TransitionOutcome> transition_outcomes(const JointState& state, const Action& action,
                                                   const NoiseModel& noise) {
    if (!action.is_grasp()) return {TransitionOutcome{1.0, state, false}};
    const ObjectId o = action.object;
    if (!state.is_present(o)) {
        throw std::invalid_argument("transition: grasp of absent object " + std::to_string(o.value));
    }
    const double p = noise.grasp_success(o);
    JointState removed = state;
    removed.present &= ~stable_closure(*state.graph, o, state.present);
    if (p >= 1.0) return {TransitionOutcome{1.0, std::move(removed), true}};
    return {TransitionOutcome{p, std::move(removed), true}, TransitionOutcome{1.0 - p, state, false}};
}

double observation_probability(const JointState& next_state, const Action& action, ObjectMask moved,
                               const Observation& obs, const NoiseModel& noise) {
    const std::size_t n = next_state.size();
    if (obs.size() != n || noise.size() != n) {
        throw std::invalid_argument("observation_probability: observation references unknown objects");
    }
    if (!action.is_grasp()) moved = 0;

    double likelihood = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        const ObjectId id = id_of(j);
        const double rc = noise.recall(id);
        const bool detected = obs.is_detected(id);
        if (next_state.is_present(id)) {
            likelihood *= detected ? rc : 1.0 - rc;
        } else if (detected) {
            return 0.0;
        } else if (contains(moved, id)) {
            likelihood *= rc;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto seen = obs.relation(id_of(i), id_of(j));
            if (!seen) continue;
            const auto truth = next_state.relation(id_of(i), id_of(j));
            const double q = noise.recall(id_of(i)) * noise.recall(id_of(j));
            likelihood *= (truth && *truth == *seen) ? q : (1.0 - q) / (kRelationClasses - 1);
        }
    }
    return likelihood;
}

std::vector<double> closure_membership(const BeliefState& belief, ObjectId o) {
    const std::size_t n = belief.size();
    std::vector<double> m(n, 0.0);
    m.at(o.index()) = 1.0;
    for (std::size_t pass = 0; pass < n; ++pass) {
        bool changed = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == o.index()) continue;
            double miss = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == j || m[k] == 0.0) continue;
                miss *= 1.0 - m[k] * belief.relation(id_of(k), id_of(j))[slot(RelationClass::NaturalParent)];
            }
            const double value = 1.0 - miss;
            if (value != m[j]) {
                m[j] = value;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return m;
}

BeliefState belief_update(const BeliefState& belief, const Action& action, const Observation& obs,
                          const NoiseModel& noise) {
    const std::size_t n = belief.size();
    if (obs.size() != n || noise.size() != n) {
        throw std::invalid_argument("belief_update: size mismatch between belief, observation and noise model");
    }

    double p = 0.0;
    std::vector<double> member(n, 0.0);
    if (action.is_grasp()) {
        if (action.object.index() >= n) throw std::invalid_argument("belief_update: unknown object");
        p = noise.grasp_success(action.object);
        member = closure_membership(belief, action.object);
    }

    // Per-object likelihood of the detection outcome, given whether the grasp
    // worked. `present` is the share of it where the object is still there.
    struct Term {
        double present = 0.0;
        double total = 0.0;
    };
    auto term = [&](std::size_t j, bool worked) {
        const ObjectId id = id_of(j);
        const double b = belief.presence(id);
        const double moved = worked ? b * member[j] : 0.0;
        const double stays = b - moved;
        const double rc = noise.recall(id);
        if (obs.is_detected(id)) return Term{stays * rc, stays * rc};
        return Term{stays * (1.0 - rc), stays * (1.0 - rc) + moved * rc + (1.0 - b)};
    };

    // Success is shared by every object in the closure, so condition it on
    // the whole observation first.
    double p_post = 0.0;
    if (p > 0.0) {
        double log_ok = std::log(p), log_fail = p < 1.0 ? std::log1p(-p) : -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
            log_ok += std::log(term(j, true).total);
            log_fail += std::log(term(j, false).total);
        }
        if (log_ok == -INFINITY && log_fail == -INFINITY) {
            throw ImpossibleObservation("impossible observation: no grasp outcome explains the detections");
        }
        p_post = log_fail == -INFINITY ? 1.0 : log_ok == -INFINITY ? 0.0 : 1.0 / (1.0 + std::exp(log_fail - log_ok));
    }

    BeliefState out = belief;
    for (std::size_t j = 0; j < n; ++j) {
        double post = 0.0;
        for (const auto& [worked, weight] : {std::pair{true, p_post}, std::pair{false, 1.0 - p_post}}) {
            if (weight == 0.0) continue;
            const Term t = term(j, worked);
            if (!(t.total > 0.0)) {
                throw ImpossibleObservation("impossible observation: object " + std::to_string(j) +
                                            (obs.is_detected(id_of(j)) ? " detected" : " missed") +
                                            " with zero predicted likelihood");
            }
            post += weight * t.present / t.total;
        }
        out.set_presence(id_of(j), post);
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const ObjectId a = id_of(i);
            const ObjectId b = id_of(j);
            const RelationBelief& prior = belief.relation(a, b);
            const double removal = p_post * std::max(member[i], member[j]);

            RelationBelief post{};
            for (std::size_t c = 0; c < kRelationClasses; ++c) post[c] = prior[c] * (1.0 - removal);
            post[kAbsentSlot] = prior[kAbsentSlot] + removal * (1.0 - prior[kAbsentSlot]);

            const double q = noise.recall(a) * noise.recall(b);
            if (auto seen = obs.relation(a, b)) {
                for (std::size_t c = 0; c < kRelationClasses; ++c) {
                    post[c] *= c == slot(*seen) ? q : (1.0 - q) / (kRelationClasses - 1);
                }
                post[kAbsentSlot] = 0.0;
            } else {
                for (std::size_t c = 0; c < kRelationClasses; ++c) post[c] *= 1.0 - q;
            }
            const double evidence = std::accumulate(post.begin(), post.end(), 0.0);
            if (!(evidence > 0.0)) {
                throw ImpossibleObservation("impossible observation: relation (" + std::to_string(i) + "," +
                                            std::to_string(j) + ") has zero predicted likelihood");
            }
            for (double& v : post) v /= evidence;
            out.set_relation(a, b, post);
        }
    }
    return out;
}

}  // namespace stackplan
