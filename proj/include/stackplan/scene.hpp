#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stackplan {

/// Thrown for malformed input data (bad ids, unknown categories, invalid files).
class InvalidInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Index of an object within one scene. Dense in [0, size).
struct ObjectId {
    std::uint32_t value = 0;

    constexpr std::size_t index() const { return value; }
    constexpr auto operator<=>(const ObjectId&) const = default;
};

/// Bit set over object ids. Scenes are capped at kMaxObjects so planner
/// states fit in one word.
using ObjectMask = std::uint64_t;
inline constexpr std::size_t kMaxObjects = 64;

constexpr ObjectMask bit(ObjectId id) { return ObjectMask{1} << id.value; }
constexpr bool contains(ObjectMask mask, ObjectId id) { return (mask & bit(id)) != 0; }
constexpr ObjectMask full_mask(std::size_t n) {
    return n >= 64 ? ~ObjectMask{0} : (ObjectMask{1} << n) - 1;
}
std::vector<ObjectId> to_ids(ObjectMask mask);
ObjectMask to_mask(std::span<const ObjectId> ids);

enum class SupportKind : std::uint8_t { Stable, Weak };

/// Pairwise relation of (i, j) read as "i is <class> of j".
enum class RelationClass : std::uint8_t {
    OrdinaryParent,
    OrdinaryChild,
    NaturalParent,
    NaturalChild,
    NoRelation,
};
inline constexpr std::size_t kRelationClasses = 5;

/// The class of (j, i) given the class of (i, j).
constexpr RelationClass mirror(RelationClass r) {
    switch (r) {
    case RelationClass::OrdinaryParent: return RelationClass::OrdinaryChild;
    case RelationClass::OrdinaryChild: return RelationClass::OrdinaryParent;
    case RelationClass::NaturalParent: return RelationClass::NaturalChild;
    case RelationClass::NaturalChild: return RelationClass::NaturalParent;
    case RelationClass::NoRelation: return RelationClass::NoRelation;
    }
    return RelationClass::NoRelation;
}

const char* to_string(RelationClass r);
const char* to_string(SupportKind k);

struct SupportEdge {
    ObjectId parent;
    ObjectId child;
    SupportKind kind = SupportKind::Weak;

    auto operator<=>(const SupportEdge&) const = default;
};

/// Objects plus typed support edges. Objects with no parent rest on the
/// virtual table root, which is never materialized as an ObjectId.
///
/// Construction only checks that edge endpoints are in range; the structural
/// invariants (acyclic, sole stable parent, reachability) are reported by
/// validate_scene so that broken scenes can be inspected rather than refused.
class SceneGraph {
public:
    SceneGraph() = default;
    SceneGraph(std::vector<std::string> categories, std::vector<SupportEdge> edges);

    std::size_t size() const { return categories_.size(); }
    const std::string& category(ObjectId id) const { return categories_.at(id.index()); }
    std::span<const std::string> categories() const { return categories_; }
    std::span<const SupportEdge> edges() const { return edges_; }

    std::span<const ObjectId> children(ObjectId id) const { return children_.at(id.index()); }
    std::span<const ObjectId> parents(ObjectId id) const { return parents_.at(id.index()); }

    /// Kind of the edge parent -> child, if any. With duplicate edges the
    /// first one wins.
    std::optional<SupportKind> edge_kind(ObjectId parent, ObjectId child) const;

    ObjectMask stable_children_mask(ObjectId id) const { return stable_children_.at(id.index()); }
    ObjectMask children_mask(ObjectId id) const { return children_masks_.at(id.index()); }

    bool operator==(const SceneGraph& other) const {
        return categories_ == other.categories_ && edges_ == other.edges_;
    }

private:
    std::vector<std::string> categories_;
    std::vector<SupportEdge> edges_;
    std::vector<std::vector<ObjectId>> children_;
    std::vector<std::vector<ObjectId>> parents_;
    std::vector<ObjectMask> stable_children_;
    std::vector<ObjectMask> children_masks_;
};

enum class ViolationKind : std::uint8_t {
    SelfLoop,
    DuplicateEdge,
    Cycle,
    MultiParentStableChild,
    SymmetryBreach,
    Unreachable,
};

struct Violation {
    ViolationKind kind;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(ViolationKind kind) const;
};

ValidationResult validate_scene(const SceneGraph& graph);

/// Dense n x n table of pairwise relation classes. The diagonal is undefined
/// and rejected on access.
class RelationMatrix {
public:
    RelationMatrix() = default;
    explicit RelationMatrix(std::size_t n);

    std::size_t size() const { return n_; }
    RelationClass at(ObjectId i, ObjectId j) const;
    void set(ObjectId i, ObjectId j, RelationClass r);

    bool operator==(const RelationMatrix&) const = default;

private:
    std::size_t index(ObjectId i, ObjectId j) const;

    std::size_t n_ = 0;
    std::vector<RelationClass> cells_;
};

/// Direct-edge relations only; no transitive closure.
RelationMatrix relation_matrix(const SceneGraph& graph);

/// Reports a SymmetryBreach for every unordered pair whose two entries are
/// not mirrors of each other.
ValidationResult validate_relations(const RelationMatrix& relations);

/// Per-object subtree listing, leaf to root, with the object itself last.
/// Each object appears once; ties between ready nodes go to the lower id.
class DescendantTable {
public:
    DescendantTable() = default;
    explicit DescendantTable(std::vector<std::vector<ObjectId>> entries)
        : entries_(std::move(entries)) {}

    std::size_t size() const { return entries_.size(); }
    std::span<const ObjectId> entry(ObjectId id) const { return entries_.at(id.index()); }

private:
    std::vector<std::vector<ObjectId>> entries_;
};

/// Throws std::logic_error on a cycle.
DescendantTable build_descendant_table(const SceneGraph& graph);

/// `o` plus everything reachable from it over Stable edges: the set that
/// moves when `o` is grasped. Sorted ascending.
std::vector<ObjectId> stable_closure(const SceneGraph& graph, ObjectId o);

/// Same, restricted to objects in `present`. Returns 0 if `o` is absent.
ObjectMask stable_closure(const SceneGraph& graph, ObjectId o, ObjectMask present);

/// Present objects reachable from `o` over any edge, excluding `o`.
ObjectMask descendants(const SceneGraph& graph, ObjectId o, ObjectMask present);

/// Leaf-to-root ordering of the nodes in `subset`, where `children(i)` yields
/// a mask of successors. Among ready nodes the lowest index goes first.
/// Throws std::logic_error if the subset contains a cycle.
template <class ChildrenFn>
std::vector<std::size_t> leaf_to_root_order(std::size_t n, ObjectMask subset, ChildrenFn&& children);

}  // namespace stackplan

#include "stackplan/detail/topo_order.hpp"
