#include "stackplan/scene.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <sstream>

namespace stackplan {

std::vector<ObjectId> to_ids(ObjectMask mask) {
    std::vector<ObjectId> ids;
    ids.reserve(static_cast<std::size_t>(std::popcount(mask)));
    for (; mask != 0; mask &= mask - 1) {
        ids.push_back(ObjectId{static_cast<std::uint32_t>(std::countr_zero(mask))});
    }
    return ids;
}

ObjectMask to_mask(std::span<const ObjectId> ids) {
    ObjectMask mask = 0;
    for (ObjectId id : ids) mask |= bit(id);
    return mask;
}

const char* to_string(RelationClass r) {
    switch (r) {
    case RelationClass::OrdinaryParent: return "ordinary_parent";
    case RelationClass::OrdinaryChild: return "ordinary_child";
    case RelationClass::NaturalParent: return "natural_parent";
    case RelationClass::NaturalChild: return "natural_child";
    case RelationClass::NoRelation: return "no_relation";
    }
    return "?";
}

const char* to_string(SupportKind k) {
    return k == SupportKind::Stable ? "stable" : "weak";
}

SceneGraph::SceneGraph(std::vector<std::string> categories, std::vector<SupportEdge> edges)
    : categories_(std::move(categories)), edges_(std::move(edges)) {
    const std::size_t n = categories_.size();
    if (n > kMaxObjects) {
        throw InvalidInput("scene has " + std::to_string(n) + " objects; at most " +
                           std::to_string(kMaxObjects) + " are supported");
    }
    children_.resize(n);
    parents_.resize(n);
    stable_children_.assign(n, 0);
    children_masks_.assign(n, 0);
    for (const auto& e : edges_) {
        if (e.parent.index() >= n || e.child.index() >= n) {
            throw InvalidInput("edge " + std::to_string(e.parent.value) + "->" +
                               std::to_string(e.child.value) + " references an unknown object");
        }
        children_[e.parent.index()].push_back(e.child);
        parents_[e.child.index()].push_back(e.parent);
        children_masks_[e.parent.index()] |= bit(e.child);
        if (e.kind == SupportKind::Stable) stable_children_[e.parent.index()] |= bit(e.child);
    }
    for (auto& list : children_) std::sort(list.begin(), list.end());
    for (auto& list : parents_) std::sort(list.begin(), list.end());
}

std::optional<SupportKind> SceneGraph::edge_kind(ObjectId parent, ObjectId child) const {
    for (const auto& e : edges_) {
        if (e.parent == parent && e.child == child) return e.kind;
    }
    return std::nullopt;
}

bool ValidationResult::has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [kind](const Violation& v) { return v.kind == kind; });
}

ValidationResult validate_scene(const SceneGraph& graph) {
    ValidationResult result;
    const std::size_t n = graph.size();
    auto add = [&](ViolationKind kind, std::string message) {
        result.violations.push_back({kind, std::move(message)});
    };

    std::map<std::pair<std::uint32_t, std::uint32_t>, int> seen;
    for (const auto& e : graph.edges()) {
        if (e.parent == e.child) {
            add(ViolationKind::SelfLoop, "object " + std::to_string(e.parent.value) + " supports itself");
            continue;
        }
        if (++seen[{e.parent.value, e.child.value}] == 2) {
            add(ViolationKind::DuplicateEdge, "duplicate edge " + std::to_string(e.parent.value) + "->" +
                                                  std::to_string(e.child.value));
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const ObjectId child{static_cast<std::uint32_t>(i)};
        const auto parents = graph.parents(child);
        const bool has_stable = std::any_of(graph.edges().begin(), graph.edges().end(), [&](const SupportEdge& e) {
            return e.child == child && e.kind == SupportKind::Stable;
        });
        if (has_stable && parents.size() > 1) {
            add(ViolationKind::MultiParentStableChild, "stable child " + std::to_string(i) + " has " +
                                                           std::to_string(parents.size()) + " parents");
        }
    }

    // Kahn over all objects; whatever is left over sits on or behind a cycle.
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& e : graph.edges()) {
        if (e.parent != e.child) ++indegree[e.child.index()];
    }
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (indegree[i] == 0) stack.push_back(i);
    }
    // Objects resting directly on the table are the root's children.
    std::vector<bool> reachable(n, false);
    for (std::size_t i : stack) reachable[i] = true;
    std::size_t removed = 0;
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        ++removed;
        for (ObjectId c : graph.children(ObjectId{static_cast<std::uint32_t>(i)})) {
            if (c.index() == i) continue;
            if (--indegree[c.index()] == 0) stack.push_back(c.index());
        }
    }
    if (removed < n) {
        std::ostringstream msg;
        msg << "cycle through objects";
        for (std::size_t i = 0; i < n; ++i) {
            if (indegree[i] > 0) msg << ' ' << i;
        }
        add(ViolationKind::Cycle, msg.str());
    }

    std::vector<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (reachable[i]) frontier.push_back(i);
    }
    while (!frontier.empty()) {
        const std::size_t i = frontier.back();
        frontier.pop_back();
        for (ObjectId c : graph.children(ObjectId{static_cast<std::uint32_t>(i)})) {
            if (!reachable[c.index()]) {
                reachable[c.index()] = true;
                frontier.push_back(c.index());
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!reachable[i]) {
            add(ViolationKind::Unreachable, "object " + std::to_string(i) + " is not reachable from the table");
        }
    }
    return result;
}

RelationMatrix::RelationMatrix(std::size_t n) : n_(n), cells_(n * n, RelationClass::NoRelation) {}

std::size_t RelationMatrix::index(ObjectId i, ObjectId j) const {
    if (i == j) {
        throw std::invalid_argument("relation of object " + std::to_string(i.value) + " with itself is undefined");
    }
    if (i.index() >= n_ || j.index() >= n_) {
        throw std::out_of_range("relation index out of range");
    }
    return i.index() * n_ + j.index();
}

RelationClass RelationMatrix::at(ObjectId i, ObjectId j) const { return cells_[index(i, j)]; }

void RelationMatrix::set(ObjectId i, ObjectId j, RelationClass r) { cells_[index(i, j)] = r; }

RelationMatrix relation_matrix(const SceneGraph& graph) {
    RelationMatrix m(graph.size());
    for (const auto& e : graph.edges()) {
        if (e.parent == e.child) continue;
        const auto forward = e.kind == SupportKind::Stable ? RelationClass::NaturalParent : RelationClass::OrdinaryParent;
        m.set(e.parent, e.child, forward);
        m.set(e.child, e.parent, mirror(forward));
    }
    return m;
}

ValidationResult validate_relations(const RelationMatrix& relations) {
    ValidationResult result;
    const auto n = static_cast<std::uint32_t>(relations.size());
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = i + 1; j < n; ++j) {
            const auto a = relations.at(ObjectId{i}, ObjectId{j});
            const auto b = relations.at(ObjectId{j}, ObjectId{i});
            if (mirror(a) != b) {
                result.violations.push_back(
                    {ViolationKind::SymmetryBreach, "relation (" + std::to_string(i) + "," + std::to_string(j) +
                                                        ")=" + to_string(a) + " but (" + std::to_string(j) + "," +
                                                        std::to_string(i) + ")=" + to_string(b)});
            }
        }
    }
    return result;
}

ObjectMask descendants(const SceneGraph& graph, ObjectId o, ObjectMask present) {
    ObjectMask seen = 0;
    ObjectMask frontier = graph.children_mask(o) & present;
    while (frontier != 0) {
        seen |= frontier;
        ObjectMask next = 0;
        for (ObjectMask scan = frontier; scan != 0; scan &= scan - 1) {
            const ObjectId c{static_cast<std::uint32_t>(std::countr_zero(scan))};
            next |= graph.children_mask(c);
        }
        frontier = next & present & ~seen;
    }
    return seen & ~bit(o);
}

DescendantTable build_descendant_table(const SceneGraph& graph) {
    const std::size_t n = graph.size();
    const ObjectMask all = full_mask(n);
    std::vector<std::vector<ObjectId>> entries(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ObjectId o{static_cast<std::uint32_t>(i)};
        const ObjectMask subtree = descendants(graph, o, all) | bit(o);
        if (graph.children_mask(o) & bit(o)) {
            throw std::logic_error("build_descendant_table: object " + std::to_string(i) + " supports itself");
        }
        const auto order = leaf_to_root_order(n, subtree, [&](std::size_t k) {
            return graph.children_mask(ObjectId{static_cast<std::uint32_t>(k)});
        });
        entries[i].reserve(order.size());
        for (std::size_t k : order) entries[i].push_back(ObjectId{static_cast<std::uint32_t>(k)});
        if (entries[i].back() != o) {
            // Only possible if o is its own descendant.
            throw std::logic_error("build_descendant_table: cycle through object " + std::to_string(i));
        }
    }
    return DescendantTable(std::move(entries));
}

ObjectMask stable_closure(const SceneGraph& graph, ObjectId o, ObjectMask present) {
    if (!contains(present, o)) return 0;
    ObjectMask closure = bit(o);
    ObjectMask frontier = closure;
    while (frontier != 0) {
        ObjectMask next = 0;
        for (ObjectMask scan = frontier; scan != 0; scan &= scan - 1) {
            next |= graph.stable_children_mask(ObjectId{static_cast<std::uint32_t>(std::countr_zero(scan))});
        }
        frontier = next & present & ~closure;
        closure |= frontier;
    }
    return closure;
}

std::vector<ObjectId> stable_closure(const SceneGraph& graph, ObjectId o) {
    if (o.index() >= graph.size()) throw std::out_of_range("stable_closure: unknown object");
    return to_ids(stable_closure(graph, o, full_mask(graph.size())));
}

}  // namespace stackplan
