#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stackplan/scene.hpp"

namespace testutil {

using namespace stackplan;

inline ObjectId id(std::uint32_t v) { return ObjectId{v}; }

inline SupportEdge stable(std::uint32_t p, std::uint32_t c) { return {id(p), id(c), SupportKind::Stable}; }
inline SupportEdge weak(std::uint32_t p, std::uint32_t c) { return {id(p), id(c), SupportKind::Weak}; }

inline std::vector<ObjectId> ids(std::initializer_list<std::uint32_t> v) {
    std::vector<ObjectId> out;
    for (auto x : v) out.push_back(id(x));
    return out;
}

// bowl(0) carries spoon(1)
inline SceneGraph bowl_spoon() { return SceneGraph({"bowl", "spoon"}, {stable(0, 1)}); }

}  // namespace testutil
