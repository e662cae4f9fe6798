#pragma once

#include <bit>
#include <stdexcept>
#include <vector>

namespace stackplan {

template <class ChildrenFn>
std::vector<std::size_t> leaf_to_root_order(std::size_t n, ObjectMask subset, ChildrenFn&& children) {
    std::vector<ObjectMask> pending(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (subset & (ObjectMask{1} << i)) {
            pending[i] = static_cast<ObjectMask>(children(i)) & subset;
        }
    }

    std::vector<std::size_t> order;
    order.reserve(static_cast<std::size_t>(std::popcount(subset)));
    ObjectMask remaining = subset;
    while (remaining != 0) {
        ObjectMask ready = 0;
        for (ObjectMask scan = remaining; scan != 0; scan &= scan - 1) {
            const auto i = static_cast<std::size_t>(std::countr_zero(scan));
            if ((pending[i] & remaining) == 0) {
                ready |= ObjectMask{1} << i;
            }
        }
        if (ready == 0) {
            throw std::logic_error("leaf_to_root_order: cycle in subset");
        }
        const auto next = static_cast<std::size_t>(std::countr_zero(ready));
        order.push_back(next);
        remaining &= ~(ObjectMask{1} << next);
    }
    return order;
}

}  // namespace stackplan
