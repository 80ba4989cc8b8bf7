#pragma once

#include <memory>
#include <vector>

#include "egocl/graph_store.hpp"

namespace egocl {

/// Ordered tasks encountered sequentially; ids strictly increase.
struct TaskStream {
    std::vector<std::shared_ptr<const TaskGraph>> tasks;

    int num_tasks() const { return static_cast<int>(tasks.size()); }

    void validate() const {
        if (tasks.empty()) throw ConfigError("task stream needs at least one task");
        for (size_t i = 0; i < tasks.size(); ++i) {
            if (!tasks[i]) throw ConfigError("task stream has a null task");
            if (i > 0 && tasks[i]->task_id() <= tasks[i - 1]->task_id())
                throw ConfigError("task ids must strictly increase");
        }
    }
};

}  // namespace egocl
