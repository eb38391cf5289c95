#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace padrl {

using Token = int;

enum class TaskKind { digit_sum, parity_echo, padding_exploit };

std::string_view to_string(TaskKind kind);
/// Throws std::invalid_argument on unknown names.
TaskKind parse_task_kind(std::string_view name);

// One verifiable task instance. `condition` is the key the policy is
// conditioned on; it is a pure function of (task, spec) and is recomputed
// on import rather than serialized.
struct Prompt {
  std::uint64_t id = 0;
  TaskKind task = TaskKind::digit_sum;
  std::vector<int> spec;
  double difficulty = 0.0;
  std::size_t condition = 0;

  bool operator==(const Prompt&) const = default;
};

}  // namespace padrl
