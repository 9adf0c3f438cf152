#pragma once

#include <cstdint>
#include <vector>

#include "tecrl/common.hpp"

namespace tecrl {

/// Minibatch of transitions, one per row. `done` is the genuine terminal
/// flag; truncated transitions arrive with done = 0 and bootstrap normally.
struct Batch {
  Matrix states;
  Matrix actions;
  std::vector<double> rewards;
  Matrix next_states;
  std::vector<std::uint8_t> done;

  std::size_t size() const { return rewards.size(); }
};

}  // namespace tecrl
