#pragma once

#include <cstdint>
#include <vector>

#include "tecrl/batch.hpp"
#include "tecrl/env.hpp"
#include "tecrl/rng.hpp"

namespace tecrl {

/// Fixed-capacity ring of transitions; once full, each push overwrites the
/// oldest entry. Storage grows lazily up to capacity.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  void push(const Transition& t);
  /// Uniform sampling with replacement over the current contents.
  Batch sample(std::size_t batch_size, Rng& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }

  /// Row `i` of the underlying storage, for tests.
  Transition at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t sdim_;
  std::size_t adim_;
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
  std::vector<std::uint8_t> done_;
};

}  // namespace tecrl
