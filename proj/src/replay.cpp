#include "tecrl/replay.hpp"

#include <algorithm>

#include "tecrl/common.hpp"

namespace tecrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), sdim_(state_dim), adim_(action_dim) {
  if (capacity == 0) throw ContractError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != sdim_ || t.next_state.size() != sdim_ || t.action.size() != adim_)
    throw ContractError("ReplayBuffer::push: transition does not match buffer dimensions");
  const std::size_t slot = static_cast<std::size_t>(inserted_ % capacity_);
  if (slot == size_ && size_ < capacity_) {
    states_.insert(states_.end(), t.state.begin(), t.state.end());
    actions_.insert(actions_.end(), t.action.begin(), t.action.end());
    rewards_.push_back(t.reward);
    next_states_.insert(next_states_.end(), t.next_state.begin(), t.next_state.end());
    done_.push_back(t.done ? 1 : 0);
    ++size_;
  } else {
    std::copy(t.state.begin(), t.state.end(), states_.begin() + static_cast<std::ptrdiff_t>(slot * sdim_));
    std::copy(t.action.begin(), t.action.end(), actions_.begin() + static_cast<std::ptrdiff_t>(slot * adim_));
    rewards_[slot] = t.reward;
    std::copy(t.next_state.begin(), t.next_state.end(),
              next_states_.begin() + static_cast<std::ptrdiff_t>(slot * sdim_));
    done_[slot] = t.done ? 1 : 0;
  }
  ++inserted_;
}

Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || size_ < batch_size)
    throw ContractError("ReplayBuffer::sample: buffer holds " + std::to_string(size_) + " transitions, need " +
                        std::to_string(batch_size));
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  Batch b;
  b.states = Matrix(batch_size, sdim_);
  b.actions = Matrix(batch_size, adim_);
  b.next_states = Matrix(batch_size, sdim_);
  b.rewards.resize(batch_size);
  b.done.resize(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t i = pick(rng);
    std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>(i * sdim_), sdim_, b.states.row(k).begin());
    std::copy_n(actions_.begin() + static_cast<std::ptrdiff_t>(i * adim_), adim_, b.actions.row(k).begin());
    std::copy_n(next_states_.begin() + static_cast<std::ptrdiff_t>(i * sdim_), sdim_, b.next_states.row(k).begin());
    b.rewards[k] = rewards_[i];
    b.done[k] = done_[i];
  }
  return b;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw ContractError("ReplayBuffer::at: index out of range");
  Transition t;
  t.state.assign(states_.begin() + static_cast<std::ptrdiff_t>(i * sdim_),
                 states_.begin() + static_cast<std::ptrdiff_t>((i + 1) * sdim_));
  t.action.assign(actions_.begin() + static_cast<std::ptrdiff_t>(i * adim_),
                  actions_.begin() + static_cast<std::ptrdiff_t>((i + 1) * adim_));
  t.reward = rewards_[i];
  t.next_state.assign(next_states_.begin() + static_cast<std::ptrdiff_t>(i * sdim_),
                      next_states_.begin() + static_cast<std::ptrdiff_t>((i + 1) * sdim_));
  t.done = done_[i] != 0;
  return t;
}

}  // namespace tecrl
