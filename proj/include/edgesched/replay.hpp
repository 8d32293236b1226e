#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "edgesched/error.hpp"
#include "edgesched/rng.hpp"

namespace edgesched {

/// Fixed-capacity ring; once full, each push evicts the oldest entry.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ValidationError("replay capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity_, 4096));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i-th oldest retained item.
  const T& at(std::size_t i) const {
    if (i >= items_.size()) throw ValidationError("replay index out of range");
    return items_[(head_ + i) % items_.size()];
  }

  /// Uniform sample with replacement.
  std::vector<const T*> sample(std::size_t n, Rng& rng) const {
    if (items_.empty()) throw StateError("cannot sample from an empty replay buffer");
    std::vector<const T*> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(&items_[uniform_index(rng, items_.size())]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest slot once the ring is full
  std::vector<T> items_;
};

}  // namespace edgesched
