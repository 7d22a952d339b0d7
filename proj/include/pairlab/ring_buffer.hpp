#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pairlab {

/// Fixed-capacity FIFO. Pushing into a full buffer evicts the oldest element.
/// Index 0 is the oldest element.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : slots_(capacity) {
    if (capacity == 0) throw std::invalid_argument("RingBuffer: capacity must be positive");
  }

  std::size_t capacity() const { return slots_.size(); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  bool full() const { return size_ == slots_.size(); }

  /// Returns the evicted element, if any.
  std::optional<T> push(T item) {
    std::optional<T> evicted;
    if (full()) {
      evicted = std::move(slots_[head_]);
      slots_[head_] = std::move(item);
      head_ = advance(head_);
      return evicted;
    }
    slots_[wrap(head_ + size_)] = std::move(item);
    ++size_;
    return evicted;
  }

  T pop() {
    if (empty()) throw std::out_of_range("RingBuffer: pop from empty buffer");
    T out = std::move(slots_[head_]);
    head_ = advance(head_);
    --size_;
    return out;
  }

  const T& operator[](std::size_t i) const { return slots_[wrap(head_ + i)]; }
  const T& oldest() const { return (*this)[0]; }
  const T& newest() const { return (*this)[size_ - 1]; }

  void clear() {
    head_ = 0;
    size_ = 0;
  }

 private:
  std::size_t wrap(std::size_t i) const { return i % slots_.size(); }
  std::size_t advance(std::size_t i) const { return wrap(i + 1); }

  std::vector<T> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

}  // namespace pairlab
