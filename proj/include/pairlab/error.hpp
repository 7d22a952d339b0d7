#pragma once

#include <stdexcept>
#include <string>

namespace pairlab {

// Raised when a vector cannot be l2-normalized (zero or non-finite norm).
class DegenerateEmbedding : public std::runtime_error {
 public:
  DegenerateEmbedding() : std::runtime_error("degenerate embedding") {}
};

// Raised on non-finite loss or gradient during optimization.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pairlab
