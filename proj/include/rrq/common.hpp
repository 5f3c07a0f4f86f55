#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rrq {

/// Bad caller input: geometry mismatch, out-of-range parameter, malformed file.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A water-filling problem with no meaningful solution.
class DegenerateSource : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A distortion budget larger than the total source energy.
class BudgetExceedsEnergy : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Stored data failed verification: hash mismatch, truncation, unknown
/// version, index out of range.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Number of worker threads used by parallel loops. 0 means hardware
/// concurrency. Results never depend on this value.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(i) for i in [0, count). Iterations must be independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace rrq
