#pragma once

#include <stdexcept>
#include <string>

namespace hinet {

// Raised when an argument violates a documented precondition.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A statistic whose denominator vanishes (no edges, a single category,
// zero variance, an empty comparison group).
class UndefinedStatistic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class TuningFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hinet
