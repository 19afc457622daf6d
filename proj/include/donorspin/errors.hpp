#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace donorspin {

// One problem found while validating a configuration document.
struct Issue {
  std::string key;
  std::string message;
};

// Raised when input documents or arguments fail validation. Carries every
// problem found, not just the first.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Issue> issues);
  ValidationError(std::string key, std::string message);

  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  std::vector<Issue> issues_;
};

// Raised when a numerical procedure cannot produce a trustworthy result
// (integrator step underflow, positivity violation, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the ODE integrator when the step size underflows.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double last_good_time)
      : NumericalError(what), last_good_time_(last_good_time) {}

  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

// File-system level failures (missing file, unwritable directory).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Collects issues and throws them together.
class IssueCollector {
 public:
  void add(std::string key, std::string message) {
    issues_.push_back({std::move(key), std::move(message)});
  }
  bool empty() const noexcept { return issues_.empty(); }
  const std::vector<Issue>& issues() const noexcept { return issues_; }
  void throw_if_any() const {
    if (!issues_.empty()) throw ValidationError(issues_);
  }

 private:
  std::vector<Issue> issues_;
};

}  // namespace donorspin
