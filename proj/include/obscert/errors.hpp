#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace obscert {

/// Simulation produced a non-finite state or violated a model guard.
/// `step_index` is the sampling-period index at which the failure occurred
/// (the substep that failed belongs to that period).
class NonFiniteState : public std::runtime_error {
 public:
  NonFiniteState(std::size_t step_index, const std::string& what)
      : std::runtime_error(what), step_index(step_index) {}
  std::size_t step_index;
};

/// A scenario id exhausted its redraw budget without producing a valid draw.
class ResampleExhausted : public std::runtime_error {
 public:
  ResampleExhausted(std::uint64_t scenario_id, const std::string& what)
      : std::runtime_error(what), scenario_id(scenario_id) {}
  std::uint64_t scenario_id;
};

/// Fewer scenario records than the certification bound requires.
class InsufficientScenarios : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Certification parameters outside their admissible ranges.
class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration file problem; `field` carries the JSON path of the offender.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& reason)
      : std::runtime_error(field + ": " + reason), field(field) {}
  std::string field;
};

}  // namespace obscert
