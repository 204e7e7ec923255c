#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace slfv {

/// An event law violating a finiteness or support requirement.
class InadmissibleLaw : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A simulation ran out of horizon or event budget before its stopping rule.
class SimulationTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scaling sequences that fall in none of the cases with a known limit.
class UncoveredRegime : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> messages);
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
};

}  // namespace slfv
