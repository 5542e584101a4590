#pragma once

#include <stdexcept>
#include <string>

namespace coopmpc {

// scenario/config problems (bad file, bad field, inconsistent dimensions)
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// malformed scenario text; the message carries line and column
struct ParseError : ConfigError {
  explicit ParseError(const std::string& what) : ConfigError(what) {}
};

// a local problem without a feasible point (bad initial state, unreachable terminal set)
struct InfeasibleError : std::runtime_error {
  InfeasibleError(int agent_, int time_, const std::string& what)
      : std::runtime_error(what), agent(agent_), time(time_) {}
  int agent;
  int time;
};

// filesystem trouble while writing outputs
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace coopmpc
