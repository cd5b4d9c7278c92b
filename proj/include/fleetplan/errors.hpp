#pragma once

#include <stdexcept>
#include <string>

namespace fleetplan {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A subtask asked for more agents than the team provides.
struct InfeasibleTeamError : Error {
  using Error::Error;
};

// Mission relations contain a cycle, span missions, or the task set is empty.
struct MalformedMissionError : Error {
  using Error::Error;
};

// A scheduled task depends on a task that is neither done, executing, nor
// assigned anywhere.
struct PrecedenceViolationError : Error {
  using Error::Error;
};

// No roster selection can satisfy the per-action lower bounds.
struct FormationInfeasibleError : Error {
  int slot = -1;
  std::string action;
  FormationInfeasibleError(const std::string& msg, int slot_, std::string action_)
      : Error(msg), slot(slot_), action(std::move(action_)) {}
};

// Within-subteam coordination cannot serve some subtask.
struct LocalInfeasibleError : Error {
  using Error::Error;
};

// Exhaustive oracle refused an instance outside its documented bounds.
struct OracleBoundsError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

}  // namespace fleetplan
