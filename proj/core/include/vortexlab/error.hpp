#pragma once

#include <stdexcept>
#include <string>

namespace vortexlab {

enum class ErrorCode {
  DegenerateMetric,
  Integration,
  Relaxation,
  Collapse,
  OutOfChart,
  Ambiguity,
  Degeneracy,
  ChartOverflow,
  Normalization,
  Extraction,
  Homology,
  Solver,
  BlowUp,
  Stability,
  Trace,
  Domain,
  DegreeCondition,
  Convergence,
  Validation,
  Resume,
  Resolution,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace vortexlab
