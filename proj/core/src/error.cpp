#include "vortexlab/error.hpp"

namespace vortexlab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateMetric: return "degenerate-metric error";
    case ErrorCode::Integration: return "integration error";
    case ErrorCode::Relaxation: return "relaxation error";
    case ErrorCode::Collapse: return "collapse error";
    case ErrorCode::OutOfChart: return "out-of-chart error";
    case ErrorCode::Ambiguity: return "ambiguity error";
    case ErrorCode::Degeneracy: return "degeneracy error";
    case ErrorCode::ChartOverflow: return "chart-overflow error";
    case ErrorCode::Normalization: return "normalization error";
    case ErrorCode::Extraction: return "extraction error";
    case ErrorCode::Homology: return "homology error";
    case ErrorCode::Solver: return "solver error";
    case ErrorCode::BlowUp: return "blow-up error";
    case ErrorCode::Stability: return "stability error";
    case ErrorCode::Trace: return "trace error";
    case ErrorCode::Domain: return "domain error";
    case ErrorCode::DegreeCondition: return "degree-condition error";
    case ErrorCode::Convergence: return "convergence error";
    case ErrorCode::Validation: return "validation error";
    case ErrorCode::Resume: return "resume error";
    case ErrorCode::Resolution: return "resolution error";
    case ErrorCode::Io: return "io error";
  }
  return "error";
}

}  // namespace vortexlab
