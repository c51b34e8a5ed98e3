#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace liftcut {

inline constexpr const char* kVersion = "0.1.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Numerical thresholds shared by every module.
namespace tol {
/// Absolute tolerance on distances in tangency / containment tests.
inline constexpr double kGeometry = 1e-8;
/// Eigenvalues at or below this are treated as zero.
inline constexpr double kEigen = 1e-10;
/// Symmetry tolerance for input matrices (infinity norm of M - M^T).
inline constexpr double kSymmetry = 1e-12;
/// Residual below which a sampled point counts as a counterexample.
inline constexpr double kCutResidual = 1e-7;
/// KKT residual ceiling for an Optimal solver outcome.
inline constexpr double kKkt = 1e-8;
}  // namespace tol

enum class ErrorCode {
  DimensionMismatch,
  InvalidInput,
  NotPositiveDefinite,
  NotSymmetric,
  EmptyInterior,
  UnboundedEllipsoid,
  SamePairIndex,
  NotOnFacet,
  AlphaTooLarge,
  InvalidCut,
  IdenticalNormals,
  NotRelativeInterior,
  SolverFailure,
  UnboundedDirection,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::EmptyInterior: return "EmptyInterior";
    case ErrorCode::UnboundedEllipsoid: return "UnboundedEllipsoid";
    case ErrorCode::SamePairIndex: return "SamePairIndex";
    case ErrorCode::NotOnFacet: return "NotOnFacet";
    case ErrorCode::AlphaTooLarge: return "AlphaTooLarge";
    case ErrorCode::InvalidCut: return "InvalidCut";
    case ErrorCode::IdenticalNormals: return "IdenticalNormals";
    case ErrorCode::NotRelativeInterior: return "NotRelativeInterior";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::UnboundedDirection: return "UnboundedDirection";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require_dimension(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected dimension " +
                                                  std::to_string(want) + ", got " +
                                                  std::to_string(got));
  }
}

}  // namespace liftcut
