#include "ecfm/linalg.hpp"

namespace ecfm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InconsistentInitialData: return "InconsistentInitialData";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

LuFactor::LuFactor(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw SolverError(ErrorKind::DimensionMismatch, "LU of a non-square matrix");
  }
  if (a.rows() == 0) {
    singular_ = false;
    return;
  }
  if (!a.allFinite()) {
    singular_ = true;
    return;
  }
  lu_.compute(a);
  const double norm_inf = a.cwiseAbs().rowwise().sum().maxCoeff();
  const double threshold = 1e-12 * norm_inf;
  const auto& packed = lu_.matrixLU();
  singular_ = norm_inf == 0.0;
  for (Eigen::Index i = 0; i < packed.rows() && !singular_; ++i) {
    if (std::abs(packed(i, i)) < threshold) singular_ = true;
  }
}

Vector LuFactor::solve(const Vector& rhs) const {
  if (singular_) throw SolverError(ErrorKind::SingularJacobian, "singular linear system");
  if (lu_.rows() == 0) return Vector(0);
  return lu_.solve(rhs);
}

Matrix LuFactor::solve(const Matrix& rhs) const {
  if (singular_) throw SolverError(ErrorKind::SingularJacobian, "singular linear system");
  if (lu_.rows() == 0) return Matrix(0, rhs.cols());
  return lu_.solve(rhs);
}

Vector lu_solve(const Matrix& a, const Vector& rhs) { return LuFactor(a).solve(rhs); }

}  // namespace ecfm
