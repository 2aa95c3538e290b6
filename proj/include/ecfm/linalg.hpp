#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ecfm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Failure categories shared by the Newton, tangent and optimizer layers.
enum class ErrorKind {
  SingularJacobian,
  MaxItersExceeded,
  Diverged,
  DimensionMismatch,
  InvalidArgument,
  InconsistentInitialData,
  Infeasible,
  ConfigError,
};

const char* to_string(ErrorKind kind);

class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Dense LU with partial pivoting. A matrix is treated as singular when some
/// pivot falls below 1e-12 * ||A||_inf.
class LuFactor {
 public:
  LuFactor() = default;
  explicit LuFactor(const Matrix& a);

  bool singular() const { return singular_; }
  Eigen::Index size() const { return lu_.rows(); }

  /// Throws SolverError(SingularJacobian) when the factorization is singular.
  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;

 private:
  Eigen::PartialPivLU<Matrix> lu_;
  bool singular_ = true;
};

Vector lu_solve(const Matrix& a, const Vector& rhs);

}  // namespace ecfm
