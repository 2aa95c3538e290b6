#include "ecfm/pce.hpp"

#include <cmath>
#include <string>

namespace ecfm {

namespace {

bool positive_definite(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) return false;
  const Vector d = llt.matrixL().toDenseMatrix().diagonal();
  const double scale = sym.diagonal().cwiseAbs().maxCoeff();
  return d.minCoeff() * d.minCoeff() > 1e-13 * scale;
}

Vector forcing(const BeamOperatorSet& ops, const Vector& lambda) {
  if (lambda.size() != ops.constraint.cols()) {
    throw SolverError(ErrorKind::DimensionMismatch, "lambda size does not match the constraint columns");
  }
  return ops.load + ops.constraint * lambda;
}

}  // namespace

Vector PCECoefficients::at(const BasisFamily& stochastic_basis, double omega) const {
  return theta * stochastic_values(stochastic_basis, omega);
}

Vector stochastic_values(const BasisFamily& stochastic_basis, double omega) {
  Vector psi(stochastic_basis.count());
  for (int k = 0; k < stochastic_basis.count(); ++k) psi(k) = eval_basis(stochastic_basis, k + 1, omega);
  return psi;
}

StochasticGramian stochastic_gramian(const BasisFamily& stochastic_basis) {
  if (stochastic_basis.kind() != BasisKind::ShiftedLegendre) {
    throw SolverError(ErrorKind::InvalidArgument, "stochastic Gramian needs a shifted Legendre basis");
  }
  const int m = stochastic_basis.count();
  StochasticGramian g;
  g.g0 = Vector::Zero(m);
  g.g0(0) = 1.0;
  g.g2 = Matrix::Zero(m, m);
  g.g1 = Matrix::Zero(m, m);
  // omega P_n = P_n / 2 + ((n+1) P_{n+1} + n P_{n-1}) / (2 (2n+1))
  for (int n = 0; n < m; ++n) {
    const double norm = 1.0 / (2.0 * n + 1.0);
    g.g2(n, n) = norm;
    g.g1(n, n) = 0.5 * norm;
    if (n + 1 < m) {
      const double v = (n + 1.0) / (2.0 * (2.0 * n + 1.0) * (2.0 * n + 3.0));
      g.g1(n, n + 1) = v;
      g.g1(n + 1, n) = v;
    }
  }
  return g;
}

void MeasurementReplicates::validate() const {
  if (values.rows() < 1) throw SolverError(ErrorKind::InvalidArgument, "no measurement locations");
  if (values.cols() < 2) throw SolverError(ErrorKind::InvalidArgument, "at least two replicates are required");
  if (!points.empty() && static_cast<Eigen::Index>(points.size()) != values.rows()) {
    throw SolverError(ErrorKind::DimensionMismatch, "replicate rows do not match the points");
  }
  if (!values.allFinite()) throw SolverError(ErrorKind::InvalidArgument, "non-finite measurement");
}

StochasticSystem assemble_stochastic_galerkin(const BeamOperatorSet& ops, const StochasticGramian& gram, double eps,
                                              const Vector& lambda) {
  const auto [k0, k1] = ops.affine_bending();
  const int n = ops.size();
  const int m = gram.size();
  const Matrix base = k0 - eps * ops.geometric - ops.boundary;
  const Vector f = forcing(ops, lambda);
  StochasticSystem sys;
  sys.spatial = n;
  sys.stochastic = m;
  sys.matrix = Matrix::Zero(n * m, n * m);
  sys.rhs = Vector::Zero(n * m);
  for (int l = 0; l < m; ++l) {
    for (int k = 0; k < m; ++k) {
      if (gram.g2(k, l) == 0.0 && gram.g1(k, l) == 0.0) continue;
      sys.matrix.block(l * n, k * n, n, n) = gram.g2(k, l) * base + gram.g1(k, l) * k1;
    }
    sys.rhs.segment(l * n, n) = gram.g0(l) * f;
  }
  return sys;
}

StochasticSolution solve_stochastic_galerkin(const BeamOperatorSet& ops, const StochasticGramian& gram, double eps,
                                             const Vector& lambda) {
  const StochasticSystem sys = assemble_stochastic_galerkin(ops, gram, eps, lambda);
  if (!sys.matrix.allFinite() || !positive_definite(sys.matrix)) {
    throw SolverError(ErrorKind::SingularJacobian,
                      "stochastic Galerkin operator is not positive definite at eps = " + std::to_string(eps));
  }
  StochasticSolution sol;
  sol.factor = LuFactor(sys.matrix);
  const Vector x = sol.factor.solve(sys.rhs);
  sol.spatial = sys.spatial;
  sol.stochastic = sys.stochastic;
  sol.coefficients.theta = Eigen::Map<const Matrix>(x.data(), sys.spatial, sys.stochastic);
  return sol;
}

StochasticSensitivity stochastic_sensitivity(const StochasticSolution& solution, const BeamOperatorSet& ops,
                                             const StochasticGramian& gram) {
  const int n = solution.spatial;
  const int m = solution.stochastic;
  const int c = static_cast<int>(ops.constraint.cols());
  Matrix rhs(n * m, c + 1);
  for (int q = 0; q < c; ++q) {
    for (int l = 0; l < m; ++l) rhs.block(l * n, q, n, 1) = gram.g0(l) * ops.constraint.col(q);
  }
  const Matrix kg_theta = ops.geometric * solution.coefficients.theta * gram.g2;
  rhs.col(c) = Eigen::Map<const Vector>(kg_theta.data(), n * m);
  const Matrix sol = solution.factor.solve(rhs);
  StochasticSensitivity s;
  s.dtheta_dlambda.reserve(static_cast<size_t>(c));
  for (int q = 0; q < c; ++q) s.dtheta_dlambda.push_back(Eigen::Map<const Matrix>(sol.col(q).data(), n, m));
  s.dtheta_deps = Eigen::Map<const Matrix>(sol.col(c).data(), n, m);
  return s;
}

PredictionMoments moments(const Matrix& theta, const Matrix& measurement, const StochasticGramian& gram) {
  if (measurement.cols() != theta.rows() || theta.cols() != gram.size()) {
    throw SolverError(ErrorKind::DimensionMismatch, "moment inputs have inconsistent sizes");
  }
  const Matrix a = measurement * theta;  // C x M
  PredictionMoments out;
  out.mean = a * gram.g0;
  out.variance = (a * gram.g2).cwiseProduct(a).rowwise().sum() - out.mean.cwiseAbs2();
  for (Eigen::Index i = 0; i < out.variance.size(); ++i) {
    if (out.variance(i) < 0.0) {
      if (out.variance(i) < -1e-12 * std::max(1.0, out.mean(i) * out.mean(i))) {
        throw SolverError(ErrorKind::InvalidArgument, "negative prediction variance at point " + std::to_string(i));
      }
      out.variance(i) = 0.0;
    }
  }
  return out;
}

LikelihoodValue pseudo_log_likelihood(const Vector& mean, const Vector& variance, const MeasurementReplicates& data) {
  if (mean.size() != data.values.rows() || variance.size() != data.values.rows()) {
    throw SolverError(ErrorKind::DimensionMismatch, "moments do not match the replicate rows");
  }
  LikelihoodValue out;
  const double two_pi = 2.0 * M_PI;
  const int d = data.replicates();
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    double s2 = variance(i);
    if (s2 < kVarianceFloor) {
      s2 = kVarianceFloor;
      out.floored = true;
    }
    const double ss = (data.values.row(i).array() - mean(i)).square().sum();
    out.value += 0.5 * d * std::log(two_pi * s2) + ss / (2.0 * s2);
  }
  return out;
}

LikelihoodGradient grad_pseudo_likelihood(const Matrix& theta, const StochasticGramian& gram,
                                          const Matrix& measurement, const MeasurementReplicates& data,
                                          const StochasticSensitivity& sensitivity) {
  const PredictionMoments mom = moments(theta, measurement, gram);
  const LikelihoodValue lv = pseudo_log_likelihood(mom.mean, mom.variance, data);
  const int c = data.locations();
  const int d = data.replicates();
  Vector dmu(c);
  Vector ds2(c);
  for (int i = 0; i < c; ++i) {
    const bool pinned = mom.variance(i) < kVarianceFloor;
    const double s2 = pinned ? kVarianceFloor : mom.variance(i);
    const Eigen::ArrayXd r = data.values.row(i).transpose().array() - mom.mean(i);
    dmu(i) = -r.sum() / s2;
    ds2(i) = pinned ? 0.0 : d / (2.0 * s2) - r.square().sum() / (2.0 * s2 * s2);
  }
  const Matrix a = measurement * theta;  // C x M
  const Matrix a_g2 = a * gram.g2;
  auto chain = [&](const Matrix& dtheta) {
    const Matrix da = measurement * dtheta;
    const Vector dm = da * gram.g0;
    const Vector dv = 2.0 * a_g2.cwiseProduct(da).rowwise().sum() - 2.0 * mom.mean.cwiseProduct(dm);
    return dmu.dot(dm) + ds2.dot(dv);
  };
  LikelihoodGradient g;
  g.value = lv.value;
  g.floored = lv.floored;
  g.d_lambda.resize(static_cast<Eigen::Index>(sensitivity.dtheta_dlambda.size()));
  for (size_t q = 0; q < sensitivity.dtheta_dlambda.size(); ++q) {
    g.d_lambda(static_cast<Eigen::Index>(q)) = chain(sensitivity.dtheta_dlambda[q]);
  }
  g.d_eps = chain(sensitivity.dtheta_deps);
  return g;
}

Vector solve_beam_deterministic(const BeamOperatorSet& ops, double omega, double beta, const Vector& lambda) {
  const Matrix k = ops.effective_stiffness(omega, beta);
  if (!positive_definite(k)) {
    throw SolverError(ErrorKind::SingularJacobian,
                      "effective stiffness not positive definite at beta = " + std::to_string(beta));
  }
  return lu_solve(k, forcing(ops, lambda));
}

double critical_load(const BeamOperatorSet& ops, double omega) {
  if (!positive_definite(ops.effective_stiffness(omega, 0.0))) {
    throw SolverError(ErrorKind::InvalidArgument, "unloaded beam is already unstable");
  }
  double lo = 0.0;
  double hi = 1.0;
  int guard = 0;
  while (positive_definite(ops.effective_stiffness(omega, hi))) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw SolverError(ErrorKind::Diverged, "no buckling load found");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (positive_definite(ops.effective_stiffness(omega, mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace ecfm
