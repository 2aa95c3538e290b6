#include "ecfm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace ecfm {

const char* to_string(OptStatus status) {
  switch (status) {
    case OptStatus::Converged: return "converged";
    case OptStatus::MaxItersExceeded: return "max_iters_exceeded";
    case OptStatus::NonFiniteGradient: return "non_finite_gradient";
    case OptStatus::Infeasible: return "infeasible";
    case OptStatus::LinearAlgebraFailure: return "linear_algebra_failure";
    case OptStatus::Stalled: return "stalled";
    case OptStatus::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0) ||
      epochs < 0 || max_consecutive_failures < 1) {
    throw SolverError(ErrorKind::InvalidArgument, "invalid ADAM configuration");
  }
}

OptResult adam_minimize(const ValueGradientFn& fn, const Vector& x0, const AdamConfig& config) {
  config.validate();
  OptResult result;
  Vector x = x0;
  Vector last_good = x0;
  Vector m = Vector::Zero(x0.size());
  Vector v = Vector::Zero(x0.size());
  int failures = 0;
  int t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ValueAndGradient eval;
    try {
      eval = fn(x);
    } catch (const SolverError& e) {
      ++failures;
      if (failures >= config.max_consecutive_failures) {
        result.status = OptStatus::SolverFailure;
        result.message = std::string("objective evaluation failed repeatedly: ") + e.what();
        result.x = last_good;
        result.iterations = epoch;
        return result;
      }
      x = 0.5 * (x + last_good);
      continue;
    }
    if (!std::isfinite(eval.value) || !eval.gradient.allFinite()) {
      result.status = OptStatus::NonFiniteGradient;
      result.message = "non-finite objective or gradient";
      result.x = x;
      result.iterations = epoch;
      return result;
    }
    failures = 0;
    last_good = x;
    result.objective_trace.push_back(eval.value);
    result.constraint_violation_trace.push_back(0.0);
    ++t;
    m = config.beta1 * m + (1.0 - config.beta1) * eval.gradient;
    v = config.beta2 * v + (1.0 - config.beta2) * eval.gradient.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double mh = m(i) / c1;
      const double vh = v(i) / c2;
      x(i) -= config.learning_rate * mh / (std::sqrt(vh) + config.eps);
    }
  }
  result.x = x;
  result.iterations = config.epochs;
  result.status = OptStatus::Converged;
  result.converged = true;
  return result;
}

OptResult adam_minimize(const GradientFn& grad_fn, const ValueFn& value_fn, const Vector& x0,
                        const AdamConfig& config) {
  return adam_minimize([&](const Vector& x) { return ValueAndGradient{value_fn(x), grad_fn(x)}; }, x0, config);
}

void NLPProblem::validate() const {
  if (!objective || !objective_gradient) {
    throw SolverError(ErrorKind::InvalidArgument, "NLP objective and gradient are required");
  }
  if (num_eq < 0 || num_ineq < 0 || (num_eq > 0 && (!eq_constraints || !eq_jacobian)) ||
      (num_ineq > 0 && (!ineq_constraints || !ineq_jacobian))) {
    throw SolverError(ErrorKind::InvalidArgument, "NLP constraint callbacks missing");
  }
  if (num_eq > x0.size()) {
    throw SolverError(ErrorKind::InvalidArgument, "more equality constraints than variables");
  }
}

Vector solve_box_qp(const Matrix& q_matrix, const Vector& q_vector, double lower, double upper) {
  const Eigen::Index m = q_vector.size();
  if (q_matrix.rows() != m || q_matrix.cols() != m || !(upper >= lower)) {
    throw SolverError(ErrorKind::DimensionMismatch, "box QP dimensions");
  }
  if (m == 0) return Vector();
  const double reg = 1e-12 * (1.0 + q_matrix.diagonal().cwiseAbs().maxCoeff());
  Matrix q = 0.5 * (q_matrix + q_matrix.transpose());
  q.diagonal().array() += reg;

  // state: -1 at lower, +1 at upper, 0 free
  std::vector<int> state(static_cast<size_t>(m), -1);
  Vector mu = Vector::Constant(m, lower);
  for (int iter = 0; iter < 50 * static_cast<int>(m) + 50; ++iter) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (state[static_cast<size_t>(i)] == 0) free.push_back(i);
    }
    const Vector grad = q * mu + q_vector;
    Vector step = Vector::Zero(m);
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Matrix qff(nf, nf);
      Vector gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf(a) = grad(free[static_cast<size_t>(a)]);
        for (Eigen::Index b = 0; b < nf; ++b) qff(a, b) = q(free[static_cast<size_t>(a)], free[static_cast<size_t>(b)]);
      }
      const Vector pf = qff.ldlt().solve(-gf);
      for (Eigen::Index a = 0; a < nf; ++a) step(free[static_cast<size_t>(a)]) = pf(a);
    }
    const double scale = 1.0 + mu.cwiseAbs().maxCoeff();
    if (step.cwiseAbs().maxCoeff() <= 1e-14 * scale) {
      // check bound multipliers
      Eigen::Index worst = -1;
      double worst_val = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const int s = state[static_cast<size_t>(i)];
        const double viol = s == -1 ? -grad(i) : (s == 1 ? grad(i) : 0.0);
        if (viol > worst_val) {
          worst_val = viol;
          worst = i;
        }
      }
      if (worst < 0 || worst_val <= 1e-14 * (1.0 + grad.cwiseAbs().maxCoeff())) return mu;
      state[static_cast<size_t>(worst)] = 0;
      continue;
    }
    double alpha = 1.0;
    Eigen::Index block = -1;
    int block_state = 0;
    for (Eigen::Index i : free) {
      if (step(i) < 0.0) {
        const double a = (lower - mu(i)) / step(i);
        if (a < alpha) {
          alpha = a;
          block = i;
          block_state = -1;
        }
      } else if (step(i) > 0.0) {
        const double a = (upper - mu(i)) / step(i);
        if (a < alpha) {
          alpha = a;
          block = i;
          block_state = 1;
        }
      }
    }
    mu += std::max(alpha, 0.0) * step;
    if (block >= 0) {
      state[static_cast<size_t>(block)] = block_state;
      mu(block) = block_state == -1 ? lower : upper;
    }
  }
  return mu.cwiseMax(lower).cwiseMin(upper);
}

namespace {

struct NlpPoint {
  Vector x;
  double f = 0.0;
  Vector g;
  Vector ce;
  Matrix je;
  Vector ci;
  Matrix ji;
};

NlpPoint evaluate(const NLPProblem& p, const Vector& x, bool with_derivatives) {
  NlpPoint pt;
  pt.x = x;
  pt.f = p.objective(x);
  pt.ce = p.num_eq > 0 ? p.eq_constraints(x) : Vector();
  pt.ci = p.num_ineq > 0 ? p.ineq_constraints(x) : Vector();
  if (pt.ce.size() != p.num_eq || pt.ci.size() != p.num_ineq) {
    throw SolverError(ErrorKind::DimensionMismatch, "constraint callback size mismatch");
  }
  if (with_derivatives) {
    pt.g = p.objective_gradient(x);
    pt.je = p.num_eq > 0 ? p.eq_jacobian(x) : Matrix(0, x.size());
    pt.ji = p.num_ineq > 0 ? p.ineq_jacobian(x) : Matrix(0, x.size());
    if (pt.g.size() != x.size() || pt.je.rows() != p.num_eq || pt.je.cols() != x.size() ||
        pt.ji.rows() != p.num_ineq || pt.ji.cols() != x.size()) {
      throw SolverError(ErrorKind::DimensionMismatch, "derivative callback size mismatch");
    }
  }
  return pt;
}

double l1_violation(const NlpPoint& pt) {
  double v = pt.ce.cwiseAbs().sum();
  for (Eigen::Index i = 0; i < pt.ci.size(); ++i) v += std::max(0.0, -pt.ci(i));
  return v;
}

double max_violation(const NlpPoint& pt) {
  double v = pt.ce.size() > 0 ? pt.ce.cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < pt.ci.size(); ++i) v = std::max(v, -pt.ci(i));
  return v;
}

bool finite(const NlpPoint& pt) {
  return std::isfinite(pt.f) && pt.ce.allFinite() && pt.ci.allFinite();
}

Vector lagrangian_gradient(const NlpPoint& pt, const Vector& y, const Vector& mu) {
  Vector r = pt.g;
  if (y.size() > 0) r -= pt.je.transpose() * y;
  if (mu.size() > 0) r -= pt.ji.transpose() * mu;
  return r;
}

// Adds tau * I until the Hessian restricted to the null space of je is
// positive definite.
bool regularize(Matrix& w, const Matrix& je) {
  const Eigen::Index n = w.rows();
  Matrix z;
  if (je.rows() == 0) {
    z = Matrix::Identity(n, n);
  } else {
    Eigen::HouseholderQR<Matrix> qr(je.transpose());
    const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    z = q.rightCols(n - je.rows());
  }
  if (z.cols() == 0) return true;
  const Matrix reduced0 = z.transpose() * w * z;
  double tau = 0.0;
  const double base = 1e-8 * (1.0 + w.cwiseAbs().maxCoeff());
  for (int k = 0; k < 40; ++k) {
    Matrix reduced = reduced0;
    reduced.diagonal().array() += tau;
    Eigen::LLT<Matrix> llt(reduced);
    if (llt.info() == Eigen::Success) {
      // make sure the smallest pivot is not vanishing
      const double dmin = llt.matrixL().toDenseMatrix().diagonal().minCoeff();
      if (dmin * dmin > 1e-14 * (1.0 + reduced.diagonal().cwiseAbs().maxCoeff())) {
        w.diagonal().array() += tau;
        return true;
      }
    }
    tau = tau == 0.0 ? base : tau * 10.0;
  }
  return false;
}

}  // namespace

OptResult solve_nlp(const NLPProblem& problem, const NLPOptions& options) {
  problem.validate();
  const Eigen::Index n = problem.x0.size();
  const int me = problem.num_eq;
  const int mi = problem.num_ineq;
  OptResult result;

  NlpPoint pt = evaluate(problem, problem.x0, true);
  if (!finite(pt) || !pt.g.allFinite()) {
    result.x = pt.x;
    result.status = OptStatus::NonFiniteGradient;
    result.message = "non-finite values at the initial point";
    return result;
  }
  Vector y = Vector::Zero(me);
  Vector mu = Vector::Zero(mi);
  Matrix bfgs = Matrix::Identity(n, n);
  bool bfgs_scaled = false;
  double nu = 1.0;
  bool have_multipliers = false;

  auto fill_kkt = [&](const NlpPoint& p) {
    const Vector r = lagrangian_gradient(p, y, mu);
    result.stationarity = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
    result.feasibility = max_violation(p);
    double comp = 0.0;
    for (Eigen::Index i = 0; i < mi; ++i) comp = std::max(comp, std::abs(mu(i) * p.ci(i)));
    result.complementarity = comp;
    result.eq_multipliers = y;
    result.ineq_multipliers = mu;
  };

  for (int iter = 0; iter < options.max_iters; ++iter) {
    result.iterations = iter;
    result.objective_trace.push_back(pt.f);
    result.constraint_violation_trace.push_back(max_violation(pt));
    fill_kkt(pt);
    const double stol = options.stationarity_tol * (1.0 + std::abs(pt.f));
    if (have_multipliers && result.stationarity <= stol && result.feasibility <= options.feasibility_tol &&
        result.complementarity <= stol && (mi == 0 || mu.minCoeff() >= 0.0)) {
      result.x = pt.x;
      result.status = OptStatus::Converged;
      result.converged = true;
      return result;
    }

    Matrix w = problem.lagrangian_hessian ? problem.lagrangian_hessian(pt.x, y, mu) : bfgs;
    if (w.rows() != n || w.cols() != n || !w.allFinite()) {
      throw SolverError(ErrorKind::DimensionMismatch, "Lagrangian Hessian has the wrong shape or is non-finite");
    }
    w = 0.5 * (w + w.transpose());
    if (!regularize(w, pt.je)) {
      result.x = pt.x;
      result.status = OptStatus::LinearAlgebraFailure;
      result.message = "could not regularize the reduced Hessian";
      return result;
    }

    // KKT system [W -Je^T; Je 0][d; y] = [-g + Ji^T mu; -ce]
    Matrix kkt = Matrix::Zero(n + me, n + me);
    kkt.topLeftCorner(n, n) = w;
    if (me > 0) {
      kkt.topRightCorner(n, me) = -pt.je.transpose();
      kkt.bottomLeftCorner(me, n) = pt.je;
    }
    LuFactor lu(kkt);
    if (lu.singular()) {
      result.x = pt.x;
      result.status = OptStatus::LinearAlgebraFailure;
      result.message = "singular KKT matrix (dependent equality constraints?)";
      return result;
    }
    Vector rhs0(n + me);
    rhs0.head(n) = -pt.g;
    if (me > 0) rhs0.tail(me) = -pt.ce;
    const Vector sol0 = lu.solve(rhs0);
    Vector d = sol0.head(n);
    Vector y_new = sol0.tail(me);
    Vector mu_new = Vector::Zero(mi);
    if (mi > 0) {
      Matrix rhs = Matrix::Zero(n + me, mi);
      rhs.topRows(n) = pt.ji.transpose();
      const Matrix cols = lu.solve(rhs);
      const Matrix dd = cols.topRows(n);
      const Matrix q = pt.ji * dd;
      const Vector qv = pt.ji * d + pt.ci;
      const double rho = 1e6 * (1.0 + pt.g.cwiseAbs().maxCoeff() + (me > 0 ? y.cwiseAbs().maxCoeff() : 0.0));
      mu_new = solve_box_qp(q, qv, 0.0, rho);
      d += dd * mu_new;
      y_new += cols.bottomRows(me) * mu_new;
    }

    if (!d.allFinite()) {
      result.x = pt.x;
      result.status = OptStatus::LinearAlgebraFailure;
      result.message = "non-finite search direction";
      return result;
    }

    const double mult_max = std::max(me > 0 ? y_new.cwiseAbs().maxCoeff() : 0.0,
                                      mi > 0 ? mu_new.cwiseAbs().maxCoeff() : 0.0);
    nu = std::max(nu, 1.5 * mult_max + 1e-8);
    const double viol0 = l1_violation(pt);
    const double merit0 = pt.f + nu * viol0;
    double slope = pt.g.dot(d) - nu * viol0;
    if (slope > 0.0) slope = -std::abs(d.dot(w * d));

    // Tiny steps with a satisfied linearization: take the new multipliers and
    // re-check the certificate without moving.
    const bool tiny = d.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + pt.x.cwiseAbs().maxCoeff());

    NlpPoint trial;
    bool accepted = false;
    double alpha = 1.0;
    if (tiny) {
      trial = pt;
      accepted = true;
    }
    for (int ls = 0; ls < 60 && !accepted; ++ls) {
      bool ok = true;
      try {
        trial = evaluate(problem, pt.x + alpha * d, false);
      } catch (const SolverError& e) {
        if (e.kind() == ErrorKind::DimensionMismatch || e.kind() == ErrorKind::InvalidArgument) throw;
        ok = false;
      }
      if (ok && finite(trial)) {
        const double merit = trial.f + nu * l1_violation(trial);
        if (merit <= merit0 + 1e-4 * alpha * slope + 1e-14 * std::abs(merit0)) {
          accepted = true;
          break;
        }
        if (ls == 0 && me > 0) {
          // second-order correction against the equality curvature
          const Matrix jjt = pt.je * pt.je.transpose();
          const Vector corr = -pt.je.transpose() * jjt.ldlt().solve(trial.ce);
          NlpPoint soc;
          bool soc_ok = true;
          try {
            soc = evaluate(problem, pt.x + d + corr, false);
          } catch (const SolverError&) {
            soc_ok = false;
          }
          if (soc_ok && finite(soc) && soc.f + nu * l1_violation(soc) <= merit0 + 1e-4 * slope) {
            trial = soc;
            accepted = true;
            break;
          }
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      result.x = pt.x;
      result.status = max_violation(pt) > options.feasibility_tol ? OptStatus::Infeasible : OptStatus::Stalled;
      result.message = "line search failed";
      return result;
    }

    NlpPoint next = tiny ? pt : evaluate(problem, trial.x, true);
    if (!next.g.allFinite()) {
      result.x = pt.x;
      result.status = OptStatus::NonFiniteGradient;
      result.message = "non-finite gradient";
      return result;
    }
    y = y_new;
    mu = mu_new;
    have_multipliers = true;

    if (!problem.lagrangian_hessian && !tiny) {
      const Vector s = next.x - pt.x;
      const Vector yv = lagrangian_gradient(next, y, mu) - lagrangian_gradient(pt, y, mu);
      const double sy = s.dot(yv);
      if (!bfgs_scaled && sy > 0.0) {
        bfgs = Matrix::Identity(n, n) * (yv.squaredNorm() / sy);
        bfgs_scaled = true;
      }
      const Vector bs = bfgs * s;
      const double sbs = s.dot(bs);
      if (sbs > 0.0) {
        double theta = 1.0;
        if (sy < 0.2 * sbs) theta = 0.8 * sbs / (sbs - sy);
        const Vector r = theta * yv + (1.0 - theta) * bs;
        const double sr = s.dot(r);
        if (sr > 0.0) bfgs += r * r.transpose() / sr - bs * bs.transpose() / sbs;
      }
    }
    pt = std::move(next);
  }

  result.iterations = options.max_iters;
  result.objective_trace.push_back(pt.f);
  result.constraint_violation_trace.push_back(max_violation(pt));
  fill_kkt(pt);
  result.x = pt.x;
  const double stol = options.stationarity_tol * (1.0 + std::abs(pt.f));
  if (have_multipliers && result.stationarity <= stol && result.feasibility <= options.feasibility_tol &&
      result.complementarity <= stol) {
    result.status = OptStatus::Converged;
    result.converged = true;
  } else if (result.feasibility > options.feasibility_tol) {
    result.status = OptStatus::Infeasible;
    result.message = "constraints not satisfied within the iteration budget";
  } else {
    result.status = OptStatus::MaxItersExceeded;
    result.message = "iteration budget exhausted";
  }
  return result;
}

OptResult penalty_minimize(const ValueGradientFn& objective, const std::vector<ValueGradientFn>& penalty_terms,
                           double weight, const std::variant<NLPOptions, AdamConfig>& inner, const Vector& x0,
                           const PenaltyOptions& options) {
  if (!(weight >= 0.0) || !(options.log_guard > 0.0)) {
    throw SolverError(ErrorKind::InvalidArgument, "penalty weight must be non-negative");
  }
  auto composite = [&](const Vector& x) {
    ValueAndGradient base = objective(x);
    ValueAndGradient out;
    if (options.log_objective) {
      const double denom = base.value + options.log_guard;
      out.value = std::log(denom);
      out.gradient = base.gradient / denom;
    } else {
      out = base;
    }
    for (const auto& term : penalty_terms) {
      const ValueAndGradient p = term(x);
      out.value += weight * p.value;
      out.gradient += weight * p.gradient;
    }
    return out;
  };

  if (const auto* adam = std::get_if<AdamConfig>(&inner)) return adam_minimize(composite, x0, *adam);

  // Cache the last evaluation so value and gradient share one call.
  auto cache_x = std::make_shared<Vector>();
  auto cache_v = std::make_shared<ValueAndGradient>();
  auto eval = [=](const Vector& x) -> const ValueAndGradient& {
    if (cache_x->size() != x.size() || *cache_x != x) {
      *cache_v = composite(x);
      *cache_x = x;
    }
    return *cache_v;
  };
  NLPProblem problem;
  problem.x0 = x0;
  problem.objective = [=](const Vector& x) { return eval(x).value; };
  problem.objective_gradient = [=](const Vector& x) { return eval(x).gradient; };
  return solve_nlp(problem, std::get<NLPOptions>(inner));
}

}  // namespace ecfm
