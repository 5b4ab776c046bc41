#include "storm/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "storm/error.hpp"

namespace storm {

namespace {

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_marginal(const Eigen::VectorXd& m, const char* name) {
  if (m.size() == 0) throw Error(ErrorCode::kShapeMismatch, std::string(name) + " is empty");
  if (!m.allFinite()) throw Error(ErrorCode::kNonFinite, std::string(name) + " is not finite");
  if ((m.array() < 0.0).any()) {
    throw Error(ErrorCode::kBadConfig, std::string(name) + " has negative entries");
  }
  if (std::abs(m.sum() - 1.0) > 1e-8) {
    throw Error(ErrorCode::kBadConfig,
                std::string(name) + " must sum to 1, sums to " + std::to_string(m.sum()));
  }
}

void require_converged(const SinkhornResult& r) {
  if (!r.converged) {
    throw Error(ErrorCode::kNotConverged, "marginal error " + std::to_string(r.marginal_err) +
                                              " after " + std::to_string(r.iterations) +
                                              " iterations");
  }
}

}  // namespace

void validate(const TransportProblem& prob) {
  if (prob.cost.rows() != prob.mu.size() || prob.cost.cols() != prob.nu.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cost is " + shape(prob.cost) + " but marginals are " +
                                               std::to_string(prob.mu.size()) + " and " +
                                               std::to_string(prob.nu.size()));
  }
  if (!prob.cost.allFinite()) throw Error(ErrorCode::kNonFinite, "cost matrix is not finite");
  if (!(prob.eps_reg > 0.0)) throw Error(ErrorCode::kBadConfig, "eps_reg must be positive");
  check_marginal(prob.mu, "mu");
  check_marginal(prob.nu, "nu");
}

namespace {

// Sinkhorn at one fixed eps, starting from target potential `warm_g`
// (unscaled units) when it is usable.
SinkhornResult solve_fixed(const TransportProblem& prob, double eps,
                           const std::optional<Eigen::VectorXd>& warm_g, double tol, int max_iter) {
  const Eigen::Index n = prob.mu.size();
  const Eigen::Index m = prob.nu.size();
  const Eigen::ArrayXd& mu = prob.mu.array();
  const Eigen::ArrayXd& nu = prob.nu.array();

  const Eigen::MatrixXd neg_cost = -prob.cost / eps;
  const Eigen::VectorXd log_mu = mu.log();
  const Eigen::VectorXd log_nu = nu.log();

  // Potentials are stored pre-divided by eps. Between absorptions the
  // iterates live in scaling form: plan = diag(u) K diag(v) with
  // K = exp(neg_cost + f + g).
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
  if (warm_g && warm_g->size() == m && warm_g->allFinite()) g = *warm_g / eps;

  Eigen::MatrixXd kernel(n, m);
  auto exact_f = [&] {
    kernel.noalias() = neg_cost;
    kernel.rowwise() += g.transpose();
    const Eigen::VectorXd mx = kernel.rowwise().maxCoeff();
    f = log_mu.array() - mx.array() - (kernel.colwise() - mx).array().exp().rowwise().sum().log();
  };
  auto exact_g = [&] {
    kernel.noalias() = neg_cost;
    kernel.colwise() += f;
    const Eigen::RowVectorXd mx = kernel.colwise().maxCoeff();
    g = log_nu.array() - mx.transpose().array() -
        (kernel.rowwise() - mx).array().exp().colwise().sum().log().transpose();
  };
  auto absorb = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    f.array() += u.array().log();
    g.array() += v.array().log();
  };
  auto rebuild = [&] {
    kernel.noalias() = neg_cost;
    kernel.colwise() += f;
    kernel.rowwise() += g.transpose();
    kernel = kernel.array().exp().matrix();
  };

  constexpr double kBig = 1e10;
  constexpr double kSmall = 1e-10;
  exact_f();
  rebuild();
  Eigen::VectorXd u = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd ktu(m);
  Eigen::VectorXd kv(n);

  SinkhornResult out;
  out.eps_reg = eps;
  for (;;) {
    ktu.noalias() = kernel.transpose() * u;
    bool underflow = false;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (nu(j) == 0.0) {
        v(j) = 0.0;
      } else if (ktu(j) > 0.0) {
        v(j) = nu(j) / ktu(j);
      } else {
        underflow = true;
      }
    }
    if (underflow) {
      // Fall back to one exact log-domain update and restart the scalings.
      f.array() += u.array().log();
      exact_g();
      exact_f();
      rebuild();
      u.setOnes();
      v.setOnes();
      continue;
    }
    ++out.iterations;

    // Columns are exact now; measure the rows.
    kv.noalias() = kernel * v;
    out.marginal_err = (u.array() * kv.array() - mu).abs().sum();
    if (!std::isfinite(out.marginal_err)) {
      throw Error(ErrorCode::kNonFinite, "Sinkhorn iterates became non-finite");
    }
    if (out.marginal_err <= tol) {
      out.converged = true;
      break;
    }
    if (out.iterations >= max_iter) break;

    bool rescale = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mu(i) == 0.0) {
        u(i) = 0.0;
      } else if (kv(i) > 0.0) {
        u(i) = mu(i) / kv(i);
        rescale = rescale || u(i) > kBig || u(i) < kSmall;
      } else {
        u(i) = std::numeric_limits<double>::infinity();
        rescale = true;
      }
    }
    for (Eigen::Index j = 0; j < m && !rescale; ++j) {
      rescale = nu(j) > 0.0 && (v(j) > kBig || v(j) < kSmall);
    }
    if (rescale) {
      if (u.allFinite()) {
        absorb(u, v);
      } else {
        g.array() += v.array().log();
        exact_f();
      }
      rebuild();
      u.setOnes();
      v.setOnes();
    }
  }

  out.plan = u.asDiagonal() * kernel * v.asDiagonal();
  absorb(u, v);
  out.dual_f = eps * f;
  out.dual_g = eps * g;
  return out;
}

}  // namespace

SinkhornResult sinkhorn(const TransportProblem& prob, const SinkhornOptions& opts) {
  validate(prob);
  const double eps = prob.eps_reg;
  if (!opts.eps_scaling) return solve_fixed(prob, eps, opts.warm_g, opts.tol, opts.max_iter);

  // Halve eps from the cost spread down to the target, each stage warm
  // started from the last and capped at a few iterations.
  constexpr int kStageIters = 100;
  const double spread = prob.cost.maxCoeff() - prob.cost.minCoeff();
  std::optional<Eigen::VectorXd> warm = opts.warm_g;
  int used = 0;
  for (double stage = spread; stage > 2.0 * eps && used < opts.max_iter; stage *= 0.5) {
    const SinkhornResult r =
        solve_fixed(prob, stage, warm, opts.tol, std::min(kStageIters, opts.max_iter - used));
    used += r.iterations;
    if (r.dual_g.allFinite()) warm = r.dual_g;
  }
  SinkhornResult out = solve_fixed(prob, eps, warm, opts.tol, std::max(1, opts.max_iter - used));
  out.iterations += used;
  return out;
}

double brute_force_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "assignment needs a square cost, got " + shape(cost));
  }
  const int n = static_cast<int>(cost.rows());
  if (n > 8) throw Error(ErrorCode::kTooLarge, "brute force limited to n <= 8, got " + std::to_string(n));
  if (n == 0) return 0.0;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int u = 0; u < n; ++u) total += cost(u, perm[u]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

double transport_loss(const Eigen::MatrixXd& plan, const CostMatrix& cost) {
  if (plan.rows() != cost.rows() || plan.cols() != cost.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "plan is " + shape(plan) + " but cost is " + shape(cost));
  }
  return plan.cwiseProduct(cost).sum();
}

double entropic_loss(const SinkhornResult& result, const TransportProblem& prob) {
  // Entries with zero mass carry -inf potentials and contribute nothing.
  auto dot = [](const Eigen::VectorXd& pot, const Eigen::VectorXd& mass) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < mass.size(); ++k) {
      if (mass(k) > 0.0) s += pot(k) * mass(k);
    }
    return s;
  };
  const double n = static_cast<double>(prob.mu.size());
  const double m = static_cast<double>(prob.nu.size());
  return dot(result.dual_f, prob.mu) + dot(result.dual_g, prob.nu) +
         result.eps_reg * std::log(n * m);
}

Eigen::VectorXd grad_loss_wrt_source(const SinkhornResult& result) {
  require_converged(result);
  if (!result.dual_f.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "source potential is infinite where mu has no mass");
  }
  return result.dual_f.array() - result.dual_f.mean();
}

Eigen::VectorXd grad_loss_wrt_target(const SinkhornResult& result) {
  require_converged(result);
  if (!result.dual_g.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "target potential is infinite where nu has no mass");
  }
  return result.dual_g.array() - result.dual_g.mean();
}

const Eigen::MatrixXd& grad_loss_wrt_cost(const SinkhornResult& result) {
  require_converged(result);
  return result.plan;
}

}  // namespace storm
