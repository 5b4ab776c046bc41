#pragma once

#include <Eigen/Core>
#include <optional>

#include "storm/cost.hpp"

namespace storm {

struct TransportProblem {
  Eigen::VectorXd mu;  // source marginal, sums to 1
  Eigen::VectorXd nu;  // target marginal, sums to 1
  CostMatrix cost;     // mu.size() x nu.size()
  double eps_reg = 0.05;
};

void validate(const TransportProblem& prob);

struct SinkhornOptions {
  double tol = 1e-6;
  int max_iter = 10000;
  // Initial target potential; ignored when its size does not match.
  std::optional<Eigen::VectorXd> warm_g;
  // Anneal eps geometrically from the cost spread before the final solve.
  // Pays off when eps is far below the cost spread, where plain iterations
  // close the marginals only slowly.
  bool eps_scaling = false;
};

// Coupling in Gibbs form: plan_uv = exp((f_u + g_v - C_uv) / eps_reg).
struct SinkhornResult {
  Eigen::MatrixXd plan;
  Eigen::VectorXd dual_f;
  Eigen::VectorXd dual_g;
  int iterations = 0;
  double marginal_err = 0.0;  // L1 violation of the row marginal; columns are exact
  bool converged = false;
  double eps_reg = 0.0;
};

// Log-domain Sinkhorn. Never throws on non-convergence; check `converged`.
SinkhornResult sinkhorn(const TransportProblem& prob, const SinkhornOptions& opts = {});

// Exhaustive minimum of (1/n) sum_u C[u][sigma(u)] over permutations; n <= 8.
double brute_force_assignment(const Eigen::MatrixXd& cost);

// Frobenius product <plan, cost>.
double transport_loss(const Eigen::MatrixXd& plan, const CostMatrix& cost);

// Entropic transport objective <C, P> + eps * KL(P || uniform coupling),
// evaluated through the dual potentials. Nonnegative for nonnegative costs and
// differentiable: d/dmu = dual_f, d/dnu = dual_g, d/dC = plan.
double entropic_loss(const SinkhornResult& result, const TransportProblem& prob);

// Zero-mean source potential: the first variation of entropic_loss in mu
// along the simplex.
Eigen::VectorXd grad_loss_wrt_source(const SinkhornResult& result);
Eigen::VectorXd grad_loss_wrt_target(const SinkhornResult& result);
const Eigen::MatrixXd& grad_loss_wrt_cost(const SinkhornResult& result);

}  // namespace storm
