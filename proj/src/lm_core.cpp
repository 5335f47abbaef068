#include "lm_core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>

namespace mtpgo::detail {

namespace {
constexpr double kLambdaCap = 1e32;
}

void accumulate_robust_edge(const Vec4& r, const Vec4& cov,
                            const std::vector<std::pair<int, Mat4>>& blocks, double cauchy_scale,
                            std::vector<Eigen::Triplet<double>>& trips, Eigen::VectorXd& g) {
  const Vec4 w_diag = cov.cwiseInverse();
  const double s = r.dot(w_diag.cwiseProduct(r));
  const double w = cauchy_weight(s, cauchy_scale);
  const Vec4 wr = w_diag.cwiseProduct(r);
  for (const auto& [ord_a, ja] : blocks) {
    g.segment<4>(4 * ord_a) += w * (ja.transpose() * wr);
    const Mat4 jtw = ja.transpose() * w_diag.asDiagonal();
    for (const auto& [ord_b, jb] : blocks) {
      const Mat4 h_ab = w * (jtw * jb);
      for (int row = 0; row < 4; ++row) {
        for (int col = 0; col < 4; ++col) {
          trips.emplace_back(4 * ord_a + row, 4 * ord_b + col, h_ab(row, col));
        }
      }
    }
  }
}

OptResult run_lm(int dim, const LmCallbacks& cb, const SolverConfig& cfg) {
  OptResult res;
  res.cost_initial = cb.cost();
  res.cost_final = res.cost_initial;
  if (!std::isfinite(res.cost_initial)) {
    throw std::runtime_error("run_lm: initial cost is not finite");
  }
  if (dim == 0) {
    res.converged = true;
    return res;
  }

  const bool dense = dim <= 4 * cfg.dense_variable_limit;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd g(dim);
  Eigen::MatrixXd h_dense;
  Eigen::SparseMatrix<double> h_sparse(dim, dim);
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> sparse_llt;
  // All linearizations share one sparsity pattern (same edges, same blocks),
  // so the symbolic factorization is reused across iterations and attempts.
  bool pattern_ready = false;

  double lambda = cfg.lambda_init;
  double cost = res.cost_initial;
  bool need_linearize = true;
  bool ever_factorized = false;

  while (res.iterations < cfg.max_iterations) {
    if (need_linearize) {
      trips.clear();
      g.setZero();
      cb.assemble(trips, g);
      if (2.0 * g.lpNorm<Eigen::Infinity>() < cfg.tol_gradient) {
        res.converged = true;
        break;
      }
      if (dense) {
        h_dense = Eigen::MatrixXd::Zero(dim, dim);
        for (const auto& t : trips) {
          h_dense(t.row(), t.col()) += t.value();
        }
      } else {
        // Explicit diagonal entries keep the damped diagonal addressable.
        for (int k = 0; k < dim; ++k) {
          trips.emplace_back(k, k, 0.0);
        }
        h_sparse.setFromTriplets(trips.begin(), trips.end());
      }
      cb.checkpoint();
      need_linearize = false;
    }

    ++res.iterations;
    Eigen::VectorXd step;
    bool solved = false;
    if (dense) {
      Eigen::MatrixXd damped = h_dense;
      damped.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(-g);
        solved = step.allFinite();
      }
    } else {
      Eigen::SparseMatrix<double> damped = h_sparse;
      for (int k = 0; k < dim; ++k) {
        damped.coeffRef(k, k) += lambda;
      }
      if (!pattern_ready) {
        sparse_llt.analyzePattern(damped);
        pattern_ready = true;
      }
      sparse_llt.factorize(damped);
      if (sparse_llt.info() == Eigen::Success) {
        step = sparse_llt.solve(-g);
        solved = step.allFinite();
      }
    }

    if (!solved) {
      lambda *= cfg.lambda_up;
      if (lambda > kLambdaCap) {
        if (!ever_factorized) {
          throw std::runtime_error("run_lm: normal equations never positive definite under damping");
        }
        break;  // stalled
      }
      continue;
    }
    ever_factorized = true;

    cb.apply_step(step);
    const double new_cost = cb.cost();
    if (std::isfinite(new_cost) && new_cost < cost) {
      if (res.iterations == 1) {
        res.first_step_accepted = true;
      }
      const double rel = (cost - new_cost) / std::max(cost, 1e-300);
      cost = new_cost;
      lambda *= cfg.lambda_down;
      need_linearize = true;
      if (rel >= cfg.topdown_sig_decrease) {
        ++res.significant_steps;
      }
      if (rel >= cfg.tol_rel_decrease) {
        ++res.productive_steps;
      } else {
        res.converged = true;
        break;
      }
    } else {
      cb.rollback();
      lambda *= cfg.lambda_up;
      if (lambda > kLambdaCap) {
        break;  // stalled
      }
    }
  }

  res.cost_final = cost;
  return res;
}

}  // namespace mtpgo::detail
