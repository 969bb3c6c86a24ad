#include "plmpc/qp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

namespace plmpc {

namespace {

// Largest step in [0, 1] keeping v + a*dv strictly positive.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double tau) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) a = std::min(a, -tau * v[i] / dv[i]);
  return a;
}

}  // namespace

QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  int max_iterations) {
  const Eigen::Index n = H.rows(), mc = A.rows();
  QpResult out;

  if (mc == 0) {
    out.x = H.llt().solve(-g);
    out.multipliers = Eigen::VectorXd();
    out.solved = true;
    return out;
  }

  // Row scaling improves conditioning of the normal equations.
  Eigen::VectorXd row_scale(mc);
  for (Eigen::Index i = 0; i < mc; ++i)
    row_scale[i] = 1.0 / std::max(1e-10, A.row(i).cwiseAbs().maxCoeff());
  Eigen::MatrixXd As = row_scale.asDiagonal() * A;
  Eigen::VectorXd bs = row_scale.cwiseProduct(b);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s(mc), lam(mc);
  for (Eigen::Index i = 0; i < mc; ++i) {
    s[i] = std::max(1.0, bs[i]);
    lam[i] = 1.0;
  }

  const double scale_g = std::max(1.0, g.cwiseAbs().maxCoeff());
  const double scale_b = std::max(1.0, bs.cwiseAbs().maxCoeff());
  const double tol_d = 1e-10 * scale_g, tol_p = 1e-10 * scale_b, tol_mu = 1e-11 * scale_g;

  Eigen::MatrixXd M(n, n);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd rd = H * x + g + As.transpose() * lam;
    Eigen::VectorXd rp = As * x + s - bs;
    double mu = s.dot(lam) / static_cast<double>(mc);

    if (rd.cwiseAbs().maxCoeff() <= tol_d && rp.cwiseAbs().maxCoeff() <= tol_p &&
        mu <= tol_mu) {
      out.solved = true;
      out.iterations = it;
      break;
    }

    Eigen::VectorXd d = lam.cwiseQuotient(s);
    M = H;
    M.noalias() += As.transpose() * d.asDiagonal() * As;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
      M.diagonal().array() += 1e-10 * M.diagonal().cwiseAbs().maxCoeff();
      llt.compute(M);
      if (llt.info() != Eigen::Success) break;
    }

    // Affine (predictor) direction.
    Eigen::VectorXd rc = -s.cwiseProduct(lam);
    Eigen::VectorXd tmp = (rc + lam.cwiseProduct(rp)).cwiseQuotient(s);
    Eigen::VectorXd dx_aff = llt.solve(-rd - As.transpose() * tmp);
    Eigen::VectorXd ds_aff = -rp - As * dx_aff;
    Eigen::VectorXd dl_aff = (rc - lam.cwiseProduct(ds_aff)).cwiseQuotient(s);

    double ap = max_step(s, ds_aff, 1.0);
    double ad = max_step(lam, dl_aff, 1.0);
    double a_aff = std::min(ap, ad);
    double mu_aff = (s + a_aff * ds_aff).dot(lam + a_aff * dl_aff) /
                    static_cast<double>(mc);
    double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector with centering.
    rc = (sigma * mu) * Eigen::VectorXd::Ones(mc) - s.cwiseProduct(lam) -
         ds_aff.cwiseProduct(dl_aff);
    tmp = (rc + lam.cwiseProduct(rp)).cwiseQuotient(s);
    Eigen::VectorXd dx = llt.solve(-rd - As.transpose() * tmp);
    Eigen::VectorXd ds = -rp - As * dx;
    Eigen::VectorXd dl = (rc - lam.cwiseProduct(ds)).cwiseQuotient(s);

    double alpha = std::min(max_step(s, ds, 0.995), max_step(lam, dl, 0.995));
    x += alpha * dx;
    s += alpha * ds;
    lam += alpha * dl;
    out.iterations = it + 1;

    if (alpha < 1e-12) break;  // stalled; likely infeasible linearization
  }

  out.x = x;
  out.multipliers = row_scale.cwiseProduct(lam);  // unscale back to A-rows
  out.gap = s.dot(lam) / static_cast<double>(mc);
  out.primal_residual = (A * x - b).maxCoeff();
  if (!out.solved) {
    // Accept near-converged iterates; callers fall back otherwise.
    Eigen::VectorXd rd = H * x + g + As.transpose() * lam;
    Eigen::VectorXd rp = As * x + s - bs;
    out.solved = rd.cwiseAbs().maxCoeff() <= 1e3 * tol_d &&
                 rp.cwiseAbs().maxCoeff() <= 1e3 * tol_p && out.gap <= 1e3 * tol_mu;
  }
  return out;
}

}  // namespace plmpc
