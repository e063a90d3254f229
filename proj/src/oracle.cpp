#include "gjrdf/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "gjrdf/errors.hpp"
#include "gjrdf/linalg.hpp"

namespace gjrdf::oracle {

namespace {

Eigen::MatrixXd sym(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

// eigenvalue clip from below, the projection onto {A >= floor I}
Eigen::MatrixXd clip_below(const Eigen::MatrixXd& a, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(a));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double logdet_floor(const Eigen::MatrixXd& a, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(a));
  double acc = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    acc += std::log(std::max(es.eigenvalues()(i), floor));
  return acc;
}

// Dykstra's cyclic projection onto the intersection of
//   {Sigma >= floor I}, {Sigma <= Q}, and the two block-trace half-spaces.
class FeasibleSet {
 public:
  FeasibleSet(const Eigen::MatrixXd& q, int p1, int p2,
              const DistortionPair& delta, const OracleOptions& opts)
      : q_(q), p1_(p1), p2_(p2), delta_(delta), opts_(opts) {}

  Eigen::MatrixXd project(const Eigen::MatrixXd& x0) const {
    const int n = static_cast<int>(q_.rows());
    Eigen::MatrixXd x = sym(x0);
    std::array<Eigen::MatrixXd, 4> corr;
    corr.fill(Eigen::MatrixXd::Zero(n, n));
    const double scale = 1.0 + x.cwiseAbs().maxCoeff();
    for (int sweep = 0; sweep < opts_.dykstra_sweeps; ++sweep) {
      const Eigen::MatrixXd before = x;
      for (int k = 0; k < 4; ++k) {
        const Eigen::MatrixXd z = x + corr[k];
        const Eigen::MatrixXd y = apply(k, z);
        corr[k] = z - y;
        x = y;
      }
      if ((x - before).cwiseAbs().maxCoeff() <= 1e-13 * scale) break;
    }
    return x;
  }

 private:
  Eigen::MatrixXd apply(int k, const Eigen::MatrixXd& z) const {
    switch (k) {
      case 0:
        return clip_below(z, opts_.psd_floor);
      case 1:
        return q_ - clip_below(q_ - z, 0.0);
      case 2:
        return trace_cap(z, 0, p1_, delta_.delta1);
      default:
        return trace_cap(z, p1_, p2_, delta_.delta2);
    }
  }

  static Eigen::MatrixXd trace_cap(const Eigen::MatrixXd& z, int off, int len,
                                   double cap) {
    const double tr = z.block(off, off, len, len).trace();
    if (tr <= cap) return z;
    Eigen::MatrixXd y = z;
    y.block(off, off, len, len).diagonal().array() -= (tr - cap) / len;
    return y;
  }

  const Eigen::MatrixXd& q_;
  int p1_, p2_;
  DistortionPair delta_;
  OracleOptions opts_;
};

}  // namespace

OracleResult maxdet_solve(const JointGaussianSource& source,
                          const DistortionPair& delta,
                          const OracleOptions& opts, const Tolerances& tol) {
  validate_source(source, tol);
  if (!(delta.delta1 > 0.0) || !(delta.delta2 > 0.0))
    throw InfeasibleProblem("maxdet_solve: budgets must be positive");

  const Eigen::MatrixXd& q = source.q;
  const double logdet_q = linalg::logdet_psd(q, tol);  // SingularMatrix if not

  FeasibleSet set(q, source.p1, source.p2, delta, opts);

  const double shrink =
      std::min({1.0, delta.delta1 / q.topLeftCorner(source.p1, source.p1).trace(),
                delta.delta2 /
                    q.bottomRightCorner(source.p2, source.p2).trace()});
  Eigen::MatrixXd x = set.project(0.5 * shrink * q);

  auto objective = [&](const Eigen::MatrixXd& s) {
    return logdet_floor(s, opts.psd_floor);
  };
  auto gradient = [&](const Eigen::MatrixXd& s) -> Eigen::MatrixXd {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(s));
    Eigen::VectorXd inv = es.eigenvalues().cwiseMax(opts.psd_floor).cwiseInverse();
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  };

  double f = objective(x);
  Eigen::MatrixXd g = gradient(x);
  Eigen::MatrixXd x_prev, g_prev;

  const double lam_min = std::max(linalg::min_eigenvalue(x), opts.psd_floor);
  double base_step = 0.5 * lam_min * lam_min;  // keeps Sigma + step*grad sane

  OracleResult res;
  int calm = 0;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    // Barzilai-Borwein base step once history exists, clamped hard
    if (it > 0) {
      const Eigen::MatrixXd s = x - x_prev;
      const Eigen::MatrixXd y = g - g_prev;
      const double sy = std::abs((s.array() * y.array()).sum());
      const double ss = (s.array() * s.array()).sum();
      if (sy > 1e-300 && ss > 0.0)
        base_step = std::clamp(ss / sy, 1e-6 * lam_min * lam_min, 1e6);
    }

    double step = base_step;
    bool accepted = false;
    Eigen::MatrixXd x_new;
    double f_new = f;
    while (step >= opts.min_step) {
      x_new = set.project(x + step * g);
      f_new = objective(x_new);
      // strict ascent only: accepting an objective-flat step can freeze the
      // iteration on a spurious fixed point of the cyclic projection
      if (f_new > f + 1e-16 * std::max(1.0, std::abs(f))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no step improves the objective: stationary at machine precision
      res.converged = true;
      break;
    }

    const double move = (x_new - x).cwiseAbs().maxCoeff();
    const double rel = std::abs(f_new - f) / std::max(1.0, std::abs(f_new));
    x_prev = std::move(x);
    g_prev = std::move(g);
    x = std::move(x_new);
    f = f_new;
    g = gradient(x);

    if (rel <= opts.rel_tol || move <= 1e-14 * (1.0 + x.cwiseAbs().maxCoeff()))
      ++calm;
    else
      calm = 0;
    if (calm >= 3) {
      ++it;
      res.converged = true;
      break;
    }
  }

  const double probe = std::clamp(base_step, 1e-8, 1e-2);
  res.kkt_residual =
      (set.project(x + probe * g) - x).cwiseAbs().maxCoeff() / probe;
  res.sigma = ErrorCovariance{sym(x), source.p1, source.p2};
  res.rate_nats = std::max(0.0, 0.5 * (logdet_q - f));
  res.iterations = it;
  return res;
}

OracleResult maxdet_solve(const std::vector<double>& d,
                          const DistortionPair& delta,
                          const OracleOptions& opts, const Tolerances& tol) {
  JointGaussianSource src;
  src.q = cvf_covariance(d);
  src.p1 = static_cast<int>(d.size());
  src.p2 = static_cast<int>(d.size());
  return maxdet_solve(src, delta, opts, tol);
}

double mutual_information(const Eigen::MatrixXd& q, const Eigen::MatrixXd& sigma,
                          const Tolerances& tol) {
  return 0.5 * (linalg::logdet_psd(q, tol) - linalg::logdet_psd(sigma, tol));
}

}  // namespace gjrdf::oracle
