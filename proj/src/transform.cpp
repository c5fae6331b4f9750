#include "mcd/transform.hpp"

#include <cmath>

#include "mcd/errors.hpp"

namespace mcd {

namespace {

// Hermite trapezoid on one interval for matrix integrands.
Mat step(double h, const Mat& f0, const Mat& f1, const Mat& d0, const Mat& d1) {
  return 0.5 * h * (f0 + f1) + h * h / 12.0 * (d0 - d1);
}

std::vector<Mat> products(const std::vector<Mat>& a, const std::vector<Mat>& da, const std::vector<Mat>& b,
                          const std::vector<Mat>& db, std::vector<Mat>& deriv) {
  std::vector<Mat> f(a.size());
  deriv.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    f[i] = a[i].transpose() * b[i];
    deriv[i] = da[i].transpose() * b[i] + a[i].transpose() * db[i];
  }
  return f;
}

std::vector<Mat> from_origin(const std::vector<double>& x, const std::vector<Mat>& f, const std::vector<Mat>& df) {
  std::vector<Mat> out(x.size());
  out[0] = Mat::Zero(f[0].rows(), f[0].cols());
  for (std::size_t i = 1; i < x.size(); ++i) out[i] = out[i - 1] + step(x[i] - x[i - 1], f[i - 1], f[i], df[i - 1], df[i]);
  return out;
}

std::vector<Mat> to_infinity(const std::vector<double>& x, const std::vector<Mat>& f, const std::vector<Mat>& df,
                             const Mat& tail) {
  std::vector<Mat> out(x.size());
  out.back() = tail;
  for (std::size_t i = x.size() - 1; i-- > 0;) out[i] = out[i + 1] + step(x[i + 1] - x[i], f[i], f[i + 1], df[i], df[i + 1]);
  return out;
}

// int_{x_last}^inf of a^T b where column j of a decays with ka[j], column l of b with kb[l].
Mat analytic_tail(const Mat& a, const Mat& b, const std::vector<Vec>& ka, const std::vector<Vec>& kb) {
  Mat t = Mat::Zero(a.cols(), b.cols());
  for (int j = 0; j < a.cols(); ++j)
    for (int l = 0; l < b.cols(); ++l)
      for (int c = 0; c < a.rows(); ++c) {
        const double k = ka[j](c) + kb[l](c);
        if (a(c, j) * b(c, l) != 0.0) t(j, l) += a(c, j) * b(c, l) / k;
      }
  return t;
}

}  // namespace

std::vector<Mat> gram_from_origin(const std::vector<double>& x, const std::vector<Mat>& u,
                                  const std::vector<Mat>& du) {
  std::vector<Mat> df;
  const auto f = products(u, du, u, du, df);
  return from_origin(x, f, df);
}

std::vector<Mat> gram_tail(const std::vector<double>& x, const std::vector<Mat>& u, const std::vector<Mat>& du,
                           const std::vector<Vec>& kappa) {
  if (static_cast<int>(kappa.size()) != u.back().cols()) throw ConfigError("gram_tail: one kappa per column");
  std::vector<Mat> df;
  const auto f = products(u, du, u, du, df);
  return to_infinity(x, f, df, analytic_tail(u.back(), u.back(), kappa, kappa));
}

TransformResult assemble_transform(const ChannelSystem& base, Anchor anchor, std::vector<double> x,
                                   std::vector<Mat> u, std::vector<Mat> du, const std::vector<Mat>& p,
                                   const Mat& s, std::vector<int> added, std::vector<Vec> kappa) {
  const std::size_t m = x.size();
  if (u.size() != m || du.size() != m || p.size() != m) throw ConfigError("transform: sample count mismatch");
  const int n = base.channels();
  const int k = static_cast<int>(s.rows());
  if (u[0].rows() != n || u[0].cols() != k) throw ConfigError("transform: U must be channels x terms");

  TransformResult r;
  r.anchor = anchor;
  r.s = s;
  r.added = std::move(added);
  r.kappa = std::move(kappa);
  r.pinv_s.resize(m);
  r.delta_v.resize(m);
  r.states = MatrixSolution(0.0, MatrixSolution::Kind::bound, n, static_cast<int>(r.added.size()));
  r.states.reserve(m);
  // P' = +-S U^T U, so (P^-1 S)' = -+ P^-1 S U^T U P^-1 S.
  const double sg = anchor == Anchor::origin ? -1.0 : 1.0;
  std::vector<double> data(m * n * n);
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::PartialPivLU<Mat> lu(p[i]);
    const double det = lu.determinant();
    if (!std::isfinite(det) || det <= 0.0)
      throw SingularTransformError("transform: normalization matrix singular", x[i]);
    const Mat ps = lu.solve(s);
    const Mat utu = u[i].transpose() * u[i];
    const Mat dps = sg * ps * utu * ps;
    const Mat g1 = du[i] * ps * u[i].transpose() + u[i] * ps * du[i].transpose() + u[i] * dps * u[i].transpose();
    const Mat dv = 2.0 * (anchor == Anchor::origin ? -g1 : g1);
    r.delta_v[i] = 0.5 * (dv + dv.transpose());
    std::copy_n(r.delta_v[i].data(), n * n, data.begin() + i * n * n);
    r.pinv_s[i] = ps;

    const Mat pinv = ps * s;
    const Mat y = u[i] * pinv, dy = du[i] * pinv + u[i] * (dps * s);
    Mat v(n, r.added.size()), d(n, r.added.size());
    for (std::size_t j = 0; j < r.added.size(); ++j) {
      v.col(j) = y.col(r.added[j]);
      d.col(j) = dy.col(r.added[j]);
    }
    r.states.push(x[i], v, d);
  }
  r.system = ChannelSystem(base.thresholds, base.domain, base.x_max,
                           PotentialMatrix::sum(base.potential, PotentialMatrix::sampled(x, n, std::move(data))));
  r.x = std::move(x);
  r.u = std::move(u);
  r.du = std::move(du);
  return r;
}

MatrixSolution TransformResult::map_solution(const MatrixSolution& phi, const Vec& phi_kappa) const {
  const std::size_t m = x.size();
  if (phi.size() != m) throw ConfigError("map_solution: solution not sampled on the transform grid");
  std::vector<Mat> f(m), df(m), pv(m), pd(m);
  for (std::size_t i = 0; i < m; ++i) {
    pv[i] = phi.value(i);
    pd[i] = phi.derivative(i);
    f[i] = u[i].transpose() * pv[i];
    df[i] = du[i].transpose() * pv[i] + u[i].transpose() * pd[i];
  }
  std::vector<Mat> in;
  if (anchor == Anchor::origin) {
    in = from_origin(x, f, df);
    if (phi.kind == MatrixSolution::Kind::regular && energies.size() == static_cast<std::size_t>(u[0].cols())) {
      // (u^T phi' - u'^T phi)' = (E_u - E) u^T phi, and both vanish at the origin.
      for (std::size_t j = 0; j < energies.size(); ++j) {
        const double de = energies[j] - phi.energy;
        if (!std::isfinite(de) || std::abs(de) < 1e-8 * std::max(1.0, std::abs(phi.energy))) continue;
        for (std::size_t i = 0; i < m; ++i)
          in[i].row(j) = (u[i].col(j).transpose() * pd[i] - du[i].col(j).transpose() * pv[i]) / de;
      }
    }
  } else {
    if (phi_kappa.size() != phi.rows) throw ConfigError("map_solution: need decay rates of the base solution");
    std::vector<Vec> kp(phi.cols, phi_kappa);
    in = to_infinity(x, f, df, analytic_tail(u.back(), pv.back(), kappa, kp));
  }
  const double sg = anchor == Anchor::origin ? -1.0 : 1.0;
  MatrixSolution out(phi.energy, MatrixSolution::Kind::mapped, phi.rows, phi.cols);
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Mat& ps = pinv_s[i];
    const Mat ups = u[i] * ps;
    const Mat dups = du[i] * ps + sg * ups * (u[i].transpose() * u[i]) * ps;
    const Mat v = pv[i] - ups * in[i];
    // d/dx of the integral is +U^T phi from the origin and -U^T phi towards infinity.
    const Mat d = pd[i] - dups * in[i] + sg * ups * f[i];
    out.push(x[i], v, d);
  }
  return out;
}

double TransformResult::max_delta() const {
  double w = 0.0;
  for (const auto& d : delta_v) w = std::max(w, d.cwiseAbs().maxCoeff());
  return w;
}

}  // namespace mcd
