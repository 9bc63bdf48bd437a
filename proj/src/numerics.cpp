#include "cmc/numerics.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <array>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta4.hpp>
#include <cmath>
#include <limits>
#include <memory>

namespace cmc {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidCutoff: return "invalid cutoff";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Bracket: return "bracket";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Resonance: return "resonance";
    case ErrorKind::Projection: return "projection";
    case ErrorKind::FamilyRealization: return "family realization";
    case ErrorKind::Assembly: return "assembly";
    case ErrorKind::Io: return "io";
    case ErrorKind::Unsupported: return "unsupported";
  }
  return "error";
}

namespace {

double bump(double s) { return std::exp(-1.0 / (1.0 - s * s)); }

// Cumulative integral of the bump on [-1, 0] at nodes -1 + j/kCells.
struct StepTable {
  static constexpr int kCells = 1024;
  std::array<double, kCells + 1> cum{};
  double half = 0.0;
  StepTable() {
    using GL = boost::math::quadrature::gauss<double, 20>;
    cum[0] = 0.0;
    for (int j = 0; j < kCells; ++j) {
      double a = -1.0 + double(j) / kCells, b = -1.0 + double(j + 1) / kCells;
      cum[j + 1] = cum[j] + GL::integrate([](double s) { return bump(s); }, a, b);
    }
    half = cum[kCells];
  }
};

const StepTable& step_table() {
  static const StepTable table;
  return table;
}

// Psi on [-1, 0].
double step_left(double x) {
  const StepTable& T = step_table();
  double pos = (x + 1.0) * StepTable::kCells;
  int j = std::min(StepTable::kCells - 1, std::max(0, int(std::floor(pos))));
  double a = -1.0 + double(j) / StepTable::kCells;
  using GL = boost::math::quadrature::gauss<double, 10>;
  double part = (x > a) ? GL::integrate([](double s) { return bump(s); }, a, x) : 0.0;
  return 0.5 * (T.cum[j] + part) / T.half;
}

double cutoff_coordinate(double a, double b, double t, double* slope) {
  if (!(std::isfinite(a) && std::isfinite(b)) || a == b)
    throw Error(ErrorKind::InvalidCutoff, "cutoff endpoints must be finite and distinct");
  double k = 3.0 / (b - a);
  if (slope) *slope = 2.0 * k;
  return (2.0 * t - (a + b)) * k;
}

}  // namespace

double smooth_step(double x) {
  if (x <= -1.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x == 0.0) return 0.5;
  if (x < 0.0) return step_left(x);
  return 1.0 - step_left(-x);
}

double smooth_step_d1(double x) {
  if (x <= -1.0 || x >= 1.0) return 0.0;
  return bump(x) / (2.0 * step_table().half);
}

double smooth_step_d2(double x) {
  if (x <= -1.0 || x >= 1.0) return 0.0;
  double q = 1.0 - x * x;
  return bump(x) * (-2.0 * x / (q * q)) / (2.0 * step_table().half);
}

double cutoff(double a, double b, double t) { return smooth_step(cutoff_coordinate(a, b, t, nullptr)); }

Jet cutoff_jet(double a, double b, double t) {
  double s = 0.0;
  double x = cutoff_coordinate(a, b, t, &s);
  return {smooth_step(x), smooth_step_d1(x) * s, smooth_step_d2(x) * s * s};
}

OdeState rk4_step(const OdeRhs& f, double t, const OdeState& y, double h) {
  boost::numeric::odeint::runge_kutta4<OdeState> stepper;
  OdeState out = y;
  stepper.do_step([&](const OdeState& x, OdeState& dx, double s) { f(s, x, dx); }, out, t, h);
  return out;
}

namespace {

double max_abs_diff(const OdeState& a, const OdeState& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool finite_below(const OdeState& y, double bound) {
  for (double v : y)
    if (!std::isfinite(v) || std::abs(v) > bound) return false;
  return true;
}

// Step with Richardson gauge; recursion halves while the estimate is above tol.
OdeState gauged_step(const OdeRhs& f, double t, const OdeState& y, double h,
                     const IntegrateOptions& o, int depth, double& err, int& refined) {
  OdeState full = rk4_step(f, t, y, h);
  OdeState mid = rk4_step(f, t, y, 0.5 * h);
  OdeState half = rk4_step(f, t + 0.5 * h, mid, 0.5 * h);
  double e = max_abs_diff(full, half) / 15.0;
  if (e <= o.richardson_tol || depth >= o.max_halvings) {
    err = std::max(err, e);
    return half;
  }
  ++refined;
  OdeState a = gauged_step(f, t, y, 0.5 * h, o, depth + 1, err, refined);
  return gauged_step(f, t + 0.5 * h, a, 0.5 * h, o, depth + 1, err, refined);
}

}  // namespace

Trajectory integrate_ode(const OdeRhs& f, const OdeState& y0, const std::vector<double>& grid,
                         const IntegrateOptions& opts) {
  if (grid.size() < 2) throw Error(ErrorKind::Parameter, "integration grid needs two nodes");
  Trajectory tr;
  tr.t.reserve(grid.size());
  tr.y.reserve(grid.size());
  tr.dy.reserve(grid.size());
  OdeState y = y0, dy(y0.size());
  f(grid[0], y, dy);
  tr.t.push_back(grid[0]);
  tr.y.push_back(y);
  tr.dy.push_back(dy);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double t = grid[i - 1], h = grid[i] - grid[i - 1];
    bool gauge = opts.richardson_tol > 0.0 && (!opts.refine_when || opts.refine_when(t, y));
    if (gauge)
      y = gauged_step(f, t, y, h, opts, 0, tr.max_error_estimate, tr.refined_steps);
    else
      y = rk4_step(f, t, y, h);
    if (!finite_below(y, opts.blowup))
      throw DivergenceError(t, "trajectory left the finite range after t = " + std::to_string(t));
    f(grid[i], y, dy);
    tr.t.push_back(grid[i]);
    tr.y.push_back(y);
    tr.dy.push_back(dy);
  }
  return tr;
}

OdeState Trajectory::eval(double s) const {
  bool inc = t.back() > t.front();
  double lo = inc ? t.front() : t.back(), hi = inc ? t.back() : t.front();
  if (s < lo - 1e-12 * (1 + std::abs(lo)) || s > hi + 1e-12 * (1 + std::abs(hi)))
    throw Error(ErrorKind::Domain, "dense output requested outside the trajectory");
  std::size_t j;
  if (inc)
    j = std::upper_bound(t.begin(), t.end(), s) - t.begin();
  else
    j = std::upper_bound(t.begin(), t.end(), s, std::greater<double>()) - t.begin();
  j = std::min(std::max<std::size_t>(j, 1), t.size() - 1);
  double h = t[j] - t[j - 1], u = (s - t[j - 1]) / h;
  double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  OdeState out(y[0].size());
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = h00 * y[j - 1][c] + h10 * h * dy[j - 1][c] + h01 * y[j][c] + h11 * h * dy[j][c];
  return out;
}

std::vector<double> uniform_grid(double a, double b, int N) {
  if (N < 1) throw Error(ErrorKind::Parameter, "grid needs at least one cell");
  std::vector<double> g(N + 1);
  for (int i = 0; i <= N; ++i) g[i] = a + (b - a) * double(i) / N;
  g[N] = b;
  return g;
}

double find_root(const std::function<double(double)>& f, double lo, double hi, double tol,
                 int max_iter) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!(std::isfinite(flo) && std::isfinite(fhi)) || (flo > 0) == (fhi > 0))
    throw Error(ErrorKind::Bracket, "no sign change on [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "]");
  boost::uintmax_t iters = max_iter;
  auto term = [tol](double a, double b) {
    return std::abs(b - a) <= std::max(tol, 4 * std::numeric_limits<double>::epsilon() *
                                                std::max(std::abs(a), std::abs(b)));
  };
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, term, iters);
  return 0.5 * (r.first + r.second);
}

QuadRule gauss_legendre(int order, double a, double b) {
  if (order < 1) throw Error(ErrorKind::Parameter, "Gauss order must be positive");
  std::unique_ptr<gsl_integration_glfixed_table, void (*)(gsl_integration_glfixed_table*)> tab(
      gsl_integration_glfixed_table_alloc(order), gsl_integration_glfixed_table_free);
  QuadRule q;
  q.x.resize(order);
  q.w.resize(order);
  for (int i = 0; i < order; ++i) gsl_integration_glfixed_point(a, b, i, &q.x[i], &q.w[i], tab.get());
  return q;
}

QuadRule composite_gauss(double a, double b, int panels, int order) {
  QuadRule base = gauss_legendre(order, 0.0, 1.0), q;
  double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p)
    for (int i = 0; i < order; ++i) {
      q.x.push_back(a + h * (p + base.x[i]));
      q.w.push_back(h * base.w[i]);
    }
  return q;
}

double integrate_gauss(const std::function<double(double)>& f, double a, double b, int panels,
                       int order) {
  QuadRule q = composite_gauss(a, b, panels, order);
  double s = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * f(q.x[i]);
  return s;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol);
}

double integrate_endpoint_singular(const std::function<double(double)>& f, double a, double b,
                                   double tol) {
  boost::math::quadrature::tanh_sinh<double> rule;
  return rule.integrate(f, a, b, tol);
}

double integrate_to_infinity(const std::function<double(double)>& f, double a, double tol) {
  boost::math::quadrature::exp_sinh<double> rule;
  return rule.integrate([&](double x) { return f(x); }, a, std::numeric_limits<double>::infinity(),
                        tol);
}

double sphere_volume(int m) {
  return 2.0 * std::pow(M_PI, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

SphereGrid SphereGrid::product(int dim, int n_polar) {
  if (dim < 1 || n_polar < 1) throw Error(ErrorKind::Parameter, "sphere rule needs dim, order >= 1");
  SphereGrid g;
  g.dim = dim;
  g.n_polar = n_polar;
  g.n_azimuth = 2 * n_polar;
  // Rules in u = cos(theta_j) with weight (1 - u^2)^{(p-1)/2}, p = dim - j.
  std::vector<std::vector<double>> ux(dim - 1), uw(dim - 1);
  for (int j = 0; j < dim - 1; ++j) {
    int p = dim - 1 - j;
    double alpha = 0.5 * (p - 1);
    std::unique_ptr<gsl_integration_fixed_workspace, void (*)(gsl_integration_fixed_workspace*)> ws(
        gsl_integration_fixed_alloc(gsl_integration_fixed_jacobi, n_polar, -1.0, 1.0, alpha, alpha),
        gsl_integration_fixed_free);
    const double* x = gsl_integration_fixed_nodes(ws.get());
    const double* w = gsl_integration_fixed_weights(ws.get());
    ux[j].assign(x, x + n_polar);
    uw[j].assign(w, w + n_polar);
  }
  std::vector<int> idx(dim - 1, 0);
  const int na = g.n_azimuth;
  while (true) {
    for (int a = 0; a < na; ++a) {
      double phi = 2.0 * M_PI * (a + 0.5) / na;
      Eigen::VectorXd x(dim + 1);
      double s = 1.0, w = 2.0 * M_PI / na;
      for (int j = 0; j < dim - 1; ++j) {
        double u = ux[j][idx[j]];
        x(j) = s * u;
        s *= std::sqrt(std::max(0.0, 1.0 - u * u));
        w *= uw[j][idx[j]];
      }
      x(dim - 1) = s * std::cos(phi);
      x(dim) = s * std::sin(phi);
      g.points.push_back(x);
      g.weights.push_back(w);
    }
    int j = dim - 2;
    while (j >= 0 && ++idx[j] == n_polar) idx[j--] = 0;
    if (j < 0) break;
  }
  return g;
}

double SphereGrid::total_weight() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

WeightedNormEstimate weighted_sup_norm(const std::vector<double>& u, const std::vector<double>& f,
                                       const std::vector<double>& rho,
                                       const std::vector<std::vector<double>>& derivs) {
  if (u.size() != f.size() || u.size() != rho.size())
    throw Error(ErrorKind::Parameter, "weighted norm inputs differ in length");
  for (const auto& d : derivs)
    if (d.size() != u.size()) throw Error(ErrorKind::Parameter, "derivative sample count mismatch");
  WeightedNormEstimate est;
  est.per_order.assign(derivs.size() + 1, 0.0);
  double best = -1.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(f[i] > 0.0) || !(rho[i] > 0.0))
      throw Error(ErrorKind::Parameter, "weight and scale must be positive");
    double v = std::abs(u[i]) / f[i];
    if (v > est.per_order[0]) est.per_order[0] = v;
    double local = v, rp = 1.0;
    for (std::size_t j = 0; j < derivs.size(); ++j) {
      rp *= rho[i];
      double dj = rp * std::abs(derivs[j][i]) / f[i];
      est.per_order[j + 1] = std::max(est.per_order[j + 1], dj);
      local += dj;
    }
    if (local > best) {
      best = local;
      est.argmax = i;
    }
  }
  for (double v : est.per_order) est.value += v;
  return est;
}

std::vector<double> grid_derivative(const std::vector<double>& t, const std::vector<double>& u) {
  std::size_t N = t.size();
  if (N < 3 || u.size() != N) throw Error(ErrorKind::Parameter, "grid derivative needs 3 nodes");
  std::vector<double> d(N);
  auto three = [&](std::size_t i0, double x) {
    double x0 = t[i0], x1 = t[i0 + 1], x2 = t[i0 + 2];
    double l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    double l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    double l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    return l0 * u[i0] + l1 * u[i0 + 1] + l2 * u[i0 + 2];
  };
  d[0] = three(0, t[0]);
  for (std::size_t i = 1; i + 1 < N; ++i) d[i] = three(i - 1, t[i]);
  d[N - 1] = three(N - 3, t[N - 1]);
  return d;
}

}  // namespace cmc
