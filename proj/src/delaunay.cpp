#include "cmc/delaunay.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <ostream>

namespace cmc {

double RotationalProfile::A2_closed(double r) const {
  int m = n();
  double t = tau();
  return m * (1.0 + (m - 1) * t * t * std::pow(r, -2.0 * m));
}

SphereProfile::SphereProfile(int n) : n_(n) {
  if (n < 3) throw Error(ErrorKind::Domain, "dimension n must be at least 3");
}

ProfileState SphereProfile::state(double t) const {
  ProfileState s;
  double th = std::tanh(t), sh = 1.0 / std::cosh(t);
  s.t = t;
  s.r = sh;
  s.w = std::log(sh);
  s.wp = -th;
  s.wpp = -sh * sh;
  s.rp = -sh * th;
  s.rpp = sh * th * th - sh * sh * sh;
  s.k = th;
  s.kp = sh * sh;
  s.kpp = -2.0 * sh * sh * th;
  return s;
}

double DelaunayProfile::cylinder_tau(int n) { return std::pow(double(n), -n) * std::pow(n - 1.0, n - 1); }

double delaunay_r_max(int n, double tau) {
  auto fp = [n, tau](double r) { return std::pow(r, n - 1) * (r - 1.0) + tau; };
  if (tau > 0) return find_root(fp, (n - 1.0) / n, 1.0);
  return find_root(fp, 1.0, std::max(2.0, 1.0 + std::abs(tau)));
}

double delaunay_r_min(int n, double tau) {
  if (tau > 0) {
    auto fp = [n, tau](double r) { return std::pow(r, n - 1) * (r - 1.0) + tau; };
    return find_root(fp, 0.0, (n - 1.0) / n);
  }
  auto fm = [n, tau](double r) { return std::pow(r, n - 1) * (r + 1.0) + tau; };
  return find_root(fm, 0.0, 1.0 + std::abs(tau));
}

double DelaunayProfile::radius(double w) const { return std::pow(std::abs(tau_), 1.0 / n_) * std::exp(w); }
double DelaunayProfile::r1(double r) const { return r + tau_ * std::pow(r, 1 - n_); }
double DelaunayProfile::r2(double r) const { return r + (1 - n_) * tau_ * std::pow(r, 1 - n_); }

namespace {

struct Quintic {
  double H[6], dH[6];
  explicit Quintic(double u) {
    double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
    H[0] = 1 - 10 * u3 + 15 * u4 - 6 * u5;
    H[1] = u - 6 * u3 + 8 * u4 - 3 * u5;
    H[2] = 0.5 * (u2 - 3 * u3 + 3 * u4 - u5);
    H[3] = 10 * u3 - 15 * u4 + 6 * u5;
    H[4] = -4 * u3 + 7 * u4 - 3 * u5;
    H[5] = 0.5 * (u3 - 2 * u4 + u5);
    dH[0] = -30 * u2 + 60 * u3 - 30 * u4;
    dH[1] = 1 - 18 * u2 + 32 * u3 - 15 * u4;
    dH[2] = 0.5 * (2 * u - 9 * u2 + 12 * u3 - 5 * u4);
    dH[3] = 30 * u2 - 60 * u3 + 30 * u4;
    dH[4] = -12 * u2 + 28 * u3 - 15 * u4;
    dH[5] = 0.5 * (3 * u2 - 8 * u3 + 5 * u4);
  }
  // Returns value and t-derivative.
  std::pair<double, double> eval(double h, double f0, double d0, double s0, double f1, double d1,
                                 double s1) const {
    double v = f0 * H[0] + h * d0 * H[1] + h * h * s0 * H[2] + f1 * H[3] + h * d1 * H[4] + h * h * s1 * H[5];
    double dv = f0 * dH[0] + h * d0 * dH[1] + h * h * s0 * dH[2] + f1 * dH[3] + h * d1 * dH[4] +
                h * h * s1 * dH[5];
    return {v, dv / h};
  }
};

}  // namespace

std::shared_ptr<const DelaunayProfile> DelaunayProfile::solve(int n, double tau, const ProfileOptions& opts) {
  if (n < 3) throw Error(ErrorKind::Domain, "dimension n must be at least 3");
  if (tau == 0.0) throw Error(ErrorKind::Domain, "tau = 0 is the sphere chart; use SphereProfile");
  double tc = cylinder_tau(n);
  if (!std::isfinite(tau) || tau > tc * (1.0 + 1e-14))
    throw Error(ErrorKind::Domain, "tau above the cylinder bound n^{-n}(n-1)^{n-1}");
  if (!(opts.step > 0.0)) throw Error(ErrorKind::Parameter, "integration step must be positive");

  std::shared_ptr<DelaunayProfile> P(new DelaunayProfile());
  P->n_ = n;
  P->tau_ = tau;
  if (tau >= tc * (1.0 - 1e-14)) {
    P->tau_ = tc;
    P->degenerate_ = true;
    P->r_max_ = P->r_min_ = (n - 1.0) / n;
    P->w_max_ = std::log(P->r_max_) - std::log(tc) / n;
    return P;
  }
  P->r_max_ = delaunay_r_max(n, tau);
  P->r_min_ = delaunay_r_min(n, tau);
  P->w_max_ = std::log(P->r_max_) - std::log(std::abs(tau)) / n;
  P->compute_quadratures(opts.split_delta);

  const DelaunayProfile& D = *P;
  OdeRhs rhs = [&D](double, const OdeState& y, OdeState& dy) {
    double r = D.radius(y[0]);
    double a = D.r1(r), b = D.r2(r);
    dy[0] = y[1];
    dy[1] = -a * b;
    dy[2] = r * a;
  };
  IntegrateOptions io;
  io.richardson_tol = opts.richardson_tol;
  double thr = opts.gauge_threshold;
  io.refine_when = [thr](double, const OdeState& y) { return std::abs(y[1]) > thr; };

  const double h = opts.step;
  double T = 2.0 * P->p_quad_ * 1.02 + 10 * h;
  int N = int(std::ceil(T / h));
  std::vector<double> grid(N + 1);
  for (int i = 0; i <= N; ++i) grid[i] = i * h;
  Trajectory tr = integrate_ode(rhs, {P->w_max_, 0.0, 0.0}, grid, io);

  // First upward crossing of w' locates the minimum of r at t = p.
  std::size_t j = 1;
  while (j < tr.t.size() && tr.y[j][1] < 0.0) ++j;
  if (j >= tr.t.size()) throw Error(ErrorKind::Consistency, "no turning point of w within the expected period");
  const OdeState& yj = tr.y[j - 1];
  double tj = tr.t[j - 1];
  double s = find_root([&](double st) { return st == 0.0 ? yj[1] : rk4_step(rhs, tj, yj, st)[1]; }, 0.0,
                       tr.t[j] - tj);
  P->p_ = tj + s;
  double two_p = 2.0 * P->p_;

  std::size_t last = 0;
  while (last + 1 < tr.t.size() && tr.t[last + 1] < two_p - 1e-3 * h) ++last;
  for (std::size_t i = 0; i <= last; ++i) {
    P->t_.push_back(tr.t[i]);
    P->w_.push_back(tr.y[i][0]);
    P->wp_.push_back(tr.y[i][1]);
    P->k_.push_back(tr.y[i][2]);
  }
  OdeState yend = rk4_step(rhs, tr.t[last], tr.y[last], two_p - tr.t[last]);
  P->t_.push_back(two_p);
  P->w_.push_back(yend[0]);
  P->wp_.push_back(yend[1]);
  P->k_.push_back(yend[2]);
  P->err_est_ = tr.max_error_estimate;
  P->refined_ = tr.refined_steps;
  P->phat_ = 0.5 * (yend[2] - 2.0);

  if (opts.cross_check) {
    if (std::abs(P->p_ - P->p_quad_) > 10.0 * opts.tol * std::max(1.0, P->p_))
      throw Error(ErrorKind::Consistency, "ODE period " + std::to_string(P->p_) +
                                              " disagrees with quadrature " + std::to_string(P->p_quad_));
  }
  return P;
}

void DelaunayProfile::compute_quadratures(double delta) {
  const int n = n_;
  const double tau = tau_;
  // 1 - r_1^2 near an extremum r_e (where r_1 = sigma), written in u = r/r_e - 1.
  auto q_near = [n, tau](double re, double sigma, double u) {
    double A = re, B = tau * std::pow(re, 1 - n);
    double D = A * u + B * std::expm1((1 - n) * std::log1p(u));
    return std::max(-2.0 * sigma * D - D * D, 1e-300);
  };
  auto r1f = [n, tau](double r) { return r + tau * std::pow(r, 1 - n); };
  double sig_min = tau > 0 ? 1.0 : -1.0;

  // Integrals of dr / (r sqrt(Q)) and r_1 dr / sqrt(Q) over [ra, rb] near an extremum.
  auto near = [&](double re, double sigma, double ra, double rb, bool for_k) {
    double ua = ra / re - 1.0, ub = rb / re - 1.0;
    auto f = [&](double u) {
      double Q = q_near(re, sigma, u);
      double r = re * (1.0 + u);
      return for_k ? re * r1f(r) / std::sqrt(Q) : 1.0 / ((1.0 + u) * std::sqrt(Q));
    };
    boost::math::quadrature::tanh_sinh<double> rule;
    return rule.integrate(f, ua, ub, 1e-14);
  };
  auto middle = [&](double ra, double rb, bool for_k) {
    auto f = [&](double lr) {
      double r = std::exp(lr), a = r1f(r);
      double Q = std::max((1.0 - a) * (1.0 + a), 1e-300);
      return for_k ? r * a / std::sqrt(Q) : 1.0 / std::sqrt(Q);
    };
    return integrate_adaptive(f, std::log(ra), std::log(rb), 1e-14);
  };
  double lo = r_min_, hi = r_max_;
  double p = 0.0, k = 0.0;
  if (lo / delta < hi * delta) {
    p = near(lo, sig_min, lo, lo / delta, false) + middle(lo / delta, hi * delta, false) +
        near(hi, 1.0, hi * delta, hi, false);
    k = near(lo, sig_min, lo, lo / delta, true) + middle(lo / delta, hi * delta, true) +
        near(hi, 1.0, hi * delta, hi, true);
  } else {
    double mid = std::sqrt(lo * hi);
    p = near(lo, sig_min, lo, mid, false) + near(hi, 1.0, mid, hi, false);
    k = near(lo, sig_min, lo, mid, true) + near(hi, 1.0, mid, hi, true);
  }
  p_quad_ = p;
  phat_quad_ = k - 1.0;
}

ProfileState DelaunayProfile::state_in_period(double s) const {
  std::size_t j = std::upper_bound(t_.begin(), t_.end(), s) - t_.begin();
  j = std::min(std::max<std::size_t>(j, 1), t_.size() - 1);
  double h = t_[j] - t_[j - 1];
  Quintic q((s - t_[j - 1]) / h);
  auto nodal = [this](std::size_t i, double& wpp, double& kp, double& kpp) {
    double r = radius(w_[i]), a = r1(r), b = r2(r);
    wpp = -a * b;
    kp = r * a;
    kpp = r * wp_[i] * (a + b);
  };
  double wpp0, kp0, kpp0, wpp1, kp1, kpp1;
  nodal(j - 1, wpp0, kp0, kpp0);
  nodal(j, wpp1, kp1, kpp1);
  auto W = q.eval(h, w_[j - 1], wp_[j - 1], wpp0, w_[j], wp_[j], wpp1);
  auto K = q.eval(h, k_[j - 1], kp0, kpp0, k_[j], kp1, kpp1);
  ProfileState st;
  st.t = s;
  st.w = W.first;
  st.wp = W.second;
  st.r = radius(st.w);
  double a = r1(st.r), b = r2(st.r);
  st.wpp = -a * b;
  st.rp = st.r * st.wp;
  st.rpp = st.r * (st.wpp + st.wp * st.wp);
  st.k = K.first;
  st.kp = st.r * a;
  st.kpp = st.r * st.wp * (a + b);
  return st;
}

ProfileState DelaunayProfile::state(double t) const {
  if (!std::isfinite(t)) throw Error(ErrorKind::Domain, "non-finite profile parameter");
  if (degenerate_) {
    ProfileState st;
    st.t = t;
    st.w = w_max_;
    st.r = r_max_;
    st.kp = st.r * r1(st.r);
    st.k = st.kp * t;
    return st;
  }
  double P2 = t_.back();
  double m = std::floor(t / P2);
  double s = t - m * P2;
  if (s < 0.0) s = 0.0;
  if (s > P2) s = P2;
  ProfileState st = state_in_period(s);
  st.t = t;
  st.k += m * k_.back();
  return st;
}

double T_constant(int n) {
  if (n < 3) throw Error(ErrorKind::Domain, "T_n diverges for n < 3");
  auto near = [n](double u) { return 1.0 / std::sqrt(std::expm1((2.0 * n - 2.0) * std::log1p(u))); };
  boost::math::quadrature::tanh_sinh<double> rule;
  double a = rule.integrate(near, 0.0, 1.0, 1e-15);
  double b = integrate_to_infinity([n](double r) { return 1.0 / std::sqrt(std::pow(r, 2 * n - 2) - 1.0); },
                                   2.0, 1e-15);
  return a + b;
}

double T_constant_closed(int n) {
  if (n < 3) throw Error(ErrorKind::Domain, "T_n diverges for n < 3");
  double m = n - 1.0;
  return std::sqrt(M_PI) * std::tgamma(0.5 * (3 * n - 4) / m) / ((n - 2) * std::tgamma(0.5 * (2 * n - 3) / m));
}

CurvatureSample curvature(const RotationalProfile& prof, double t) {
  ProfileState s = prof.state(t);
  int n = prof.n();
  double g = s.kp * s.kp + s.rp * s.rp, ng = std::sqrt(g);
  CurvatureSample c;
  c.t = t;
  c.metric_factor = s.r * s.r;
  c.h_meridian = (s.kpp * s.rp - s.rpp * s.kp) / (g * ng);
  c.h_angular = s.kp / (s.r * ng);
  c.H = (c.h_meridian + (n - 1) * c.h_angular) / n;
  c.A2 = c.h_meridian * c.h_meridian + (n - 1) * c.h_angular * c.h_angular;
  c.A2_closed = prof.A2_closed(s.r);
  return c;
}

double curvature_graph_fd(const RotationalProfile& prof, double t, double h) {
  double r[5], k[5];
  for (int i = 0; i < 5; ++i) {
    ProfileState s = prof.state(t + (i - 2) * h);
    r[i] = s.r;
    k[i] = s.k;
  }
  auto d1 = [h](const double* f) { return (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h); };
  auto d2 = [h](const double* f) { return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h); };
  double rt = d1(r), kt = d1(k), rtt = d2(r), ktt = d2(k);
  if (std::abs(kt) < 1e-6) return std::numeric_limits<double>::quiet_NaN();
  double rho = r[2], rho1 = rt / kt, rho2 = (rtt * kt - rt * ktt) / (kt * kt * kt);
  double q = 1.0 + rho1 * rho1;
  int n = prof.n();
  double nH = (n - 1) / (rho * std::sqrt(q)) - rho2 / (q * std::sqrt(q));
  return (kt > 0 ? 1.0 : -1.0) * nH / n;
}

Eigen::VectorXd profile_normal(const ProfileState& s, const Eigen::VectorXd& theta) {
  Eigen::VectorXd v(theta.size() + 1);
  double ng = std::sqrt(s.kp * s.kp + s.rp * s.rp);
  v(0) = s.rp / ng;
  v.tail(theta.size()) = -(s.kp / ng) * theta;
  return v;
}

Eigen::VectorXd profile_point(const ProfileState& s, const Eigen::VectorXd& theta) {
  Eigen::VectorXd v(theta.size() + 1);
  v(0) = s.k;
  v.tail(theta.size()) = s.r * theta;
  return v;
}

Eigen::VectorXd flux(const RotationalProfile& prof, double t, int sphere_order) {
  int n = prof.n();
  ProfileState s = prof.state(t);
  SphereGrid G = SphereGrid::product(n - 1, sphere_order);
  double ng = std::sqrt(s.kp * s.kp + s.rp * s.rp);
  Eigen::VectorXd cono = Eigen::VectorXd::Zero(n + 1);
  double area = 0.0;
  for (std::size_t i = 0; i < G.size(); ++i) {
    Eigen::VectorXd eta(n + 1);
    eta(0) = s.kp / ng;
    eta.tail(n) = (s.rp / ng) * G.points[i];
    double dA = G.weights[i] * std::pow(s.r, n - 1);
    cono += dA * eta;
    area += G.weights[i];
  }
  double radial = integrate_gauss([n](double x) { return std::pow(x, n - 1); }, 0.0, s.r, 1, 8);
  Eigen::VectorXd F = cono;
  F(0) -= n * radial * area;
  return F;
}

JacobiSample jacobi_mode0(const RotationalProfile& prof, double t) {
  ProfileState s = prof.state(t);
  double ng = std::sqrt(s.kp * s.kp + s.rp * s.rp);
  double ngp = (s.kp * s.kpp + s.rp * s.rpp) / ng;
  return {s.rp / ng, (s.rpp * ng - s.rp * ngp) / (ng * ng)};
}

double linearized_flux(const RotationalProfile& prof, double phi, double dphi, double t) {
  JacobiSample f = jacobi_mode0(prof, t);
  ProfileState s = prof.state(t);
  return std::pow(s.r, prof.n() - 2) * (dphi * f.value - phi * f.derivative);
}

JacobiSample dilation_field(int n, double tau, double t, double dsigma, const ProfileOptions& opts) {
  auto Pp = DelaunayProfile::solve(n, tau + dsigma, opts);
  auto Pm = DelaunayProfile::solve(n, tau - dsigma, opts);
  auto P0 = DelaunayProfile::solve(n, tau, opts);
  auto phi_at = [&](double s) {
    ProfileState a = Pp->state(s), b = Pm->state(s), c = P0->state(s);
    double dk = (a.k - b.k) / (2 * dsigma), dr = (a.r - b.r) / (2 * dsigma);
    double ng = std::sqrt(c.kp * c.kp + c.rp * c.rp);
    return (c.rp * dk - c.kp * dr) / ng;
  };
  double e = 1e-3;
  double d = (phi_at(t - 2 * e) - 8 * phi_at(t - e) + 8 * phi_at(t + e) - phi_at(t + 2 * e)) / (12 * e);
  return {phi_at(t), d};
}

CatenoidComparison catenoid_compare(const DelaunayProfile& prof, double b, double step) {
  if (prof.degenerate()) throw Error(ErrorKind::Domain, "cylinder has no neck");
  if (!(b > 0.0) || b >= prof.p()) throw Error(ErrorKind::Domain, "catenoid window exceeds the half period");
  int n = prof.n();
  OdeRhs cat = [n](double, const OdeState& y, OdeState& dy) {
    double r = std::exp(y[0]);
    dy[0] = y[1];
    dy[1] = (n - 1) * std::pow(r, 2 - 2 * n);
    dy[2] = std::pow(r, 2 - n);
  };
  int N = std::max(8, int(std::ceil(b / step)));
  Trajectory C = integrate_ode(cat, {0.0, 0.0, 0.0}, uniform_grid(0.0, b, N));
  double sgn = prof.tau() > 0 ? 1.0 : -1.0;
  ProfileState neck = prof.state(prof.p());
  double best = 0.0;
  for (int i = 0; i <= N; ++i) {
    for (double side : {1.0, -1.0}) {
      double t = side * C.t[i];
      double rc = std::exp(C.y[i][0]), kc = side * C.y[i][2];
      ProfileState s = prof.state(prof.p() + sgn * t);
      double dk = (s.k - neck.k) / prof.r_min() - kc;
      double dr = s.r / prof.r_min() - rc;
      best = std::max(best, std::hypot(dk, dr));
    }
  }
  return {best, b};
}

void write_profile_csv(const DelaunayProfile& prof, std::ostream& os, int N) {
  os << "t,r,k,w,H,A2,flux_e1\n";
  double T = prof.degenerate() ? 1.0 : 2.0 * prof.p();
  double om = sphere_volume(prof.n() - 1);
  os.precision(17);
  for (int i = 0; i <= N; ++i) {
    double t = T * i / N;
    ProfileState s = prof.state(t);
    CurvatureSample c = curvature(prof, t);
    double f = std::pow(s.r, prof.n() - 2) * s.kp - std::pow(s.r, prof.n());
    os << t << ',' << s.r << ',' << s.k << ',' << s.w << ',' << c.H << ',' << c.A2 << ',' << f * om << '\n';
  }
}

}  // namespace cmc
