#include "cmc/linear.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "cmc/error.hpp"
#include "lapacke.h"

namespace cmc {

namespace {

std::string num(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

/// 5-point first and second differences of f at t.
void fd5(const ScalarFn& f, double t, double h, double& d1, double& d2) {
  const double fm2 = f(t - 2 * h), fm1 = f(t - h), f0 = f(t), fp1 = f(t + h), fp2 = f(t + 2 * h);
  d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h);
  d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h);
}

/// 5-point derivative of uniformly sampled data at interior index i (2 <= i <= N-2).
double diff5(const std::vector<double>& v, std::size_t i, double h) {
  return (v[i - 2] - 8 * v[i - 1] + 8 * v[i + 1] - v[i + 2]) / (12 * h);
}

double interp(const std::vector<double>& t, const std::vector<double>& v, double x) {
  if (t.empty()) throw Error(ErrorKind::Domain, "empty solution");
  if (x <= t.front()) return v.front();
  if (x >= t.back()) return v.back();
  auto it = std::upper_bound(t.begin(), t.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - t.begin());
  const double s = (x - t[j - 1]) / (t[j] - t[j - 1]);
  return (1 - s) * v[j - 1] + s * v[j];
}

}  // namespace

// Geometry ---------------------------------------------------------------------------------------

double GeometryCoefficients::density(int n) const { return sigma * std::pow(R, n - 1); }
double GeometryCoefficients::stiffness(int n) const { return std::pow(R, n - 1) / sigma; }

RevolutionGeometry RevolutionGeometry::conformal(std::shared_ptr<const RotationalProfile> profile) {
  if (!profile) throw Error(ErrorKind::Parameter, "null profile");
  RevolutionGeometry g;
  g.n_ = profile->n();
  g.profile_ = profile;
  g.meridian_ = [profile](double t) {
    ProfileState s = profile->state(t);
    return MeridianJets{{s.k, s.kp, s.kpp}, {s.r, s.rp, s.rpp}};
  };
  return g;
}

RevolutionGeometry RevolutionGeometry::general(int n, MeridianFn meridian) {
  if (n < 2) throw Error(ErrorKind::Parameter, "n must be at least 2");
  RevolutionGeometry g;
  g.n_ = n;
  g.meridian_ = std::move(meridian);
  return g;
}

RevolutionGeometry RevolutionGeometry::flat(int n) {
  return general(n, [](double t) {
    const double e = std::exp(t);
    return MeridianJets{{0.0, 0.0, 0.0}, {e, e, e}};
  });
}

RevolutionGeometry RevolutionGeometry::block(const DelaunayBlock& B) {
  if (B.zeta_plus().norm() > 0.0 || B.zeta_minus().norm() > 0.0)
    throw Error(ErrorKind::Unsupported, "block with a dislocation is not rotationally symmetric");
  return general(B.n(), [B](double t) {
    BlockMeridian m = B.meridian(t);
    return MeridianJets{m.K, m.R};
  });
}

GeometryCoefficients RevolutionGeometry::at(double t) const {
  GeometryCoefficients c;
  if (profile_) {
    ProfileState s = profile_->state(t);
    c.R = s.r;
    c.sigma = s.r;
    c.drift = (n_ - 2) * s.rp / s.r;
    c.A2 = profile_->A2_closed(s.r);
    c.nu_axial = s.rp / s.r;
    c.nu_radial = -s.kp / s.r;
    return c;
  }
  const MeridianJets m = meridian_(t);
  const double sig = std::hypot(m.K.d, m.R.d);
  const double dsig = (m.K.d * m.K.dd + m.R.d * m.R.dd) / sig;
  c.R = m.R.v;
  c.sigma = sig;
  c.drift = (n_ - 1) * m.R.d / m.R.v - dsig / sig;
  const double km = (m.K.dd * m.R.d - m.K.d * m.R.dd) / (sig * sig * sig);
  const double ka = m.K.d / (m.R.v * sig);
  c.A2 = km * km + (n_ - 1) * ka * ka;
  c.nu_axial = m.R.d / sig;
  c.nu_radial = -m.K.d / sig;
  return c;
}

double trace_mean_curvature(int n, const MeridianJets& m) {
  const double sig = std::hypot(m.K.d, m.R.d);
  const double km = (m.K.dd * m.R.d - m.K.d * m.R.dd) / (sig * sig * sig);
  const double ka = m.K.d / (m.R.v * sig);
  return km + (n - 1) * ka;
}

ModeRegion lambda_region(std::shared_ptr<const DelaunayProfile> profile, double b) {
  const double p = profile->p();
  if (b < 0 || p - b <= b)
    throw Error(ErrorKind::Parameter, "Lambda = [b, p - b] is empty for b = " + num(b) + ", p = " + num(p));
  return {RevolutionGeometry::conformal(profile), b, p - b, "Lambda"};
}

ModeRegion s_tilde_plus(std::shared_ptr<const DelaunayProfile> profile, double b) {
  const double p = profile->p();
  if (b < 0 || b >= p) throw Error(ErrorKind::Parameter, "S~+ needs 0 <= b < p");
  return {RevolutionGeometry::conformal(profile), p + b, 3 * p - b, "S~+"};
}

ModeRegion s_tilde_minus(std::shared_ptr<const DelaunayProfile> profile, double b) {
  const double p = profile->p();
  if (b < 0 || b >= p) throw Error(ErrorKind::Parameter, "S~- needs 0 <= b < p");
  return {RevolutionGeometry::conformal(profile), b, 2 * p - b, "S~-"};
}

int harmonic_multiplicity(int n, int k) {
  if (k < 0) return 0;
  auto binom = [](int a, int b) -> long long {
    if (b < 0 || a < b) return 0;
    long long r = 1;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
  };
  return static_cast<int>(binom(k + n - 1, n - 1) - binom(k + n - 3, n - 1));
}

// Mode operator ----------------------------------------------------------------------------------

ModeOperator::ModeOperator(RevolutionGeometry geometry, int k, double lambda)
    : geom_(std::move(geometry)), k_(k), lambda_(lambda) {
  if (k < 0) throw Error(ErrorKind::Parameter, "mode index must be >= 0");
}

double ModeOperator::kappa() const { return static_cast<double>(k_) * (n() - 2 + k_); }

double ModeOperator::potential(const GeometryCoefficients& c) const {
  return c.sigma * c.sigma * (c.A2 + lambda_ - kappa() / (c.R * c.R));
}

double ModeOperator::apply(double t, double u, double du, double ddu) const {
  const GeometryCoefficients c = geom_.at(t);
  return (ddu + c.drift * du + potential(c) * u) / (c.sigma * c.sigma);
}

double ModeOperator::kernel_residual(double t0, double t1, int samples, double h) const {
  if (k_ != 0) throw Error(ErrorKind::Parameter, "kernel residual is defined for mode 0");
  ScalarFn f0 = [this](double t) { return geom_.at(t).nu_axial; };
  double worst = 0.0, size = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = t0 + 2 * h + (t1 - t0 - 4 * h) * i / std::max(1, samples - 1);
    double d1, d2;
    fd5(f0, t, h, d1, d2);
    const double f = f0(t);
    const double scale = std::abs(apply(t, f, 0.0, 0.0)) + std::abs(apply(t, 0.0, d1, 0.0)) + std::abs(apply(t, 0.0, 0.0, d2));
    worst = std::max(worst, std::abs(apply(t, f, d1, d2)));
    size = std::max(size, scale);
  }
  return size > 0.0 ? worst / size : worst;
}

const char* to_string(ModeCondition c) {
  switch (c) {
    case ModeCondition::Dirichlet: return "dirichlet";
    case ModeCondition::Out: return "out";
    case ModeCondition::In: return "in";
  }
  return "dirichlet";
}

double ModeSolution::value(double x) const { return interp(t, u, x); }
double ModeSolution::derivative(double x) const { return interp(t, du, x); }

ModeSolution solve_mode(const ModeOperator& op, const ModeProblem& pb) {
  const int n = op.n(), k = op.k();
  if (!(pb.step > 0.0)) throw Error(ErrorKind::Parameter, "step must be positive");
  if (pb.t_out == pb.t_in) throw Error(ErrorKind::Parameter, "empty mode interval");
  const RevolutionGeometry& G = op.geometry();
  if (op.lambda() != 0.0) {
    const double r_out = G.at(pb.t_out).R;
    if (std::abs(op.lambda()) >= 1.0 / (4.0 * r_out))
      throw Error(ErrorKind::Parameter, "|lambda| = " + num(std::abs(op.lambda())) + " must be below 1/(4 r_out) = " +
                                            num(1.0 / (4.0 * r_out)));
  }
  const double t0 = std::min(pb.t_out, pb.t_in), t1 = std::max(pb.t_out, pb.t_in);
  const bool out_first = pb.t_out < pb.t_in;
  const int N = std::max(8, static_cast<int>(std::ceil((t1 - t0) / pb.step)));
  const double h = (t1 - t0) / N;

  struct Node {
    double P, Q, F, mE, E, R, sigma;
  };
  std::vector<Node> c(2 * N + 1);
  for (int j = 0; j <= 2 * N; ++j) {
    const double t = (j == 2 * N) ? t1 : t0 + 0.5 * h * j;
    const GeometryCoefficients g = G.at(t);
    const double E = pb.rhs ? pb.rhs(t) : 0.0;
    c[j] = {g.drift, op.potential(g), g.sigma * g.sigma * E, g.density(n) * E, E, g.R, g.sigma};
  }

  using State = std::array<double, 3>;
  auto deriv = [](const Node& nd, const State& y, bool source) -> State {
    return {y[1], (source ? nd.F : 0.0) - nd.P * y[1] - nd.Q * y[0], y[0] * nd.mE};
  };
  auto march = [&](int start, int dir, State y, bool source) {
    std::vector<State> out(N + 1);
    out[start] = y;
    const double hh = dir * h;
    int i = start;
    for (int s = 0; s < N; ++s) {
      const Node &a = c[2 * i], &m = c[2 * i + dir], &b = c[2 * i + 2 * dir];
      const State k1 = deriv(a, y, source);
      State y2, y3, y4;
      for (int q = 0; q < 3; ++q) y2[q] = y[q] + 0.5 * hh * k1[q];
      const State k2 = deriv(m, y2, source);
      for (int q = 0; q < 3; ++q) y3[q] = y[q] + 0.5 * hh * k2[q];
      const State k3 = deriv(m, y3, source);
      for (int q = 0; q < 3; ++q) y4[q] = y[q] + hh * k3[q];
      const State k4 = deriv(b, y4, source);
      for (int q = 0; q < 3; ++q) y[q] += hh / 6.0 * (k1[q] + 2 * k2[q] + 2 * k3[q] + k4[q]);
      i += dir;
      if (!std::isfinite(y[0]) || !std::isfinite(y[1]))
        throw Error(ErrorKind::Divergence, "mode " + std::to_string(k) + " shooting overflowed near t = " +
                                               num(t0 + i * h));
      out[i] = y;
    }
    return out;
  };

  ModeSolution sol;
  sol.k = k;
  sol.condition = pb.condition;
  sol.t.resize(N + 1);
  sol.u.assign(N + 1, 0.0);
  sol.du.assign(N + 1, 0.0);
  for (int i = 0; i <= N; ++i) sol.t[i] = (i == N) ? t1 : t0 + i * h;

  const bool cauchy = pb.condition != ModeCondition::Dirichlet && k <= 1;
  if (cauchy) {
    // Out: zero data at C^in; In: zero data at C^out.
    const bool start_at_t0 = (pb.condition == ModeCondition::Out) != out_first;
    const auto y = march(start_at_t0 ? 0 : N, start_at_t0 ? 1 : -1, {0.0, 0.0, 0.0}, true);
    for (int i = 0; i <= N; ++i) {
      sol.u[i] = y[i][0];
      sol.du[i] = y[i][1];
    }
  } else {
    double alpha = 0.0, beta = 0.0;
    if (pb.condition == ModeCondition::Dirichlet) {
      alpha = out_first ? pb.value_out : pb.value_in;
      beta = out_first ? pb.value_in : pb.value_out;
    }
    const auto A = march(0, 1, {0.0, 1.0, 0.0}, false);
    const auto B = march(N, -1, {0.0, -1.0, 0.0}, false);
    double maxA = 0.0, maxB = 0.0;
    for (int i = 0; i <= N; ++i) {
      maxA = std::max(maxA, std::abs(A[i][0]));
      maxB = std::max(maxB, std::abs(B[i][0]));
    }
    const double condA = maxA / std::abs(A[N][0]), condB = maxB / std::abs(B[0][0]);
    sol.conditioning = std::max(condA, condB);
    if (!(sol.conditioning < pb.resonance_threshold))
      throw Error(ErrorKind::Resonance, "mode " + std::to_string(k) + " Dirichlet problem on [" + num(t0) + ", " +
                                            num(t1) + "] is near-resonant (conditioning " + num(sol.conditioning) +
                                            ")");
    auto wr = [&](int i) {
      const double S = std::pow(c[2 * i].R, n - 1) / c[2 * i].sigma;
      return S * (A[i][0] * B[i][1] - A[i][1] * B[i][0]);
    };
    const double C = wr(N / 2);
    double drift = 0.0;
    for (int i = 0; i <= N; ++i) drift = std::max(drift, std::abs(wr(i) - C));
    sol.wronskian_drift = drift / std::abs(C);
    for (int i = 0; i <= N; ++i) {
      sol.u[i] = (B[i][0] * A[i][2] - A[i][0] * B[i][2]) / C + alpha * B[i][0] / B[0][0] + beta * A[i][0] / A[N][0];
      sol.du[i] = (B[i][1] * A[i][2] - A[i][1] * B[i][2]) / C + alpha * B[i][1] / B[0][0] + beta * A[i][1] / A[N][0];
    }
    sol.u[0] = alpha;
    sol.u[N] = beta;
  }

  const double g = pb.gamma;
  sol.rhs.resize(N + 1);
  sol.R.resize(N + 1);
  sol.weight.resize(N + 1);
  sol.rhs_weight.resize(N + 1);
  for (int i = 0; i <= N; ++i) {
    const Node& nd = c[2 * i];
    sol.rhs[i] = nd.E;
    sol.R[i] = nd.R;
    switch (pb.condition) {
      case ModeCondition::Dirichlet:
        sol.weight[i] = sol.rhs_weight[i] = 1.0;
        break;
      case ModeCondition::Out:
        sol.weight[i] = std::pow(nd.R, g);
        sol.rhs_weight[i] = std::pow(nd.R, g - 2);
        break;
      case ModeCondition::In:
        sol.weight[i] = std::pow(nd.R, 2 - n - g);
        sol.rhs_weight[i] = std::pow(nd.R, -n - g);
        break;
    }
  }
  double num_res = 0.0, den_res = 0.0;
  for (int i = 2; i <= N - 2; ++i) {
    const Node& nd = c[2 * i];
    const double d2 = diff5(sol.du, i, h);
    const double s2 = nd.sigma * nd.sigma;
    const double res = (d2 + nd.P * sol.du[i] + nd.Q * sol.u[i] - nd.F) / s2;
    const double scale =
        (std::abs(d2) + std::abs(nd.P * sol.du[i]) + std::abs(nd.Q * sol.u[i]) + std::abs(nd.F)) / s2;
    num_res = std::max(num_res, std::abs(res) / sol.rhs_weight[i]);
    den_res = std::max(den_res, scale / sol.rhs_weight[i]);
  }
  sol.residual = den_res > 0 ? num_res / den_res : 0.0;
  double s0 = 0.0, s1 = 0.0, e0 = 0.0;
  for (int i = 0; i <= N; ++i) {
    const Node& nd = c[2 * i];
    s0 = std::max(s0, std::abs(sol.u[i]) / sol.weight[i]);
    s1 = std::max(s1, nd.R / nd.sigma * std::abs(sol.du[i]) / sol.weight[i]);
    e0 = std::max(e0, std::abs(nd.E) / sol.rhs_weight[i]);
  }
  sol.solution_norm = s0 + s1;
  sol.rhs_norm = e0;
  sol.norm_ratio = e0 > 0 ? sol.solution_norm / e0 : 0.0;
  const int io = out_first ? 0 : N, ii = out_first ? N : 0;
  sol.u_out = sol.u[io];
  sol.u_in = sol.u[ii];
  sol.du_out = sol.du[io];
  sol.du_in = sol.du[ii];
  return sol;
}

void write_mode_csv(const ModeSolution& s, std::ostream& os) {
  os << "t,u,du,weight,rhs_weight\n";
  os.precision(17);
  for (std::size_t i = 0; i < s.t.size(); ++i)
    os << s.t[i] << ',' << s.u[i] << ',' << s.du[i] << ',' << s.weight[i] << ',' << s.rhs_weight[i] << '\n';
}

// Flat annulus -----------------------------------------------------------------------------------

namespace {

enum class FlatKind { CauchyIn, CauchyOut, Dirichlet };

struct LogGrid {
  std::vector<double> s;
  double dx = 0.0;
};

LogGrid log_grid(double s_in, double s_out, int samples) {
  LogGrid g;
  const int N = std::max(8, samples - 1);
  const double x0 = std::log(s_in), x1 = std::log(s_out);
  g.dx = (x1 - x0) / N;
  g.s.resize(N + 1);
  for (int i = 0; i <= N; ++i) g.s[i] = std::exp(x0 + i * g.dx);
  g.s.front() = s_in;
  g.s.back() = s_out;
  return g;
}

/// Cumulative integrals of f over the cells of s: forward from s_0 and backward from s_N.
void cumulative(const std::vector<double>& s, const ScalarFn& f, std::vector<double>& fwd, std::vector<double>& bwd) {
  const std::size_t N = s.size() - 1;
  std::vector<double> cell(N);
  for (std::size_t i = 0; i < N; ++i) {
    QuadRule q = gauss_legendre(8, s[i], s[i + 1]);
    double acc = 0.0;
    for (std::size_t j = 0; j < q.x.size(); ++j) acc += q.w[j] * f(q.x[j]);
    cell[i] = acc;
  }
  fwd.assign(N + 1, 0.0);
  bwd.assign(N + 1, 0.0);
  for (std::size_t i = 0; i < N; ++i) fwd[i + 1] = fwd[i] + cell[i];
  for (std::size_t i = N; i-- > 0;) bwd[i] = bwd[i + 1] + cell[i];
}

AnnulusModeSolution flat_mode(int n, int k, double s_in, double s_out, FlatKind kind, double value_in, double value_out,
                              const ScalarFn& rhs, int samples, double gamma, int weights) {
  const LogGrid grid = log_grid(s_in, s_out, samples);
  const std::vector<double>& s = grid.s;
  const std::size_t N = s.size() - 1;
  const double q = 2.0 - n - k;
  const double kap = static_cast<double>(k) * (n - 2 + k);
  auto E = [&](double x) { return rhs ? rhs(x) : 0.0; };
  AnnulusModeSolution out;
  out.k = k;
  out.s = s;
  out.u.assign(N + 1, 0.0);
  out.du.assign(N + 1, 0.0);
  out.rhs.resize(N + 1);
  for (std::size_t i = 0; i <= N; ++i) out.rhs[i] = E(s[i]);

  if (kind == FlatKind::CauchyIn || kind == FlatKind::CauchyOut) {
    std::vector<double> f1, b1, f2, b2;
    cumulative(s, [&](double x) { return std::pow(x, k + n - 1) * E(x); }, f1, b1);
    cumulative(s, [&](double x) { return std::pow(x, q + n - 1) * E(x); }, f2, b2);
    for (std::size_t i = 0; i <= N; ++i) {
      const double A = kind == FlatKind::CauchyIn ? f1[i] : -b1[i];
      const double B = kind == FlatKind::CauchyIn ? f2[i] : -b2[i];
      out.u[i] = (std::pow(s[i], q) * A - std::pow(s[i], k) * B) / (q - k);
      out.du[i] = (q * std::pow(s[i], q - 1) * A - k * std::pow(s[i], k - 1) * B) / (q - k);
    }
  } else {
    const double c1 = std::pow(s_in, 2.0 * k + n - 2), c2 = std::pow(s_out, 2.0 - n - 2.0 * k);
    auto hin = [&](double x) { return std::pow(x, k) - c1 * std::pow(x, q); };
    auto hout = [&](double x) { return std::pow(x, q) - c2 * std::pow(x, k); };
    auto dhin = [&](double x) { return k * std::pow(x, k - 1) - c1 * q * std::pow(x, q - 1); };
    auto dhout = [&](double x) { return q * std::pow(x, q - 1) - c2 * k * std::pow(x, k - 1); };
    const double C = (2.0 - n - 2.0 * k) * (1.0 - c1 * c2);
    std::vector<double> fa, ba, fb, bb;
    cumulative(s, [&](double x) { return hin(x) * std::pow(x, n - 1) * E(x); }, fa, ba);
    cumulative(s, [&](double x) { return hout(x) * std::pow(x, n - 1) * E(x); }, fb, bb);
    const double hin_out = hin(s_out), hout_in = hout(s_in);
    for (std::size_t i = 0; i <= N; ++i) {
      const double x = s[i];
      out.u[i] = (hout(x) * fa[i] + hin(x) * bb[i]) / C + value_out * hin(x) / hin_out + value_in * hout(x) / hout_in;
      out.du[i] =
          (dhout(x) * fa[i] + dhin(x) * bb[i]) / C + value_out * dhin(x) / hin_out + value_in * dhout(x) / hout_in;
    }
    out.u.front() = value_in;
    out.u.back() = value_out;
  }

  auto fsol = [&](double x) {
    return weights == 0 ? 1.0 : weights > 0 ? std::pow(x, gamma) : std::pow(x, 2.0 - n - gamma);
  };
  auto frhs = [&](double x) {
    return weights == 0 ? 1.0 : weights > 0 ? std::pow(x, gamma - 2) : std::pow(x, -n - gamma);
  };
  double num_res = 0.0, den_res = 0.0;
  for (std::size_t i = 2; i + 2 <= N; ++i) {
    const double x = s[i];
    const double d2 = diff5(out.du, i, grid.dx) / x;
    const double res = d2 + (n - 1) / x * out.du[i] - kap / (x * x) * out.u[i] - out.rhs[i];
    const double scale = std::abs(d2) + std::abs((n - 1) / x * out.du[i]) + std::abs(kap / (x * x) * out.u[i]) +
                         std::abs(out.rhs[i]);
    num_res = std::max(num_res, std::abs(res) / frhs(x));
    den_res = std::max(den_res, scale / frhs(x));
  }
  out.residual = den_res > 0 ? num_res / den_res : 0.0;
  double s0 = 0.0, s1 = 0.0, e0 = 0.0;
  for (std::size_t i = 0; i <= N; ++i) {
    s0 = std::max(s0, std::abs(out.u[i]) / fsol(s[i]));
    s1 = std::max(s1, s[i] * std::abs(out.du[i]) / fsol(s[i]));
    e0 = std::max(e0, std::abs(out.rhs[i]) / frhs(s[i]));
  }
  out.solution_norm = s0 + s1;
  out.rhs_norm = e0;
  out.norm_ratio = e0 > 0 ? out.solution_norm / e0 : 0.0;
  out.value_in = out.u.front();
  out.value_out = out.u.back();
  return out;
}

void check_annulus(int n, double s_in, double s_out) {
  if (n < 2) throw Error(ErrorKind::Parameter, "n must be at least 2");
  if (!(s_in > 0.0) || !(s_in < s_out))
    throw Error(ErrorKind::Parameter, "annulus needs 0 < s_in < s_out (got " + num(s_in) + ", " + num(s_out) + ")");
}

}  // namespace

AnnulusSolution flat_annulus_solve(const AnnulusProblem& pb, DecayClass decay) {
  if (!(pb.gamma > 1.0 && pb.gamma < 2.0))
    throw Error(ErrorKind::Parameter, "gamma = " + num(pb.gamma) + " outside (1, 2)");
  check_annulus(pb.n, pb.s_in, pb.s_out);
  for (const AnnulusMode& m : pb.modes)
    if (m.k < 0) throw Error(ErrorKind::Parameter, "negative mode index");
  std::vector<std::future<AnnulusModeSolution>> jobs;
  for (const AnnulusMode& m : pb.modes) {
    FlatKind kind = FlatKind::Dirichlet;
    if (m.k <= 1) kind = decay == DecayClass::Out ? FlatKind::CauchyIn : FlatKind::CauchyOut;
    const int w = decay == DecayClass::Out ? 1 : -1;
    jobs.push_back(std::async(std::launch::async, [&pb, m, kind, w] {
      return flat_mode(pb.n, m.k, pb.s_in, pb.s_out, kind, 0.0, 0.0, m.rhs, pb.samples, pb.gamma, w);
    }));
  }
  AnnulusSolution sol;
  sol.decay = decay;
  for (auto& j : jobs) {
    sol.modes.push_back(j.get());
    sol.max_residual = std::max(sol.max_residual, sol.modes.back().residual);
    sol.max_norm_ratio = std::max(sol.max_norm_ratio, sol.modes.back().norm_ratio);
  }
  return sol;
}

AnnulusModeSolution flat_mode_dirichlet(int n, int k, double s_in, double s_out, double value_in, double value_out,
                                        const ScalarFn& rhs, int samples) {
  check_annulus(n, s_in, s_out);
  if (k < 0) throw Error(ErrorKind::Parameter, "negative mode index");
  return flat_mode(n, k, s_in, s_out, FlatKind::Dirichlet, value_in, value_out, rhs, samples, 1.5, 0);
}

// Decay profiles ---------------------------------------------------------------------------------

DecayComparison decay_profile(std::shared_ptr<const DelaunayProfile> profile, double b, double lambda, int mode,
                              bool at_out, double step) {
  if (mode < 0) throw Error(ErrorKind::Parameter, "negative mode index");
  const ModeRegion L = lambda_region(profile, b);
  const int n = profile->n();
  const int k = mode == 0 ? 0 : 1;
  ModeOperator op(L.geometry, k, lambda);
  ModeProblem pb;
  pb.t_out = L.t0;
  pb.t_in = L.t1;
  pb.value_out = at_out ? 1.0 : 0.0;
  pb.value_in = at_out ? 0.0 : 1.0;
  pb.step = step;
  DecayComparison dc;
  dc.solution = solve_mode(op, pb);
  const ModeSolution& S = dc.solution;
  const std::size_t N = S.t.size() - 1;
  dc.r_out = S.R.front();
  dc.r_in = S.R.back();
  dc.s.assign(N + 1, 0.0);
  dc.s[N] = dc.r_in;
  for (std::size_t i = N; i-- > 0;) {
    QuadRule q = gauss_legendre(6, S.t[i], S.t[i + 1]);
    double acc = 0.0;
    for (std::size_t j = 0; j < q.x.size(); ++j) acc += q.w[j] * profile->state(q.x[j]).r;
    dc.s[i] = dc.s[i + 1] + acc;
  }
  dc.s_in = dc.s[N];
  dc.s_out = dc.s[0];
  const double si = dc.s_in, so = dc.s_out;
  dc.model.resize(N + 1);
  dc.dmodel.resize(N + 1);
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i <= N; ++i) {
    const double x = dc.s[i];
    double V, dV;
    if (k == 0) {
      const double den = std::pow(so, 2 - n) - std::pow(si, 2 - n);
      V = (std::pow(x, 2 - n) - std::pow(si, 2 - n)) / den;
      dV = (2 - n) * std::pow(x, 1 - n) / den;
      if (!at_out) {
        V = 1.0 - V;
        dV = -dV;
      }
    } else if (at_out) {
      const double den = so - std::pow(si, n) * std::pow(so, 1 - n);
      V = (x - std::pow(si, n) * std::pow(x, 1 - n)) / den;
      dV = (1.0 - (1 - n) * std::pow(si, n) * std::pow(x, -n)) / den;
    } else {
      const double den = std::pow(si, 1 - n) - std::pow(so, -n) * si;
      V = (std::pow(x, 1 - n) - std::pow(so, -n) * x) / den;
      dV = ((1 - n) * std::pow(x, -n) - std::pow(so, -n)) / den;
    }
    dc.model[i] = V;
    dc.dmodel[i] = -S.R[i] * dV;
    const double r = S.R[i];
    double f = 1.0;
    if (k == 0 && !at_out) f = std::pow(dc.r_in / r, n - 2);
    if (k == 1 && at_out) f = r;
    if (k == 1 && !at_out) f = std::pow(dc.r_in / r, n - 1);
    d0 = std::max(d0, std::abs(S.u[i] - V) / f);
    d1 = std::max(d1, std::abs(S.du[i] - dc.dmodel[i]) / f);
  }
  dc.weight = k == 0 ? (at_out ? "1" : "(r_in/r)^(n-2)") : (at_out ? "r" : "(r_in/r)^(n-1)");
  dc.distance = d0 + d1;
  return dc;
}

// Coercivity -------------------------------------------------------------------------------------

double rayleigh_quotient(const ModeRegion& region, const TrialField& field, const CoercivityOptions& opts) {
  const int n = region.geometry.n();
  if (field.terms.empty()) throw Error(ErrorKind::Parameter, "empty trial field");
  const QuadRule q = composite_gauss(region.t0, region.t1, opts.panels, opts.order);
  std::vector<GeometryCoefficients> geo(q.x.size());
  for (std::size_t j = 0; j < q.x.size(); ++j) geo[j] = region.geometry.at(q.x[j]);
  double energy = 0.0, high = 0.0, low = 0.0;
  for (const TrialTerm& term : field.terms) {
    if (term.degree < 0 || !term.f || !term.df) throw Error(ErrorKind::Parameter, "malformed trial term");
    const double kap = static_cast<double>(term.degree) * (n - 2 + term.degree);
    double fmax = 0.0, e = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < q.x.size(); ++j) {
      const GeometryCoefficients& c = geo[j];
      const double f = term.f(q.x[j]), df = term.df(q.x[j]);
      fmax = std::max(fmax, std::abs(f));
      const double m = c.density(n);
      e += q.w[j] * (c.stiffness(n) * df * df + m * (kap / (c.R * c.R) - c.A2) * f * f);
      m2 += q.w[j] * m * f * f;
    }
    const double ends = std::max(std::abs(term.f(region.t0)), std::abs(term.f(region.t1)));
    if (ends > 1e-10 * std::max(fmax, 1e-300))
      throw Error(ErrorKind::Parameter, "trial term of degree " + std::to_string(term.degree) +
                                            " does not vanish on the region boundary (" + num(ends) + ")");
    if (term.degree <= 1) {
      low += m2;
    } else {
      high += m2;
      energy += e;
    }
  }
  if (!(high + low > 0.0)) throw Error(ErrorKind::Parameter, "zero trial field");
  const double contamination = std::sqrt(low / (high + low));
  if (contamination > opts.contamination_tol)
    throw Error(ErrorKind::Projection, "trial field has low-mode (degree <= 1) part " + num(contamination) +
                                           " above " + num(opts.contamination_tol));
  return energy / high;
}

CoercivityReport coercivity_certificate(const ModeRegion& region, const std::vector<TrialField>& trials,
                                        const CoercivityOptions& opts) {
  CoercivityReport rep;
  rep.region = region.label;
  rep.minimum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    rep.quotients.push_back(rayleigh_quotient(region, trials[i], opts));
    if (rep.quotients.back() < rep.minimum) {
      rep.minimum = rep.quotients.back();
      rep.argmin = i;
    }
  }
  return rep;
}

std::vector<TrialField> random_high_mode_trials(const ModeRegion& region, int count, std::uint64_t seed, int k_max,
                                                int sines) {
  if (k_max < 2) throw Error(ErrorKind::Parameter, "k_max must be at least 2");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nterms(1, 4), degree(2, k_max);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double t0 = region.t0, len = region.t1 - region.t0;
  std::vector<TrialField> out;
  for (int c = 0; c < count; ++c) {
    TrialField F;
    const int terms = nterms(rng);
    for (int j = 0; j < terms; ++j) {
      std::vector<double> a(sines);
      for (int m = 0; m < sines; ++m) a[m] = gauss(rng) / (m + 1);
      TrialTerm T;
      T.degree = degree(rng);
      T.f = [a, t0, len](double t) {
        double v = 0.0;
        for (std::size_t m = 0; m < a.size(); ++m) v += a[m] * std::sin((m + 1) * M_PI * (t - t0) / len);
        return v;
      };
      T.df = [a, t0, len](double t) {
        double v = 0.0;
        for (std::size_t m = 0; m < a.size(); ++m)
          v += a[m] * (m + 1) * M_PI / len * std::cos((m + 1) * M_PI * (t - t0) / len);
        return v;
      };
      F.terms.push_back(std::move(T));
    }
    out.push_back(std::move(F));
  }
  return out;
}

// Approximate kernel -----------------------------------------------------------------------------

namespace {

struct Discretization {
  Eigen::VectorXd diag, sub, m;
  double h = 0.0;
};

Discretization discretize(const ModeRegion& region, int k, int N) {
  const int n = region.geometry.n();
  const double kap = static_cast<double>(k) * (n - 2 + k);
  Discretization D;
  D.h = (region.t1 - region.t0) / N;
  const int M = N - 1;
  std::vector<double> a(N);
  for (int i = 0; i < N; ++i) a[i] = region.geometry.at(region.t0 + (i + 0.5) * D.h).stiffness(n);
  D.diag.resize(M);
  D.sub.resize(std::max(0, M - 1));
  D.m.resize(M);
  std::vector<double> c(M);
  for (int i = 1; i <= N - 1; ++i) {
    const GeometryCoefficients g = region.geometry.at(region.t0 + i * D.h);
    D.m[i - 1] = g.density(n);
    c[i - 1] = D.m[i - 1] * (g.A2 - kap / (g.R * g.R));
  }
  const double h2 = D.h * D.h;
  for (int i = 0; i < M; ++i) D.diag[i] = ((a[i] + a[i + 1]) / h2 - c[i]) / D.m[i];
  for (int i = 0; i + 1 < M; ++i) D.sub[i] = -a[i + 1] / h2 / std::sqrt(D.m[i] * D.m[i + 1]);
  return D;
}

/// Lowest `count` eigenvalues of the symmetric tridiagonal matrix by bisection (LAPACK dstebz).
Eigen::VectorXd lowest_eigenvalues(const Discretization& D, int count) {
  const lapack_int M = static_cast<lapack_int>(D.diag.size());
  const lapack_int iu = std::min<lapack_int>(count, M);
  lapack_int found = 0, nsplit = 0;
  Eigen::VectorXd w(M);
  std::vector<lapack_int> iblock(M), isplit(M);
  const lapack_int info = LAPACKE_dstebz('I', 'E', M, 0.0, 0.0, 1, iu, 0.0, D.diag.data(), D.sub.data(), &found,
                                         &nsplit, w.data(), iblock.data(), isplit.data());
  if (info != 0) throw Error(ErrorKind::Resolution, "tridiagonal bisection failed (info " + std::to_string(info) + ")");
  return w.head(found);
}

/// Inverse iteration on the symmetric tridiagonal matrix near mu (Thomas algorithm).
Eigen::VectorXd inverse_iteration(const Discretization& D, double mu) {
  const Eigen::Index M = D.diag.size();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(M), cp(M), dp(M);
  for (int it = 0; it < 4; ++it) {
    double b0 = D.diag[0] - mu;
    cp[0] = M > 1 ? D.sub[0] / b0 : 0.0;
    dp[0] = x[0] / b0;
    for (Eigen::Index i = 1; i < M; ++i) {
      const double den = D.diag[i] - mu - D.sub[i - 1] * cp[i - 1];
      cp[i] = i + 1 < M ? D.sub[i] / den : 0.0;
      dp[i] = (x[i] - D.sub[i - 1] * dp[i - 1]) / den;
    }
    x[M - 1] = dp[M - 1];
    for (Eigen::Index i = M - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    x /= x.norm();
  }
  return x;
}

struct ModeWork {
  ModeSpectrum spec;
  std::vector<double> distances;
  int kernel_coarse = 0, kernel_fine = 0, window_coarse = 0, window_fine = 0;
};

}  // namespace

SpectrumReport approximate_kernel(const ModeRegion& region, const KernelOptions& opts) {
  const int n = region.geometry.n();
  if (!(opts.h > 0.0) || !(opts.epsilon > 0.0) || !(opts.window >= opts.epsilon))
    throw Error(ErrorKind::Parameter, "kernel options need h > 0 and 0 < epsilon <= window");
  const int N = std::max(16, static_cast<int>(std::lround((region.t1 - region.t0) / opts.h)));
  const double omt = sphere_volume(n) / (n + 1);
  const double om1 = sphere_volume(n - 1);

  auto run = [&](int k) {
    ModeWork w;
    w.spec.k = k;
    w.spec.multiplicity = harmonic_multiplicity(n, k);
    const Discretization Dc = discretize(region, k, N), Df = discretize(region, k, 2 * N);
    const Eigen::VectorXd ec = lowest_eigenvalues(Dc, 8), ef = lowest_eigenvalues(Df, 8);
    const Eigen::Index keep = std::min(ec.size(), ef.size());
    for (Eigen::Index j = 0; j < keep; ++j) {
      w.spec.coarse.push_back(ec[j]);
      w.spec.fine.push_back(ef[j]);
      w.spec.eigenvalues.push_back((4.0 * ef[j] - ec[j]) / 3.0);
    }
    auto count = [&](const Eigen::VectorXd& e, double lim) {
      int c = 0;
      for (Eigen::Index j = 0; j < e.size(); ++j) c += std::abs(e[j]) <= lim;
      return c;
    };
    w.kernel_coarse = count(ec, opts.epsilon);
    w.kernel_fine = count(ef, opts.epsilon);
    w.window_coarse = count(ec, opts.window);
    w.window_fine = count(ef, opts.window);
    if (k <= 1) {
      for (std::size_t j = 0; j < w.spec.eigenvalues.size(); ++j) {
        if (std::abs(w.spec.eigenvalues[j]) > opts.epsilon) continue;
        const Eigen::VectorXd y = inverse_iteration(Df, ef[static_cast<Eigen::Index>(j)] + 1e-9);
        const double scale = 1.0 / std::sqrt(Df.h);
        double dp = 0.0, dm = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
          const GeometryCoefficients g = region.geometry.at(region.t0 + (i + 1) * Df.h);
          const double f = scale * y[i] / std::sqrt(Df.m[i]);
          const double F = k == 0 ? std::sqrt(om1 / omt) * g.nu_axial : std::sqrt(om1 / (n * omt)) * g.nu_radial;
          dp += Df.h * Df.m[i] * (f - F) * (f - F);
          dm += Df.h * Df.m[i] * (f + F) * (f + F);
        }
        w.distances.push_back(std::sqrt(std::min(dp, dm)));
      }
    }
    return w;
  };

  std::vector<std::future<ModeWork>> jobs;
  for (int k = 0; k <= opts.k_max; ++k) jobs.push_back(std::async(std::launch::async, run, k));
  SpectrumReport rep;
  rep.region = region.label;
  rep.n = n;
  rep.epsilon = opts.epsilon;
  rep.window = opts.window;
  bool done = false;
  for (auto& j : jobs) {
    ModeWork w = j.get();
    if (done) continue;
    const int mult = w.spec.multiplicity;
    for (double e : w.spec.eigenvalues) {
      rep.kernel_count += mult * (std::abs(e) <= opts.epsilon);
      rep.window_count += mult * (std::abs(e) <= opts.window);
    }
    rep.kernel_count_coarse += mult * w.kernel_coarse;
    rep.kernel_count_fine += mult * w.kernel_fine;
    rep.window_count_coarse += mult * w.window_coarse;
    rep.window_count_fine += mult * w.window_fine;
    for (double d : w.distances) rep.kernel_distance.push_back(d);
    done = !w.spec.eigenvalues.empty() && w.spec.eigenvalues.front() > opts.window;
    rep.modes.push_back(std::move(w.spec));
  }
  rep.truncated = !done;
  rep.stable = rep.kernel_count_coarse == rep.kernel_count_fine && rep.window_count_coarse == rep.window_count_fine &&
               rep.kernel_count == rep.kernel_count_fine && rep.window_count == rep.window_count_fine;
  return rep;
}

std::string SpectrumReport::to_text() const {
  std::ostringstream os;
  os.precision(8);
  os << "region " << region << "  n " << n << "  epsilon " << epsilon << "  window " << window << '\n';
  for (const ModeSpectrum& m : modes) {
    os << "mode " << m.k << " (multiplicity " << m.multiplicity << "):";
    for (double e : m.eigenvalues) os << ' ' << e;
    os << '\n';
  }
  os << "count in [-epsilon, epsilon]: " << kernel_count << " (h: " << kernel_count_coarse
     << ", h/2: " << kernel_count_fine << ")\n";
  os << "count in [-window, window]: " << window_count << " (h: " << window_count_coarse
     << ", h/2: " << window_count_fine << ")\n";
  os << "stable: " << (stable ? "yes" : "no") << "  truncated: " << (truncated ? "yes" : "no") << '\n';
  os << "kernel eigenfunction L2 distance to F-hat:";
  for (double d : kernel_distance) os << ' ' << d;
  os << '\n';
  return os.str();
}

nlohmann::json SpectrumReport::to_json() const {
  nlohmann::json j;
  j["region"] = region;
  j["n"] = n;
  j["epsilon"] = epsilon;
  j["window"] = window;
  j["modes"] = nlohmann::json::array();
  for (const ModeSpectrum& m : modes)
    j["modes"].push_back(
        {{"k", m.k}, {"multiplicity", m.multiplicity}, {"eigenvalues", m.eigenvalues}, {"coarse", m.coarse}, {"fine", m.fine}});
  j["kernel_count"] = kernel_count;
  j["window_count"] = window_count;
  j["kernel_count_coarse"] = kernel_count_coarse;
  j["kernel_count_fine"] = kernel_count_fine;
  j["window_count_coarse"] = window_count_coarse;
  j["window_count_fine"] = window_count_fine;
  j["stable"] = stable;
  j["truncated"] = truncated;
  j["kernel_distance"] = kernel_distance;
  return j;
}

// Quadratic remainder ----------------------------------------------------------------------------

QuadraticReport quadratic_check(const ModeRegion& region, const ScalarFn& phi, const QuadraticOptions& opts) {
  const RevolutionGeometry& G = region.geometry;
  const int n = G.n();
  const double h = opts.fd_step;
  if (!(h > 0.0) || region.t1 - region.t0 < 8 * h || opts.samples < 2 || opts.levels < 1)
    throw Error(ErrorKind::Resolution, "region [" + num(region.t0) + ", " + num(region.t1) +
                                           "] too short for the difference stencil of step " + num(h));
  auto displaced = [&](double t, double eps) {
    const MeridianJets m = G.jets(t);
    const GeometryCoefficients c = G.at(t);
    const double f = eps * phi(t);
    return std::array<double, 2>{m.K.v + f * c.nu_axial, m.R.v + f * c.nu_radial};
  };
  auto H_at = [&](double t, double eps) {
    std::array<std::array<double, 2>, 5> P;
    for (int j = 0; j < 5; ++j) P[j] = displaced(t + (j - 2) * h, eps);
    MeridianJets m;
    auto jet = [&](int q) {
      const double d1 = (P[0][q] - 8 * P[1][q] + 8 * P[3][q] - P[4][q]) / (12 * h);
      const double d2 = (-P[0][q] + 16 * P[1][q] - 30 * P[2][q] + 16 * P[3][q] - P[4][q]) / (12 * h * h);
      return Jet{P[2][q], d1, d2};
    };
    m.K = jet(0);
    m.R = jet(1);
    return trace_mean_curvature(n, m);
  };
  ModeOperator L0(G, 0);
  QuadraticReport rep;
  double eps = opts.eps0;
  for (int l = 0; l < opts.levels; ++l, eps *= 0.5) {
    double worst = 0.0;
    for (int i = 0; i < opts.samples; ++i) {
      const double t = region.t0 + 3 * h + (region.t1 - region.t0 - 6 * h) * i / (opts.samples - 1);
      double d1, d2;
      fd5(phi, t, h, d1, d2);
      const double Lphi = L0.apply(t, phi(t), d1, d2);
      const double r = H_at(t, eps) - H_at(t, 0.0) - eps * Lphi;
      worst = std::max(worst, std::abs(r));
    }
    rep.eps.push_back(eps);
    rep.residual.push_back(worst);
    rep.ratio.push_back(worst / (eps * eps));
  }
  const auto [mn, mx] = std::minmax_element(rep.ratio.begin(), rep.ratio.end());
  rep.variation = *mn > 0 ? *mx / *mn - 1.0 : 0.0;
  return rep;
}

}  // namespace cmc
