#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cmc/graph.hpp"
#include "cmc/linear.hpp"

using namespace cmc;
using Eigen::VectorXd;

namespace {

std::shared_ptr<const DelaunayProfile> delaunay(int n, double tau) {
  static ProfileCache c;
  return c.get(n, tau);
}

ModeRegion sphere_region(int n, double T) {
  return {RevolutionGeometry::conformal(std::make_shared<SphereProfile>(n)), -T, T, "sphere"};
}

TrialField sine_field(const ModeRegion& R, int degree) {
  const double t0 = R.t0, L = R.t1 - R.t0;
  TrialField F;
  F.terms.push_back({degree, [=](double t) { return std::sin(M_PI * (t - t0) / L); },
                     [=](double t) { return M_PI / L * std::cos(M_PI * (t - t0) / L); }});
  return F;
}

/// Smooth random function g(t) = sum a_j cos(j (t - t0) / L) with a fixed seed.
ScalarFn random_smooth(double t0, double L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a(6);
  for (double& x : a) x = g(rng);
  return [=](double t) {
    double v = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) v += a[j] * std::cos(j * M_PI * (t - t0) / L) / (j + 1);
    return v;
  };
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("linear: harmonic multiplicities") {
  CHECK(harmonic_multiplicity(3, 0) == 1);
  CHECK(harmonic_multiplicity(3, 1) == 3);
  CHECK(harmonic_multiplicity(3, 2) == 5);
  CHECK(harmonic_multiplicity(3, 5) == 11);
  CHECK(harmonic_multiplicity(4, 1) == 4);
  CHECK(harmonic_multiplicity(4, 2) == 9);
  CHECK(harmonic_multiplicity(4, 3) == 16);
}

TEST_CASE("linear: geometry coefficients of the conformal and general forms agree") {
  for (int n : {3, 4}) {
    auto P = delaunay(n, 0.01);
    const RevolutionGeometry C = RevolutionGeometry::conformal(P);
    const RevolutionGeometry G = RevolutionGeometry::general(n, [&C](double t) { return C.jets(t); });
    for (double t : {0.1, 0.7, 1.9, P->p(), 2.5 * P->p()}) {
      const GeometryCoefficients a = C.at(t), b = G.at(t);
      CHECK(b.sigma == doctest::Approx(a.sigma).epsilon(1e-8));
      CHECK(b.drift == doctest::Approx(a.drift).epsilon(1e-6).scale(1.0));
      CHECK(b.A2 == doctest::Approx(a.A2).epsilon(1e-6));
      CHECK(b.nu_axial == doctest::Approx(a.nu_axial).epsilon(1e-8).scale(1.0));
      CHECK(b.nu_radial == doctest::Approx(a.nu_radial).epsilon(1e-8).scale(1.0));
      // H = 1 averaged is tr A = n.
      CHECK(trace_mean_curvature(n, C.jets(t)) == doctest::Approx(n).epsilon(1e-7));
    }
  }
  const GeometryCoefficients f = RevolutionGeometry::flat(3).at(-2.0);
  CHECK(f.drift == doctest::Approx(1.0));
  CHECK(f.A2 == 0.0);
  CHECK(f.nu_axial == doctest::Approx(1.0));
  const RevolutionGeometry S = RevolutionGeometry::conformal(std::make_shared<SphereProfile>(4));
  CHECK(S.at(0.3).A2 == doctest::Approx(4.0));
  CHECK(trace_mean_curvature(4, S.jets(0.3)) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("linear: the mode-0 kernel contains f0 = N.e1") {
  for (double tau : {0.01, 1e-4, -0.01}) {
    auto P = delaunay(3, tau);
    ModeOperator L0(RevolutionGeometry::conformal(P), 0);
    CHECK(L0.kernel_residual(0.2, 2 * P->p() - 0.2) <= 1e-5);
  }
  ModeOperator L1(RevolutionGeometry::conformal(delaunay(3, 0.01)), 1);
  CHECK_THROWS_AS(L1.kernel_residual(0.0, 1.0), Error);
  CHECK(ModeOperator(RevolutionGeometry::flat(3), 2).kappa() == 6.0);
  CHECK_THROWS_AS(ModeOperator(RevolutionGeometry::flat(3), -1), Error);
}

TEST_CASE("linear: flat mode-0 Dirichlet solution matches the closed form") {
  for (int n : {3, 4}) {
    const double si = 1e-2, so = 1.0;
    ModeOperator F0(RevolutionGeometry::flat(n), 0);
    ModeProblem pb;
    pb.t_out = std::log(so);
    pb.t_in = std::log(si);
    pb.value_out = 1.0;
    const ModeSolution S = solve_mode(F0, pb);
    double err = 0.0;
    for (std::size_t i = 0; i < S.t.size(); ++i) {
      const double s = std::exp(S.t[i]);
      const double ex = (std::pow(s, 2 - n) - std::pow(si, 2 - n)) / (std::pow(so, 2 - n) - std::pow(si, 2 - n));
      err = std::max(err, std::abs(S.u[i] - ex));
    }
    CHECK(err <= 1e-10);
    CHECK(S.u_out == 1.0);
    CHECK(S.u_in == 0.0);
    CHECK(S.residual <= 1e-8);
  }
}

TEST_CASE("linear: Dirichlet data of f0 reproduce f0, and the mode-0 Wronskian is constant") {
  auto P = delaunay(3, 0.01);
  ModeOperator L0(RevolutionGeometry::conformal(P), 0);
  ModeProblem pb;
  pb.t_out = 0.4;
  pb.t_in = 3.1;
  pb.value_out = P->state(pb.t_out).wp;
  pb.value_in = P->state(pb.t_in).wp;
  const ModeSolution S = solve_mode(L0, pb);
  double err = 0.0;
  for (std::size_t i = 0; i < S.t.size(); ++i) err = std::max(err, std::abs(S.u[i] - P->state(S.t[i]).wp));
  CHECK(err <= 1e-10);
  CHECK(S.wronskian_drift <= 1e-8);

  pb.value_out = 1.0;
  pb.value_in = -0.5;
  const ModeSolution U = solve_mode(L0, pb);
  double lo = 1e300, hi = -1e300, scale = 0.0;
  for (std::size_t i = 0; i < U.t.size(); i += 10) {
    const double w = linearized_flux(*P, U.u[i], U.du[i], U.t[i]);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    scale = std::max(scale, std::abs(w));
  }
  CHECK(scale > 1e-3);
  CHECK((hi - lo) / scale <= 1e-8);
}

TEST_CASE("linear: solve_mode is linear in the right-hand side") {
  auto P = delaunay(3, 1e-6);
  const ModeRegion L = lambda_region(P, 2.0);
  for (int k : {0, 2}) {
    for (ModeCondition cond : {ModeCondition::Dirichlet, ModeCondition::Out, ModeCondition::In}) {
      ModeOperator op(L.geometry, k);
      ModeProblem pb;
      pb.t_out = L.t0;
      pb.t_in = L.t1;
      pb.condition = cond;
      const ScalarFn e1 = random_smooth(L.t0, L.t1 - L.t0, 7), e2 = [](double t) { return std::sin(3 * t); };
      pb.rhs = e1;
      const ModeSolution a = solve_mode(op, pb);
      pb.rhs = e2;
      const ModeSolution b = solve_mode(op, pb);
      pb.rhs = [&](double t) { return e1(t) + e2(t); };
      const ModeSolution c = solve_mode(op, pb);
      std::vector<double> sum(a.u.size());
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = a.u[i] + b.u[i];
      CHECK_MESSAGE(max_abs_diff(c.u, sum) <= 1e-10 * std::max(1.0, max_abs(c.u)),
                    "k=" << k << " condition " << to_string(cond));
    }
  }
}

TEST_CASE("linear: decay classes on Lambda meet their boundary conditions and norm ratios are stable") {
  const double gamma = 1.5;
  std::vector<double> out_ratio, in_ratio;
  for (double tau : {1e-6, 1e-8, 1e-10, 1e-12, 1e-14}) {
    auto P = delaunay(3, tau);
    const ModeRegion L = lambda_region(P, 3.0);
    const ScalarFn g = random_smooth(L.t0, 5.0, 11);
    ModeOperator op(L.geometry, 2);
    ModeProblem pb;
    pb.t_out = L.t0;
    pb.t_in = L.t1;
    pb.gamma = gamma;
    pb.condition = ModeCondition::Out;
    pb.rhs = [&](double t) { return std::pow(P->state(t).r, gamma - 2) * g(t); };
    const ModeSolution so = solve_mode(op, pb);
    CHECK(so.residual <= 1e-8);
    CHECK(so.u_in == 0.0);
    CHECK(so.u_out == 0.0);
    out_ratio.push_back(so.norm_ratio);

    pb.condition = ModeCondition::In;
    pb.rhs = [&](double t) { return std::pow(P->state(t).r, -3 - gamma) * g(t); };
    const ModeSolution si = solve_mode(op, pb);
    CHECK(si.residual <= 1e-8);
    in_ratio.push_back(si.norm_ratio);

    // Low modes: zero Cauchy data on the vanishing side only.
    for (int k : {0, 1}) {
      ModeOperator lo(L.geometry, k);
      pb.condition = ModeCondition::Out;
      pb.rhs = [&](double t) { return std::pow(P->state(t).r, gamma - 2) * g(t); };
      const ModeSolution a = solve_mode(lo, pb);
      CHECK(a.u_in == 0.0);
      CHECK(a.du_in == 0.0);
      CHECK(a.residual <= 1e-8);
      CHECK(std::isfinite(a.norm_ratio));
      pb.condition = ModeCondition::In;
      pb.rhs = [&](double t) { return std::pow(P->state(t).r, -3 - gamma) * g(t); };
      const ModeSolution b = solve_mode(lo, pb);
      CHECK(b.u_out == 0.0);
      CHECK(b.du_out == 0.0);
      CHECK(b.residual <= 1e-8);
    }
  }
  for (const auto* v : {&out_ratio, &in_ratio}) {
    const auto [mn, mx] = std::minmax_element(v->begin(), v->end());
    CHECK(*mn > 0.0);
    CHECK(*mx / *mn <= 2.0);
  }
}

TEST_CASE("linear: resonance and shift preconditions") {
  auto P = delaunay(3, 0.01);
  const ModeRegion Sp = s_tilde_plus(P, 0.0);
  // f0 = w' vanishes at both necks, so L_0 has a Dirichlet eigenvalue ~ 0 on S~+.
  ModeProblem pb;
  pb.t_out = Sp.t0;
  pb.t_in = Sp.t1;
  pb.value_out = 1.0;
  CHECK_THROWS_AS(solve_mode(ModeOperator(Sp.geometry, 0), pb), Error);
  try {
    solve_mode(ModeOperator(Sp.geometry, 0), pb);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Resonance);
  }
  CHECK_NOTHROW(solve_mode(ModeOperator(Sp.geometry, 2), pb));

  auto Q = delaunay(3, 1e-8);
  const ModeRegion L = lambda_region(Q, 3.0);
  const double r_out = Q->state(L.t0).r;
  pb.t_out = L.t0;
  pb.t_in = L.t1;
  CHECK_NOTHROW(solve_mode(ModeOperator(L.geometry, 0, 0.9 / (4 * r_out)), pb));
  CHECK_THROWS_AS(solve_mode(ModeOperator(L.geometry, 0, 1.0 / (4 * r_out)), pb), Error);
  CHECK_THROWS_AS(solve_mode(ModeOperator(L.geometry, 0, -1.1 / (4 * r_out)), pb), Error);
  pb.step = 0.0;
  CHECK_THROWS_AS(solve_mode(ModeOperator(L.geometry, 0), pb), Error);
}

TEST_CASE("linear: flat annulus homogeneous solutions are s^k and s^(2-n-k)") {
  const double si = 1e-3, so = 1.0;
  for (int n : {3, 4}) {
    for (int k : {0, 1, 2, 5}) {
      const double q = 2.0 - n - k;
      const AnnulusModeSolution a = flat_mode_dirichlet(n, k, si, so, std::pow(si, k), std::pow(so, k));
      const AnnulusModeSolution b = flat_mode_dirichlet(n, k, si, so, std::pow(si, q), std::pow(so, q));
      double ea = 0.0, eb = 0.0;
      for (std::size_t i = 0; i < a.s.size(); ++i) {
        ea = std::max(ea, std::abs(a.u[i] / std::pow(a.s[i], k) - 1.0));
        eb = std::max(eb, std::abs(b.u[i] / std::pow(b.s[i], q) - 1.0));
      }
      CHECK_MESSAGE(ea <= 1e-10, "n=" << n << " k=" << k);
      CHECK_MESSAGE(eb <= 1e-10, "n=" << n << " k=" << k);
    }
  }
  // The same data through the shooting solver on the log-polar flat geometry.
  ModeOperator F2(RevolutionGeometry::flat(3), 2);
  ModeProblem pb;
  pb.t_out = std::log(so);
  pb.t_in = std::log(si);
  pb.value_out = 1.0;
  pb.value_in = si * si;
  const ModeSolution S = solve_mode(F2, pb);
  double err = 0.0;
  for (std::size_t i = 0; i < S.t.size(); ++i) err = std::max(err, std::abs(S.u[i] / std::exp(2 * S.t[i]) - 1.0));
  CHECK(err <= 1e-10);
}

TEST_CASE("linear: flat annulus decay classes") {
  const int n = 3;
  const double gamma = 1.5;
  AnnulusProblem pb;
  pb.n = n;
  pb.gamma = gamma;
  pb.modes = {{0, {}}};
  for (double g : {1.0, 2.0, 0.5, 2.5}) {
    AnnulusProblem bad = pb;
    bad.gamma = g;
    CHECK_THROWS_AS(flat_annulus_solve(bad, DecayClass::Out), Error);
  }
  std::vector<std::vector<double>> out_ratios(3), in_ratios(3);
  for (double si : {1e-2, 1e-3, 1e-4}) {
    pb.s_in = si;
    pb.modes.clear();
    for (int k : {0, 1, 2}) pb.modes.push_back({k, [=](double s) { return std::pow(s, gamma - 2); }});
    const AnnulusSolution o = flat_annulus_solve(pb, DecayClass::Out);
    CHECK(o.max_residual <= 1e-8);
    for (std::size_t j = 0; j < o.modes.size(); ++j) {
      const AnnulusModeSolution& m = o.modes[j];
      CHECK(std::abs(m.value_in) <= 1e-10);
      if (m.k >= 2) CHECK(std::abs(m.value_out) <= 1e-10);
      out_ratios[j].push_back(m.norm_ratio);
    }
    // Closed form for mode 0: u = s^g/(g(g+n-2)) + A + B s^{2-n} with zero Cauchy data at s_in.
    {
      const double c = 1.0 / (gamma * (gamma + n - 2));
      const double B = c * gamma * std::pow(si, gamma + n - 2) / (n - 2);
      const double A = -c * std::pow(si, gamma) - B * std::pow(si, 2 - n);
      const AnnulusModeSolution& m = o.modes[0];
      double err = 0.0;
      for (std::size_t i = 0; i < m.s.size(); ++i) {
        const double s = m.s[i];
        err = std::max(err, std::abs(m.u[i] - (c * std::pow(s, gamma) + A + B * std::pow(s, 2 - n))) / std::pow(s, gamma));
      }
      CHECK(err <= 1e-10);
    }

    pb.modes.clear();
    for (int k : {0, 1, 2}) pb.modes.push_back({k, [=](double s) { return std::pow(s, -n - gamma); }});
    const AnnulusSolution in = flat_annulus_solve(pb, DecayClass::In);
    CHECK(in.max_residual <= 1e-8);
    for (std::size_t j = 0; j < in.modes.size(); ++j) {
      const AnnulusModeSolution& m = in.modes[j];
      CHECK(std::abs(m.value_out) <= 1e-10);
      if (m.k >= 2) CHECK(std::abs(m.value_in) <= 1e-10);
      in_ratios[j].push_back(m.norm_ratio);
    }
  }
  for (const auto& set : {out_ratios, in_ratios})
    for (const auto& v : set) {
      const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
      CHECK(*mn > 0.0);
      CHECK(*mx / *mn <= 2.0);
    }
}

TEST_CASE("linear: high-mode right-hand sides stay orthogonal to H1 on both boundaries") {
  AnnulusProblem pb;
  pb.s_in = 1e-3;
  pb.modes = {{2, [](double s) { return std::cos(5 * std::log(s)); }}, {3, [](double s) { return s; }}};
  for (DecayClass d : {DecayClass::Out, DecayClass::In}) {
    const AnnulusSolution S = flat_annulus_solve(pb, d);
    for (const AnnulusModeSolution& m : S.modes) {
      CHECK(m.value_in == 0.0);
      CHECK(m.value_out == 0.0);
    }
  }
}

TEST_CASE("linear: decay profiles approach the flat model") {
  auto P = delaunay(3, 1e-12);
  for (int mode : {0, 1}) {
    for (bool at_out : {true, false}) {
      std::vector<double> d;
      for (double b : {3.0, 4.0, 5.0}) {
        const DecayComparison c = decay_profile(P, b, 0.0, mode, at_out);
        d.push_back(c.distance);
        CHECK(std::isfinite(c.distance));
        CHECK(c.solution.u_out == (at_out ? 1.0 : 0.0));
        CHECK(c.solution.u_in == (at_out ? 0.0 : 1.0));
        CHECK(c.s_in == c.r_in);
        CHECK(std::abs(c.s_out / c.r_out - 1.0) <= 0.05);
      }
      CHECK_MESSAGE(d[1] < d[0], "mode " << mode << " at_out " << at_out);
      CHECK_MESSAGE(d[2] < d[1], "mode " << mode << " at_out " << at_out);
      CHECK(d[2] <= 1e-2);
    }
  }
  const DecayComparison c = decay_profile(P, 4.0, 0.0, 1, false);
  CHECK(c.weight == "(r_in/r)^(n-1)");
  const DecayComparison s = decay_profile(P, 4.0, 0.1, 0, true);
  CHECK(s.distance <= 1e-2);
  CHECK_THROWS_AS(decay_profile(P, 4.0, 1.0 / (4 * s.r_out), 0, true), Error);
  CHECK_THROWS_AS(decay_profile(P, 8.0, 0.0, 0, true), Error);
}

TEST_CASE("linear: coercivity on high harmonics") {
  auto P = delaunay(3, 0.01);
  for (const ModeRegion& R : {s_tilde_plus(P, 0.0), s_tilde_minus(P, 0.0)}) {
    CHECK(rayleigh_quotient(R, sine_field(R, 2)) >= 1.0);
    const CoercivityReport rep = coercivity_certificate(R, random_high_mode_trials(R, 100, 2024));
    CHECK(rep.quotients.size() == 100);
    CHECK(rep.minimum >= 1.0);
  }
  // On S~+ every quotient is bounded below by the lowest degree-2 Dirichlet eigenvalue.
  const ModeRegion Sp = s_tilde_plus(P, 0.0);
  const CoercivityReport rep = coercivity_certificate(Sp, random_high_mode_trials(Sp, 20, 5));
  CHECK(rep.minimum >= 5.1385946 - 1e-6);

  TrialField dirty = sine_field(Sp, 2);
  TrialField low = sine_field(Sp, 1);
  auto contaminate = [&](double amp) {
    TrialField f = dirty;
    TrialTerm t = low.terms[0];
    ScalarFn f0 = t.f, d0 = t.df;
    t.f = [=](double x) { return amp * f0(x); };
    t.df = [=](double x) { return amp * d0(x); };
    f.terms.push_back(t);
    return f;
  };
  CHECK_NOTHROW(rayleigh_quotient(Sp, contaminate(1e-12)));
  try {
    rayleigh_quotient(Sp, contaminate(1e-6));
    FAIL("expected a projection error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Projection);
  }
  TrialField open;
  open.terms.push_back({2, [](double) { return 1.0; }, [](double) { return 0.0; }});
  CHECK_THROWS_AS(rayleigh_quotient(Sp, open), Error);
  CHECK_THROWS_AS(rayleigh_quotient(Sp, TrialField{}), Error);
}

TEST_CASE("linear: approximate kernel on S~+ at tau = 0.01") {
  auto P = delaunay(3, 0.01);
  const SpectrumReport rep = approximate_kernel(s_tilde_plus(P, 0.0));
  CHECK(rep.kernel_count == 4);
  CHECK(rep.window_count == 4);
  CHECK(rep.stable);
  CHECK_FALSE(rep.truncated);
  REQUIRE(rep.modes.size() >= 3);
  // Shooting oracle (independent ODE integration of the profile, brentq on the Dirichlet condition).
  CHECK(rep.modes[0].eigenvalues[0] == doctest::Approx(-2.9904113232).epsilon(1e-7));
  CHECK(std::abs(rep.modes[0].eigenvalues[1]) <= 1e-6);
  CHECK(rep.modes[0].eigenvalues[2] == doctest::Approx(4.9836417774).epsilon(1e-7));
  CHECK(rep.modes[1].eigenvalues[0] == doctest::Approx(0.0461686434).epsilon(1e-6));
  CHECK(rep.modes[1].multiplicity == 3);
  CHECK(rep.modes[2].eigenvalues[0] == doctest::Approx(5.1385946122).epsilon(1e-7));
  REQUIRE(rep.kernel_distance.size() == 2);
  for (double d : rep.kernel_distance) CHECK(d <= 0.1);
  // Refinement: extrapolated values are Cauchy and counts do not move.
  KernelOptions fine;
  fine.h = 1.0 / 512;
  fine.k_max = 2;
  const SpectrumReport r2 = approximate_kernel(s_tilde_plus(P, 0.0), fine);
  CHECK(r2.kernel_count == 4);
  for (int k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(r2.modes[k].eigenvalues[j] - rep.modes[k].eigenvalues[j]) <= 1e-6);
  const nlohmann::json j = rep.to_json();
  CHECK(j["kernel_count"] == 4);
  CHECK(rep.to_text().find("count in [-epsilon, epsilon]: 4") != std::string::npos);
}

TEST_CASE("linear: unit-sphere limit spectrum is -n, 0 (n+1 times), n+2") {
  for (int n : {3, 4}) {
    const SpectrumReport rep = approximate_kernel(sphere_region(n, 8.0));
    CHECK(rep.kernel_count == n + 1);
    CHECK(rep.window_count == n + 1);
    CHECK(rep.modes[0].eigenvalues[0] == doctest::Approx(-n).epsilon(1e-2));
    CHECK(std::abs(rep.modes[0].eigenvalues[1]) <= 1e-2);
    CHECK(rep.modes[0].eigenvalues[2] == doctest::Approx(n + 2).epsilon(1e-2));
    CHECK(std::abs(rep.modes[1].eigenvalues[0]) <= 1e-2);
    CHECK(rep.modes[1].eigenvalues[1] == doctest::Approx(n + 2).epsilon(1e-2));
    CHECK(rep.modes[2].eigenvalues[0] == doctest::Approx(n + 2).epsilon(2e-2));
    for (double d : rep.kernel_distance) CHECK(d <= 1e-2);
  }
}

TEST_CASE("linear: non-symmetric regions are unsupported") {
  const int n = 3;
  auto P = delaunay(n, 1e-6);
  VectorXd z = VectorXd::Zero(n + 1);
  const DelaunayBlock B0 = DelaunayBlock::ray(P, z, 0.3);
  const RevolutionGeometry G = RevolutionGeometry::block(B0);
  // Past the gluing window the block meridian is the Delaunay profile.
  const RevolutionGeometry C = RevolutionGeometry::conformal(P);
  for (double t : {B0.a() + 4.5, B0.a() + 6.0}) {
    CHECK(G.at(t).A2 == doctest::Approx(C.at(t).A2).epsilon(1e-6));
    CHECK(G.at(t).drift == doctest::Approx(C.at(t).drift).epsilon(1e-6));
  }
  // On the sphere part |A|^2 = n.
  CHECK(G.at(B0.a() + 0.5).A2 == doctest::Approx(n).epsilon(1e-10));
  z(1) = 1e-7;
  const DelaunayBlock B1 = DelaunayBlock::ray(P, z, 0.3);
  try {
    RevolutionGeometry::block(B1);
    FAIL("expected an unsupported-configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unsupported);
  }
}

TEST_CASE("linear: quadratic remainder in the trace convention") {
  for (int n : {3, 4}) {
    const QuadraticReport q = quadratic_check(sphere_region(n, 2.0), [](double) { return 1.0; });
    REQUIRE(q.ratio.size() == 3);
    for (std::size_t i = 0; i < q.ratio.size(); ++i) {
      CHECK(q.ratio[i] == doctest::Approx(n / (1.0 - q.eps[i])).epsilon(1e-5));
      CHECK(q.residual[i] == doctest::Approx(n * q.eps[i] * q.eps[i] / (1.0 - q.eps[i])).epsilon(1e-5));
    }
  }
  auto P = delaunay(3, 0.01);
  const ModeRegion R = s_tilde_plus(P, 0.0);
  QuadraticOptions o;
  o.eps0 = 1e-2;
  const QuadraticReport d = quadratic_check(R, [&](double t) { return P->state(t).wp; }, o);
  CHECK(d.eps == std::vector<double>{1e-2, 5e-3, 2.5e-3});
  CHECK(d.variation <= 0.3);
  const QuadraticReport z = quadratic_check(R, [](double) { return 0.0; });
  for (double r : z.residual) CHECK(r == 0.0);
  CHECK_THROWS_AS(quadratic_check({R.geometry, 1.0, 1.05, "short"}, [](double) { return 1.0; }), Error);
}

TEST_CASE("linear: mode CSV dump") {
  ModeOperator F0(RevolutionGeometry::flat(3), 0);
  ModeProblem pb;
  pb.t_out = 0.0;
  pb.t_in = -1.0;
  pb.value_out = 1.0;
  pb.step = 0.01;
  const ModeSolution S = solve_mode(F0, pb);
  std::ostringstream os;
  write_mode_csv(S, os);
  const std::string text = os.str();
  CHECK(text.rfind("t,u,du,weight,rhs_weight\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(S.t.size()) + 1);
  CHECK(S.value(-0.5) == doctest::Approx(S.u[50]));
}
