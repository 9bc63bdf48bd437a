#include <cmath>
#include <sstream>

#include "cmc/delaunay.hpp"
#include "doctest.h"

using namespace cmc;

namespace {
double max_H_error(const DelaunayProfile& P) {
  double m = 0.0;
  for (double t : P.nodes()) m = std::max(m, std::abs(curvature(P, t).H - 1.0));
  return m;
}
}  // namespace

TEST_CASE("extremal radii match polynomial roots") {
  // Oracle: numpy.roots of r^3 - r^2 + 0.01, r^3 + r^2 - 0.01, r^3 - r^2 - 0.01.
  CHECK(std::abs(delaunay_r_max(3, 0.01) - 0.98979268) <= 1e-8);
  CHECK(std::abs(delaunay_r_min(3, 0.01) - 0.10574745) <= 1e-8);
  CHECK(std::abs(delaunay_r_min(3, -0.01) - 0.09554014) <= 1e-8);
  CHECK(std::abs(delaunay_r_max(3, -0.01) - 1.00980671) <= 1e-8);
}

TEST_CASE("periods match an independent high-order oracle") {
  // Oracle: scipy DOP853 with event detection at the first upward zero of w' (rtol 1e-13).
  struct Row { int n; double tau, p, phat; };
  for (Row r : {Row{3, 0.1, 2.3818030951, 0.3993439216}, Row{3, 0.01, 3.4068371278, 0.1301983702},
                Row{3, -0.01, 3.2792550482, -0.1289767323}, Row{4, 0.01, 2.5135923082, 0.1537657345},
                Row{5, -0.02, 1.7177678413, -0.2851371363}}) {
    auto P = DelaunayProfile::solve(r.n, r.tau);
    CHECK(std::abs(P->p() - r.p) <= 1e-9);
    CHECK(std::abs(P->phat() - r.phat) <= 1e-9);
    CHECK(std::abs(P->p() - P->p_quadrature()) <= 1e-9);
    CHECK(std::abs(P->phat() - P->phat_quadrature()) <= 1e-9);
  }
}

TEST_CASE("H = 1 and closed-form |A|^2 along a period") {
  for (int n : {3, 4, 6})
    for (double tau : {0.05, 0.01, -0.01, -0.3}) {
      auto P = DelaunayProfile::solve(n, tau);
      CHECK(max_H_error(*P) <= 1e-10);
      for (double t : {0.0, 0.4, 1.3, P->p(), 1.7 * P->p()}) {
        CurvatureSample c = curvature(*P, t);
        CHECK(c.A2 == doctest::Approx(c.A2_closed).epsilon(1e-10));
      }
    }
  auto P = DelaunayProfile::solve(3, 0.01);
  double rm = delaunay_r_max(3, 0.01);
  CHECK(curvature(*P, 0.0).A2 == doctest::Approx(3 * (1 + 2 * 1e-4 * std::pow(rm, -6))).epsilon(1e-10));
}

TEST_CASE("H error converges at fourth order") {
  ProfileOptions o;
  o.cross_check = false;
  o.richardson_tol = 0.0;
  o.step = 0.05;
  double e1 = max_H_error(*DelaunayProfile::solve(3, 0.1, o));
  o.step = 0.025;
  double e2 = max_H_error(*DelaunayProfile::solve(3, 0.1, o));
  CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("graph-form finite differences agree with the closed form") {
  for (double tau : {0.1, 0.01, -0.01}) {
    auto P = DelaunayProfile::solve(3, tau);
    for (double t : {0.2, 0.9, 1.4}) {
      double H = curvature_graph_fd(*P, t, 1e-3);
      if (std::isfinite(H)) CHECK(std::abs(H - 1.0) <= 1e-6);
    }
  }
  SphereProfile S(3);
  CHECK(std::abs(curvature_graph_fd(S, 0.3) - 1.0) <= 1e-8);
}

TEST_CASE("profile invariants: first integral, conformality, symmetry, period shift") {
  for (double tau : {0.1, 0.01, -0.01, -0.2}) {
    auto P = DelaunayProfile::solve(3, tau);
    double p = P->p();
    for (double t = 0.0; t <= 2 * p; t += 0.0371) {
      ProfileState s = P->state(t);
      CHECK(std::abs(s.r * s.kp - s.r * s.r * s.r - tau) <= 1e-10 * std::abs(tau));
      CHECK(std::abs(s.rp * s.rp + s.kp * s.kp - s.r * s.r) <= 1e-12);
      CHECK(std::abs(s.wp * s.wp + std::pow(P->r1(s.r), 2) - 1.0) <= 1e-11);
      CHECK(std::abs(s.w - P->state(-t).w) <= 1e-10);
      CHECK(std::abs(s.w - P->state(2 * p - t).w) <= 1e-10);
      ProfileState q = P->state(t + 2 * p);
      CHECK(std::abs(q.k - s.k - (2 + 2 * P->phat())) <= 1e-10);
      CHECK(std::abs(q.r - s.r) <= 1e-12);
      if (tau > 0) CHECK(s.kp > 0.0);
    }
    CHECK(P->embedded() == (tau > 0));
    CHECK(P->state(0.0).k == 0.0);
    CHECK(std::abs(P->state(p).r - P->r_min()) <= 1e-12);
    if (tau < 0) CHECK(P->state(p).kp < 0.0);
  }
}

TEST_CASE("cylinder and parameter domain") {
  auto P = DelaunayProfile::solve(3, 4.0 / 27.0);
  CHECK(P->degenerate());
  CHECK(P->state(1.3).r == doctest::Approx(2.0 / 3.0));
  CHECK(P->state(1.3).kp == doctest::Approx(2.0 / 3.0));
  CHECK(std::abs(curvature(*P, 0.7).H - 1.0) <= 1e-12);
  CHECK_THROWS_AS(DelaunayProfile::solve(3, 0.2), Error);
  CHECK_THROWS_AS(DelaunayProfile::solve(3, 0.0), Error);
  CHECK_THROWS_AS(DelaunayProfile::solve(2, 0.01), Error);
  CHECK_THROWS_AS(SphereProfile(2), Error);
}

TEST_CASE("period cross-check detects a coarse integration") {
  ProfileOptions o;
  o.step = 0.4;
  o.tol = 1e-12;
  o.richardson_tol = 0.0;
  CHECK_THROWS_AS(DelaunayProfile::solve(3, 0.01, o), Error);
}

TEST_CASE("sphere chart") {
  SphereProfile S(4);
  for (double t : {-2.0, -0.3, 0.0, 1.1}) {
    ProfileState s = S.state(t);
    CHECK(s.k * s.k + s.r * s.r == doctest::Approx(1.0).epsilon(1e-15));
    CurvatureSample c = curvature(S, t);
    CHECK(c.H == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(c.A2 == doctest::Approx(4.0).epsilon(1e-13));
    Eigen::VectorXd th = Eigen::VectorXd::Unit(4, 1);
    CHECK((profile_normal(s, th) + profile_point(s, th)).norm() <= 1e-14);
  }
  CHECK(flux(S, 0.4).norm() <= 1e-12);
}

TEST_CASE("meridian flux equals tau omega_{n-1} e_1") {
  for (int n : {3, 4})
    for (double tau : {0.1, 0.01, -0.01}) {
      auto P = DelaunayProfile::solve(n, tau);
      double om = sphere_volume(n - 1);
      for (double t : {0.0, 0.8, P->p(), 2.9}) {
        Eigen::VectorXd F = flux(*P, t);
        CHECK(std::abs(F(0) / om - tau) <= 1e-8 * std::abs(tau));
        CHECK(F.tail(n).norm() <= 1e-12);
      }
    }
  auto C = DelaunayProfile::solve(3, 4.0 / 27.0);
  CHECK(flux(*C, 0.3)(0) / sphere_volume(2) == doctest::Approx(4.0 / 27.0).epsilon(1e-12));
}

TEST_CASE("T_n quadrature and closed form") {
  CHECK(T_constant(3) == doctest::Approx(1.311029).epsilon(1e-6));
  for (int n = 3; n <= 10; ++n) CHECK(std::abs(T_constant(n) - T_constant_closed(n)) <= 1e-9);
  for (int n = 3; n < 10; ++n) CHECK(T_constant(n + 1) < T_constant(n));
  CHECK_THROWS_AS(T_constant(2), Error);
}

TEST_CASE("Jacobi field and linearized flux") {
  auto P = DelaunayProfile::solve(3, 0.01);
  for (double t : {0.3, 1.2, 2.5}) {
    JacobiSample f = jacobi_mode0(*P, t);
    CHECK(f.value == doctest::Approx(P->state(t).wp).epsilon(1e-12));
    CHECK(std::abs(f.value + jacobi_mode0(*P, -t).value) <= 1e-12);
    CHECK(std::abs(linearized_flux(*P, f.value, f.derivative, t)) <= 1e-14);
    JacobiSample d = dilation_field(3, 0.01, t, 1e-6);
    CHECK(linearized_flux(*P, d.value, d.derivative, t) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("Wronskian of mode-0 solutions is conserved") {
  // Second solution from integrating L_0 phi = 0 with phi(0) = 1, phi'(0) = 0.
  auto P = DelaunayProfile::solve(3, 0.05);
  int n = 3;
  OdeRhs f = [&](double t, const OdeState& y, OdeState& d) {
    ProfileState s = P->state(t);
    d[0] = y[1];
    d[1] = -(n - 2) * s.wp * y[1] - s.r * s.r * P->A2_closed(s.r) * y[0];
  };
  Trajectory tr = integrate_ode(f, {1.0, 0.0}, uniform_grid(0.0, 3.0, 3000));
  double w0 = linearized_flux(*P, tr.y[500][0], tr.y[500][1], tr.t[500]);
  double w1 = linearized_flux(*P, tr.y[2900][0], tr.y[2900][1], tr.t[2900]);
  CHECK(std::abs(w0) > 1e-3);
  CHECK(w1 == doctest::Approx(w0).epsilon(1e-8));
}

TEST_CASE("catenoid neck comparison scales like |tau|^{1/(n-1)}") {
  double d3 = catenoid_compare(*DelaunayProfile::solve(3, 1e-3), 2.0).sup_distance;
  double d4 = catenoid_compare(*DelaunayProfile::solve(3, 1e-4), 2.0).sup_distance;
  double ratio = (d3 / d4) / std::sqrt(10.0);
  CHECK(ratio > 1 / 1.5);
  CHECK(ratio < 1.5);
  double dn = catenoid_compare(*DelaunayProfile::solve(3, -1e-3), 2.0).sup_distance;
  CHECK(dn == doctest::Approx(d3).epsilon(0.05));
  CHECK_THROWS_AS(catenoid_compare(*DelaunayProfile::solve(3, 0.05), 5.0), Error);
}

TEST_CASE("sphere limit away from the neck") {
  auto dev = [](double tau) {
    auto P = DelaunayProfile::solve(3, tau);
    double m = 0.0;
    for (double t = 0.0; t < P->p(); t += 0.01) {
      ProfileState s = P->state(t);
      if (s.r < 0.3) break;
      m = std::max(m, std::abs(s.r - std::sqrt(std::max(0.0, 1.0 - s.k * s.k))));
    }
    return m / tau;
  };
  double a = dev(1e-3), b = dev(5e-4), c = dev(2.5e-4);
  CHECK(a < 50.0);
  CHECK(b / a == doctest::Approx(1.0).epsilon(0.2));
  CHECK(c / b == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("profile csv") {
  auto P = DelaunayProfile::solve(3, 0.01);
  std::ostringstream os;
  write_profile_csv(*P, os, 10);
  std::string s = os.str();
  CHECK(s.rfind("t,r,k,w,H,A2,flux_e1\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 12);
}
