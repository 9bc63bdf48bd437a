#include "cmc/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

#include "cmc/assembly.hpp"
#include "cmc/linear.hpp"

namespace cmc {

namespace {

namespace fs = std::filesystem;
using Eigen::VectorXd;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  /// @brief Records a check and appends "label value" to the detail.
  void check(bool ok, const std::string& label) {
    pass = pass && ok;
    if (detail.tellp() > 0) detail << "; ";
    detail << label << (ok ? "" : " [fail]");
  }
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

/// @brief max / min - 1 of positive values (infinity if any is non-positive or non-finite).
double variation(const std::vector<double>& v) {
  double lo = INFINITY, hi = 0.0;
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) return INFINITY;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi / lo - 1.0;
}

ProfileCache& cache() {
  static ProfileCache c;
  return c;
}

WeightedGraph example(const AcceptanceOptions& o, const std::string& name) {
  return WeightedGraph::load((fs::path(o.graph_dir) / (name + ".json")).string());
}

const std::vector<std::string>& example_names() {
  static const std::vector<std::string> names = {"antipodal", "star120", "dumbbell", "square_rays"};
  return names;
}

AssembledImmersion assemble_example(const WeightedGraph& g, double tau_bar, double zeta_fraction) {
  AssemblyConfig cfg;
  cfg.tau_bar = tau_bar;
  auto M = AbstractSurface::build(g, cfg, cache());
  return AssembledImmersion::assemble(M, {}, patterned_dislocation(g, zeta_fraction * cfg.c_bar * tau_bar), cache());
}

double max_H_error(const DelaunayProfile& P, int samples) {
  double m = 0.0;
  for (int i = 0; i <= samples; ++i) m = std::max(m, std::abs(curvature(P, 2 * P.p() * i / samples).H - 1.0));
  return m;
}

Outcome c1_cmc_identity(const AcceptanceOptions&) {
  Outcome o;
  for (double tau : {0.1, 0.01, -0.01}) {
    const double err = max_H_error(*DelaunayProfile::solve(3, tau), 4000);
    ProfileOptions coarse;
    coarse.cross_check = false;
    coarse.richardson_tol = 0.0;
    coarse.step = 0.05;
    const double e1 = max_H_error(*DelaunayProfile::solve(3, tau, coarse), 400);
    coarse.step = 0.025;
    const double e2 = max_H_error(*DelaunayProfile::solve(3, tau, coarse), 400);
    const double order = std::log2(e1 / e2);
    o.check(err <= 1e-6, "tau " + num(tau) + ": max|H-1| " + num(err));
    o.check(std::abs(order - 4.0) <= 0.6, "order " + num(order));
  }
  return o;
}

Outcome c2_first_integral(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3;
  for (double tau : {0.1, 0.01, -0.01}) {
    auto P = DelaunayProfile::solve(n, tau);
    double drift = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const ProfileState s = P->state(2 * P->p() * i / 4000);
      drift = std::max(drift, std::abs(std::pow(s.r, n - 2) * s.kp - std::pow(s.r, n) - tau) / std::abs(tau));
    }
    double ferr = 0.0;
    const double om = sphere_volume(n - 1);
    for (double t : {0.0, 0.37, 1.1, P->p(), 1.6 * P->p()}) {
      const VectorXd F = flux(*P, t);
      VectorXd expect = VectorXd::Zero(n + 1);
      expect(0) = tau * om;
      ferr = std::max(ferr, (F - expect).norm() / (std::abs(tau) * om));
    }
    o.check(drift <= 1e-8, "tau " + num(tau) + ": integral drift " + num(drift));
    o.check(ferr <= 1e-8, "flux error " + num(ferr));
  }
  return o;
}

Outcome c3_period_law(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3;
  std::vector<double> dev;
  for (double tau : {1e-4, 1e-6, 1e-8})
    dev.push_back(std::abs(cache().get(n, tau)->p() * (n - 1) / -std::log(tau) - 1.0));
  o.check(true, "deviations " + num(dev[0]) + ", " + num(dev[1]) + ", " + num(dev[2]));
  for (std::size_t i = 0; i + 1 < dev.size(); ++i) {
    const double f = dev[i] / dev[i + 1];
    o.check(f >= 1.5, "shrink " + num(f));
  }
  o.check(dev.back() <= 0.25, "final " + num(dev.back()));
  return o;
}

Outcome c4_translational_period(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3;
  const double tau = 1e-6;
  const double ratio = cache().get(n, tau)->phat() / (T_constant(n) * std::pow(tau, 1.0 / (n - 1)));
  const double terr = std::abs(T_constant(n) - T_constant_closed(n));
  o.check(std::abs(ratio - 1.0) <= 0.1, "phat / (T_n tau^(1/(n-1))) " + num(ratio));
  o.check(terr <= 1e-9, "|T_n - closed form| " + num(terr));
  return o;
}

Outcome c5_extremal_radii(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3;
  std::vector<double> qmax, qmin;
  for (double tau : {1e-2, 1e-3, 1e-4}) {
    qmax.push_back(std::abs((1.0 - tau - delaunay_r_max(n, tau)) / (tau * tau)));
    qmin.push_back(std::abs((delaunay_r_min(n, tau) - std::pow(tau, 1.0 / (n - 1))) / std::pow(tau, 2.0 / (n - 1))));
  }
  const double v1 = variation(qmax), v2 = variation(qmin);
  o.check(v1 <= 0.5, "r_max quotients " + num(qmax[0]) + ", " + num(qmax[1]) + ", " + num(qmax[2]) +
                         " variation " + num(v1));
  o.check(v2 <= 0.5, "r_min quotients " + num(qmin[0]) + ", " + num(qmin[1]) + ", " + num(qmin[2]) +
                         " variation " + num(v2));
  return o;
}

Outcome c6_catenoid(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3;
  const double d3 = catenoid_compare(*cache().get(n, 1e-3), 2.0).sup_distance;
  const double d4 = catenoid_compare(*cache().get(n, 1e-4), 2.0).sup_distance;
  const double ratio = (d3 / d4) / std::pow(10.0, 1.0 / (n - 1));
  o.check(ratio >= 1 / 1.5 && ratio <= 1.5,
          "distances " + num(d3) + ", " + num(d4) + " ratio / 10^(1/(n-1)) " + num(ratio));
  return o;
}

Outcome c7_block_scaling(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3, d = n + 1;
  const double dp = 0.3;
  const SphereGrid S = SphereGrid::product(n - 1, 4);
  auto gluing = [&](double tau) {
    const DelaunayBlock B = DelaunayBlock::ray(cache().get(n, tau), VectorXd::Zero(d), dp);
    return mean_curvature_field(B, uniform_grid(B.a() + 3.0, B.a() + 5.0, 200), S.points).max_gluing();
  };
  const VectorXd z = VectorXd(VectorXd::LinSpaced(d, 1.0, 2.0)).normalized();
  auto disloc = [&](double scale) {
    const DelaunayBlock B = DelaunayBlock::ray(cache().get(n, 1e-6), scale * z, dp);
    return mean_curvature_field(B, uniform_grid(B.a(), B.a() + 2.0, 200), S.points).max_dislocation();
  };
  const double g = gluing(5e-7) / gluing(1e-6);
  const double h = disloc(4e-6) / disloc(8e-6);
  o.check(std::abs(g / 0.5 - 1.0) <= 0.2, "gluing ratio " + num(g));
  o.check(std::abs(h / 0.5 - 1.0) <= 0.2, "dislocation ratio " + num(h));
  return o;
}

Outcome c8_dislocation_integral(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3, d = n + 1;
  std::mt19937 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  auto random_unit = [&] {
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = N(rng);
    return VectorXd(v.normalized());
  };
  const VectorXd zp = 8e-6 * random_unit(), zm = 6e-6 * random_unit();
  const DelaunayBlock B = DelaunayBlock::edge(cache().get(n, 1e-6), 1, zp, zm, 0.3);
  const double b = B.a() + 4.0;
  const double near = dislocation_flux_integral(B, b, +1).norm, far = dislocation_flux_integral(B, b, -1).norm;
  o.check(near <= 1e-6 && far <= 1e-6, "near " + num(near) + ", far " + num(far));
  std::vector<double> r;
  for (int panels : {2, 4, 8}) r.push_back(dislocation_flux_integral(B, b, +1, panels, 6, 8).norm);
  o.check(r[1] < r[0] && r[2] < r[1], "refinement " + num(r[0]) + ", " + num(r[1]) + ", " + num(r[2]));
  return o;
}

Outcome c9_vertex_flux(const AcceptanceOptions& opts) {
  Outcome o;
  const double tau = 1e-9;
  for (const std::string name : {"antipodal", "star120"}) {
    const WeightedGraph g = example(opts, name);
    const AssembledImmersion Y = assemble_example(g, tau, 0.5);
    const double scale = tau * omega_tilde(g.n - 1) / std::sqrt(omega_tilde(g.n));
    double worst = 0.0;
    for (std::size_t v = 0; v < g.vertices.size(); ++v) worst = std::max(worst, vertex_flux(Y, v).dunder.norm() / scale);
    o.check(worst <= 1e-5, name + " |d| / tau-scale " + num(worst));
  }
  for (const std::string name : {"dumbbell", "square_rays"}) {
    const double disc = flux_report(assemble_example(example(opts, name), tau, 0.5)).max_discrepancy();
    o.check(disc <= 1e-5, name + " discrepancy " + num(disc));
  }
  // Unbalanced vertex: rays along e_1 and e_2 with weights 1 and 1/2, d = tau-bar d-hat.
  const WeightedGraph g = WeightedGraph::parse(R"({"n":3,"vertices":[{"id":"p","pos":[0,0,0,0]}],"edges":[],"rays":[
    {"id":"r1","from":"p","dir":[1,0,0,0],"tau_hat":1},{"id":"r2","from":"p","dir":[0,1,0,0],"tau_hat":0.5}]})");
  AssemblyConfig cfg;
  cfg.tau_bar = tau;
  auto M = AbstractSurface::build(g, cfg, cache());
  std::vector<VectorXd> dv;
  for (const VectorXd& v : dhat(g)) dv.push_back(tau * v);
  AssembleOptions ao;
  ao.enforce_bounds = false;
  const FluxEntry f = vertex_flux(AssembledImmersion::assemble(M, dv, patterned_dislocation(g, 0.5 * cfg.c_bar * tau), cache(), ao), 0);
  o.check(f.discrepancy <= 1e-5, "unbalanced pair discrepancy " + num(f.discrepancy) + " (ratio to omega~_n form " +
                                     num(f.dunder.norm() / f.literal_form.norm()) + ")");
  return o;
}

Outcome c10_flat_annulus(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3;
  const double gamma = 1.5;
  double residual = 0.0, membership = 0.0;
  std::vector<std::vector<double>> ratios(6);
  for (double si : {1e-2, 1e-3, 1e-4}) {
    AnnulusProblem pb;
    pb.n = n;
    pb.gamma = gamma;
    pb.s_in = si;
    for (DecayClass d : {DecayClass::Out, DecayClass::In}) {
      const double power = d == DecayClass::Out ? gamma - 2 : -n - gamma;
      pb.modes.clear();
      for (int k : {0, 1, 2}) pb.modes.push_back({k, [=](double s) { return std::pow(s, power); }});
      const AnnulusSolution S = flat_annulus_solve(pb, d);
      residual = std::max(residual, S.max_residual);
      for (std::size_t j = 0; j < S.modes.size(); ++j) {
        const AnnulusModeSolution& m = S.modes[j];
        const double vanishing = d == DecayClass::Out ? m.value_in : m.value_out;
        const double other = d == DecayClass::Out ? m.value_out : m.value_in;
        membership = std::max(membership, std::abs(vanishing));
        if (m.k >= 2) membership = std::max(membership, std::abs(other));
        ratios[(d == DecayClass::Out ? 0 : 3) + j].push_back(m.norm_ratio);
      }
    }
  }
  o.check(residual <= 1e-8, "max residual " + num(residual));
  o.check(membership <= 1e-10, "boundary membership " + num(membership));
  double worst = 0.0;
  for (const auto& r : ratios) worst = std::max(worst, variation(r) + 1.0);
  o.check(worst <= 2.0, "norm-ratio max/min " + num(worst));
  return o;
}

Outcome c11_coercivity(const AcceptanceOptions&) {
  Outcome o;
  auto P = cache().get(3, 0.01);
  for (const ModeRegion& R : {s_tilde_plus(P, 0.0), s_tilde_minus(P, 0.0)}) {
    const CoercivityReport rep = coercivity_certificate(R, random_high_mode_trials(R, 100, 42));
    o.check(rep.quotients.size() == 100 && rep.minimum >= 1.0, R.label + " minimum of 100 " + num(rep.minimum));
  }
  return o;
}

Outcome c12_approximate_kernel(const AcceptanceOptions&) {
  Outcome o;
  const SpectrumReport rep = approximate_kernel(s_tilde_plus(cache().get(3, 0.01), 0.0));
  o.check(rep.kernel_count == 4, "count in [-0.1, 0.1] " + std::to_string(rep.kernel_count));
  o.check(rep.window_count == rep.kernel_count, "count in [-1, 1] " + std::to_string(rep.window_count));
  o.check(rep.stable, std::string("stable under halving ") + (rep.stable ? "yes" : "no"));
  return o;
}

Outcome c13_quadratic(const AcceptanceOptions&) {
  Outcome o;
  const int n = 3;
  const ModeRegion sphere{RevolutionGeometry::conformal(std::make_shared<SphereProfile>(n)), -2.0, 2.0, "sphere"};
  const QuadraticReport s = quadratic_check(sphere, [](double) { return 1.0; });
  double rel = 0.0;
  for (std::size_t i = 0; i < s.ratio.size(); ++i) rel = std::max(rel, std::abs(s.ratio[i] * (1.0 - s.eps[i]) / n - 1.0));
  o.check(rel <= 1e-5, "sphere ratio vs n/(1-eps) " + num(rel));
  auto P = cache().get(n, 0.01);
  const QuadraticReport d = quadratic_check(s_tilde_plus(P, 0.0), [&](double t) { return P->state(t).wp; });
  o.check(d.variation <= 0.3, "Delaunay ratios " + num(d.ratio[0]) + ", " + num(d.ratio[1]) + ", " + num(d.ratio[2]) +
                                  " variation " + num(d.variation));
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Outcome c14_seams(const AcceptanceOptions& opts) {
  Outcome o;
  const double tau = 1e-9;
  const fs::path root = fs::temp_directory_path() / "cmc_acceptance_determinism";
  for (const std::string& name : example_names()) {
    const WeightedGraph g = example(opts, name);
    const AssembledImmersion Y = assemble_example(g, tau, 0.5);
    const SeamReport s = Y.seams();
    o.check(s.pairs > 0 && s.max_residual <= 1e-9, name + " seam " + num(s.max_residual));
    bool same = true;
    std::size_t files = 0;
    for (int run = 0; run < 2; ++run) {
      const AssembledImmersion Z = run == 0 ? Y : assemble_example(g, tau, 0.5);
      const FluxReport fr = flux_report(Z);
      fs::remove_all(root / std::to_string(run));
      export_bundle(diagnose(Z), (root / std::to_string(run)).string(), &fr);
    }
    for (const auto& f : fs::directory_iterator(root / "0")) {
      ++files;
      same = same && slurp(f.path()) == slurp(root / "1" / f.path().filename());
    }
    o.check(same && files > 0, name + (same ? " byte-identical" : " differs"));
    fs::remove_all(root);
  }
  return o;
}

double angle_between(const VectorXd& a, const VectorXd& b) {
  return std::atan2((a - a.dot(b) * b).norm(), a.dot(b));
}

Outcome c15_length_frame_bounds(const AcceptanceOptions& opts) {
  Outcome o;
  const double c_bar = 10.0;
  for (const std::string name : {"dumbbell", "square_rays"}) {
    const WeightedGraph g = example(opts, name);
    std::vector<double> lratio, aratio;
    for (double tau : {1e-4, 1e-6, 1e-8}) {
      const EdgeTargets T = edge_targets(g, tau, patterned_dislocation(g, 0.5 * c_bar * tau), c_bar, cache());
      double l = 0.0, angle = 0.0;
      for (double x : T.elltilde) l = std::max(l, std::abs(x));
      // Frames are expressed in the element chart, where the undislocated axis is e_1.
      for (const Eigen::MatrixXd& F : T.frames)
        angle = std::max(angle, angle_between(F.col(0), VectorXd::Unit(g.n + 1, 0)));
      lratio.push_back(l / std::pow(tau, 1.0 / (g.n - 1)));
      aratio.push_back(angle / (c_bar * tau));
    }
    const double vl = variation(lratio) + 1.0, va = variation(aratio) + 1.0;
    o.check(vl <= 2.0, name + " |l~|/tau^(1/(n-1)) " + num(lratio[0]) + ".." + num(lratio[2]) + " max/min " + num(vl));
    o.check(va <= 2.0, "angle/(C tau) " + num(aratio[0]) + ".." + num(aratio[2]) + " max/min " + num(va));
  }
  return o;
}

struct Criterion {
  const char* title;
  std::function<Outcome(const AcceptanceOptions&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {"Delaunay CMC identity", c1_cmc_identity},
      {"first integral and meridian flux", c2_first_integral},
      {"period law", c3_period_law},
      {"translational period law", c4_translational_period},
      {"extremal radii", c5_extremal_radii},
      {"catenoid neck", c6_catenoid},
      {"block error scaling", c7_block_scaling},
      {"dislocation zero integral", c8_dislocation_integral},
      {"vertex flux", c9_vertex_flux},
      {"flat-annulus solver", c10_flat_annulus},
      {"coercivity", c11_coercivity},
      {"approximate kernel", c12_approximate_kernel},
      {"quadratic estimate", c13_quadratic},
      {"assembly seams and determinism", c14_seams},
      {"l~ and frame bounds", c15_length_frame_bounds},
  };
  return list;
}

}  // namespace

std::string CriterionResult::line() const {
  char head[64];
  std::snprintf(head, sizeof head, "%s [%2d] ", pass ? "PASS" : "FAIL", id);
  char tail[32];
  std::snprintf(tail, sizeof tail, " (%.1f s)", seconds);
  return head + title + ": " + detail + tail;
}

CriterionResult run_criterion(int id, const AcceptanceOptions& opts) {
  if (id < 1 || id > acceptance_count) throw Error(ErrorKind::Parameter, "no acceptance criterion " + std::to_string(id));
  const Criterion& c = criteria()[id - 1];
  CriterionResult r;
  r.id = id;
  r.title = c.title;
  const auto start = std::chrono::steady_clock::now();
  try {
    Outcome o = c.run(opts);
    r.pass = o.pass;
    r.detail = o.detail.str();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream* out) {
  std::vector<int> ids = opts.only;
  if (ids.empty())
    for (int i = 1; i <= acceptance_count; ++i) ids.push_back(i);
  std::vector<CriterionResult> results;
  for (int id : ids) {
    results.push_back(run_criterion(id, opts));
    if (out) *out << results.back().line() << std::endl;
  }
  return results;
}

nlohmann::json to_json(const std::vector<CriterionResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const CriterionResult& r : results)
    j.push_back({{"id", r.id}, {"title", r.title}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
  return j;
}

}  // namespace cmc
