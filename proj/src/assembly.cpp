#include "cmc/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace cmc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd y0_point(double t, const VectorXd& theta) {
  VectorXd X(theta.size() + 1);
  X(0) = std::tanh(t);
  X.tail(theta.size()) = theta / std::cosh(t);
  return X;
}

MatrixXd side_flip(int dim, int sign) {
  MatrixXd S = MatrixXd::Identity(dim, dim);
  S(0, 0) = sign;
  return S;
}

std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

double default_delta_prime(const WeightedGraph& g) {
  double min_gap = kInf;
  for (std::size_t p = 0; p < g.vertices.size(); ++p) {
    auto at = g.attachments(p);
    for (std::size_t i = 0; i < at.size(); ++i)
      for (std::size_t j = i + 1; j < at.size(); ++j)
        min_gap = std::min(min_gap, (g.direction(at[i]) - g.direction(at[j])).norm());
  }
  if (!std::isfinite(min_gap)) return 0.05;
  return std::min(0.05, 0.99 * min_gap / 50.0);
}

double default_b_bar(double a) { return std::max(6.0, a + 6.0); }

// ---------------------------------------------------------------------------------------------
// Abstract surface

std::shared_ptr<const AbstractSurface> AbstractSurface::build(const WeightedGraph& central, const AssemblyConfig& cfg,
                                                              ProfileCache& cache) {
  auto M = std::shared_ptr<AbstractSurface>(new AbstractSurface());
  M->graph_ = central;
  M->cfg_ = cfg;
  const WeightedGraph& g = M->graph_;
  const int n = g.n, dim = n + 1;
  if (!(cfg.tau_bar != 0.0) || !std::isfinite(cfg.tau_bar))
    throw Error(ErrorKind::Parameter, "tau-bar must be nonzero and finite");
  if (cfg.m_max < 1) throw Error(ErrorKind::Configuration, "m_max must be at least 1");
  if (!(cfg.gamma > 1.0 && cfg.gamma < 2.0)) throw Error(ErrorKind::Configuration, "gamma must lie in (1, 2)");
  if (!(cfg.c_bar > 0.0)) throw Error(ErrorKind::Configuration, "C-bar must be positive");
  if (cfg.delta_prime == 0.0) M->cfg_.delta_prime = default_delta_prime(g);
  const double dp = M->cfg_.delta_prime;
  if (!(dp > 0.0)) throw Error(ErrorKind::Configuration, "delta' must be positive");
  for (std::size_t p = 0; p < g.vertices.size(); ++p) {
    auto at = g.attachments(p);
    for (std::size_t i = 0; i < at.size(); ++i)
      for (std::size_t j = i + 1; j < at.size(); ++j)
        if (!((g.direction(at[i]) - g.direction(at[j])).norm() > 50.0 * dp))
          throw Error(ErrorKind::Configuration, "delta' too large at vertex " + g.vertices[p].id +
                                                    ": directions closer than 50 delta'");
  }
  M->a_ = block_a(dp);
  const double a = M->a_;
  if (cfg.b_bar == 0.0)
    M->cfg_.b_bar = default_b_bar(a);
  else if (!(cfg.b_bar > a + 5.0))
    throw Error(ErrorKind::Configuration, "b-bar = " + fmt_num(cfg.b_bar) + " must exceed a + 5 = " + fmt_num(a + 5.0));
  const double bb = M->cfg_.b_bar;

  for (std::size_t el = 0; el < g.element_count(); ++el) {
    ElementChart c;
    c.element = el;
    c.is_ray = g.element_is_ray(el);
    c.tau0 = cfg.tau_bar * g.element_tau_hat(el);
    c.profile0 = cache.get(n, c.tau0);
    c.p0 = c.profile0->p();
    const std::string eid = g.element_id(el);
    if (!(c.p0 > bb + 1.0))
      throw Error(ErrorKind::Parameter, "too few periods for the chosen b-bar on " + eid + ": p_tau = " +
                                            fmt_num(c.p0) + " must exceed b-bar + 1 = " + fmt_num(bb + 1.0));
    const double p = c.p0;
    // Standard regions of half-width b-bar overlap once p_tau < 2 b-bar; shrink them so that every
    // transition region keeps unit length.
    c.b_region = std::min(bb, 0.5 * (p - 1.0));
    const double br = c.b_region;
    c.t_begin = a;
    auto make = [&](RegionKind kind, std::size_t vertex, int m, int side, double t0, double t1) {
      Region r;
      r.kind = kind;
      r.vertex = vertex;
      r.element = el;
      r.m = m;
      r.side = side;
      r.t0 = t0;
      r.t1 = t1;
      const std::string& vid = g.vertices[vertex].id;
      switch (kind) {
        case RegionKind::Central: r.tag = "S[" + vid + "]"; break;
        case RegionKind::Standard: r.tag = "S[" + vid + "," + eid + "," + std::to_string(m) + "]"; break;
        case RegionKind::Transition: r.tag = "Lambda[" + vid + "," + eid + "," + std::to_string(m) + "]"; break;
      }
      return r;
    };
    if (!c.is_ray) {
      const Edge& e = g.edges[el];
      double hl = g.half_length(el);
      c.l = static_cast<int>(std::lround(hl));
      if (c.l < 1 || std::abs(hl - c.l) > 1e-9)
        throw Error(ErrorKind::Structural, "edge " + eid + " half-length is not a positive integer");
      c.length = 2.0 * p * c.l;
      c.t_end = c.length - a;
      const double L = c.length;
      c.regions.push_back(make(RegionKind::Central, e.plus, 0, 1, a, br));
      for (int m = 1; m <= c.l; ++m) {
        c.regions.push_back(make(RegionKind::Transition, e.plus, m, 1, (m - 1) * p + br, m * p - br));
        c.regions.push_back(make(RegionKind::Standard, e.plus, m, 1, m * p - br, m * p + br));
      }
      for (int m = c.l; m >= 1; --m) {
        c.regions.push_back(make(RegionKind::Transition, e.minus, m, -1, L - (m * p - br), L - ((m - 1) * p + br)));
        if (m - 1 >= 1)
          c.regions.push_back(make(RegionKind::Standard, e.minus, m - 1, -1, L - ((m - 1) * p + br), L - ((m - 1) * p - br)));
      }
      c.regions.push_back(make(RegionKind::Central, e.minus, 0, -1, L - br, L - a));
    } else {
      const Ray& r = g.rays[el - g.edges.size()];
      c.l = 0;
      c.length = kInf;
      c.t_end = 2.0 * cfg.m_max * p;
      c.regions.push_back(make(RegionKind::Central, r.vertex, 0, 1, a, br));
      for (int m = 1; m <= 2 * cfg.m_max; ++m) {
        c.regions.push_back(make(RegionKind::Transition, r.vertex, m, 1, (m - 1) * p + br, m * p - br));
        Region s = make(RegionKind::Standard, r.vertex, m, 1, m * p - br, std::min(m * p + br, c.t_end));
        s.truncated = m * p + br > c.t_end;
        c.regions.push_back(s);
      }
    }
    M->elements_.push_back(c);
    M->frames_.push_back(complete_frame(g.v1(el)));
  }

  M->caps_.resize(g.vertices.size());
  M->wframes_.resize(g.vertices.size());
  M->cap_elements_.resize(g.vertices.size());
  for (std::size_t p = 0; p < g.vertices.size(); ++p)
    for (const Attachment& at : g.attachments(p)) {
      MatrixXd W = M->frames_[at.element] * side_flip(dim, at.sign);
      M->caps_[p].push_back(W.col(0));
      M->wframes_[p].push_back(W);
      M->cap_elements_[p].push_back(at.element);
    }
  return M;
}

bool AbstractSurface::in_vertex_chart(std::size_t vertex, const VectorXd& x) const {
  for (const VectorXd& c : caps_[vertex])
    if (vector_angle(x, c) < cfg_.delta_prime * (1.0 - 1e-12)) return false;
  return true;
}

std::vector<Region> AbstractSurface::regions() const {
  std::vector<Region> out;
  for (const auto& c : elements_) out.insert(out.end(), c.regions.begin(), c.regions.end());
  return out;
}

const Region& AbstractSurface::region_at(std::size_t el, double t) const {
  const auto& R = elements_.at(el).regions;
  for (const Region& r : R)
    if (t <= r.t1) return r;
  return R.back();
}

std::size_t AbstractSurface::standard_count(std::size_t el) const {
  const auto& R = elements_.at(el).regions;
  return static_cast<std::size_t>(
      std::count_if(R.begin(), R.end(), [](const Region& r) { return r.kind == RegionKind::Standard; }));
}

std::size_t AbstractSurface::transition_count(std::size_t el) const {
  const auto& R = elements_.at(el).regions;
  return static_cast<std::size_t>(
      std::count_if(R.begin(), R.end(), [](const Region& r) { return r.kind == RegionKind::Transition; }));
}

std::vector<BoundarySphere> AbstractSurface::boundary_spheres(std::size_t el) const {
  std::vector<BoundarySphere> out;
  for (const Region& r : elements_.at(el).regions) {
    if (r.kind != RegionKind::Transition) continue;
    // Near end in the counting direction of the region.
    const double near = r.side > 0 ? r.t0 : r.t1, far = r.side > 0 ? r.t1 : r.t0;
    const bool odd = r.m % 2 == 1;
    const std::string suffix = "[" + graph_.vertices[r.vertex].id + "," + graph_.element_id(el) + "," +
                               std::to_string(r.m) + "]";
    out.push_back({true, r.vertex, el, r.m, odd ? near : far, "Cout" + suffix});
    out.push_back({false, r.vertex, el, r.m, odd ? far : near, "Cin" + suffix});
  }
  return out;
}

std::vector<BoundarySphere> AbstractSurface::central_boundary(std::size_t vertex) const {
  std::vector<BoundarySphere> out;
  for (const Attachment& at : graph_.attachments(vertex)) {
    for (const BoundarySphere& s : boundary_spheres(at.element))
      if (s.out && s.vertex == vertex && s.m == 1) out.push_back(s);
  }
  return out;
}

std::optional<std::pair<std::size_t, VectorXd>> AbstractSurface::identify(std::size_t el, double t,
                                                                         const VectorXd& theta) const {
  const ElementChart& c = elements_.at(el);
  const double a = a_;
  if (t >= a && t <= a + 1.0) {
    std::size_t v = c.is_ray ? graph_.rays[el - graph_.edges.size()].vertex : graph_.edges[el].plus;
    return std::make_pair(v, VectorXd(frames_[el] * y0_point(t, theta)));
  }
  if (!c.is_ray && t >= c.length - (a + 1.0) && t <= c.length - a)
    return std::make_pair(graph_.edges[el].minus, VectorXd(frames_[el] * y0_point(t - c.length, theta)));
  return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// t_d

double reparametrize_td(double t, double a, double length0, double length_d) {
  const double lambda = length_d / length0, T = length0;
  const double near = cutoff(a + 3.0, a + 2.0, t);
  const double far = cutoff(T - (a + 3.0), T - (a + 2.0), t);
  const double mid = cutoff(a + 2.0, a + 3.0, t) * cutoff(T - (a + 2.0), T - (a + 3.0), t);
  return near * t + far * (t + length_d - length0) + mid * lambda * t;
}

double reparametrize_td_ray(double t, double a, double lambda) {
  return cutoff(a + 3.0, a + 2.0, t) * t + cutoff(a + 2.0, a + 3.0, t) * lambda * t;
}

// ---------------------------------------------------------------------------------------------
// Assembled immersion

AssembledImmersion AssembledImmersion::assemble(std::shared_ptr<const AbstractSurface> M, const std::vector<VectorXd>& d,
                                                const Dislocation& zeta, ProfileCache& cache, const AssembleOptions& opts) {
  AssembledImmersion Y;
  Y.M_ = M;
  const WeightedGraph& g = M->graph();
  const int n = g.n, dim = n + 1;
  const double tb = M->tau_bar();
  const std::size_t V = g.vertices.size(), E = g.element_count();

  Y.d_ = d.empty() ? std::vector<VectorXd>(V, VectorXd::Zero(dim)) : d;
  if (Y.d_.size() != V) throw Error(ErrorKind::Parameter, "unbalancing vector count does not match the vertices");
  const double d_bound = std::pow(std::abs(tb), 1.0 + 1.0 / (n - 1));
  for (std::size_t p = 0; p < V; ++p) {
    if (Y.d_[p].size() != dim) throw Error(ErrorKind::Parameter, "unbalancing vectors must lie in R^{n+1}");
    if (opts.enforce_bounds && Y.d_[p].norm() > d_bound * (1.0 + 1e-12))
      throw Error(ErrorKind::Parameter, "|d[" + g.vertices[p].id + "]| exceeds |tau-bar|^{1+1/(n-1)} = " +
                                            fmt_num(d_bound));
  }
  Y.zeta_ = zeta.plus.empty() && zeta.minus.empty() ? Dislocation::zero(g) : zeta;

  std::vector<VectorXd> dtilde;
  for (const VectorXd& v : Y.d_) dtilde.push_back(v / tb);
  EdgeTargets targets = edge_targets(g, tb, Y.zeta_, M->config().c_bar, cache);
  FamilyOptions fo;
  if (!opts.enforce_bounds) fo.radius = kInf;
  Y.family_ = realize_family(g, dtilde, targets.elltilde, fo);

  const double dp = M->delta_prime();
  for (std::size_t el = 0; el < E; ++el) {
    const ElementChart& c = M->elements()[el];
    const bool ray = c.is_ray;
    const double tau_d = tb * Y.family_.unbalanced.element_tau_hat(el);
    auto prof = cache.get(n, tau_d);
    // The dislocation bound is C-bar |tau-bar|; restate it relative to tau_d for the block check.
    const double cb = M->config().c_bar * std::abs(tb / tau_d) * (1.0 + 1e-12);
    Y.blocks_.push_back(ray ? DelaunayBlock::ray(prof, Y.zeta_.plus[el], dp, cb)
                            : DelaunayBlock::edge(prof, c.l, Y.zeta_.plus[el], Y.zeta_.minus[el], dp, cb));
    MatrixXd R = Y.family_.frames[el] * targets.frames[el].transpose();
    std::size_t vplus = ray ? g.rays[el - g.edges.size()].vertex : g.edges[el].plus;
    VectorXd T = Y.family_.realized.vertices[vplus].pos - R * Y.zeta_.plus[el];
    Y.rot_.push_back(R);
    Y.trans_.push_back(T);
  }
  for (std::size_t p = 0; p < V; ++p) {
    std::vector<MatrixXd> Wp;
    auto at = g.attachments(p);
    for (const Attachment& a : at) Wp.push_back(Y.rot_[a.element] * side_flip(dim, a.sign));
    Y.spheres_.emplace_back(M->vertex_frames(p), Wp, dp);
  }
  SeamReport s = Y.seams();
  if (s.max_residual > opts.seam_tol)
    throw Error(ErrorKind::Assembly, "chart seam residual " + fmt_num(s.max_residual) + " exceeds " +
                                         fmt_num(opts.seam_tol) + " at " + s.worst);
  return Y;
}

const VectorXd& AssembledImmersion::vertex_position(std::size_t vertex) const {
  return family_.realized.vertices.at(vertex).pos;
}

VectorXd AssembledImmersion::vertex_point(std::size_t vertex, const VectorXd& x) const {
  return vertex_position(vertex) + spheres_.at(vertex)(x);
}

SurfaceSample AssembledImmersion::vertex_sample(std::size_t vertex, const VectorXd& x) const {
  SurfaceSample s;
  VectorXd y = spheres_.at(vertex)(x);
  s.X = vertex_position(vertex) + y;
  s.N = -y;
  s.H = 1.0;
  s.density = 1.0;
  return s;
}

double AssembledImmersion::td(std::size_t el, double t) const {
  const ElementChart& c = M_->elements().at(el);
  const double pd = blocks_[el].profile().p();
  if (c.is_ray) return reparametrize_td_ray(t, M_->a(), pd / c.p0);
  return reparametrize_td(t, M_->a(), c.length, 2.0 * pd * c.l);
}

SurfaceSample AssembledImmersion::element_sample(std::size_t el, double t, const VectorXd& theta) const {
  SurfaceSample s = blocks_.at(el).sample(td(el, t), theta);
  s.X = rot_[el] * s.X + trans_[el];
  s.N = rot_[el] * s.N;
  return s;
}

VectorXd AssembledImmersion::element_point(std::size_t el, double t, const VectorXd& theta) const {
  return rot_.at(el) * blocks_.at(el).point(td(el, t), theta) + trans_[el];
}

double AssembledImmersion::rbar(std::size_t el, double t) const { return blocks_.at(el).profile().state(td(el, t)).r; }

namespace {

double rho_formula(double t, double a, double bb, double L, bool ray, double r) {
  if (ray) return cutoff(a + 4.0, bb, t) * r + cutoff(bb, a + 4.0, t);
  return cutoff(a + 4.0, bb, t) * cutoff(L - (a + 4.0), L - bb, t) * r + cutoff(bb, a + 4.0, t) +
         cutoff(L - bb, L - (a + 4.0), t);
}

}  // namespace

double AssembledImmersion::rho(std::size_t el, double t) const {
  const ElementChart& c = M_->elements().at(el);
  return rho_formula(t, M_->a(), M_->b_bar(), c.length, c.is_ray, rbar(el, t));
}

double AssembledImmersion::rho0(std::size_t el, double t) const {
  const ElementChart& c = M_->elements().at(el);
  return rho_formula(t, M_->a(), M_->b_bar(), c.length, c.is_ray, c.profile0->state(t).r);
}

double AssembledImmersion::r_in(std::size_t el) const {
  const ElementChart& c = M_->elements().at(el);
  return rbar(el, c.p0 - M_->b_bar());
}

double AssembledImmersion::delta_factor(std::size_t el) const {
  const ElementChart& c = M_->elements().at(el);
  const double rin0 = c.profile0->state(c.p0 - M_->b_bar()).r;
  return std::pow(rin0, 2.0 * M_->config().gamma + n() - 2.0);
}

double AssembledImmersion::decay_weight(std::size_t el, int side, int m, double t) const {
  const ElementChart& c = M_->elements().at(el);
  if (m % 2 == 0) throw Error(ErrorKind::Parameter, "f_d is defined on extended catenoidal regions (m odd)");
  const double s = side > 0 ? t : c.length - t;
  const double p = c.p0, bb = M_->b_bar(), gamma = M_->config().gamma;
  const double r = rbar(el, t), rin = r_in(el);
  if (s < m * p - bb) return std::pow(r, gamma);
  if (s <= m * p + bb) return std::pow(rin, gamma);
  if (!c.is_ray && m == c.l) return std::pow(r, gamma);
  return std::pow(rin, gamma) * std::pow(rin / r, n() - 2.0 + gamma);
}

SeamReport AssembledImmersion::seams(int t_samples, int n_polar) const {
  SeamReport rep;
  const WeightedGraph& g = M_->graph();
  const double a = M_->a();
  SphereGrid S = SphereGrid::product(n() - 1, n_polar);
  for (std::size_t el = 0; el < g.element_count(); ++el) {
    const ElementChart& c = M_->elements()[el];
    std::vector<double> ts = uniform_grid(a, a + 1.0, t_samples);
    if (!c.is_ray) {
      auto far = uniform_grid(c.length - (a + 1.0), c.length - a, t_samples);
      ts.insert(ts.end(), far.begin(), far.end());
    }
    for (double t : ts)
      for (const VectorXd& th : S.points) {
        auto id = M_->identify(el, t, th);
        if (!id) continue;
        double res = (vertex_point(id->first, id->second) - element_point(el, t, th)).norm();
        if (!M_->in_vertex_chart(id->first, id->second)) res = kInf;
        ++rep.pairs;
        if (!(res <= rep.max_residual)) {
          rep.max_residual = res;
          rep.worst = "vertex:" + g.vertices[id->first].id + " ~ " + (c.is_ray ? "ray:" : "edge:") + g.element_id(el);
        }
      }
  }
  return rep;
}

Dislocation patterned_dislocation(const WeightedGraph& g, double magnitude) {
  Dislocation z = Dislocation::zero(g);
  const int dim = g.n + 1;
  int k = 0;
  auto pattern = [&]() {
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = std::sin(0.7 * (k + 1) * (i + 1) + 0.3);
    ++k;
    return VectorXd(magnitude * v.normalized());
  };
  for (std::size_t el = 0; el < g.element_count(); ++el) {
    z.plus[el] = pattern();
    if (!g.element_is_ray(el)) z.minus[el] = pattern();
  }
  return z;
}

// ---------------------------------------------------------------------------------------------
// Diagnostics

const ChartSamples& SurfaceBundle::chart(const std::string& id) const {
  for (const auto& c : charts)
    if (c.id == id) return c;
  throw Error(ErrorKind::Parameter, "no chart " + id);
}

namespace {

std::string element_chart_id(const WeightedGraph& g, std::size_t el) {
  return (g.element_is_ray(el) ? "ray:" : "edge:") + g.element_id(el);
}

/// Side whose dislocation acts at block parameter tb.
bool dislocated_at(const DelaunayBlock& B, double tb) {
  const bool near = B.is_ray() || tb < 0.5 * (B.t_begin() + B.t_end());
  return !(near ? B.zeta_plus() : B.zeta_minus()).isZero(0.0);
}

}  // namespace

SurfaceBundle diagnose(const AssembledImmersion& Y, const DiagnoseOptions& opts) {
  const AbstractSurface& M = Y.surface();
  const WeightedGraph& g = M.graph();
  const int n = g.n, dim = n + 1;
  SurfaceBundle b;
  b.n = n;
  b.tau_bar = M.tau_bar();
  b.regions = M.regions();

  SphereGrid Sv = SphereGrid::product(n, opts.vertex_polar);
  SphereGrid Se = SphereGrid::product(n - 1, opts.sphere_polar);
  if (Sv.size() == 0 || Se.size() == 0) throw Error(ErrorKind::Resolution, "empty sphere rule");
  for (std::size_t p = 0; p < g.vertices.size(); ++p) {
    ChartSamples c;
    c.id = "vertex:" + g.vertices[p].id;
    c.kind = "vertex";
    c.index = p;
    std::vector<VectorXd> pts;
    for (const VectorXd& x : Sv.points)
      if (M.in_vertex_chart(p, x)) pts.push_back(x);
    c.rows = pts.size();
    c.cols = 1;
    c.param.resize(c.rows, dim);
    c.X.resize(c.rows, dim);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      c.param.row(i) = pts[i].transpose();
      c.X.row(i) = Y.vertex_point(p, pts[i]).transpose();
    }
    c.H.assign(c.rows, 1.0);
    c.rho.assign(c.rows, 1.0);
    c.h_dislocation.assign(c.rows, 0.0);
    c.h_gluing.assign(c.rows, 0.0);
    for (const Attachment& a : g.attachments(p)) c.adjacent.push_back(element_chart_id(g, a.element));
    b.charts.push_back(std::move(c));
  }
  for (std::size_t el = 0; el < g.element_count(); ++el) {
    const ElementChart& ec = M.elements()[el];
    const DelaunayBlock& B = Y.block(el);
    ChartSamples c;
    c.id = element_chart_id(g, el);
    c.kind = ec.is_ray ? "ray" : "edge";
    c.index = el;
    const int N = static_cast<int>(std::ceil((ec.t_end - ec.t_begin) * opts.t_per_unit)) + 1;
    c.t = uniform_grid(ec.t_begin, ec.t_end, std::max(N, 2));
    if (c.t.size() > 1 && c.t[1] - c.t[0] > 0.25)
      throw Error(ErrorKind::Resolution, c.id + ": t spacing exceeds 0.25; cutoff transitions are unresolved");
    c.rows = c.t.size();
    c.cols = Se.size();
    c.param.resize(c.cols, n);
    for (std::size_t j = 0; j < c.cols; ++j) c.param.row(j) = Se.points[j].transpose();
    c.X.resize(c.rows * c.cols, dim);
    c.H.resize(c.rows * c.cols);
    c.rho.resize(c.rows * c.cols);
    c.h_dislocation.assign(c.rows * c.cols, 0.0);
    c.h_gluing.assign(c.rows * c.cols, 0.0);
    for (std::size_t i = 0; i < c.rows; ++i) {
      const double t = c.t[i], tb = Y.td(el, t);
      const bool dis = B.in_dislocation_window(tb) && dislocated_at(B, tb), glu = B.in_gluing_window(tb);
      const double rho = Y.rho(el, t);
      c.row_regions.push_back(M.region_at(el, t).tag);
      for (std::size_t j = 0; j < c.cols; ++j) {
        const std::size_t k = i * c.cols + j;
        SurfaceSample s = Y.element_sample(el, t, Se.points[j]);
        c.X.row(k) = s.X.transpose();
        c.H[k] = s.H;
        c.rho[k] = rho;
        if (dis) c.h_dislocation[k] = B.dislocation_h_error(tb, Se.points[j]);
        if (glu) c.h_gluing[k] = s.H - 1.0;
      }
    }
    if (ec.is_ray)
      c.adjacent.push_back("vertex:" + g.vertices[g.rays[el - g.edges.size()].vertex].id);
    else {
      c.adjacent.push_back("vertex:" + g.vertices[g.edges[el].plus].id);
      c.adjacent.push_back("vertex:" + g.vertices[g.edges[el].minus].id);
    }
    b.charts.push_back(std::move(c));
  }

  double rho_lo = kInf, rho_hi = 0.0, outside = 0.0;
  for (const auto& c : b.charts) {
    if (c.kind == "vertex") continue;
    for (std::size_t i = 0; i < c.rows; ++i) {
      double q = Y.rho(c.index, c.t[i]) / Y.rho0(c.index, c.t[i]);
      rho_lo = std::min(rho_lo, q);
      rho_hi = std::max(rho_hi, q);
      for (std::size_t j = 0; j < c.cols; ++j) {
        const std::size_t k = i * c.cols + j;
        if (c.h_dislocation[k] == 0.0 && c.h_gluing[k] == 0.0) outside = std::max(outside, std::abs(c.H[k] - 1.0));
      }
    }
  }
  SeamReport seam = Y.seams();
  nlohmann::json& m = b.meta;
  m["n"] = n;
  m["tau_bar"] = M.tau_bar();
  m["a"] = M.a();
  m["delta_prime"] = M.delta_prime();
  m["b_bar"] = M.b_bar();
  m["gamma"] = M.config().gamma;
  m["c_bar"] = M.config().c_bar;
  m["m_max"] = M.config().m_max;
  m["seam_residual"] = seam.max_residual;
  m["seam_worst"] = seam.worst;
  m["rho_ratio_min"] = rho_lo;
  m["rho_ratio_max"] = rho_hi;
  m["max_h_error_outside_windows"] = outside;
  GlobalNorm ng = global_norm(Y, b, SampledField::Gluing), nd = global_norm(Y, b, SampledField::Dislocation);
  m["h_gluing_norm"] = ng.value;
  m["h_gluing_argmax"] = ng.argmax;
  m["h_dislocation_norm"] = nd.value;
  m["h_dislocation_argmax"] = nd.argmax;
  return b;
}

GlobalNorm global_norm(const AssembledImmersion& Y, const SurfaceBundle& b, SampledField field, int k) {
  const AbstractSurface& M = Y.surface();
  const double bb = M.b_bar();
  GlobalNorm out;
  auto value_of = [&](const ChartSamples& c, std::size_t idx) {
    switch (field) {
      case SampledField::Dislocation: return c.h_dislocation[idx];
      case SampledField::Gluing: return c.h_gluing[idx];
      case SampledField::H_error: break;
    }
    return c.H[idx] - 1.0;
  };
  // Central regions S_1[p] collect vertex-chart samples and element rows; keyed by vertex.
  std::vector<RegionNorm> central(M.graph().vertices.size());
  for (std::size_t p = 0; p < central.size(); ++p) central[p].tag = "S_1[" + M.graph().vertices[p].id + "]";
  std::vector<RegionNorm> others;
  for (const ChartSamples& c : b.charts) {
    if (c.kind == "vertex") {
      for (std::size_t i = 0; i < c.rows; ++i) central[c.index].sup = std::max(central[c.index].sup, std::abs(value_of(c, i)));
      continue;
    }
    const std::size_t el = c.index;
    const ElementChart& ec = M.elements()[el];
    // Meridian speed and derivatives per column.
    std::vector<std::vector<double>> du(c.cols), speed(c.cols);
    for (std::size_t j = 0; j < c.cols; ++j) {
      std::vector<double> u(c.rows);
      std::vector<std::vector<double>> xs(c.X.cols(), std::vector<double>(c.rows));
      for (std::size_t i = 0; i < c.rows; ++i) {
        u[i] = value_of(c, i * c.cols + j);
        for (Eigen::Index q = 0; q < c.X.cols(); ++q) xs[q][i] = c.X(i * c.cols + j, q);
      }
      du[j] = grid_derivative(c.t, u);
      speed[j].assign(c.rows, 0.0);
      for (auto& x : xs) {
        auto dx = grid_derivative(c.t, x);
        for (std::size_t i = 0; i < c.rows; ++i) speed[j][i] += dx[i] * dx[i];
      }
      for (double& s : speed[j]) s = std::sqrt(s);
    }
    auto accumulate = [&](RegionNorm& rn, double lo, double hi, auto weight) {
      for (std::size_t i = 0; i < c.rows; ++i) {
        const double t = c.t[i];
        if (t < lo || t > hi) continue;
        const double w = weight(t), rho = c.rho[i * c.cols];
        for (std::size_t j = 0; j < c.cols; ++j) {
          rn.sup = std::max(rn.sup, std::abs(value_of(c, i * c.cols + j)) / w);
          if (speed[j][i] > 0.0) rn.gradient = std::max(rn.gradient, rho * std::abs(du[j][i]) / speed[j][i] / w);
        }
      }
    };
    auto one = [](double) { return 1.0; };
    const double delta = Y.delta_factor(el);
    // Norm regions use the full half-width b-bar even where the region index is shrunk.
    auto mirror = [&](int side, double s0, double s1) {
      return side > 0 ? std::pair{s0, s1} : std::pair{ec.length - s1, ec.length - s0};
    };
    for (const Region& r : ec.regions) {
      if (r.kind == RegionKind::Central) {
        auto [lo, hi] = mirror(r.side, M.a(), bb + 1.0);
        accumulate(central[r.vertex], lo, hi, one);
      } else if (r.kind == RegionKind::Standard && r.m % 2 == 0) {
        RegionNorm rn;
        rn.tag = r.tag;
        rn.scale = std::pow(delta, -0.5 * r.m);
        auto [lo, hi] = mirror(r.side, r.m * ec.p0 - bb - 1.0, r.m * ec.p0 + bb + 1.0);
        accumulate(rn, lo, hi, one);
        others.push_back(rn);
      } else if (r.kind == RegionKind::Standard) {
        RegionNorm rn;
        rn.tag = "S~" + r.tag.substr(1);
        rn.scale = std::pow(delta, -0.5 * (r.m - 1));
        auto [lo, hi] = mirror(r.side, (r.m - 1) * ec.p0 + bb, (r.m + 1) * ec.p0 - bb);
        const int side = r.side, m = r.m;
        accumulate(rn, lo, hi, [&](double t) {
          return Y.decay_weight(el, side, m, t) * std::pow(Y.rbar(el, t), k - 2.0);
        });
        others.push_back(rn);
      }
    }
  }
  out.regions = central;
  out.regions.insert(out.regions.end(), others.begin(), others.end());
  for (const RegionNorm& r : out.regions)
    if (r.value() > out.value || out.argmax.empty()) {
      out.value = std::max(out.value, r.value());
      out.argmax = r.tag;
    }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Fluxes and kernel functions

double FluxReport::max_discrepancy() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.discrepancy);
  return m;
}

nlohmann::json FluxReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  for (const auto& e : entries) {
    nlohmann::json m = nlohmann::json::array();
    for (const auto& v : e.meridian) m.push_back(vec(v));
    j.push_back({{"vertex", e.id},
                 {"dunder", vec(e.dunder)},
                 {"closed_form", vec(e.closed_form)},
                 {"literal_form", vec(e.literal_form)},
                 {"meridian", m},
                 {"discrepancy", e.discrepancy}});
  }
  return j;
}

FluxEntry vertex_flux(const AssembledImmersion& Y, std::size_t vertex, const FluxOptions& opts) {
  const AbstractSurface& M = Y.surface();
  const WeightedGraph& g = M.graph();
  const int n = g.n, dim = n + 1;
  const double a = M.a();
  SphereGrid S = SphereGrid::product(n - 1, opts.n_polar);
  FluxEntry f;
  f.vertex = vertex;
  f.id = g.vertices.at(vertex).id;
  VectorXd integral = VectorXd::Zero(dim), closed = VectorXd::Zero(dim);
  double scale = 0.0;
  for (const Attachment& at : g.attachments(vertex)) {
    const DelaunayBlock& B = Y.block(at.element);
    const MatrixXd& R = Y.rotation(at.element);
    const double T = B.is_ray() ? 0.0 : 2.0 * B.profile().p() * B.periods();
    // H - 1 is supported in the middle thirds of the dislocation and gluing collars.
    VectorXd m = VectorXd::Zero(dim);
    for (double c : {a + 1.5, a + 3.5}) {
      const double mid = at.sign > 0 ? c : T - c;
      const bool dislocation = c < a + 2.0;
      QuadRule q = composite_gauss(mid - 1.0 / 6.0, mid + 1.0 / 6.0, opts.panels, opts.order);
      for (std::size_t i = 0; i < q.x.size(); ++i)
        for (std::size_t j = 0; j < S.size(); ++j) {
          SurfaceSample s = B.sample(q.x[i], S.points[j]);
          const double h = dislocation ? B.dislocation_h_error(q.x[i], S.points[j]) : s.H - 1.0;
          m += (q.w[i] * S.weights[j] * h * s.density) * s.N;
        }
    }
    f.meridian.push_back(R * m);
    integral += R * m;
    closed += (B.tau() * at.sign) * R.col(0);
    scale += std::abs(B.tau());
  }
  const double wn = omega_tilde(n), wn1 = omega_tilde(n - 1);
  f.dunder = integral / std::sqrt(wn);
  f.closed_form = closed * (wn1 / std::sqrt(wn));
  f.literal_form = closed * std::sqrt(wn);
  const double ref = std::max(f.closed_form.norm(), scale * wn1 / std::sqrt(wn));
  f.discrepancy = ref > 0.0 ? (f.dunder - f.closed_form).norm() / ref : f.dunder.norm();
  return f;
}

FluxReport flux_report(const AssembledImmersion& Y, const FluxOptions& opts) {
  FluxReport r;
  for (std::size_t p = 0; p < Y.surface().graph().vertices.size(); ++p) r.entries.push_back(vertex_flux(Y, p, opts));
  return r;
}

MatrixXd kernel_gram(const AssembledImmersion& Y, std::size_t vertex, int n_polar, int panels) {
  const AbstractSurface& M = Y.surface();
  const WeightedGraph& g = M.graph();
  const int n = g.n, dim = n + 1;
  const double a = M.a();
  MatrixXd G = MatrixXd::Zero(dim, dim);
  auto add = [&G](const VectorXd& N, double w) { G += w * N * N.transpose(); };
  // Vertex chart minus the caps covered by the element collars (angle acos(tanh a) > delta'),
  // so that the overlaps are counted once; caps integrated in polar coordinates.
  const double cap = std::acos(std::tanh(a));
  SphereGrid Sn = SphereGrid::product(n, 2 * n_polar);
  for (std::size_t i = 0; i < Sn.size(); ++i) add(-Y.sphere_map(vertex)(Sn.points[i]), Sn.weights[i]);
  SphereGrid Sm = SphereGrid::product(n - 1, n_polar);
  QuadRule qphi = gauss_legendre(2 * n_polar, 0.0, cap);
  const auto& W = M.vertex_frames(vertex);
  for (const MatrixXd& F : W)
    for (std::size_t i = 0; i < qphi.x.size(); ++i)
      for (std::size_t j = 0; j < Sm.size(); ++j) {
        const double phi = qphi.x[i];
        VectorXd x = std::cos(phi) * F.col(0) + std::sin(phi) * (F.rightCols(n) * Sm.points[j]);
        add(-Y.sphere_map(vertex)(x), -qphi.w[i] * Sm.weights[j] * std::pow(std::sin(phi), n - 1));
      }
  // Element collars from a to p_d in block coordinates.
  for (const Attachment& at : g.attachments(vertex)) {
    const DelaunayBlock& B = Y.block(at.element);
    const double pd = B.profile().p(), T = B.is_ray() ? 0.0 : 2.0 * pd * B.periods();
    const double lo = at.sign > 0 ? a : T - pd, hi = at.sign > 0 ? pd : T - a;
    QuadRule q = composite_gauss(lo, hi, panels, 10);
    for (std::size_t i = 0; i < q.x.size(); ++i)
      for (std::size_t j = 0; j < Sm.size(); ++j) {
        SurfaceSample s = B.sample(q.x[i], Sm.points[j]);
        add(Y.rotation(at.element) * s.N, q.w[i] * Sm.weights[j] * s.density);
      }
  }
  return G / omega_tilde(n);
}

double central_deviation(const AssembledImmersion& Y, std::size_t vertex, double x, int t_per_unit, int n_polar) {
  const AbstractSurface& M = Y.surface();
  const WeightedGraph& g = M.graph();
  const int n = g.n;
  const VectorXd& pv = Y.vertex_position(vertex);
  double dev = 0.0;
  SphereGrid Sv = SphereGrid::product(n, 2 * n_polar);
  for (const VectorXd& y : Sv.points)
    if (M.in_vertex_chart(vertex, y)) dev = std::max(dev, (Y.vertex_point(vertex, y) - pv - y).norm());
  SphereGrid Se = SphereGrid::product(n - 1, n_polar);
  const double a = M.a(), hi = M.b_bar() + x;
  const int N = static_cast<int>(std::ceil((hi - a) * t_per_unit)) + 1;
  for (const Attachment& at : g.attachments(vertex)) {
    const ElementChart& c = M.elements()[at.element];
    const MatrixXd& F = M.element_frame(at.element);
    for (double s : uniform_grid(a, hi, N)) {
      const double t = at.sign > 0 ? s : c.length - s;
      for (const VectorXd& th : Se.points) {
        VectorXd lim = F * y0_point(at.sign > 0 ? t : t - c.length, th);
        dev = std::max(dev, (Y.element_point(at.element, t, th) - pv - lim).norm());
      }
    }
  }
  return dev;
}

}  // namespace cmc
