#include "cmc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cmc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd read_vector(const nlohmann::json& j, int dim, const std::string& what) {
  if (!j.is_array() || int(j.size()) != dim)
    throw Error(ErrorKind::Structural, what + ": expected an array of " + std::to_string(dim) + " reals");
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::Structural, what + ": non-numeric entry");
    v(i) = j[i].get<double>();
    if (!std::isfinite(v(i))) throw Error(ErrorKind::Structural, what + ": non-finite entry");
  }
  return v;
}

std::string req_string(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_string())
    throw Error(ErrorKind::Structural, ctx + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

double req_number(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_number())
    throw Error(ErrorKind::Structural, ctx + ": missing numeric field '" + key + "'");
  return j[key].get<double>();
}

}  // namespace

WeightedGraph WeightedGraph::from_json(const nlohmann::json& j, bool auto_normalize) {
  if (!j.is_object()) throw Error(ErrorKind::Structural, "graph must be an object");
  WeightedGraph g;
  if (!j.contains("n") || !j["n"].is_number_integer()) throw Error(ErrorKind::Structural, "missing integer field 'n'");
  g.n = j["n"].get<int>();
  if (g.n < 3) throw Error(ErrorKind::Domain, "dimension n must be at least 3");
  const int dim = g.n + 1;
  auto arr = [&](const char* key) {
    if (!j.contains(key)) return nlohmann::json::array();
    if (!j[key].is_array()) throw Error(ErrorKind::Structural, std::string("field '") + key + "' must be an array");
    return j[key];
  };
  for (const auto& v : arr("vertices")) {
    std::string id = req_string(v, "id", "vertex");
    if (!v.contains("pos")) throw Error(ErrorKind::Structural, "vertex " + id + ": missing 'pos'");
    g.vertices.push_back({id, read_vector(v["pos"], dim, "vertex " + id)});
  }
  for (const auto& e : arr("edges")) {
    Edge E;
    E.id = req_string(e, "id", "edge");
    E.from = req_string(e, "from", "edge " + E.id);
    E.to = req_string(e, "to", "edge " + E.id);
    E.tau_hat = req_number(e, "tau_hat", "edge " + E.id);
    g.edges.push_back(E);
  }
  for (const auto& r : arr("rays")) {
    Ray R;
    R.id = req_string(r, "id", "ray");
    R.from = req_string(r, "from", "ray " + R.id);
    R.tau_hat = req_number(r, "tau_hat", "ray " + R.id);
    if (!r.contains("dir")) throw Error(ErrorKind::Structural, "ray " + R.id + ": missing 'dir'");
    R.dir = read_vector(r["dir"], dim, "ray " + R.id);
    double nr = R.dir.norm();
    if (nr == 0.0) throw Error(ErrorKind::Structural, "ray " + R.id + ": zero direction");
    if (std::abs(nr - 1.0) > 1e-12) {
      if (!auto_normalize) throw Error(ErrorKind::Structural, "ray " + R.id + ": direction is not a unit vector");
      R.dir /= nr;
    }
    g.rays.push_back(R);
  }
  g.finalize();
  return g;
}

WeightedGraph WeightedGraph::parse(const std::string& text, bool auto_normalize) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    int line = 1 + int(std::count(text.begin(), text.begin() + upto, '\n'));
    throw Error(ErrorKind::Structural, "graph parse error at line " + std::to_string(line) + ": " + e.what());
  }
  return from_json(j, auto_normalize);
}

WeightedGraph WeightedGraph::load(const std::string& path, bool auto_normalize) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open graph file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), auto_normalize);
}

nlohmann::json WeightedGraph::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : vertices) j["vertices"].push_back({{"id", v.id}, {"pos", vec(v.pos)}});
  j["edges"] = nlohmann::json::array();
  for (const auto& e : edges) j["edges"].push_back({{"id", e.id}, {"from", e.from}, {"to", e.to}, {"tau_hat", e.tau_hat}});
  j["rays"] = nlohmann::json::array();
  for (const auto& r : rays)
    j["rays"].push_back({{"id", r.id}, {"from", r.from}, {"dir", vec(r.dir)}, {"tau_hat", r.tau_hat}});
  return j;
}

void WeightedGraph::finalize() {
  std::vector<std::string> bad;
  std::set<std::string> vid, eid;
  for (const auto& v : vertices) {
    if (!vid.insert(v.id).second) bad.push_back("duplicate vertex id " + v.id);
    if (v.pos.size() != n + 1) bad.push_back("vertex " + v.id + " has wrong dimension");
  }
  if (vertices.empty()) bad.push_back("graph has no vertices");
  auto index_of = [&](const std::string& id) -> long {
    for (std::size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i].id == id) return long(i);
    return -1;
  };
  for (auto& e : edges) {
    if (!eid.insert(e.id).second) bad.push_back("duplicate edge/ray id " + e.id);
    long a = index_of(e.from), b = index_of(e.to);
    if (a < 0 || b < 0) {
      bad.push_back("edge " + e.id + " has an unknown endpoint");
      continue;
    }
    if (a == b) bad.push_back("edge " + e.id + " is a loop");
    if (!(e.tau_hat != 0.0) || !std::isfinite(e.tau_hat)) bad.push_back("edge " + e.id + " has zero tau_hat");
    bool from_is_plus = e.from < e.to;
    e.plus = std::size_t(from_is_plus ? a : b);
    e.minus = std::size_t(from_is_plus ? b : a);
    if ((vertices[e.plus].pos - vertices[e.minus].pos).norm() == 0.0) bad.push_back("edge " + e.id + " has zero length");
  }
  for (auto& r : rays) {
    if (!eid.insert(r.id).second) bad.push_back("duplicate edge/ray id " + r.id);
    long a = index_of(r.from);
    if (a < 0) {
      bad.push_back("ray " + r.id + " has an unknown endpoint");
      continue;
    }
    r.vertex = std::size_t(a);
    if (!(r.tau_hat != 0.0) || !std::isfinite(r.tau_hat)) bad.push_back("ray " + r.id + " has zero tau_hat");
    if (r.dir.size() != n + 1) bad.push_back("ray " + r.id + " has wrong dimension");
  }
  if (!bad.empty()) {
    std::string msg;
    for (const auto& b : bad) msg += (msg.empty() ? "" : "; ") + b;
    throw Error(ErrorKind::Structural, msg);
  }
}

double WeightedGraph::element_tau_hat(std::size_t el) const {
  return element_is_ray(el) ? rays[el - edges.size()].tau_hat : edges[el].tau_hat;
}

std::string WeightedGraph::element_id(std::size_t el) const {
  return element_is_ray(el) ? rays[el - edges.size()].id : edges[el].id;
}

std::size_t WeightedGraph::vertex_index(const std::string& id) const {
  for (std::size_t i = 0; i < vertices.size(); ++i)
    if (vertices[i].id == id) return i;
  throw Error(ErrorKind::Structural, "unknown vertex " + id);
}

VectorXd WeightedGraph::direction(const Attachment& a) const {
  if (a.is_ray) return rays[a.element - edges.size()].dir.normalized();
  const Edge& e = edges[a.element];
  std::size_t other = (a.vertex == e.plus) ? e.minus : e.plus;
  return (vertices[other].pos - vertices[a.vertex].pos).normalized();
}

VectorXd WeightedGraph::v1(std::size_t el) const {
  if (element_is_ray(el)) return rays[el - edges.size()].dir.normalized();
  const Edge& e = edges[el];
  return (vertices[e.minus].pos - vertices[e.plus].pos).normalized();
}

double WeightedGraph::half_length(std::size_t edge) const {
  const Edge& e = edges[edge];
  return 0.5 * (vertices[e.minus].pos - vertices[e.plus].pos).norm();
}

std::vector<Attachment> WeightedGraph::attachments(std::size_t vertex) const {
  std::vector<Attachment> out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].plus == vertex) out.push_back({vertex, i, false, 1});
    if (edges[i].minus == vertex) out.push_back({vertex, i, false, -1});
  }
  for (std::size_t i = 0; i < rays.size(); ++i)
    if (rays[i].vertex == vertex) out.push_back({vertex, edges.size() + i, true, 1});
  return out;
}

std::vector<Attachment> WeightedGraph::all_attachments() const {
  std::vector<Attachment> out;
  for (std::size_t p = 0; p < vertices.size(); ++p) {
    auto a = attachments(p);
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

double omega_tilde(int m) { return sphere_volume(m) / (m + 1); }

namespace {
double dhat_constant(int n) { return omega_tilde(n - 1) / std::sqrt(omega_tilde(n)); }

// Distance between {A + s u : 0 <= s <= L} and {B + t w : 0 <= t <= M} (L, M may be infinite).
double piece_distance(const VectorXd& A, const VectorXd& u, double L, const VectorXd& B, const VectorXd& w, double M) {
  auto clampv = [](double x, double hi) { return std::max(0.0, std::min(x, hi)); };
  double uu = u.dot(u), ww = w.dot(w), uw = u.dot(w);
  VectorXd d0 = A - B;
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](double s, double t) { best = std::min(best, (A + s * u - B - t * w).norm()); };
  double det = uu * ww - uw * uw;
  if (det > 1e-14 * uu * ww) {
    double s = (uw * w.dot(d0) - ww * u.dot(d0)) / det;
    double t = (uu * w.dot(d0) - uw * u.dot(d0)) / det;
    if (s >= 0 && s <= L && t >= 0 && t <= M) consider(s, t);
  }
  for (double s : {0.0, L}) {
    if (!std::isfinite(s)) continue;
    double t = clampv(w.dot(d0 + s * u) / ww, M);
    consider(s, t);
  }
  for (double t : {0.0, M}) {
    if (!std::isfinite(t)) continue;
    double s = clampv(u.dot(B + t * w - A) / uu, L);
    consider(s, t);
  }
  return best;
}
}  // namespace

std::vector<VectorXd> dhat(const WeightedGraph& g) {
  double c = dhat_constant(g.n);
  std::vector<VectorXd> out;
  for (std::size_t p = 0; p < g.vertices.size(); ++p) {
    VectorXd s = VectorXd::Zero(g.n + 1);
    for (const auto& a : g.attachments(p)) s += g.element_tau_hat(a.element) * g.direction(a);
    out.push_back(c * s);
  }
  return out;
}

std::string BalanceReport::summary() const {
  std::ostringstream os;
  std::string c = central ? "yes" : "no";
  for (const auto& d : diagnostics)
    if (!central && d.rfind("central: ", 0) == 0) {
      c = d.substr(9);
      break;
    }
  os << "balanced: " << (balanced ? "yes" : "no") << ", central: " << c
     << ", pre-embedded: " << (pre_embedded ? "yes" : "no");
  return os.str();
}

BalanceReport balance_check(const WeightedGraph& g, double balance_tol, double length_tol) {
  BalanceReport R;
  R.dhat = dhat(g);
  for (const auto& d : R.dhat) R.max_dhat = std::max(R.max_dhat, d.norm());
  R.balanced = R.max_dhat <= balance_tol;
  if (!R.balanced) R.diagnostics.push_back("balance: max |d-hat| = " + std::to_string(R.max_dhat));
  bool integer = true;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    double l = g.half_length(e);
    if (std::abs(l - std::round(l)) > length_tol || std::round(l) < 1) {
      integer = false;
      std::ostringstream os;
      os << "central: no (non-integer half-length " << l << " on edge " << g.edges[e].id << ")";
      R.diagnostics.push_back(os.str());
    }
  }
  R.central = R.balanced && integer;
  bool pre = R.central;
  for (std::size_t el = 0; el < g.element_count(); ++el)
    if (!(g.element_tau_hat(el) > 0)) {
      pre = false;
      R.diagnostics.push_back("pre-embedded: negative weight on " + g.element_id(el));
    }
  for (std::size_t p = 0; p < g.vertices.size(); ++p) {
    auto at = g.attachments(p);
    for (std::size_t i = 0; i < at.size(); ++i)
      for (std::size_t j = i + 1; j < at.size(); ++j) {
        double c = std::max(-1.0, std::min(1.0, g.direction(at[i]).dot(g.direction(at[j]))));
        if (std::acos(c) < M_PI / 3 - 1e-12) {
          pre = false;
          R.diagnostics.push_back("pre-embedded: angle between " + g.element_id(at[i].element) + " and " +
                                  g.element_id(at[j].element) + " below pi/3");
        }
      }
  }
  auto piece = [&](std::size_t el, VectorXd& A, VectorXd& u, double& L, std::vector<std::size_t>& ends) {
    if (g.element_is_ray(el)) {
      const Ray& r = g.rays[el - g.edges.size()];
      A = g.vertices[r.vertex].pos;
      u = r.dir.normalized();
      L = std::numeric_limits<double>::infinity();
      ends = {r.vertex};
    } else {
      const Edge& e = g.edges[el];
      A = g.vertices[e.plus].pos;
      VectorXd d = g.vertices[e.minus].pos - A;
      L = d.norm();
      u = d / L;
      ends = {e.plus, e.minus};
    }
  };
  for (std::size_t a = 0; a < g.element_count(); ++a)
    for (std::size_t b = a + 1; b < g.element_count(); ++b) {
      VectorXd A, u, B, w;
      double L, M;
      std::vector<std::size_t> ea, eb;
      piece(a, A, u, L, ea);
      piece(b, B, w, M, eb);
      bool share = false;
      for (auto x : ea)
        for (auto y : eb) share = share || x == y;
      if (share) continue;
      if (piece_distance(A, u, L, B, w, M) <= 2.0) {
        pre = false;
        R.diagnostics.push_back("pre-embedded: " + g.element_id(a) + " and " + g.element_id(b) + " closer than 2");
      }
    }
  for (std::size_t a = 0; a < g.rays.size(); ++a)
    for (std::size_t b = a + 1; b < g.rays.size(); ++b)
      if (1.0 - g.rays[a].dir.normalized().dot(g.rays[b].dir.normalized()) <= 0.0) {
        pre = false;
        R.diagnostics.push_back("pre-embedded: rays " + g.rays[a].id + " and " + g.rays[b].id + " are parallel");
      }
  R.pre_embedded = pre;
  return R;
}

MatrixXd rotate_to(const VectorXd& x, const VectorXd& y) {
  if (x.size() != y.size()) throw Error(ErrorKind::Parameter, "rotation vectors differ in dimension");
  if (std::abs(x.norm() - 1.0) > 1e-10 || std::abs(y.norm() - 1.0) > 1e-10)
    throw Error(ErrorKind::Parameter, "rotation requires unit vectors");
  double c = x.dot(y);
  if (!(c > 0.0)) throw Error(ErrorKind::Domain, "rotation requires angle(x, y) < pi/2");
  MatrixXd K = y * x.transpose() - x * y.transpose();
  return MatrixXd::Identity(x.size(), x.size()) + K + (K * K) / (1.0 + c);
}

MatrixXd complete_frame(const VectorXd& v1) {
  const int d = int(v1.size());
  MatrixXd F(d, d);
  F.col(0) = v1.normalized();
  int k = 1;
  for (int i = 0; i < d && k < d; ++i) {
    VectorXd c = VectorXd::Unit(d, i);
    for (int j = 0; j < k; ++j) c -= F.col(j).dot(c) * F.col(j);
    for (int j = 0; j < k; ++j) c -= F.col(j).dot(c) * F.col(j);
    double nc = c.norm();
    if (nc < 1e-6) continue;
    F.col(k++) = c / nc;
  }
  if (F.determinant() < 0) F.col(d - 1) *= -1.0;
  return F;
}

MatrixXd propagate_frame(const MatrixXd& frame, const VectorXd& v1_new) {
  return rotate_to(frame.col(0), v1_new.normalized()) * frame;
}

namespace {

struct NewtonResult {
  VectorXd x;
  double residual;
};

template <class F>
NewtonResult damped_newton(F&& system, VectorXd x, const FamilyOptions& o, const std::string& stage) {
  VectorXd r;
  MatrixXd J;
  system(x, r, J);
  double res = r.cwiseAbs().maxCoeff();
  for (int it = 0; it < o.max_iter && res > o.tol; ++it) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(J);
    VectorXd dx = -cod.solve(r);
    double alpha = 1.0;
    VectorXd xn, rn;
    MatrixXd Jn;
    double resn = res;
    while (alpha > 1e-6) {
      xn = x + alpha * dx;
      system(xn, rn, Jn);
      resn = rn.cwiseAbs().maxCoeff();
      if (resn < res) break;
      alpha *= 0.5;
    }
    if (!(resn < res)) break;
    x = xn;
    r = rn;
    J = Jn;
    res = resn;
  }
  if (!(res <= std::max(o.tol, 1e-11)))
    throw Error(ErrorKind::FamilyRealization, stage + " did not converge; residual " + std::to_string(res));
  return {x, res};
}

}  // namespace

FamilyPoint realize_family(const WeightedGraph& central, const std::vector<VectorXd>& dtilde,
                           const std::vector<double>& elltilde, const FamilyOptions& opts) {
  const WeightedGraph& g = central;
  const int d = g.n + 1;
  const std::size_t V = g.vertices.size(), E = g.edges.size(), R = g.rays.size();
  if (dtilde.size() != V || elltilde.size() != E)
    throw Error(ErrorKind::Parameter, "family parameters do not match the graph");
  for (const auto& v : dtilde)
    if (v.size() != d || v.norm() > opts.radius) throw Error(ErrorKind::Parameter, "d-tilde outside the family ball");
  for (double l : elltilde)
    if (std::abs(l) > opts.radius) throw Error(ErrorKind::Parameter, "l-tilde outside the family ball");
  const double c = dhat_constant(g.n);

  FamilyPoint fp;
  fp.base = g;
  fp.dtilde = dtilde;
  fp.elltilde = elltilde;
  std::vector<double> l0(E);
  for (std::size_t e = 0; e < E; ++e) l0[e] = g.half_length(e);

  // Stage 1: unknowns are vertex positions then ray directions.
  VectorXd x(d * (V + R));
  for (std::size_t p = 0; p < V; ++p) x.segment(d * p, d) = g.vertices[p].pos;
  for (std::size_t r = 0; r < R; ++r) x.segment(d * (V + r), d) = g.rays[r].dir;
  auto stage1 = [&](const VectorXd& y, VectorXd& F, MatrixXd& J) {
    F = VectorXd::Zero(d * V + E + R);
    J = MatrixXd::Zero(F.size(), y.size());
    for (std::size_t p = 0; p < V; ++p) F.segment(d * p, d) = -dtilde[p];
    for (std::size_t e = 0; e < E; ++e) {
      std::size_t a = g.edges[e].plus, b = g.edges[e].minus;
      VectorXd D = y.segment(d * b, d) - y.segment(d * a, d);
      double L = D.norm();
      VectorXd u = D / L;
      MatrixXd P = (MatrixXd::Identity(d, d) - u * u.transpose()) / L;
      double w = c * g.edges[e].tau_hat;
      F.segment(d * a, d) += w * u;
      F.segment(d * b, d) -= w * u;
      J.block(d * a, d * b, d, d) += w * P;
      J.block(d * a, d * a, d, d) -= w * P;
      J.block(d * b, d * b, d, d) -= w * P;
      J.block(d * b, d * a, d, d) += w * P;
      F(d * V + e) = L - 2.0 * l0[e];
      J.block(d * V + e, d * b, 1, d) += u.transpose();
      J.block(d * V + e, d * a, 1, d) -= u.transpose();
    }
    for (std::size_t r = 0; r < R; ++r) {
      std::size_t p = g.rays[r].vertex;
      VectorXd D = y.segment(d * (V + r), d);
      double L = D.norm();
      VectorXd u = D / L;
      MatrixXd P = (MatrixXd::Identity(d, d) - u * u.transpose()) / L;
      double w = c * g.rays[r].tau_hat;
      F.segment(d * p, d) += w * u;
      J.block(d * p, d * (V + r), d, d) += w * P;
      F(d * V + E + r) = 0.5 * (D.squaredNorm() - 1.0);
      J.block(d * V + E + r, d * (V + r), 1, d) = D.transpose();
    }
  };
  NewtonResult s1 = damped_newton(stage1, x, opts, "unbalancing solve");
  fp.unbalanced = g;
  for (std::size_t p = 0; p < V; ++p) fp.unbalanced.vertices[p].pos = s1.x.segment(d * p, d);
  for (std::size_t r = 0; r < R; ++r) {
    VectorXd D = s1.x.segment(d * (V + r), d);
    fp.unbalanced.rays[r].dir = std::abs(D.norm() - 1.0) <= 1e-15 ? D : D.normalized();
  }
  auto dh = dhat(fp.unbalanced);
  for (std::size_t p = 0; p < V; ++p) fp.dhat_residual = std::max(fp.dhat_residual, (dh[p] - dtilde[p]).norm());

  // Stage 2: vertex positions only, lengths 2(l + l~).
  VectorXd y(d * V);
  for (std::size_t p = 0; p < V; ++p) y.segment(d * p, d) = fp.unbalanced.vertices[p].pos;
  auto stage2 = [&](const VectorXd& z, VectorXd& F, MatrixXd& J) {
    F = VectorXd::Zero(E);
    J = MatrixXd::Zero(E, z.size());
    for (std::size_t e = 0; e < E; ++e) {
      std::size_t a = g.edges[e].plus, b = g.edges[e].minus;
      VectorXd D = z.segment(d * b, d) - z.segment(d * a, d);
      double L = D.norm();
      F(e) = L - 2.0 * (l0[e] + elltilde[e]);
      J.block(e, d * b, 1, d) = (D / L).transpose();
      J.block(e, d * a, 1, d) = -(D / L).transpose();
    }
  };
  NewtonResult s2 = E > 0 ? damped_newton(stage2, y, opts, "flexibility solve") : NewtonResult{y, 0.0};
  fp.realized = fp.unbalanced;
  for (std::size_t p = 0; p < V; ++p) fp.realized.vertices[p].pos = s2.x.segment(d * p, d);
  for (std::size_t e = 0; e < E; ++e)
    fp.length_residual = std::max(fp.length_residual,
                                  std::abs(fp.realized.half_length(e) - l0[e] - elltilde[e]));
  if (fp.dhat_residual > 1e-8 || fp.length_residual > 1e-10)
    throw Error(ErrorKind::FamilyRealization, "family residuals above tolerance");

  for (std::size_t el = 0; el < g.element_count(); ++el) {
    MatrixXd F0 = complete_frame(g.v1(el));
    fp.base_frames.push_back(F0);
    fp.frames.push_back(propagate_frame(F0, fp.realized.v1(el)));
  }
  return fp;
}

nlohmann::json FamilyPoint::to_json() const {
  nlohmann::json j;
  j["unbalanced"] = unbalanced.to_json();
  j["realized"] = realized.to_json();
  j["dhat_residual"] = dhat_residual;
  j["length_residual"] = length_residual;
  j["dtilde"] = nlohmann::json::array();
  for (const auto& v : dtilde) j["dtilde"].push_back(std::vector<double>(v.data(), v.data() + v.size()));
  j["elltilde"] = elltilde;
  j["frames"] = nlohmann::json::array();
  for (const auto& F : frames) {
    nlohmann::json cols = nlohmann::json::array();
    for (int i = 0; i < F.cols(); ++i) {
      Eigen::VectorXd c = F.col(i);
      cols.push_back(std::vector<double>(c.data(), c.data() + c.size()));
    }
    j["frames"].push_back(cols);
  }
  return j;
}

std::shared_ptr<const DelaunayProfile> ProfileCache::get(int n, double tau) {
  auto key = std::make_pair(n, tau);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto P = DelaunayProfile::solve(n, tau, opts_);
  cache_[key] = P;
  return P;
}

Dislocation Dislocation::zero(const WeightedGraph& g) {
  Dislocation z;
  z.plus.assign(g.element_count(), VectorXd::Zero(g.n + 1));
  z.minus.assign(g.element_count(), VectorXd::Zero(g.n + 1));
  return z;
}

double Dislocation::max_norm() const {
  double m = 0.0;
  for (const auto& v : plus) m = std::max(m, v.norm());
  for (const auto& v : minus) m = std::max(m, v.norm());
  return m;
}

EdgeTargets edge_targets(const WeightedGraph& g, double tau_bar, const Dislocation& zeta, double c_bar,
                         ProfileCache& cache) {
  if (zeta.plus.size() != g.element_count() || zeta.minus.size() != g.element_count())
    throw Error(ErrorKind::Parameter, "dislocation map does not match the graph");
  if (zeta.max_norm() > c_bar * std::abs(tau_bar) * (1.0 + 1e-12))
    throw Error(ErrorKind::Parameter, "dislocation exceeds C-bar |tau-bar|");
  const int d = g.n + 1;
  EdgeTargets T;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    double l = std::round(g.half_length(e));
    auto P = cache.get(g.n, tau_bar * g.edges[e].tau_hat);
    double lt = (2.0 + 2.0 * P->phat()) * l;
    VectorXd D = zeta.minus[e] + lt * VectorXd::Unit(d, 0) - zeta.plus[e];
    T.ltilde.push_back(lt);
    T.elltilde.push_back(0.5 * D.norm() - l);
    T.frames.push_back(rotate_to(VectorXd::Unit(d, 0), D.normalized()));
  }
  for (std::size_t r = 0; r < g.rays.size(); ++r) T.frames.push_back(MatrixXd::Identity(d, d));
  return T;
}

}  // namespace cmc
