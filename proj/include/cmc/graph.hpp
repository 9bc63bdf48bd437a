#pragma once
/// @file graph.hpp
/// @brief Weighted graphs with edges and rays, balancing diagnostics, frames, rotations
/// and the built-in deformation family Gamma(d~, l~).

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cmc/delaunay.hpp"
#include "json.hpp"

namespace cmc {

struct Vertex {
  std::string id;
  Eigen::VectorXd pos;
};

struct Edge {
  std::string id;
  std::string from, to;
  double tau_hat = 0.0;
  std::size_t plus = 0, minus = 0;  ///< vertex indices of p^+[e], p^-[e]
};

struct Ray {
  std::string id;
  std::string from;
  Eigen::VectorXd dir;
  double tau_hat = 0.0;
  std::size_t vertex = 0;
};

/// @brief An attachment [p, e]; element indexes edges first, then rays.
struct Attachment {
  std::size_t vertex = 0;
  std::size_t element = 0;
  bool is_ray = false;
  int sign = 1;  ///< sgn[p,e]: +1 at p^+ (and rays), -1 at p^-
};

/// @brief Finite graph in R^{n+1} with weights tau_hat on edges and rays.
class WeightedGraph {
 public:
  int n = 3;
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::vector<Ray> rays;

  /// @brief Parse the graph format; throws Structural errors naming offending ids.
  static WeightedGraph from_json(const nlohmann::json& j, bool auto_normalize = false);
  /// @brief Parse text; parse errors report the line.
  static WeightedGraph parse(const std::string& text, bool auto_normalize = false);
  static WeightedGraph load(const std::string& path, bool auto_normalize = false);
  nlohmann::json to_json() const;

  /// @brief Resolve endpoint indices and orientation (p^+ is the smaller id); check well-formedness.
  void finalize();

  std::size_t element_count() const { return edges.size() + rays.size(); }
  bool element_is_ray(std::size_t el) const { return el >= edges.size(); }
  double element_tau_hat(std::size_t el) const;
  std::string element_id(std::size_t el) const;
  std::size_t vertex_index(const std::string& id) const;

  /// @brief Unit vector v[p,e] pointing from p along e.
  Eigen::VectorXd direction(const Attachment& a) const;
  /// @brief v_1[e] = v[p^+[e], e] (ray direction for rays).
  Eigen::VectorXd v1(std::size_t element) const;
  /// @brief Half-length l[e].
  double half_length(std::size_t edge) const;
  std::vector<Attachment> attachments(std::size_t vertex) const;
  std::vector<Attachment> all_attachments() const;
};

/// @brief omega-tilde_{k-1} = omega_{k-1} / k, i.e. omega-tilde_m = omega_m / (m+1).
double omega_tilde(int m);

struct BalanceReport {
  std::vector<Eigen::VectorXd> dhat;
  bool balanced = false;
  bool central = false;
  bool pre_embedded = false;
  double max_dhat = 0.0;
  std::vector<std::string> diagnostics;
  std::string summary() const;
};

/// @brief d-hat[p] = (omega~_{n-1} / omega~_n^{1/2}) sum tau_hat[e] v[p,e].
std::vector<Eigen::VectorXd> dhat(const WeightedGraph& g);
BalanceReport balance_check(const WeightedGraph& g, double balance_tol = 1e-10, double length_tol = 1e-9);

/// @brief Rotation in span{x, y} taking unit x to unit y (angle < pi/2).
Eigen::MatrixXd rotate_to(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// @brief Positively oriented orthonormal frame (columns) with a prescribed first vector.
Eigen::MatrixXd complete_frame(const Eigen::VectorXd& v1);
/// @brief Frame {R[v1, v1'] v_i}.
Eigen::MatrixXd propagate_frame(const Eigen::MatrixXd& frame, const Eigen::VectorXd& v1_new);

struct FamilyOptions {
  double tol = 1e-13;
  int max_iter = 60;
  double radius = 0.5;  ///< bound on the parameter norms
};

/// @brief A realized member of the built-in family.
struct FamilyPoint {
  WeightedGraph base;        ///< Gamma = Gamma(0,0)
  WeightedGraph unbalanced;  ///< Gamma(d~, 0)
  WeightedGraph realized;    ///< Gamma(d~, l~)
  std::vector<Eigen::VectorXd> dtilde;
  std::vector<double> elltilde;
  std::vector<Eigen::MatrixXd> base_frames;  ///< F_Gamma[e] per element
  std::vector<Eigen::MatrixXd> frames;       ///< F_{Gamma(d~,l~)}[e] per element
  double dhat_residual = 0.0;
  double length_residual = 0.0;
  nlohmann::json to_json() const;
};

/// @brief Gamma(d~, 0) by minimal-norm Newton on vertices and ray directions with edge
/// lengths held, then Gamma(d~, l~) by minimal-norm Newton on vertices.
FamilyPoint realize_family(const WeightedGraph& central, const std::vector<Eigen::VectorXd>& dtilde,
                           const std::vector<double>& elltilde, const FamilyOptions& opts = {});

/// @brief Shared Delaunay profiles keyed by (n, tau).
class ProfileCache {
 public:
  explicit ProfileCache(ProfileOptions opts = {}) : opts_(opts) {}
  std::shared_ptr<const DelaunayProfile> get(int n, double tau);

 private:
  ProfileOptions opts_;
  std::map<std::pair<int, double>, std::shared_ptr<const DelaunayProfile>> cache_;
};

/// @brief Dislocations zeta[p,e]: plus[el] at p^+ (or the ray vertex), minus[el] at p^- for edges.
struct Dislocation {
  std::vector<Eigen::VectorXd> plus, minus;
  static Dislocation zero(const WeightedGraph& g);
  double max_norm() const;
};

struct EdgeTargets {
  std::vector<double> elltilde;        ///< per edge
  std::vector<double> ltilde;          ///< (2 + 2 phat_{tau_d}) l per edge
  std::vector<Eigen::MatrixXd> frames; ///< F_zeta[e] per element (columns e_i[e])
};

/// @brief l~[e] from 2(l + l~) = |zeta^- + l~ e_1 - zeta^+| and the dislocated frames.
EdgeTargets edge_targets(const WeightedGraph& g, double tau_bar, const Dislocation& zeta, double c_bar,
                         ProfileCache& cache);

}  // namespace cmc
