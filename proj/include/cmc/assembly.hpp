#pragma once
/// @file assembly.hpp
/// @brief Global initial immersion from a family point: abstract surface with its region index,
/// rigid motions, t_d reparametrization, chart identifications, sampled diagnostics, vertex
/// fluxes and the on-disk bundle format.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cmc/blocks.hpp"
#include "cmc/graph.hpp"
#include "json.hpp"

namespace cmc {

/// @brief Construction constants. Zero delta_prime or b_bar selects the defaults.
struct AssemblyConfig {
  double tau_bar = 0.0;
  double delta_prime = 0.0;
  double b_bar = 0.0;
  double gamma = 1.5;
  double c_bar = 10.0;
  int m_max = 4;  ///< ray charts end at t_max = 2 m_max p
};

/// @brief min(0.05, 0.99 min|v - v'| / 50) over pairs of directions at a common vertex.
double default_delta_prime(const WeightedGraph& g);

/// @brief Default b-bar = max(6, a + 6).
double default_b_bar(double a);

enum class RegionKind { Central, Standard, Transition };

/// @brief A region of an element chart: the edge part of S[p], S[p,e,m] or Lambda[p,e,m'].
struct Region {
  RegionKind kind = RegionKind::Central;
  std::size_t vertex = 0;
  std::size_t element = 0;
  int m = 0;
  int side = 1;      ///< +1 counted from t = a, -1 counted from the far end of an edge
  double t0 = 0.0, t1 = 0.0;
  bool truncated = false;  ///< cut by the ray truncation
  std::string tag;
  /// @brief Standard region with even m (almost spherical).
  bool spherical() const { return kind == RegionKind::Standard && m % 2 == 0; }
};

/// @brief Meridian sphere C^out or C^in of a transition region.
struct BoundarySphere {
  bool out = true;
  std::size_t vertex = 0, element = 0;
  int m = 0;
  double t = 0.0;
  std::string tag;
};

/// @brief Chart data of an edge or ray of the abstract surface M.
struct ElementChart {
  std::size_t element = 0;
  bool is_ray = false;
  int l = 0;                 ///< half-length (edges)
  double tau0 = 0.0;         ///< tau-bar tau-hat[e]
  std::shared_ptr<const DelaunayProfile> profile0;
  double p0 = 0.0;           ///< p_{tau_0[e]}
  double length = 0.0;       ///< 2 p0 l for edges, infinity for rays
  double t_begin = 0.0, t_end = 0.0;
  double b_region = 0.0;     ///< min(b-bar, (p0 - 1) / 2): half-width of the standard regions
  std::vector<Region> regions;  ///< ordered along t, partitioning [t_begin, t_end]
};

/// @brief The abstract surface M: vertex charts S^n minus delta'-caps, element charts, region index.
class AbstractSurface {
 public:
  /// @throws Error(Parameter) if p_{tau_0[e]} <= b-bar + 1 ("too few periods for the chosen b-bar").
  /// @throws Error(Configuration) for an explicit b-bar <= a + 5 or delta' violating the cap separation.
  static std::shared_ptr<const AbstractSurface> build(const WeightedGraph& central, const AssemblyConfig& cfg,
                                                      ProfileCache& cache);

  const WeightedGraph& graph() const { return graph_; }
  const AssemblyConfig& config() const { return cfg_; }
  int n() const { return graph_.n; }
  double a() const { return a_; }
  double delta_prime() const { return cfg_.delta_prime; }
  double b_bar() const { return cfg_.b_bar; }
  double tau_bar() const { return cfg_.tau_bar; }

  const std::vector<ElementChart>& elements() const { return elements_; }
  /// @brief Cap centers V_p of the vertex chart of p (one per attachment, in attachment order).
  const std::vector<Eigen::VectorXd>& cap_centers(std::size_t vertex) const { return caps_[vertex]; }
  /// @brief Central frames W[p] (columns v[p,e], v_2[e], ..., v_{n+1}[e]).
  const std::vector<Eigen::MatrixXd>& vertex_frames(std::size_t vertex) const { return wframes_[vertex]; }
  /// @brief Frame F_Gamma[e] = R[e] (columns v_i[e]).
  const Eigen::MatrixXd& element_frame(std::size_t el) const { return frames_[el]; }

  /// @brief True if x in S^n lies in M[p] (outside all open delta'-caps).
  bool in_vertex_chart(std::size_t vertex, const Eigen::VectorXd& x) const;

  /// @brief All element regions in chart order.
  std::vector<Region> regions() const;
  /// @brief Region containing t on an element chart (the earlier one on shared boundaries).
  const Region& region_at(std::size_t el, double t) const;
  std::size_t standard_count(std::size_t el) const;
  std::size_t transition_count(std::size_t el) const;
  /// @brief Boundary spheres of the transition regions of an element.
  std::vector<BoundarySphere> boundary_spheres(std::size_t el) const;
  /// @brief Boundary spheres of S[p], one per attachment.
  std::vector<BoundarySphere> central_boundary(std::size_t vertex) const;

  /// @brief Identification of an element-chart point with a vertex-chart point: on [a, a+1]
  /// (resp. its mirror at the far end) returns (vertex, R[e] Y_0). Empty outside the overlaps.
  std::optional<std::pair<std::size_t, Eigen::VectorXd>> identify(std::size_t el, double t,
                                                                  const Eigen::VectorXd& theta) const;

 private:
  WeightedGraph graph_;
  AssemblyConfig cfg_;
  double a_ = 0.0;
  std::vector<ElementChart> elements_;
  std::vector<std::vector<Eigen::VectorXd>> caps_;
  std::vector<std::vector<Eigen::MatrixXd>> wframes_;
  std::vector<std::vector<std::size_t>> cap_elements_;
  std::vector<Eigen::MatrixXd> frames_;
};

/// @brief t_d of an edge chart: identity near t = a, rigid shift near the far end, scaling by
/// lambda = length_d / length_0 in between.
double reparametrize_td(double t, double a, double length0, double length_d);
/// @brief t_d of a ray chart: identity near t = a, scaling by lambda beyond.
double reparametrize_td_ray(double t, double a, double lambda);

/// @brief Worst chart-consistency residual over the identified overlaps.
struct SeamReport {
  double max_residual = 0.0;
  std::string worst;  ///< "vertex:<id> ~ edge:<id>" of the worst pair
  std::size_t pairs = 0;
};

struct AssembleOptions {
  double seam_tol = 1e-9;
  /// Enforce |d| <= |tau-bar|^{1 + 1/(n-1)}. Disabled only to assemble a deliberately
  /// unbalanced central graph with d = tau-bar d-hat.
  bool enforce_bounds = true;
};

/// @brief The piecewise immersion Y_hat[tau-bar, d, zeta] of M.
class AssembledImmersion {
 public:
  /// @param d per-vertex unbalancing (empty = 0), |d| <= |tau-bar|^{1 + 1/(n-1)}
  /// @param zeta dislocations (empty vectors = 0), |zeta| <= C-bar |tau-bar|
  /// @throws Error(Parameter) on violated bounds, Error(Assembly) when a seam exceeds the tolerance.
  static AssembledImmersion assemble(std::shared_ptr<const AbstractSurface> M, const std::vector<Eigen::VectorXd>& d,
                                     const Dislocation& zeta, ProfileCache& cache, const AssembleOptions& opts = {});

  const AbstractSurface& surface() const { return *M_; }
  std::shared_ptr<const AbstractSurface> surface_ptr() const { return M_; }
  const FamilyPoint& family() const { return family_; }
  const Dislocation& zeta() const { return zeta_; }
  const std::vector<Eigen::VectorXd>& d() const { return d_; }
  int n() const { return M_->n(); }

  double tau_d(std::size_t el) const { return blocks_[el].tau(); }
  const DelaunayBlock& block(std::size_t el) const { return blocks_[el]; }
  /// @brief Rotation part R of U[e; d, zeta] = T o R.
  const Eigen::MatrixXd& rotation(std::size_t el) const { return rot_[el]; }
  const Eigen::VectorXd& translation(std::size_t el) const { return trans_[el]; }
  /// @brief Realized vertex p' of Gamma(d~, l~).
  const Eigen::VectorXd& vertex_position(std::size_t vertex) const;
  const SphericalBlock& sphere_map(std::size_t vertex) const { return spheres_[vertex]; }

  /// @brief p' + Y_hat[W, W'](x) for x in M[p].
  Eigen::VectorXd vertex_point(std::size_t vertex, const Eigen::VectorXd& x) const;
  /// @brief Vertex-chart sample (H = 1, inward normal, unit density).
  SurfaceSample vertex_sample(std::size_t vertex, const Eigen::VectorXd& x) const;
  /// @brief t_d on an element chart.
  double td(std::size_t el, double t) const;
  /// @brief Element-chart sample of U o Y_edge o (t_d, id); density is with respect to dt_block dTheta.
  SurfaceSample element_sample(std::size_t el, double t, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd element_point(std::size_t el, double t, const Eigen::VectorXd& theta) const;

  /// @brief r-bar_d = r_{tau_d}(t_d(t)).
  double rbar(std::size_t el, double t) const;
  /// @brief rho_d on an element chart (1 on vertex charts).
  double rho(std::size_t el, double t) const;
  /// @brief rho_0 of the unperturbed immersion (tau_0 profile, t_0 = t).
  double rho0(std::size_t el, double t) const;
  /// @brief r_in[e; d] = r_{tau_d}(t_d(p_0 - b-bar)).
  double r_in(std::size_t el) const;
  /// @brief delta[e] = r_in[e; 0]^{2 gamma + n - 2}.
  double delta_factor(std::size_t el) const;
  /// @brief f_d on the extended catenoidal region S~[p, e, m] (m odd) at chart parameter t.
  double decay_weight(std::size_t el, int side, int m, double t) const;

  /// @brief Seam residuals over overlap samples (t_samples per overlap, sphere rule of n_polar).
  SeamReport seams(int t_samples = 9, int n_polar = 3) const;

 private:
  std::shared_ptr<const AbstractSurface> M_;
  FamilyPoint family_;
  Dislocation zeta_;
  std::vector<Eigen::VectorXd> d_;
  std::vector<DelaunayBlock> blocks_;
  std::vector<Eigen::MatrixXd> rot_;
  std::vector<Eigen::VectorXd> trans_;
  std::vector<SphericalBlock> spheres_;
};

/// @brief Deterministic dislocation pattern of magnitude scale |tau-bar| per attachment.
Dislocation patterned_dislocation(const WeightedGraph& g, double magnitude);

/// @brief Sampling resolution for diagnostics.
struct DiagnoseOptions {
  int t_per_unit = 8;      ///< element-chart nodes per unit of t (spacing must stay <= 0.25)
  int sphere_polar = 3;    ///< S^{n-1} rule for element charts
  int vertex_polar = 6;    ///< S^n rule for vertex charts
};

/// @brief Sampled arrays of one chart. Element charts are rows (t) x cols (Theta), row-major.
struct ChartSamples {
  std::string id;       ///< "vertex:<id>", "edge:<id>" or "ray:<id>"
  std::string kind;     ///< vertex | edge | ray
  std::size_t index = 0;  ///< vertex or element index
  std::size_t rows = 0, cols = 0;
  std::vector<double> t;        ///< element charts: chart parameter per row
  Eigen::MatrixXd param;        ///< vertex: S^n points per row; element: S^{n-1} points per column
  Eigen::MatrixXd X;            ///< (rows*cols) x (n+1) ambient points
  std::vector<double> H, rho, h_dislocation, h_gluing;
  std::vector<std::string> row_regions;  ///< element charts: region tag per row
  std::vector<std::string> adjacent;     ///< ids of identified charts
};

/// @brief Weighted norm estimate of a sampled field on one region.
struct RegionNorm {
  std::string tag;
  double sup = 0.0;       ///< sup |u| / weight
  double gradient = 0.0;  ///< sup rho |du/ds| / weight along the meridian
  double scale = 1.0;     ///< delta[e] power applied
  double value() const { return scale * (sup + gradient); }
};

/// @brief Global weighted norm: supremum of region semi-norms at orders 0-1.
struct GlobalNorm {
  double value = 0.0;
  std::string argmax;
  std::vector<RegionNorm> regions;
};

struct SurfaceBundle {
  int n = 0;
  double tau_bar = 0.0;
  nlohmann::json meta;  ///< construction constants and diagnostics
  std::vector<ChartSamples> charts;
  std::vector<Region> regions;

  const ChartSamples& chart(const std::string& id) const;
};

/// @brief Samples H, its split, rho_d and ambient points on every chart.
/// @throws Error(Resolution) if t spacing exceeds 0.25.
SurfaceBundle diagnose(const AssembledImmersion& Y, const DiagnoseOptions& opts = {});

enum class SampledField { H_error, Dislocation, Gluing };

/// @brief Global norm of a sampled field following the region semi-norms: central regions,
/// delta^{-m/2} on spherical regions, delta^{-(m-1)/2} with weight f_d r^{k-2} on extended
/// catenoidal regions.
GlobalNorm global_norm(const AssembledImmersion& Y, const SurfaceBundle& b, SampledField field, int k = 0);

/// @brief Flux entry of a vertex: d-underline[p] by quadrature and the closed form.
struct FluxEntry {
  std::size_t vertex = 0;
  std::string id;
  Eigen::VectorXd dunder;        ///< omega~_n^{-1/2} int_{S+[p]} (H - 1) N dg
  Eigen::VectorXd closed_form;   ///< omega~_n^{-1/2} omega~_{n-1} sum tau_d sgn R e_1
  Eigen::VectorXd literal_form;  ///< omega~_n^{1/2} sum tau_d sgn R e_1
  std::vector<Eigen::VectorXd> meridian;  ///< per attachment, unnormalized integral
  double discrepancy = 0.0;      ///< |dunder - closed| / max(|closed|, scale)
};

struct FluxReport {
  std::vector<FluxEntry> entries;
  double max_discrepancy() const;
  nlohmann::json to_json() const;
};

struct FluxOptions {
  int panels = 16;
  int order = 10;
  int n_polar = 8;
};

/// @brief d-underline[p] by quadrature over the collars of S+[p], where H - 1 is supported.
FluxEntry vertex_flux(const AssembledImmersion& Y, std::size_t vertex, const FluxOptions& opts = {});
FluxReport flux_report(const AssembledImmersion& Y, const FluxOptions& opts = {});

/// @brief Gram matrix of F-hat_i = omega~_n^{-1/2} N . e_{i+1} in L^2 over the central sphere of p
/// (vertex chart plus edge collars up to p_0).
Eigen::MatrixXd kernel_gram(const AssembledImmersion& Y, std::size_t vertex, int n_polar = 8, int panels = 24);

/// @brief sup over S_x[p] of |(Y_hat - p') - Y~[p]| with Y~[p] the unit-sphere limit.
double central_deviation(const AssembledImmersion& Y, std::size_t vertex, double x = 1.0, int t_per_unit = 8,
                         int n_polar = 3);

// Bundle I/O ----------------------------------------------------------------------------------

/// @brief Writes manifest.json, one little-endian float64 row-major file per array, and CSV
/// profile/flux tables into dir (created if missing).
/// @throws Error(Io) with the offending path.
void export_bundle(const SurfaceBundle& b, const std::string& dir, const FluxReport* flux = nullptr);
/// @brief Reads a bundle written by export_bundle.
SurfaceBundle import_bundle(const std::string& dir);

}  // namespace cmc
