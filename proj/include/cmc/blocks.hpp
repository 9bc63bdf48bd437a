#pragma once
/// @file blocks.hpp
/// @brief Building blocks: the spherical block diffeomorphism of S^n and the edge/ray Delaunay
/// blocks with dislocation and gluing transitions, plus their mean-curvature error fields.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "cmc/delaunay.hpp"
#include "cmc/numerics.hpp"

namespace cmc {

/// @brief The offset a with tanh(a + 1) = cos(delta').
double block_a(double delta_prime);

/// @brief The rotation F' F^T taking the columns of F to the columns of F'.
Eigen::MatrixXd frame_rotation(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Fp);

/// @brief Angle between two nonzero vectors, computed stably.
double vector_angle(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// @brief Diffeomorphism of S^n: identity away from the 4 delta' caps, the frame rotation
/// inside the 3 delta' caps, a renormalized blend in between.
class SphericalBlock {
 public:
  /// @brief Frames are (n+1)x(n+1) matrices with the frame vectors as columns.
  SphericalBlock(std::vector<Eigen::MatrixXd> W, std::vector<Eigen::MatrixXd> Wp, double delta_prime);

  enum class Zone { Identity, Blend, Rotation };
  struct Location {
    Zone zone = Zone::Identity;
    int cap = -1;         ///< index of the nearest cap center
    double distance = 0;  ///< spherical distance to that center
  };

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  Location locate(const Eigen::VectorXd& x) const;

  int size() const { return static_cast<int>(W_.size()); }
  double delta_prime() const { return delta_; }
  const Eigen::MatrixXd& rotation(int i) const { return R_[i]; }
  const Eigen::VectorXd& center(int i) const { return centers_[i]; }

 private:
  std::vector<Eigen::MatrixXd> W_, Wp_, R_;
  std::vector<Eigen::VectorXd> centers_;
  double delta_;
};

/// @brief Point, inward unit normal, average mean curvature and area density of an immersion.
struct SurfaceSample {
  Eigen::VectorXd X, N;
  double H = 0.0;
  /// dg / (dt dTheta) with dTheta the round measure of S^{n-1}.
  double density = 0.0;
};

/// @brief Meridian data of a block: X(t, Theta) = (K, R Theta) + Z with Z = c^+ zeta^+ + c^- zeta^-.
struct BlockMeridian {
  Jet K, R, cplus, cminus;
};

/// @brief Edge or ray Delaunay building block.
class DelaunayBlock {
 public:
  /// @brief Edge block on [a, 2 p l - a].
  /// @throws Error(Parameter) if |zeta^{+-}| > c_bar |tau|, l < 1 or p_tau <= a + 5.
  static DelaunayBlock edge(std::shared_ptr<const DelaunayProfile> prof, int l,
                            const Eigen::VectorXd& zeta_plus, const Eigen::VectorXd& zeta_minus,
                            double delta_prime, double c_bar = 10.0);
  /// @brief Ray block on [a, infinity).
  static DelaunayBlock ray(std::shared_ptr<const DelaunayProfile> prof, const Eigen::VectorXd& zeta_plus,
                           double delta_prime, double c_bar = 10.0);

  bool is_ray() const { return ray_; }
  int n() const { return prof_->n(); }
  double tau() const { return prof_->tau(); }
  int periods() const { return l_; }
  double a() const { return a_; }
  double delta_prime() const { return delta_; }
  double t_begin() const { return a_; }
  /// @brief 2 p l - a for edges, +infinity for rays.
  double t_end() const;
  /// @brief Axial position (2 + 2 phat) l of the far sphere center.
  double far_shift() const;
  const Eigen::VectorXd& zeta_plus() const { return zp_; }
  const Eigen::VectorXd& zeta_minus() const { return zm_; }
  const DelaunayProfile& profile() const { return *prof_; }
  std::shared_ptr<const DelaunayProfile> profile_ptr() const { return prof_; }

  /// @brief True where the dislocation (resp. gluing) error is defined to live.
  bool in_dislocation_window(double t) const;
  bool in_gluing_window(double t) const;
  /// @brief H - 1 inside a dislocation window, evaluated as a difference against the unit sphere.
  ///
  /// Free of the cancellation in H - 1 when |zeta| is near machine precision.
  /// @throws Error(Domain) if t lies outside the dislocation windows.
  double dislocation_h_error(double t, const Eigen::VectorXd& theta) const;

  BlockMeridian meridian(double t) const;
  /// @brief X(t, Theta), Theta a unit vector of R^n.
  /// @throws Error(Domain) if t lies outside the block domain.
  Eigen::VectorXd point(double t, const Eigen::VectorXd& theta) const;
  /// @brief Exact second-order data from the meridian jets.
  SurfaceSample sample(double t, const Eigen::VectorXd& theta) const;

 private:
  DelaunayBlock() = default;
  void check_domain(double t) const;

  std::shared_ptr<const DelaunayProfile> prof_;
  bool ray_ = false;
  int l_ = 0;
  double a_ = 0.0, delta_ = 0.0;
  Eigen::VectorXd zp_, zm_;
};

/// @brief Mean curvature data of X(t, Theta) = (K, R Theta) + Z(t) from its t-jets.
SurfaceSample translated_revolution_sample(const BlockMeridian& m, const Eigen::VectorXd& zeta_plus,
                                           const Eigen::VectorXd& zeta_minus, const Eigen::VectorXd& theta);

/// @brief Parametrized hypersurface in R^{n+1} over R x S^{n-1}.
using Immersion = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// @brief Finite-difference steps in t and on the sphere (geodesic normal coordinates).
struct FdOptions {
  double h_t = 2e-3;
  double h_s = 2e-3;
};

/// @brief Mean curvature by parametric finite differences (4th-order stencils).
/// The normal is oriented so that the unit sphere chart (tanh t, sech t Theta) has H = +1.
SurfaceSample fd_sample(const Immersion& X, double t, const Eigen::VectorXd& theta, const FdOptions& fd = {});

enum class HMethod { Exact, FiniteDifference };

/// @brief Sampled H over a block with its dislocation/gluing split.
struct HErrorField {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> theta;
  Eigen::MatrixXd H;            ///< rows follow t, columns follow theta
  Eigen::MatrixXd dislocation;  ///< H - 1 on the dislocation windows, 0 elsewhere
  Eigen::MatrixXd gluing;       ///< H - 1 on the gluing windows, 0 elsewhere
  double max_dislocation() const;
  double max_gluing() const;
  /// @brief max |H - 1| outside both windows.
  double max_outside() const;
  /// @brief max |H - 1| over rows with t in [lo, hi].
  double max_error_in(double lo, double hi) const;
};

/// @brief Samples H on t x sphere nodes.
/// @throws Error(Resolution) if the t spacing exceeds 0.25 (cutoff transitions unresolved) or the
/// sphere rule is empty.
HErrorField mean_curvature_field(const DelaunayBlock& block, const std::vector<double>& t,
                                 const std::vector<Eigen::VectorXd>& theta, HMethod method = HMethod::Exact,
                                 const FdOptions& fd = {});

/// @brief Vector integral of H_dislocation N dg over the near (side = +1) or far (side = -1) end.
struct DislocationFlux {
  Eigen::VectorXd value;
  double norm = 0.0;
};
/// @param b upper end of [a, b], b in (a + 3, p_tau)
/// @param panels Gauss panels over the cutoff transition, order Gauss order per panel
/// @param n_polar sphere rule resolution
DislocationFlux dislocation_flux_integral(const DelaunayBlock& block, double b, int side = +1, int panels = 16,
                                          int order = 10, int n_polar = 8);

}  // namespace cmc
