#pragma once
/// @file delaunay.hpp
/// @brief Rotationally invariant CMC hypersurfaces Y(t, Theta) = (k(t), r(t) Theta) in R^{n+1}.

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <vector>

#include "cmc/numerics.hpp"

namespace cmc {

/// @brief Pointwise data of a meridian profile (derivatives in the conformal parameter t).
struct ProfileState {
  double t = 0.0;
  double w = 0.0, wp = 0.0, wpp = 0.0;
  double r = 0.0, rp = 0.0, rpp = 0.0;
  double k = 0.0, kp = 0.0, kpp = 0.0;
};

/// @brief Common interface of the sphere chart and Delaunay profiles.
class RotationalProfile {
 public:
  virtual ~RotationalProfile() = default;
  virtual int n() const = 0;
  virtual double tau() const = 0;
  /// @brief State at any real t (periodic extension with axial shift).
  virtual ProfileState state(double t) const = 0;
  /// @brief Closed-form |A|^2 = n(1 + (n-1) tau^2 r^{-2n}).
  double A2_closed(double r) const;
};

/// @brief The tau = 0 chart k = tanh t, r = sech t of the unit sphere.
class SphereProfile : public RotationalProfile {
 public:
  explicit SphereProfile(int n);
  int n() const override { return n_; }
  double tau() const override { return 0.0; }
  ProfileState state(double t) const override;

 private:
  int n_;
};

struct ProfileOptions {
  double step = 1e-3;
  /// Tolerance for the ODE/quadrature period cross-check (disagreement > 10 tol fails).
  double tol = 1e-8;
  /// Richardson gauge tolerance applied where |w'| > gauge_threshold.
  double richardson_tol = 1e-13;
  double gauge_threshold = 0.999;
  /// Split parameter of the period quadrature.
  double split_delta = 0.1;
  bool cross_check = true;
};

/// @brief Delaunay profile over one period [0, 2 p_tau], r(t) = |tau|^{1/n} e^{w(t)}.
class DelaunayProfile : public RotationalProfile {
 public:
  /// @brief Largest admissible tau, the cylinder value n^{-n}(n-1)^{n-1}.
  static double cylinder_tau(int n);

  /// @brief Integrate w'' = -r_1 r_2 from the maximum of r over one period.
  static std::shared_ptr<const DelaunayProfile> solve(int n, double tau,
                                                      const ProfileOptions& opts = {});

  int n() const override { return n_; }
  double tau() const override { return tau_; }
  ProfileState state(double t) const override;

  /// @brief Half domain period p_tau (0 for the cylinder).
  double p() const { return p_; }
  /// @brief Translational half-period: k(2p) = 2 + 2 phat.
  double phat() const { return phat_; }
  double r_max() const { return r_max_; }
  double r_min() const { return r_min_; }
  double w_max() const { return w_max_; }
  bool degenerate() const { return degenerate_; }
  bool embedded() const { return tau_ > 0.0; }
  /// @brief Period and translational period from the quadrature forms.
  double p_quadrature() const { return p_quad_; }
  double phat_quadrature() const { return phat_quad_; }
  /// @brief Richardson error estimate and refined-step count of the integration.
  double integration_error() const { return err_est_; }
  int refined_steps() const { return refined_; }

  const std::vector<double>& nodes() const { return t_; }
  /// @brief Nodal values (w, w', k) of the integration.
  const std::vector<double>& w_nodes() const { return w_; }
  const std::vector<double>& wp_nodes() const { return wp_; }
  const std::vector<double>& k_nodes() const { return k_; }

  /// @brief Radius as a function of w, and r_1, r_2.
  double radius(double w) const;
  double r1(double r) const;
  double r2(double r) const;

 private:
  DelaunayProfile() = default;
  ProfileState state_in_period(double s) const;
  void compute_quadratures(double split_delta);

  int n_ = 3;
  double tau_ = 0.0;
  double p_ = 0.0, phat_ = 0.0, r_max_ = 0.0, r_min_ = 0.0, w_max_ = 0.0;
  double p_quad_ = 0.0, phat_quad_ = 0.0, err_est_ = 0.0;
  int refined_ = 0;
  bool degenerate_ = false;
  std::vector<double> t_, w_, wp_, k_;
};

/// @brief Extremal radii as roots of f^{+}(r) = r^n - r^{n-1} + tau and f^{-}(r) = r^n + r^{n-1} + tau.
double delaunay_r_max(int n, double tau);
double delaunay_r_min(int n, double tau);

/// @brief T_n = int_1^infinity dr / sqrt(r^{2n-2} - 1) by quadrature.
double T_constant(int n);
/// @brief Gamma-function closed form of T_n.
double T_constant_closed(int n);

/// @brief Curvature data of a meridian.
struct CurvatureSample {
  double t = 0.0;
  double metric_factor = 0.0;  ///< r^2
  double h_meridian = 0.0;     ///< principal curvature along t (w.r.t. the inward normal)
  double h_angular = 0.0;      ///< principal curvature along the meridian sphere
  double H = 0.0;              ///< average mean curvature
  double A2 = 0.0;             ///< |A|^2 from the principal curvatures
  double A2_closed = 0.0;      ///< n(1 + (n-1) tau^2 r^{-2n})
};

/// @brief H and |A|^2 from the general surface-of-revolution formulas at the numerical state.
CurvatureSample curvature(const RotationalProfile& prof, double t);
/// @brief Average H from centered differences of the graph form rho(x_1); NaN where k' ~ 0.
double curvature_graph_fd(const RotationalProfile& prof, double t, double h = 1e-3);

/// @brief Unit normal nu = (w', -(k'/r) Theta).
Eigen::VectorXd profile_normal(const ProfileState& s, const Eigen::VectorXd& theta);
/// @brief Y(t, Theta).
Eigen::VectorXd profile_point(const ProfileState& s, const Eigen::VectorXd& theta);

/// @brief Force through the meridian sphere at t (conormal integral minus n times the disk term).
Eigen::VectorXd flux(const RotationalProfile& prof, double t, int sphere_order = 8);

/// @brief Mode-0 Jacobi field f0 = nu . e_1 = w' with its t-derivative.
struct JacobiSample {
  double value = 0.0, derivative = 0.0;
};
JacobiSample jacobi_mode0(const RotationalProfile& prof, double t);
/// @brief r^{n-2}(phi' f0 - phi f0') for a mode-0 field with value phi and derivative dphi.
double linearized_flux(const RotationalProfile& prof, double phi, double dphi, double t);
/// @brief Normal part of d/dsigma Y_sigma at sigma = tau (central difference in sigma).
JacobiSample dilation_field(int n, double tau, double t, double dsigma = 1e-6,
                            const ProfileOptions& opts = {});

/// @brief Rescaled neck versus the unit catenoid.
struct CatenoidComparison {
  double sup_distance = 0.0;
  double window = 0.0;
};
/// @brief sup over |t| <= b of |r_min^{-1}(Y(p + s t) - k(p) e_1) - Y_C(t)|, s = sign(tau).
CatenoidComparison catenoid_compare(const DelaunayProfile& prof, double b, double step = 1e-3);

/// @brief Rows (t, r, k, w, H, |A|^2, flux_e1) at N+1 samples of [0, 2p].
void write_profile_csv(const DelaunayProfile& prof, std::ostream& os, int N);

}  // namespace cmc
