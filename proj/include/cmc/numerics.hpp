#pragma once
/// @file numerics.hpp
/// @brief Shared numerical kernels: smooth cutoffs, fixed-step ODE integration,
/// root finding, quadrature, sphere rules and weighted sup-norm estimates.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "cmc/error.hpp"

namespace cmc {

/// @brief Value with first and second derivative in one variable.
struct Jet {
  double v = 0.0, d = 0.0, dd = 0.0;
};

inline Jet operator+(Jet a, Jet b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
inline Jet operator-(Jet a, Jet b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
inline Jet operator*(Jet a, Jet b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + 2.0 * a.d * b.d + a.v * b.dd};
}
inline Jet operator*(double s, Jet a) { return {s * a.v, s * a.d, s * a.dd}; }
inline Jet operator+(Jet a, double c) { return {a.v + c, a.d, a.dd}; }
inline Jet one_minus(Jet a) { return {1.0 - a.v, -a.d, -a.dd}; }
/// @brief Jet of the variable itself.
inline Jet jet_var(double t) { return {t, 1.0, 0.0}; }
inline Jet jet_const(double c) { return {c, 0.0, 0.0}; }

/// @brief Smooth step Psi: 0 for x <= -1, 1 for x >= 1, Psi(x) + Psi(-x) = 1.
double smooth_step(double x);
/// @brief Psi' and Psi''.
double smooth_step_d1(double x);
double smooth_step_d2(double x);

/// @brief psi[a,b](t) = Psi(L(t)) with L(a) = -3, L(b) = 3.
/// a > b gives the reversed cutoff; psi[a,b] + psi[b,a] = 1.
double cutoff(double a, double b, double t);
/// @brief Cutoff with t-derivatives.
Jet cutoff_jet(double a, double b, double t);

using OdeState = std::vector<double>;
using OdeRhs = std::function<void(double, const OdeState&, OdeState&)>;

struct IntegrateOptions {
  /// Richardson step-doubling tolerance; <= 0 disables the gauge.
  double richardson_tol = 0.0;
  /// Maximum recursive halvings of a refined step.
  int max_halvings = 4;
  /// Steps where the gauge is active; empty means every step.
  std::function<bool(double, const OdeState&)> refine_when;
  /// Any component above this magnitude counts as divergence.
  double blowup = 1e150;
};

/// @brief Nodes, states and right-hand sides of an integration.
struct Trajectory {
  std::vector<double> t;
  std::vector<OdeState> y;
  std::vector<OdeState> dy;
  double max_error_estimate = 0.0;
  int refined_steps = 0;
  /// @brief Cubic Hermite dense output inside [t.front(), t.back()].
  OdeState eval(double s) const;
};

/// @brief Thrown when a trajectory leaves the finite range.
class DivergenceError : public Error {
 public:
  DivergenceError(double last_t, const std::string& what)
      : Error(ErrorKind::Divergence, what), last_valid_t(last_t) {}
  double last_valid_t;
};

/// @brief One classical RK4 step.
OdeState rk4_step(const OdeRhs& f, double t, const OdeState& y, double h);

/// @brief Fixed-step RK4 over a monotone grid (increasing or decreasing).
Trajectory integrate_ode(const OdeRhs& f, const OdeState& y0, const std::vector<double>& grid,
                         const IntegrateOptions& opts = {});

/// @brief Uniform grid with N+1 nodes on [a, b].
std::vector<double> uniform_grid(double a, double b, int N);

/// @brief Bracketing root finder (TOMS 748). Throws Bracket without a sign change.
double find_root(const std::function<double(double)>& f, double lo, double hi, double tol = 0.0,
                 int max_iter = 300);

/// @brief Gauss-Legendre nodes and weights on [a, b].
struct QuadRule {
  std::vector<double> x, w;
};
QuadRule gauss_legendre(int order, double a, double b);
/// @brief Composite Gauss-Legendre rule with equal panels.
QuadRule composite_gauss(double a, double b, int panels, int order);

double integrate_gauss(const std::function<double(double)>& f, double a, double b, int panels,
                       int order);
/// @brief Adaptive Gauss-Kronrod on a finite interval.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-13);
/// @brief Double-exponential rule; tolerates integrable endpoint singularities.
double integrate_endpoint_singular(const std::function<double(double)>& f, double a, double b,
                                   double tol = 1e-13);
/// @brief Integral over [a, infinity).
double integrate_to_infinity(const std::function<double(double)>& f, double a, double tol = 1e-13);

/// @brief Volume of the unit m-sphere S^m in R^{m+1}.
double sphere_volume(int m);

/// @brief Product quadrature on S^m (Gauss-Jacobi polar angles, trapezoid azimuth).
struct SphereGrid {
  int dim = 0;
  int n_polar = 0;
  int n_azimuth = 0;
  std::vector<Eigen::VectorXd> points;
  std::vector<double> weights;

  /// @brief Rule with n_polar nodes per polar angle and 2*n_polar azimuth nodes.
  static SphereGrid product(int dim, int n_polar);
  std::size_t size() const { return points.size(); }
  double total_weight() const;
};

/// @brief Result of a sampled weighted sup-norm estimate.
struct WeightedNormEstimate {
  double value = 0.0;
  std::vector<double> per_order;
  std::size_t argmax = 0;
};

/// @brief sum_j sup rho^j |D^j u| / f over samples.
/// @param derivs derivs[j-1] holds |D^j u| in the metric; its size is the order.
WeightedNormEstimate weighted_sup_norm(const std::vector<double>& u, const std::vector<double>& f,
                                       const std::vector<double>& rho,
                                       const std::vector<std::vector<double>>& derivs = {});

/// @brief Second-order finite-difference derivative on a (possibly nonuniform) 1D grid.
std::vector<double> grid_derivative(const std::vector<double>& t, const std::vector<double>& u);

}  // namespace cmc
