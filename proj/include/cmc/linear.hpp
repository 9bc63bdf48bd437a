#pragma once
/// @file linear.hpp
/// @brief Linear theory for L_g = Delta_g + |A|^2 on hypersurfaces of revolution via spherical
/// harmonic projection: mode ODE solves with decay classes, the flat-annulus reference solver,
/// coercivity quotients, approximate-kernel spectra and the quadratic-remainder check.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cmc/blocks.hpp"
#include "cmc/delaunay.hpp"
#include "cmc/numerics.hpp"
#include "json.hpp"

namespace cmc {

using ScalarFn = std::function<double(double)>;

/// @brief Meridian t-jets of X(t, Theta) = (K(t), R(t) Theta).
struct MeridianJets {
  Jet K, R;
};
using MeridianFn = std::function<MeridianJets(double)>;

/// @brief Geometric coefficients at one t. With sigma = |X_t| the mode operator is
/// L_k u = (u'' + drift u' + sigma^2 (A2 - kappa_k / R^2) u) / sigma^2.
struct GeometryCoefficients {
  double R = 0.0;
  double sigma = 0.0;
  double drift = 0.0;      ///< (n-1) R'/R - sigma'/sigma
  double A2 = 0.0;         ///< |A|^2
  double nu_axial = 0.0;   ///< N . e_1 = R'/sigma
  double nu_radial = 0.0;  ///< N . Theta = -K'/sigma
  /// @brief dg / (dt dTheta) = sigma R^{n-1}.
  double density(int n) const;
  /// @brief R^{n-1} / sigma, the coefficient of u'^2 in the energy.
  double stiffness(int n) const;
};

/// @brief A hypersurface of revolution described by its meridian, with inward normal
/// N = (R', -K' Theta) / sigma.
class RevolutionGeometry {
 public:
  /// @brief Conformal chart of a rotational profile (sigma = r, drift = (n-2) w',
  /// |A|^2 = n(1 + (n-1) tau^2 r^{-2n})).
  static RevolutionGeometry conformal(std::shared_ptr<const RotationalProfile> profile);
  /// @brief General meridian; curvatures from the jets.
  static RevolutionGeometry general(int n, MeridianFn meridian);
  /// @brief Flat R^n in log-polar form: K = 0, R = e^t, so s = e^t.
  static RevolutionGeometry flat(int n);
  /// @brief Meridian of a Delaunay block.
  /// @throws Error(Unsupported) if the block carries a dislocation (no rotational symmetry).
  static RevolutionGeometry block(const DelaunayBlock& B);

  int n() const { return n_; }
  MeridianJets jets(double t) const { return meridian_(t); }
  GeometryCoefficients at(double t) const;
  /// @brief The rotational profile for conformal geometries, else null.
  const RotationalProfile* profile() const { return profile_.get(); }

 private:
  int n_ = 0;
  MeridianFn meridian_;
  std::shared_ptr<const RotationalProfile> profile_;
};

/// @brief A t-interval of a hypersurface of revolution.
struct ModeRegion {
  RevolutionGeometry geometry;
  double t0 = 0.0, t1 = 0.0;
  std::string label;
};

/// @brief Transition region Lambda = [b, p - b].
ModeRegion lambda_region(std::shared_ptr<const DelaunayProfile> profile, double b);
/// @brief Extended standard region S~^+ = [p + b, 3p - b] (sphere-like center at 2p).
ModeRegion s_tilde_plus(std::shared_ptr<const DelaunayProfile> profile, double b);
/// @brief Extended standard region S~^- = [b, 2p - b] (neck at p).
ModeRegion s_tilde_minus(std::shared_ptr<const DelaunayProfile> profile, double b);

/// @brief Dimension of the degree-k spherical harmonics on S^{n-1}.
int harmonic_multiplicity(int n, int k);

/// @brief L_k^lambda = L_k + lambda, the projection of L_g + lambda on degree-k harmonics.
class ModeOperator {
 public:
  ModeOperator(RevolutionGeometry geometry, int k, double lambda = 0.0);

  int n() const { return geom_.n(); }
  int k() const { return k_; }
  double lambda() const { return lambda_; }
  /// @brief k (n - 2 + k).
  double kappa() const;
  const RevolutionGeometry& geometry() const { return geom_; }
  /// @brief sigma^2 (A2 + lambda - kappa / R^2), the zeroth-order coefficient of sigma^2 L_k.
  double potential(const GeometryCoefficients& c) const;
  /// @brief L_k u from u, u', u''.
  double apply(double t, double u, double du, double ddu) const;
  /// @brief sup over [t0, t1] of |L_0 f0| relative to sup of its summed term magnitudes, f0 = N . e_1,
  /// by 4th-order differences.
  /// @throws Error(Parameter) for k != 0.
  double kernel_residual(double t0, double t1, int samples = 201, double h = 5e-3) const;

 private:
  RevolutionGeometry geom_;
  int k_;
  double lambda_;
};

enum class ModeCondition {
  Dirichlet,  ///< prescribed values at both ends
  Out,        ///< vanishes on C^in; at C^out only degrees 0, 1 survive (zero Cauchy data at C^in for k <= 1)
  In          ///< mirrored: vanishes on C^out, zero Cauchy data at C^out for k <= 1
};

const char* to_string(ModeCondition c);

/// @brief A mode BVP on [t_out, t_in] (either order); C^out sits at t_out.
struct ModeProblem {
  double t_out = 0.0, t_in = 0.0;
  ScalarFn rhs;  ///< E_k(t); empty means zero
  ModeCondition condition = ModeCondition::Dirichlet;
  double value_out = 0.0, value_in = 0.0;  ///< Dirichlet data
  double gamma = 1.5;                      ///< decay exponent of the Out/In weights
  double step = 1e-3;
  /// Conditioning above which a Dirichlet problem counts as resonant.
  double resonance_threshold = 1e10;
};

/// @brief Sampled solution with measured weighted norms. Samples are ordered by increasing t.
struct ModeSolution {
  int k = 0;
  ModeCondition condition = ModeCondition::Dirichlet;
  std::vector<double> t, u, du, rhs, R;
  std::vector<double> weight;      ///< r^gamma (Out), r^{2-n-gamma} (In), 1 (Dirichlet)
  std::vector<double> rhs_weight;  ///< r^{gamma-2}, r^{-n-gamma}, 1
  double residual = 0.0;        ///< weighted sup |L_k u - E| relative to the weighted operator scale
  double solution_norm = 0.0;   ///< sup |u| / f + sup r |u'|_g / f
  double rhs_norm = 0.0;        ///< sup |E| / f_E
  double norm_ratio = 0.0;      ///< solution_norm / rhs_norm (0 when E = 0)
  double conditioning = 1.0;    ///< Dirichlet problems: max |psi| / |psi(far end)|
  double wronskian_drift = 0.0; ///< relative variation of R^{n-1}/sigma W(psi_a, psi_b)
  double u_out = 0.0, u_in = 0.0, du_out = 0.0, du_in = 0.0;
  /// @brief Linear interpolation of u (and u') at t inside the sampled range.
  double value(double t) const;
  double derivative(double t) const;
};

/// @brief Variation of parameters with homogeneous solutions shot from each end (Dirichlet,
/// and k >= 2 of the decay classes); zero-Cauchy classes integrate from the vanishing end.
/// @throws Error(Parameter) if |lambda| >= 1 / (4 r_out) or the step is not positive.
/// @throws Error(Resonance) when the conditioning exceeds the threshold.
ModeSolution solve_mode(const ModeOperator& op, const ModeProblem& problem);

/// @brief CSV with columns t,u,du,weight,rhs_weight.
void write_mode_csv(const ModeSolution& s, std::ostream& os);

// Flat annulus ----------------------------------------------------------------------------------

enum class DecayClass { Out, In };

struct AnnulusMode {
  int k = 0;
  ScalarFn rhs;  ///< E_k(s); empty means zero
};

/// @brief Flat annulus [s_in, s_out] x S^{n-1} with g_A = ds^2 + s^2 g_{S^{n-1}}.
struct AnnulusProblem {
  int n = 3;
  double s_in = 1e-2, s_out = 1.0;
  double gamma = 1.5;
  std::vector<AnnulusMode> modes;
  int samples = 4001;  ///< log-uniform nodes
};

struct AnnulusModeSolution {
  int k = 0;
  std::vector<double> s, u, du, rhs;
  double residual = 0.0;
  double solution_norm = 0.0;  ///< sup |u| / f + sup s |u'| / f
  double rhs_norm = 0.0;
  double norm_ratio = 0.0;
  double value_in = 0.0, value_out = 0.0;
};

struct AnnulusSolution {
  DecayClass decay = DecayClass::Out;
  std::vector<AnnulusModeSolution> modes;  ///< ordered as the problem's modes
  double max_residual = 0.0;
  double max_norm_ratio = 0.0;
};

/// @brief Mode-by-mode explicit variation of parameters against s^k and s^{2-n-k}. Out: degrees
/// <= 1 have zero Cauchy data at s_in, higher degrees vanish at both ends (In mirrored). Weights
/// s^gamma / s^{gamma-2} (Out) and s^{2-n-gamma} / s^{-n-gamma} (In). Modes run in parallel.
/// @throws Error(Parameter) for gamma outside (1, 2), s_in >= s_out or k < 0.
AnnulusSolution flat_annulus_solve(const AnnulusProblem& problem, DecayClass decay);

/// @brief Flat-annulus Dirichlet problem of one mode with explicit homogeneous part.
AnnulusModeSolution flat_mode_dirichlet(int n, int k, double s_in, double s_out, double value_in, double value_out,
                                        const ScalarFn& rhs = {}, int samples = 4001);

// Decay profiles ---------------------------------------------------------------------------------

/// @brief V_i^lambda[Lambda, a_1, a_2] against the flat model V~_i, with s(t) from
/// ds/dt = -r, s(p - b) = r_in.
struct DecayComparison {
  ModeSolution solution;
  std::vector<double> s, model, dmodel;  ///< flat model and its t-derivative on the solution grid
  double r_out = 0.0, r_in = 0.0, s_out = 0.0, s_in = 0.0;
  std::string weight;   ///< "1", "(r_in/r)^(n-2)", "r" or "(r_in/r)^(n-1)"
  double distance = 0.0;  ///< sup |V - V~| / f + sup |V' - V~'| / f (orders 0-1 at scale r)
};

/// @param mode 0 for V_0, any i >= 1 for V_i (degree-1 harmonic)
/// @param at_out true for [1, 0] (value 1 on C^out), false for [0, 1]
DecayComparison decay_profile(std::shared_ptr<const DelaunayProfile> profile, double b, double lambda, int mode,
                              bool at_out, double step = 1e-3);

// Coercivity -------------------------------------------------------------------------------------

/// @brief Coefficient f(t) of one L^2(S^{n-1})-orthonormal harmonic of the given degree.
/// Terms of a trial field are taken to use distinct harmonics.
struct TrialTerm {
  int degree = 2;
  ScalarFn f, df;
};

struct TrialField {
  std::vector<TrialTerm> terms;
};

struct CoercivityOptions {
  int panels = 64;
  int order = 10;
  double contamination_tol = 1e-10;
};

struct CoercivityReport {
  std::string region;
  std::vector<double> quotients;
  double minimum = 0.0;
  std::size_t argmin = 0;
};

/// @brief -int f L_g f dg / int f^2 dg in the weak form int R^{n-1}/sigma f'^2 + sigma R^{n-1}
/// (kappa/R^2 - |A|^2) f^2 dt (f vanishes at the region ends).
/// @throws Error(Projection) if the degree <= 1 part exceeds contamination_tol relative to the field.
/// @throws Error(Parameter) if a term does not vanish at the region boundary.
double rayleigh_quotient(const ModeRegion& region, const TrialField& f, const CoercivityOptions& opts = {});

CoercivityReport coercivity_certificate(const ModeRegion& region, const std::vector<TrialField>& trials,
                                        const CoercivityOptions& opts = {});

/// @brief Random combinations of degrees 2..k_max with sine-series coefficients vanishing at the ends.
std::vector<TrialField> random_high_mode_trials(const ModeRegion& region, int count, std::uint64_t seed,
                                                int k_max = 12, int sines = 6);

// Approximate kernel -----------------------------------------------------------------------------

struct KernelOptions {
  double epsilon = 0.1;
  double window = 1.0;
  int k_max = 12;
  double h = 1.0 / 256;  ///< coarse step; Richardson uses h and h/2
};

struct ModeSpectrum {
  int k = 0;
  int multiplicity = 1;
  std::vector<double> eigenvalues;    ///< extrapolated, ascending, the lowest few
  std::vector<double> coarse, fine;   ///< raw values at h and h/2
};

struct SpectrumReport {
  std::string region;
  int n = 0;
  double epsilon = 0.0, window = 0.0;
  std::vector<ModeSpectrum> modes;  ///< k = 0, 1, ... up to the first mode entirely above the window
  int kernel_count = 0;             ///< with multiplicity, in [-epsilon, epsilon]
  int window_count = 0;             ///< with multiplicity, in [-window, window]
  int kernel_count_coarse = 0, kernel_count_fine = 0;
  int window_count_coarse = 0, window_count_fine = 0;
  bool stable = false;              ///< counts agree at h and h/2
  bool truncated = false;           ///< mode k_max still reaches the window
  /// L^2(dg) distance of each normalized kernel eigenfunction (modes 0, 1) to F-hat.
  std::vector<double> kernel_distance;
  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// @brief Dirichlet eigenvalues (L f = -lambda f) of the mode operators by second-order finite
/// differences with Richardson extrapolation; modes in parallel.
SpectrumReport approximate_kernel(const ModeRegion& region, const KernelOptions& opts = {});

// Quadratic remainder ----------------------------------------------------------------------------

struct QuadraticOptions {
  double eps0 = 1e-2;
  int levels = 3;        ///< eps0, eps0/2, eps0/4, ...
  int samples = 201;
  double fd_step = 1e-2;
};

struct QuadraticReport {
  std::vector<double> eps, residual, ratio;  ///< ratio = residual / eps^2
  double variation = 0.0;                    ///< max ratio / min ratio - 1
};

/// @brief sup |H_phi - H - L phi| for X + eps phi N with a rotationally symmetric phi(t), using the
/// trace convention H = tr A and L = Delta_g + |A|^2 (all by 4th-order differences in t).
/// @throws Error(Resolution) if the region is too short for the difference stencil.
QuadraticReport quadratic_check(const ModeRegion& region, const ScalarFn& phi, const QuadraticOptions& opts = {});

/// @brief Trace mean curvature tr A of the meridian (K, R) with inward normal, from its jets.
double trace_mean_curvature(int n, const MeridianJets& m);

}  // namespace cmc
