#include "cmc/blocks.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cmc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double block_a(double delta_prime) {
  if (!(delta_prime > 0.0) || !(std::cos(delta_prime) > std::tanh(1.0)))
    throw Error(ErrorKind::Parameter, "delta' must lie in (0, acos(tanh 1)) so that a > 0");
  return std::atanh(std::cos(delta_prime)) - 1.0;
}

MatrixXd frame_rotation(const MatrixXd& F, const MatrixXd& Fp) { return Fp * F.transpose(); }

double vector_angle(const VectorXd& x, const VectorXd& y) {
  VectorXd u = x.normalized(), v = y.normalized();
  return 2.0 * std::atan2((u - v).norm(), (u + v).norm());
}

// ---------------------------------------------------------------------------------------------
// Spherical block

SphericalBlock::SphericalBlock(std::vector<MatrixXd> W, std::vector<MatrixXd> Wp, double delta_prime)
    : W_(std::move(W)), Wp_(std::move(Wp)), delta_(delta_prime) {
  if (W_.size() != Wp_.size())
    throw Error(ErrorKind::Configuration, "frame sets W and W' have different sizes");
  if (!(delta_ > 0.0)) throw Error(ErrorKind::Configuration, "delta' must be positive");
  for (std::size_t i = 0; i < W_.size(); ++i) {
    for (const MatrixXd* F : {&W_[i], &Wp_[i]}) {
      const auto d = F->rows();
      if (F->cols() != d || d != W_[0].rows())
        throw Error(ErrorKind::Configuration, "frame " + std::to_string(i) + " is not square of common size");
      if ((F->transpose() * *F - MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
        throw Error(ErrorKind::Configuration, "frame " + std::to_string(i) + " is not orthonormal");
    }
    if (W_[i].determinant() * Wp_[i].determinant() <= 0.0)
      throw Error(ErrorKind::Configuration, "frame pair " + std::to_string(i) + " has opposite orientations");
    centers_.push_back(W_[i].col(0));
    R_.push_back(frame_rotation(W_[i], Wp_[i]));
  }
  for (std::size_t i = 0; i < W_.size(); ++i) {
    for (std::size_t j = i + 1; j < W_.size(); ++j)
      if (!(vector_angle(centers_[i], centers_[j]) > 16.0 * delta_))
        throw Error(ErrorKind::Configuration, "frames " + std::to_string(i) + " and " + std::to_string(j) +
                                                  " have first vectors within 16 delta'");
    if (vector_angle(centers_[i], Wp_[i].col(0)) > delta_ * delta_)
      throw Error(ErrorKind::Configuration, "frame pair " + std::to_string(i) +
                                                " has first vectors farther apart than delta'^2");
  }
}

SphericalBlock::Location SphericalBlock::locate(const VectorXd& x) const {
  Location loc;
  loc.distance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i) {
    double d = vector_angle(x, centers_[i]);
    if (d < loc.distance) {
      loc.distance = d;
      loc.cap = i;
    }
  }
  if (loc.cap < 0 || loc.distance >= 4.0 * delta_)
    loc.zone = Zone::Identity;
  else if (loc.distance <= 3.0 * delta_)
    loc.zone = Zone::Rotation;
  else
    loc.zone = Zone::Blend;
  return loc;
}

VectorXd SphericalBlock::operator()(const VectorXd& x) const {
  Location loc = locate(x);
  switch (loc.zone) {
    case Zone::Identity:
      return x;
    case Zone::Rotation:
      return R_[loc.cap] * x;
    case Zone::Blend: {
      double psi = cutoff(3.0 * delta_, 4.0 * delta_, loc.distance);
      VectorXd v = psi * x + (1.0 - psi) * (R_[loc.cap] * x);
      return v / v.norm();
    }
  }
  return x;
}

// ---------------------------------------------------------------------------------------------
// Delaunay blocks

namespace {

void sphere_jets(double t, Jet& K, Jet& R) {
  double th = std::tanh(t), sh = 1.0 / std::cosh(t);
  K = {th, sh * sh, -2.0 * sh * sh * th};
  R = {sh, -sh * th, sh * (th * th - sh * sh)};
}

bool is_zero(const Jet& j) { return j.v == 0.0 && j.d == 0.0 && j.dd == 0.0; }

void validate_block(const DelaunayProfile& prof, const VectorXd& zp, const VectorXd& zm, double a, double c_bar) {
  const int d = prof.n() + 1;
  if (zp.size() != d || zm.size() != d)
    throw Error(ErrorKind::Parameter, "dislocation vectors must lie in R^{n+1}");
  double bound = c_bar * std::abs(prof.tau());
  if (zp.norm() > bound || zm.norm() > bound)
    throw Error(ErrorKind::Parameter, "dislocation exceeds C|tau| = " + std::to_string(bound));
  if (!(prof.p() > a + 5.0))
    throw Error(ErrorKind::Parameter, "too few periods: p_tau = " + std::to_string(prof.p()) +
                                          " must exceed a + 5 = " + std::to_string(a + 5.0));
}

}  // namespace

DelaunayBlock DelaunayBlock::edge(std::shared_ptr<const DelaunayProfile> prof, int l, const VectorXd& zeta_plus,
                                  const VectorXd& zeta_minus, double delta_prime, double c_bar) {
  DelaunayBlock b;
  b.prof_ = std::move(prof);
  b.ray_ = false;
  b.l_ = l;
  b.delta_ = delta_prime;
  b.a_ = block_a(delta_prime);
  if (l < 1) throw Error(ErrorKind::Parameter, "edge blocks need at least one period");
  validate_block(*b.prof_, zeta_plus, zeta_minus, b.a_, c_bar);
  b.zp_ = zeta_plus;
  b.zm_ = zeta_minus;
  return b;
}

DelaunayBlock DelaunayBlock::ray(std::shared_ptr<const DelaunayProfile> prof, const VectorXd& zeta_plus,
                                 double delta_prime, double c_bar) {
  DelaunayBlock b;
  b.prof_ = std::move(prof);
  b.ray_ = true;
  b.l_ = 0;
  b.delta_ = delta_prime;
  b.a_ = block_a(delta_prime);
  VectorXd zero = VectorXd::Zero(b.prof_->n() + 1);
  validate_block(*b.prof_, zeta_plus, zero, b.a_, c_bar);
  b.zp_ = zeta_plus;
  b.zm_ = zero;
  return b;
}

double DelaunayBlock::t_end() const {
  return ray_ ? std::numeric_limits<double>::infinity() : 2.0 * prof_->p() * l_ - a_;
}

double DelaunayBlock::far_shift() const { return ray_ ? 0.0 : (2.0 + 2.0 * prof_->phat()) * l_; }

bool DelaunayBlock::in_dislocation_window(double t) const {
  if (t >= a_ && t <= a_ + 2.0) return true;
  if (ray_) return false;
  double T = 2.0 * prof_->p() * l_;
  return t >= T - (a_ + 2.0) && t <= T - a_;
}

bool DelaunayBlock::in_gluing_window(double t) const {
  if (t >= a_ + 3.0 && t <= a_ + 5.0) return true;
  if (ray_) return false;
  double T = 2.0 * prof_->p() * l_;
  return t >= T - (a_ + 5.0) && t <= T - (a_ + 3.0);
}

double DelaunayBlock::dislocation_h_error(double t, const VectorXd& theta) const {
  if (!in_dislocation_window(t))
    throw Error(ErrorKind::Domain, "t = " + std::to_string(t) + " outside the dislocation windows");
  const BlockMeridian m = meridian(t);
  Jet K, R;
  sphere_jets(t < a_ + 2.0 + 1e-12 ? t : t - 2.0 * prof_->p() * l_, K, R);
  const int n = static_cast<int>(theta.size());
  VectorXd Z1 = m.cplus.d * zp_ + m.cminus.d * zm_;
  VectorXd Z2 = m.cplus.dd * zp_ + m.cminus.dd * zm_;
  const double a1 = Z1(0), b1 = Z1.tail(n).dot(theta), a2 = Z2(0), b2 = Z2.tail(n).dot(theta);
  const double perp2 = std::max(0.0, Z1.tail(n).squaredNorm() - b1 * b1);
  // Unit sphere: K' = R^2, |X_t|^2 = R^2 and K''R' - K'R'' = R^3.
  const double r = R.v, A = K.d + a1, B = R.d + b1;
  const double ds = 2.0 * K.d * a1 + a1 * a1 + 2.0 * R.d * b1 + b1 * b1;
  const double s = r * r + ds, rs = std::sqrt(s), drs = ds / (rs + r);
  const double dN = a2 * B + K.dd * b1 - a1 * (R.dd + b2) - K.d * b2;
  const double t1 = (dN - (ds * rs + r * r * drs)) / (s * rs);
  const double t2 = (n - 1) * (a1 - r * drs) / (r * rs);
  const double t3 = A * perp2 / (r * rs * s);
  return (t1 + t2 + t3) / n;
}

BlockMeridian DelaunayBlock::meridian(double t) const {
  BlockMeridian m;
  const double a = a_;
  Jet S_K, S_R;
  sphere_jets(t, S_K, S_R);
  Jet dp = cutoff_jet(a + 2.0, a + 1.0, t);
  Jet gp = cutoff_jet(a + 3.0, a + 4.0, t);
  Jet near = dp + one_minus(dp) * one_minus(gp);
  Jet gm = jet_const(1.0), dm = jet_const(0.0), far = jet_const(0.0);
  Jet F_K, F_R;
  if (!ray_) {
    double T = 2.0 * prof_->p() * l_;
    dm = cutoff_jet(T - (a + 2.0), T - (a + 1.0), t);
    gm = cutoff_jet(T - (a + 3.0), T - (a + 4.0), t);
    far = dm + one_minus(dm) * one_minus(gm);
    if (!is_zero(far)) {
      sphere_jets(t - T, F_K, F_R);
      F_K.v += far_shift();
    }
  }
  Jet del = gp * gm;
  m.K = near * S_K;
  m.R = near * S_R;
  if (!is_zero(del)) {
    ProfileState s = prof_->state(t);
    m.K = m.K + del * Jet{s.k, s.kp, s.kpp};
    m.R = m.R + del * Jet{s.r, s.rp, s.rpp};
  }
  if (!is_zero(far)) {
    m.K = m.K + far * F_K;
    m.R = m.R + far * F_R;
  }
  m.cplus = dp;
  m.cminus = dm;
  return m;
}

void DelaunayBlock::check_domain(double t) const {
  const double slack = 1e-12 * std::max(1.0, std::abs(t));
  if (!(t >= a_ - slack) || !(t <= t_end() + slack))
    throw Error(ErrorKind::Domain, "t = " + std::to_string(t) + " outside the block domain [" +
                                       std::to_string(a_) + ", " + std::to_string(t_end()) + "]");
}

namespace {

VectorXd meridian_point(const BlockMeridian& m, const VectorXd& zp, const VectorXd& zm, const VectorXd& theta) {
  VectorXd X(theta.size() + 1);
  X(0) = m.K.v;
  X.tail(theta.size()) = m.R.v * theta;
  if (m.cplus.v != 0.0) X += m.cplus.v * zp;
  if (m.cminus.v != 0.0) X += m.cminus.v * zm;
  return X;
}

}  // namespace

VectorXd DelaunayBlock::point(double t, const VectorXd& theta) const {
  check_domain(t);
  return meridian_point(meridian(t), zp_, zm_, theta);
}

SurfaceSample DelaunayBlock::sample(double t, const VectorXd& theta) const {
  check_domain(t);
  return translated_revolution_sample(meridian(t), zp_, zm_, theta);
}

SurfaceSample translated_revolution_sample(const BlockMeridian& m, const VectorXd& zp, const VectorXd& zm,
                                           const VectorXd& theta) {
  const int n = static_cast<int>(theta.size());
  VectorXd Z1 = m.cplus.d * zp + m.cminus.d * zm;
  VectorXd Z2 = m.cplus.dd * zp + m.cminus.dd * zm;
  double zt1 = Z1.tail(n).dot(theta), zt2 = Z2.tail(n).dot(theta);
  double perp2 = std::max(0.0, Z1.tail(n).squaredNorm() - zt1 * zt1);
  double A = m.K.d + Z1(0), B = m.R.d + zt1;
  double s = A * A + B * B, rs = std::sqrt(s);
  double htt = ((m.K.dd + Z2(0)) * B - A * (m.R.dd + zt2)) / rs;
  double nH = htt / s + A / (m.R.v * rs) * ((n - 1) + perp2 / s);
  SurfaceSample out;
  out.X = meridian_point(m, zp, zm, theta);
  out.N.resize(n + 1);
  out.N(0) = B / rs;
  out.N.tail(n) = (-A / rs) * theta;
  out.H = nH / n;
  out.density = std::pow(m.R.v, n - 1) * rs;
  return out;
}

// ---------------------------------------------------------------------------------------------
// Finite-difference mean curvature

SurfaceSample fd_sample(const Immersion& X, double t, const VectorXd& theta, const FdOptions& fd) {
  const int n = static_cast<int>(theta.size());
  // Orthonormal basis E of theta-perp with det[theta, E] = +1.
  Eigen::HouseholderQR<MatrixXd> qr(theta);
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
  if (Q.col(0).dot(theta) < 0.0) Q.col(0) = -Q.col(0);
  Q.col(0) = theta;
  if (Q.determinant() < 0.0 && n > 1) Q.col(1) = -Q.col(1);
  auto F = [&](const VectorXd& y) {
    VectorXd yy = y.tail(n - 1);
    double r = yy.norm();
    VectorXd th = theta;
    if (r > 0.0) th = std::cos(r) * theta + std::sin(r) / r * (Q.rightCols(n - 1) * yy);
    return X(t + y(0), th);
  };
  VectorXd h(n);
  h(0) = fd.h_t;
  for (int i = 1; i < n; ++i) h(i) = fd.h_s;
  auto at = [&](int i, double si, int j, double sj) {
    VectorXd y = VectorXd::Zero(n);
    y(i) += si * h(i);
    y(j) += sj * h(j);
    return F(y);
  };
  VectorXd f0 = F(VectorXd::Zero(n));
  MatrixXd T(n + 1, n);
  std::vector<MatrixXd> D2(n, MatrixXd(n + 1, n));
  for (int i = 0; i < n; ++i) {
    VectorXd p1 = at(i, 1, i, 0), m1 = at(i, -1, i, 0), p2 = at(i, 2, i, 0), m2 = at(i, -2, i, 0);
    T.col(i) = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h(i));
    D2[i].col(i) = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h(i) * h(i));
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      auto f = [&](double a, double b) { return at(i, a, j, b); };
      VectorXd v = 8.0 * (f(1, -2) + f(2, -1) + f(-2, 1) + f(-1, 2)) -
                   8.0 * (f(-1, -2) + f(-2, -1) + f(1, 2) + f(2, 1)) -
                   (f(2, -2) + f(-2, 2) - f(-2, -2) - f(2, 2)) +
                   64.0 * (f(-1, -1) + f(1, 1) - f(1, -1) - f(-1, 1));
      v /= 144.0 * h(i) * h(j);
      D2[i].col(j) = v;
      D2[j].col(i) = v;
    }
  Eigen::HouseholderQR<MatrixXd> tq(T);
  MatrixXd QT = tq.householderQ() * MatrixXd::Identity(n + 1, n + 1);
  VectorXd N = QT.col(n);
  MatrixXd M(n + 1, n + 1);
  M << T, N;
  const double sigma = (n % 2 == 0) ? 1.0 : -1.0;
  if (M.determinant() * sigma < 0.0) N = -N;
  MatrixXd g = T.transpose() * T, hm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) hm(i, j) = D2[i].col(j).dot(N);
  SurfaceSample out;
  out.X = f0;
  out.N = N;
  out.H = (g.ldlt().solve(hm)).trace() / n;
  out.density = std::sqrt(g.determinant());
  return out;
}

// ---------------------------------------------------------------------------------------------
// Error fields

double HErrorField::max_dislocation() const { return dislocation.size() ? dislocation.cwiseAbs().maxCoeff() : 0.0; }
double HErrorField::max_gluing() const { return gluing.size() ? gluing.cwiseAbs().maxCoeff() : 0.0; }

double HErrorField::max_outside() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    for (Eigen::Index j = 0; j < H.cols(); ++j)
      if (dislocation(i, j) == 0.0 && gluing(i, j) == 0.0) m = std::max(m, std::abs(H(i, j) - 1.0));
  return m;
}

double HErrorField::max_error_in(double lo, double hi) const {
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= lo && t[i] <= hi) m = std::max(m, (H.row(i).array() - 1.0).abs().maxCoeff());
  return m;
}

HErrorField mean_curvature_field(const DelaunayBlock& block, const std::vector<double>& t,
                                 const std::vector<VectorXd>& theta, HMethod method, const FdOptions& fd) {
  if (theta.empty() || t.empty()) throw Error(ErrorKind::Resolution, "empty sampling grid");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] - t[i - 1] > 0.25)
      throw Error(ErrorKind::Resolution, "t spacing " + std::to_string(t[i] - t[i - 1]) +
                                             " exceeds 0.25; cutoff transitions are unresolved");
  if (method == HMethod::FiniteDifference && (fd.h_t > 0.05 || fd.h_s > 0.05))
    throw Error(ErrorKind::Resolution, "finite-difference steps above 0.05 are unstable for second differences");
  HErrorField f;
  f.t = t;
  f.theta = theta;
  const auto nt = static_cast<Eigen::Index>(t.size()), ns = static_cast<Eigen::Index>(theta.size());
  f.H.resize(nt, ns);
  f.dislocation = MatrixXd::Zero(nt, ns);
  f.gluing = MatrixXd::Zero(nt, ns);
  Immersion X = [&block](double s, const VectorXd& th) {
    return meridian_point(block.meridian(s), block.zeta_plus(), block.zeta_minus(), th);
  };
  for (Eigen::Index i = 0; i < nt; ++i) {
    // With zeta = 0 on a side there is no dislocation term; keep the field identically zero.
    const bool near = t[i] < 0.5 * (block.t_begin() + std::min(block.t_end(), 1e300));
    const bool dislocated = !(near ? block.zeta_plus() : block.zeta_minus()).isZero(0.0);
    const bool dis = dislocated && block.in_dislocation_window(t[i]), glu = block.in_gluing_window(t[i]);
    for (Eigen::Index j = 0; j < ns; ++j) {
      double H = method == HMethod::Exact ? block.sample(t[i], theta[j]).H : fd_sample(X, t[i], theta[j], fd).H;
      f.H(i, j) = H;
      if (dis) f.dislocation(i, j) = method == HMethod::Exact ? block.dislocation_h_error(t[i], theta[j]) : H - 1.0;
      if (glu) f.gluing(i, j) = H - 1.0;
    }
  }
  return f;
}

DislocationFlux dislocation_flux_integral(const DelaunayBlock& block, double b, int side, int panels,
                                          int order, int n_polar) {
  const double a = block.a(), p = block.profile().p();
  if (!(b > a + 3.0 && b < p))
    throw Error(ErrorKind::Parameter, "b must lie in (a + 3, p_tau)");
  if (side != 1 && side != -1) throw Error(ErrorKind::Parameter, "side must be +1 or -1");
  if (side == -1 && block.is_ray()) throw Error(ErrorKind::Parameter, "rays have no far end");
  const int n = block.n();
  SphereGrid S = SphereGrid::product(n - 1, n_polar);
  const double T = block.is_ray() ? 0.0 : 2.0 * p * block.periods();
  DislocationFlux out;
  out.value = VectorXd::Zero(n + 1);
  const VectorXd& zeta = side > 0 ? block.zeta_plus() : block.zeta_minus();
  if (zeta.isZero(0.0)) return out;
  // H_dislocation vanishes outside the transition of psi[a+2, a+1], which is the middle third of
  // [a+1, a+2] (resp. its mirror).
  const double mid = side > 0 ? a + 1.5 : T - a - 1.5;
  QuadRule q = composite_gauss(mid - 1.0 / 6.0, mid + 1.0 / 6.0, panels, order);
  for (std::size_t i = 0; i < q.x.size(); ++i)
    for (std::size_t j = 0; j < S.size(); ++j) {
      SurfaceSample s = block.sample(q.x[i], S.points[j]);
      out.value += (q.w[i] * S.weights[j] * block.dislocation_h_error(q.x[i], S.points[j]) * s.density) * s.N;
    }
  out.norm = out.value.norm();
  return out;
}

}  // namespace cmc
