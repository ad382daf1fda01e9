#pragma once
// Damped least squares (Levenberg-Marquardt) with the model families used by the
// analysis layer and discrete convolution with a measured instrument response.
//
// Damping: lambda_0 = 1e-3, times 10 on a rejected step, divided by 10 on an accepted
// one, Marquardt scaling by diag(J^T W J). Converged once the relative chi2 decrease is
// below 1e-9 or the relative step is below 1e-10 on 3 consecutive iterations; at most
// 500 iterations. Positivity constraints are enforced through a log transform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spsim/error.hpp"

namespace spsim::fitkit {

enum class Transform { identity, log };

struct FitData {
  std::vector<double> x, y, w;

  std::size_t size() const { return x.size(); }

  /// Poisson weights 1 / max(y, 1).
  static FitData poisson(std::vector<double> x, std::vector<double> y) {
    FitData d{std::move(x), std::move(y), {}};
    d.w.resize(d.y.size());
    for (std::size_t i = 0; i < d.y.size(); ++i) d.w[i] = 1.0 / std::max(d.y[i], 1.0);
    return d;
  }
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> std_errors;
  Eigen::MatrixXd covariance;
  std::vector<bool> fixed;
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  std::size_t dof = 0;
  int n_iterations = 0;
  bool converged = false;

  std::size_t index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InputError("unknown fit parameter '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
  }
  double value(const std::string& name) const { return params[index(name)]; }
  double error(const std::string& name) const { return std_errors[index(name)]; }
};

struct FitOptions {
  std::vector<bool> fixed;            ///< empty: all parameters free
  std::vector<Transform> transforms;  ///< empty: the model's defaults
  int max_iterations = 500;
  double lambda0 = 1e-3;
  double chi2_tolerance = 1e-9;
  double step_tolerance = 1e-10;
  int patience = 3;
};

/// A model maps abscissae and parameters to values and (optionally) the n x p Jacobian.
template <class M>
concept Model = requires(const M& m, std::span<const double> x, std::span<const double> p, std::span<double> f,
                         Eigen::MatrixXd* jac) {
  { m.names() } -> std::convertible_to<std::vector<std::string>>;
  m.evaluate(x, p, f, jac);
};

/// CRTP helper for models defined point by point through value() and gradient().
template <class Derived>
class PointwiseModel {
 public:
  void evaluate(std::span<const double> x, std::span<const double> p, std::span<double> f,
                Eigen::MatrixXd* jac) const {
    const auto& self = static_cast<const Derived&>(*this);
    std::vector<double> g(p.size());
    if (jac) jac->setZero(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      f[i] = self.value(x[i], p);
      if (jac) {
        std::fill(g.begin(), g.end(), 0.0);
        self.gradient(x[i], p, g);
        for (std::size_t k = 0; k < p.size(); ++k)
          (*jac)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = g[k];
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Model families

/// f(t) = A exp(-(t - t0)/tau) + c for t >= t0, c before.
class ExpDecay : public PointwiseModel<ExpDecay> {
 public:
  enum : std::size_t { A, tau, t0, c };
  std::vector<std::string> names() const { return {"A", "tau", "t0", "c"}; }
  std::vector<Transform> default_transforms() const {
    return {Transform::identity, Transform::log, Transform::identity, Transform::identity};
  }
  std::vector<double> kinks(std::span<const double> p) const { return {p[t0]}; }

  double value(double t, std::span<const double> p) const {
    if (t < p[t0]) return p[c];
    return p[A] * std::exp(-(t - p[t0]) / p[tau]) + p[c];
  }
  void gradient(double t, std::span<const double> p, std::span<double> g) const {
    g[c] = 1.0;
    if (t < p[t0]) return;
    const double e = std::exp(-(t - p[t0]) / p[tau]);
    g[A] = e;
    g[tau] = p[A] * e * (t - p[t0]) / (p[tau] * p[tau]);
    g[t0] = p[A] * e / p[tau];
  }
};

/// f(t) = c + sum_k h_k exp(-|t - k P - t0| / tau) for k in [k_min, k_max]: a train of
/// two-sided exponential peaks sharing one decay time.
class ExpTrain : public PointwiseModel<ExpTrain> {
 public:
  enum : std::size_t { c, tau, t0, period, first_height };

  ExpTrain(int k_min, int k_max) : k_min_(k_min), k_max_(k_max) {
    if (k_max < k_min) throw InputError("empty peak train");
  }

  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  std::size_t n_peaks() const { return static_cast<std::size_t>(k_max_ - k_min_ + 1); }
  std::size_t height_index(int k) const { return first_height + static_cast<std::size_t>(k - k_min_); }

  std::vector<std::string> names() const {
    std::vector<std::string> n{"c", "tau", "t0", "period"};
    for (int k = k_min_; k <= k_max_; ++k) n.push_back("h[" + std::to_string(k) + "]");
    return n;
  }
  std::vector<Transform> default_transforms() const {
    std::vector<Transform> t(first_height + n_peaks(), Transform::identity);
    t[tau] = Transform::log;
    return t;
  }
  std::vector<double> kinks(std::span<const double> p) const {
    std::vector<double> out;
    for (int k = k_min_; k <= k_max_; ++k) out.push_back(p[t0] + k * p[period]);
    return out;
  }

  double value(double t, std::span<const double> p) const {
    double f = p[c];
    for (int k = k_min_; k <= k_max_; ++k)
      f += p[height_index(k)] * std::exp(-std::abs(t - k * p[period] - p[t0]) / p[tau]);
    return f;
  }
  void gradient(double t, std::span<const double> p, std::span<double> g) const {
    g[c] = 1.0;
    const double tau_v = p[tau];
    for (int k = k_min_; k <= k_max_; ++k) {
      const double d = t - k * p[period] - p[t0];
      const double e = std::exp(-std::abs(d) / tau_v);
      const double h = p[height_index(k)];
      const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      g[height_index(k)] = e;
      g[tau] += h * e * std::abs(d) / (tau_v * tau_v);
      g[t0] += h * e * s / tau_v;
      g[period] += h * e * s * k / tau_v;
    }
  }

 private:
  int k_min_, k_max_;
};

/// f(E) = A (G/2)^2 / ((E - E0)^2 + (G/2)^2) + c, G the full width at half maximum.
class Lorentzian : public PointwiseModel<Lorentzian> {
 public:
  enum : std::size_t { A, E0, gamma, c };
  std::vector<std::string> names() const { return {"A", "E0", "gamma", "c"}; }
  std::vector<Transform> default_transforms() const {
    return {Transform::identity, Transform::identity, Transform::log, Transform::identity};
  }

  double value(double e, std::span<const double> p) const {
    const double hw = 0.5 * p[gamma];
    const double d = e - p[E0];
    return p[A] * hw * hw / (d * d + hw * hw) + p[c];
  }
  void gradient(double e, std::span<const double> p, std::span<double> g) const {
    const double hw = 0.5 * p[gamma];
    const double d = e - p[E0];
    const double D = d * d + hw * hw;
    g[A] = hw * hw / D;
    g[E0] = p[A] * hw * hw * 2.0 * d / (D * D);
    g[gamma] = p[A] * hw * d * d / (D * D);
    g[c] = 1.0;
  }
};

/// f(theta) = I0 (1 + rho cos 2(theta - theta0)) / 2 + c, angles in degrees.
class Malus : public PointwiseModel<Malus> {
 public:
  enum : std::size_t { I0, rho, theta0, c };
  std::vector<std::string> names() const { return {"I0", "rho", "theta0", "c"}; }
  std::vector<Transform> default_transforms() const { return std::vector<Transform>(4, Transform::identity); }

  double value(double theta, std::span<const double> p) const {
    const double phi = 2.0 * (theta - p[theta0]) * std::numbers::pi / 180.0;
    return 0.5 * p[I0] * (1.0 + p[rho] * std::cos(phi)) + p[c];
  }
  void gradient(double theta, std::span<const double> p, std::span<double> g) const {
    const double phi = 2.0 * (theta - p[theta0]) * std::numbers::pi / 180.0;
    g[I0] = 0.5 * (1.0 + p[rho] * std::cos(phi));
    g[rho] = 0.5 * p[I0] * std::cos(phi);
    g[theta0] = p[I0] * p[rho] * std::sin(phi) * std::numbers::pi / 180.0;
    g[c] = 1.0;
  }
};

using ModelSpec = std::variant<ExpDecay, ExpTrain, Lorentzian, Malus>;

// ---------------------------------------------------------------------------
// Instrument response

/// Normalized response kernel; weights[center] is the zero-delay bin.
struct IRFHistogram {
  double bin_width_ps = 1.0;
  std::vector<double> weights;
  std::size_t center = 0;

  void normalize() {
    double s = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw InputError("instrument response must be non-negative");
      s += w;
    }
    if (!(s > 0.0)) throw InputError("instrument response has zero area");
    for (double& w : weights) w /= s;
  }
};

/// IRF from raw counts whose bin `center` holds zero delay.
inline IRFHistogram make_irf(double bin_width_ps, std::vector<double> counts, std::size_t center) {
  if (center >= counts.size()) throw InputError("IRF center outside the histogram");
  IRFHistogram irf{bin_width_ps, std::move(counts), center};
  irf.normalize();
  return irf;
}

/// Gaussian response sampled as bin integrals on bins centered at k * bin_width.
inline IRFHistogram make_gaussian_irf(double bin_width_ps, double sigma_ps, double n_sigma = 6.0) {
  if (!(bin_width_ps > 0.0)) throw InputError("bin width must be positive");
  if (!(sigma_ps > 0.0)) return {bin_width_ps, {1.0}, 0};
  const auto half = static_cast<std::size_t>(std::ceil(n_sigma * sigma_ps / bin_width_ps));
  IRFHistogram irf{bin_width_ps, std::vector<double>(2 * half + 1), half};
  const double s = sigma_ps * std::numbers::sqrt2;
  for (std::size_t k = 0; k < irf.weights.size(); ++k) {
    const double center = (static_cast<double>(k) - static_cast<double>(half)) * bin_width_ps;
    irf.weights[k] = 0.5 * (std::erf((center + 0.5 * bin_width_ps) / s) - std::erf((center - 0.5 * bin_width_ps) / s));
  }
  irf.normalize();
  return irf;
}

namespace detail {

/// out[i] = sum_j in[i + left - (j - center)] g[j] for an input already padded by
/// left = size - 1 - center samples on the left and center on the right.
inline void convolve_padded(std::span<const double> padded, const IRFHistogram& irf, std::span<double> out) {
  const std::size_t left = irf.weights.size() - 1 - irf.center;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < irf.weights.size(); ++j) acc += padded[i + left + irf.center - j] * irf.weights[j];
    out[i] = acc;
  }
}

}  // namespace detail

/// Discrete linear convolution on the curve's own grid (zero outside it), rescaled so the
/// total area of the curve is preserved.
inline std::vector<double> convolve_with_irf(std::span<const double> curve, double curve_bin_width_ps,
                                             const IRFHistogram& irf) {
  if (std::abs(curve_bin_width_ps - irf.bin_width_ps) > 1e-9 * irf.bin_width_ps)
    throw InputError("curve and instrument response use different bin widths");
  const std::size_t left = irf.weights.size() - 1 - irf.center;
  std::vector<double> padded(curve.size() + irf.weights.size() - 1, 0.0);
  std::copy(curve.begin(), curve.end(), padded.begin() + static_cast<std::ptrdiff_t>(left));
  std::vector<double> out(curve.size());
  detail::convolve_padded(padded, irf, out);
  double s_in = 0.0, s_out = 0.0;
  for (double v : curve) s_in += v;
  for (double v : out) s_out += v;
  if (s_out != 0.0)
    for (double& v : out) v *= s_in / s_out;
  return out;
}

/// Wraps a model with a response kernel. The inner model is evaluated on the data grid
/// extended by the kernel's reach, so no area is lost at the grid edges; x must be uniform
/// with the kernel's bin width.
template <Model Inner>
class Convolved {
 public:
  Convolved(Inner inner, IRFHistogram irf) : inner_(std::move(inner)), irf_(std::move(irf)) {}

  const Inner& inner() const { return inner_; }
  std::vector<std::string> names() const { return inner_.names(); }
  std::vector<Transform> default_transforms() const {
    if constexpr (requires { inner_.default_transforms(); })
      return inner_.default_transforms();
    else
      return std::vector<Transform>(names().size(), Transform::identity);
  }

  void evaluate(std::span<const double> x, std::span<const double> p, std::span<double> f,
                Eigen::MatrixXd* jac) const {
    if (x.empty()) return;
    const double w = irf_.bin_width_ps;
    if (x.size() > 1 && std::abs((x[1] - x[0]) - w) > 1e-6 * w)
      throw InputError("data grid spacing differs from the response bin width");
    const std::size_t left = irf_.weights.size() - 1 - irf_.center;
    const std::size_t n_ext = x.size() + irf_.weights.size() - 1;
    std::vector<double> xe(n_ext), fe(n_ext);
    for (std::size_t i = 0; i < n_ext; ++i)
      xe[i] = x[0] + (static_cast<double>(i) - static_cast<double>(left)) * w;
    Eigen::MatrixXd je;
    inner_.evaluate(xe, p, fe, jac ? &je : nullptr);
    detail::convolve_padded(fe, irf_, f);
    if (jac) {
      jac->resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(p.size()));
      std::vector<double> col(n_ext), out(x.size());
      for (Eigen::Index k = 0; k < je.cols(); ++k) {
        for (std::size_t i = 0; i < n_ext; ++i) col[i] = je(static_cast<Eigen::Index>(i), k);
        detail::convolve_padded(col, irf_, out);
        for (std::size_t i = 0; i < x.size(); ++i) (*jac)(static_cast<Eigen::Index>(i), k) = out[i];
      }
    }
  }

 private:
  Inner inner_;
  IRFHistogram irf_;
};

// ---------------------------------------------------------------------------
// Levenberg-Marquardt

namespace detail {

template <Model M>
std::vector<Transform> transforms_for(const M& m, const FitOptions& opt, std::size_t n) {
  if (!opt.transforms.empty()) {
    if (opt.transforms.size() != n) throw InputError("transform list does not match parameter count");
    return opt.transforms;
  }
  if constexpr (requires { m.default_transforms(); }) return m.default_transforms();
  return std::vector<Transform>(n, Transform::identity);
}

/// Throws RankDeficiencyError if the (free-parameter) normal matrix is numerically singular.
inline void check_rank(const Eigen::MatrixXd& a, const std::vector<std::string>& free_names) {
  const Eigen::Index n = a.rows();
  std::vector<std::string> offenders;
  Eigen::VectorXd d(n);
  double dmax = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) dmax = std::max(dmax, a(k, k));
  for (Eigen::Index k = 0; k < n; ++k) {
    d(k) = a(k, k);
    if (!(d(k) > 1e-300) || !(d(k) > 1e-28 * dmax)) offenders.push_back(free_names[static_cast<std::size_t>(k)]);
  }
  if (offenders.empty()) {
    Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd corr = s.asDiagonal() * a * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
    if (es.info() == Eigen::Success && es.eigenvalues()(0) < 1e-12 * std::max(1.0, es.eigenvalues()(n - 1))) {
      const Eigen::VectorXd v = es.eigenvectors().col(0);
      for (Eigen::Index k = 0; k < n; ++k)
        if (std::abs(v(k)) > 0.2) offenders.push_back(free_names[static_cast<std::size_t>(k)]);
    }
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
    throw RankDeficiencyError("singular normal matrix; parameters not identifiable: " + list, offenders);
  }
}

}  // namespace detail

template <Model M>
FitResult lm_fit(const M& model, const FitData& data, std::vector<double> initial, const FitOptions& opt = {}) {
  const std::vector<std::string> names = model.names();
  const std::size_t np = names.size();
  const std::size_t n = data.size();
  if (initial.size() != np) throw InputError("initial parameter count does not match the model");
  if (data.y.size() != n || data.w.size() != n) throw InputError("x, y and weights differ in length");
  for (double w : data.w)
    if (!(w > 0.0) || !std::isfinite(w)) throw InputError("weights must be positive and finite");

  std::vector<bool> fixed = opt.fixed.empty() ? std::vector<bool>(np, false) : opt.fixed;
  if (fixed.size() != np) throw InputError("fixed mask does not match parameter count");
  const auto transforms = detail::transforms_for(model, opt, np);

  std::vector<std::size_t> free;
  std::vector<std::string> free_names;
  for (std::size_t k = 0; k < np; ++k)
    if (!fixed[k]) {
      free.push_back(k);
      free_names.push_back(names[k]);
    }
  const std::size_t nf = free.size();
  if (n < nf) throw InputError("fewer data points than free parameters");

  for (std::size_t k : free)
    if (transforms[k] == Transform::log && !(initial[k] > 0.0))
      throw InputError("parameter '" + names[k] + "' must start positive");

  Eigen::VectorXd u(static_cast<Eigen::Index>(nf));
  for (std::size_t j = 0; j < nf; ++j) {
    const std::size_t k = free[j];
    u(static_cast<Eigen::Index>(j)) = transforms[k] == Transform::log ? std::log(initial[k]) : initial[k];
  }
  auto to_params = [&](const Eigen::VectorXd& uu) {
    std::vector<double> p = initial;
    for (std::size_t j = 0; j < nf; ++j) {
      const std::size_t k = free[j];
      const double v = uu(static_cast<Eigen::Index>(j));
      p[k] = transforms[k] == Transform::log ? std::exp(v) : v;
    }
    return p;
  };

  std::vector<double> f(n);
  Eigen::MatrixXd jext;
  auto chi2_of = [&](const std::vector<double>& p, Eigen::MatrixXd* jac) {
    model.evaluate(data.x, p, f, jac);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = data.y[i] - f[i];
      s += data.w[i] * r * r;
    }
    return s;
  };
  // Normal equations in the internal (transformed) coordinates.
  auto normal = [&](const std::vector<double>& p, Eigen::MatrixXd& a, Eigen::VectorXd& g) {
    const double chi2 = chi2_of(p, &jext);
    Eigen::MatrixXd j(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nf));
    for (std::size_t c = 0; c < nf; ++c) {
      const std::size_t k = free[c];
      const double scale = transforms[k] == Transform::log ? p[k] : 1.0;
      j.col(static_cast<Eigen::Index>(c)) = jext.col(static_cast<Eigen::Index>(k)) * scale;
    }
    Eigen::VectorXd r(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      r(static_cast<Eigen::Index>(i)) = data.y[i] - f[i];
      w(static_cast<Eigen::Index>(i)) = data.w[i];
    }
    a = j.transpose() * w.asDiagonal() * j;
    g = j.transpose() * (w.asDiagonal() * r);
    return chi2;
  };

  FitResult res;
  res.names = names;
  res.fixed = fixed;

  std::vector<double> p = to_params(u);
  Eigen::MatrixXd a;
  Eigen::VectorXd g;
  double chi2 = normal(p, a, g);
  if (!std::isfinite(chi2)) throw FitError("model is not finite at the initial parameters");
  detail::check_rank(a, free_names);

  double lambda = opt.lambda0;
  int quiet = 0;
  int it = 0;
  bool converged = false;
  bool need_normal = false;
  for (; it < opt.max_iterations && nf > 0; ++it) {
    if (need_normal) {
      chi2 = normal(p, a, g);
      need_normal = false;
    }
    Eigen::MatrixXd damped = a;
    for (Eigen::Index k = 0; k < damped.rows(); ++k) damped(k, k) += lambda * a(k, k);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
    Eigen::VectorXd delta = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
      lambda *= 10.0;
      continue;
    }
    const double step = delta.norm() / (u.norm() + 1e-30);
    const Eigen::VectorXd u_new = u + delta;
    const std::vector<double> p_new = to_params(u_new);
    const double chi2_new = chi2_of(p_new, nullptr);
    bool small;
    if (std::isfinite(chi2_new) && chi2_new <= chi2) {
      const double rel = chi2 > 0.0 ? (chi2 - chi2_new) / chi2 : 0.0;
      u = u_new;
      p = p_new;
      chi2 = chi2_new;
      need_normal = true;
      lambda = std::max(lambda / 10.0, 1e-15);
      small = rel < opt.chi2_tolerance || step < opt.step_tolerance;
      if (!small) quiet = 0;
    } else {
      lambda *= 10.0;
      small = step < opt.step_tolerance;
    }
    if (small && ++quiet >= opt.patience) {
      converged = true;
      ++it;
      break;
    }
    if (lambda > 1e20) break;
  }
  if (nf == 0) converged = true;

  chi2 = normal(p, a, g);
  if (nf > 0) detail::check_rank(a, free_names);
  Eigen::MatrixXd cov_int = nf > 0 ? Eigen::MatrixXd(a.ldlt().solve(Eigen::MatrixXd::Identity(a.rows(), a.cols())))
                                   : Eigen::MatrixXd();
  res.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
  for (std::size_t r = 0; r < nf; ++r)
    for (std::size_t c = 0; c < nf; ++c) {
      const std::size_t kr = free[r], kc = free[c];
      const double sr = transforms[kr] == Transform::log ? p[kr] : 1.0;
      const double sc = transforms[kc] == Transform::log ? p[kc] : 1.0;
      res.covariance(static_cast<Eigen::Index>(kr), static_cast<Eigen::Index>(kc)) =
          sr * sc * cov_int(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  res.params = p;
  res.std_errors.resize(np);
  for (std::size_t k = 0; k < np; ++k)
    res.std_errors[k] = std::sqrt(std::max(0.0, res.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))));
  res.chi2 = chi2;
  res.dof = n - nf;
  res.reduced_chi2 = res.dof > 0 ? chi2 / static_cast<double>(res.dof) : std::numeric_limits<double>::quiet_NaN();
  res.n_iterations = it;
  res.converged = converged;
  return res;
}

inline FitResult lm_fit(const ModelSpec& model, const FitData& data, std::vector<double> initial,
                        const FitOptions& opt = {}) {
  return std::visit([&](const auto& m) { return lm_fit(m, data, std::move(initial), opt); }, model);
}

/// Poisson maximum likelihood by iterative reweighting: starts from 1/max(y,1) weights, then
/// refits with weights 1/max(model, floor) until the parameters settle.
template <Model M>
FitResult lm_fit_poisson(const M& model, std::vector<double> x, std::vector<double> y, std::vector<double> initial,
                         const FitOptions& opt = {}, int max_passes = 8, double floor = 0.05) {
  FitData data = FitData::poisson(std::move(x), std::move(y));
  FitResult r = lm_fit(model, data, std::move(initial), opt);
  std::vector<double> f(data.size());
  for (int pass = 0; pass < max_passes; ++pass) {
    model.evaluate(data.x, r.params, f, nullptr);
    for (std::size_t i = 0; i < f.size(); ++i) data.w[i] = 1.0 / std::max(f[i], floor);
    FitResult next = lm_fit(model, data, r.params, opt);
    double change = 0.0;
    for (std::size_t k = 0; k < next.params.size(); ++k)
      if (!next.fixed[k])
        change = std::max(change, std::abs(next.params[k] - r.params[k]) / (next.std_errors[k] + 1e-300));
    r = std::move(next);
    if (change < 1e-4) break;
  }
  return r;
}

// ---------------------------------------------------------------------------

/// Largest column-relative deviation between the analytic Jacobian and central finite
/// differences with step 1e-6 (1 + |p|). Points next to a model kink are skipped.
template <Model M>
double jacobian_check(const M& model, std::span<const double> params, std::span<const double> x) {
  const std::size_t np = params.size();
  const std::size_t n = x.size();
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> f(n), fp(n), fm(n);
  Eigen::MatrixXd ja;
  model.evaluate(x, p, f, &ja);

  std::vector<double> steps(np);
  double max_step = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    steps[k] = 1e-6 * (1.0 + std::abs(p[k]));
    max_step = std::max(max_step, steps[k]);
  }
  std::vector<bool> use(n, true);
  if constexpr (requires { model.kinks(p); }) {
    for (double kink : model.kinks(p))
      for (std::size_t i = 0; i < n; ++i)
        if (std::abs(x[i] - kink) < 100.0 * max_step) use[i] = false;
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    std::vector<double> pp = p, pm = p;
    pp[k] += steps[k];
    pm[k] -= steps[k];
    model.evaluate(x, pp, fp, nullptr);
    model.evaluate(x, pm, fm, nullptr);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (use[i]) scale = std::max(scale, std::abs(ja(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))));
    if (scale == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      if (!use[i]) continue;
      const double fd = (fp[i] - fm[i]) / (2.0 * steps[k]);
      const double an = ja(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      worst = std::max(worst, std::abs(fd - an) / scale);
    }
  }
  return worst;
}

}  // namespace spsim::fitkit
