#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcurv/error.hpp"
#include "mcurv/minkowski.hpp"

namespace mcurv {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Radial weight m(r) (or mu(r)): constant, affine a + b r, or a sampled table.
class Weight {
 public:
  enum class Kind { Constant, Affine, Table };

  static Weight constant(double c) { return Weight(Kind::Constant, c, 0.0, {}, {}); }
  static Weight affine(double a, double b) { return Weight(Kind::Affine, a, b, {}, {}); }
  static Weight table(std::vector<double> r, std::vector<double> values) {
    if (r.size() < 2 || r.size() != values.size())
      throw Error(ErrorCode::Malformed, "weight table needs >= 2 matching nodes");
    if (!std::is_sorted(r.begin(), r.end()) ||
        std::adjacent_find(r.begin(), r.end()) != r.end())
      throw Error(ErrorCode::Malformed, "weight table radii must be strictly increasing");
    return Weight(Kind::Table, 0.0, 0.0, std::move(r), std::move(values));
  }

  double operator()(double r) const {
    switch (kind_) {
      case Kind::Constant: return a_;
      case Kind::Affine: return a_ + b_ * r;
      case Kind::Table: return interpolate(r);
    }
    return 0.0;
  }

  Kind kind() const { return kind_; }
  double constant_term() const { return a_; }
  double slope() const { return b_; }
  const std::vector<double>& table_radii() const { return r_; }
  const std::vector<double>& table_values() const { return v_; }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case Kind::Constant: os << a_; break;
      case Kind::Affine: os << a_ << "+" << b_ << "*r"; break;
      case Kind::Table: os << "table[" << r_.size() << "]"; break;
    }
    return os.str();
  }

 private:
  Weight(Kind kind, double a, double b, std::vector<double> r, std::vector<double> v)
      : kind_(kind), a_(a), b_(b), r_(std::move(r)), v_(std::move(v)) {}

  double interpolate(double r) const {
    if (r <= r_.front()) return v_.front();
    if (r >= r_.back()) return v_.back();
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const auto i = static_cast<std::size_t>(it - r_.begin()) - 1;
    const double t = (r - r_[i]) / (r_[i + 1] - r_[i]);
    return (1.0 - t) * v_[i] + t * v_[i + 1];
  }

  Kind kind_;
  double a_;
  double b_;
  std::vector<double> r_;
  std::vector<double> v_;
};

enum class Family { LinearPlusCubic, PowerSuperlinear, PowerSublinear, Custom };

inline const char* to_string(Family family) {
  switch (family) {
    case Family::LinearPlusCubic: return "linear_plus_cubic";
    case Family::PowerSuperlinear: return "power_superlinear";
    case Family::PowerSublinear: return "power_sublinear";
    case Family::Custom: return "custom";
  }
  return "unknown";
}

/// Nonlinearity f(r, s): a built-in family plus a stack of structural modifiers
/// (truncation, small-amplitude linearization, radial shift) applied innermost first.
class Nonlinearity {
 public:
  struct Modifier {
    enum class Kind { Truncate, SlopeCap, RadialShift };
    Kind kind;
    double value;  // truncation radius, 1/n, or shift
  };

  /// f = m(r) s + c s^3
  static Nonlinearity linear_plus_cubic(Weight m, double c) {
    Nonlinearity f(Family::LinearPlusCubic, std::move(m));
    f.cubic_ = c;
    return f;
  }

  /// f = mu(r) |s|^{q-1} s with q > 1
  static Nonlinearity power_superlinear(Weight mu, double q) {
    if (!(q > 1.0)) throw Error(ErrorCode::Malformed, "power_superlinear needs exponent q > 1");
    Nonlinearity f(Family::PowerSuperlinear, std::move(mu));
    f.exponent_ = q;
    return f;
  }

  /// f = mu(r) |s|^{q-1} s with 0 < q < 1
  static Nonlinearity power_sublinear(Weight mu, double q) {
    if (!(q > 0.0 && q < 1.0))
      throw Error(ErrorCode::Malformed, "power_sublinear needs exponent 0 < q < 1");
    Nonlinearity f(Family::PowerSublinear, std::move(mu));
    f.exponent_ = q;
    return f;
  }

  /// f = mu(r) * T(s), T linearly interpolated from samples (linear extrapolation outside).
  static Nonlinearity custom(Weight mu, std::vector<double> s, std::vector<double> values) {
    if (s.size() < 2 || s.size() != values.size())
      throw Error(ErrorCode::Malformed, "custom table needs >= 2 matching samples");
    if (!std::is_sorted(s.begin(), s.end()) || std::adjacent_find(s.begin(), s.end()) != s.end())
      throw Error(ErrorCode::Malformed, "custom table abscissae must be strictly increasing");
    Nonlinearity f(Family::Custom, std::move(mu));
    f.table_s_ = std::move(s);
    f.table_f_ = std::move(values);
    return f;
  }

  double operator()(double r, double s) const { return eval_level(r, s, mods_.size()); }

  /// Linearization weight lim f(r,s)/s when the structure makes it known in closed form.
  std::optional<double> linear_weight(double r) const { return weight_level(r, mods_.size()); }

  bool has_linear_weight() const { return linear_weight(0.0).has_value(); }

  Family family() const { return family_; }
  const Weight& weight() const { return weight_; }
  double cubic() const { return cubic_; }
  double exponent() const { return exponent_; }
  const std::vector<double>& table_s() const { return table_s_; }
  const std::vector<double>& table_f() const { return table_f_; }
  const std::vector<Modifier>& modifiers() const { return mods_; }

  bool is_odd() const {
    if (family_ != Family::Custom) return true;
    for (std::size_t i = 0; i < table_s_.size(); ++i) {
      const double s = table_s_[i];
      if (std::abs(eval_table(-s) + table_f_[i]) > 1e-14 * (1.0 + std::abs(table_f_[i])))
        return false;
    }
    return true;
  }

  /// Radii where f is not continuous in r (step boundaries for the integrator).
  std::vector<double> radial_breakpoints() const {
    std::vector<double> out;
    for (const auto& m : mods_)
      if (m.kind == Modifier::Kind::RadialShift) out.push_back(m.value);
    return out;
  }

  Nonlinearity truncated(double radius) const { return with({Modifier::Kind::Truncate, radius}); }
  Nonlinearity slope_capped(int n) const {
    if (n < 1) throw Error(ErrorCode::Malformed, "slope cap index n must be >= 1");
    return with({Modifier::Kind::SlopeCap, 1.0 / n});
  }
  Nonlinearity radially_shifted(double shift) const {
    return with({Modifier::Kind::RadialShift, shift});
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << to_string(family_) << "(weight=" << weight_.describe();
    if (family_ == Family::LinearPlusCubic) os << ",c=" << cubic_;
    if (family_ == Family::PowerSuperlinear || family_ == Family::PowerSublinear)
      os << ",q=" << exponent_;
    if (family_ == Family::Custom) os << ",table=" << table_s_.size();
    os << ")";
    for (const auto& m : mods_) {
      switch (m.kind) {
        case Modifier::Kind::Truncate: os << "|trunc(" << m.value << ")"; break;
        case Modifier::Kind::SlopeCap: os << "|cap(" << m.value << ")"; break;
        case Modifier::Kind::RadialShift: os << "|shift(" << m.value << ")"; break;
      }
    }
    return os.str();
  }

 private:
  Nonlinearity(Family family, Weight w) : family_(family), weight_(std::move(w)) {}

  Nonlinearity with(Modifier m) const {
    Nonlinearity out = *this;
    out.mods_.push_back(m);
    return out;
  }

  double eval_table(double s) const {
    const auto& x = table_s_;
    const auto& y = table_f_;
    std::size_t i;
    if (s <= x.front()) {
      i = 0;
    } else if (s >= x.back()) {
      i = x.size() - 2;
    } else {
      i = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), s) - x.begin()) - 1;
    }
    const double t = (s - x[i]) / (x[i + 1] - x[i]);
    return (1.0 - t) * y[i] + t * y[i + 1];
  }

  double eval_base(double r, double s) const {
    switch (family_) {
      case Family::LinearPlusCubic: return weight_(r) * s + cubic_ * s * s * s;
      case Family::PowerSuperlinear:
      case Family::PowerSublinear:
        if (s == 0.0) return 0.0;
        return weight_(r) * std::copysign(std::pow(std::abs(s), exponent_), s);
      case Family::Custom: return weight_(r) * eval_table(s);
    }
    return 0.0;
  }

  double eval_level(double r, double s, std::size_t level) const {
    if (level == 0) return eval_base(r, s);
    const Modifier& m = mods_[level - 1];
    switch (m.kind) {
      case Modifier::Kind::Truncate: {
        const double a = std::abs(s);
        if (a <= m.value) return eval_level(r, s, level - 1);
        if (a >= m.value + 1.0) return 0.0;
        return eval_level(r, std::copysign(m.value, s), level - 1) * (m.value + 1.0 - a);
      }
      case Modifier::Kind::SlopeCap:
        if (std::abs(s) <= m.value) return eval_level(r, m.value, level - 1) / m.value * s;
        return eval_level(r, s, level - 1);
      case Modifier::Kind::RadialShift:
        if (r <= m.value) return 0.0;
        return eval_level(r - m.value, s, level - 1);
    }
    return 0.0;
  }

  std::optional<double> weight_level(double r, std::size_t level) const {
    if (level == 0) {
      switch (family_) {
        case Family::LinearPlusCubic: return weight_(r);
        case Family::PowerSuperlinear: return 0.0;
        case Family::PowerSublinear:
        case Family::Custom: return std::nullopt;
      }
    }
    const Modifier& m = mods_[level - 1];
    switch (m.kind) {
      case Modifier::Kind::Truncate:
        if (m.value > 0.0) return weight_level(r, level - 1);
        return std::nullopt;
      case Modifier::Kind::SlopeCap: return eval_level(r, m.value, level - 1) / m.value;
      case Modifier::Kind::RadialShift:
        if (r <= m.value) return 0.0;
        return weight_level(r - m.value, level - 1);
    }
    return std::nullopt;
  }

  Family family_;
  Weight weight_;
  double cubic_ = 0.0;
  double exponent_ = 1.0;
  std::vector<double> table_s_;
  std::vector<double> table_f_;
  std::vector<Modifier> mods_;
};

enum class Sign : int { Minus = -1, Plus = 1 };

inline double to_double(Sign s) { return static_cast<double>(static_cast<int>(s)); }
inline Sign flip(Sign s) { return s == Sign::Plus ? Sign::Minus : Sign::Plus; }
inline char to_char(Sign s) { return s == Sign::Plus ? '+' : '-'; }

/// Membership in the nodal class: k - 1 interior zeros, first arch of sign nu.
struct NodalSignature {
  int k = 1;
  Sign nu = Sign::Plus;

  NodalSignature() = default;
  NodalSignature(int k_, Sign nu_) : k(k_), nu(nu_) {
    if (k < 1) throw Error(ErrorCode::Malformed, "nodal signature requires k >= 1");
  }

  /// Sign of the last arch (the one ending at the outer radius).
  Sign last_arch() const { return (k % 2 == 1) ? nu : flip(nu); }

  friend bool operator==(const NodalSignature&, const NodalSignature&) = default;

  std::string str() const { return std::to_string(k) + to_char(nu); }
};

/// One boundary value problem instance on the annulus (inner_radius, outer_radius),
/// or the ball when inner_radius = 0.
struct ProblemSpec {
  int dimension = 3;
  double outer_radius = 1.0;
  double inner_radius = 0.0;
  double lambda = 0.0;
  Nonlinearity f = Nonlinearity::linear_plus_cubic(Weight::constant(1.0), 0.0);
  double alpha = kInfinity;

  double span() const { return outer_radius - inner_radius; }

  void validate() const {
    if (dimension < 2) throw Error(ErrorCode::Malformed, "dimension must be >= 2");
    if (!(outer_radius > 0.0) || !std::isfinite(outer_radius))
      throw Error(ErrorCode::Malformed, "outer_radius must be positive and finite");
    if (!(inner_radius >= 0.0 && inner_radius < outer_radius))
      throw Error(ErrorCode::Malformed, "inner_radius must lie in [0, outer_radius)");
    if (!(alpha > outer_radius))
      throw Error(ErrorCode::Malformed,
                  "alpha must exceed outer_radius (f is required on |s| < alpha with R < alpha)");
    if (!(lambda >= 0.0)) throw Error(ErrorCode::Malformed, "lambda must be >= 0");
  }

  double eval_f(double r, double s) const {
    if (std::isfinite(alpha) && !(std::abs(s) < alpha))
      throw Error(ErrorCode::Domain, "|s| >= alpha in f(r, s)");
    return f(r, s);
  }

  ProblemSpec with_lambda(double l) const {
    ProblemSpec out = *this;
    out.lambda = l;
    return out;
  }
};

/// Replaces f by the truncation that agrees with f on |s| <= R - delta, vanishes for
/// |s| >= R - delta + 1 and is linear in between.
inline ProblemSpec truncate_f(const ProblemSpec& spec) {
  spec.validate();
  ProblemSpec out = spec;
  out.f = spec.f.truncated(spec.span());
  return out;
}

struct HypothesisReport {
  bool a1 = false;             ///< sign condition f(r,s) s > 0
  bool a2 = false;             ///< f/s converges as s -> 0
  bool a2_degenerate = false;  ///< the limit weight m vanishes on a subinterval or is negative
  bool a3 = false;             ///< f / phi1(s) -> infinity
  double worst_r = 0.0;        ///< grid point with the smallest sign margin (or first violation)
  double worst_s = 0.0;
  double a2_residual = 0.0;    ///< largest |f/s - m| at the smallest ladder amplitude
  double a3_ratio = 0.0;       ///< smallest f / phi1 at the smallest ladder amplitude

  bool a2_usable() const { return a2 && !a2_degenerate; }
};

/// Grid-sampled falsification of the structural hypotheses on f.
inline HypothesisReport validate_hypotheses(const ProblemSpec& spec, int grid_resolution = 64) {
  spec.validate();
  if (grid_resolution < 16) throw Error(ErrorCode::Malformed, "grid_resolution must be >= 16");

  HypothesisReport rep;
  const double delta = spec.inner_radius;
  const double R = spec.outer_radius;
  const int n = grid_resolution;
  auto radius = [&](int i) { return delta + (R - delta) * i / (n - 1); };

  // (A1) on s in (-s_max, s_max) \ {0}
  const double s_max = std::isfinite(spec.alpha) ? spec.alpha * (1.0 - 1e-9) : spec.span() + 1.0;
  rep.a1 = true;
  double worst_margin = kInfinity;
  for (int i = 0; i < n && rep.a1; ++i) {
    const double r = radius(i);
    for (int j = 1; j <= n; ++j) {
      // geometric near zero, uniform further out
      const double frac = static_cast<double>(j) / n;
      for (double s : {s_max * frac, s_max * std::pow(10.0, -8.0 * (1.0 - frac))}) {
        for (double signed_s : {s, -s}) {
          const double fs = spec.eval_f(r, signed_s) * signed_s;
          const double margin = fs / (signed_s * signed_s);
          if (!(fs > 0.0)) {
            rep.a1 = false;
            rep.worst_r = r;
            rep.worst_s = signed_s;
            break;
          }
          if (margin < worst_margin) {
            worst_margin = margin;
            rep.worst_r = r;
            rep.worst_s = signed_s;
          }
        }
        if (!rep.a1) break;
      }
      if (!rep.a1) break;
    }
  }

  // (A2): |f/s - m| must shrink along the ladder and end within tolerance.
  constexpr double ladder[] = {1e-2, 1e-3, 1e-4};
  constexpr double a2_tol = 1e-2;
  rep.a2 = true;
  std::vector<double> m_values(n);
  for (int i = 0; i < n; ++i) {
    const double r = radius(i);
    const auto known = spec.f.linear_weight(r);
    const double m = known ? *known : spec.eval_f(r, ladder[2]) / ladder[2];
    m_values[i] = m;
    for (double sign : {1.0, -1.0}) {
      double prev = kInfinity;
      for (double s : ladder) {
        const double dev = std::abs(spec.eval_f(r, sign * s) / (sign * s) - m);
        if (dev > prev * (1.0 + 1e-12) + 1e-14) rep.a2 = false;
        prev = dev;
      }
      if (prev > a2_tol) rep.a2 = false;
      if (!known) {
        // the ladder must be consistent with a finite limit; a reference at s/100 catches blow-up
        const double s = ladder[2] * 1e-2;
        const double dev = std::abs(spec.eval_f(r, sign * s) / (sign * s) - m);
        if (dev > a2_tol) rep.a2 = false;
      }
      rep.a2_residual = std::max(rep.a2_residual, prev);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (m_values[i] < -1e-12) rep.a2_degenerate = true;
    if (i + 1 < n && std::abs(m_values[i]) <= 1e-12 && std::abs(m_values[i + 1]) <= 1e-12)
      rep.a2_degenerate = true;
  }

  // (A3): f(r,0) = 0 and f/phi1 grows without bound along a shrinking ladder.
  constexpr double a3_ladder[] = {1e-2, 1e-4, 1e-6, 1e-8};
  constexpr double a3_threshold = 1e3;
  rep.a3 = true;
  rep.a3_ratio = kInfinity;
  for (int i = 0; i < n; ++i) {
    const double r = radius(i);
    if (spec.eval_f(r, 0.0) != 0.0) rep.a3 = false;
    for (double sign : {1.0, -1.0}) {
      double prev = 0.0;
      for (double s : a3_ladder) {
        const double ratio = spec.eval_f(r, sign * s) / phi1(sign * s);
        if (!(ratio > prev)) rep.a3 = false;
        prev = ratio;
      }
      rep.a3_ratio = std::min(rep.a3_ratio, prev);
      if (!(prev > a3_threshold)) rep.a3 = false;
    }
  }
  return rep;
}

}  // namespace mcurv
