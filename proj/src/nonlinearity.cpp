#include "mcsv/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mcsv/errors.hpp"

namespace mcsv {

namespace {

// Quintic smoothstep S with S(0)=0, S(1)=1 and vanishing first and second
// derivatives at both ends.
double smoothstep(double x) { return x * x * x * (x * (6.0 * x - 15.0) + 10.0); }
double smoothstep_d(double x) { return 30.0 * x * x * (x - 1.0) * (x - 1.0); }
// 16-point Gauss–Legendre rule on [-1, 1], nodes by Newton on P_16.
struct GaussRule {
  static constexpr int kPoints = 16;
  double node[kPoints];
  double weight[kPoints];
  GaussRule() {
    for (int i = 0; i < kPoints; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (kPoints + 0.5));
      double dp = 1.0;
      for (int it = 0; it < 100; ++it) {
        const double p = std::legendre(kPoints, x);
        dp = kPoints * (x * p - std::legendre(kPoints - 1, x)) / (x * x - 1.0);
        const double dx = p / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      node[i] = x;
      weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

const GaussRule& gauss_rule() {
  static const GaussRule rule;
  return rule;
}

// ∫_0^x exp(b ξ) (1 - S(ξ)) dξ by composite Gauss–Legendre; the integrand is
// entire, so a few panels reach rounding level.
double blend_integral(double b, double x) {
  if (x <= 0.0) return 0.0;
  const GaussRule& g = gauss_rule();
  const int panels = 1 + static_cast<int>(std::ceil(std::abs(b) * x / 2.0));
  const double width = x / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * width;
    for (int i = 0; i < GaussRule::kPoints; ++i) {
      const double xi = mid + 0.5 * width * g.node[i];
      acc += g.weight[i] * std::exp(b * xi) * (1.0 - smoothstep(xi));
    }
  }
  return 0.5 * width * acc;
}

}  // namespace

NonlinearityModel NonlinearityModel::u1(double s, double threshold) {
  NonlinearityModel m;
  m.name_ = "u1";
  m.kind_ = Kind::U1;
  m.s_ = s;
  m.threshold_ = threshold > 0.0 ? threshold : 2.0 * s;
  m.check_invariants();
  return m;
}

NonlinearityModel NonlinearityModel::cp1(double s, double threshold) {
  NonlinearityModel m;
  m.name_ = "cp1";
  m.kind_ = Kind::CP1;
  m.s_ = s;
  m.threshold_ = threshold > 0.0 ? threshold : std::numeric_limits<double>::infinity();
  m.check_invariants();
  return m;
}

NonlinearityModel NonlinearityModel::custom(std::vector<double> t, std::vector<double> f, double s,
                                            double threshold) {
  if (t.size() != f.size() || t.size() < 2)
    throw PreconditionViolated("custom nonlinearity needs at least two (t, f) samples");
  if (t.front() != 0.0) throw PreconditionViolated("custom nonlinearity table must start at t = 0");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k] > t[k - 1])) throw PreconditionViolated("custom table: t must be strictly increasing");
    if (!(f[k] > f[k - 1])) throw PreconditionViolated("custom table: f must be strictly increasing");
  }
  NonlinearityModel m;
  m.name_ = "custom";
  m.kind_ = Kind::Custom;
  m.s_ = s;
  m.t_ = std::move(t);
  m.f_ = std::move(f);

  // Fritsch–Carlson slopes: harmonic mean of neighbouring secants, one-sided
  // three-point estimates at the ends, clipped to keep the cubic monotone.
  const std::size_t n = m.t_.size();
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = m.t_[k + 1] - m.t_[k];
    delta[k] = (m.f_[k + 1] - m.f_[k]) / h[k];
  }
  m.slope_.assign(n, 0.0);
  if (n == 2) {
    m.slope_[0] = m.slope_[1] = delta[0];
  } else {
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      m.slope_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (d * d0 <= 0.0) return 0.0;
      if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3.0 * d0)) return 3.0 * d0;
      return d;
    };
    m.slope_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m.slope_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }
  m.threshold_ = threshold > 0.0 ? std::min(threshold, m.t_.back()) : m.t_.back();
  m.check_invariants();
  return m;
}

void NonlinearityModel::check_invariants() const {
  const double lo = f0();
  if (!(lo < s_)) throw PreconditionViolated(name_ + ": requires f(0) < s");
  if (!(s_ < f_sup())) throw PreconditionViolated(name_ + ": requires s < sup f");
}

NonlinearityModel NonlinearityModel::with_threshold(double threshold) const {
  NonlinearityModel m = *this;
  m.threshold_ = threshold;
  m.check_invariants();
  return m;
}

double NonlinearityModel::f_sup() const {
  if (std::isinf(threshold_)) {
    if (kind_ == Kind::CP1) return 1.0;
    return std::numeric_limits<double>::infinity();
  }
  return eval(2.0 * threshold_).f;
}

FValues NonlinearityModel::raw(double t) const {
  switch (kind_) {
    case Kind::U1:
      return {t, 1.0, 0.0};
    case Kind::CP1: {
      const double p = 1.0 + t;
      return {(t - 1.0) / p, 2.0 / (p * p), -4.0 / (p * p * p)};
    }
    case Kind::Custom: {
      const std::size_t n = t_.size();
      std::size_t k = std::upper_bound(t_.begin(), t_.end(), t) - t_.begin();
      k = std::clamp<std::size_t>(k, 1, n - 1) - 1;
      const double h = t_[k + 1] - t_[k];
      const double x = (t - t_[k]) / h;
      const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
      const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
      const double d00 = 6 * x * x - 6 * x, d10 = 3 * x * x - 4 * x + 1;
      const double d01 = -d00, d11 = 3 * x * x - 2 * x;
      const double s00 = 12 * x - 6, s10 = 6 * x - 4, s01 = -s00, s11 = 6 * x - 2;
      const double m0 = slope_[k], m1 = slope_[k + 1];
      return {h00 * f_[k] + h10 * h * m0 + h01 * f_[k + 1] + h11 * h * m1,
              (d00 * f_[k] + d01 * f_[k + 1]) / h + d10 * m0 + d11 * m1,
              (s00 * f_[k] + s01 * f_[k + 1]) / (h * h) + (s10 * m0 + s11 * m1) / h};
    }
  }
  return {};
}

FValues NonlinearityModel::eval(double t) const {
  if (t < 0.0 || std::isnan(t)) throw NegativeArgument("nonlinearity evaluated at t < 0");
  if (t < threshold_) return raw(t);
  // Beyond T: f' = f'(T) exp(β(t - T)) (1 - S((t - T)/T)) with β = f''(T)/f'(T),
  // which matches f' and f'' at T, stays positive and vanishes past 2T.
  const FValues at = raw(threshold_);
  const double T = threshold_;
  const double x = std::min((t - T) / T, 1.0);
  const double beta = at.df > 0.0 ? at.d2f / at.df : 0.0;
  const double g = at.df * std::exp(beta * T * x);
  FValues out;
  out.f = at.f + at.df * T * blend_integral(beta * T, x);
  out.df = x >= 1.0 ? 0.0 : g * (1.0 - smoothstep(x));
  out.d2f = x >= 1.0 ? 0.0 : beta * g * (1.0 - smoothstep(x)) - g * smoothstep_d(x) / T;
  return out;
}

FValues eval(const NonlinearityModel& model, double t) { return model.eval(t); }

FieldValues eval_field(const NonlinearityModel& model, const ScalarField& t) {
  FieldValues out{ScalarField(t.grid()), ScalarField(t.grid()), ScalarField(t.grid())};
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < 0.0 || std::isnan(t[k]))
      throw NegativeArgument("nonlinearity evaluated at t < 0 (grid index " + std::to_string(k) + ")", k);
    const FValues v = model.eval(t[k]);
    out.f[k] = v.f;
    out.df[k] = v.df;
    out.d2f[k] = v.d2f;
  }
  return out;
}

double inverse(const NonlinearityModel& model, double y) {
  const double lo_val = model.f0();
  double hi = model.threshold();
  double hi_val;
  if (std::isinf(hi)) {
    if (!(y < model.f_sup()) || y < lo_val)
      throw OutOfRange("inverse: y = " + std::to_string(y) + " outside the range of f");
    hi = 1.0;
    while (model.eval(hi).f <= y) hi *= 2.0;
    hi_val = model.eval(hi).f;
  } else {
    hi_val = model.eval(hi).f;
    if (y < lo_val || !(y < hi_val))
      throw OutOfRange("inverse: y = " + std::to_string(y) + " outside [f(0), f(T))");
  }
  if (y == lo_val) return 0.0;

  // Safeguarded Newton: keep a bracket [lo, hi] with f(lo) <= y < f(hi) and
  // fall back to bisection whenever the Newton step leaves it.
  double lo = 0.0;
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const FValues v = model.eval(t);
    const double r = v.f - y;
    if (std::abs(r) <= 1e-14 * std::max(1.0, std::abs(y))) return t;
    if (r < 0.0) lo = t; else hi = t;
    double next = v.df > 0.0 ? t - r / v.df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == t) return t;
    t = next;
  }
  return t;
}

}  // namespace mcsv
