#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "woa/error.hpp"

namespace woa {

enum class DistributionKind { uniform, piecewise_linear, lower_truncated };

// How the density continues above the upper bound of the support. The
// continuation only feeds the curve ODE while shooting; it is never used as a
// probability.
enum class ExtensionRule { linear, constant };

struct DistributionValue {
  double cdf = 0.0;
  double density = 0.0;
  double hazard = 0.0;  // f / F, +inf at the lower bound
  bool extended = false;
};

// Value distribution on [v_lo, v_hi] with a piecewise-linear density.
//
// The density is kept unnormalised on the node grid of the base shape, and
// every query divides by the mass below the effective upper bound. A lower
// truncation therefore shares the node arithmetic of its base, which makes
// F/f bit-identical across truncations of the same base on their overlap.
class ValueDistribution {
 public:
  static ValueDistribution uniform(double lo, double hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
      throw Error(ErrorCode::invalid_spec, "uniform distribution needs finite v_lo < v_hi");
    }
    ValueDistribution d;
    d.kind_ = DistributionKind::uniform;
    d.base_kind_ = DistributionKind::uniform;
    d.xs_ = {lo, hi};
    d.fs_ = {1.0, 1.0};
    d.finish(hi);
    return d;
  }

  // Densities are node values of an unnormalised density; they are rescaled
  // to unit mass.
  static ValueDistribution piecewise_linear(std::vector<double> values, std::vector<double> densities) {
    if (values.size() < 2 || values.size() != densities.size()) {
      throw Error(ErrorCode::invalid_spec, "piecewise-linear density needs >= 2 (v, f) nodes");
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!std::isfinite(values[k]) || !std::isfinite(densities[k]) || !(densities[k] > 0.0)) {
        throw Error(ErrorCode::invalid_spec, "piecewise-linear nodes must be finite with positive density");
      }
      if (k > 0 && !(values[k] > values[k - 1])) {
        throw Error(ErrorCode::invalid_spec, "piecewise-linear node values must be strictly increasing");
      }
    }
    ValueDistribution d;
    d.kind_ = DistributionKind::piecewise_linear;
    d.base_kind_ = DistributionKind::piecewise_linear;
    d.xs_ = std::move(values);
    d.fs_ = std::move(densities);
    d.finish(d.xs_.back());
    return d;
  }

  // F(v) = F_base(v) / F_base(upper) on [v_lo, upper].
  static ValueDistribution lower_truncated(const ValueDistribution& base, double upper) {
    if (!(upper > base.lower() && upper <= base.base_upper())) {
      throw Error(ErrorCode::bound_out_of_range, "truncation bound outside the base support");
    }
    ValueDistribution d = base;
    d.kind_ = DistributionKind::lower_truncated;
    d.finish(upper);
    return d;
  }

  DistributionKind kind() const noexcept { return kind_; }
  DistributionKind base_kind() const noexcept { return base_kind_; }
  ExtensionRule extension() const noexcept { return extension_; }

  double lower() const noexcept { return xs_.front(); }
  double upper() const noexcept { return upper_; }
  double base_upper() const noexcept { return xs_.back(); }
  const std::vector<double>& node_values() const noexcept { return xs_; }
  const std::vector<double>& node_densities() const noexcept { return fs_; }

  // The untruncated distribution this one was cut from (itself when not truncated).
  ValueDistribution base() const {
    ValueDistribution d = *this;
    d.kind_ = base_kind_;
    d.finish(xs_.back());
    return d;
  }

  ValueDistribution with_extension(ExtensionRule rule) const {
    ValueDistribution d = *this;
    d.extension_ = rule;
    d.finish(upper_);
    return d;
  }

  // Same shape moved down by dy on the value axis.
  ValueDistribution shifted_down(double dy) const {
    ValueDistribution d = *this;
    for (double& x : d.xs_) x -= dy;
    d.finish(upper_ - dy);
    return d;
  }

  DistributionValue eval(double v) const {
    if (v < lower()) {
      throw Error(ErrorCode::below_support, "value " + std::to_string(v) + " below v_lo");
    }
    DistributionValue out;
    if (v <= upper_) {
      const double cum = cumulative(v);
      const double dens = raw_density(v);
      out.cdf = cum / mass_;
      out.density = dens / mass_;
      out.hazard = cum > 0.0 ? dens / cum : std::numeric_limits<double>::infinity();
      out.extended = false;
    } else {
      const double cum = extended_cumulative(v);
      const double dens = extended_density(v);
      out.cdf = cum / mass_;
      out.density = dens / mass_;
      out.hazard = dens / cum;
      out.extended = true;
    }
    return out;
  }

  double cdf(double v) const {
    if (v <= lower()) return 0.0;
    if (v >= upper_) return 1.0;
    return cumulative(v) / mass_;
  }

  double density(double v) const { return eval(v).density; }

  // F/f, the factor in front of the curve dynamics. Defined for every real
  // argument: 0 at and below v_lo (its limit), the extension above v_hi.
  double inverse_hazard(double v) const {
    if (v <= lower()) return 0.0;
    if (v <= upper_) return cumulative(v) / raw_density(v);
    return extended_cumulative(v) / extended_density(v);
  }

  double quantile(double p) const {
    const double target = std::clamp(p, 0.0, 1.0) * mass_;
    std::size_t k = 0;
    while (k + 2 < xs_.size() && prefix_[k + 1] <= target && xs_[k + 1] < upper_) ++k;
    const double rem = target - prefix_[k];
    const double f0 = fs_[k];
    const double slope = segment_slope(k);
    double dx = 0.0;
    const double disc = f0 * f0 + 2.0 * slope * rem;
    dx = 2.0 * rem / (f0 + std::sqrt(std::max(disc, 0.0)));
    return std::clamp(xs_[k] + dx, lower(), upper_);
  }

  double max_density() const noexcept { return max_raw_density_ / mass_; }

  // Derivative of the density used to continue it above v_hi.
  double extension_slope() const noexcept { return ext_slope_ / mass_; }

 private:
  ValueDistribution() = default;

  double segment_slope(std::size_t k) const { return (fs_[k + 1] - fs_[k]) / (xs_[k + 1] - xs_[k]); }

  // Index k with xs_[k] <= v < xs_[k+1], clamped to the last segment.
  std::size_t segment(double v) const {
    auto it = std::upper_bound(xs_.begin(), xs_.end(), v);
    std::size_t k = it == xs_.begin() ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
    return std::min(k, xs_.size() - 2);
  }

  double raw_density(double v) const {
    const std::size_t k = segment(v);
    return fs_[k] + segment_slope(k) * (v - xs_[k]);
  }

  double cumulative(double v) const {
    const std::size_t k = segment(v);
    const double dv = v - xs_[k];
    const double dens = fs_[k] + segment_slope(k) * dv;
    return prefix_[k] + 0.5 * dv * (fs_[k] + dens);
  }

  double extended_density(double v) const {
    return std::clamp(top_density_ + ext_slope_ * (v - upper_), floor_density_, cap_density_);
  }

  double extended_cumulative(double v) const {
    const double dv = v - upper_;
    if (ext_slope_ == 0.0) return mass_ + top_density_ * dv;
    const double bound = ext_slope_ > 0.0 ? cap_density_ : floor_density_;
    const double kink = (bound - top_density_) / ext_slope_;
    if (dv <= kink) return mass_ + 0.5 * dv * (top_density_ + top_density_ + ext_slope_ * dv);
    return mass_ + 0.5 * kink * (top_density_ + bound) + bound * (dv - kink);
  }

  void finish(double upper) {
    upper_ = upper;
    prefix_.assign(xs_.size(), 0.0);
    for (std::size_t k = 0; k + 1 < xs_.size(); ++k) {
      prefix_[k + 1] = prefix_[k] + 0.5 * (xs_[k + 1] - xs_[k]) * (fs_[k] + fs_[k + 1]);
    }
    mass_ = cumulative(upper_);
    top_density_ = raw_density(upper_);
    max_raw_density_ = top_density_;
    for (std::size_t k = 0; k < xs_.size() && xs_[k] <= upper_; ++k) {
      max_raw_density_ = std::max(max_raw_density_, fs_[k]);
    }
    // one-sided derivative from the left at the upper bound
    auto it = std::lower_bound(xs_.begin(), xs_.end(), upper_);
    std::size_t k = it == xs_.begin() ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
    k = std::min(k, xs_.size() - 2);
    ext_slope_ = extension_ == ExtensionRule::linear ? segment_slope(k) : 0.0;
    floor_density_ = 1e-6 * max_raw_density_;
    cap_density_ = 10.0 * max_raw_density_;
  }

  DistributionKind kind_ = DistributionKind::uniform;
  DistributionKind base_kind_ = DistributionKind::uniform;
  ExtensionRule extension_ = ExtensionRule::linear;
  std::vector<double> xs_;
  std::vector<double> fs_;
  std::vector<double> prefix_;
  double upper_ = 0.0;
  double mass_ = 1.0;
  double top_density_ = 1.0;
  double max_raw_density_ = 1.0;
  double ext_slope_ = 0.0;
  double floor_density_ = 0.0;
  double cap_density_ = 0.0;
};

}  // namespace woa
