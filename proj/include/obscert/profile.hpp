#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace obscert {

using Vec = std::vector<double>;

/// Axis-aligned box, one [lo, hi] interval per component.
struct Box {
  Vec lo;
  Vec hi;

  std::size_t size() const { return lo.size(); }

  bool valid() const {
    if (lo.size() != hi.size() || lo.empty()) return false;
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) return false;
    return true;
  }

  bool contains(const Vec& x) const {
    if (x.size() != lo.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  double midpoint(std::size_t i) const { return 0.5 * (lo[i] + hi[i]); }

  double clamp(std::size_t i, double v) const {
    if (v < lo[i]) return lo[i];
    if (v > hi[i]) return hi[i];
    return v;
  }
};

/// Length-L sequence of n-dimensional samples, stored row-major so that one
/// component's time series (row) is contiguous.
class Profile {
 public:
  Profile() = default;
  Profile(std::size_t rows, std::size_t length, double fill = 0.0)
      : rows_(rows), length_(length), data_(rows * length, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t length() const { return length_; }

  double& at(std::size_t component, std::size_t k) {
    assert(component < rows_ && k < length_);
    return data_[component * length_ + k];
  }
  double at(std::size_t component, std::size_t k) const {
    assert(component < rows_ && k < length_);
    return data_[component * length_ + k];
  }

  std::span<double> row(std::size_t component) {
    return {data_.data() + component * length_, length_};
  }
  std::span<const double> row(std::size_t component) const {
    return {data_.data() + component * length_, length_};
  }

  Vec column(std::size_t k) const {
    Vec out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = at(i, k);
    return out;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  friend bool operator==(const Profile& a, const Profile& b) {
    return a.rows_ == b.rows_ && a.length_ == b.length_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t length_ = 0;
  Vec data_;
};

inline double euclidean_distance(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double max_distance(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

enum class NormChoice { Euclidean, Max };

inline double distance(const Vec& a, const Vec& b, NormChoice norm) {
  return norm == NormChoice::Euclidean ? euclidean_distance(a, b) : max_distance(a, b);
}

}  // namespace obscert
