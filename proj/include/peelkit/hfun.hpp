#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include <gmpxx.h>

namespace peelkit {

inline constexpr int kMinHOrder = -4;
inline constexpr int kMaxHOrder = 4;

class UnsupportedOrder : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// [u^n] (1-u)^{-(k+1/2)} (1+ru)^{-1/2} for n = 0..count-1.  Entry n equals
// h_r^(k)(k+n).  Uses the three-term recurrence satisfied by the coefficients,
// which is forward-stable for r in (-1, 1].
std::vector<double> h_coefficients(double r, int k, int count);

// Table of h_r^(k)(l) for k in [-4, 4] and l <= l_max.  Exact tables are
// filled by the k = 0 convolution, cumulative sums (k > 0) and differencing
// (k < 0); float tables by h_coefficients.  Immutable once constructed, so a
// single instance may be shared between threads.
template <class T>
class HCache {
 public:
  HCache(T r, int l_max);

  const T& r() const noexcept { return r_; }
  int l_max() const noexcept { return l_max_; }

  // h(k, l) with h(k, l) = 0 for l < k.
  T at(int k, int l) const;
  // h(k, l) for l = k..l_max.
  std::span<const T> row(int k) const;

 private:
  void fill();

  T r_;
  int l_max_;
  std::array<std::vector<T>, kMaxHOrder - kMinHOrder + 1> rows_;
};

using ExactHCache = HCache<mpq_class>;
using FloatHCache = HCache<double>;

template <class T>
T h_eval(const HCache<T>& cache, int k, int l) {
  return cache.at(k, l);
}

template <class T>
std::vector<T> h_batch(const HCache<T>& cache, int k, int l_max) {
  std::vector<T> out;
  for (int l = k; l <= l_max; ++l) out.push_back(cache.at(k, l));
  return out;
}

// Leading-order asymptote l^{k-1/2} / (Gamma(k+1/2) sqrt(1+r)).  At r = 1 the
// sequence vanishes on one parity class for k <= 0 and the asymptote describes
// the average of consecutive terms.
double h_asymptote(int k, double l, double r);

}  // namespace peelkit
