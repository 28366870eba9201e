#include "peelkit/hfun.hpp"

#include <cmath>
#include <string>

namespace peelkit {

namespace {

void check_order(int k) {
  if (k < kMinHOrder || k > kMaxHOrder)
    throw UnsupportedOrder("h-function order " + std::to_string(k) +
                           " outside [-4, 4]");
}

template <class T>
void check_r(const T& r) {
  if (!(r > -1) || r > 1) throw std::domain_error("r must lie in (-1, 1]");
}

}  // namespace

std::vector<double> h_coefficients(double r, int k, int count) {
  check_r(r);
  std::vector<double> a(std::max(count, 0));
  if (count <= 0) return a;
  a[0] = 1.0;
  if (count == 1) return a;
  // extended precision: negative orders lose digits to cancellation near r = -1
  const long double rl = r;
  const long double base = k + 0.5L * (1.0L - rl);
  long double prev = 1.0L, cur = base;
  a[1] = static_cast<double>(cur);
  // (n+1) a_{n+1} = [k + (1-r)/2 + (1-r) n] a_n + r (n + k) a_{n-1}
  for (int n = 1; n + 1 < count; ++n) {
    const long double next = ((base + (1.0L - rl) * n) * cur + rl * (n + k) * prev) / (n + 1);
    prev = cur;
    cur = next;
    a[n + 1] = static_cast<double>(cur);
  }
  return a;
}

template <class T>
HCache<T>::HCache(T r, int l_max) : r_(std::move(r)), l_max_(l_max) {
  check_r(r_);
  if (l_max_ < kMaxHOrder) l_max_ = kMaxHOrder;
  fill();
}

template <>
void HCache<double>::fill() {
  for (int k = kMinHOrder; k <= kMaxHOrder; ++k)
    rows_[k - kMinHOrder] = h_coefficients(r_, k, l_max_ - k + 1);
}

template <>
void HCache<mpq_class>::fill() {
  // k = 0 up to l_max + 4 so that four differences reach l_max.
  const int top = l_max_ - kMinHOrder;
  std::vector<mpz_class> central(top + 1);  // C(2j, j)
  central[0] = 1;
  for (int j = 1; j <= top; ++j) central[j] = central[j - 1] * (4 * j - 2) / j;
  std::vector<mpq_class> minus_r_pow(top + 1);
  minus_r_pow[0] = 1;
  for (int j = 1; j <= top; ++j) minus_r_pow[j] = minus_r_pow[j - 1] * (-r_);

  std::vector<mpq_class> h0(top + 1);
  mpz_class four_pow = 1;
  for (int l = 0; l <= top; ++l) {
    mpq_class s = 0;
    for (int j = 0; j <= l; ++j) s += central[l - j] * central[j] * minus_r_pow[j];
    h0[l] = s / four_pow;
    h0[l].canonicalize();
    four_pow *= 4;
  }

  // rows_[k+4][i] holds h(k, k+i); full[k] holds h(k, l) for l = k..top.
  std::vector<mpq_class> prev = h0;  // h(0, l), l = 0..top
  rows_[-kMinHOrder].assign(h0.begin(), h0.begin() + (l_max_ + 1));
  for (int k = 1; k <= kMaxHOrder; ++k) {
    // h(k, l) = sum_{p=k-1}^{l-1} h(k-1, p) for l >= k
    std::vector<mpq_class> next;
    mpq_class acc = 0;
    for (int l = k; l <= l_max_; ++l) {
      acc += prev[l - 1 - (k - 1)];
      next.push_back(acc);
    }
    rows_[k - kMinHOrder] = next;
    prev = std::move(next);
  }

  prev = h0;  // h(k+1, l) for l = k+1..top, starting at k+1 = 0
  int prev_top = top;
  for (int k = -1; k >= kMinHOrder; --k) {
    // h(k, l) = h(k+1, l+1) - h(k+1, l), with h(k+1, k) = 0
    std::vector<mpq_class> next;
    for (int l = k; l + 1 <= prev_top; ++l) {
      mpq_class hi = prev[l + 1 - (k + 1)];
      mpq_class lo = l >= k + 1 ? prev[l - (k + 1)] : mpq_class(0);
      next.push_back(hi - lo);
    }
    rows_[k - kMinHOrder].assign(next.begin(), next.begin() + (l_max_ - k + 1));
    prev = std::move(next);
    prev_top -= 1;
  }
}

template <class T>
T HCache<T>::at(int k, int l) const {
  check_order(k);
  if (l < k) return T(0);
  if (l > l_max_)
    throw std::out_of_range("h(" + std::to_string(k) + ", " + std::to_string(l) +
                            ") beyond cached range " + std::to_string(l_max_));
  return rows_[k - kMinHOrder][l - k];
}

template <class T>
std::span<const T> HCache<T>::row(int k) const {
  check_order(k);
  return rows_[k - kMinHOrder];
}

template class HCache<double>;
template class HCache<mpq_class>;

double h_asymptote(int k, double l, double r) {
  check_order(k);
  return std::pow(l, k - 0.5) / (std::tgamma(k + 0.5) * std::sqrt(1.0 + r));
}

}  // namespace peelkit
