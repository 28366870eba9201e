#include "peelkit/walk.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "peelkit/hfun.hpp"

namespace peelkit {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

// h(order, j) from a row produced by h_coefficients(r, order, n).
inline double hval(const std::vector<double>& row, int order, int j) {
  const int idx = j - order;
  if (idx < 0) return 0.0;
  return row[static_cast<std::size_t>(idx)];
}

StepLaw positive_part(const StepLawPositive& pos, int k_neg) {
  if (k_neg < 2) throw std::domain_error("k_neg must be at least 2");
  StepLaw law;
  law.r = pos.r;
  law.c_plus = pos.c_plus;
  law.k_neg = k_neg;
  law.k_pos = std::max(pos.k_max(), 0);
  law.table.assign(static_cast<std::size_t>(k_neg + law.k_pos + 1), 0.0);
  for (int k = -1; k <= pos.k_max(); ++k) law.table[k + k_neg] = pos.nu[k + 1];
  law.table[-2 + k_neg] = pos.nu_m2;
  law.pos_tail = pos.tail;
  law.pos_tail_ratio = pos.tail_ratio;
  law.pos_tail_mass = pos.tail_mass;
  return law;
}

void attach_constants(StepLaw& law) {
  const double r = law.r;
  const auto h2 = h_coefficients(r, 2, law.k_pos + 2);
  double L = 0.0;
  for (int k = 1; k <= law.k_pos; ++k) L += law.in_table(k) * hval(h2, 2, k + 1);
  law.L_nu = L;
  law.B_nu = 4.0 * law.in_table(-2) / (3.0 * (1.0 + r) * L);
  if (law.critical) {
    law.tail_const = 3.0 * L * std::sqrt(1.0 + r) / (4.0 * std::sqrt(kPi));
    const double K = law.k_neg + 0.5;
    law.neg_tail_mass = law.tail_const * (2.0 / 3.0) * std::pow(K, -1.5);
    law.neg_tail_moment = -law.tail_const * 2.0 * std::pow(K, -0.5);
  }
}

void clean_negative_side(StepLaw& law) {
  for (int k = 3; k <= law.k_neg; ++k) {
    double& v = law.table[-k + law.k_neg];
    if (law.bipartite() && (k % 2)) v = 0.0;
    if (v < 0.0) {
      if (v < -1e-12) throw InconsistentCriticality("negative jump probability from the kernel");
      v = 0.0;
    }
  }
}

}  // namespace

double StepLaw::at(int k) const {
  if (k >= -k_neg && k <= k_pos) return table[static_cast<std::size_t>(k + k_neg)];
  if (beyond) return beyond(k);
  if (k < -k_neg) {
    if (!critical || !(tail_const > 0.0)) return 0.0;
    const int m = -k;
    if (bipartite()) return (m % 2) ? 0.0 : 2.0 * tail_const * std::pow(m, -2.5);
    return tail_const * std::pow(m, -2.5);
  }
  if (pos_tail == TailKind::geometric && !table.empty())
    return table.back() * std::pow(pos_tail_ratio, k - k_pos);
  return 0.0;
}

double StepLaw::table_sum() const {
  double s = 0.0;
  for (double v : table) s += v;
  return s;
}

double StepLaw::table_mean() const {
  double s = 0.0;
  for (int k = -k_neg; k <= k_pos; ++k) s += k * table[k + k_neg];
  return s;
}

double kernel_R(double r, int k, int m) {
  if (k < 1 || m < 1) throw std::domain_error("kernel_R needs k, m >= 1");
  const auto h1 = h_coefficients(r, 1, m + 1);
  const auto hm2 = h_coefficients(r, -2, k + m + 2);
  double s = 0.0;
  for (int p = 0; p <= m - 1; ++p)
    s += hval(h1, 1, m - p) * (hval(hm2, -2, k + p - 1) + r * hval(hm2, -2, k + p - 2));
  return s;
}

double kernel_R_bipartite(int k, int m) {
  if (k < 1 || m < 1) throw std::domain_error("kernel_R_bipartite needs k, m >= 1");
  auto lc = [](int n) { return std::lgamma(2.0 * n + 1.0) - 2.0 * std::lgamma(n + 1.0); };
  const double lg = lc(k) + lc(m) - (m + k) * std::log(4.0);
  return std::exp(lg) * m * (2.0 * m + 1.0) / ((m + k) * (2.0 * k - 1.0));
}

StepLaw complete_nu(const StepLawPositive& pos, int k_neg) {
  StepLaw law = positive_part(pos, k_neg);
  const double r = law.r;
  const int K = law.k_pos;
  const auto h1 = h_coefficients(r, 1, K + 1);
  const auto hm2 = h_coefficients(r, -2, k_neg + K + 3);
  // nu(-k) = sum_p g(k+p) w(p), w(p) = sum_{m>p} nu(m) h1(m-p)
  std::vector<double> w(static_cast<std::size_t>(K), 0.0);
  for (int p = 0; p < K; ++p)
    for (int m = p + 1; m <= K; ++m) w[p] += law.in_table(m) * hval(h1, 1, m - p);
  auto g = [&](int j) { return hval(hm2, -2, j - 1) + r * hval(hm2, -2, j - 2); };
  std::vector<double> neg(static_cast<std::size_t>(k_neg + 1), 0.0);
  for (int k = 1; k <= k_neg; ++k) {
    double s = 0.0;
    for (int p = 0; p < K; ++p) s += g(k + p) * w[p];
    neg[k] = s;
  }
  const double want2 = pos.nu_m2, want1 = pos.at(-1);
  if (std::abs(neg[2] - want2) > 1e-9 || std::abs(neg[1] - want1) > 1e-9)
    throw InconsistentCriticality("kernel reproduces nu(-2) = " + std::to_string(neg[2]) + " instead of " +
                                  std::to_string(want2) + " (input not critical?)");
  for (int k = 3; k <= k_neg; ++k) law.table[-k + k_neg] = neg[k];
  law.critical = true;
  clean_negative_side(law);
  attach_constants(law);
  return law;
}

StepLaw complete_nu_admissible(const StepLawPositive& pos, int k_neg) {
  StepLaw law = positive_part(pos, k_neg);
  const double r = law.r;
  const int K = law.k_pos;
  const auto h0 = h_coefficients(r, 0, K + 1);
  const auto hm1 = h_coefficients(r, -1, k_neg + K + 3);
  // u(l) = sum_{m>=l} nu(m) h0(m-l)
  std::vector<double> u(static_cast<std::size_t>(K + 1), 0.0);
  for (int l = 0; l <= K; ++l)
    for (int m = l; m <= K; ++m) u[l] += law.in_table(m) * hval(h0, 0, m - l);
  auto G = [&](int j) { return hval(hm1, -1, j - 1) + r * hval(hm1, -1, j - 2); };
  for (int k = 3; k <= k_neg; ++k) {
    double s = -G(k);
    for (int l = 0; l <= K; ++l) s += G(l + k) * u[l];
    law.table[-k + k_neg] = s;
  }
  const auto h1 = h_coefficients(r, 1, K + 1);
  double m = 1.0;
  for (int k = 0; k <= K; ++k) m -= law.in_table(k) * hval(h1, 1, k + 1);
  law.critical = std::abs(m) <= 1e-9;
  clean_negative_side(law);
  attach_constants(law);
  return law;
}

double disk_coefficient(const StepLaw& law, int l) {
  if (l < 0) throw std::domain_error("perimeter must be >= 0");
  if (l + 2 > law.k_neg) throw std::out_of_range("disk_coefficient beyond the materialized negative range");
  return law.in_table(-l - 2) * std::pow(law.c_plus, l + 2) / 2.0;
}

double expected_volume(const StepLaw& law, int l) {
  if (l < 1) throw std::domain_error("expected_volume needs l >= 1");
  if (l + 2 > law.k_neg) throw std::out_of_range("expected_volume beyond the materialized negative range");
  const double denom = law.in_table(-l - 2);
  if (denom == 0.0) throw std::domain_error("no maps with this perimeter (nu(-l-2) = 0)");
  const auto h0 = h_coefficients(law.r, 0, l + 1);
  return h0[l] * law.in_table(-2) / denom;
}

double a_max(double r) {
  if (!(r > -1.0) || r > 1.0) throw std::domain_error("r must lie in (-1, 1]");
  if (r == 0.0 || r == 1.0) return kPi / 4.0;
  if (r > 0.0)
    return kPi / (2.0 * (r + 1.0) + (r - 1.0) * (r - 1.0) / std::sqrt(r) * std::atanh(2.0 * std::sqrt(r) / (r + 1.0)));
  return kPi / (2.0 * (r + 1.0) + (r - 1.0) * (r - 1.0) / std::sqrt(-r) * std::atan(2.0 * std::sqrt(-r) / (r + 1.0)));
}

std::vector<double> symmetric_fourier(double r, double a, int k_max) {
  using boost::math::quadrature::gauss;
  // By the symmetry t -> 2 pi - t the integral reduces to [0, pi], where
  // sqrt(1+r^2+2r cos t) sin(t/2) is smooth.
  auto s = [r](double t) { return std::sqrt(std::max(0.0, 1.0 + r * r + 2.0 * r * std::cos(t))) * std::sin(0.5 * t); };
  std::vector<double> nu(static_cast<std::size_t>(k_max + 1));
  for (int k = 0; k <= k_max; ++k) {
    const int panels = std::max(8, k);
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
      const double lo = kPi * i / panels, hi = kPi * (i + 1) / panels;
      total += gauss<double, 30>::integrate([&](double t) { return s(t) * std::cos(k * t); }, lo, hi);
    }
    nu[k] = (k == 0 ? 1.0 : 0.0) - 2.0 * a / kPi * total;
  }
  return nu;
}

StepLaw symmetric_family(double r, double a, int k_max) {
  if (!(a > 0.0) || a > a_max(r) * (1.0 + 1e-12))
    throw std::domain_error("a outside (0, a_max(r)]: nu(0) would be negative");
  auto nu = symmetric_fourier(r, a, k_max);
  if (nu[0] < 0.0) nu[0] = 0.0;  // rounding at a = a_max
  StepLaw law;
  law.r = r;
  law.k_neg = law.k_pos = k_max;
  law.table.assign(static_cast<std::size_t>(2 * k_max + 1), 0.0);
  for (int k = 0; k <= k_max; ++k) law.table[k_max + k] = law.table[k_max - k] = nu[k];
  if (r == 1.0)
    for (int k = 1; k <= k_max; k += 2) law.table[k_max + k] = law.table[k_max - k] = 0.0;
  law.c_plus = std::sqrt(2.0 / law.in_table(-2));
  law.critical = true;
  law.L_nu = std::numeric_limits<double>::infinity();
  law.B_nu = 0.0;
  law.tail_const = std::numeric_limits<double>::quiet_NaN();
  law.pos_tail = TailKind::power_law;
  law.pos_tail_ratio = 1.0;
  if (r == 1.0) {
    const double amp = 4.0 * a / kPi;
    law.beyond = [amp](int k) { return (k % 2) ? 0.0 : amp / (double(k) * k - 1.0); };
    law.pos_tail_mass = law.neg_tail_mass = amp / (2.0 * k_max);
  } else {
    // nu(k) = b2 k^-2 + b4 k^-4 + b6 k^-6 + O(k^-8), fitted at k_max, k_max/2, k_max/4
    std::array<int, 3> ks{k_max, k_max / 2, k_max / 4};
    std::array<std::array<double, 4>, 3> m{};
    for (int i = 0; i < 3; ++i) {
      const double x = 1.0 / (double(ks[i]) * ks[i]);
      m[i] = {x, x * x, x * x * x, nu[ks[i]]};
    }
    for (int col = 0; col < 3; ++col)
      for (int row = col + 1; row < 3; ++row) {
        const double f = m[row][col] / m[col][col];
        for (int j = col; j < 4; ++j) m[row][j] -= f * m[col][j];
      }
    std::array<double, 3> b{};
    for (int i = 2; i >= 0; --i) {
      double v = m[i][3];
      for (int j = i + 1; j < 3; ++j) v -= m[i][j] * b[j];
      b[i] = v / m[i][i];
    }
    law.beyond = [b](int k) {
      const double x = 1.0 / (double(k) * k);
      return x * (b[0] + x * (b[1] + x * b[2]));
    };
    const double K = k_max + 0.5;
    law.pos_tail_mass = law.neg_tail_mass = b[0] / K + b[1] / (3.0 * K * K * K);
  }
  return law;
}

const StepLaw& symmetric_family_cached(double r, double a) {
  static std::mutex mu;
  static std::map<std::pair<double, double>, std::unique_ptr<StepLaw>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{r, a}];
  if (!slot) slot = std::make_unique<StepLaw>(symmetric_family(r, a));
  return *slot;
}

HarmonicDefect harmonic_defect(const StepLaw& law, int order, int k) {
  if (order != 0 && order != 1) throw std::domain_error("harmonic_defect supports orders 0 and 1");
  if (k < 1) throw std::domain_error("harmonic_defect needs k >= 1");
  const double r = law.r;
  HarmonicDefect out;
  if (law.beyond) {
    const int levels = 6;
    const int M0 = 2048;
    const int Mmax = M0 << (levels - 1);
    const auto h = h_coefficients(r, order, Mmax + k + 2);
    std::vector<double> S;
    double acc = 0.0;
    int l = -k;
    for (int j = 0; j < levels; ++j) {
      const int M = M0 << j;
      for (; l <= M; ++l) acc += hval(h, order, l + k) * law.at(l);
      S.push_back(acc);
    }
    // Partial sums behave like S + sum_i c_i M^{-p_i} with p_i = order-dependent half-integers.
    const double p0 = order == 1 ? 0.5 : 1.5;
    std::vector<double> T = S;
    double prev_top = T.back();
    for (int i = 0; i + 1 < levels; ++i) {
      const double f = std::pow(2.0, p0 + i);
      prev_top = T.back();
      std::vector<double> U;
      for (std::size_t j = 1; j < T.size(); ++j) U.push_back((f * T[j] - T[j - 1]) / (f - 1.0));
      T = U;
    }
    out.value = T.back() - hval(h, order, k);
    out.error = std::abs(T.back() - prev_top);
    return out;
  }
  if (k > law.k_neg) throw std::out_of_range("harmonic_defect needs k <= k_neg");
  const auto h = h_coefficients(r, order, law.k_pos + k + 2);
  double s = 0.0;
  for (int l = -k; l <= law.k_pos; ++l) s += hval(h, order, l + k) * law.in_table(l);
  out.value = s - hval(h, order, k);
  if (law.pos_tail == TailKind::geometric) {
    const double rho = law.pos_tail_ratio;
    const double last = law.in_table(law.k_pos);
    out.error = last * (hval(h, order, law.k_pos + k) * rho / (1.0 - rho) + rho / ((1.0 - rho) * (1.0 - rho)));
  }
  return out;
}

std::complex<double> charfun(const StepLaw& law, double theta) {
  using C = std::complex<double>;
  if (law.beyond) return charfun_direct(law, theta);
  if (theta == 0.0) return 1.0;
  const int K = law.k_pos;
  const auto h0 = h_coefficients(law.r, 0, K + 1);
  C M = 0.0;
  for (int l = 0; l <= K; ++l) {
    double u = 0.0;
    for (int m = l; m <= K; ++m) u += law.in_table(m) * h0[m - l];
    M += (std::exp(C(0.0, l * theta)) - 1.0) * u;
  }
  const C y = std::exp(C(0.0, theta));
  const C root = std::sqrt(y - 1.0) * std::sqrt(y + law.r);
  return 1.0 + M * root / y;
}

std::complex<double> charfun_direct(const StepLaw& law, double theta, int tail_terms) {
  using C = std::complex<double>;
  C s = 0.0;
  for (int k = -law.k_neg; k <= law.k_pos; ++k) {
    const double v = law.in_table(k);
    if (v != 0.0) s += v * std::exp(C(0.0, k * theta));
  }
  for (int k = law.k_neg + 1; k <= law.k_neg + tail_terms; ++k) {
    const double v = law.at(-k);
    if (v != 0.0) s += v * std::exp(C(0.0, -k * theta));
  }
  if (law.beyond) {
    for (int k = law.k_pos + 1; k <= law.k_pos + tail_terms; ++k) {
      s += law.at(k) * std::exp(C(0.0, k * theta));
      s += law.at(-k) * std::exp(C(0.0, -k * theta));
    }
  }
  return s;
}

std::complex<double> charfun_expansion(const StepLaw& law, double theta) {
  using C = std::complex<double>;
  const double at = std::abs(theta);
  return 1.0 - std::sqrt((1.0 + law.r) / 2.0) * law.L_nu * std::sqrt(at) * C(at, -theta);
}

void write_step_law_csv(std::ostream& os, const StepLaw& law) {
  os << std::setprecision(17);
  os << "# r=" << law.r << "\n# c_plus=" << law.c_plus << "\n# L_nu=" << law.L_nu << "\n# B_nu=" << law.B_nu
     << "\n# tail_const=" << law.tail_const << "\n# pos_tail_mass=" << law.pos_tail_mass
     << "\n# neg_tail_mass=" << law.neg_tail_mass << "\nk,nu_k\n";
  for (int k = -law.k_neg; k <= law.k_pos; ++k) os << k << ',' << law.in_table(k) << '\n';
}

}  // namespace peelkit
