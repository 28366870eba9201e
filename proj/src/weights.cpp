#include "peelkit/weights.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

#include "peelkit/hfun.hpp"
#include "peelkit/walk.hpp"

namespace peelkit {

std::string Family::name() const {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::two_p_angulation: return "two_p_angulation";
    case Kind::odd_angulation: return "odd_angulation";
    case Kind::geometric: return "geometric";
    case Kind::symmetric_critical: return "symmetric_critical";
    case Kind::custom: return "custom";
  }
  return "none";
}

WeightSequence WeightSequence::exact(std::map<int, mpq_class> values, Family family) {
  WeightSequence w;
  std::map<int, mpq_class> kept;
  for (auto& [k, v] : values) {
    if (k < 1) throw std::invalid_argument("weight index must be >= 1");
    v.canonicalize();
    if (v != 0) {
      w.values_[k] = v.get_d();
      kept[k] = v;
    }
  }
  w.exact_ = std::move(kept);
  w.family_ = family;
  return w;
}

WeightSequence WeightSequence::numeric(std::map<int, double> values, Family family) {
  WeightSequence w;
  for (auto [k, v] : values) {
    if (k < 1) throw std::invalid_argument("weight index must be >= 1");
    if (v != 0.0) w.values_[k] = v;
  }
  w.family_ = family;
  return w;
}

WeightSequence WeightSequence::generated(std::function<double(int)> q, TailKind tail, double ratio,
                                         int tail_start, Family family, std::function<double(int)> log_q) {
  if (tail == TailKind::finite) throw std::invalid_argument("generated weights need an infinite tail");
  WeightSequence w;
  w.gen_ = std::move(q);
  w.lgen_ = std::move(log_q);
  w.tail_ = tail;
  w.ratio_ = ratio;
  w.tail_start_ = std::max(1, tail_start);
  w.family_ = family;
  return w;
}

double WeightSequence::q(int k) const {
  if (k < 1) return 0.0;
  if (gen_) return gen_(k);
  auto it = values_.find(k);
  return it == values_.end() ? 0.0 : it->second;
}

double WeightSequence::q_scaled(int k, double c, int e) const {
  const double qk = q(k);
  const double direct = qk * std::pow(c, e);
  if (!lgen_ || (std::isfinite(direct) && qk > 1e-250 && direct > 1e-250)) return direct;
  const double l = lgen_(k);
  if (std::isinf(l) && l < 0) return 0.0;
  return std::exp(l + e * std::log(c));
}

double WeightSequence::log_q(int k) const {
  if (lgen_ && k >= 1) return lgen_(k);
  return std::log(q(k));
}

const std::map<int, mpq_class>& WeightSequence::exact_values() const {
  if (!exact_) throw std::logic_error("weight sequence has no exact rational representation");
  return *exact_;
}

int WeightSequence::max_degree() const {
  if (!finite_support()) return -1;
  for (auto it = values_.rbegin(); it != values_.rend(); ++it)
    if (it->second > 0) return it->first;
  return 0;
}

int WeightSequence::min_degree() const {
  if (!finite_support()) {
    for (int k = 1; k <= 256; ++k)
      if (q(k) > 0) return k;
    return 0;
  }
  for (auto& [k, v] : values_)
    if (v > 0) return k;
  return 0;
}

bool WeightSequence::bipartite() const {
  if (!finite_support()) {
    for (int k = 1; k <= 257; k += 2)
      if (q(k) != 0.0) return false;
    return true;
  }
  for (auto& [k, v] : values_)
    if (k % 2 == 1 && v != 0.0) return false;
  return true;
}

WeightSequence WeightSequence::deformed(double g) const {
  if (!(g > 0.0) || g > 1.0) throw std::domain_error("deformation parameter g must lie in (0, 1]");
  if (g == 1.0) return *this;
  if (gen_) {
    auto base = gen_;
    std::function<double(int)> lg;
    if (lgen_) lg = [lb = lgen_, g](int k) { return 0.5 * (k - 2) * std::log(g) + lb(k); };
    return generated([base, g](int k) { return std::pow(g, 0.5 * (k - 2)) * base(k); }, tail_,
                     ratio_ * std::sqrt(g), tail_start_, family_, lg);
  }
  std::map<int, double> v;
  for (auto [k, x] : values_) v[k] = std::pow(g, 0.5 * (k - 2)) * x;
  return numeric(std::move(v), family_);
}

WeightSequence WeightSequence::scaled(double t) const {
  if (gen_) {
    auto base = gen_;
    std::function<double(int)> lg;
    if (lgen_) lg = [lb = lgen_, t](int k) { return std::log(t) + lb(k); };
    return generated([base, t](int k) { return t * base(k); }, tail_, ratio_, tail_start_, family_, lg);
  }
  std::map<int, double> v;
  for (auto [k, x] : values_) v[k] = t * x;
  return numeric(std::move(v), family_);
}

WeightSequence WeightSequence::with_family(Family f) const {
  WeightSequence w = *this;
  w.family_ = f;
  return w;
}

std::vector<double> WeightSequence::materialize(int k_max) const {
  std::vector<double> out(std::max(k_max, 0) + 1, 0.0);
  for (int k = 1; k <= k_max; ++k) out[k] = q(k);
  return out;
}

ValidationReport validate(const WeightSequence& q) {
  ValidationReport rep;
  std::vector<std::pair<int, double>> entries;
  if (q.finite_support()) {
    for (auto [k, v] : q.values()) entries.emplace_back(k, v);
  } else {
    for (int k = 1; k <= 256; ++k) entries.emplace_back(k, q.q(k));
  }
  bool any_positive = false, any_high = false;
  for (auto [k, v] : entries) {
    if (v < 0) rep.nonnegative = false;
    if (v > 0) any_positive = true;
    if (v > 0 && k >= 3) any_high = true;
  }
  rep.nonempty = any_positive;
  rep.non_degenerate = any_high;
  rep.bipartite = q.bipartite();
  int d = 0;
  for (auto [j, v] : entries) {
    if (!(v > 0)) continue;
    // q_j > 0 contributes k = (j-2)/2 when j is even, and k = j-2 when that is odd.
    if (j % 2 == 0 && j >= 4) d = std::gcd(d, (j - 2) / 2);
    if ((j - 2) > 0 && (j - 2) % 2 == 1) d = std::gcd(d, j - 2);
  }
  rep.lattice_span = d;
  if (!rep.nonempty) rep.issues.push_back("empty support");
  if (!rep.nonnegative) rep.issues.push_back("negative weight");
  if (rep.nonempty && !rep.non_degenerate) rep.issues.push_back("no positive weight with k >= 3");
  return rep;
}

double StepLawPositive::at(int k) const {
  if (k == -2) return nu_m2;
  if (k < -2) throw std::out_of_range("StepLawPositive covers k >= -2 only");
  if (k <= k_max()) return nu[k + 1];
  return beyond ? beyond(k) : 0.0;
}

StepLawPositive nu_from_q(const WeightSequence& q, double c_plus, double r, double tol) {
  if (!(c_plus > 2.0)) throw std::domain_error("c_plus must exceed 2");
  StepLawPositive s;
  s.c_plus = c_plus;
  s.r = r;
  s.nu_m2 = 2.0 / (c_plus * c_plus);
  s.tail = q.tail_kind();
  if (q.finite_support()) {
    int top = std::max(q.max_degree() - 2, -1);
    s.nu.assign(top + 2, 0.0);
    for (int k = -1; k <= top; ++k) s.nu[k + 1] = q.q_scaled(k + 2, c_plus, k);
    return s;
  }
  const double rho = q.tail_ratio() * c_plus;
  s.tail_ratio = rho;
  auto nu_at = [q, c_plus](int k) { return q.q_scaled(k + 2, c_plus, k); };
  if (q.tail_kind() == TailKind::geometric) {
    if (!(rho < 1.0))
      throw DivergentSeries("weight tail not summable at c_plus (ratio " + std::to_string(rho) + ")");
    double sum = 0.0;
    for (int k = -1;; ++k) {
      double v = nu_at(k);
      s.nu.push_back(v);
      sum += v;
      if (k + 2 >= q.tail_start()) {
        double bound = v * rho / (1.0 - rho);
        if (bound <= tol * std::max(sum, 1.0)) {
          s.tail_mass = bound;
          break;
        }
      }
      if (k > 1'000'000) throw DivergentSeries("geometric tail truncation did not terminate");
    }
    return s;
  }
  // power law: summable only at the boundary rho = 1 by the polynomial decay
  if (rho > 1.0 + 1e-9)
    throw DivergentSeries("weight tail not summable at c_plus (ratio " + std::to_string(rho) + ")");
  const int K = 4096;
  for (int k = -1; k <= K; ++k) s.nu.push_back(nu_at(k));
  s.tail_mass = s.nu.back() * K;
  s.beyond = nu_at;
  return s;
}

WeightSequence q_from_nu(const StepLawPositive& nu) {
  if (!(nu.nu_m2 > 0)) throw std::domain_error("nu(-2) must be positive");
  const double s = std::sqrt(nu.nu_m2 / 2.0);  // = 1 / c_plus
  if (nu.beyond || nu.tail != TailKind::finite) {
    auto table = std::make_shared<std::vector<double>>(nu.nu);
    auto beyond = nu.beyond;
    double ratio = nu.tail_ratio;
    auto nu_of = [table, beyond, ratio](int j) {
      if (j + 1 < static_cast<int>(table->size())) return (*table)[j + 1];
      if (beyond) return beyond(j);
      // geometric continuation of the table
      const int jl = static_cast<int>(table->size()) - 2;
      return table->back() * std::pow(ratio, j - jl);
    };
    auto gen = [nu_of, s](int k) { return std::pow(s, k - 2) * nu_of(k - 2); };
    auto lgen = [nu_of, s](int k) {
      const double v = nu_of(k - 2);
      return v > 0.0 ? (k - 2) * std::log(s) + std::log(v) : -std::numeric_limits<double>::infinity();
    };
    return WeightSequence::generated(gen, nu.tail == TailKind::finite ? TailKind::geometric : nu.tail,
                                     nu.tail_ratio * s, static_cast<int>(nu.nu.size()), {}, lgen);
  }
  std::map<int, double> v;
  for (int k = -1; k <= nu.k_max(); ++k)
    if (nu.nu[k + 1] != 0.0) v[k + 2] = std::pow(s, k) * nu.nu[k + 1];
  return WeightSequence::numeric(std::move(v));
}

namespace {

mpq_class pow_q(const mpq_class& x, int e) {
  mpq_class out = 1;
  mpq_class base = e >= 0 ? x : mpq_class(1 / x);
  for (int i = 0; i < std::abs(e); ++i) out *= base;
  return out;
}

}  // namespace

std::map<int, mpq_class> nu_from_q_exact(const std::map<int, mpq_class>& q, const mpq_class& c_plus_sq) {
  std::map<int, mpq_class> nu;
  for (auto& [k, v] : q) {
    if (k % 2) throw std::domain_error("exact nu_from_q needs bipartite weights");
    nu[k - 2] = v * pow_q(c_plus_sq, (k - 2) / 2);
  }
  nu[-2] = 2 / c_plus_sq;
  return nu;
}

std::map<int, mpq_class> q_from_nu_exact(const std::map<int, mpq_class>& nu, const mpq_class& nu_m2) {
  std::map<int, mpq_class> q;
  const mpq_class half = nu_m2 / 2;
  for (auto& [k, v] : nu) {
    if (k < 0 || v == 0) continue;
    if (k % 2) throw std::domain_error("exact q_from_nu needs even steps");
    q[k + 2] = v * pow_q(half, k / 2);
  }
  return q;
}

double pointed_disk(int l, double c_plus, double r) {
  if (l < 0) throw std::domain_error("perimeter must be >= 0");
  auto h = h_coefficients(r, 0, l + 1);
  return std::pow(c_plus, l) * h[l];
}

double pointed_disk_mobile(int l, double z_plus, double z_diamond) {
  if (l < 0) throw std::domain_error("perimeter must be >= 0");
  // sum_k l! / (k!^2 (l-2k)!) z+^k z0^(l-2k)
  double total = 0.0;
  for (int k = 0; 2 * k <= l; ++k) {
    double logc = std::lgamma(l + 1.0) - 2 * std::lgamma(k + 1.0) - std::lgamma(l - 2 * k + 1.0);
    double term = std::exp(logc) * std::pow(z_plus, k);
    if (l - 2 * k > 0) term *= std::pow(z_diamond, l - 2 * k);
    total += term;
  }
  return total;
}

Preset preset_two_p_angulation(int p) {
  if (p < 2) throw std::domain_error("two_p_angulation needs p >= 2");
  mpz_class binom;
  mpz_bin_uiui(binom.get_mpz_t(), 2 * p, p);
  mpq_class base(p - 1, p);
  base.canonicalize();
  mpq_class qv = 2 * pow_q(base, p - 1) / (p * mpq_class(binom));
  qv.canonicalize();
  Family fam{Family::Kind::two_p_angulation, p};
  Preset out{WeightSequence::exact({{2 * p, qv}}, fam), std::nullopt};
  ClosedForm cf;
  cf.r = 1.0;
  cf.c_plus = std::sqrt(4.0 * p / (p - 1.0));
  cf.nu_m2 = (p - 1.0) / (2.0 * p);
  cf.L_nu = 4.0 * (p - 1.0) / 3.0;
  cf.q[2 * p] = qv.get_d();
  cf.nu[2 * p - 2] = std::ldexp(1.0, 2 * p - 1) / (p * binom.get_d());
  out.closed_form = cf;
  return out;
}

Preset preset_odd_angulation(int p) {
  if (p < 1) throw std::domain_error("odd_angulation needs p >= 1");
  auto h1 = [p](double r) { return h_coefficients(r, 1, 2 * p + 2); };  // h1(1 + n)
  auto f = [&](double r) {
    auto h = h1(r);
    return h[2 * p] - 0.5 * (3.0 - r) * h[2 * p - 1];  // h1(2p+1) - (3-r)/2 h1(2p)
  };
  double lo = -1.0 + 1e-15, hi = 1.0;
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0) throw std::runtime_error("odd_angulation: no sign change on (-1, 1)");
  while (hi - lo > 1e-15) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  const double r = 0.5 * (lo + hi);
  auto h = h1(r);
  const double nu_top = 1.0 / h[2 * p - 1];                  // 1 / h1(2p)
  const double nu_m2 = h[2] - h[2 * p + 1] * nu_top;          // h1(3) - h1(2p+2) nu(2p-1)
  const double c = std::sqrt(2.0 / nu_m2);
  const double qv = nu_top / std::pow(c, 2 * p - 1);
  Family fam{Family::Kind::odd_angulation, p};
  Preset out{WeightSequence::numeric({{2 * p + 1, qv}}, fam), std::nullopt};
  ClosedForm cf;
  auto h2 = h_coefficients(r, 2, 2 * p);  // h2(2 + n)
  if (p == 1) {
    cf.r = 2.0 * std::sqrt(3.0) - 3.0;
    cf.c_plus = std::sqrt(6.0 + 4.0 * std::sqrt(3.0));
    cf.q[3] = 1.0 / std::sqrt(12.0 * std::sqrt(3.0));
    cf.L_nu = 0.5 * (1.0 + 1.0 / std::sqrt(3.0));
    cf.nu_m2 = 2.0 / (cf.c_plus * cf.c_plus);
    cf.nu[1] = cf.q[3] * cf.c_plus;
  } else {
    cf.r = r;
    cf.c_plus = c;
    cf.q[2 * p + 1] = qv;
    cf.nu_m2 = nu_m2;
    cf.nu[2 * p - 1] = nu_top;
    cf.L_nu = nu_top * h2[2 * p - 2];  // nu(2p-1) h2(2p)
  }
  out.closed_form = cf;
  return out;
}

Preset preset_geometric(double H) {
  if (!(H > 1.0) || !std::isfinite(H)) throw std::domain_error("geometric family needs H > 1");
  const double A = 16.0 * H / ((H + 3.0) * std::pow(H - 1.0, 3));
  const double beta = std::pow(H - 1.0, 1.5) * std::sqrt(H + 3.0) / (2.0 * (H * H + 3.0));
  Family fam{Family::Kind::geometric, 0, H};
  Preset out{WeightSequence::generated([A, beta](int k) { return A * std::pow(beta, k); },
                                       TailKind::geometric, beta, 1, fam,
                                       [A, beta](int k) { return std::log(A) + k * std::log(beta); }),
             std::nullopt};
  ClosedForm cf;
  cf.r = (H * H - 3.0) / (H * H + 1.0);
  cf.c_plus = 2.0 * (H * H + 1.0) / (std::pow(H - 1.0, 1.5) * std::sqrt(H + 3.0));
  cf.L_nu = 0.5 * (H * H + 1.0);
  cf.nu_m2 = 2.0 / (cf.c_plus * cf.c_plus);
  for (int k = 1; k <= 8; ++k) cf.q[k] = A * std::pow(beta, k);
  const double sigma = (H * H + 1.0) / (H * H + 3.0);
  const double alpha = std::pow(1.0 - sigma, 1.5) * std::sqrt(3.0 * sigma - 1.0);
  for (int k = -1; k <= 6; ++k) cf.nu[k] = alpha * std::pow(sigma, k);
  out.closed_form = cf;
  return out;
}

Preset preset_symmetric_critical(double r, double a) {
  auto law = std::make_shared<StepLaw>(symmetric_family(r, a));
  const double c = law->c_plus;
  Family fam{Family::Kind::symmetric_critical, 0, 0.0, r, a};
  auto gen = [law, c](int k) { return std::pow(c, -(k - 2)) * law->at(k - 2); };
  auto lgen = [law, c](int k) { return -(k - 2) * std::log(c) + std::log(law->at(k - 2)); };
  Preset out{WeightSequence::generated(gen, TailKind::power_law, 1.0 / c, 1, fam, lgen), std::nullopt};
  ClosedForm cf;
  cf.r = r;
  cf.c_plus = c;
  cf.nu_m2 = law->at(-2);
  cf.L_nu = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 12; ++k) cf.q[k] = gen(k);
  for (int k = -1; k <= 10; ++k) cf.nu[k] = law->at(k);
  out.closed_form = cf;
  return out;
}

mpq_class parse_rational(const std::string& text, bool* inexact) {
  if (inexact) *inexact = false;
  std::string t;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
  if (t.empty()) throw std::invalid_argument("empty number");
  bool simple = true;
  for (size_t i = 0; i < t.size(); ++i) {
    char ch = t[i];
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '/' || ((ch == '-' || ch == '+') && i == 0)) continue;
    simple = false;
  }
  if (simple) {
    if (t.find('/') != std::string::npos && (t.back() == '/' || t.find('/') != t.rfind('/')))
      throw std::invalid_argument("malformed rational '" + text + "'");
    std::string body = t[0] == '+' ? t.substr(1) : t;
    mpq_class v;
    if (v.set_str(body, 10) != 0) throw std::invalid_argument("malformed rational '" + text + "'");
    if (v.get_den() == 0) throw std::invalid_argument("zero denominator in '" + text + "'");
    v.canonicalize();
    return v;
  }
  size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("malformed number '" + text + "'");
  }
  if (used != t.size() || !std::isfinite(d)) throw std::invalid_argument("malformed number '" + text + "'");
  if (inexact) *inexact = true;
  return mpq_class(d);
}

}  // namespace peelkit
