#include "peelkit/peeling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "peelkit/hfun.hpp"
#include "peelkit/oracle.hpp"

namespace peelkit {

std::string to_string(PeelMode m) { return m == PeelMode::finite ? "finite" : "ibpm"; }

std::string to_string(VolumeMode m) {
  switch (m) {
    case VolumeMode::exact_small: return "exact_small";
    case VolumeMode::asymptotic_xi: return "asymptotic_xi";
    case VolumeMode::expectation: return "expectation";
  }
  return "?";
}

PeelMode parse_peel_mode(const std::string& s) {
  if (s == "finite") return PeelMode::finite;
  if (s == "ibpm") return PeelMode::ibpm;
  throw std::invalid_argument("unknown peeling mode '" + s + "'");
}

VolumeMode parse_volume_mode(const std::string& s) {
  if (s == "exact_small") return VolumeMode::exact_small;
  if (s == "asymptotic_xi") return VolumeMode::asymptotic_xi;
  if (s == "expectation") return VolumeMode::expectation;
  throw std::invalid_argument("unknown volume mode '" + s + "'");
}

namespace {

constexpr long kHugeJump = 1L << 30;

JumpDistribution doob_step(long l, const StepLaw& law, int order) {
  if (l <= 0) throw AbsorbedState("perimeter must be >= 1");
  const long top = l + law.k_pos;
  const auto c = h_coefficients(law.r, order, static_cast<int>(top + 1));
  auto hv = [&](long m) -> double {
    if (m < order) return 0.0;
    return c[static_cast<std::size_t>(m - order)];
  };
  const double here = hv(l);
  if (here == 0.0) throw std::domain_error("h vanishes at this perimeter (parity)");
  JumpDistribution d;
  d.k_min = static_cast<int>(-l);
  d.p.resize(static_cast<std::size_t>(top + 1));
  for (long k = -l; k <= law.k_pos; ++k) {
    const double v = law.at(static_cast<int>(k)) * hv(l + k) / here;
    d.p[static_cast<std::size_t>(k + l)] = v;
    d.total += v;
  }
  return d;
}

}  // namespace

JumpDistribution step_finite(long l, const StepLaw& law) { return doob_step(l, law, 0); }

JumpDistribution step_ibpm(long l, const StepLaw& law) {
  if (!law.critical) throw NotCritical("the h^(1) transform needs a critical law");
  return doob_step(l, law, 1);
}

double xi_density(double x) {
  if (!(x > 0.0)) return 0.0;
  return std::exp(-0.5 / x - 2.5 * std::log(x)) / std::sqrt(2.0 * std::acos(-1.0));
}

double sample_xi(std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.5, 2.0);
  double y;
  do y = g(rng);
  while (!(y > 0.0));
  return 1.0 / y;
}

double xi_laplace(double lambda) {
  const double s = std::sqrt(2.0 * lambda);
  return (1.0 + s) * std::exp(-s);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 chain_rng(std::uint64_t seed, std::uint64_t chain) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(chain + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

AliasTable::AliasTable(const std::vector<double>& w) {
  const std::size_t n = w.size();
  if (n == 0) throw std::domain_error("alias table needs at least one entry");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw std::domain_error("alias weights must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw std::domain_error("alias weights sum to zero");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = w[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto g = large.back();
    prob_[s] = scaled[s];
    alias_[s] = g;
    scaled[g] = (scaled[g] + scaled[s]) - 1.0;
    if (scaled[g] < 1.0) {
      large.pop_back();
      small.push_back(g);
    }
  }
  for (auto i : large) prob_[i] = 1.0;
  for (auto i : small) prob_[i] = 1.0;
}

std::size_t AliasTable::sample(std::mt19937_64& rng) const { return pick(uniform01(rng)); }

std::size_t AliasTable::pick(double v) const {
  const double u = v * static_cast<double>(prob_.size());
  auto i = static_cast<std::size_t>(u);
  if (i >= prob_.size()) i = prob_.size() - 1;
  return (u - static_cast<double>(i) < prob_[i]) ? i : alias_[i];
}

NuSampler::NuSampler(const StepLaw& law) : law_(&law) {
  table_ = AliasTable(law.table);
  table_mass_ = law.table_sum();
  auto power_tail = [&](int sign) {
    PowerTail t;
    t.j0 = sign < 0 ? law.k_neg + 1 : law.k_pos + 1;
    if (law.beyond) {
      t.alpha = 2.0;
    } else if (sign < 0 && law.critical && law.tail_const > 0.0) {
      t.alpha = 2.5;
    } else {
      return t;
    }
    // sup of nu(k) |k|^alpha over the tail, probed densely near the table and
    // sparsely further out (the tail models are monotone there)
    double sup = 0.0;
    auto probe = [&](long j) { sup = std::max(sup, law.at(static_cast<int>(sign * j)) * std::pow(j, t.alpha)); };
    for (long j = t.j0; j < t.j0 + 64; ++j) probe(j);
    for (long j = 2 * t.j0; j < kHugeJump; j *= 2) probe(j);
    t.A = sup * (1.0 + 1e-9);
    t.mass = t.A * std::pow(t.j0 - 0.5, 1.0 - t.alpha) / (t.alpha - 1.0);
    return t;
  };
  neg_ = power_tail(-1);
  pos_power_ = power_tail(1);
  if (!law.beyond && law.pos_tail == TailKind::geometric && law.pos_tail_ratio > 0.0 && law.pos_tail_ratio < 1.0) {
    geo_ratio_ = law.pos_tail_ratio;
    geo_mass_ = law.table.back() * geo_ratio_ / (1.0 - geo_ratio_);
  }
  total_ = table_mass_ + neg_.mass + pos_power_.mass + geo_mass_;
}

long NuSampler::sample_power(const PowerTail& t, int sign, std::mt19937_64& rng) const {
  double u;
  do u = uniform01(rng);
  while (u == 0.0);
  const double x = (t.j0 - 0.5) * std::pow(u, -1.0 / (t.alpha - 1.0));
  if (x > 1e17) return 0;  // beyond any representable perimeter; rejected
  const long j = std::max<long>(t.j0, std::lround(x));
  const double mass = (std::pow(j - 0.5, 1.0 - t.alpha) - std::pow(j + 0.5, 1.0 - t.alpha)) / (t.alpha - 1.0);
  double value;
  if (j < kHugeJump) {
    value = law_->at(static_cast<int>(sign * j));
  } else {
    // tail model evaluated directly
    value = t.A * std::pow(static_cast<double>(j), -t.alpha);
    if (law_->bipartite() && (j % 2)) value = 0.0;
  }
  if (uniform01(rng) * t.A * mass < value) return sign * j;
  return 0;
}

long NuSampler::sample(std::mt19937_64& rng) const {
  for (;;) {
    double u = uniform01(rng) * total_;
    if (u < table_mass_) return static_cast<long>(table_.pick(u / table_mass_)) - law_->k_neg;
    u -= table_mass_;
    if (u < neg_.mass) {
      if (long k = sample_power(neg_, -1, rng)) return k;
      continue;
    }
    u -= neg_.mass;
    if (u < pos_power_.mass) {
      if (long k = sample_power(pos_power_, 1, rng)) return k;
      continue;
    }
    // geometric continuation: P(j) proportional to ratio^j, j >= 1
    double v;
    do v = uniform01(rng);
    while (v == 0.0);
    const long j = 1 + static_cast<long>(std::floor(std::log(v) / std::log(geo_ratio_)));
    return law_->k_pos + j;
  }
}

JumpSampler::JumpSampler(const StepLaw& law, PeelMode mode, SamplerOptions opt)
    : law_(&law), mode_(mode), opt_(opt), nu_(law) {
  if (mode == PeelMode::ibpm && !law.critical) throw NotCritical("the h^(1) transform needs a critical law");
  kp_ = law.k_pos;
  pos_truncated_ = static_cast<bool>(law.beyond);
  ensure(4096);
}

void JumpSampler::ensure(long m) {
  if (static_cast<long>(hv_.size()) > m) return;
  const long n = std::max<long>({m + 1, 2 * static_cast<long>(hv_.size()), 4096});
  const int order = mode_ == PeelMode::finite ? 0 : 1;
  const auto c = h_coefficients(law_->r, order, static_cast<int>(n));
  hv_.assign(static_cast<std::size_t>(n), 0.0);
  for (long i = order; i < n; ++i) hv_[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i - order)];
  if (mode_ == PeelMode::finite) {
    prefix_.resize(hv_.size());
    double s = 0.0;
    for (std::size_t i = 0; i < hv_.size(); ++i) prefix_[i] = (s += hv_[i]);
  }
}

double JumpSampler::h(long m) {
  if (m < 0) return 0.0;
  ensure(m);
  return hv_[static_cast<std::size_t>(m)];
}

JumpSampler::Entry JumpSampler::build(long l) {
  Entry e;
  const long reach = l + kp_ + 64;
  ensure(reach);
  const double here = hv_[static_cast<std::size_t>(l)];
  if (here == 0.0) throw std::domain_error("h vanishes at this perimeter (parity)");
  if (l <= opt_.alias_max_l) {
    e.k_min = static_cast<int>(-l);
    std::vector<double> w(static_cast<std::size_t>(l + kp_ + 1));
    for (long k = -l; k <= kp_; ++k)
      w[static_cast<std::size_t>(k + l)] = law_->at(static_cast<int>(k)) * hv_[static_cast<std::size_t>(l + k)] / here;
    e.alias = AliasTable(w);
    return e;
  }
  if (mode_ == PeelMode::ibpm) {
    double m = 0.0;
    for (long j = l; j <= reach; ++j) m = std::max(m, hv_[static_cast<std::size_t>(j)]);
    e.near_bound = m / here * (1.0 + 1e-12);
    return e;
  }
  const long half = l / 2;
  double m = 0.0;
  for (long j = l - half; j <= reach; ++j) m = std::max(m, hv_[static_cast<std::size_t>(j)]);
  e.near_bound = m / here * (1.0 + 1e-12);
  for (long k = -l; k < -half; ++k) {
    const double nu = law_->at(static_cast<int>(k));
    e.deep_mass += nu * hv_[static_cast<std::size_t>(l + k)] / here;
    e.deep_env = std::max(e.deep_env, nu);
  }
  e.deep_env *= 1.0 + 1e-12;
  return e;
}

const JumpSampler::Entry& JumpSampler::entry(long l) {
  auto it = cache_.find(l);
  if (it != cache_.end()) {
    order_.splice(order_.begin(), order_, it->second.second);
    return it->second.first;
  }
  if (cache_.size() >= opt_.lru_size) {
    cache_.erase(order_.back());
    order_.pop_back();
  }
  order_.push_front(l);
  auto res = cache_.emplace(l, std::make_pair(build(l), order_.begin()));
  return res.first->second.first;
}

long JumpSampler::sample_large(long l, const Entry& e, std::mt19937_64& rng) {
  const double here = hv_[static_cast<std::size_t>(l)];
  if (mode_ == PeelMode::finite && uniform01(rng) < e.deep_mass) {
    // m = l + k proportional to h(m) on [0, l - half - 1], thinned by nu
    const long half = l / 2;
    const long mmax = l - half - 1;
    const double total = prefix_[static_cast<std::size_t>(mmax)];
    for (;;) {
      const double t = uniform01(rng) * total;
      const auto pos = std::upper_bound(prefix_.begin(), prefix_.begin() + mmax + 1, t) - prefix_.begin();
      const long k = static_cast<long>(pos) - l;
      if (uniform01(rng) * e.deep_env < law_->at(static_cast<int>(k))) return k;
    }
  }
  const long floor_k = mode_ == PeelMode::finite ? -(l / 2) : -l + 1;
  for (;;) {
    const long k = nu_.sample(rng);
    if (k < floor_k) continue;
    if (pos_truncated_ && k > kp_) continue;
    const double ratio = h(l + k) / here;
    if (uniform01(rng) * e.near_bound < ratio) return k;
  }
}

long JumpSampler::sample(long l, std::mt19937_64& rng) {
  if (l <= 0) throw AbsorbedState("perimeter must be >= 1");
  const Entry& e = entry(l);
  if (l <= opt_.alias_max_l) return static_cast<long>(e.alias.sample(rng)) + e.k_min;
  return sample_large(l, e, rng);
}

VolumeSampler::VolumeSampler(const StepLaw& law, VolumeMode mode, VolumeOptions opt)
    : law_(&law), mode_(mode), opt_(opt) {
  {
    const int top = std::max(0, law.k_neg - 2);
    const auto h0 = h_coefficients(law.r, 0, top + 1);
    mean_.assign(static_cast<std::size_t>(top + 1), 0.0);
    mean_[0] = 1.0;
    for (int l = 1; l <= top; ++l) {
      const double den = law.in_table(-l - 2);
      if (den > 0.0) mean_[static_cast<std::size_t>(l)] = h0[l] * law.in_table(-2) / den;
    }
  }
  if (mode != VolumeMode::exact_small) return;
  // face weights q_k = nu(k-2) c^{2-k}
  std::map<int, double> q;
  int kmin = 0;
  for (int k = 1; k - 2 <= law.k_pos; ++k) {
    const double v = law.in_table(k - 2) * std::pow(law.c_plus, 2 - k);
    if (v > 0.0) {
      q[k] = v;
      if (!kmin) kmin = k;
    }
  }
  const bool infinite = static_cast<bool>(law.beyond) || law.pos_tail != TailKind::finite;
  if (infinite || kmin <= 2) {
    fell_back_ = true;
    return;
  }
  const auto table = enumerate_dp_float(WeightSequence::numeric(q), opt.l_exact, opt.d_max);
  for (int lp = 0; lp <= opt.l_exact; ++lp) {
    const double w = lp + 2 <= law.k_neg ? disk_coefficient(law, lp) : 0.0;
    if (!(w > 0.0)) continue;
    const auto vt = volume_table(table, lp);
    Exact ex;
    ex.v_complete = vt.v_complete;
    double acc = 0.0;
    for (const auto& [V, c] : vt.w) {
      if (V > vt.v_complete) break;
      const double p = c / w;
      ex.p[V] = p;
      acc += p;
      ex.values.push_back(V);
      ex.cdf.push_back(acc);
    }
    ex.residual = std::max(0.0, 1.0 - acc);
    exact_[lp] = std::move(ex);
  }
}

std::int64_t VolumeSampler::asymptotic(long lp, std::mt19937_64& rng, std::int64_t floor_v) const {
  const double v = sample_xi(rng) * law_->B_nu * static_cast<double>(lp) * static_cast<double>(lp);
  return std::max<std::int64_t>({floor_v, std::llround(v), 1});
}

std::int64_t VolumeSampler::matched(long lp, std::mt19937_64& rng, std::int64_t floor_v) const {
  if (lp >= static_cast<long>(mean_.size()) || !(mean_[static_cast<std::size_t>(lp)] > 0.0))
    return asymptotic(lp, rng, floor_v);
  const double v = sample_xi(rng) * mean_[static_cast<std::size_t>(lp)];
  return std::max<std::int64_t>({floor_v, std::llround(v), 1});
}

double VolumeSampler::mean(long lp) const {
  if (lp >= 0 && lp < static_cast<long>(mean_.size()) && mean_[static_cast<std::size_t>(lp)] > 0.0)
    return mean_[static_cast<std::size_t>(lp)];
  return law_->B_nu * static_cast<double>(lp) * static_cast<double>(lp);
}

std::int64_t VolumeSampler::sample(long lp, std::mt19937_64& rng, bool* residual) const {
  if (residual) *residual = false;
  if (lp < 0) throw std::domain_error("hole perimeter must be >= 0");
  if (lp == 0) return 1;
  switch (mode_) {
    case VolumeMode::expectation:
      return std::max<std::int64_t>(1, std::llround(mean(lp)));
    case VolumeMode::asymptotic_xi: return asymptotic(lp, rng, 1);
    case VolumeMode::exact_small: {
      auto it = exact_.find(static_cast<int>(lp));
      if (fell_back_ || it == exact_.end()) return matched(lp, rng, 1);
      const Exact& ex = it->second;
      const double u = uniform01(rng);
      if (!ex.cdf.empty() && u < ex.cdf.back()) {
        const auto pos = std::upper_bound(ex.cdf.begin(), ex.cdf.end(), u) - ex.cdf.begin();
        return ex.values[static_cast<std::size_t>(pos)];
      }
      if (residual) *residual = true;
      return matched(lp, rng, ex.v_complete + 1);
    }
  }
  return 1;
}

std::string law_digest(const StepLaw& law) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(&law.r, sizeof law.r);
  mix(&law.c_plus, sizeof law.c_plus);
  mix(&law.k_neg, sizeof law.k_neg);
  mix(&law.k_pos, sizeof law.k_pos);
  mix(law.table.data(), law.table.size() * sizeof(double));
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

struct Chain {
  long l;
  std::int64_t v = 0;
  bool absorbed = false;
  std::int64_t residual = 0;
};

// one peeling step; returns false once absorbed
bool advance(Chain& c, PeelMode mode, JumpSampler& js, const VolumeSampler& vs, std::mt19937_64& rng) {
  if (c.absorbed) return false;
  const long k = js.sample(c.l, rng);
  if (k <= -2) {
    bool res = false;
    c.v += vs.sample(-k - 2, rng, &res);
    if (res) ++c.residual;
  }
  c.l += k;
  if (mode == PeelMode::finite && c.l == 0) {
    c.v += 1;  // the remaining hole is the one-vertex map
    c.absorbed = true;
  }
  return true;
}

void check_options(const StepLaw& law, const SimulationOptions& opt) {
  if (opt.l0 < 1) throw std::domain_error("initial perimeter must be >= 1");
  if (opt.n_steps < 0) throw std::domain_error("step count must be >= 0");
  if (opt.mode == PeelMode::ibpm && !law.critical) throw NotCritical("ibpm mode needs a critical law");
}

}  // namespace

PeelTrace simulate(const StepLaw& law, const SimulationOptions& opt) {
  check_options(law, opt);
  JumpSampler js(law, opt.mode, opt.sampler);
  const VolumeSampler vs(law, opt.volume_mode, opt.volume);
  auto rng = chain_rng(opt.seed, opt.chain);
  PeelTrace t;
  t.mode = opt.mode;
  t.volume_mode = opt.volume_mode;
  t.seed = opt.seed;
  t.chain = opt.chain;
  t.l0 = opt.l0;
  t.law_digest = law_digest(law);
  t.volume_fallback = vs.fell_back();
  t.positive_tail_truncated = js.positive_tail_truncated();
  Chain c{opt.l0};
  t.perimeter.push_back(c.l);
  t.volume.push_back(c.v);
  for (long i = 0; i < opt.n_steps; ++i) {
    if (!advance(c, opt.mode, js, vs, rng)) break;
    t.perimeter.push_back(c.l);
    t.volume.push_back(c.v);
    if (opt.perimeter_cap > 0 && c.l > opt.perimeter_cap) break;
  }
  t.absorbed = c.absorbed;
  t.residual_draws = c.residual;
  return t;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PEELKIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::vector<ChainMarks> simulate_chains(const StepLaw& law, const SimulationOptions& opt, long chains,
                                        const std::vector<long>& marks, int threads) {
  check_options(law, opt);
  if (!std::is_sorted(marks.begin(), marks.end())) throw std::domain_error("marks must be sorted");
  const long last = marks.empty() ? 0 : marks.back();
  if (last > opt.n_steps) throw std::domain_error("mark beyond the requested step count");
  const VolumeSampler vs(law, opt.volume_mode, opt.volume);
  std::vector<ChainMarks> out(static_cast<std::size_t>(chains));
  std::atomic<long> next{0};
  auto worker = [&]() {
    JumpSampler js(law, opt.mode, opt.sampler);
    for (long ci = next++; ci < chains; ci = next++) {
      auto rng = chain_rng(opt.seed, static_cast<std::uint64_t>(ci));
      ChainMarks& cm = out[static_cast<std::size_t>(ci)];
      Chain c{opt.l0};
      cm.max_perimeter = c.l;
      std::size_t mi = 0;
      auto record = [&](long step) {
        while (mi < marks.size() && marks[mi] == step) {
          cm.perimeter.push_back(c.l);
          cm.volume.push_back(c.v);
          ++mi;
        }
      };
      record(0);
      for (long i = 1; i <= opt.n_steps && !cm.capped; ++i) {
        if (!advance(c, opt.mode, js, vs, rng)) {
          record(i);
          continue;
        }
        cm.max_perimeter = std::max(cm.max_perimeter, c.l);
        if (c.absorbed && cm.absorbed_at < 0) cm.absorbed_at = i;
        record(i);
        if (opt.perimeter_cap > 0 && c.l > opt.perimeter_cap) cm.capped = true;
        if (mi == marks.size() && (c.absorbed || cm.capped)) break;
      }
      cm.absorbed = c.absorbed;
    }
  };
  const int n = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(std::max(1L, chains))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

namespace {

std::string trace_metadata(const PeelTrace& t) {
  std::ostringstream os;
  os << "# seed=" << t.seed << '\n'
     << "# chain=" << t.chain << '\n'
     << "# mode=" << to_string(t.mode) << '\n'
     << "# volume_mode=" << to_string(t.volume_mode) << '\n'
     << "# l0=" << t.l0 << '\n'
     << "# law_digest=" << t.law_digest << '\n'
     << "# residual_draws=" << t.residual_draws << '\n'
     << "# volume_fallback=" << (t.volume_fallback ? 1 : 0) << '\n'
     << "# positive_tail_truncated=" << (t.positive_tail_truncated ? 1 : 0) << '\n'
     << "# absorbed=" << (t.absorbed ? 1 : 0) << '\n';
  return os.str();
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated trace file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kMagic[8] = {'P', 'K', 'T', 'R', 'A', 'C', 'E', '1'};

}  // namespace

void write_trace_csv(std::ostream& os, const PeelTrace& t) {
  os << trace_metadata(t) << "step,perimeter,volume\n";
  for (std::size_t i = 0; i < t.perimeter.size(); ++i) os << i << ',' << t.perimeter[i] << ',' << t.volume[i] << '\n';
}

void write_trace_binary(std::ostream& os, const PeelTrace& t) {
  const std::string meta = trace_metadata(t);
  os.write(kMagic, 8);
  put_u64(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u64(os, t.perimeter.size());
  for (long v : t.perimeter) put_u64(os, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  put_u64(os, t.volume.size());
  for (std::int64_t v : t.volume) put_u64(os, static_cast<std::uint64_t>(v));
}

PeelTrace read_trace_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a trace file");
  const auto mlen = get_u64(is);
  std::string meta(mlen, '\0');
  if (!is.read(meta.data(), static_cast<std::streamsize>(mlen))) throw std::runtime_error("truncated trace file");
  PeelTrace t;
  std::istringstream ms(meta);
  std::string line;
  while (std::getline(ms, line)) {
    if (line.rfind("# ", 0) != 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(2, eq - 2), val = line.substr(eq + 1);
    if (key == "seed") t.seed = std::stoull(val);
    else if (key == "chain") t.chain = std::stoull(val);
    else if (key == "mode") t.mode = parse_peel_mode(val);
    else if (key == "volume_mode") t.volume_mode = parse_volume_mode(val);
    else if (key == "l0") t.l0 = std::stol(val);
    else if (key == "law_digest") t.law_digest = val;
    else if (key == "residual_draws") t.residual_draws = std::stoll(val);
    else if (key == "volume_fallback") t.volume_fallback = val == "1";
    else if (key == "positive_tail_truncated") t.positive_tail_truncated = val == "1";
    else if (key == "absorbed") t.absorbed = val == "1";
  }
  const auto n = get_u64(is);
  t.perimeter.resize(n);
  for (auto& v : t.perimeter) v = static_cast<long>(static_cast<std::int64_t>(get_u64(is)));
  const auto m = get_u64(is);
  t.volume.resize(m);
  for (auto& v : t.volume) v = static_cast<std::int64_t>(get_u64(is));
  return t;
}

}  // namespace peelkit
