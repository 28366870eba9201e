#pragma once

#include <cstdint>
#include <iosfwd>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "peelkit/walk.hpp"

namespace peelkit {

enum class PeelMode { finite, ibpm };
enum class VolumeMode { exact_small, asymptotic_xi, expectation };

std::string to_string(PeelMode m);
std::string to_string(VolumeMode m);
PeelMode parse_peel_mode(const std::string& s);
VolumeMode parse_volume_mode(const std::string& s);

class AbsorbedState : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NotCritical : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Jump probabilities P(k) for k = k_min .. k_min + p.size() - 1.
struct JumpDistribution {
  int k_min = 0;
  std::vector<double> p;
  double total = 0.0;  // sum of p (1 up to truncation)

  double at(int k) const {
    const long i = static_cast<long>(k) - k_min;
    return (i < 0 || i >= static_cast<long>(p.size())) ? 0.0 : p[static_cast<std::size_t>(i)];
  }
  int k_max() const { return k_min + static_cast<int>(p.size()) - 1; }
};

// h^(0)(l+k)/h^(0)(l) nu(k) for k >= -l.
JumpDistribution step_finite(long l, const StepLaw& law);
// h^(1)(l+k)/h^(1)(l) nu(k); refuses non-critical laws.
JumpDistribution step_ibpm(long l, const StepLaw& law);

// Density e^{-1/(2x)} x^{-5/2} / sqrt(2 pi) of the volume limit law.
double xi_density(double x);
// Reciprocal of a Gamma(3/2, scale 2) variate.
double sample_xi(std::mt19937_64& rng);
// E exp(-lambda xi) = (1 + sqrt(2 lambda)) exp(-sqrt(2 lambda))
double xi_laplace(double lambda);

// Stream for (seed, chain): splitmix64 of both, so streams do not depend on
// how chains are assigned to workers.
std::mt19937_64 chain_rng(std::uint64_t seed, std::uint64_t chain);
std::uint64_t splitmix64(std::uint64_t x);
double uniform01(std::mt19937_64& rng);

// Vose alias table.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& w);
  std::size_t size() const { return prob_.size(); }
  std::size_t sample(std::mt19937_64& rng) const;
  // from one uniform in [0, 1)
  std::size_t pick(double u) const;

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

// Exact sampler of the step law nu over its full support: table by alias,
// tails beyond the table by power-law (negative side, k^{-5/2} or the law's
// tail model) or geometric envelopes with rejection.
class NuSampler {
 public:
  explicit NuSampler(const StepLaw& law);
  long sample(std::mt19937_64& rng) const;
  const StepLaw& law() const { return *law_; }

 private:
  struct PowerTail {
    double alpha = 0.0;
    double A = 0.0;  // law.at(k) <= A |k|^{-alpha} beyond the table
    long j0 = 0;     // first |k| of the tail
    double mass = 0.0;
  };
  long sample_power(const PowerTail& t, int sign, std::mt19937_64& rng) const;

  const StepLaw* law_;
  AliasTable table_;
  double table_mass_ = 0.0;
  PowerTail neg_;
  PowerTail pos_power_;
  double geo_mass_ = 0.0;  // certified geometric positive tail
  double geo_ratio_ = 0.0;
  double total_ = 0.0;
};

struct SamplerOptions {
  int alias_max_l = 512;       // exact alias tables up to this perimeter
  std::size_t lru_size = 4096;  // cached per-perimeter tables
};

// Jump sampler for the Doob-transformed perimeter chains.  Not thread-safe;
// every worker owns one.
class JumpSampler {
 public:
  JumpSampler(const StepLaw& law, PeelMode mode, SamplerOptions opt = {});
  long sample(long l, std::mt19937_64& rng);
  // h^(order)(m) with the internal cache grown on demand
  double h(long m);
  bool positive_tail_truncated() const { return pos_truncated_; }

 private:
  struct Entry {
    AliasTable alias;
    int k_min = 0;
    double deep_mass = 0.0;  // finite mode, large l
    double deep_env = 0.0;
    double near_bound = 0.0;
  };
  const Entry& entry(long l);
  Entry build(long l);
  void ensure(long m);
  long sample_large(long l, const Entry& e, std::mt19937_64& rng);

  const StepLaw* law_;
  PeelMode mode_;
  SamplerOptions opt_;
  NuSampler nu_;
  int kp_ = 0;  // largest positive jump used
  bool pos_truncated_ = false;
  std::vector<double> hv_;      // h^(order)(m), order 0 (finite) or 1 (ibpm)
  std::vector<double> prefix_;  // prefix sums of hv_ (finite mode)
  std::list<long> order_;
  std::unordered_map<long, std::pair<Entry, std::list<long>::iterator>> cache_;
};

// Vertex counts of the Boltzmann disk swallowed by a jump k = -l'-2.
//   exact_small   : exact W^(l',V)/W^(l') law for l' <= l_exact; beyond, and
//                   for uncertified tables, round(xi E|V(m_l')|)
//   asymptotic_xi : round(xi B l'^2)
//   expectation   : round(E|V(m_l')|)
struct VolumeOptions {
  int l_exact = 6;
  int d_max = 60;  // DP budget for the exact tables
};

class VolumeSampler {
 public:
  VolumeSampler(const StepLaw& law, VolumeMode mode, VolumeOptions opt = {});
  // Increment for a hole of perimeter lp >= 0; *residual set when the exact
  // table's residual mass was used.
  std::int64_t sample(long lp, std::mt19937_64& rng, bool* residual = nullptr) const;
  VolumeMode mode() const { return mode_; }
  // exact_small requested but the tables are not certified
  bool fell_back() const { return fell_back_; }
  // Normalized exact probabilities for lp <= l_exact (V -> P) and residual mass.
  const std::map<int, double>& exact_law(int lp) const { return exact_.at(lp).p; }
  double residual_mass(int lp) const { return exact_.at(lp).residual; }
  int v_complete(int lp) const { return exact_.at(lp).v_complete; }
  // E|V(m_l')|, or B l'^2 beyond the table
  double mean(long lp) const;

 private:
  struct Exact {
    std::map<int, double> p;
    std::vector<double> cdf;
    std::vector<int> values;
    double residual = 0.0;
    int v_complete = 0;
  };
  // round(xi B l'^2)
  std::int64_t asymptotic(long lp, std::mt19937_64& rng, std::int64_t floor_v) const;
  // round(xi E|V(m_l')|): same limit law, exact mean at every l'
  std::int64_t matched(long lp, std::mt19937_64& rng, std::int64_t floor_v) const;

  const StepLaw* law_;
  VolumeMode mode_;
  VolumeOptions opt_;
  bool fell_back_ = false;
  std::map<int, Exact> exact_;
  std::vector<double> mean_;  // E|V(m_l)| where nu(-l-2) is tabulated
};

struct PeelTrace {
  PeelMode mode = PeelMode::ibpm;
  VolumeMode volume_mode = VolumeMode::asymptotic_xi;
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
  long l0 = 2;
  std::string law_digest;
  std::vector<long> perimeter;
  std::vector<std::int64_t> volume;
  std::int64_t residual_draws = 0;  // exact_small residual mass used
  bool volume_fallback = false;
  bool positive_tail_truncated = false;
  bool absorbed = false;

  std::size_t steps() const { return perimeter.empty() ? 0 : perimeter.size() - 1; }
};

struct SimulationOptions {
  PeelMode mode = PeelMode::ibpm;
  VolumeMode volume_mode = VolumeMode::exact_small;
  long l0 = 2;
  long n_steps = 1000;
  std::uint64_t seed = 0x5eed;
  std::uint64_t chain = 0;
  long perimeter_cap = 0;  // stop once the perimeter exceeds this (0: none)
  SamplerOptions sampler;
  VolumeOptions volume;
};

// Hex digest of (r, c_plus, table) identifying a law in trace metadata.
std::string law_digest(const StepLaw& law);

PeelTrace simulate(const StepLaw& law, const SimulationOptions& opt);

// Many independent chains (chain indices 0..chains-1), returning only the
// states at the requested step indices; identical for every thread count.
struct ChainMarks {
  std::vector<long> perimeter;  // per mark
  std::vector<std::int64_t> volume;
  bool absorbed = false;
  long absorbed_at = -1;
  bool capped = false;  // stopped by perimeter_cap
  long max_perimeter = 0;
};

std::vector<ChainMarks> simulate_chains(const StepLaw& law, const SimulationOptions& opt, long chains,
                                        const std::vector<long>& marks, int threads);

void write_trace_csv(std::ostream& os, const PeelTrace& t);
void write_trace_binary(std::ostream& os, const PeelTrace& t);
PeelTrace read_trace_binary(std::istream& is);

// Worker count: explicit value, else PEELKIT_THREADS, else hardware threads.
int resolve_threads(int requested);

}  // namespace peelkit
