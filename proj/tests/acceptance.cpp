// One PASS/FAIL line per acceptance criterion; exit status 0 iff all pass.
#include <boost/math/quadrature/exp_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "peelkit/criticality.hpp"
#include "peelkit/oracle.hpp"
#include "peelkit/peeling.hpp"
#include "peelkit/scaling.hpp"
#include "peelkit/walk.hpp"

using namespace peelkit;

namespace {

const double kPi = std::acos(-1.0);

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

StepLaw law_for(const WeightSequence& q, int k_neg) {
  const auto cd = solve_boltzmann(q);
  return complete_nu(nu_from_q(q, cd.c_plus, cd.r), k_neg);
}

double binom(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void golden(Outcome& o) {
  double e2p = 0.0, etri = 0.0, egeo = 0.0;
  for (int p = 2; p <= 5; ++p) {
    const auto q = preset_two_p_angulation(p).q;
    const auto cd = solve_boltzmann(q);
    const auto law = complete_nu(nu_from_q(q, cd.c_plus, cd.r), 256);
    e2p = std::max({e2p, rel(law.at(2 * p - 2), std::ldexp(1.0, 2 * p - 1) / (p * binom(2 * p, p))),
                    rel(law.at(-2), (p - 1.0) / (2.0 * p)), rel(cd.c_plus, std::sqrt(4.0 * p / (p - 1.0))),
                    rel(law.L_nu, 4.0 * (p - 1.0) / 3.0)});
  }
  {
    const auto q = preset_odd_angulation(1).q;
    const auto cd = solve_boltzmann(q);
    const auto law = complete_nu(nu_from_q(q, cd.c_plus, cd.r), 256);
    etri = std::max({rel(cd.r, 2 * std::sqrt(3.0) - 3), rel(cd.c_plus, std::sqrt(6 + 4 * std::sqrt(3.0))),
                     rel(q.q(3), 1 / std::sqrt(12 * std::sqrt(3.0))), rel(law.L_nu, (1 + 1 / std::sqrt(3.0)) / 2)});
  }
  for (double H : {2.0, 3.0, 5.0}) {
    const auto q = preset_geometric(H).q;
    const auto cd = solve_boltzmann(q);
    const auto law = complete_nu(nu_from_q(q, cd.c_plus, cd.r), 256);
    const double sigma = (H * H + 1) / (H * H + 3);
    const double alpha = std::pow(1 - sigma, 1.5) * std::sqrt(3 * sigma - 1);
    const double A = 16 * H / ((H + 3) * std::pow(H - 1, 3));
    const double beta = std::pow(H - 1, 1.5) * std::sqrt(H + 3) / (2 * (H * H + 3));
    egeo = std::max({egeo, rel(cd.r, (H * H - 3) / (H * H + 1)),
                     rel(cd.c_plus, 2 * (H * H + 1) / (std::pow(H - 1, 1.5) * std::sqrt(H + 3))),
                     rel(law.L_nu, (H * H + 1) / 2)});
    for (int k = -1; k <= 8; ++k) egeo = std::max(egeo, rel(law.at(k), alpha * std::pow(sigma, k)));
    for (int k = 1; k <= 8; ++k) egeo = std::max(egeo, rel(q.q(k), A * std::pow(beta, k)));
  }
  o.detail << "2p-angulations " << e2p << ", triangulation " << etri << ", geometric " << egeo;
  o.require(e2p <= 1e-12, "2p-angulation constants to 1e-12");
  o.require(etri <= 1e-10, "triangulation constants to 1e-10");
  o.require(egeo <= 1e-10, "geometric constants to 1e-10");
}

std::vector<std::pair<std::string, StepLaw>> all_presets() {
  std::vector<std::pair<std::string, StepLaw>> out;
  for (int p = 2; p <= 5; ++p) out.emplace_back("2p=" + std::to_string(2 * p), law_for(preset_two_p_angulation(p).q, 64));
  for (int p = 1; p <= 3; ++p) out.emplace_back("odd=" + std::to_string(2 * p + 1), law_for(preset_odd_angulation(p).q, 64));
  for (double H : {2.0, 3.0, 5.0}) out.emplace_back("geometric H=" + std::to_string(int(H)), law_for(preset_geometric(H).q, 64));
  return out;
}

double worst_harmonic_defect(const StepLaw& law) {
  double worst = 0.0;
  for (int k = 1; k <= 30; ++k)
    for (int order : {0, 1}) {
      const auto d = harmonic_defect(law, order, k);
      worst = std::max(worst, std::abs(d.value) + d.error);
    }
  return worst;
}

void harmonicity(Outcome& o) {
  double worst = 0.0;
  auto laws = all_presets();
  laws.emplace_back("symmetric r=1", symmetric_family(1.0, kPi / 4));
  for (const auto& [name, law] : laws) {
    const double w = worst_harmonic_defect(law);
    worst = std::max(worst, w);
    o.require(w <= 1e-8, name);
  }
  o.detail << laws.size() << " laws, k=1..30, orders 0 and 1, max |defect|+bound " << worst;
}

void kernel(Outcome& o) {
  double worst = 0.0;
  for (const auto& [name, law] : all_presets()) {
    double s = 0.0;
    for (int m = 1; m <= law.k_pos; ++m) s += kernel_R(law.r, 2, m) * law.at(m);
    const double e = std::abs(s - 2 / (law.c_plus * law.c_plus));
    worst = std::max(worst, e);
    o.require(e <= 1e-9, "nu(-2) " + name);
  }
  const auto quad = law_for(preset_two_p_angulation(2).q, 64);
  double wq = 0.0;
  for (int l = 1; l <= 20; ++l)
    wq = std::max(wq, std::abs(quad.at(-2 * l) - std::pow(4.0, -l) / ((l + 1.0) * (2.0 * l - 1)) * binom(2 * l, l)));
  o.require(wq <= 1e-10, "quadrangulation nu(-2l)");
  o.detail << "nu(-2) from the kernel " << worst << ", quadrangulation nu(-2l) l<=20 " << wq;
}

void tails(Outcome& o) {
  for (auto [name, q] : {std::pair{"quadrangulation", preset_two_p_angulation(2).q},
                         std::pair{"triangulation", preset_odd_angulation(1).q}}) {
    const auto law = law_for(q, 1024);
    const double target = 3 * law.L_nu * std::sqrt(1 + law.r) / (4 * std::sqrt(kPi));
    auto dev = [&](int k) {
      const double avg = 0.5 * (law.at(-k) + law.at(-k - 1));
      return std::abs(std::pow(k, 2.5) * avg / target - 1.0);
    };
    o.detail << name << " dev(100)=" << dev(100) << " dev(400)=" << dev(400) << "; ";
    o.require(dev(400) <= 0.05, std::string(name) + " within 5% at 400");
    o.require(dev(400) < dev(100), std::string(name) + " improves from 100 to 400");
  }
}

void oracle(Outcome& o) {
  const auto bf = brute_force_maps(4);
  const std::vector<std::map<int, mpq_class>> seqs = {
      {{3, mpq_class(1)}}, {{3, mpq_class(2, 5)}}, {{4, mpq_class(1)}}, {{4, mpq_class(1, 12)}},
      {{3, mpq_class(1, 3)}, {4, mpq_class(1, 7)}}};
  long cells = 0, mismatches = 0;
  for (const auto& q : seqs) {
    const auto table = enumerate_dp(WeightSequence::exact(q), 8, 8);
    for (int l = 0; l <= 8; ++l)
      for (int D = 0; l + D <= 8; D += 1) {
        if ((l + D) % 2) continue;
        for (int F = 0; F <= D; ++F) {
          ++cells;
          if (table.at(l, D, F) != bf.cell(q, l, D, F)) ++mismatches;
        }
      }
  }
  o.require(mismatches == 0, "cell-by-cell equality");
  const auto q = WeightSequence::exact({{4, mpq_class(1, 12)}});
  mpq_class prev = 0;
  bool monotone = true;
  for (int d = 0; d <= 40; d += 2) {
    const mpq_class w = enumerate_dp(q, 2, d).disk(2);
    monotone = monotone && w >= prev;
    prev = w;
  }
  o.require(monotone, "monotone in D_max");
  const auto law = law_for(q, 64);
  const double target = law.at(-4) * std::pow(law.c_plus, 4) / 2;
  const double ex = extrapolate_disk(enumerate_dp(q, 2, 40), 2);
  o.require(std::abs(target - 4.0 / 3.0) <= 1e-12, "nu(-4) c^4/2 = 4/3");
  o.require(std::abs(ex / target - 1) <= 0.01, "extrapolation within 1%");
  o.detail << cells << " cells, " << mismatches << " mismatches; W(2) at D_max=40 " << prev.get_d() << ", extrapolated "
           << ex << " vs " << target;
}

void slope(Outcome& o) {
  for (auto [name, q] : {std::pair{"quadrangulation", preset_two_p_angulation(2).q},
                         std::pair{"triangulation", preset_odd_angulation(1).q},
                         std::pair{"geometric(3)", preset_geometric(3.0).q}}) {
    const auto s = cplus_slope_test(q);
    o.detail << name << " " << s.estimate << "/" << s.predicted << " (rel " << s.rel_error << "); ";
    o.require(s.rel_error <= 0.005, std::string(name) + " within 0.5%");
    if (std::string(name) == "quadrangulation") o.require(std::abs(s.predicted - 0.5) <= 1e-12, "target 1/2");
  }
}

// per-bin 4 sigma, bins with expected count < 25 pooled
bool frequencies_match(const JumpDistribution& d, JumpSampler& js, long l, long n, std::uint64_t seed, int& bins) {
  auto rng = chain_rng(seed, 0);
  std::map<long, long> counts;
  for (long i = 0; i < n; ++i) ++counts[js.sample(l, rng)];
  bool ok = true;
  for (const auto& [k, c] : counts)
    if (k < d.k_min || k > d.k_max() || d.at(static_cast<int>(k)) == 0.0) ok = false;
  double pooled_p = 0.0;
  long pooled_c = 0;
  for (int k = d.k_min; k <= d.k_max(); ++k) {
    const double p = d.at(k) / d.total;
    if (p == 0.0) continue;
    const long c = counts.count(k) ? counts[k] : 0;
    if (p * n < 25) {
      pooled_p += p;
      pooled_c += c;
      continue;
    }
    ++bins;
    ok = ok && std::abs(c - n * p) <= 4 * std::sqrt(n * p * (1 - p));
  }
  const double se = std::sqrt(std::max(n * pooled_p * (1 - pooled_p), 1.0));
  return ok && std::abs(pooled_c - n * pooled_p) <= 4 * se + 1;
}

void simulators(Outcome& o) {
  const auto quad = law_for(preset_two_p_angulation(2).q, 512);
  const auto tri = law_for(preset_odd_angulation(1).q, 512);
  const auto b = step_ibpm(2, quad);
  const auto f = step_finite(2, quad);
  o.require(std::abs(b.at(2) / b.total - 1) <= 1e-14, "IBPM P(2->4) = 1");
  o.require(std::abs(f.at(2) / f.total - 0.5) <= 1e-14 && std::abs(f.at(-2) / f.total - 0.5) <= 1e-14,
            "finite P(2->4) = P(2->0) = 1/2");
  int bins = 0;
  const long n = 1000000;
  for (const StepLaw* law : {&quad, &tri})
    for (long l : {4L, 10L}) {
      JumpSampler fs(*law, PeelMode::finite), bs(*law, PeelMode::ibpm);
      o.require(frequencies_match(step_finite(l, *law), fs, l, n, 100 + l, bins), "finite frequencies");
      o.require(frequencies_match(step_ibpm(l, *law), bs, l, n, 200 + l, bins), "ibpm frequencies");
    }
  o.detail << "P_ibpm(2->4)=" << b.at(2) / b.total << ", P_finite(2->4)=" << f.at(2) / f.total
           << "; 8 runs of 10^6 jumps, " << bins << " bins within 4 sigma";
}

void xi(Outcome& o) {
  boost::math::quadrature::exp_sinh<double> integrator;
  const double mass = integrator.integrate([](double x) { return xi_density(x); });
  o.require(std::abs(mass - 1) <= 1e-10, "density mass");
  auto rng = chain_rng(11, 0);
  const long n = 1000000;
  std::vector<double> xs(n);
  double s = 0.0, lap[3] = {0, 0, 0}, lap2[3] = {0, 0, 0};
  const double lams[3] = {0.5, 1.0, 2.0};
  for (long i = 0; i < n; ++i) {
    xs[i] = sample_xi(rng);
    s += xs[i];
    for (int j = 0; j < 3; ++j) {
      const double e = std::exp(-lams[j] * xs[i]);
      lap[j] += e;
      lap2[j] += e * e;
    }
  }
  const double m = s / n;
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  const double se = std::sqrt(v / (n - 1) / n);
  o.require(std::abs(m - 1) <= 4 * se, "mean");
  o.detail << "mass-1=" << mass - 1 << ", mean " << m << " (se " << se << ")";
  for (int j = 0; j < 3; ++j) {
    const double mu = lap[j] / n, sej = std::sqrt((lap2[j] / n - mu * mu) / n);
    const double t = (1 + std::sqrt(2 * lams[j])) * std::exp(-std::sqrt(2 * lams[j]));
    o.require(std::abs(mu - t) <= 4 * sej, "Laplace transform");
    o.detail << ", E e^(-" << lams[j] << " xi) z=" << (mu - t) / sej;
  }
}

void scaling(Outcome& o) {
  ScalingSuiteOptions opt;  // n = 10^4, 10^5 walk samples, 10^4 chains, exponents over 10^3..10^5
  opt.slope_tol = 0.0;      // the slope has its own criterion
  opt.chains.threads = 0;
  const auto r = run_scaling_suite({{"quadrangulation", preset_two_p_angulation(2).q},
                                    {"triangulation", preset_odd_angulation(1).q},
                                    {"geometric(3)", preset_geometric(3.0).q}},
                                   opt);
  for (const auto& c : r.checks) {
    o.require(c.pass, c.name);
    o.detail << c.name << " " << c.value << "/" << c.tolerance << "; ";
  }
  o.detail << "slopes " << r.exponents->slope_l.value << ", " << r.exponents->slope_v.value;
}

void symmetric(Outcome& o) {
  const auto law = symmetric_family(1.0, kPi / 4, 512);
  double e = 0.0;
  for (int k = 2; k <= 512; k += 2) e = std::max(e, std::abs(law.at(k) - 1.0 / (double(k) * k - 1)));
  const auto pre = preset_symmetric_critical(1.0, kPi / 4);
  double eq = 0.0;
  for (int k = 2; k <= 6; ++k)
    eq = std::max(eq, rel(pre.q.q(2 * k), std::pow(6.0, 1 - k) / ((2.0 * k - 2) * (2.0 * k - 2) - 1)));
  const double h = worst_harmonic_defect(law);
  o.require(e <= 1e-10, "nu(k) = 1/(k^2-1)");
  o.require(eq <= 1e-10, "q_2k");
  o.require(h <= 1e-8, "harmonicity");
  o.detail << "nu on even k<=512 " << e << ", q_2k k=2..6 " << eq << ", harmonic defect " << h;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
    double budget;  // seconds, 0: none
  };
  const std::vector<Criterion> criteria = {
      {1, "golden constants", golden, 5},
      {2, "harmonicity suite", harmonicity, 0},
      {3, "kernel consistency", kernel, 0},
      {4, "tail asymptotics", tails, 0},
      {5, "oracle equivalence", oracle, 0},
      {6, "c+ slope", slope, 30},
      {7, "Doob-transform simulators", simulators, 0},
      {8, "xi machinery", xi, 0},
      {9, "scaling limits", scaling, 300},
      {10, "symmetric critical family", symmetric, 0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0 && secs > c.budget) o.require(false, "runtime budget " + std::to_string(int(c.budget)) + " s");
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
