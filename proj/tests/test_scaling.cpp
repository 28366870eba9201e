#include "doctest.h"
#include "json.hpp"

#include <cmath>
#include <sstream>

#include "peelkit/criticality.hpp"
#include "peelkit/oracle.hpp"
#include "peelkit/scaling.hpp"

using namespace peelkit;

namespace {

StepLaw law_for(const WeightSequence& q, int k_neg = 1024) {
  auto cd = solve_boltzmann(q);
  return complete_nu(nu_from_q(q, cd.c_plus, cd.r), k_neg);
}

const StepLaw& quad() {
  static const StepLaw l = law_for(preset_two_p_angulation(2).q);
  return l;
}
const StepLaw& tri() {
  static const StepLaw l = law_for(preset_odd_angulation(1).q);
  return l;
}

}  // namespace

TEST_CASE("normalizers") {
  const auto z = normalizers(quad(), 1000.0);
  CHECK(z.perimeter == doctest::Approx(std::pow(std::sqrt(2.0) * 4.0 / 3.0 * 1000.0, 2.0 / 3.0)).epsilon(1e-14));
  CHECK(z.volume == doctest::Approx(8.0 / 24.0 * std::cbrt(2.0 / 3.0) * std::pow(1000.0, 4.0 / 3.0)).epsilon(1e-14));
  const auto z2 = normalizers(quad(), 2000.0);
  CHECK(z2.perimeter / z.perimeter == doctest::Approx(std::pow(2.0, 2.0 / 3.0)).epsilon(1e-14));
  CHECK(z2.volume / z.volume == doctest::Approx(std::pow(2.0, 4.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("rescaling traces") {
  SimulationOptions opt;
  opt.n_steps = 100;
  std::vector<PeelTrace> traces;
  for (std::uint64_t c = 0; c < 4; ++c) {
    opt.chain = c;
    traces.push_back(simulate(quad(), opt));
  }
  const auto s0 = rescale(traces, quad(), 100, 0.0);
  for (const auto& s : s0) {
    CHECK(s.l_hat == doctest::Approx(2.0 / normalizers(quad(), 100).perimeter));
    CHECK(s.v_hat == 0.0);
  }
  const auto s1 = rescale(traces, quad(), 100, 1.0);
  CHECK(s1[0].l_hat == doctest::Approx(traces[0].perimeter[100] / normalizers(quad(), 100).perimeter));
  CHECK_THROWS_AS(rescale(traces, quad(), 200, 1.0), std::domain_error);
  std::ostringstream os;
  write_samples_csv(os, s1);
  CHECK(os.str().rfind("l_hat,v_hat\n", 0) == 0);
}

TEST_CASE("quantiles") {
  std::vector<double> x;
  for (int i = 0; i <= 100; ++i) x.push_back(i);
  CHECK(quantile(x, 0.5).value == 50.0);
  CHECK(quantile(x, 0.25).value == 25.0);
  CHECK(quantile(x, 0.5).se == doctest::Approx(5.0).epsilon(0.2));
  CHECK_THROWS(quantile({}, 0.5));
}

TEST_CASE("characteristic function of the rescaled walk") {
  CHECK(stable_cf(0.0) == std::complex<double>(1.0, 0.0));
  CHECK(std::abs(stable_cf(-1.3) - std::conj(stable_cf(1.3))) < 1e-15);
  const auto x = walk_endpoints(quad(), 1000, 20000, 4, 1);
  double se = 0.0;
  CHECK(empirical_cf(x, 0.0, &se) == std::complex<double>(1.0, 0.0));
  CHECK(std::abs(empirical_cf(x, -0.01) - std::conj(empirical_cf(x, 0.01))) < 1e-12);
  const auto pts = ecf_test(quad(), 1000, 20000, {0.5, 1.0, 2.0}, 4, 1);
  for (const auto& p : pts) {
    // finite-n bias at n = 1000 is below 3e-3 (from the exact charfun)
    CHECK(p.discrepancy <= 4 * p.se + 3e-3);
    const double th = p.theta / normalizers(quad(), 1000).perimeter;
    CHECK(std::abs(std::pow(charfun(quad(), th), 1000.0) - p.target) < 3e-3);
  }
}

TEST_CASE("collapse is self-consistent") {
  ChainSettings a, b;
  a.seed = 1;
  b.seed = 2;
  a.threads = b.threads = 1;
  const auto ra = collapse_test({{"quad", &quad()}}, 1000, 2000, {0.25, 0.5, 0.75}, a);
  const auto rb = collapse_test({{"quad", &quad()}}, 1000, 2000, {0.25, 0.5, 0.75}, b);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& x = ra.models[0].l_hat[k];
    const auto& y = rb.models[0].l_hat[k];
    CHECK(std::abs(x.value - y.value) <= 3 * std::hypot(x.se, y.se) + 1e-12);
    const auto& u = ra.models[0].v_hat[k];
    const auto& v = rb.models[0].v_hat[k];
    CHECK(std::abs(u.value - v.value) <= 3 * std::hypot(u.se, v.se) + 1e-12);
  }
  const auto pair = collapse_test({{"quad", &quad()}, {"tri", &tri()}}, 1000, 2000, {0.5}, a);
  REQUIRE(pair.pairs.size() == 1);
  CHECK(pair.pairs[0].a == "quad");
  CHECK(std::abs(pair.pairs[0].l_rel_diff.value) < 0.1);
}

TEST_CASE("exponent regression") {
  ChainSettings cs;
  cs.threads = 1;
  const auto f = exponent_regression(quad(), {300, 3000}, 400, cs);
  CHECK(f.slope_l.value == doctest::Approx(2.0 / 3.0).epsilon(0.12));
  CHECK(f.slope_v.value == doctest::Approx(4.0 / 3.0).epsilon(0.12));
  CHECK(f.median_l[1].value > f.median_l[0].value);
}

TEST_CASE("c+ slope against the constant") {
  const auto q = cplus_slope_test(preset_two_p_angulation(2).q);
  CHECK(q.predicted == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q.rel_error < 0.005);
  CHECK(q.estimate == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_FALSE(q.cminus_estimate.has_value());
  const auto t = cplus_slope_test(preset_odd_angulation(1).q);
  CHECK(t.predicted == doctest::Approx(0.59771698144536901607).epsilon(1e-10));
  CHECK(t.rel_error < 0.005);
  REQUIRE(t.cminus_estimate.has_value());
  CHECK(std::abs(*t.cminus_estimate) <= 0.01);
  const auto g = cplus_slope_test(preset_geometric(3).q);
  CHECK(g.predicted == doctest::Approx(0.28284271247461902909).epsilon(1e-10));
  CHECK(g.rel_error < 0.005);
  // the raw ratios approach the limit monotonically in sqrt(1-g)
  for (std::size_t i = 1; i < q.ratio.size(); ++i)
    CHECK(std::abs(q.ratio[i] - 0.5) <= std::abs(q.ratio[i - 1] - 0.5) + 1e-12);
}

TEST_CASE("volume limit law") {
  for (long l : {20L, 50L}) {
    for (const auto& p : laplace_check(quad(), l, {0.5, 1.0, 2.0}, 100000, 8)) CHECK(std::abs(p.mc.value - p.target) <= 4 * p.mc.se);
  }
  // exact_small sampler against the exact volume tables at small perimeters
  const VolumeSampler vs(tri(), VolumeMode::exact_small);
  REQUIRE_FALSE(vs.fell_back());
  for (int lp : {1, 2, 4}) {
    auto rng = chain_rng(17, static_cast<std::uint64_t>(lp));
    const long n = 200000;
    std::map<std::int64_t, long> c;
    for (long i = 0; i < n; ++i) ++c[vs.sample(lp, rng)];
    const auto tl = volume_tables(preset_odd_angulation(1).q, lp, 40);
    const double w = disk_coefficient(tri(), lp);
    int checked = 0;
    for (const auto& [V, x] : tl.w) {
      if (V > tl.v_complete || V > vs.v_complete(lp)) break;
      const double p = x.get_d() / w;
      CHECK(vs.exact_law(lp).at(V) == doctest::Approx(p).epsilon(1e-6));
      if (p * n < 50) continue;
      CHECK(std::abs(c[V] - n * p) <= 4 * std::sqrt(n * p * (1 - p)));
      ++checked;
    }
    CHECK(checked >= 2);
  }
}

TEST_CASE("tail diagnostics") {
  const auto d = tail_diagnostic(quad());
  CHECK(d.neg_exponent == doctest::Approx(2.5).epsilon(0.02));
  CHECK_FALSE(d.heavy_positive);
  const auto& sym = symmetric_family_cached(1.0, std::acos(-1.0) / 4.0);
  const auto s = tail_diagnostic(sym);
  CHECK(s.heavy_positive);
  CHECK(s.pos_exponent == doctest::Approx(2.0).epsilon(0.02));
  CHECK(s.neg_exponent == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("report serialization") {
  ScalingReport r;
  r.models = {"quad"};
  r.ecf = ecf_test(quad(), 100, 1000, {1.0}, 1, 1);
  r.ecf_n = 100;
  r.ecf_samples = 1000;
  r.slopes.emplace_back("quad", cplus_slope_test(preset_two_p_angulation(2).q));
  r.checks.push_back({"slope", 1e-9, 0.005, true});
  std::ostringstream os;
  write_scaling_json(os, r);
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["models"][0] == "quad");
  CHECK(j["ecf"]["points"][0]["theta"] == 1.0);
  CHECK(j["cplus_slope"]["quad"]["predicted"].get<double>() == doctest::Approx(0.5));
  CHECK(j["checks"][0]["pass"] == true);
}
