#include "peelkit/scaling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "peelkit/criticality.hpp"

namespace peelkit {

Normalizers normalizers(const StepLaw& law, double n) {
  if (!(law.L_nu > 0.0)) throw std::domain_error("scaling constants need a law with finite L_nu");
  Normalizers z;
  z.perimeter = std::pow(std::sqrt(1.0 + law.r) * law.L_nu * n, 2.0 / 3.0);
  z.volume = 8.0 / (3.0 * law.c_plus * law.c_plus) * std::cbrt(law.L_nu / (1.0 + law.r)) * std::pow(n, 4.0 / 3.0);
  return z;
}

std::vector<RescaledSample> rescale(const std::vector<PeelTrace>& traces, const StepLaw& law, long n, double t) {
  if (n < 1 || t < 0.0) throw std::domain_error("need n >= 1 and t >= 0");
  const auto z = normalizers(law, static_cast<double>(n));
  const auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(n) * t));
  std::vector<RescaledSample> out;
  out.reserve(traces.size());
  for (const auto& tr : traces) {
    if (idx >= tr.perimeter.size()) throw std::domain_error("trace too short for n t");
    out.push_back({static_cast<double>(tr.perimeter[idx]) / z.perimeter, static_cast<double>(tr.volume[idx]) / z.volume});
  }
  return out;
}

std::vector<RescaledSample> rescale(const std::vector<ChainMarks>& chains, const StepLaw& law, long n, double t,
                                    std::size_t mark) {
  if (n < 1 || t < 0.0) throw std::domain_error("need n >= 1 and t >= 0");
  const auto z = normalizers(law, static_cast<double>(n));
  std::vector<RescaledSample> out;
  out.reserve(chains.size());
  for (const auto& c : chains) {
    if (mark >= c.perimeter.size()) throw std::domain_error("chain has no state at this mark");
    out.push_back({static_cast<double>(c.perimeter[mark]) / z.perimeter, static_cast<double>(c.volume[mark]) / z.volume});
  }
  return out;
}

Estimate quantile(std::vector<double> data, double p) {
  if (data.empty()) throw std::domain_error("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile level must lie in [0, 1]");
  std::sort(data.begin(), data.end());
  const double n = static_cast<double>(data.size());
  const double pos = p * (n - 1.0);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  Estimate e;
  e.value = i + 1 < data.size() ? data[i] * (1.0 - frac) + data[i + 1] * frac : data[i];
  const double k = std::sqrt(n * p * (1.0 - p));
  const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(pos - k)));
  const auto hi = static_cast<std::size_t>(std::min(n - 1.0, std::ceil(pos + k)));
  e.se = 0.5 * (data[hi] - data[lo]);
  return e;
}

namespace {

template <class F>
void parallel_for(long count, int threads, F&& body) {
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (long i = next++; i < count; i = next++) body(i);
  };
  const int n = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(std::max(1L, count))));
  if (n == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<double> walk_endpoints(const StepLaw& law, long n, long samples, std::uint64_t seed, int threads) {
  const NuSampler nu(law);
  std::vector<double> out(static_cast<std::size_t>(samples));
  parallel_for(samples, threads, [&](long i) {
    auto rng = chain_rng(seed, static_cast<std::uint64_t>(i));
    std::int64_t x = 0;
    for (long s = 0; s < n; ++s) x += nu.sample(rng);
    out[static_cast<std::size_t>(i)] = static_cast<double>(x);
  });
  return out;
}

std::complex<double> empirical_cf(const std::vector<double>& x, double theta, double* se) {
  double c = 0.0, s = 0.0, c2 = 0.0, s2 = 0.0;
  for (double v : x) {
    const double a = std::cos(theta * v), b = std::sin(theta * v);
    c += a;
    s += b;
    c2 += a * a;
    s2 += b * b;
  }
  const double n = static_cast<double>(x.size());
  c /= n;
  s /= n;
  if (se) *se = std::sqrt(std::max(0.0, (c2 / n - c * c) + (s2 / n - s * s)) / n);
  return {c, s};
}

std::complex<double> stable_cf(double theta) {
  const double a = std::abs(theta);
  return std::exp(-std::sqrt(a) * std::complex<double>(a, -theta) / std::sqrt(2.0));
}

std::vector<EcfPoint> ecf_test(const StepLaw& law, long n, long samples, const std::vector<double>& thetas,
                               std::uint64_t seed, int threads) {
  if (!law.critical || !(law.L_nu > 0.0)) throw std::domain_error("ecf test needs a critical law with finite L_nu");
  auto x = walk_endpoints(law, n, samples, seed, threads);
  const double z = normalizers(law, static_cast<double>(n)).perimeter;
  for (double& v : x) v /= z;
  std::vector<EcfPoint> out;
  for (double th : thetas) {
    EcfPoint p;
    p.theta = th;
    p.ecf = empirical_cf(x, th, &p.se);
    p.target = stable_cf(th);
    p.discrepancy = std::abs(p.ecf - p.target);
    out.push_back(p);
  }
  return out;
}

CollapseResult collapse_test(const std::vector<NamedLaw>& models, long n, long chains, const std::vector<double>& probs,
                             const ChainSettings& cs) {
  CollapseResult res;
  for (const auto& m : models) {
    SimulationOptions opt;
    opt.mode = PeelMode::ibpm;
    opt.volume_mode = cs.volume_mode;
    opt.l0 = cs.l0;
    opt.n_steps = n;
    opt.seed = cs.seed;
    const auto marks = simulate_chains(*m.law, opt, chains, {n}, cs.threads);
    const auto s = rescale(marks, *m.law, n, 1.0, 0);
    std::vector<double> l, v;
    for (const auto& x : s) {
      l.push_back(x.l_hat);
      v.push_back(x.v_hat);
    }
    ModelQuantiles mq;
    mq.model = m.name;
    mq.n = n;
    mq.chains = chains;
    mq.probs = probs;
    for (double p : probs) {
      mq.l_hat.push_back(quantile(l, p));
      mq.v_hat.push_back(quantile(v, p));
    }
    mq.samples = s;
    res.models.push_back(std::move(mq));
  }
  auto ratio = [](const Estimate& a, const Estimate& b) {
    Estimate e;
    const double q = a.value / b.value;
    e.value = q;
    e.se = std::abs(q) * std::hypot(a.se / a.value, b.se / b.value);
    return e;
  };
  for (std::size_t i = 0; i < res.models.size(); ++i)
    for (std::size_t j = i + 1; j < res.models.size(); ++j)
      for (std::size_t k = 0; k < probs.size(); ++k) {
        CollapsePair cp;
        cp.a = res.models[i].model;
        cp.b = res.models[j].model;
        cp.p = probs[k];
        cp.l_rel_diff = ratio(res.models[i].l_hat[k], res.models[j].l_hat[k]);
        cp.l_rel_diff.value -= 1.0;
        cp.v_ratio = ratio(res.models[i].v_hat[k], res.models[j].v_hat[k]);
        res.pairs.push_back(cp);
      }
  return res;
}

namespace {

// weighted least squares slope of y on x
Estimate fit_slope(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& se) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = se[i] > 0.0 ? 1.0 / (se[i] * se[i]) : 1.0;
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  return {(sw * sxy - sx * sy) / det, std::sqrt(sw / det)};
}

}  // namespace

ExponentFit exponent_regression(const StepLaw& law, const std::vector<long>& ns, long chains, const ChainSettings& cs) {
  if (ns.size() < 2) throw std::domain_error("need at least two values of n");
  ExponentFit fit;
  fit.ns = ns;
  std::vector<long> marks = ns;
  std::sort(marks.begin(), marks.end());
  SimulationOptions opt;
  opt.mode = PeelMode::ibpm;
  opt.volume_mode = cs.volume_mode;
  opt.l0 = cs.l0;
  opt.n_steps = marks.back();
  opt.seed = cs.seed;
  const auto res = simulate_chains(law, opt, chains, marks, cs.threads);
  std::vector<double> x, yl, yv, sl, sv;
  for (std::size_t m = 0; m < marks.size(); ++m) {
    std::vector<double> l, v;
    for (const auto& c : res) {
      l.push_back(static_cast<double>(c.perimeter[m]));
      v.push_back(static_cast<double>(c.volume[m]));
    }
    const auto ml = quantile(l, 0.5), mv = quantile(v, 0.5);
    fit.median_l.push_back(ml);
    fit.median_v.push_back(mv);
    x.push_back(std::log(static_cast<double>(marks[m])));
    yl.push_back(std::log(ml.value));
    yv.push_back(std::log(mv.value));
    sl.push_back(ml.se / ml.value);
    sv.push_back(mv.se / mv.value);
  }
  fit.ns = marks;
  fit.slope_l = fit_slope(x, yl, sl);
  fit.slope_v = fit_slope(x, yv, sv);
  return fit;
}

namespace {

// polynomial through (x_i, y_i) evaluated at 0 (Neville)
double extrapolate_to_zero(std::vector<double> x, std::vector<double> y) {
  const std::size_t n = x.size();
  for (std::size_t m = 1; m < n; ++m)
    for (std::size_t i = 0; i + m < n; ++i) y[i] = (x[i + m] * y[i] - x[i] * y[i + 1]) / (x[i + m] - x[i]);
  return y[0];
}

}  // namespace

SlopeResult cplus_slope_test(const WeightSequence& q, int j_min, int j_max) {
  if (j_max <= j_min) throw std::domain_error("need at least two deformation levels");
  const auto base = solve_boltzmann(q);
  if (!is_critical(base.classification)) throw std::domain_error("slope test needs a critical sequence");
  const auto law = complete_nu(nu_from_q(q, base.c_plus, base.r));
  SlopeResult out;
  out.predicted = std::sqrt(16.0 / (3.0 * (1.0 + base.r) * base.c_plus * base.c_plus * law.L_nu));
  std::vector<double> xs, ym;
  const bool with_minus = !q.bipartite() && base.c_minus != 0.0;
  for (int j = j_min; j <= j_max; ++j) {
    const double eps = std::pow(10.0, -j);
    const double g = 1.0 - eps;
    const auto cd = solve_boltzmann(q, g);
    if (cd.classification == Classification::not_admissible)
      throw SolverFailure("deformed sequence not admissible at g = " + std::to_string(g));
    const double x = std::sqrt(eps);
    out.g.push_back(g);
    out.ratio.push_back((1.0 - cd.c_plus / base.c_plus) / x);
    xs.push_back(x);
    if (with_minus) ym.push_back((1.0 - cd.c_minus / base.c_minus) / x);
  }
  out.estimate = extrapolate_to_zero(xs, out.ratio);
  out.rel_error = std::abs(out.estimate / out.predicted - 1.0);
  if (with_minus) out.cminus_estimate = extrapolate_to_zero(xs, ym);
  return out;
}

std::vector<LaplacePoint> laplace_check(const StepLaw& law, long l, const std::vector<double>& lambdas, long samples,
                                        std::uint64_t seed, VolumeMode mode) {
  const VolumeSampler vs(law, mode);
  auto rng = chain_rng(seed, static_cast<std::uint64_t>(l));
  const double scale = law.B_nu * static_cast<double>(l) * static_cast<double>(l);
  std::vector<double> s(lambdas.size(), 0.0), s2(lambdas.size(), 0.0);
  for (long i = 0; i < samples; ++i) {
    const double v = static_cast<double>(vs.sample(l, rng)) / scale;
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
      const double e = std::exp(-lambdas[j] * v);
      s[j] += e;
      s2[j] += e * e;
    }
  }
  std::vector<LaplacePoint> out;
  const double n = static_cast<double>(samples);
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    LaplacePoint p;
    p.lambda = lambdas[j];
    p.mc.value = s[j] / n;
    p.mc.se = std::sqrt(std::max(0.0, s2[j] / n - p.mc.value * p.mc.value) / n);
    p.target = xi_laplace(lambdas[j]);
    out.push_back(p);
  }
  return out;
}

TailDiagnostic tail_diagnostic(const StepLaw& law) {
  TailDiagnostic d;
  auto slope = [&](int sign, int kmax) {
    int k1 = kmax / 4, k2 = kmax / 2;
    if (law.bipartite()) {
      k1 -= k1 % 2;
      k2 -= k2 % 2;
    }
    const double a = law.at(sign * k1), b = law.at(sign * k2);
    if (!(a > 0.0 && b > 0.0)) return 0.0;
    return -std::log(b / a) / std::log(static_cast<double>(k2) / k1);
  };
  d.neg_exponent = slope(-1, law.k_neg);
  d.heavy_positive = static_cast<bool>(law.beyond);
  if (d.heavy_positive) d.pos_exponent = slope(1, law.k_pos);
  return d;
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

nlohmann::json est(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }
nlohmann::json cplx(std::complex<double> z) { return nlohmann::json::array({z.real(), z.imag()}); }

}  // namespace

void write_scaling_json(std::ostream& os, const ScalingReport& r) {
  using nlohmann::json;
  json j;
  j["models"] = r.models;
  if (!r.ecf.empty()) {
    json e = json::array();
    for (const auto& p : r.ecf)
      e.push_back({{"theta", p.theta}, {"ecf", cplx(p.ecf)}, {"target", cplx(p.target)}, {"discrepancy", p.discrepancy},
                   {"se", p.se}});
    j["ecf"] = {{"n", r.ecf_n}, {"samples", r.ecf_samples}, {"points", e}};
  }
  if (r.collapse) {
    json models = json::array();
    for (const auto& m : r.collapse->models) {
      json rows = json::array();
      for (std::size_t k = 0; k < m.probs.size(); ++k)
        rows.push_back({{"p", m.probs[k]}, {"l_hat", est(m.l_hat[k])}, {"v_hat", est(m.v_hat[k])}});
      models.push_back({{"model", m.model}, {"n", m.n}, {"chains", m.chains}, {"quantiles", rows}});
    }
    json pairs = json::array();
    for (const auto& p : r.collapse->pairs)
      pairs.push_back({{"a", p.a}, {"b", p.b}, {"p", p.p}, {"l_rel_diff", est(p.l_rel_diff)}, {"v_ratio", est(p.v_ratio)}});
    j["collapse"] = {{"models", models}, {"pairs", pairs}};
  }
  if (r.exponents) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.exponents->ns.size(); ++i)
      rows.push_back({{"n", r.exponents->ns[i]},
                      {"median_perimeter", est(r.exponents->median_l[i])},
                      {"median_volume", est(r.exponents->median_v[i])}});
    j["exponents"] = {{"medians", rows}, {"perimeter_slope", est(r.exponents->slope_l)},
                      {"volume_slope", est(r.exponents->slope_v)}};
  }
  for (const auto& [name, s] : r.slopes) {
    json o = {{"g", s.g}, {"ratio", s.ratio}, {"estimate", s.estimate}, {"predicted", s.predicted},
              {"rel_error", s.rel_error}};
    if (s.cminus_estimate) o["cminus_estimate"] = *s.cminus_estimate;
    j["cplus_slope"][name] = o;
  }
  for (const auto& [name, t] : r.tails)
    j["tails"][name] = {{"neg_exponent", t.neg_exponent}, {"pos_exponent", t.pos_exponent},
                        {"heavy_positive", t.heavy_positive}};
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
  j["checks"] = checks;
  os << j.dump(2) << '\n';
}

bool ScalingReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

ScalingReport run_scaling_suite(const std::vector<NamedWeights>& models, const ScalingSuiteOptions& opt) {
  if (models.empty()) throw std::invalid_argument("scaling suite needs at least one model");
  ScalingReport r;
  std::vector<StepLaw> laws;
  laws.reserve(models.size());
  for (const auto& m : models) {
    const auto cd = solve_boltzmann(m.q);
    if (!is_critical(cd.classification)) throw NotCritical(m.name + " is not critical");
    laws.push_back(complete_nu(nu_from_q(m.q, cd.c_plus, cd.r), opt.k_neg));
    r.models.push_back(m.name);
  }
  auto check = [&](std::string name, double value, double tol) { r.checks.push_back({std::move(name), value, tol, value <= tol}); };

  if (opt.ecf_n > 0 && opt.ecf_samples > 0) {
    r.ecf = ecf_test(laws[0], opt.ecf_n, opt.ecf_samples, opt.thetas, opt.chains.seed, opt.chains.threads);
    r.ecf_n = opt.ecf_n;
    r.ecf_samples = opt.ecf_samples;
    for (const auto& p : r.ecf) check("ecf theta=" + fmt(p.theta), p.discrepancy, opt.ecf_tol);
  }
  if (opt.collapse_n > 0 && opt.collapse_chains > 0 && models.size() > 1) {
    std::vector<NamedLaw> named;
    for (std::size_t i = 0; i < models.size(); ++i) named.push_back({models[i].name, &laws[i]});
    r.collapse = collapse_test(named, opt.collapse_n, opt.collapse_chains, {0.25, 0.5, 0.75}, opt.chains);
    for (const auto& p : r.collapse->pairs) {
      if (p.p != 0.5) continue;
      check("collapse l_hat " + p.a + "/" + p.b, std::abs(p.l_rel_diff.value), opt.collapse_l_tol);
      check("collapse v_hat " + p.a + "/" + p.b, std::abs(p.v_ratio.value - 1.0), opt.collapse_v_tol);
    }
  }
  if (opt.exponent_ns.size() >= 2 && opt.exponent_chains > 0) {
    r.exponents = exponent_regression(laws[0], opt.exponent_ns, opt.exponent_chains, opt.chains);
    check("perimeter exponent", std::abs(r.exponents->slope_l.value - 2.0 / 3.0), opt.exponent_l_tol);
    check("volume exponent", std::abs(r.exponents->slope_v.value - 4.0 / 3.0), opt.exponent_v_tol);
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (opt.slope_tol > 0.0) {
      r.slopes.emplace_back(models[i].name, cplus_slope_test(models[i].q));
      check("cplus slope " + models[i].name, r.slopes.back().second.rel_error, opt.slope_tol);
    }
    r.tails.emplace_back(models[i].name, tail_diagnostic(laws[i]));
  }
  return r;
}

void write_samples_csv(std::ostream& os, const std::vector<RescaledSample>& s) {
  os.precision(17);
  os << "l_hat,v_hat\n";
  for (const auto& x : s) os << x.l_hat << ',' << x.v_hat << '\n';
}

}  // namespace peelkit
