#include "peelkit/criticality.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "peelkit/hfun.hpp"
#include "peelkit/walk.hpp"

namespace peelkit {

std::string to_string(Classification c) {
  switch (c) {
    case Classification::not_admissible: return "not_admissible";
    case Classification::subcritical: return "subcritical";
    case Classification::critical: return "critical";
    case Classification::regular_critical: return "regular_critical";
    case Classification::critical_non_regular: return "critical_non_regular";
  }
  return "not_admissible";
}

bool is_critical(Classification c) {
  return c == Classification::critical || c == Classification::regular_critical ||
         c == Classification::critical_non_regular;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// nu(k) = q_{k+2} c^k for k = -1..K with a certified bound on the omitted
// part of sum_k (k+2) nu(k).
bool positive_nu(const WeightSequence& q, double c, std::vector<double>& nu) {
  nu.clear();
  if (!(c > 0.0) || !std::isfinite(c)) return false;
  if (q.finite_support()) {
    const int top = std::max(q.max_degree() - 2, -1);
    for (int k = -1; k <= top; ++k) nu.push_back(q.q_scaled(k + 2, c, k));
    return true;
  }
  if (q.tail_kind() != TailKind::geometric) return false;
  const double rho = q.tail_ratio() * c;
  if (!(rho < 1.0)) return false;
  double sum = 0.0;
  for (int k = -1;; ++k) {
    const double v = q.q_scaled(k + 2, c, k);
    if (!std::isfinite(v)) return false;
    nu.push_back(v);
    sum += v * (k + 2);
    if (k >= 1 && k + 2 >= q.tail_start()) {
      const double bound = v * (rho * (k + 3.0) / (1.0 - rho) + rho / ((1.0 - rho) * (1.0 - rho)));
      if (bound <= 1e-18 * std::max(sum, 1.0)) break;
    }
    if (k > 400000) return false;
  }
  return true;
}

struct Eval {
  double R1 = kInf, R2 = kInf, M = kInf;
  double dR2dc = kInf;
  bool ok = false;
};

Eval evaluate(const WeightSequence& q, double c, double r) {
  Eval e;
  if (!(r > -1.0) || r > 1.0) return e;
  std::vector<double> nu;
  if (!positive_nu(q, c, nu)) return e;
  const int K = static_cast<int>(nu.size()) - 2;
  const auto h0 = h_coefficients(r, 0, K + 3);  // h0(n)
  const auto h1 = h_coefficients(r, 1, K + 2);  // h1(1 + n)
  double Sa = 0.0, Sb = 0.0, Sm = 0.0, Sd = 0.0;
  for (int k = -1; k <= K; ++k) {
    const double v = nu[k + 1];
    if (v == 0.0) continue;
    Sa += v * h0[k + 1];
    Sb += v * h0[k + 2];
    Sd += k * v * h0[k + 2];
    if (k >= 0) Sm += v * h1[k];
  }
  e.R1 = Sa - h0[1];
  e.R2 = 2.0 / (c * c) + Sb - h0[2];
  e.M = 1.0 - Sm;
  e.dR2dc = -4.0 / (c * c * c) + Sd / c;
  e.ok = std::isfinite(e.R1) && std::isfinite(e.R2) && std::isfinite(e.M);
  return e;
}

bool is_symmetric_family(const WeightSequence& q) {
  return q.tail_kind() == TailKind::power_law && q.family().kind == Family::Kind::symmetric_critical;
}

void fill_derived(CriticalData& cd) {
  cd.c_minus = -cd.r * cd.c_plus;
  cd.z_plus = std::pow((1.0 + cd.r) * cd.c_plus / 4.0, 2);
  cd.z_diamond = (1.0 - cd.r) * cd.c_plus / 2.0;
}

Classification classify_margin(const WeightSequence& q, double c, double margin, double tol) {
  if (margin < -tol) return Classification::not_admissible;
  if (margin > tol) return Classification::subcritical;
  if (q.finite_support()) return Classification::regular_critical;
  if (q.tail_kind() == TailKind::geometric && q.tail_ratio() * c < 1.0)
    return Classification::regular_critical;
  if (q.tail_kind() == TailKind::power_law) return Classification::critical_non_regular;
  return Classification::critical;
}

double norm_inf(const Eval& e, bool with_margin) {
  double n = std::max(std::abs(e.R1), std::abs(e.R2));
  return with_margin ? std::max(n, std::abs(e.M)) : n;
}

// Solves a small dense system in place by Gaussian elimination with partial
// pivoting.  Returns false for a singular matrix.
template <std::size_t N>
bool solve_linear(std::array<std::array<double, N>, N> a, std::array<double, N> b, std::array<double, N>& x) {
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < N; ++i)
      if (std::abs(a[i][col]) > std::abs(a[piv][col])) piv = i;
    if (a[piv][col] == 0.0 || !std::isfinite(a[piv][col])) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t i = col + 1; i < N; ++i) {
      const double f = a[i][col] / a[col][col];
      for (std::size_t j = col; j < N; ++j) a[i][j] -= f * a[col][j];
      b[i] -= f * b[col];
    }
  }
  for (std::size_t i = N; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < N; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return true;
}

// Damped Newton on (R1, R2) in the variables (c, s) with r = tanh(s).
bool newton2(const WeightSequence& q, double& c, double& r, const SolverOptions& opt) {
  double s = std::atanh(std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15));
  Eval e = evaluate(q, c, std::tanh(s));
  if (!e.ok) return false;
  for (int it = 0; it < opt.max_newton; ++it) {
    const double fn = norm_inf(e, false);
    if (fn <= 1e-15) break;
    const double hc = opt.fd_step * c, hs = opt.fd_step * std::max(1.0, std::abs(s));
    Eval cp = evaluate(q, c + hc, std::tanh(s)), cm = evaluate(q, c - hc, std::tanh(s));
    Eval sp = evaluate(q, c, std::tanh(s + hs)), sm = evaluate(q, c, std::tanh(s - hs));
    if (!cp.ok || !cm.ok || !sp.ok || !sm.ok) return fn <= opt.residual_tol;
    std::array<std::array<double, 2>, 2> J{{{(cp.R1 - cm.R1) / (2 * hc), (sp.R1 - sm.R1) / (2 * hs)},
                                            {(cp.R2 - cm.R2) / (2 * hc), (sp.R2 - sm.R2) / (2 * hs)}}};
    std::array<double, 2> d{};
    if (!solve_linear<2>(J, {-e.R1, -e.R2}, d)) return fn <= opt.residual_tol;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1e-12) {
      const double ct = c + lambda * d[0], st = s + lambda * d[1];
      if (ct > 0.0) {
        Eval et = evaluate(q, ct, std::tanh(st));
        if (et.ok && norm_inf(et, false) < fn) {
          c = ct;
          s = st;
          e = et;
          accepted = true;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
    if (std::abs(lambda * d[0]) <= 1e-16 * c && std::abs(lambda * d[1]) <= 1e-16 * std::max(1.0, std::abs(s)))
      break;
  }
  r = std::tanh(s);
  return norm_inf(e, false) <= opt.residual_tol;
}

// Gauss-Newton on (R1, R2, M): at a critical point the pair (R1, R2) has a
// double root and Newton stalls around sqrt(eps); adding the margin equation
// makes the root regular.
bool polish_critical(const WeightSequence& q, double& c, double& r, const SolverOptions& opt) {
  double s = std::atanh(std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15));
  Eval e = evaluate(q, c, std::tanh(s));
  if (!e.ok) return false;
  for (int it = 0; it < 60; ++it) {
    const double fn = norm_inf(e, true);
    if (fn <= 1e-15) break;
    const double hc = opt.fd_step * c, hs = opt.fd_step * std::max(1.0, std::abs(s));
    Eval cp = evaluate(q, c + hc, std::tanh(s)), cm = evaluate(q, c - hc, std::tanh(s));
    Eval sp = evaluate(q, c, std::tanh(s + hs)), sm = evaluate(q, c, std::tanh(s - hs));
    if (!cp.ok || !cm.ok || !sp.ok || !sm.ok) break;
    const std::array<double, 3> jc{(cp.R1 - cm.R1) / (2 * hc), (cp.R2 - cm.R2) / (2 * hc), (cp.M - cm.M) / (2 * hc)};
    const std::array<double, 3> js{(sp.R1 - sm.R1) / (2 * hs), (sp.R2 - sm.R2) / (2 * hs), (sp.M - sm.M) / (2 * hs)};
    const std::array<double, 3> f{e.R1, e.R2, e.M};
    std::array<std::array<double, 2>, 2> N{};
    std::array<double, 2> b{};
    for (int i = 0; i < 3; ++i) {
      N[0][0] += jc[i] * jc[i];
      N[0][1] += jc[i] * js[i];
      N[1][1] += js[i] * js[i];
      b[0] -= jc[i] * f[i];
      b[1] -= js[i] * f[i];
    }
    N[1][0] = N[0][1];
    std::array<double, 2> d{};
    if (!solve_linear<2>(N, b, d)) break;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1e-8) {
      const double ct = c + lambda * d[0], st = s + lambda * d[1];
      Eval et = evaluate(q, ct, std::tanh(st));
      if (ct > 0.0 && et.ok && norm_inf(et, true) < fn) {
        c = ct;
        s = st;
        e = et;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }
  r = std::tanh(s);
  return e.ok && norm_inf(e, false) <= opt.residual_tol && std::abs(e.M) <= opt.residual_tol;
}

// Smallest root of the convex function c -> R2(c, r) on (0, c_max), or its
// minimizer when the minimum touches zero.  Returns false if R2 > 0 throughout.
bool smaller_root_r2(const WeightSequence& q, double r, double& c_out, bool& double_root) {
  double_root = false;
  double lo = 1e-3, hi = 4.0;
  Eval elo = evaluate(q, lo, r);
  if (!elo.ok) return false;
  // bracket the minimizer: dR2/dc is increasing
  Eval ehi = evaluate(q, hi, r);
  int grow = 0;
  while (ehi.ok && ehi.dR2dc < 0.0 && grow < 200) {
    lo = hi;
    hi *= 1.5;
    ehi = evaluate(q, hi, r);
    ++grow;
  }
  if (!ehi.ok) {
    // radius of convergence reached; shrink hi until finite
    double a = lo, b = hi;
    for (int i = 0; i < 200; ++i) {
      double m = 0.5 * (a + b);
      (evaluate(q, m, r).ok ? a : b) = m;
    }
    hi = a;
    ehi = evaluate(q, hi, r);
    if (!ehi.ok) return false;
  }
  double a = 1e-3, b = hi;
  if (ehi.dR2dc >= 0.0) {
    for (int i = 0; i < 300 && b - a > 2e-16 * b; ++i) {
      double m = 0.5 * (a + b);
      Eval em = evaluate(q, m, r);
      (em.ok && em.dR2dc < 0.0 ? a : b) = m;
    }
  } else {
    a = b;
  }
  const double cm = 0.5 * (a + b);
  const Eval em = evaluate(q, cm, r);
  if (!em.ok) return false;
  const double noise = 4e-15;
  if (em.R2 > noise) return false;
  if (em.R2 >= -noise) {
    c_out = cm;
    double_root = true;
    return true;
  }
  // R2(small c) > 0 > R2(cm)
  double x0 = 1e-3, x1 = cm;
  for (int i = 0; i < 300 && x1 - x0 > 1e-16 * x1; ++i) {
    double m = 0.5 * (x0 + x1);
    Eval e = evaluate(q, m, r);
    (e.ok && e.R2 > 0.0 ? x0 : x1) = m;
  }
  c_out = 0.5 * (x0 + x1);
  return true;
}

bool nested_bisection(const WeightSequence& q, double& c, double& r, const SolverOptions& opt) {
  auto g = [&](double s, double& c_s) -> std::pair<bool, double> {
    bool dbl = false;
    if (!smaller_root_r2(q, std::tanh(s), c_s, dbl)) return {false, 0.0};
    Eval e = evaluate(q, c_s, std::tanh(s));
    return {e.ok, e.R1};
  };
  const int n = 241;
  double prev_s = 0, prev_v = 0, prev_c = 0;
  bool have_prev = false;
  double best_margin = -kInf;
  bool found = false;
  for (int i = 0; i < n; ++i) {
    const double s = -8.0 + 16.0 * i / (n - 1);
    double cs = 0;
    auto [ok, v] = g(s, cs);
    if (!ok) {
      have_prev = false;
      continue;
    }
    if (have_prev && ((v <= 0) != (prev_v <= 0))) {
      double a = prev_s, b = s, va = prev_v;
      double cb = cs;
      for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        double m = 0.5 * (a + b), cmid = 0;
        auto [okm, vm] = g(m, cmid);
        if (!okm) break;
        if ((vm <= 0) == (va <= 0)) {
          a = m;
          va = vm;
        } else {
          b = m;
          cb = cmid;
        }
      }
      double cr = cb, rr = std::tanh(0.5 * (a + b));
      newton2(q, cr, rr, opt);
      Eval e = evaluate(q, cr, rr);
      if (e.ok && norm_inf(e, false) <= opt.residual_tol && e.M > best_margin) {
        best_margin = e.M;
        c = cr;
        r = rr;
        found = true;
      }
    }
    prev_s = s;
    prev_v = v;
    prev_c = cs;
    have_prev = true;
  }
  (void)prev_c;
  return found;
}

// Monotone fixed-point iteration x <- 1/(1 - f_bullet), y <- f_diamond from
// (1, 0); it increases towards the minimal solution when q is admissible.
// Returns false when the iteration leaves the domain (f_bullet >= 1).
bool fixed_point(const WeightSequence& q, double& c, double& r, int max_iter, bool& converged) {
  double x = 1.0, y = 0.0;
  converged = false;
  for (int it = 0; it < max_iter; ++it) {
    const double cc = y + 2.0 * std::sqrt(x);
    const double rr = (2.0 * std::sqrt(x) - y) / cc;
    std::vector<double> nu;
    if (!positive_nu(q, cc, nu)) return false;
    const int K = static_cast<int>(nu.size()) - 2;
    const auto h0 = h_coefficients(rr, 0, K + 3);
    double Sa = 0.0, Sb = 0.0;
    for (int k = -1; k <= K; ++k) {
      Sa += nu[k + 1] * h0[k + 1];
      Sb += nu[k + 1] * h0[k + 2];
    }
    const double fb = 8.0 / ((1 + rr) * (1 + rr)) * (Sb - 0.5 * (1 - rr) * Sa);
    const double fd = cc * Sa;
    if (!(fb < 1.0) || !std::isfinite(fd)) return false;
    const double xn = 1.0 / (1.0 - fb), yn = fd;
    c = yn + 2.0 * std::sqrt(xn);
    r = (2.0 * std::sqrt(xn) - yn) / c;
    const bool done = std::abs(xn - x) <= 1e-14 * xn && std::abs(yn - y) <= 1e-14 * std::max(yn, 1.0);
    x = xn;
    y = yn;
    if (done) {
      converged = true;
      break;
    }
  }
  return true;
}

CriticalData finish(const WeightSequence& q, double c, double r, double g, bool dbl, const SolverOptions& opt,
                    std::string method) {
  CriticalData cd;
  cd.c_plus = c;
  cd.r = r;
  cd.g = g;
  cd.double_root = dbl;
  cd.method = std::move(method);
  fill_derived(cd);
  Eval e = evaluate(q, c, r);
  cd.residual1 = e.R1;
  cd.residual2 = e.R2;
  cd.margin = e.M;
  cd.classification = classify_margin(q, c, e.M, opt.class_tol);
  return cd;
}

CriticalData not_admissible(double g, std::string method) {
  CriticalData cd;
  cd.g = g;
  cd.classification = Classification::not_admissible;
  cd.method = std::move(method);
  return cd;
}

CriticalData solve_symmetric(const WeightSequence& q, double g) {
  if (g != 1.0) throw SolverFailure("deformation of power-law weight families is not supported");
  const Family& f = q.family();
  const StepLaw& law = symmetric_family_cached(f.r, f.a);
  CriticalData cd;
  cd.c_plus = law.c_plus;
  cd.r = law.r;
  cd.g = g;
  cd.method = "symmetric-family";
  fill_derived(cd);
  cd.residual1 = harmonic_defect(law, 0, 1).value;
  cd.residual2 = harmonic_defect(law, 0, 2).value;
  cd.margin = -harmonic_defect(law, 1, 1).value;
  cd.classification = classify_margin(q, cd.c_plus, cd.margin, 1e-9);
  return cd;
}

}  // namespace

Residuals residuals(const WeightSequence& q, double c_plus, double r) {
  Residuals out;
  if (is_symmetric_family(q)) {
    const StepLaw& law = symmetric_family_cached(q.family().r, q.family().a);
    if (std::abs(c_plus - law.c_plus) > 1e-12 * law.c_plus || std::abs(r - law.r) > 1e-12) return out;
    out.R1 = harmonic_defect(law, 0, 1).value;
    out.R2 = harmonic_defect(law, 0, 2).value;
    out.margin = -harmonic_defect(law, 1, 1).value;
    out.finite = true;
    return out;
  }
  Eval e = evaluate(q, c_plus, r);
  out.R1 = e.R1;
  out.R2 = e.R2;
  out.margin = e.M;
  out.finite = e.ok;
  return out;
}

CriticalData solve_boltzmann(const WeightSequence& q_in, double g, const SolverOptions& opt) {
  auto rep = validate(q_in);
  if (!rep.valid())
    throw std::invalid_argument("invalid weight sequence: " + (rep.issues.empty() ? std::string("?") : rep.issues[0]));
  if (is_symmetric_family(q_in)) return solve_symmetric(q_in, g);
  if (q_in.tail_kind() == TailKind::power_law)
    throw SolverFailure("power-law weight tails are only supported for the symmetric_critical family");
  const WeightSequence q = q_in.deformed(g);

  if (q.bipartite()) {
    double c = 0.0;
    bool dbl = false;
    if (!smaller_root_r2(q, 1.0, c, dbl)) return not_admissible(g, "convex-bipartite");
    return finish(q, c, 1.0, g, dbl, opt, dbl ? "convex-bipartite-double-root" : "convex-bipartite");
  }

  double c = std::max(2.5, 2.0 * std::sqrt(std::max(q.max_degree(), 1))), r = 0.0;
  bool converged = false;
  const bool stayed = fixed_point(q, c, r, opt.max_fixed_point, converged);
  std::string method = "fixed-point+newton";
  bool ok = newton2(q, c, r, opt);
  if (!ok) {
    method = "nested-bisection";
    ok = nested_bisection(q, c, r, opt);
  }
  if (!ok) {
    if (!stayed) return not_admissible(g, "fixed-point-divergence");
    throw SolverFailure("Newton iteration and nested bisection failed to converge");
  }
  Eval e = evaluate(q, c, r);
  bool dbl = false;
  if (std::abs(e.M) < 1e-4) {
    double cp = c, rp = r;
    if (polish_critical(q, cp, rp, opt)) {
      c = cp;
      r = rp;
      dbl = true;
      method += "+critical-polish";
    }
  }
  CriticalData cd = finish(q, c, r, g, dbl, opt, method);
  // The monotone iteration leaves the domain only for non-admissible q (up to
  // rounding at an exactly critical point); a non-critical Newton root found
  // afterwards lies on the other branch.
  if (!stayed && !is_critical(cd.classification)) return not_admissible(g, "fixed-point-divergence");
  return cd;
}

Classification classify(const WeightSequence& q, const CriticalData& cd, double tol) {
  if (cd.classification == Classification::not_admissible && cd.c_plus == 0.0) return Classification::not_admissible;
  Residuals res = residuals(q.deformed(cd.g), cd.c_plus, cd.r);
  if (!res.finite) return Classification::not_admissible;
  return classify_margin(q, cd.c_plus, res.margin, tol);
}

bool newton_solve(const WeightSequence& q, double c0, double r0, CriticalData& out, const SolverOptions& opt) {
  double c = c0, r = r0;
  bool ok;
  if (q.bipartite()) {
    // 1D Newton on R2 with analytic derivative
    r = 1.0;
    Eval e = evaluate(q, c, r);
    ok = false;
    for (int it = 0; it < opt.max_newton && e.ok; ++it) {
      if (std::abs(e.R2) <= 1e-15) break;
      if (e.dR2dc == 0.0) break;
      double step = -e.R2 / e.dR2dc;
      double lambda = 1.0;
      Eval et;
      while (lambda > 1e-12) {
        et = evaluate(q, c + lambda * step, r);
        if (c + lambda * step > 0 && et.ok && std::abs(et.R2) < std::abs(e.R2)) break;
        lambda *= 0.5;
      }
      if (!(lambda > 1e-12)) break;
      c += lambda * step;
      e = et;
    }
    ok = e.ok && std::abs(e.R2) <= opt.residual_tol;
    bool dbl = false;
    if (ok && std::abs(e.M) < 1e-4) {
      double cm = 0;
      if (smaller_root_r2(q, 1.0, cm, dbl) && dbl && std::abs(cm - c) < 1e-4 * c) c = cm;
      else dbl = false;
    }
    if (ok) out = finish(q, c, r, 1.0, dbl, opt, "newton-probe");
    return ok;
  }
  ok = newton2(q, c, r, opt);
  if (!ok) return false;
  Eval e = evaluate(q, c, r);
  bool dbl = false;
  if (std::abs(e.M) < 1e-4) {
    double cp = c, rp = r;
    if (polish_critical(q, cp, rp, opt)) {
      c = cp;
      r = rp;
      dbl = true;
    }
  }
  out = finish(q, c, r, 1.0, dbl, opt, "newton-probe");
  return true;
}

std::vector<CriticalData> uniqueness_probe(const WeightSequence& q, int starts, const SolverOptions& opt) {
  std::vector<CriticalData> out;
  const CriticalData base = solve_boltzmann(q, 1.0, opt);
  if (base.classification == Classification::not_admissible) return out;
  for (int i = 0; i < starts; ++i) {
    const double f = 0.85 + 0.3 * i / std::max(starts - 1, 1);
    double r0 = q.bipartite() ? 1.0 : std::clamp(base.r + 0.3 * ((i % 4) - 1.5) / 1.5, -0.9, 0.95);
    CriticalData cd;
    if (newton_solve(q, f * base.c_plus, r0, cd, opt) && cd.classification != Classification::not_admissible)
      out.push_back(cd);
  }
  return out;
}

namespace {

double log_binom(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// x^a y^b C-weights in log space; y = 0 handled as exact zero powers.
double power_term(double logc, double x, int a, double y, int b) {
  if (b > 0 && y == 0.0) return 0.0;
  double lg = logc + a * std::log(x) + (b > 0 ? b * std::log(y) : 0.0);
  return std::exp(lg);
}

}  // namespace

MiermontReport miermont_check(const WeightSequence& q, const CriticalData& cd) {
  MiermontReport rep;
  const double x = cd.z_plus, y = cd.z_diamond;
  if (is_symmetric_family(q)) {
    rep.divergent = true;
    rep.note = "power-law weights: double-binomial sums converge only polynomially at the critical point";
    return rep;
  }
  double fb = 0.0, fd = 0.0, A0 = 0.0, A1 = 0.0;
  double prev_block = 0.0;
  double tail = 0.0;
  const int jmax = q.finite_support() ? q.max_degree() : 400000;
  for (int j = 1; j <= jmax; ++j) {
    const double lq = q.log_q(j);
    double block = 0.0;
    if (std::isfinite(lq)) {
      double sb = 0.0, sd = 0.0, s0 = 0.0, s1 = 0.0;
      for (int k = 0; 2 * k <= j - 2; ++k) {  // f_bullet, k' = j - 2 - 2k
        const int kp = j - 2 - 2 * k;
        sb += power_term(lq + log_binom(2 * k + kp + 1, k + 1) + log_binom(k + kp, k), x, k, y, kp);
      }
      for (int k = 0; 2 * k <= j - 1; ++k) {  // f_diamond, k' = j - 1 - 2k
        const int kp = j - 1 - 2 * k;
        sd += power_term(lq + log_binom(2 * k + kp, k) + log_binom(k + kp, k), x, k, y, kp);
      }
      // A_m = sum_n C(j-1, 2n+2-m) z0^{j-1-(2n+2-m)} (2n+1) C(2n, n) z+^n
      for (int m = 0; m <= 1; ++m) {
        double& acc = m == 0 ? s0 : s1;
        for (int n = 0;; ++n) {
          const int i = 2 * n + 2 - m;
          if (i > j - 1) break;
          acc += power_term(lq + log_binom(j - 1, i) + std::log(2.0 * n + 1.0) + log_binom(2 * n, n), x, n, y, j - 1 - i);
        }
      }
      fb += sb;
      fd += sd;
      A0 += s0;
      A1 += s1;
      block = sb + sd + s0 + s1;
      if (!std::isfinite(block)) {
        rep.divergent = true;
        rep.note = "series overflow";
        break;
      }
    }
    if (!q.finite_support() && j >= q.tail_start() + 2 && prev_block > 0.0 && block > 0.0) {
      const double ratio = block / prev_block;
      if (ratio >= 1.0 && j > 2000) {
        rep.divergent = true;
        rep.note = "terms do not decay";
        break;
      }
      if (ratio < 1.0) {
        tail = block * ratio / (1.0 - ratio);
        if (tail <= 1e-16 * (fb + fd + A0 + A1)) break;
      }
    }
    prev_block = block;
  }
  rep.f_bullet = fb;
  rep.f_diamond = fd;
  rep.f_bullet_residual = fb - (1.0 - 1.0 / x);
  rep.f_diamond_residual = fd - y;
  rep.A0 = A0;
  rep.A1 = A1;
  rep.criterion = A1 + 2.0 * std::sqrt(x) * A0;
  rep.tail_bound = tail;
  return rep;
}

namespace {

// Newton on (R1, R2, M) [or (R2, M) for bipartite shapes] in the unknowns
// (c, s, log t).
bool tune_newton(const WeightSequence& shape, double& t, double& c, double& r, const SolverOptions& opt) {
  const bool bip = shape.bipartite();
  double s = bip ? 0.0 : std::atanh(std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15));
  double tau = std::log(t);
  auto F = [&](double cc, double ss, double tt, std::array<double, 3>& f) {
    Eval e = evaluate(shape.scaled(std::exp(tt)), cc, bip ? 1.0 : std::tanh(ss));
    f = {e.R1, e.R2, e.M};
    if (bip) f = {e.R2, e.M, 0.0};
    return e.ok;
  };
  auto nrm = [](const std::array<double, 3>& f) {
    return std::max({std::abs(f[0]), std::abs(f[1]), std::abs(f[2])});
  };
  std::array<double, 3> f{};
  if (!F(c, s, tau, f)) return false;
  for (int it = 0; it < 100; ++it) {
    if (nrm(f) <= 1e-15) break;
    std::array<double, 3> h{opt.fd_step * c, opt.fd_step * std::max(1.0, std::abs(s)), opt.fd_step * std::max(1.0, std::abs(tau))};
    std::array<std::array<double, 3>, 3> J{};
    for (int v = 0; v < 3; ++v) {
      if (bip && v == 1) continue;
      std::array<double, 3> p{c, s, tau}, m{c, s, tau};
      p[v] += h[v];
      m[v] -= h[v];
      std::array<double, 3> fp{}, fm{};
      if (!F(p[0], p[1], p[2], fp) || !F(m[0], m[1], m[2], fm)) return false;
      for (int i = 0; i < 3; ++i) J[i][v] = (fp[i] - fm[i]) / (2 * h[v]);
    }
    std::array<double, 3> d{};
    if (bip) {
      std::array<std::array<double, 2>, 2> J2{{{J[0][0], J[0][2]}, {J[1][0], J[1][2]}}};
      std::array<double, 2> d2{};
      if (!solve_linear<2>(J2, {-f[0], -f[1]}, d2)) return false;
      d = {d2[0], 0.0, d2[1]};
    } else if (!solve_linear<3>(J, {-f[0], -f[1], -f[2]}, d)) {
      return false;
    }
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1e-10) {
      std::array<double, 3> ft{};
      const double ct = c + lambda * d[0], st = s + lambda * d[1], tt = tau + lambda * d[2];
      if (ct > 0 && F(ct, st, tt, ft) && nrm(ft) < nrm(f)) {
        c = ct;
        s = st;
        tau = tt;
        f = ft;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }
  t = std::exp(tau);
  r = bip ? 1.0 : std::tanh(s);
  return nrm(f) <= opt.residual_tol;
}

}  // namespace

TuneResult tune_critical(const WeightSequence& shape, const SolverOptions& opt) {
  auto rep = validate(shape);
  if (!rep.valid()) throw std::invalid_argument("tune_critical needs a valid, non-degenerate shape");
  auto admissible = [&](double t, CriticalData* cd) {
    try {
      CriticalData d = solve_boltzmann(shape.scaled(t), 1.0, opt);
      if (cd) *cd = d;
      return d.classification != Classification::not_admissible;
    } catch (const SolverFailure&) {
      return false;
    }
  };
  double lo = 0.0, hi = 0.0;
  CriticalData at_lo;
  double t = 1.0;
  if (admissible(t, &at_lo)) {
    lo = t;
    for (int i = 0; i < 200; ++i) {
      t *= 2.0;
      CriticalData d;
      if (!admissible(t, &d)) {
        hi = t;
        break;
      }
      lo = t;
      at_lo = d;
    }
  } else {
    hi = t;
    for (int i = 0; i < 200; ++i) {
      t *= 0.5;
      CriticalData d;
      if (admissible(t, &d)) {
        lo = t;
        at_lo = d;
        break;
      }
      hi = t;
    }
  }
  if (lo == 0.0 || hi == 0.0) throw BoundaryNotFound("no admissibility boundary found for this shape");
  TuneResult out;
  while ((hi - lo) > 1e-7 * lo) {
    const double mid = std::sqrt(lo * hi);
    CriticalData d;
    if (admissible(mid, &d)) {
      lo = mid;
      at_lo = d;
    } else {
      hi = mid;
    }
    ++out.bisection_steps;
  }
  double ts = lo, c = at_lo.c_plus, r = at_lo.r;
  if (tune_newton(shape, ts, c, r, opt) && ts >= lo * (1 - 1e-9) && ts <= hi * (1 + 1e-9)) {
    out.t_star = ts;
  } else {
    while ((hi - lo) > 1e-13 * lo) {
      const double mid = 0.5 * (lo + hi);
      (admissible(mid, nullptr) ? lo : hi) = mid;
      ++out.bisection_steps;
    }
    out.t_star = lo;
  }
  out.data = solve_boltzmann(shape.scaled(out.t_star), 1.0, opt);
  return out;
}

}  // namespace peelkit
