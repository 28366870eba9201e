#include "peelkit/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "peelkit/criticality.hpp"
#include "peelkit/hfun.hpp"
#include "peelkit/walk.hpp"

namespace peelkit {

template <class T>
EnumTableT<T>::EnumTableT(std::vector<std::pair<int, T>> q, int l0, int d_max)
    : q_(std::move(q)), l0_(l0), d_max_(d_max), top_(l0 + d_max) {
  if (l0 < 0 || d_max < 0) throw std::domain_error("perimeter and degree budget must be >= 0");
  t_.assign(top_ + 1, std::vector<std::vector<T>>(d_max_ + 1));
  t_[0][0] = {T(1)};
  // Face-exploration steps lower D by k, splits lower l; (D, l) ascending is
  // a valid evaluation order.
  for (int D = 0; D <= d_max_; ++D) {
    for (int l = 1; l + D <= top_; ++l) {
      if ((l + D) % 2) continue;
      std::vector<T> res(D + 1, T(0));
      bool any = false;
      for (const auto& [k, qk] : q_) {
        if (k > D || l + k - 2 < 0) continue;
        const auto& src = t_[l + k - 2][D - k];
        for (std::size_t F = 0; F < src.size(); ++F) {
          if (src[F] == 0) continue;
          res[F + 1] += qk * src[F];
          any = true;
        }
      }
      for (int l1 = 0; l1 <= l - 2; ++l1) {
        const int l2 = l - l1 - 2;
        for (int D1 = 0; D1 <= D; ++D1) {
          const int D2 = D - D1;
          if ((l1 + D1) % 2 || (l2 + D2) % 2) continue;
          const auto& a = t_[l1][D1];
          const auto& b = t_[l2][D2];
          if (a.empty() || b.empty()) continue;
          for (std::size_t F1 = 0; F1 < a.size(); ++F1) {
            if (a[F1] == 0) continue;
            for (std::size_t F2 = 0; F2 < b.size(); ++F2) {
              if (b[F2] == 0) continue;
              res[F1 + F2] += a[F1] * b[F2];
              any = true;
            }
          }
        }
      }
      if (!any) continue;
      while (!res.empty() && res.back() == 0) res.pop_back();
      t_[l][D] = std::move(res);
    }
  }
}

template <class T>
const std::vector<T>* EnumTableT<T>::row(int l, int D) const {
  if (l < 0 || D < 0 || l > top_ || D > d_max_ || l + D > top_) return nullptr;
  return &t_[l][D];
}

template <class T>
T EnumTableT<T>::at(int l, int D, int F) const {
  if (l + D > top_ || D > d_max_) throw std::out_of_range("cell outside the enumerated range");
  const auto* r = row(l, D);
  if (!r || F < 0 || F >= static_cast<int>(r->size())) return T(0);
  return (*r)[F];
}

template <class T>
T EnumTableT<T>::disk_upto(int l, int D) const {
  if (l > l0_ && l + std::min(D, d_max_) > top_) throw std::out_of_range("perimeter outside the enumerated range");
  T s(0);
  for (int d = 0; d <= std::min(D, d_max_) && l + d <= top_; ++d)
    for (const auto& v : t_[l][d]) s += v;
  return s;
}

template <class T>
std::vector<std::pair<EnumCell, T>> EnumTableT<T>::cells(int l) const {
  std::vector<std::pair<EnumCell, T>> out;
  for (int D = 0; D <= d_max_ && l + D <= top_; ++D) {
    const auto& r = t_[l][D];
    for (std::size_t F = 0; F < r.size(); ++F) {
      if (r[F] == 0) continue;
      EnumCell c{l, D, static_cast<int>(F), (l + D) / 2 - static_cast<int>(F) + 1};
      out.emplace_back(c, r[F]);
    }
  }
  return out;
}

template class EnumTableT<mpq_class>;
template class EnumTableT<double>;

EnumTable enumerate_dp(const WeightSequence& q, int l, int d_max, int d_limit, bool allow_inexact) {
  if (!q.finite_support()) throw UnsupportedInput("loop-equation DP needs finite support (materialize a truncation)");
  if (d_max > d_limit) throw std::domain_error("d_max exceeds the configured limit");
  std::vector<std::pair<int, mpq_class>> w;
  if (q.is_exact()) {
    for (const auto& [k, v] : q.exact_values())
      if (v != 0) w.emplace_back(k, v);
  } else {
    if (!allow_inexact) throw UnsupportedInput("exact enumeration needs rational weights");
    for (const auto& [k, v] : q.values()) w.emplace_back(k, mpq_class(v));
  }
  return EnumTable(std::move(w), l, d_max);
}

FloatEnumTable enumerate_dp_float(const WeightSequence& q, int l, int d_max) {
  std::vector<std::pair<int, double>> w;
  const int top = q.finite_support() ? std::min(q.max_degree(), d_max) : d_max;
  for (int k = 1; k <= top; ++k)
    if (q.q(k) != 0.0) w.emplace_back(k, q.q(k));
  return FloatEnumTable(std::move(w), l, d_max);
}

namespace {

constexpr int kMaxDarts = 12;
using Perm = std::array<int, kMaxDarts>;

int count_cycles(const Perm& p, int n) {
  std::array<bool, kMaxDarts> seen{};
  int c = 0;
  for (int i = 0; i < n; ++i) {
    if (seen[i]) continue;
    ++c;
    for (int j = i; !seen[j]; j = p[j]) seen[j] = true;
  }
  return c;
}

bool connected(const Perm& s, const Perm& a, int n) {
  std::array<bool, kMaxDarts> seen{};
  std::array<int, kMaxDarts> stack{};
  int top = 0, reached = 1;
  stack[top++] = 0;
  seen[0] = true;
  while (top) {
    const int d = stack[--top];
    for (int e : {s[d], a[d]})
      if (!seen[e]) {
        seen[e] = true;
        ++reached;
        stack[top++] = e;
      }
  }
  return reached == n;
}

void involutions(std::vector<int>& free, Perm& a, std::vector<Perm>& out, int n) {
  if (free.empty()) {
    out.push_back(a);
    return;
  }
  const int x = free.front();
  for (std::size_t i = 1; i < free.size(); ++i) {
    const int y = free[i];
    std::vector<int> rest;
    for (std::size_t j = 1; j < free.size(); ++j)
      if (j != i) rest.push_back(free[j]);
    a[x] = y;
    a[y] = x;
    involutions(rest, a, out, n);
  }
}

std::vector<Perm> all_involutions(int n) {
  std::vector<int> free(n);
  std::iota(free.begin(), free.end(), 0);
  Perm a{};
  std::vector<Perm> out;
  involutions(free, a, out, n);
  return out;
}

// (face degree of dart 0, sorted degrees of the other faces) for phi
std::pair<int, std::vector<int>> face_type(const Perm& phi, int n) {
  std::array<bool, kMaxDarts> seen{};
  int root = 0;
  std::vector<int> inner;
  for (int i = 0; i < n; ++i) {
    if (seen[i]) continue;
    int len = 0;
    for (int j = i; !seen[j]; j = phi[j]) {
      seen[j] = true;
      ++len;
    }
    if (i == 0)
      root = len;
    else
      inner.push_back(len);
  }
  std::sort(inner.begin(), inner.end());
  return {root, inner};
}

mpz_class factorial(int n) {
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), n);
  return f;
}

}  // namespace

BruteForceTable brute_force_maps(int e_max) {
  if (e_max > 4) throw std::domain_error("brute force is limited to E <= 4");
  BruteForceTable tab;
  tab.e_max = e_max;
  tab.counts[{0, {}}] = 1;  // the single-vertex map
  for (int E = 1; E <= e_max; ++E) {
    const int n = 2 * E;
    std::map<std::pair<int, std::vector<int>>, mpz_class> raw;
    for (const Perm& a : all_involutions(n)) {
      Perm s{};
      std::iota(s.begin(), s.begin() + n, 0);
      do {
        if (!connected(s, a, n)) continue;
        Perm phi{};
        for (int d = 0; d < n; ++d) phi[d] = s[a[d]];
        const int faces = count_cycles(phi, n);
        if (count_cycles(s, n) - E + faces != 2) continue;
        raw[face_type(phi, n)] += 1;
      } while (std::next_permutation(s.begin(), s.begin() + n));
    }
    // every rooted map has (2E-1)! labellings fixing the root dart
    const mpz_class labellings = factorial(n - 1);
    for (auto& [key, c] : raw) tab.counts[key] += c / labellings;
  }
  return tab;
}

mpq_class BruteForceTable::cell(const std::map<int, mpq_class>& q, int l, int D, int F) const {
  mpq_class s = 0;
  for (const auto& [key, c] : counts) {
    const auto& [root, inner] = key;
    if (root != l || static_cast<int>(inner.size()) != F) continue;
    if (std::accumulate(inner.begin(), inner.end(), 0) != D) continue;
    mpq_class w = c;
    for (int d : inner) {
      auto it = q.find(d);
      if (it == q.end()) {
        w = 0;
        break;
      }
      w *= it->second;
    }
    s += w;
  }
  return s;
}

namespace {

// Enumerates permutations of darts 1..n-1 (dart 0 already placed in the root
// cycle) whose cycles have the lengths in `lengths`; each cycle starts at its
// smallest dart, so every permutation is produced once.
template <class F>
void cycles_of_type(Perm& phi, std::vector<bool>& used, std::vector<int>& lengths, int n, F&& visit) {
  int first = -1;
  for (int i = 0; i < n; ++i)
    if (!used[i]) {
      first = i;
      break;
    }
  if (first < 0) {
    if (lengths.empty()) visit(phi);
    return;
  }
  std::vector<int> tried;
  for (std::size_t li = 0; li < lengths.size(); ++li) {
    const int len = lengths[li];
    if (std::find(tried.begin(), tried.end(), len) != tried.end()) continue;
    tried.push_back(len);
    std::vector<int> rest = lengths;
    rest.erase(rest.begin() + li);
    used[first] = true;
    std::vector<int> cyc{first};
    // choose the remaining len-1 darts in order
    auto extend = [&](auto&& self) -> void {
      if (static_cast<int>(cyc.size()) == len) {
        for (int i = 0; i < len; ++i) phi[cyc[i]] = cyc[(i + 1) % len];
        cycles_of_type(phi, used, rest, n, visit);
        return;
      }
      for (int d = first + 1; d < n; ++d) {
        if (used[d]) continue;
        used[d] = true;
        cyc.push_back(d);
        self(self);
        cyc.pop_back();
        used[d] = false;
      }
    };
    extend(extend);
    used[first] = false;
  }
}

}  // namespace

mpz_class brute_force_face_type(int l, std::vector<int> inner) {
  const int total = l + std::accumulate(inner.begin(), inner.end(), 0);
  if (total % 2) return 0;
  const int E = total / 2;
  if (E == 0) return (l == 0 && inner.empty()) ? 1 : 0;
  if (E > 6) throw std::domain_error("face-type brute force is limited to E <= 6");
  if (l < 1) return 0;
  for (int d : inner)
    if (d < 1) return 0;
  const int n = 2 * E;
  const auto alphas = all_involutions(n);
  mpz_class hits = 0;
  std::vector<int> lengths = inner;
  // root cycle: dart 0 followed by l-1 further darts in order
  std::vector<bool> used(n, false);
  used[0] = true;
  Perm phi{};
  std::vector<int> root{0};
  auto visit = [&](const Perm& p) {
    for (const Perm& a : alphas) {
      Perm s{};
      // phi = sigma o alpha  =>  sigma = phi o alpha
      for (int d = 0; d < n; ++d) s[d] = p[a[d]];
      if (!connected(s, a, n)) continue;
      if (count_cycles(s, n) - E + 1 + static_cast<int>(inner.size()) != 2) continue;
      hits += 1;
    }
  };
  auto choose_root = [&](auto&& self) -> void {
    if (static_cast<int>(root.size()) == l) {
      for (int i = 0; i < l; ++i) phi[root[i]] = root[(i + 1) % l];
      cycles_of_type(phi, used, lengths, n, visit);
      return;
    }
    for (int d = 1; d < n; ++d) {
      if (used[d]) continue;
      used[d] = true;
      root.push_back(d);
      self(self);
      root.pop_back();
      used[d] = false;
    }
  };
  choose_root(choose_root);
  return hits / factorial(n - 1);
}

template <class T>
VolumeTableT<T> volume_table(const EnumTableT<T>& table, int l) {
  VolumeTableT<T> out;
  out.l = l;
  int kmin = 0;
  for (const auto& [k, v] : table.weights())
    if (v != 0 && (kmin == 0 || k < kmin)) kmin = k;
  for (const auto& [cell, w] : table.cells(l)) out.w[cell.V] += w;
  if (l == 0) {
    out.v_complete = table.d_max() >= 0 ? std::numeric_limits<int>::max() : 0;
    return out;
  }
  if (kmin <= 2) {
    out.certified = false;
    out.v_complete = 0;
    return out;
  }
  // V >= 1 + l/2 + D (1/2 - 1/kmin): maps with S = 2(V-1) - l need D <= S kmin/(kmin-2)
  int v = 0;
  for (int V = 1;; ++V) {
    const int S = 2 * (V - 1) - l;
    const int need = S <= 0 ? 0 : S + (2 * S) / (kmin - 2);
    if (need > table.d_max()) break;
    v = V;
  }
  out.v_complete = v;
  return out;
}

template VolumeTableT<mpq_class> volume_table(const EnumTableT<mpq_class>&, int);
template VolumeTableT<double> volume_table(const EnumTableT<double>&, int);

VolumeTable volume_tables(const WeightSequence& q, int l, int d_max) {
  return volume_table(enumerate_dp(q, l, d_max, kDefaultDmaxLimit, true), l);
}

double extrapolate_disk(const EnumTable& table, int l, int terms) {
  if (terms < 1) throw std::domain_error("need at least one correction term");
  std::vector<std::pair<double, double>> pts;  // (D, partial sum) at D where the sum grows
  mpq_class prev = -1;
  for (int D = 0; D <= table.d_max(); ++D) {
    const mpq_class s = table.disk_upto(l, D);
    if (s != prev && D > 0) pts.emplace_back(D, s.get_d());
    prev = s;
  }
  const int m = terms + 1;
  if (static_cast<int>(pts.size()) < m) throw std::domain_error("not enough nonzero degrees for the extrapolation");
  pts.erase(pts.begin(), pts.end() - m);
  // S(D) = W - sum_j a_j D^{-(3/2 + j)}, solved exactly on the last m points
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1));
  for (int i = 0; i < m; ++i) {
    a[i][0] = 1.0;
    for (int j = 1; j < m; ++j) a[i][j] = -std::pow(pts[i].first, -(0.5 + j));
    a[i][m] = pts[i].second;
  }
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int i = col + 1; i < m; ++i)
      if (std::abs(a[i][col]) > std::abs(a[piv][col])) piv = i;
    std::swap(a[col], a[piv]);
    for (int i = 0; i < m; ++i) {
      if (i == col) continue;
      const double f = a[i][col] / a[col][col];
      for (int j = col; j <= m; ++j) a[i][j] -= f * a[col][j];
    }
  }
  return a[0][m] / a[0][0];
}

double GSeries::eval(double g) const {
  double s = 0.0;
  for (const auto& [V, c] : coeff) s += c.get_d() * std::pow(g, V);
  return s;
}

GSeries g_series(const WeightSequence& q, int l, int d_max) {
  const auto vt = volume_tables(q, l, d_max);
  GSeries gs;
  gs.l = l;
  gs.v_complete = vt.v_complete;
  gs.certified = vt.certified;
  for (const auto& [V, w] : vt.w)
    if (V <= vt.v_complete) gs.coeff[V] = w;
  return gs;
}

double analytic_disk_g(const WeightSequence& q, int l, double g) {
  auto cd = solve_boltzmann(q, g);
  if (cd.classification == Classification::not_admissible) throw std::domain_error("weights not admissible at g");
  const auto qg = q.deformed(g);
  const auto law = complete_nu_admissible(nu_from_q(qg, cd.c_plus, cd.r), std::max(l + 2, 8));
  return std::pow(g, 1.0 + 0.5 * l) * disk_coefficient(law, l);
}

double pointed_loop_residual(const WeightSequence& q, const StepLaw& law, int l) {
  if (l < 1) throw std::domain_error("pointed loop equation needs l >= 1");
  const double c = law.c_plus;
  const int top = law.k_pos + 2 + l;
  const auto h0 = h_coefficients(law.r, 0, top + 1);
  auto wb = [&](int m) { return std::pow(c, m) * h0[m]; };
  double s = wb(l);
  for (int k = 1; k <= law.k_pos + 2; ++k)
    if (l + k - 2 >= 0) s -= q.q_scaled(k, c, l + k - 2) * h0[l + k - 2];
  for (int lp = 0; lp <= l - 2; ++lp) s -= 2.0 * disk_coefficient(law, lp) * wb(l - lp - 2);
  return s;
}

double transition_total(const WeightSequence& q, const StepLaw& law, int l) {
  if (l < 1) throw std::domain_error("transitions need l >= 1");
  const double c = law.c_plus;
  const auto h0 = h_coefficients(law.r, 0, law.k_pos + l + 3);
  auto wb = [&](int m) { return std::pow(c, m) * h0[m]; };
  const double here = wb(l);
  if (here == 0.0) throw std::domain_error("pointed disk function vanishes at this perimeter");
  double s = 0.0;
  for (int k = 1; k <= law.k_pos + 2; ++k)
    if (l + k - 2 >= 0) s += q.q_scaled(k, c, k - 2) * h0[l + k - 2] / h0[l];
  for (int lp = 0; lp <= l - 2; ++lp) s += 2.0 * disk_coefficient(law, lp) * wb(l - lp - 2) / here;
  return s;
}

namespace {
void write_weight(std::ostream& os, const mpq_class& w) { os << w.get_num() << ',' << w.get_den(); }
void write_weight(std::ostream& os, double w) { os << w << ",1"; }
}  // namespace

template <class T>
void write_enum_csv(std::ostream& os, const EnumTableT<T>& table, int l) {
  os.precision(17);
  os << "l,D,F,V,weight_num,weight_den\n";
  for (const auto& [c, w] : table.cells(l)) {
    os << c.l << ',' << c.D << ',' << c.F << ',' << c.V << ',';
    write_weight(os, w);
    os << '\n';
  }
}

template void write_enum_csv(std::ostream&, const EnumTableT<mpq_class>&, int);
template void write_enum_csv(std::ostream&, const EnumTableT<double>&, int);

}  // namespace peelkit
