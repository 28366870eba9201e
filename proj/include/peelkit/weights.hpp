#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace peelkit {

struct Family {
  enum class Kind { none, two_p_angulation, odd_angulation, geometric, symmetric_critical, custom };
  Kind kind = Kind::none;
  int p = 0;
  double H = 0.0;
  double r = 0.0;
  double a = 0.0;

  std::string name() const;
};

// How the weights behave beyond the explicitly stored entries.
//   finite    : q_k = 0 beyond the stored support
//   geometric : q_{k+1} <= ratio * q_k for k >= tail_start (certified tail)
//   power_law : q_k ~ C k^{-2} ratio^k, no certified geometric bound at the
//               boundary of convergence
enum class TailKind { finite, geometric, power_law };

class WeightSequence {
 public:
  WeightSequence() = default;

  static WeightSequence exact(std::map<int, mpq_class> values, Family family = {});
  static WeightSequence numeric(std::map<int, double> values, Family family = {});
  // Infinite support given by a generator evaluated for every k >= 1.
  // log_q (optional) evaluates log q_k and keeps q_k c^e representable when
  // q_k itself underflows.
  static WeightSequence generated(std::function<double(int)> q, TailKind tail, double ratio,
                                  int tail_start, Family family = {},
                                  std::function<double(int)> log_q = {});

  double q(int k) const;
  // q_k c^e, evaluated in log space when the direct product over/underflows.
  double q_scaled(int k, double c, int e) const;
  double log_q(int k) const;
  bool is_exact() const noexcept { return exact_.has_value(); }
  const std::map<int, mpq_class>& exact_values() const;
  // Explicit entries (finite support only).
  const std::map<int, double>& values() const noexcept { return values_; }

  bool finite_support() const noexcept { return tail_ == TailKind::finite; }
  TailKind tail_kind() const noexcept { return tail_; }
  double tail_ratio() const noexcept { return ratio_; }
  int tail_start() const noexcept { return tail_start_; }
  // Largest k with q_k > 0 for finite support; -1 when the support is infinite.
  int max_degree() const;
  // Smallest k with q_k > 0, or 0 for an empty sequence.
  int min_degree() const;
  bool bipartite() const;
  const Family& family() const noexcept { return family_; }

  // (q_g)_k = g^{(k-2)/2} q_k
  WeightSequence deformed(double g) const;
  WeightSequence scaled(double t) const;
  WeightSequence with_family(Family f) const;

  // q_0..q_{k_max} (q_0 = 0).
  std::vector<double> materialize(int k_max) const;

 private:
  std::map<int, double> values_;
  std::optional<std::map<int, mpq_class>> exact_;
  std::function<double(int)> gen_;
  std::function<double(int)> lgen_;
  TailKind tail_ = TailKind::finite;
  double ratio_ = 0.0;
  int tail_start_ = 1;
  Family family_;
};

struct ValidationReport {
  bool nonnegative = true;
  bool non_degenerate = true;
  bool nonempty = true;
  bool bipartite = false;
  // gcd of {k >= 1 : q_{2k+2} > 0, or k odd and q_{k+2} > 0}; vertex counts live on
  // an arithmetic progression with this step.
  int lattice_span = 0;
  std::vector<std::string> issues;

  bool valid() const { return nonnegative && non_degenerate && nonempty; }
};

ValidationReport validate(const WeightSequence& q);

// Positive side of the step law: nu(k) = q_{k+2} c_+^k for k >= -1, plus nu(-2).
struct StepLawPositive {
  double c_plus = 0.0;
  double r = 0.0;
  std::vector<double> nu;  // nu[i] = nu(i - 1), i = 0..k_max+1
  double nu_m2 = 0.0;      // 2 / c_+^2
  TailKind tail = TailKind::finite;
  double tail_ratio = 0.0;  // nu(k+1)/nu(k) bound beyond the table
  double tail_mass = 0.0;   // bound on sum of omitted nu(k)
  std::function<double(int)> beyond;  // nu(k) beyond the table, when known

  int k_max() const { return static_cast<int>(nu.size()) - 2; }
  double at(int k) const;
};

class DivergentSeries : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

StepLawPositive nu_from_q(const WeightSequence& q, double c_plus, double r, double tol = 1e-17);
WeightSequence q_from_nu(const StepLawPositive& nu);

// Exact variants for bipartite weights when c_+^2 is rational:
// nu(2j) = q_{2j+2} (c_+^2)^j.
std::map<int, mpq_class> nu_from_q_exact(const std::map<int, mpq_class>& q, const mpq_class& c_plus_sq);
std::map<int, mpq_class> q_from_nu_exact(const std::map<int, mpq_class>& nu, const mpq_class& nu_m2);

// W_bullet^(l) = c_+^l h_r^(0)(l)
double pointed_disk(int l, double c_plus, double r);
// Same quantity through the mobile/binomial expansion in (z+, z_diamond).
double pointed_disk_mobile(int l, double z_plus, double z_diamond);

// Constants attached to presets with a closed form.
struct ClosedForm {
  double c_plus = 0.0;
  double r = 0.0;
  double L_nu = 0.0;
  double nu_m2 = 0.0;
  std::map<int, double> q;
  std::map<int, double> nu;
};

struct Preset {
  WeightSequence q;
  std::optional<ClosedForm> closed_form;
};

Preset preset_two_p_angulation(int p);
Preset preset_odd_angulation(int p);
Preset preset_geometric(double H);
Preset preset_symmetric_critical(double r, double a);

// Parses "p/q", integers and decimals.  Decimals set *inexact.
mpq_class parse_rational(const std::string& text, bool* inexact);

}  // namespace peelkit
