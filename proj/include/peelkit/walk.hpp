#pragma once

#include <complex>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "peelkit/weights.hpp"

namespace peelkit {

class InconsistentCriticality : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepLaw {
  double r = 0.0;
  double c_plus = 0.0;
  int k_neg = 0;
  int k_pos = 0;
  std::vector<double> table;  // nu(k) at index k + k_neg, k in [-k_neg, k_pos]

  // Omitted mass beyond the table: positive side certified (geometric bound),
  // negative side from the k^{-5/2} asymptote.
  double pos_tail_mass = 0.0;
  double neg_tail_mass = 0.0;
  // Omitted contribution to sum k nu(k) on the negative side (asymptotic).
  double neg_tail_moment = 0.0;
  TailKind pos_tail = TailKind::finite;
  double pos_tail_ratio = 0.0;

  double L_nu = 0.0;
  double B_nu = 0.0;
  double tail_const = 0.0;
  bool critical = false;

  // For heavy-tailed (symmetric) laws: nu(k) beyond the table.
  std::function<double(int)> beyond;

  bool bipartite() const { return r == 1.0; }
  // Tabulated value; outside the table the tail model (symmetric laws), the
  // k^{-5/2} asymptote (negative side of critical laws) or the geometric
  // continuation (positive side) is used.
  double at(int k) const;
  double in_table(int k) const {
    return (k < -k_neg || k > k_pos) ? 0.0 : table[static_cast<std::size_t>(k + k_neg)];
  }
  double table_sum() const;
  double table_mean() const;
};

// R_r(k, m) from the h-functions.
double kernel_R(double r, int k, int m);
// Closed form of R_1(2k, 2m).
double kernel_R_bipartite(int k, int m);

// Negative side from the kernel (critical input).  Throws
// InconsistentCriticality when nu(-1), nu(-2) are not reproduced to 1e-9.
StepLaw complete_nu(const StepLawPositive& pos, int k_neg = 512);
// Negative side from the general disk-function expansion; valid for every
// admissible (c_+, r), critical or not.
StepLaw complete_nu_admissible(const StepLawPositive& pos, int k_neg = 512);

double disk_coefficient(const StepLaw& law, int l);
double expected_volume(const StepLaw& law, int l);

double a_max(double r);
// Fourier coefficients nu(0..k_max) of 1 - 2a sqrt(1+r^2+2r cos t) |sin(t/2)|.
std::vector<double> symmetric_fourier(double r, double a, int k_max);
StepLaw symmetric_family(double r, double a, int k_max = 512);
const StepLaw& symmetric_family_cached(double r, double a);

struct HarmonicDefect {
  double value = 0.0;  // sum_l h(l+k) nu(l) - h(k)
  double error = 0.0;  // truncation / extrapolation error estimate
};

// order 0 or 1.  Exponential tails are summed to the table end with a
// certified bound; power-law tails use Richardson extrapolation of partial
// sums.
HarmonicDefect harmonic_defect(const StepLaw& law, int order, int k);

// Characteristic function sum_k nu(k) e^{ik theta} through
// 1 + e^{-i theta} M(c_+ e^{i theta}) sqrt((e^{i theta}-1)(e^{i theta}+r)),
// exact for tabulated positive support.
std::complex<double> charfun(const StepLaw& law, double theta);
// Same, summed directly over the table plus the asymptotic negative tail.
std::complex<double> charfun_direct(const StepLaw& law, double theta, int tail_terms = 0);
std::complex<double> charfun_expansion(const StepLaw& law, double theta);

void write_step_law_csv(std::ostream& os, const StepLaw& law);

}  // namespace peelkit
