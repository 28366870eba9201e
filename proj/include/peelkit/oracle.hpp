#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "peelkit/weights.hpp"

namespace peelkit {

struct CriticalData;
struct StepLaw;

class UnsupportedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EnumCell {
  int l = 0;
  int D = 0;  // total inner-face degree
  int F = 0;  // number of inner faces
  int V = 0;  // (l + D)/2 - F + 1
};

// Weighted counts T(l, D, F) of rooted planar maps with root face degree l,
// from the loop equation graded by (D, F).  Entries exist for every l <= l0
// and D <= d_max (and further states with l + D <= l0 + d_max).
template <class T>
class EnumTableT {
 public:
  EnumTableT() = default;
  EnumTableT(std::vector<std::pair<int, T>> q, int l0, int d_max);

  int l0() const { return l0_; }
  int d_max() const { return d_max_; }
  const std::vector<std::pair<int, T>>& weights() const { return q_; }

  T at(int l, int D, int F) const;
  // sum over all stored D' <= D and F
  T disk_upto(int l, int D) const;
  T disk(int l) const { return disk_upto(l, d_max_); }
  std::vector<std::pair<EnumCell, T>> cells(int l) const;

 private:
  const std::vector<T>* row(int l, int D) const;

  std::vector<std::pair<int, T>> q_;
  int l0_ = 0;
  int d_max_ = 0;
  int top_ = 0;  // bound on l + D
  std::vector<std::vector<std::vector<T>>> t_;  // t_[l][D][F]
};

using EnumTable = EnumTableT<mpq_class>;
using FloatEnumTable = EnumTableT<double>;

constexpr int kDefaultDmaxLimit = 60;

// Exact DP; q must have finite support and rational entries (exact or dyadic
// from doubles when allow_inexact).
EnumTable enumerate_dp(const WeightSequence& q, int l, int d_max, int d_limit = kDefaultDmaxLimit,
                       bool allow_inexact = false);
// Double-precision DP; infinite-support families are cut at degree d_max
// (larger faces cannot occur within the budget).
FloatEnumTable enumerate_dp_float(const WeightSequence& q, int l, int d_max);

// Limit of the truncated disk sums W^(l)|_{D' <= D}, assuming the tail of a
// critical sequence: corrections in D^{-3/2}, D^{-5/2}, ... (terms of them).
double extrapolate_disk(const EnumTable& table, int l, int terms = 3);

// Rooted maps as rotation systems (sigma, alpha) on 2E darts; counts per
// (root-face degree, sorted inner-face degrees).
struct BruteForceTable {
  int e_max = 0;
  std::map<std::pair<int, std::vector<int>>, mpz_class> counts;

  // Weighted count of maps in the cell (l, D, F) whose inner faces all have
  // degrees in the support of q.
  mpq_class cell(const std::map<int, mpq_class>& q, int l, int D, int F) const;
};

BruteForceTable brute_force_maps(int e_max);
// Rooted maps with a prescribed face type, enumerated through the face
// permutation; handles E up to 6.
mpz_class brute_force_face_type(int l, std::vector<int> inner);

template <class T>
struct VolumeTableT {
  int l = 0;
  int v_complete = 0;     // W^(l,V) exact for V <= v_complete
  bool certified = true;  // false when min degree <= 2
  std::map<int, T> w;     // V -> (partial) W^(l,V)
};

using VolumeTable = VolumeTableT<mpq_class>;
using FloatVolumeTable = VolumeTableT<double>;

template <class T>
VolumeTableT<T> volume_table(const EnumTableT<T>& table, int l);
VolumeTable volume_tables(const WeightSequence& q, int l, int d_max);

struct GSeries {
  int l = 0;
  int v_complete = 0;
  bool certified = true;
  std::map<int, mpq_class> coeff;  // complete coefficients of g^V
  double eval(double g) const;
};

GSeries g_series(const WeightSequence& q, int l, int d_max);

// W_g^(l) = g^{1+l/2} W^(l)(q_g) from the analytic solution.
double analytic_disk_g(const WeightSequence& q, int l, double g);

// W_bullet^(l) - sum_k q_k W_bullet^(l+k-2) - 2 sum W^(l') W_bullet^(l-l'-2)
double pointed_loop_residual(const WeightSequence& q, const StepLaw& law, int l);
// Sum of the unexplored-map transition probabilities out of perimeter l.
double transition_total(const WeightSequence& q, const StepLaw& law, int l);

template <class T>
void write_enum_csv(std::ostream& os, const EnumTableT<T>& table, int l);

}  // namespace peelkit
