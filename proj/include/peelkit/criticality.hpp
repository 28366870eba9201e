#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "peelkit/weights.hpp"

namespace peelkit {

enum class Classification { not_admissible, subcritical, critical, regular_critical, critical_non_regular };

std::string to_string(Classification c);
bool is_critical(Classification c);

struct CriticalData {
  double c_plus = 0.0;
  double c_minus = 0.0;
  double r = 0.0;
  double z_plus = 0.0;
  double z_diamond = 0.0;
  double margin = 0.0;
  Classification classification = Classification::not_admissible;
  double g = 1.0;
  double residual1 = 0.0;
  double residual2 = 0.0;
  bool double_root = false;  // located as a degenerate (critical) root
  std::string method;
};

struct SolverOptions {
  double residual_tol = 1e-12;
  double class_tol = 1e-9;
  double fd_step = 1e-7;
  int max_newton = 200;
  int max_fixed_point = 5000;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundaryNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Residuals {
  double R1 = 0.0;
  double R2 = 0.0;
  double margin = 0.0;
  bool finite = false;
};

// R1, R2 (h^(0)-harmonicity at k = 1, 2) and the margin 1 - sum h^(1)(l+1) nu(l)
// at the point (c_plus, r).  finite = false when the weight series diverges.
Residuals residuals(const WeightSequence& q, double c_plus, double r);

CriticalData solve_boltzmann(const WeightSequence& q, double g = 1.0, const SolverOptions& opt = {});
Classification classify(const WeightSequence& q, const CriticalData& cd, double tol = 1e-9);

// Damped Newton (plus double-root polish) from an explicit start.  Returns
// false when it does not converge.
bool newton_solve(const WeightSequence& q, double c0, double r0, CriticalData& out,
                  const SolverOptions& opt = {});
std::vector<CriticalData> uniqueness_probe(const WeightSequence& q, int starts = 8,
                                           const SolverOptions& opt = {});

struct MiermontReport {
  double f_bullet = 0.0;
  double f_diamond = 0.0;
  double f_bullet_residual = 0.0;   // f_bullet(z+, z0) - (1 - 1/z+)
  double f_diamond_residual = 0.0;  // f_diamond(z+, z0) - z0
  double A0 = 0.0;
  double A1 = 0.0;
  double criterion = 0.0;  // A1 + 2 sqrt(z+) A0
  double tail_bound = 0.0;
  bool divergent = false;
  std::string note;
};

MiermontReport miermont_check(const WeightSequence& q, const CriticalData& cd);

struct TuneResult {
  double t_star = 0.0;
  CriticalData data;
  int bisection_steps = 0;
};

TuneResult tune_critical(const WeightSequence& shape, const SolverOptions& opt = {});

}  // namespace peelkit
