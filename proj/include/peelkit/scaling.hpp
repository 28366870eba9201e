#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "peelkit/peeling.hpp"
#include "peelkit/walk.hpp"
#include "peelkit/weights.hpp"

namespace peelkit {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Perimeter normalizer (sqrt(1+r) L n)^{2/3} and volume normalizer
// (8/(3 c_+^2)) (L/(1+r))^{1/3} n^{4/3}.
struct Normalizers {
  double perimeter = 0.0;
  double volume = 0.0;
};
Normalizers normalizers(const StepLaw& law, double n);

struct RescaledSample {
  double l_hat = 0.0;
  double v_hat = 0.0;
};

// State at step floor(n t) of every trace, rescaled.
std::vector<RescaledSample> rescale(const std::vector<PeelTrace>& traces, const StepLaw& law, long n, double t);
// Same for batch chains at mark index `mark` taken at step n t.
std::vector<RescaledSample> rescale(const std::vector<ChainMarks>& chains, const StepLaw& law, long n, double t,
                                    std::size_t mark);

// Sample quantile with a standard error from the order-statistic interval.
Estimate quantile(std::vector<double> data, double p);

// Endpoints X_n of the unconditioned walk with nu increments.
std::vector<double> walk_endpoints(const StepLaw& law, long n, long samples, std::uint64_t seed, int threads);
// Empirical characteristic function with its standard error.
std::complex<double> empirical_cf(const std::vector<double>& x, double theta, double* se = nullptr);
// exp(-|theta|^{1/2} (|theta| - i theta) / sqrt 2)
std::complex<double> stable_cf(double theta);

struct EcfPoint {
  double theta = 0.0;
  std::complex<double> ecf;
  std::complex<double> target;
  double discrepancy = 0.0;
  double se = 0.0;
};

std::vector<EcfPoint> ecf_test(const StepLaw& law, long n, long samples, const std::vector<double>& thetas,
                               std::uint64_t seed, int threads);

struct ModelQuantiles {
  std::string model;
  long n = 0;
  long chains = 0;
  std::vector<double> probs;
  std::vector<Estimate> l_hat;
  std::vector<Estimate> v_hat;
  std::vector<RescaledSample> samples;
};

struct CollapsePair {
  std::string a, b;
  double p = 0.0;
  Estimate l_rel_diff;  // l_hat_a / l_hat_b - 1
  Estimate v_ratio;     // v_hat_a / v_hat_b
};

struct CollapseResult {
  std::vector<ModelQuantiles> models;
  std::vector<CollapsePair> pairs;
};

struct NamedLaw {
  std::string name;
  const StepLaw* law;
};

struct ChainSettings {
  long l0 = 2;
  VolumeMode volume_mode = VolumeMode::exact_small;
  std::uint64_t seed = 0x5eed;
  int threads = 0;
};

// IBPM chains rescaled at t = 1 for each model; pairwise quantile ratios.
CollapseResult collapse_test(const std::vector<NamedLaw>& models, long n, long chains, const std::vector<double>& probs,
                             const ChainSettings& cs);

struct ExponentFit {
  std::vector<long> ns;
  std::vector<Estimate> median_l;
  std::vector<Estimate> median_v;
  Estimate slope_l;
  Estimate slope_v;
};

// Log-log regression of the median perimeter and volume of IBPM chains.
ExponentFit exponent_regression(const StepLaw& law, const std::vector<long>& ns, long chains, const ChainSettings& cs);

struct SlopeResult {
  std::vector<double> g;
  std::vector<double> ratio;  // (1 - c_+(g)/c_+) / sqrt(1-g)
  double estimate = 0.0;
  double predicted = 0.0;
  double rel_error = 0.0;
  std::optional<double> cminus_estimate;  // non-bipartite only
};

// g = 1 - 10^{-j}, j = j_min..j_max, extrapolated in sqrt(1-g).
SlopeResult cplus_slope_test(const WeightSequence& q, int j_min = 2, int j_max = 6);

struct LaplacePoint {
  double lambda = 0.0;
  Estimate mc;
  double target = 0.0;
};

// E exp(-lambda |V(m_l)| / (B l^2)) from the volume sampler against the xi law.
std::vector<LaplacePoint> laplace_check(const StepLaw& law, long l, const std::vector<double>& lambdas, long samples,
                                        std::uint64_t seed, VolumeMode mode = VolumeMode::asymptotic_xi);

// Local log-log slopes of nu(-k) and nu(k) near the end of the table.
struct TailDiagnostic {
  double neg_exponent = 0.0;
  double pos_exponent = 0.0;
  bool heavy_positive = false;
};
TailDiagnostic tail_diagnostic(const StepLaw& law);

struct ScalingReport {
  std::vector<std::string> models;
  std::vector<EcfPoint> ecf;
  long ecf_n = 0;
  long ecf_samples = 0;
  std::optional<CollapseResult> collapse;
  std::optional<ExponentFit> exponents;
  std::vector<std::pair<std::string, SlopeResult>> slopes;
  std::vector<std::pair<std::string, TailDiagnostic>> tails;
  struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
  };
  std::vector<Check> checks;
  bool pass() const;
};

struct ScalingSuiteOptions {
  int k_neg = 2048;
  long ecf_n = 10000;
  long ecf_samples = 100000;
  std::vector<double> thetas{0.5, 1.0, 2.0};
  double ecf_tol = 0.02;
  long collapse_n = 10000;
  long collapse_chains = 10000;
  double collapse_l_tol = 0.05;
  double collapse_v_tol = 0.10;
  std::vector<long> exponent_ns{1000, 10000, 100000};
  long exponent_chains = 1000;
  double exponent_l_tol = 0.05;
  double exponent_v_tol = 0.08;
  double slope_tol = 0.005;
  ChainSettings chains;
};

struct NamedWeights {
  std::string name;
  WeightSequence q;
};

// ecf and exponent regression on the first model, collapse across all models,
// c_+ slopes and tail diagnostics for each; checks carry the tolerances.
ScalingReport run_scaling_suite(const std::vector<NamedWeights>& models, const ScalingSuiteOptions& opt);

void write_scaling_json(std::ostream& os, const ScalingReport& r);
void write_samples_csv(std::ostream& os, const std::vector<RescaledSample>& s);

}  // namespace peelkit
