#include "peelkit/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "peelkit/criticality.hpp"
#include "peelkit/io.hpp"
#include "peelkit/oracle.hpp"
#include "peelkit/peeling.hpp"
#include "peelkit/scaling.hpp"
#include "peelkit/walk.hpp"
#include "peelkit/weights.hpp"

namespace peelkit::cli {

namespace {

const char* kFooter = R"(Formula-to-flag map:
  q_k (face weights)            --weights '{"k":"p/q"}'  or  --config <file>
  2p-angulation, (2p+1)-angul.  --preset two_p_angulation|odd_angulation --p <p>
  geometric family parameter H  --preset geometric --H <H>
  symmetric family (r, a)       --preset symmetric_critical --r <r> --a <a>
  K_neg (kernel depth of nu)    --kneg <k>
  D_max, root perimeter l       --dmax <D>  --l <l>
  n (peeling steps), l_0        --steps <n>  --l0 <l>
  lazy peeling / IBPM           --mode finite|ibpm
  |V| increments                --volume-mode exact_small|asymptotic_xi|expectation
  classification tolerance      --tol <eps>

Presets: quadrangulation, triangulation, two_p_angulation, odd_angulation,
geometric, symmetric_critical.  Threads default to PEELKIT_THREADS, then the
number of logical cores.  Exit codes: 0 success, 1 computational failure,
2 usage error.
)";

// Error carrying a machine-parsable code; exit status 1.
struct Failure : std::runtime_error {
  std::string code;
  Failure(std::string c, const std::string& what) : std::runtime_error(what), code(std::move(c)) {}
};

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_weight_source(CLI::App* sub, RunConfig& c) {
  sub->add_option("--preset", c.preset, "Preset family name");
  sub->add_option("--weights", c.weights_json, "Inline weights as JSON");
  sub->add_option("--config", c.config_path, "Weight config file")->check(CLI::ExistingFile);
  sub->add_option("--p", c.p, "Preset parameter p");
  sub->add_option("--H", c.H, "Geometric family parameter H");
  sub->add_option("--r", c.r, "Symmetric family parameter r");
  sub->add_option("--a", c.a, "Symmetric family parameter a");
}

void add_common(CLI::App* sub, RunConfig& c, const std::vector<std::string>& formats) {
  sub->add_option("--out", c.out, "Output path (default: standard output)");
  sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember(formats));
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::NonNegativeNumber);
  sub->add_option("--tol", c.tol, "Classification tolerance")->check(CLI::PositiveNumber);
}

struct Source {
  WeightSequence q;
  bool inexact = false;
  std::string label;
  std::optional<ClosedForm> closed_form;
};

Source resolve_preset(const std::string& name, const RunConfig& c) {
  auto need = [&](auto& opt, const char* flag) {
    if (!opt) throw Usage("preset " + name + " needs " + flag);
    return *opt;
  };
  Preset p;
  std::string label = name;
  if (name == "quadrangulation") {
    p = preset_two_p_angulation(2);
  } else if (name == "triangulation") {
    p = preset_odd_angulation(1);
  } else if (name == "two_p_angulation") {
    const int v = need(c.p, "--p");
    if (v < 2) throw Usage("two_p_angulation needs --p >= 2");
    p = preset_two_p_angulation(v);
  } else if (name == "odd_angulation") {
    const int v = need(c.p, "--p");
    if (v < 1) throw Usage("odd_angulation needs --p >= 1");
    p = preset_odd_angulation(v);
  } else if (name == "geometric") {
    const double H = need(c.H, "--H");
    if (!(H > 1.0)) throw Usage("geometric needs --H > 1");
    p = preset_geometric(H);
  } else if (name == "symmetric_critical") {
    const double r = need(c.r, "--r"), a = need(c.a, "--a");
    if (!(r > -1.0 && r <= 1.0) || !(a > 0.0 && a < a_max(r)))
      throw Usage("symmetric_critical needs -1 < r <= 1 and 0 < a < a_max(r)");
    p = preset_symmetric_critical(r, a);
  } else {
    throw Usage("unknown preset '" + name + "'");
  }
  return {p.q, false, label, p.closed_form};
}

Source resolve_source(const RunConfig& c) {
  const int given = !c.preset.empty() + !c.weights_json.empty() + !c.config_path.empty();
  if (given != 1) throw Usage("give exactly one of --preset, --weights, --config");
  if (!c.preset.empty()) return resolve_preset(c.preset, c);
  try {
    const auto wc = c.weights_json.empty() ? load_weight_config(c.config_path) : parse_weight_config(c.weights_json);
    return {wc.q, wc.inexact, wc.q.family().name(), std::nullopt};
  } catch (const std::invalid_argument& e) {
    throw Usage(e.what());
  }
}

// Step law: the symmetric family is built from its Fourier construction,
// everything else from the solved critical point.
StepLaw build_law(const Source& s, const CriticalData& cd, int k_neg) {
  const auto& f = s.q.family();
  if (f.kind == Family::Kind::symmetric_critical) return symmetric_family(f.r, f.a, k_neg);
  if (!is_critical(cd.classification))
    throw Failure("not_critical", "weight sequence is " + to_string(cd.classification) + ", not critical");
  return complete_nu(nu_from_q(s.q, cd.c_plus, cd.r), k_neg);
}

CriticalData solve(const Source& s, const RunConfig& c) {
  SolverOptions opt;
  opt.class_tol = c.tol;
  try {
    auto cd = solve_boltzmann(s.q, 1.0, opt);
    cd.classification = classify(s.q, cd, c.tol);
    return cd;
  } catch (const SolverFailure& e) {
    throw Failure("solver_failure", e.what());
  }
}

std::string num(double x, int digits = 10) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

// key/value report in text (key=value), csv (key,value) or json
void write_pairs(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& kv,
                 const std::string& format) {
  if (format == "csv") {
    os << "key,value\n";
    for (const auto& [k, v] : kv) os << k << ',' << v << '\n';
  } else {
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
  }
}

int cmd_analyze(const RunConfig& c, std::ostream& os, std::ostream& err) {
  const auto s = resolve_source(c);
  if (s.inexact) err << "peelkit: warning: decimal weights are inexact\n";
  const auto cd = solve(s, c);
  const auto m = miermont_check(s.q, cd);
  std::optional<StepLaw> law;
  if (is_critical(cd.classification)) law = build_law(s, cd, c.k_neg);
  if (c.format == "json") {
    os << criticality_report_json(cd, m, law ? &*law : nullptr);
  } else {
    std::vector<std::pair<std::string, std::string>> kv = {
        {"family", s.label},
        {"classification", to_string(cd.classification)},
        {"c_plus", num(cd.c_plus)},
        {"c_minus", num(cd.c_minus)},
        {"r", num(cd.r)},
        {"z_plus", num(cd.z_plus)},
        {"z_diamond", num(cd.z_diamond)},
        {"margin", num(cd.margin, 3)},
        {"residual_R1", num(cd.residual1, 3)},
        {"residual_R2", num(cd.residual2, 3)},
        {"miermont_criterion", num(m.criterion)},
    };
    if (law) {
      kv.emplace_back("nu_m2", num(law->at(-2)));
      kv.emplace_back("L_nu", num(law->L_nu));
      if (std::isfinite(law->L_nu)) {
        kv.emplace_back("B_nu", num(law->B_nu));
        kv.emplace_back("tail_const", num(law->tail_const));
      }
    }
    write_pairs(os, kv, c.format);
  }
  if (cd.classification == Classification::not_admissible)
    throw Failure("not_admissible", "weight sequence is not admissible");
  return ok;
}

int cmd_preset(const RunConfig& c, std::ostream& os, std::ostream&) {
  if (c.preset.empty()) throw Usage("preset needs --preset");
  const auto s = resolve_source(c);
  if (!s.closed_form) throw Failure("no_closed_form", "preset has no closed form");
  const auto& cf = *s.closed_form;
  const auto cd = solve(s, c);
  const auto law = build_law(s, cd, c.k_neg);
  struct Row {
    std::string name;
    double closed, computed;
  };
  std::vector<Row> rows = {{"c_plus", cf.c_plus, cd.c_plus}, {"r", cf.r, cd.r}, {"nu(-2)", cf.nu_m2, law.at(-2)}};
  if (std::isfinite(cf.L_nu)) rows.push_back({"L_nu", cf.L_nu, law.L_nu});
  for (const auto& [k, v] : cf.q) rows.push_back({"q_" + std::to_string(k), v, s.q.q(k)});
  for (const auto& [k, v] : cf.nu) rows.push_back({"nu(" + std::to_string(k) + ")", v, law.at(k)});
  if (c.format == "json") {
    nlohmann::json j = {{"family", s.label}, {"rows", nlohmann::json::array()}};
    for (const auto& r : rows)
      j["rows"].push_back({{"quantity", r.name}, {"closed_form", r.closed}, {"computed", r.computed},
                           {"abs_diff", std::abs(r.closed - r.computed)}});
    os << j.dump(2) << '\n';
  } else {
    os << "quantity,closed_form,computed,abs_diff\n";
    for (const auto& r : rows)
      os << r.name << ',' << num(r.closed, 17) << ',' << num(r.computed, 17) << ',' << num(std::abs(r.closed - r.computed), 3)
         << '\n';
  }
  return ok;
}

int cmd_simulate(const RunConfig& c, std::ostream& os, std::ostream& err) {
  const auto s = resolve_source(c);
  SimulationOptions opt;
  try {
    opt.mode = parse_peel_mode(c.mode);
    opt.volume_mode = parse_volume_mode(c.volume_mode);
  } catch (const std::invalid_argument& e) {
    throw Usage(e.what());
  }
  opt.n_steps = c.steps;
  opt.l0 = c.l0;
  opt.seed = c.seed;
  opt.chain = c.chain;
  opt.perimeter_cap = c.cap;
  const auto cd = solve(s, c);
  const auto law = build_law(s, cd, c.k_neg);
  PeelTrace t;
  try {
    t = simulate(law, opt);
  } catch (const NotCritical& e) {
    throw Failure("not_critical", e.what());
  } catch (const AbsorbedState& e) {
    throw Failure("absorbed", e.what());
  }
  if (t.volume_fallback) err << "peelkit: warning: exact volume tables unavailable, using the xi rule\n";
  if (c.format == "bin") {
    write_trace_binary(os, t);
  } else if (c.format == "json") {
    nlohmann::json j = {{"mode", to_string(t.mode)},
                        {"volume_mode", to_string(t.volume_mode)},
                        {"seed", t.seed},
                        {"chain", t.chain},
                        {"l0", t.l0},
                        {"law_digest", t.law_digest},
                        {"residual_draws", t.residual_draws},
                        {"volume_fallback", t.volume_fallback},
                        {"positive_tail_truncated", t.positive_tail_truncated},
                        {"absorbed", t.absorbed},
                        {"perimeter", t.perimeter},
                        {"volume", t.volume}};
    os << j.dump() << '\n';
  } else {
    write_trace_csv(os, t);
  }
  return ok;
}

int cmd_enumerate(const RunConfig& c, std::ostream& os, std::ostream& err) {
  const auto s = resolve_source(c);
  if (!s.q.finite_support()) throw Usage("enumerate needs finite support");
  if (c.l < 0) throw Usage("--l must be >= 0");
  if (c.d_max < 0 || c.d_max > kDefaultDmaxLimit)
    throw Usage("--dmax must be in [0, " + std::to_string(kDefaultDmaxLimit) + "]");
  if (s.q.is_exact()) {
    write_enum_csv(os, enumerate_dp(s.q, c.l, c.d_max), c.l);
  } else {
    err << "peelkit: warning: inexact weights, exact enumeration disabled; using double precision\n";
    write_enum_csv(os, enumerate_dp_float(s.q, c.l, c.d_max), c.l);
  }
  return ok;
}

int cmd_scaling(const RunConfig& c, std::ostream& os, std::ostream& err) {
  std::vector<NamedWeights> models;
  for (const auto& m : c.models) {
    RunConfig sub = c;
    std::string name = m;
    if (auto pos = m.find(':'); pos != std::string::npos) {
      name = m.substr(0, pos);
      const std::string arg = m.substr(pos + 1);
      try {
        if (name == "geometric") sub.H = std::stod(arg);
        else sub.p = std::stoi(arg);
      } catch (const std::exception&) {
        throw Usage("bad model parameter in '" + m + "'");
      }
    }
    models.push_back({m, resolve_preset(name, sub).q});
  }
  ScalingSuiteOptions opt;
  opt.k_neg = c.k_neg;
  opt.ecf_n = c.n;
  opt.ecf_samples = c.samples;
  opt.collapse_n = c.n;
  opt.collapse_chains = c.chains;
  opt.exponent_chains = c.exp_chains;
  if (c.quick) {
    opt.ecf_n = std::min(opt.ecf_n, 1000L);
    opt.ecf_samples = std::min(opt.ecf_samples, 20000L);
    opt.collapse_n = std::min(opt.collapse_n, 1000L);
    opt.collapse_chains = std::min(opt.collapse_chains, 1000L);
    opt.exponent_ns = {300, 3000};
    opt.exponent_chains = std::min(opt.exponent_chains, 400L);
  }
  opt.chains.l0 = c.l0;
  opt.chains.seed = c.seed;
  opt.chains.threads = c.threads;
  try {
    opt.chains.volume_mode = parse_volume_mode(c.volume_mode);
  } catch (const std::invalid_argument& e) {
    throw Usage(e.what());
  }
  const auto report = run_scaling_suite(models, opt);
  write_scaling_json(os, report);
  if (!c.samples_out.empty() && report.collapse) {
    std::ofstream f(c.samples_out);
    write_samples_csv(f, report.collapse->models.front().samples);
  }
  if (!report.pass()) {
    for (const auto& ch : report.checks)
      if (!ch.pass) err << "peelkit: check failed: " << ch.name << " value=" << ch.value << " tol=" << ch.tolerance << '\n';
    throw Failure("check_failed", "scaling checks failed");
  }
  return ok;
}

int cmd_tune(const RunConfig& c, std::ostream& os, std::ostream&) {
  const auto s = resolve_source(c);
  SolverOptions opt;
  opt.class_tol = c.tol;
  TuneResult t;
  try {
    t = tune_critical(s.q, opt);
  } catch (const BoundaryNotFound& e) {
    throw Failure("boundary_not_found", e.what());
  } catch (const SolverFailure& e) {
    throw Failure("solver_failure", e.what());
  }
  if (c.format == "json") {
    nlohmann::json j = {{"t_star", t.t_star},
                        {"bisection_steps", t.bisection_steps},
                        {"c_plus", t.data.c_plus},
                        {"r", t.data.r},
                        {"margin", t.data.margin},
                        {"classification", to_string(t.data.classification)}};
    os << j.dump(2) << '\n';
  } else {
    write_pairs(os,
                {{"t_star", num(t.t_star, 15)},
                 {"bisection_steps", std::to_string(t.bisection_steps)},
                 {"c_plus", num(t.data.c_plus)},
                 {"r", num(t.data.r)},
                 {"margin", num(t.data.margin, 3)},
                 {"classification", to_string(t.data.classification)}},
                c.format);
  }
  return ok;
}

void validate_paths(const RunConfig& c) {
  for (const auto* p : {&c.out, &c.samples_out}) {
    if (p->empty()) continue;
    const auto dir = std::filesystem::path(*p).parent_path();
    if (!dir.empty() && !std::filesystem::is_directory(dir)) throw Usage("output directory does not exist: " + dir.string());
  }
}

}  // namespace

RunConfig parse_args(int argc, const char* const* argv) {
  RunConfig c;
  CLI::App app{"Peeling-process toolkit for Boltzmann planar maps", "peelkit"};
  app.footer(kFooter);
  app.require_subcommand(1, 1);

  auto* analyze = app.add_subcommand("analyze", "Solve for (c_+, r), classify and build the step law");
  add_weight_source(analyze, c);
  add_common(analyze, c, {"text", "csv", "json"});
  analyze->add_option("--kneg", c.k_neg, "Negative table depth of nu")->check(CLI::Range(8, 1 << 20));

  auto* preset = app.add_subcommand("preset", "Closed-form constants of a preset against the solver");
  add_weight_source(preset, c);
  add_common(preset, c, {"csv", "json"});
  preset->add_option("--kneg", c.k_neg, "Negative table depth of nu")->check(CLI::Range(8, 1 << 20));

  auto* sim = app.add_subcommand("simulate", "Run one peeling chain and write its trace");
  add_weight_source(sim, c);
  add_common(sim, c, {"csv", "json", "bin"});
  sim->add_option("--kneg", c.k_neg, "Negative table depth of nu")->check(CLI::Range(8, 1 << 20));
  sim->add_option("--mode", c.mode, "finite or ibpm")->check(CLI::IsMember({"finite", "ibpm"}));
  sim->add_option("--volume-mode", c.volume_mode, "Volume increments")
      ->check(CLI::IsMember({"exact_small", "asymptotic_xi", "expectation"}));
  sim->add_option("--steps", c.steps, "Number of peeling steps")->check(CLI::NonNegativeNumber);
  sim->add_option("--l0", c.l0, "Initial perimeter")->check(CLI::PositiveNumber);
  sim->add_option("--chain", c.chain, "Chain index within the seed");
  sim->add_option("--cap", c.cap, "Stop above this perimeter (0: none)")->check(CLI::NonNegativeNumber);

  auto* en = app.add_subcommand("enumerate", "Exact loop-equation table T(l, D, F)");
  add_weight_source(en, c);
  add_common(en, c, {"csv"});
  en->add_option("--l", c.l, "Root face degree");
  en->add_option("--dmax", c.d_max, "Inner degree budget D_max");

  auto* sc = app.add_subcommand("scaling-test", "Monte Carlo scaling diagnostics");
  add_common(sc, c, {"json"});
  sc->add_option("--model", c.models, "Models (preset[:param]); the first one drives ecf and exponents");
  sc->add_option("--kneg", c.k_neg, "Negative table depth of nu")->check(CLI::Range(8, 1 << 20));
  sc->add_option("--n", c.n, "Steps per chain and walk length")->check(CLI::PositiveNumber);
  sc->add_option("--chains", c.chains, "Chains per model for the collapse")->check(CLI::PositiveNumber);
  sc->add_option("--samples", c.samples, "Walk samples for the ecf")->check(CLI::PositiveNumber);
  sc->add_option("--exp-chains", c.exp_chains, "Chains per n for the exponents")->check(CLI::PositiveNumber);
  sc->add_option("--l0", c.l0, "Initial perimeter")->check(CLI::PositiveNumber);
  sc->add_option("--volume-mode", c.volume_mode, "Volume increments")
      ->check(CLI::IsMember({"exact_small", "asymptotic_xi", "expectation"}));
  sc->add_option("--samples-out", c.samples_out, "CSV of rescaled samples of the first model");
  sc->add_flag("--quick", c.quick, "Reduced workload");

  auto* tune = app.add_subcommand("tune-critical", "Scale a weight shape to criticality");
  add_weight_source(tune, c);
  add_common(tune, c, {"text", "csv", "json"});

  for (auto* sub : app.get_subcommands({})) sub->footer(kFooter);
  try {
    app.parse(argc, argv);
  } catch (const CLI::Error& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    if (code == 0) throw Exit{ok, o.str()};
    throw Exit{usage, "peelkit: error[usage]: " + r.str()};
  }
  for (auto* sub : app.get_subcommands()) c.command = sub->get_name();
  return c;
}

std::string echo(const RunConfig& c) {
  std::ostringstream os;
  os << "command=" << c.command << '\n';
  if (!c.preset.empty()) os << "preset=" << c.preset << '\n';
  if (c.p) os << "p=" << *c.p << '\n';
  if (c.H) os << "H=" << *c.H << '\n';
  if (c.r) os << "r=" << *c.r << '\n';
  if (c.a) os << "a=" << *c.a << '\n';
  if (!c.weights_json.empty()) os << "weights=" << c.weights_json << '\n';
  if (!c.config_path.empty()) os << "config=" << c.config_path << '\n';
  os << "mode=" << c.mode << "\nvolume_mode=" << c.volume_mode << "\nsteps=" << c.steps << "\nl0=" << c.l0
     << "\nseed=" << c.seed << "\nchain=" << c.chain << "\nl=" << c.l << "\ndmax=" << c.d_max << "\nkneg=" << c.k_neg
     << "\ntol=" << c.tol << "\nthreads=" << c.threads << "\nformat=" << c.format << "\nout=" << c.out << '\n';
  return os.str();
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    RunConfig c = cfg;
    validate_paths(c);
    c.threads = resolve_threads(c.threads);
    std::ofstream file;
    if (!c.out.empty()) {
      file.open(c.out, std::ios::binary);
      if (!file) throw Usage("cannot open output file " + c.out);
    }
    std::ostream& os = c.out.empty() ? out : file;
    if (c.command == "analyze") return cmd_analyze(c, os, err);
    if (c.command == "preset") return cmd_preset(c, os, err);
    if (c.command == "simulate") return cmd_simulate(c, os, err);
    if (c.command == "enumerate") return cmd_enumerate(c, os, err);
    if (c.command == "scaling-test") return cmd_scaling(c, os, err);
    if (c.command == "tune-critical") return cmd_tune(c, os, err);
    throw Usage("unknown command '" + c.command + "'");
  } catch (const Usage& e) {
    err << "peelkit: error[usage]: " << e.what() << '\n';
    return usage;
  } catch (const Failure& e) {
    err << "peelkit: error[" << e.code << "]: " << e.what() << '\n';
    return failure;
  } catch (const UnsupportedInput& e) {
    err << "peelkit: error[unsupported_input]: " << e.what() << '\n';
    return failure;
  } catch (const InconsistentCriticality& e) {
    err << "peelkit: error[inconsistent_criticality]: " << e.what() << '\n';
    return failure;
  } catch (const std::exception& e) {
    err << "peelkit: error[computation]: " << e.what() << '\n';
    return failure;
  }
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c = parse_args(argc, argv);
  } catch (const Exit& e) {
    (e.code == ok ? out : err) << e.text;
    return e.code;
  }
  return run(c, out, err);
}

}  // namespace peelkit::cli
