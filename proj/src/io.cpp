#include "peelkit/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace peelkit {

namespace {

using nlohmann::json;

std::string shortest(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double get_num(const json& f, const char* key) {
  if (!f.contains(key)) throw std::invalid_argument(std::string("family parameter '") + key + "' missing");
  const auto& v = f.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_rational(v.get<std::string>(), nullptr).get_d();
  throw std::invalid_argument(std::string("family parameter '") + key + "' is not a number");
}

Family family_from_json(const json& f) {
  if (!f.is_object()) throw std::invalid_argument("\"family\" must be an object");
  Family fam = parse_family(f.value("tag", "none"));
  switch (fam.kind) {
    case Family::Kind::two_p_angulation:
    case Family::Kind::odd_angulation: fam.p = static_cast<int>(get_num(f, "p")); break;
    case Family::Kind::geometric: fam.H = get_num(f, "H"); break;
    case Family::Kind::symmetric_critical:
      fam.r = get_num(f, "r");
      fam.a = get_num(f, "a");
      break;
    default: break;
  }
  return fam;
}

json family_to_json(const Family& f) {
  json j = {{"tag", f.name()}};
  switch (f.kind) {
    case Family::Kind::two_p_angulation:
    case Family::Kind::odd_angulation: j["p"] = f.p; break;
    case Family::Kind::geometric: j["H"] = f.H; break;
    case Family::Kind::symmetric_critical:
      j["r"] = f.r;
      j["a"] = f.a;
      break;
    default: break;
  }
  return j;
}

int parse_degree(const std::string& key) {
  int k = 0;
  auto res = std::from_chars(key.data(), key.data() + key.size(), k);
  if (res.ec != std::errc() || res.ptr != key.data() + key.size() || k < 1)
    throw std::invalid_argument("weight key '" + key + "' is not a degree >= 1");
  return k;
}

}  // namespace

Family parse_family(const std::string& tag) {
  Family f;
  if (tag == "none") f.kind = Family::Kind::none;
  else if (tag == "two_p_angulation") f.kind = Family::Kind::two_p_angulation;
  else if (tag == "odd_angulation") f.kind = Family::Kind::odd_angulation;
  else if (tag == "geometric") f.kind = Family::Kind::geometric;
  else if (tag == "symmetric_critical") f.kind = Family::Kind::symmetric_critical;
  else if (tag == "custom") f.kind = Family::Kind::custom;
  else throw std::invalid_argument("unknown family tag '" + tag + "'");
  return f;
}

Preset preset_for(const Family& f) {
  switch (f.kind) {
    case Family::Kind::two_p_angulation: return preset_two_p_angulation(f.p);
    case Family::Kind::odd_angulation: return preset_odd_angulation(f.p);
    case Family::Kind::geometric: return preset_geometric(f.H);
    case Family::Kind::symmetric_critical: return preset_symmetric_critical(f.r, f.a);
    default: throw std::invalid_argument("family '" + f.name() + "' has no preset");
  }
}

WeightConfig parse_weight_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("weights are not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("weights must be a JSON object");
  const bool wrapped = j.contains("weights") || j.contains("family");
  const json weights = wrapped ? j.value("weights", json::object()) : j;
  Family fam;
  if (wrapped && j.contains("family")) fam = family_from_json(j.at("family"));
  if (!weights.is_object()) throw std::invalid_argument("\"weights\" must be an object");

  WeightConfig out;
  if (weights.empty()) {
    if (fam.kind == Family::Kind::none || fam.kind == Family::Kind::custom)
      throw std::invalid_argument("empty weight map without a preset family");
    out.q = preset_for(fam).q;
    out.inexact = !out.q.is_exact();
    return out;
  }
  std::map<int, mpq_class> exact;
  std::map<int, double> numeric;
  for (const auto& [key, v] : weights.items()) {
    const int k = parse_degree(key);
    bool inexact = false;
    if (v.is_string()) {
      const std::string text = v.get<std::string>();
      exact[k] = parse_rational(text, &inexact);
      numeric[k] = inexact ? std::stod(text) : exact[k].get_d();
    } else if (v.is_number_integer()) {
      exact[k] = mpq_class(v.get<long>());
      numeric[k] = exact[k].get_d();
    } else if (v.is_number()) {
      inexact = true;
      numeric[k] = v.get<double>();
    } else {
      throw std::invalid_argument("weight for degree " + key + " is not a number");
    }
    out.inexact = out.inexact || inexact;
  }
  if (fam.kind == Family::Kind::none) fam.kind = Family::Kind::custom;
  out.q = out.inexact ? WeightSequence::numeric(numeric, fam) : WeightSequence::exact(exact, fam);
  return out;
}

WeightConfig load_weight_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open weight config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_weight_config(ss.str());
}

std::string dump_weight_config(const WeightSequence& q) {
  json j;
  json w = json::object();
  if (q.is_exact()) {
    for (const auto& [k, v] : q.exact_values()) w[std::to_string(k)] = v.get_str();
  } else if (q.finite_support()) {
    for (const auto& [k, v] : q.values()) w[std::to_string(k)] = shortest(v);
  } else if (q.family().kind == Family::Kind::none || q.family().kind == Family::Kind::custom) {
    throw std::invalid_argument("infinite untagged sequence cannot be serialized");
  }
  j["weights"] = w;
  j["family"] = family_to_json(q.family());
  return j.dump(2) + "\n";
}

std::string criticality_report_json(const CriticalData& cd, const MiermontReport& m, const StepLaw* law) {
  json j = {{"c_plus", cd.c_plus},
            {"c_minus", cd.c_minus},
            {"r", cd.r},
            {"z_plus", cd.z_plus},
            {"z_diamond", cd.z_diamond},
            {"margin", cd.margin},
            {"classification", to_string(cd.classification)},
            {"method", cd.method},
            {"residuals", {{"R1", cd.residual1}, {"R2", cd.residual2}}},
            {"miermont",
             {{"f_bullet", m.f_bullet},
              {"f_diamond", m.f_diamond},
              {"f_bullet_residual", m.f_bullet_residual},
              {"f_diamond_residual", m.f_diamond_residual},
              {"A0", m.A0},
              {"A1", m.A1},
              {"criterion", m.criterion},
              {"tail_bound", m.tail_bound},
              {"divergent", m.divergent},
              {"note", m.note}}}};
  if (law) {
    j["step_law"] = {{"L_nu", law->L_nu},        {"B_nu", law->B_nu},
                     {"tail_const", law->tail_const}, {"nu_m2", law->at(-2)},
                     {"k_neg", law->k_neg},      {"k_pos", law->k_pos},
                     {"mass", law->table_sum() + law->pos_tail_mass + law->neg_tail_mass}};
  }
  return j.dump(2) + "\n";
}

}  // namespace peelkit
