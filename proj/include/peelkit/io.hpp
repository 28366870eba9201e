#pragma once

#include <string>

#include "peelkit/criticality.hpp"
#include "peelkit/walk.hpp"
#include "peelkit/weights.hpp"

namespace peelkit {

// Weight config: {"weights": {"k": "p/q" | decimal, ...}, "family": {"tag": ..., params}}.
// A bare {"k": "p/q"} map is accepted too.  Rational entries give an exact
// sequence; any decimal makes the whole sequence numeric and sets inexact.
struct WeightConfig {
  WeightSequence q;
  bool inexact = false;
};

WeightConfig parse_weight_config(const std::string& json_text);
WeightConfig load_weight_config(const std::string& path);
// Exact entries as "p/q" strings, numeric ones as shortest round-trip decimals;
// infinite families as the family tag alone.
std::string dump_weight_config(const WeightSequence& q);

Family parse_family(const std::string& tag);
// Preset sequence for a tagged family.
Preset preset_for(const Family& f);

// Criticality report: c_plus, c_minus, r, z_plus, z_diamond, margin,
// classification, residuals, miermont block, plus the step-law constants when
// a law is given.
std::string criticality_report_json(const CriticalData& cd, const MiermontReport& m, const StepLaw* law);

}  // namespace peelkit
