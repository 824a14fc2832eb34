#pragma once

#include "rdsys/config_io.hpp"
#include "rdsys/fk.hpp"
#include "rdsys/hedging.hpp"
#include "rdsys/sde.hpp"

#include <string>
#include <string_view>

namespace rdsys {

// Shortest round-trip text of a double ("nan", "inf", "-inf" for non-finite values).
std::string format_number(double v);

// Writes `text` to `path`; throws UsageError when the file cannot be written.
void write_text_file(const std::string& path, std::string_view text);

// Columns: t, x1..xd, k, v.
std::string value_field_csv(const ValueField& field);
// Columns: iter, beta_dist, sup_dist, se, ratio, theoretical_rate.
std::string contraction_trace_csv(const ContractionTrace& trace);
// Columns: path, step, t, s1..sd, regime, weight. At most max_paths paths.
std::string path_bundle_csv(const PathBundle& bundle, std::size_t max_paths);
// Columns: path, H, H0, gains, gains_left, L_T, residual, residual_left, covariation, weight, flagged.
std::string hedge_paths_csv(const HedgeReport& report);
// Columns: step, t, mean_L, mean_gains.
std::string hedge_steps_csv(const HedgeReport& report);
// Columns: path, step, t, theta1..thetad, L, theta0 for the retained paths.
std::string hedge_series_csv(const HedgeReport& report, int dim);

Json to_json(const Estimate& e);
Json to_json(const PdeDiagnostics& d);

// Stable 64-bit FNV-1a hash rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace rdsys
