#pragma once

// JSON lines / CSV emission of check reports and decompositions.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "ustat/decomp.hpp"
#include "ustat/verify.hpp"

namespace ustat {

/// Non-finite doubles become null.
nlohmann::ordered_json json_number(double v);

/// {check, seed, params, lhs, rhs, constant, ratio, pass, asserted, runtime_ms, note}.
nlohmann::ordered_json to_json(const CheckReport& r);

/// One compact JSON object per line.
void write_jsonl(std::ostream& os, const CheckReport& r);

std::string csv_header();
/// params is embedded as a quoted JSON string.
std::string to_csv_row(const CheckReport& r);

/// Field as {shape, weights, values}.
nlohmann::ordered_json to_json(const TensorField& f);

/// Pipeline, p, LHS, flags and per-part {name, J, stage, certificate, field}.
nlohmann::ordered_json to_json(const Decomposition& d, bool include_fields = true);

}  // namespace ustat
