#include "ustat/report.hpp"

#include <cmath>
#include <ostream>

namespace ustat {

nlohmann::ordered_json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::ordered_json to_json(const CheckReport& r) {
  nlohmann::ordered_json j;
  j["check"] = r.check;
  j["seed"] = r.seed;
  j["params"] = r.params;
  j["lhs"] = json_number(r.lhs);
  j["rhs"] = json_number(r.rhs);
  j["constant"] = json_number(r.constant);
  j["ratio"] = json_number(r.ratio);
  j["pass"] = r.pass;
  j["asserted"] = r.asserted;
  j["runtime_ms"] = r.runtime_ms ? json_number(*r.runtime_ms) : nlohmann::ordered_json(nullptr);
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

void write_jsonl(std::ostream& os, const CheckReport& r) { os << to_json(r).dump() << '\n'; }

std::string csv_header() { return "check,seed,params,lhs,rhs,constant,ratio,pass,runtime_ms"; }

namespace {

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : ""; }

}  // namespace

std::string to_csv_row(const CheckReport& r) {
  std::string row = csv_quote(r.check);
  row += ',' + std::to_string(r.seed);
  row += ',' + csv_quote(r.params.dump());
  row += ',' + csv_number(r.lhs);
  row += ',' + csv_number(r.rhs);
  row += ',' + csv_number(r.constant);
  row += ',' + csv_number(r.ratio);
  row += r.pass ? ",true" : ",false";
  row += ',' + (r.runtime_ms ? csv_number(*r.runtime_ms) : std::string());
  return row;
}

nlohmann::ordered_json to_json(const TensorField& f) {
  nlohmann::ordered_json j;
  j["shape"] = f.shape();
  auto axes = nlohmann::ordered_json::array();
  for (const Space& s : f.axes()) {
    nlohmann::ordered_json a;
    a["kind"] = std::string(to_string(s.kind()));
    a["weights"] = std::vector<double>(s.weights().begin(), s.weights().end());
    if (!s.block_offsets().empty())
      a["blocks"] = std::vector<std::size_t>(s.block_offsets().begin(), s.block_offsets().end());
    axes.push_back(std::move(a));
  }
  j["axes"] = std::move(axes);
  auto values = nlohmann::ordered_json::array();
  for (double v : f.values()) values.push_back(json_number(v));
  j["values"] = std::move(values);
  return j;
}

nlohmann::ordered_json to_json(const Decomposition& d, bool include_fields) {
  nlohmann::ordered_json j;
  j["pipeline"] = d.pipeline;
  j["p"] = d.p;
  j["lhs"] = json_number(d.lhs);
  j["certificate_sum"] = json_number(d.certificate_sum());
  j["reconstruction_error"] = json_number(d.reconstruction_error());
  j["disjoint"] = d.disjoint;
  j["supports_disjoint"] = d.supports_disjoint();
  auto parts = nlohmann::ordered_json::array();
  for (const DecompositionPart& p : d.parts) {
    nlohmann::ordered_json pj;
    pj["name"] = p.name;
    pj["J"] = p.lp_axes.elements();
    pj["stage"] = p.stage;
    pj["certificate"] = json_number(p.certificate);
    if (include_fields) pj["field"] = to_json(p.field);
    parts.push_back(std::move(pj));
  }
  j["parts"] = std::move(parts);
  if (include_fields) j["target"] = to_json(d.target);
  return j;
}

}  // namespace ustat
