#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sbh/box.hpp"
#include "sbh/cross_validation.hpp"
#include "sbh/error.hpp"
#include "sbh/peeling.hpp"
#include "sbh/simulation.hpp"
#include "sbh/survival.hpp"
#include "sbh/survival_data.hpp"

namespace sbh {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1.0.0";

// ---------------------------------------------------------------- CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(unquote(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

[[noreturn]] inline void parse_error(const std::string& source, std::size_t row, const std::string& column,
                                     const std::string& reason) {
  throw Error(ErrorCode::ParseError,
              source + ": row " + std::to_string(row) + ", column '" + column + "': " + reason);
}

}  // namespace detail

/// Reads `time`, `status` and numeric covariates (all other columns, in
/// file order). Rows are numbered from 1, the header excluded.
inline SurvivalData parse_csv(std::istream& in, const std::string& source = "input") {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, source + ": missing header row");
  const auto header = detail::split_fields(line);
  std::optional<std::size_t> time_col, status_col;
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "time") {
      require(!time_col, ErrorCode::SchemaError, source + ": duplicate 'time' column");
      time_col = c;
    } else if (header[c] == "status") {
      require(!status_col, ErrorCode::SchemaError, source + ": duplicate 'status' column");
      status_col = c;
    } else {
      require(!header[c].empty(), ErrorCode::SchemaError,
              source + ": empty column name at position " + std::to_string(c + 1));
      cov_cols.push_back(c);
      names.push_back(header[c]);
    }
  }
  if (!time_col) throw Error(ErrorCode::SchemaError, source + ": no 'time' column");
  if (!status_col) throw Error(ErrorCode::SchemaError, source + ": no 'status' column");
  if (cov_cols.empty()) throw Error(ErrorCode::SchemaError, source + ": no covariate columns");

  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto fields = detail::split_fields(line);
    if (fields.size() != header.size())
      detail::parse_error(source, row, "*",
                          "expected " + std::to_string(header.size()) + " fields, found " +
                              std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c)
      if (fields[c].empty() || fields[c] == "NA") detail::parse_error(source, row, header[c], "missing value");
    const auto t = detail::parse_double(fields[*time_col]);
    if (!t || *t < 0.0) detail::parse_error(source, row, "time", "not a nonnegative number");
    const auto& st = fields[*status_col];
    if (st != "0" && st != "1") detail::parse_error(source, row, "status", "value '" + st + "' is not 0 or 1");
    std::vector<double> x;
    x.reserve(cov_cols.size());
    for (std::size_t c : cov_cols) {
      const auto v = detail::parse_double(fields[c]);
      if (!v) detail::parse_error(source, row, header[c], "not a finite number");
      x.push_back(*v);
    }
    times.push_back(*t);
    events.push_back(st == "1" ? 1 : 0);
    rows.push_back(std::move(x));
  }
  if (rows.empty()) throw Error(ErrorCode::SchemaError, source + ": no data rows");
  return SurvivalData::from_rows(std::move(times), std::move(events), rows, std::move(names));
}

inline SurvivalData load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

/// 17 significant digits.
inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

inline void write_csv(std::ostream& out, const SurvivalData& data) {
  out << "time,status";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << csv_number(data.times[i]) << ',' << static_cast<int>(data.events[i]);
    for (std::size_t j = 0; j < data.p(); ++j) out << ',' << csv_number(data.x(i, j));
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const SurvivalData& data) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  write_csv(out, data);
}

// ---------------------------------------------------------------- config

enum class OutputFormat { Json, Csv, Both };

struct RunConfig {
  std::string command;
  std::optional<std::string> input;
  std::optional<SimSpec> simulation;
  PeelConfig peel;
  CvConfig cv;
  std::size_t M = 1;
  std::string out_dir = ".";
  OutputFormat format = OutputFormat::Both;
  int verbosity = 1;

  bool json_output() const { return format != OutputFormat::Csv; }
  bool csv_output() const { return format != OutputFormat::Json; }

  void validate() const {
    require(input.has_value() != simulation.has_value(), ErrorCode::InvalidArgument,
            "exactly one data source is required: --input or --model");
    require(M >= 1, ErrorCode::InvalidArgument, "M must be at least 1");
    if (simulation) simulation->validate();
    cv.validate();
  }
};

/// Side table from "name=lower|upper|both,..."; unnamed covariates are free.
inline std::vector<AllowedSides> parse_sides(const std::string& text, const std::vector<std::string>& names) {
  std::vector<AllowedSides> sides(names.size(), AllowedSides::Both);
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string entry(detail::trim(item));
    if (entry.empty()) continue;
    const auto eq = entry.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument,
            "directed entry '" + entry + "' is not name=side");
    const std::string name(detail::trim(std::string_view(entry).substr(0, eq)));
    const std::string side(detail::trim(std::string_view(entry).substr(eq + 1)));
    const auto it = std::find(names.begin(), names.end(), name);
    require(it != names.end(), ErrorCode::InvalidArgument, "directed entry names unknown covariate '" + name + "'");
    AllowedSides a;
    if (side == "lower") a = AllowedSides::LowerOnly;
    else if (side == "upper") a = AllowedSides::UpperOnly;
    else if (side == "both") a = AllowedSides::Both;
    else throw Error(ErrorCode::InvalidArgument, "directed side '" + side + "' is not lower, upper or both");
    sides[static_cast<std::size_t>(it - names.begin())] = a;
  }
  return sides;
}

inline const char* to_string(AllowedSides a) {
  switch (a) {
    case AllowedSides::Both: return "both";
    case AllowedSides::LowerOnly: return "lower";
    case AllowedSides::UpperOnly: return "upper";
  }
  return "?";
}

// ---------------------------------------------------------------- JSON

inline json number_or_null(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json warnings_json(const Warnings& w) {
  json out = json::array();
  for (const auto& x : w) out.push_back({{"code", x.code}, {"message", x.message}});
  return out;
}

/// Full resolved configuration; the thread count is left out so that the
/// document does not depend on it.
inline json config_json(const RunConfig& rc, const std::vector<std::string>& names) {
  json data;
  if (rc.input) {
    data = {{"source", "file"}, {"path", *rc.input}};
  } else {
    const auto& s = *rc.simulation;
    data = {{"source", "simulation"}, {"model", to_string(s.model)}, {"n", s.n}, {"p", s.p},
            {"pi", s.pi},             {"sigma", s.sigma},            {"seed", s.seed}};
  }
  json sides = json::array();
  for (std::size_t j = 0; j < rc.peel.sides.size(); ++j)
    sides.push_back({{"covariate", names[j]}, {"side", to_string(rc.peel.sides[j])}});
  return {
      {"command", rc.command},
      {"data", data},
      {"peel",
       {{"alpha0", rc.peel.alpha0},
        {"beta0", rc.peel.beta0},
        {"criterion", to_string(rc.peel.criterion)},
        {"pasting", rc.peel.pasting},
        {"mode", rc.peel.sides.empty() ? "free" : "directed"},
        {"sides", sides},
        {"max_length", rc.peel.step_cap()}}},
      {"cv",
       {{"K", rc.cv.K},
        {"B", rc.cv.B},
        {"A", rc.cv.A},
        {"technique", to_string(rc.cv.technique)},
        {"opt_criterion", to_string(rc.cv.opt)},
        {"lrt_scale", to_string(rc.cv.lrt_scale)},
        {"one_se_rule", rc.cv.one_se},
        {"seed", rc.cv.seed}}},
      {"M", rc.M},
  };
}

inline json end_points_json(const EndPoints& e) {
  return {{"lhr", number_or_null(e.lhr)}, {"lhr_clamped", e.lhr_clamped}, {"lrt", number_or_null(e.lrt)},
          {"cer", number_or_null(e.cer)}, {"meft", number_or_null(e.meft)}, {"mefp", number_or_null(e.mefp)}};
}

inline json box_json(const Box& box) { return {{"lower", box.lower}, {"upper", box.upper}}; }

inline json data_json(const SurvivalData& data) {
  return {{"n", data.n()}, {"p", data.p()}, {"events", data.event_count()}, {"covariates", data.covariate_names}};
}

inline json trajectory_json(const Trajectory& t, const std::vector<std::string>& names) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    json rec = {
        {"step", s.step},
        {"support", s.support},
        {"n_in", s.n_in},
        {"peeled_covariate", s.peeled_covariate ? json(names[*s.peeled_covariate]) : json(nullptr)},
        {"peeled_side", s.peeled_side ? json(to_string(*s.peeled_side)) : json(nullptr)},
        {"criterion_value", number_or_null(s.criterion_value)},
        {"rate", number_or_null(s.rate)},
        {"pasted", s.pasted},
        {"box", box_json(clamp_box(s.box, t.range))},
        {"rule", rule_text(s.box, names)},
        {"end_points", end_points_json(s.end_points)},
    };
    steps.push_back(std::move(rec));
  }
  json importance = json::object();
  for (std::size_t j = 0; j < t.trace_importance.size(); ++j) importance[names[j]] = t.trace_importance[j];
  json usage = json::array();
  for (const auto& u : t.trace_usage) usage.push_back(u ? json(names[*u]) : json(nullptr));
  return {{"length", t.length()},       {"active_rows", t.active.size()}, {"empty", t.empty},
          {"steps", steps},             {"usage", usage},                 {"importance", importance}};
}

inline json coverage_json(const Coverage& cov, const SurvivalData& data) {
  json boxes = json::array();
  for (std::size_t m = 0; m < cov.boxes.size(); ++m) {
    std::size_t assigned = 0;
    for (int a : cov.assignment) assigned += a == static_cast<int>(m) ? 1 : 0;
    boxes.push_back({{"index", m},
                     {"rule", rule_text(cov.boxes[m].final_box(), data.covariate_names)},
                     {"assigned", assigned},
                     {"trajectory", trajectory_json(cov.boxes[m], data.covariate_names)}});
  }
  return {{"rule", cov.rule}, {"boxes", boxes}};
}

inline json stat_profile_json(const StatProfile& p) {
  json mean = json::array(), se = json::array();
  for (const auto& v : p.mean) mean.push_back(number_or_null(v));
  for (const auto& v : p.se) se.push_back(number_or_null(v));
  return {{"mean", mean}, {"se", se}, {"count", p.count}};
}

inline json rule_json(const StepSummary& s, const std::vector<std::string>& names) {
  json edges = json::array();
  for (const auto& e : s.rule)
    edges.push_back({{"covariate", names[e.covariate]},
                     {"lower", number_or_null(e.lower)},
                     {"lower_se", number_or_null(e.lower_se)},
                     {"upper", number_or_null(e.upper)},
                     {"upper_se", number_or_null(e.upper_se)}});
  const auto conj = rule_conjuncts(s);
  return {{"text", rule_text(conj, names)}, {"edges", edges}};
}

inline json pvalues_json(const std::vector<PValue>& pv) {
  json out = json::array();
  for (const auto& v : pv)
    out.push_back({{"step", v.step},
                   {"value", number_or_null(v.value)},
                   {"permutations", v.permutations},
                   {"below_resolution", v.below_resolution},
                   {"upper_bound", v.upper_bound}});
  return out;
}

inline json cv_json(const CvResult& r, const std::vector<std::string>& names) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    json usage = json::object();
    for (std::size_t j = 0; j < names.size(); ++j)
      usage[names[j]] = {{"lower", s.usage_lower[j]},
                         {"upper", s.usage_upper[j]},
                         {"frequency", s.peel_frequency[j]},
                         {"importance", s.importance[j]}};
    steps.push_back({{"step", s.step},
                     {"replicates", s.replicates},
                     {"support", number_or_null(s.support)},
                     {"n_in", s.n_in},
                     {"membership_support", s.membership_support},
                     {"vote_agreement", s.vote_agreement},
                     {"box", box_json(s.box)},
                     {"box_se", box_json(s.box_se)},
                     {"end_points", end_points_json(s.end_points)},
                     {"rule", rule_json(s, names)},
                     {"usage", usage}});
  }
  json used = json::array();
  for (std::size_t j : r.used_covariates) used.push_back(names[j]);
  json share = json::object();
  for (std::size_t j = 0; j < names.size(); ++j) share[names[j]] = r.peel_share[j];
  const auto& p = r.profile;
  return {{"optimal_length", r.optimal_length},
          {"max_length", p.length},
          {"replicate_lengths", r.replicate_lengths},
          {"profile",
           {{"lhr", stat_profile_json(p.lhr)},
            {"lrt", stat_profile_json(p.lrt)},
            {"cer", stat_profile_json(p.cer)},
            {"meft", stat_profile_json(p.meft)},
            {"mefp", stat_profile_json(p.mefp)},
            {"support", stat_profile_json(p.support)}}},
          {"steps", steps},
          {"used_covariates", used},
          {"peel_share", share},
          {"p_values", pvalues_json(r.p_values)}};
}

namespace detail {

inline std::string null_reason(const std::string& key, const std::string& parent) {
  if (key == "lhr") return "lhr_undefined";
  if (key == "lrt") return "lrt_undefined";
  if (key == "cer") return "no_permissible_pairs";
  if (key == "meft" || key == "mefp") return "no_events_in_box";
  if (key == "peeled_covariate" || key == "peeled_side") return "initial_step";
  if (key == "lower" || key == "lower_se" || key == "upper" || key == "upper_se") return "face_not_peeled";
  if (key == "value") return "statistic_missing";
  if (key == "support") return "no_replicate_values";
  if (parent == "mean" || parent == "se" || key == "mean" || key == "se") return "no_replicate_values";
  if (key == "criterion_value" || key == "rate") return "not_finite";
  return "undefined";
}

inline std::string pointer_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

inline void collect_nulls(const json& node, const std::string& path, const std::string& key,
                          const std::string& parent, json& out) {
  if (node.is_null()) {
    out.push_back({{"path", path}, {"reason", null_reason(key, parent)}});
  } else if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it)
      collect_nulls(it.value(), path + "/" + pointer_escape(it.key()), it.key(), key, out);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i)
      collect_nulls(node[i], path + "/" + std::to_string(i), key, parent, out);
  }
}

}  // namespace detail

/// Appends `nulls`: a JSON pointer and a reason code for every null value.
inline void annotate_nulls(json& doc) {
  json nulls = json::array();
  detail::collect_nulls(doc, "", "", "", nulls);
  doc["nulls"] = std::move(nulls);
}

inline json result_document(const RunConfig& rc, const SurvivalData& data) {
  return {{"schema_version", kSchemaVersion},
          {"seed", rc.cv.seed},
          {"config", config_json(rc, data.covariate_names)},
          {"data", data_json(data)}};
}

inline json error_json(const std::string& code, const std::string& message) {
  return {{"schema_version", kSchemaVersion}, {"error", {{"code", code}, {"message", message}}}};
}

inline json truth_json(const SimSpec& spec, const Simulation& sim) {
  json planted = json::array();
  for (auto v : sim.truth.planted) planted.push_back(static_cast<int>(v));
  return {{"schema_version", kSchemaVersion},
          {"seed", spec.seed},
          {"model", to_string(spec.model)},
          {"n", spec.n},
          {"p", spec.p},
          {"pi", spec.pi},
          {"sigma", spec.sigma},
          {"censoring_bound", number_or_null(sim.truth.censoring_bound)},
          {"realized_censored_fraction",
           1.0 - static_cast<double>(sim.data.event_count()) / static_cast<double>(sim.data.n())},
          {"coefficients", sim.truth.coefficients},
          {"true_times", sim.truth.true_times},
          {"censor_times", sim.truth.censor_times},
          {"planted", planted},
          {"notes", sim.truth.notes}};
}

inline void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------- tables

inline void write_profile_csv(std::ostream& out, const CvResult& r) {
  out << "step,lhr_mean,lhr_se,lrt_mean,lrt_se,cer_mean,cer_se,support_mean,support_se,optimal\n";
  const auto& p = r.profile;
  for (std::size_t l = 0; l <= p.length; ++l) {
    out << l;
    for (const StatProfile* s : {&p.lhr, &p.lrt, &p.cer, &p.support})
      out << ',' << csv_number(s->mean[l]) << ',' << csv_number(s->se[l]);
    out << ',' << (l == r.optimal_length ? 1 : 0) << '\n';
  }
}

/// Single-fit profile: no standard errors.
inline void write_profile_csv(std::ostream& out, const Trajectory& t) {
  out << "step,lhr_mean,lhr_se,lrt_mean,lrt_se,cer_mean,cer_se,support_mean,support_se,optimal\n";
  for (const auto& s : t.steps) {
    out << s.step << ',' << csv_number(s.end_points.lhr) << ",," << csv_number(s.end_points.lrt) << ",,"
        << csv_number(s.end_points.cer) << ",," << csv_number(s.support) << ",,"
        << (s.step == t.length() ? 1 : 0) << '\n';
  }
}

inline void trajectory_header(std::ostream& out, const std::vector<std::string>& names, bool with_box_index) {
  if (with_box_index) out << "box,";
  out << "step,support,n_in";
  for (const auto& n : names) out << ',' << n << "_lower," << n << "_upper";
  out << '\n';
}

inline void write_trajectory_csv(std::ostream& out, const CvResult& r, const std::vector<std::string>& names) {
  trajectory_header(out, names, false);
  for (const auto& s : r.steps) {
    out << s.step << ',' << csv_number(s.support) << ',' << s.n_in;
    for (std::size_t j = 0; j < names.size(); ++j)
      out << ',' << csv_number(s.box.lower[j]) << ',' << csv_number(s.box.upper[j]);
    out << '\n';
  }
}

inline void write_trajectory_csv(std::ostream& out, const Coverage& cov, const std::vector<std::string>& names) {
  trajectory_header(out, names, true);
  for (std::size_t m = 0; m < cov.boxes.size(); ++m) {
    const auto& t = cov.boxes[m];
    for (const auto& s : t.steps) {
      const Box b = clamp_box(s.box, t.range);
      out << m << ',' << s.step << ',' << csv_number(s.support) << ',' << s.n_in;
      for (std::size_t j = 0; j < names.size(); ++j) out << ',' << csv_number(b.lower[j]) << ',' << csv_number(b.upper[j]);
      out << '\n';
    }
  }
}

/// Long format: usage is the peel frequency at the step, importance the
/// signed cumulative fraction of the covariate range peeled.
inline void write_traces_csv(std::ostream& out, const CvResult& r, const std::vector<std::string>& names) {
  out << "step,covariate,usage,importance\n";
  for (const auto& s : r.steps)
    for (std::size_t j = 0; j < names.size(); ++j)
      out << s.step << ',' << names[j] << ',' << csv_number(s.peel_frequency[j]) << ','
          << csv_number(s.importance[j]) << '\n';
}

inline void write_traces_csv(std::ostream& out, const Trajectory& t, const std::vector<std::string>& names) {
  out << "step,covariate,usage,importance\n";
  for (std::size_t l = 0; l < t.steps.size(); ++l)
    for (std::size_t j = 0; j < names.size(); ++j)
      out << l << ',' << names[j] << ',' << (t.trace_usage[l] == j ? 1 : 0) << ','
          << csv_number(t.trace_importance[j][l]) << '\n';
}

namespace detail {

inline void write_km_group(std::ostream& out, std::size_t step, const char* group, const SurvivalData& data,
                           std::span<const std::size_t> rows) {
  out << step << ',' << group << ",0,1\n";
  if (rows.empty()) return;
  const SurvivalData sub = data.subset(rows);
  if (sub.event_count() == 0) return;
  const auto curve = kaplan_meier(build_risk_table(sub));
  for (std::size_t h = 0; h < curve.breakpoints.size(); ++h)
    out << step << ',' << group << ',' << csv_number(curve.breakpoints[h]) << ',' << csv_number(curve.values[h])
        << '\n';
}

}  // namespace detail

/// In-box and out-of-box Kaplan-Meier breakpoints for each membership mask.
inline void write_km_csv(std::ostream& out, const SurvivalData& data, const std::vector<Mask>& memberships) {
  out << "step,group,time,survival\n";
  for (std::size_t l = 0; l < memberships.size(); ++l) {
    std::vector<std::size_t> in, outside;
    for (std::size_t i = 0; i < data.n(); ++i) (memberships[l][i] ? in : outside).push_back(i);
    detail::write_km_group(out, l, "in", data, in);
    detail::write_km_group(out, l, "out", data, outside);
  }
}

inline void write_rules(std::ostream& out, const CvResult& r, const std::vector<std::string>& names) {
  out << "# optimal step " << r.optimal_length << '\n';
  out << rule_text(rule_conjuncts(r.optimal()), names) << '\n';
  out << "# edges at the optimal step: covariate side mean se\n";
  for (const auto& e : r.optimal().rule) {
    if (e.lower) out << names[e.covariate] << " >= " << format_number(*e.lower) << ' ' << format_number(*e.lower_se) << '\n';
    if (e.upper) out << names[e.covariate] << " <= " << format_number(*e.upper) << ' ' << format_number(*e.upper_se) << '\n';
  }
  out << "# rule per step\n";
  for (const auto& s : r.steps) out << s.step << '\t' << rule_text(rule_conjuncts(s), names) << '\n';
}

inline void write_rules(std::ostream& out, const Coverage& cov, const std::vector<std::string>& names) {
  for (std::size_t m = 0; m < cov.boxes.size(); ++m) {
    out << "# box " << m + 1 << '\n';
    for (const auto& c : box_conjuncts(cov.boxes[m].final_box())) out << conjunct_text(c, names) << '\n';
  }
  out << "# rule\n" << cov.rule << '\n';
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace sbh
