#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbh/survival.hpp"
#include "sbh/survival_data.hpp"

namespace sbh {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Side { Lower, Upper };

inline const char* to_string(Side s) { return s == Side::Lower ? "lower" : "upper"; }

/// Closed hyper-rectangle; unpeeled faces are infinite.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  static Box unbounded(std::size_t p) { return {std::vector<double>(p, -kInf), std::vector<double>(p, kInf)}; }

  std::size_t p() const { return lower.size(); }

  bool contains(const SurvivalData& data, std::size_t i) const {
    for (std::size_t j = 0; j < lower.size(); ++j) {
      const double v = data.x(i, j);
      if (v < lower[j] || v > upper[j]) return false;
    }
    return true;
  }

  Mask membership(const SurvivalData& data) const {
    Mask m(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) m[i] = contains(data, i) ? 1 : 0;
    return m;
  }

  bool bounded(std::size_t j) const { return std::isfinite(lower[j]) || std::isfinite(upper[j]); }

  bool operator==(const Box&) const = default;
};

struct CovariateRange {
  std::vector<double> min;
  std::vector<double> max;
};

inline CovariateRange covariate_range(const SurvivalData& data) {
  CovariateRange r{std::vector<double>(data.p(), kInf), std::vector<double>(data.p(), -kInf)};
  for (std::size_t j = 0; j < data.p(); ++j)
    for (double v : data.column(j)) {
      r.min[j] = std::min(r.min[j], v);
      r.max[j] = std::max(r.max[j], v);
    }
  return r;
}

/// Replaces infinite faces by the given range.
inline Box clamp_box(const Box& box, const CovariateRange& range) {
  Box out = box;
  for (std::size_t j = 0; j < box.p(); ++j) {
    if (!std::isfinite(out.lower[j])) out.lower[j] = range.min[j];
    if (!std::isfinite(out.upper[j])) out.upper[j] = range.max[j];
  }
  return out;
}

/// Box statistics of a two-group split; missing when undefined.
struct EndPoints {
  std::optional<double> lhr;
  bool lhr_clamped = false;
  std::optional<double> lrt;
  std::optional<double> cer;
  std::optional<double> meft;
  std::optional<double> mefp;
};

/// Conventional statistics of the unpeeled box: LHR 0, LRT 0, CER 1 and the
/// KM limit end points of the whole sample.
inline EndPoints full_box_end_points(std::span<const double> times, std::span<const std::uint8_t> events) {
  EndPoints e;
  e.lhr = 0.0;
  e.lrt = 0.0;
  e.cer = 1.0;
  if (auto km = detail::km_group_end_points(times, events, [](std::size_t) { return true; })) {
    e.meft = km->meft;
    e.mefp = km->mefp;
  }
  return e;
}

/// Statistics of group 1 versus the rest for an ascending sample. The CER
/// score is the membership indicator.
template <class InGroup>
EndPoints split_end_points(std::span<const double> times, std::span<const std::uint8_t> events, InGroup&& in) {
  EndPoints e;
  const std::size_t n = times.size();
  std::size_t n_in = 0;
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = in(i) ? 1.0 : 0.0;
    n_in += in(i) ? 1 : 0;
  }
  if (auto km = detail::km_group_end_points(times, events, in)) {
    e.meft = km->meft;
    e.mefp = km->mefp;
  }
  if (n_in == 0) return e;
  e.cer = detail::concordance_error(times, events, scores);
  if (n_in == n) return e;
  e.lrt = detail::log_rank(times, events, in);
  std::vector<detail::EventBlock> blocks;
  detail::collect_event_blocks(times, events, in, blocks);
  if (!blocks.empty()) {
    const auto lhr = detail::cox_lhr(blocks);
    e.lhr = lhr.value;
    e.lhr_clamped = lhr.clamped;
  }
  return e;
}

/// Statistics of `membership` over a dataset in its original order.
inline EndPoints box_end_points(const SurvivalData& data, std::span<const std::uint8_t> membership) {
  const auto s = detail::sorted_copy(data, membership);
  return split_end_points(s.times, s.events, [&](std::size_t i) { return s.group[i] == 1; });
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Conjunct {
  std::size_t covariate = 0;
  std::optional<double> lower;
  std::optional<double> upper;
};

/// One conjunct per bounded covariate, in covariate order.
inline std::vector<Conjunct> box_conjuncts(const Box& box) {
  std::vector<Conjunct> out;
  for (std::size_t j = 0; j < box.p(); ++j) {
    if (!box.bounded(j)) continue;
    Conjunct c{j, std::nullopt, std::nullopt};
    if (std::isfinite(box.lower[j])) c.lower = box.lower[j];
    if (std::isfinite(box.upper[j])) c.upper = box.upper[j];
    out.push_back(c);
  }
  return out;
}

inline std::string conjunct_text(const Conjunct& c, const std::vector<std::string>& names) {
  const std::string& name = names[c.covariate];
  if (c.lower && c.upper) return format_number(*c.lower) + " <= " + name + " <= " + format_number(*c.upper);
  if (c.lower) return name + " >= " + format_number(*c.lower);
  return name + " <= " + format_number(*c.upper);
}

/// Canonical rule text, e.g. "x1 >= 0.5 AND x2 <= 0.25"; "TRUE" for the full box.
inline std::string rule_text(std::span<const Conjunct> conjuncts, const std::vector<std::string>& names) {
  if (conjuncts.empty()) return "TRUE";
  std::string out;
  for (std::size_t k = 0; k < conjuncts.size(); ++k) {
    if (k) out += " AND ";
    out += conjunct_text(conjuncts[k], names);
  }
  return out;
}

inline std::string rule_text(const Box& box, const std::vector<std::string>& names) {
  return rule_text(box_conjuncts(box), names);
}

}  // namespace sbh
