#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbh/error.hpp"
#include "sbh/survival_data.hpp"

namespace sbh {

inline constexpr double kLhrClamp = 10.0;

struct RiskTable {
  std::vector<double> event_times;
  std::vector<std::size_t> deaths;
  std::vector<std::size_t> at_risk;
  // Group g = 1 split; empty when the table is ungrouped.
  std::vector<std::size_t> deaths_in;
  std::vector<std::size_t> at_risk_in;
  double last_time = std::numeric_limits<double>::quiet_NaN();

  std::size_t size() const { return event_times.size(); }
  bool grouped() const { return !deaths_in.empty(); }
};

/// Right-continuous step function: `initial` before the first breakpoint,
/// values[h] on [breakpoints[h], breakpoints[h+1]).
struct StepFunction {
  std::vector<double> breakpoints;
  std::vector<double> values;
  double initial = 1.0;
  double last_time = std::numeric_limits<double>::quiet_NaN();

  double at(double t) const {
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    if (it == breakpoints.begin()) return initial;
    return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
  }
};

using StepCurve = StepFunction;

struct LhrResult {
  double value = 0.0;
  bool clamped = false;  // separation or flat likelihood
};

struct KmEndPoints {
  double meft = 0.0;
  double mefp = 1.0;
  std::optional<double> eft;  // first time with S <= horizon_prob
  std::optional<double> efp;  // S at horizon_time
};

namespace detail {

struct EventBlock {
  double time;
  double d;   // deaths
  double n;   // at risk
  double d1;  // in-group deaths
  double n1;  // in-group at risk
};

/// Visits every distinct event time of an ascending sample in order.
/// `in(i)` selects group 1; at-risk counts follow n_h = #{Y >= t_h}.
template <class InGroup, class Visit>
void for_each_event_block(std::span<const double> times, std::span<const std::uint8_t> events,
                          InGroup&& in, Visit&& visit) {
  const std::size_t n = times.size();
  double total_in = 0.0;
  for (std::size_t i = 0; i < n; ++i) total_in += in(i) ? 1.0 : 0.0;
  double removed = 0.0, removed_in = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = times[i];
    double d = 0.0, d1 = 0.0, c = 0.0, c1 = 0.0;
    std::size_t j = i;
    for (; j < n && times[j] == t; ++j) {
      const bool g = in(j);
      c += 1.0;
      c1 += g ? 1.0 : 0.0;
      if (events[j]) {
        d += 1.0;
        d1 += g ? 1.0 : 0.0;
      }
    }
    if (d > 0.0) visit(EventBlock{t, d, static_cast<double>(n) - removed, d1, total_in - removed_in});
    removed += c;
    removed_in += c1;
    i = j;
  }
}

template <class InGroup>
void collect_event_blocks(std::span<const double> times, std::span<const std::uint8_t> events,
                          InGroup&& in, std::vector<EventBlock>& out) {
  out.clear();
  for_each_event_block(times, events, in, [&](const EventBlock& b) { out.push_back(b); });
}

/// Standardized log-rank statistic; positive when group 1 has excess events.
/// nullopt when the variance is zero.
template <class InGroup>
std::optional<double> log_rank(std::span<const double> times, std::span<const std::uint8_t> events,
                               InGroup&& in) {
  double num = 0.0, var = 0.0;
  for_each_event_block(times, events, in, [&](const EventBlock& b) {
    num += b.d1 - b.n1 * b.d / b.n;
    if (b.n > 1.0) {
      const double n0 = b.n - b.n1;
      var += b.n1 * n0 * b.d * (b.n - b.d) / (b.n * b.n * (b.n - 1.0));
    }
  });
  if (!(var > 0.0)) return std::nullopt;
  return num / std::sqrt(var);
}

inline double cox_score(std::span<const EventBlock> blocks, double eta) {
  const double r = std::exp(eta);
  double s = 0.0;
  for (const auto& b : blocks) {
    const double n0 = b.n - b.n1;
    s += b.d1 - b.d * b.n1 * r / (b.n1 * r + n0);
  }
  return s;
}

inline double cox_information(std::span<const EventBlock> blocks, double eta) {
  const double r = std::exp(eta);
  double info = 0.0;
  for (const auto& b : blocks) {
    const double n0 = b.n - b.n1;
    const double den = b.n1 * r + n0;
    info += b.d * b.n1 * n0 * r / (den * den);
  }
  return info;
}

/// Breslow partial log-likelihood of a single binary covariate.
inline double cox_loglik(std::span<const EventBlock> blocks, double eta) {
  const double r = std::exp(eta);
  double ll = 0.0;
  for (const auto& b : blocks) ll += b.d1 * eta - b.d * std::log(b.n1 * r + (b.n - b.n1));
  return ll;
}

inline LhrResult cox_lhr(std::span<const EventBlock> blocks) {
  if (blocks.empty() || cox_information(blocks, 0.0) == 0.0) return {0.0, true};
  if (cox_score(blocks, kLhrClamp) > 0.0) return {kLhrClamp, true};
  if (cox_score(blocks, -kLhrClamp) < 0.0) return {-kLhrClamp, true};

  double lo = -kLhrClamp, hi = kLhrClamp, eta = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    const double s = cox_score(blocks, eta);
    if (std::abs(s) < 1e-8) break;
    if (s > 0.0) lo = eta; else hi = eta;
    const double info = cox_information(blocks, eta);
    bool moved = false;
    if (info > 0.0) {
      const double ll = cox_loglik(blocks, eta);
      double step = s / info;
      for (int h = 0; h < 30; ++h, step *= 0.5) {
        const double c = eta + step;
        if (c > lo && c < hi && cox_loglik(blocks, c) >= ll) {
          eta = c;
          moved = true;
          break;
        }
      }
    }
    if (!moved) eta = 0.5 * (lo + hi);
  }
  return {eta, false};
}

/// Harrell's C error rate 1 - C for an ascending sample; nullopt without
/// permissible pairs. A pair (i, j) is permissible when Y_i < Y_j with an
/// event at i, or Y_i = Y_j with an event at i and censoring at j.
inline std::optional<double> concordance_error(std::span<const double> times,
                                               std::span<const std::uint8_t> events,
                                               std::span<const double> scores) {
  const std::size_t n = times.size();
  std::vector<double> levels(scores.begin(), scores.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i)
    rank[i] = static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), scores[i]) -
                                       levels.begin()) + 1;

  std::vector<std::size_t> tree(levels.size() + 1, 0);
  auto add = [&](std::size_t r) {
    for (; r < tree.size(); r += r & (~r + 1)) ++tree[r];
  };
  auto prefix = [&](std::size_t r) {
    std::size_t s = 0;
    for (; r > 0; r -= r & (~r + 1)) s += tree[r];
    return s;
  };

  double permissible = 0.0, concordant = 0.0;
  std::size_t inserted = 0;
  std::size_t end = n;
  while (end > 0) {
    std::size_t begin = end - 1;
    while (begin > 0 && times[begin - 1] == times[end - 1]) --begin;
    for (std::size_t i = begin; i < end; ++i)
      if (!events[i]) {
        add(rank[i]);
        ++inserted;
      }
    for (std::size_t i = begin; i < end; ++i) {
      if (!events[i]) continue;
      const std::size_t less = prefix(rank[i] - 1);
      const std::size_t equal = prefix(rank[i]) - less;
      permissible += static_cast<double>(inserted);
      concordant += static_cast<double>(less) + 0.5 * static_cast<double>(equal);
    }
    for (std::size_t i = begin; i < end; ++i)
      if (events[i]) {
        add(rank[i]);
        ++inserted;
      }
    end = begin;
  }
  if (permissible == 0.0) return std::nullopt;
  return 1.0 - concordant / permissible;
}

/// KM limit end points of group 1 of an ascending sample; nullopt when empty.
template <class InGroup>
std::optional<KmEndPoints> km_group_end_points(std::span<const double> times,
                                               std::span<const std::uint8_t> events,
                                               InGroup&& in) {
  const std::size_t n = times.size();
  double at_risk = 0.0;
  double last = -1.0;
  for (std::size_t i = 0; i < n; ++i)
    if (in(i)) {
      at_risk += 1.0;
      last = times[i];
    }
  if (at_risk == 0.0) return std::nullopt;
  double s = 1.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = times[i];
    double d = 0.0, c = 0.0;
    for (; i < n && times[i] == t; ++i)
      if (in(i)) {
        c += 1.0;
        d += events[i] ? 1.0 : 0.0;
      }
    if (d > 0.0) s *= 1.0 - d / at_risk;
    at_risk -= c;
  }
  return KmEndPoints{last, s, std::nullopt, std::nullopt};
}

struct SortedCopy {
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<std::uint8_t> group;
  std::vector<double> scores;
};

inline SortedCopy sorted_copy(const SurvivalData& data, std::span<const std::uint8_t> group,
                              std::span<const double> scores = {}) {
  const auto order = time_order(data.times);
  SortedCopy out;
  out.times.reserve(order.size());
  for (std::size_t i : order) {
    out.times.push_back(data.times[i]);
    out.events.push_back(data.events[i]);
    if (!group.empty()) out.group.push_back(group[i]);
    if (!scores.empty()) out.scores.push_back(scores[i]);
  }
  return out;
}

inline void check_group(const SurvivalData& data, std::span<const std::uint8_t> group) {
  require(group.size() == data.n(), ErrorCode::InvalidArgument, "group length differs from n");
  for (auto g : group) require(g <= 1, ErrorCode::InvalidArgument, "group values must be 0/1");
}

}  // namespace detail

inline RiskTable build_risk_table(const SurvivalData& data, std::span<const std::uint8_t> group = {}) {
  require(data.event_count() > 0, ErrorCode::NoEvents, "no events in data");
  if (!group.empty()) detail::check_group(data, group);
  const auto s = detail::sorted_copy(data, group);
  RiskTable table;
  table.last_time = s.times.back();
  auto in = [&](std::size_t i) { return !s.group.empty() && s.group[i] == 1; };
  detail::for_each_event_block(s.times, s.events, in, [&](const detail::EventBlock& b) {
    table.event_times.push_back(b.time);
    table.deaths.push_back(static_cast<std::size_t>(b.d));
    table.at_risk.push_back(static_cast<std::size_t>(b.n));
    if (!group.empty()) {
      table.deaths_in.push_back(static_cast<std::size_t>(b.d1));
      table.at_risk_in.push_back(static_cast<std::size_t>(b.n1));
    }
  });
  return table;
}

inline StepFunction kaplan_meier(const RiskTable& table) {
  StepFunction curve;
  curve.initial = 1.0;
  curve.last_time = table.last_time;
  double s = 1.0;
  for (std::size_t h = 0; h < table.size(); ++h) {
    s *= 1.0 - static_cast<double>(table.deaths[h]) / static_cast<double>(table.at_risk[h]);
    curve.breakpoints.push_back(table.event_times[h]);
    curve.values.push_back(s);
  }
  return curve;
}

inline StepFunction nelson_aalen(const RiskTable& table) {
  StepFunction curve;
  curve.initial = 0.0;
  curve.last_time = table.last_time;
  double h_sum = 0.0;
  for (std::size_t h = 0; h < table.size(); ++h) {
    h_sum += static_cast<double>(table.deaths[h]) / static_cast<double>(table.at_risk[h]);
    curve.breakpoints.push_back(table.event_times[h]);
    curve.values.push_back(h_sum);
  }
  return curve;
}

inline double log_rank_statistic(const SurvivalData& data, std::span<const std::uint8_t> in_box) {
  detail::check_group(data, in_box);
  require(data.event_count() > 0, ErrorCode::NoEvents, "no events in data");
  const auto s = detail::sorted_copy(data, in_box);
  const auto z = detail::log_rank(s.times, s.events, [&](std::size_t i) { return s.group[i] == 1; });
  if (!z) throw Error(ErrorCode::DegenerateVariance, "log-rank variance is zero");
  return *z;
}

/// Sum over in-box observations of the in-box Nelson-Aalen estimate at Y_i.
inline double chs_statistic(const SurvivalData& data, std::span<const std::uint8_t> in_box) {
  detail::check_group(data, in_box);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.n(); ++i)
    if (in_box[i]) rows.push_back(i);
  require(!rows.empty(), ErrorCode::InvalidArgument, "in-box group is empty");
  std::stable_sort(rows.begin(), rows.end(),
                   [&](std::size_t a, std::size_t b) { return data.times[a] < data.times[b]; });

  double hazard = 0.0, total = 0.0;
  std::size_t events = 0;
  std::size_t i = 0;
  const std::size_t m = rows.size();
  while (i < m) {
    const double t = data.times[rows[i]];
    std::size_t j = i, d = 0;
    for (; j < m && data.times[rows[j]] == t; ++j) d += data.events[rows[j]];
    hazard += static_cast<double>(d) / static_cast<double>(m - i);
    total += static_cast<double>(j - i) * hazard;
    events += d;
    i = j;
  }
  const double count = static_cast<double>(events);
  if (std::abs(total - count) > 1e-9 * std::max(1.0, count))
    throw Error(ErrorCode::Internal, "cumulative hazard summary does not match event count");
  return count;
}

inline LhrResult cox_lhr(const SurvivalData& data, std::span<const std::uint8_t> in_box) {
  detail::check_group(data, in_box);
  require(data.event_count() > 0, ErrorCode::NoEvents, "no events in data");
  const auto s = detail::sorted_copy(data, in_box);
  std::vector<detail::EventBlock> blocks;
  detail::collect_event_blocks(s.times, s.events, [&](std::size_t i) { return s.group[i] == 1; },
                               blocks);
  return detail::cox_lhr(blocks);
}

inline double concordance_error_rate(const SurvivalData& data, std::span<const double> risk_score) {
  require(risk_score.size() == data.n(), ErrorCode::InvalidArgument,
          "risk score length differs from n");
  const auto s = detail::sorted_copy(data, {}, risk_score);
  const auto cer = detail::concordance_error(s.times, s.events, s.scores);
  if (!cer) throw Error(ErrorCode::NoPermissiblePairs, "no permissible pairs");
  return *cer;
}

inline KmEndPoints km_end_points(const StepFunction& curve,
                                 std::optional<double> horizon_time = std::nullopt,
                                 std::optional<double> horizon_prob = std::nullopt) {
  KmEndPoints out;
  if (!std::isnan(curve.last_time)) out.meft = curve.last_time;
  else if (!curve.breakpoints.empty()) out.meft = curve.breakpoints.back();
  out.mefp = curve.at(out.meft);
  if (horizon_prob) {
    for (std::size_t h = 0; h < curve.values.size(); ++h)
      if (curve.breakpoints[h] <= out.meft && curve.values[h] <= *horizon_prob) {
        out.eft = curve.breakpoints[h];
        break;
      }
  }
  if (horizon_time && *horizon_time <= out.meft) out.efp = curve.at(*horizon_time);
  return out;
}

}  // namespace sbh
