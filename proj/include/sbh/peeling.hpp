#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbh/box.hpp"
#include "sbh/error.hpp"
#include "sbh/survival.hpp"
#include "sbh/survival_data.hpp"

namespace sbh {

enum class Criterion { LRT, CHS, LHR };
enum class AllowedSides { Both, LowerOnly, UpperOnly };

inline const char* to_string(Criterion c) {
  switch (c) {
    case Criterion::LRT: return "lrt";
    case Criterion::CHS: return "chs";
    case Criterion::LHR: return "lhr";
  }
  return "?";
}

/// Upper bound on the number of peels: ceil(log beta0 / log(1 - alpha0)).
inline std::size_t max_peeling_length(double alpha0, double beta0) {
  return static_cast<std::size_t>(std::ceil(std::log(beta0) / std::log1p(-alpha0) - 1e-9));
}

struct PeelConfig {
  double alpha0 = 0.10;
  double beta0 = 0.05;
  Criterion criterion = Criterion::LRT;
  bool pasting = false;
  // Per-covariate side table for directed peeling; empty means free peeling.
  std::vector<AllowedSides> sides;
  std::optional<std::size_t> max_steps;

  bool allows(std::size_t j, Side side) const {
    if (sides.empty()) return true;
    const AllowedSides a = sides[j];
    return a == AllowedSides::Both || (side == Side::Lower) == (a == AllowedSides::LowerOnly);
  }

  std::size_t step_cap() const {
    const std::size_t bound = max_peeling_length(alpha0, beta0);
    return max_steps ? std::min(*max_steps, bound) : bound;
  }

  void validate(std::size_t p) const {
    require(alpha0 > 0.0 && alpha0 < 1.0, ErrorCode::InvalidArgument, "alpha0 must lie in (0, 1)");
    require(beta0 > 0.0 && beta0 < 1.0, ErrorCode::InvalidArgument, "beta0 must lie in (0, 1)");
    require(sides.empty() || sides.size() == p, ErrorCode::InvalidArgument,
            "directed side table must have one entry per covariate");
    if (max_steps)
      require(*max_steps <= max_peeling_length(alpha0, beta0), ErrorCode::InvalidArgument,
              "max_steps exceeds the peeling length bound");
  }
};

struct StepRecord {
  std::size_t step = 0;
  Box box;
  double support = 1.0;
  std::size_t n_in = 0;
  std::optional<std::size_t> peeled_covariate;
  std::optional<Side> peeled_side;
  double criterion_value = 0.0;
  double rate = 0.0;
  EndPoints end_points;
  bool pasted = false;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  std::vector<std::optional<std::size_t>> trace_usage;  // VU, one entry per step
  std::vector<std::vector<double>> trace_importance;    // VI[j][step]
  CovariateRange range;                                 // active data range
  std::vector<std::size_t> active;                      // rows the box was grown on
  bool empty = false;                                   // no peel was possible

  std::size_t length() const { return steps.size() - 1; }
  const Box& final_box() const { return steps.back().box; }
};

struct CandidatePeel {
  std::size_t covariate;
  Side side;
  double bound;
  Mask membership;  // over the active rows, in active order
};

namespace detail {

/// Active rows copied and sorted by time, covariates column-major.
struct PeelWorkspace {
  std::size_t m = 0;
  std::size_t p = 0;
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<double> x;
  std::vector<std::size_t> rows;
  std::vector<std::size_t> position;  // workspace index of active[k]

  double at(std::size_t i, std::size_t j) const { return x[j * m + i]; }
};

inline PeelWorkspace make_workspace(const SurvivalData& data, std::span<const std::size_t> active) {
  PeelWorkspace ws;
  ws.m = active.size();
  ws.p = data.p();
  std::vector<std::size_t> order(ws.m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.times[active[a]] < data.times[active[b]];
  });
  ws.times.resize(ws.m);
  ws.events.resize(ws.m);
  ws.rows.resize(ws.m);
  ws.position.resize(ws.m);
  ws.x.resize(ws.m * ws.p);
  for (std::size_t i = 0; i < ws.m; ++i) {
    const std::size_t r = active[order[i]];
    ws.times[i] = data.times[r];
    ws.events[i] = data.events[r];
    ws.rows[i] = r;
    ws.position[order[i]] = i;
    for (std::size_t j = 0; j < ws.p; ++j) ws.x[j * ws.m + i] = data.x(r, j);
  }
  return ws;
}

template <class InGroup>
std::optional<double> criterion_value(const PeelWorkspace& ws, Criterion c, InGroup&& in,
                                      std::vector<EventBlock>& scratch) {
  switch (c) {
    case Criterion::LRT:
      return log_rank(ws.times, ws.events, in);
    case Criterion::CHS: {
      double events = 0.0;
      for (std::size_t i = 0; i < ws.m; ++i)
        if (in(i) && ws.events[i]) events += 1.0;
      return events;
    }
    case Criterion::LHR:
      collect_event_blocks(ws.times, ws.events, in, scratch);
      if (scratch.empty()) return std::nullopt;
      return cox_lhr(scratch).value;
  }
  return std::nullopt;
}

inline double initial_criterion(const PeelWorkspace& ws, Criterion c) {
  if (c != Criterion::CHS) return 0.0;
  return static_cast<double>(std::count(ws.events.begin(), ws.events.end(), 1));
}

/// Quantile peel of one face: the cut value q is the ceil(alpha0 k)-th order
/// statistic from the peeled side; every in-box value at or beyond q leaves.
struct FaceCut {
  double cut;
  double bound;
};

inline std::optional<FaceCut> face_cut(const PeelWorkspace& ws, std::span<const std::uint8_t> inbox,
                                       std::size_t j, Side side, double alpha0,
                                       std::vector<double>& scratch) {
  scratch.clear();
  for (std::size_t i = 0; i < ws.m; ++i)
    if (inbox[i]) scratch.push_back(ws.at(i, j));
  const std::size_t k = scratch.size();
  if (k < 2) return std::nullopt;
  const auto r = static_cast<std::size_t>(
      std::max(1.0, std::ceil(alpha0 * static_cast<double>(k) - 1e-9)));
  if (side == Side::Lower) {
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(r - 1), scratch.end());
    const double q = scratch[r - 1];
    double bound = kInf;
    for (double v : scratch)
      if (v > q) bound = std::min(bound, v);
    if (!std::isfinite(bound)) return std::nullopt;
    return FaceCut{q, bound};
  }
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - r), scratch.end());
  const double q = scratch[k - r];
  double bound = -kInf;
  for (double v : scratch)
    if (v < q) bound = std::max(bound, v);
  if (!std::isfinite(bound)) return std::nullopt;
  return FaceCut{q, bound};
}

inline bool keeps(double v, Side side, double cut) { return side == Side::Lower ? v > cut : v < cut; }

struct Choice {
  std::size_t covariate;
  Side side;
  double bound;
  double cut;
  double z;
  double rate;
  std::size_t n_in;
};

inline std::optional<Choice> best_peel(const PeelWorkspace& ws, std::span<const std::uint8_t> inbox,
                                       std::size_t n_in, double z_prev, const PeelConfig& config,
                                       std::vector<double>& values, std::vector<EventBlock>& blocks) {
  const double m = static_cast<double>(ws.m);
  const double beta_prev = static_cast<double>(n_in) / m;
  std::optional<Choice> best;
  for (std::size_t j = 0; j < ws.p; ++j) {
    for (Side side : {Side::Lower, Side::Upper}) {
      if (!config.allows(j, side)) continue;
      const auto cut = face_cut(ws, inbox, j, side, config.alpha0, values);
      if (!cut) continue;
      const double* col = ws.x.data() + j * ws.m;
      auto in = [&](std::size_t i) { return inbox[i] && keeps(col[i], side, cut->cut); };
      std::size_t kept = 0, kept_events = 0;
      for (std::size_t i = 0; i < ws.m; ++i)
        if (in(i)) {
          ++kept;
          kept_events += ws.events[i];
        }
      if (kept == 0 || kept == n_in || kept_events == 0) continue;
      const double beta = static_cast<double>(kept) / m;
      if (beta < config.beta0 || beta_prev - beta <= 0.0) continue;
      const auto z = criterion_value(ws, config.criterion, in, blocks);
      if (!z) continue;
      const double rate = (*z - z_prev) / (beta_prev - beta);
      if (std::isnan(rate)) continue;
      if (!best || rate > best->rate) best = Choice{j, side, cut->bound, cut->cut, *z, rate, kept};
    }
  }
  return best;
}

/// Bottom-up pasting of the final box; returns true when any slab was added.
inline bool paste(const PeelWorkspace& ws, Mask& inbox, Box& box, std::size_t& n_in, double& z,
                  double support_ceiling, const PeelConfig& config, std::vector<EventBlock>& blocks) {
  const double m = static_cast<double>(ws.m);
  bool any = false;
  std::vector<double> slab;
  for (;;) {
    struct Paste {
      std::size_t covariate;
      Side side;
      double bound;
      double z;
      double rate;
      std::size_t n_in;
    };
    std::optional<Paste> best;
    const double beta = static_cast<double>(n_in) / m;
    for (std::size_t j = 0; j < ws.p; ++j) {
      for (Side side : {Side::Lower, Side::Upper}) {
        const double face = side == Side::Lower ? box.lower[j] : box.upper[j];
        if (!std::isfinite(face)) continue;
        // Excluded rows that fail only this face.
        auto outside_face_only = [&](std::size_t i) {
          const double v = ws.at(i, j);
          if (side == Side::Lower ? v >= face : v <= face) return false;
          for (std::size_t l = 0; l < ws.p; ++l) {
            if (l == j) continue;
            const double w = ws.at(i, l);
            if (w < box.lower[l] || w > box.upper[l]) return false;
          }
          return true;
        };
        slab.clear();
        for (std::size_t i = 0; i < ws.m; ++i)
          if (outside_face_only(i)) slab.push_back(ws.at(i, j));
        if (slab.empty()) continue;
        const std::size_t k = slab.size();
        const auto r = static_cast<std::size_t>(
            std::max(1.0, std::ceil(config.alpha0 * static_cast<double>(k) - 1e-9)));
        double bound;
        if (side == Side::Lower) {
          std::nth_element(slab.begin(), slab.begin() + static_cast<std::ptrdiff_t>(k - r), slab.end());
          bound = slab[k - r];
        } else {
          std::nth_element(slab.begin(), slab.begin() + static_cast<std::ptrdiff_t>(r - 1), slab.end());
          bound = slab[r - 1];
        }
        auto in = [&](std::size_t i) {
          if (inbox[i]) return true;
          const double v = ws.at(i, j);
          const bool within = side == Side::Lower ? v >= bound : v <= bound;
          return within && outside_face_only(i);
        };
        std::size_t count = 0;
        for (std::size_t i = 0; i < ws.m; ++i) count += in(i) ? 1 : 0;
        const double beta_new = static_cast<double>(count) / m;
        if (beta_new >= support_ceiling || beta_new <= beta) continue;
        const auto z_new = criterion_value(ws, config.criterion, in, blocks);
        if (!z_new) continue;
        const double rate = (*z_new - z) / (beta_new - beta);
        if (!(rate > 0.0)) continue;
        if (!best || rate > best->rate) best = Paste{j, side, bound, *z_new, rate, count};
      }
    }
    if (!best) return any;
    const std::size_t j = best->covariate;
    for (std::size_t i = 0; i < ws.m; ++i) {
      if (inbox[i]) continue;
      const double v = ws.at(i, j);
      const bool within = best->side == Side::Lower ? v >= best->bound : v <= best->bound;
      bool others = true;
      for (std::size_t l = 0; l < ws.p && others; ++l) {
        if (l == j) continue;
        const double w = ws.at(i, l);
        others = w >= box.lower[l] && w <= box.upper[l];
      }
      if (within && others) inbox[i] = 1;
    }
    if (best->side == Side::Lower) box.lower[j] = best->bound;
    else box.upper[j] = best->bound;
    n_in = best->n_in;
    z = best->z;
    any = true;
  }
}

inline Mask to_active_order(const PeelWorkspace& ws, std::span<const std::uint8_t> inbox) {
  Mask out(ws.m);
  for (std::size_t k = 0; k < ws.m; ++k) out[k] = inbox[ws.position[k]];
  return out;
}

}  // namespace detail

inline std::vector<std::size_t> all_rows(const SurvivalData& data) {
  std::vector<std::size_t> rows(data.n());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

/// Eligible quantile peels of `box` over the active rows.
inline std::vector<CandidatePeel> candidate_peels(const SurvivalData& data,
                                                  std::span<const std::size_t> active, const Box& box,
                                                  const PeelConfig& config) {
  require(!active.empty(), ErrorCode::InvalidArgument, "active set is empty");
  config.validate(data.p());
  const auto ws = detail::make_workspace(data, active);
  Mask inbox(ws.m);
  std::size_t n_in = 0;
  for (std::size_t i = 0; i < ws.m; ++i) {
    inbox[i] = box.contains(data, ws.rows[i]) ? 1 : 0;
    n_in += inbox[i];
  }
  std::vector<CandidatePeel> out;
  std::vector<double> values;
  for (std::size_t j = 0; j < ws.p; ++j)
    for (Side side : {Side::Lower, Side::Upper}) {
      if (!config.allows(j, side)) continue;
      const auto cut = detail::face_cut(ws, inbox, j, side, config.alpha0, values);
      if (!cut) continue;
      Mask member(ws.m);
      std::size_t kept = 0, kept_events = 0;
      for (std::size_t i = 0; i < ws.m; ++i) {
        member[i] = inbox[i] && detail::keeps(ws.at(i, j), side, cut->cut);
        kept += member[i];
        kept_events += member[i] && ws.events[i];
      }
      if (kept == 0 || kept == n_in || kept_events == 0) continue;
      if (static_cast<double>(kept) / static_cast<double>(ws.m) < config.beta0) continue;
      out.push_back({j, side, cut->bound, detail::to_active_order(ws, member)});
    }
  if (out.empty()) throw Error(ErrorCode::NoCandidates, "no eligible peel");
  return out;
}

/// VU and VI traces; VI is the signed fraction of the active range peeled,
/// positive when the first peel on the covariate took the lower side.
inline void trace_statistics(Trajectory& t) {
  const std::size_t p = t.range.min.size();
  const std::size_t steps = t.steps.size();
  t.trace_usage.assign(steps, std::nullopt);
  t.trace_importance.assign(p, std::vector<double>(steps, 0.0));
  std::vector<double> sign(p, 0.0);
  for (std::size_t l = 1; l < steps; ++l) {
    const auto& rec = t.steps[l];
    t.trace_usage[l] = rec.peeled_covariate;
    if (rec.peeled_covariate && sign[*rec.peeled_covariate] == 0.0)
      sign[*rec.peeled_covariate] = rec.peeled_side == Side::Lower ? 1.0 : -1.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double width = t.range.max[j] - t.range.min[j];
      if (!(width > 0.0) || sign[j] == 0.0) continue;
      double frac = 0.0;
      if (std::isfinite(rec.box.lower[j])) frac += (rec.box.lower[j] - t.range.min[j]) / width;
      if (std::isfinite(rec.box.upper[j])) frac += (t.range.max[j] - rec.box.upper[j]) / width;
      t.trace_importance[j][l] = sign[j] * std::clamp(frac, 0.0, 1.0);
    }
  }
}

namespace detail {

/// `with_end_points` false skips the per-step box statistics (cross-validation
/// training fits only need the boxes).
inline Trajectory grow_trajectory(const SurvivalData& data, std::span<const std::size_t> active,
                                  const PeelConfig& config, bool with_end_points) {
  config.validate(data.p());
  require(!active.empty(), ErrorCode::InvalidArgument, "active set is empty");
  auto ws = detail::make_workspace(data, active);

  Trajectory t;
  t.active.assign(active.begin(), active.end());
  t.range = {std::vector<double>(ws.p, kInf), std::vector<double>(ws.p, -kInf)};
  for (std::size_t j = 0; j < ws.p; ++j)
    for (std::size_t i = 0; i < ws.m; ++i) {
      t.range.min[j] = std::min(t.range.min[j], ws.at(i, j));
      t.range.max[j] = std::max(t.range.max[j], ws.at(i, j));
    }

  StepRecord s0;
  s0.box = Box::unbounded(ws.p);
  s0.n_in = ws.m;
  s0.criterion_value = detail::initial_criterion(ws, config.criterion);
  if (with_end_points) s0.end_points = full_box_end_points(ws.times, ws.events);
  t.steps.push_back(s0);

  const bool has_events = std::find(ws.events.begin(), ws.events.end(), 1) != ws.events.end();
  Mask inbox(ws.m, 1);
  std::size_t n_in = ws.m;
  double z = s0.criterion_value;
  Box box = s0.box;
  std::vector<double> values;
  std::vector<detail::EventBlock> blocks;
  const std::size_t cap = has_events ? config.step_cap() : 0;

  for (std::size_t l = 1; l <= cap; ++l) {
    const auto choice = detail::best_peel(ws, inbox, n_in, z, config, values, blocks);
    if (!choice) break;
    const double* col = ws.x.data() + choice->covariate * ws.m;
    for (std::size_t i = 0; i < ws.m; ++i)
      if (inbox[i] && !detail::keeps(col[i], choice->side, choice->cut)) inbox[i] = 0;
    if (choice->side == Side::Lower) box.lower[choice->covariate] = choice->bound;
    else box.upper[choice->covariate] = choice->bound;
    n_in = choice->n_in;
    z = choice->z;

    StepRecord rec;
    rec.step = l;
    rec.box = box;
    rec.n_in = n_in;
    rec.support = static_cast<double>(n_in) / static_cast<double>(ws.m);
    rec.peeled_covariate = choice->covariate;
    rec.peeled_side = choice->side;
    rec.criterion_value = z;
    rec.rate = choice->rate;
    if (with_end_points)
      rec.end_points = split_end_points(ws.times, ws.events, [&](std::size_t i) { return inbox[i] == 1; });
    t.steps.push_back(std::move(rec));
  }

  if (t.steps.size() == 1) t.empty = true;

  if (config.pasting && t.steps.size() > 1) {
    const double ceiling = t.steps[t.steps.size() - 2].support;
    double z_pasted = z;
    if (detail::paste(ws, inbox, box, n_in, z_pasted, ceiling, config, blocks)) {
      auto& rec = t.steps.back();
      rec.box = box;
      rec.n_in = n_in;
      rec.support = static_cast<double>(n_in) / static_cast<double>(ws.m);
      const double prev_beta = ceiling;
      const double prev_z = t.steps[t.steps.size() - 2].criterion_value;
      rec.criterion_value = z_pasted;
      rec.rate = (z_pasted - prev_z) / (prev_beta - rec.support);
      if (with_end_points)
        rec.end_points = split_end_points(ws.times, ws.events, [&](std::size_t i) { return inbox[i] == 1; });
      rec.pasted = true;
    }
  }

  trace_statistics(t);
  return t;
}

}  // namespace detail

/// Top-down peeling (then optional pasting) from the unbounded box.
inline Trajectory peel_trajectory(const SurvivalData& data, std::span<const std::size_t> active,
                                  const PeelConfig& config) {
  return detail::grow_trajectory(data, active, config, true);
}

inline Trajectory peel_trajectory(const SurvivalData& data, const PeelConfig& config) {
  const auto rows = all_rows(data);
  return peel_trajectory(data, rows, config);
}

/// One top-down step from `box` over the active rows; throws NoCandidates.
inline StepRecord peel_step(const SurvivalData& data, std::span<const std::size_t> active, const Box& box,
                            double previous_z, const PeelConfig& config) {
  config.validate(data.p());
  const auto ws = detail::make_workspace(data, active);
  Mask inbox(ws.m);
  std::size_t n_in = 0;
  for (std::size_t i = 0; i < ws.m; ++i) {
    inbox[i] = box.contains(data, ws.rows[i]) ? 1 : 0;
    n_in += inbox[i];
  }
  std::vector<double> values;
  std::vector<detail::EventBlock> blocks;
  const auto choice = detail::best_peel(ws, inbox, n_in, previous_z, config, values, blocks);
  if (!choice) throw Error(ErrorCode::NoCandidates, "no eligible peel");
  StepRecord rec;
  rec.box = box;
  if (choice->side == Side::Lower) rec.box.lower[choice->covariate] = choice->bound;
  else rec.box.upper[choice->covariate] = choice->bound;
  for (std::size_t i = 0; i < ws.m; ++i)
    if (inbox[i] && !detail::keeps(ws.at(i, choice->covariate), choice->side, choice->cut)) inbox[i] = 0;
  rec.n_in = choice->n_in;
  rec.support = static_cast<double>(choice->n_in) / static_cast<double>(ws.m);
  rec.peeled_covariate = choice->covariate;
  rec.peeled_side = choice->side;
  rec.criterion_value = choice->z;
  rec.rate = choice->rate;
  rec.end_points = split_end_points(ws.times, ws.events, [&](std::size_t i) { return inbox[i] == 1; });
  return rec;
}

/// Pasting of `box` over the active rows; nullopt when nothing is added.
inline std::optional<StepRecord> paste_step(const SurvivalData& data, std::span<const std::size_t> active,
                                            const Box& box, double current_z, double support_ceiling,
                                            const PeelConfig& config) {
  config.validate(data.p());
  const auto ws = detail::make_workspace(data, active);
  Mask inbox(ws.m);
  std::size_t n_in = 0;
  for (std::size_t i = 0; i < ws.m; ++i) {
    inbox[i] = box.contains(data, ws.rows[i]) ? 1 : 0;
    n_in += inbox[i];
  }
  Box pasted = box;
  double z = current_z;
  std::vector<detail::EventBlock> blocks;
  if (!detail::paste(ws, inbox, pasted, n_in, z, support_ceiling, config, blocks)) return std::nullopt;
  StepRecord rec;
  rec.box = pasted;
  rec.n_in = n_in;
  rec.support = static_cast<double>(n_in) / static_cast<double>(ws.m);
  rec.criterion_value = z;
  rec.end_points = split_end_points(ws.times, ws.events, [&](std::size_t i) { return inbox[i] == 1; });
  rec.pasted = true;
  return rec;
}

struct Coverage {
  std::vector<Trajectory> boxes;
  // Box index (0-based) per observation, or -1 when outside every box.
  std::vector<int> assignment;
  std::string rule;
};

/// Grows up to M boxes, each on the rows not covered by the earlier ones.
inline Coverage coverage_loop(const SurvivalData& data, const PeelConfig& config, std::size_t max_boxes) {
  require(max_boxes >= 1, ErrorCode::InvalidArgument, "M must be at least 1");
  Coverage cov;
  cov.assignment.assign(data.n(), -1);
  std::vector<std::size_t> active = all_rows(data);
  const double n = static_cast<double>(data.n());
  for (std::size_t m = 0; m < max_boxes; ++m) {
    if (active.empty()) break;
    std::size_t events = 0;
    for (std::size_t r : active) events += data.events[r];
    if (m > 0 && (static_cast<double>(active.size()) / n <= config.beta0 || events == 0)) break;
    Trajectory t = peel_trajectory(data, active, config);
    const Box& box = t.final_box();
    std::vector<std::size_t> remaining;
    for (std::size_t r : active) {
      if (box.contains(data, r)) cov.assignment[r] = static_cast<int>(m);
      else remaining.push_back(r);
    }
    active = std::move(remaining);
    cov.boxes.push_back(std::move(t));
  }
  for (std::size_t m = 0; m < cov.boxes.size(); ++m) {
    if (m) cov.rule += " OR ";
    const std::string r = rule_text(cov.boxes[m].final_box(), data.covariate_names);
    cov.rule += cov.boxes.size() > 1 ? "(" + r + ")" : r;
  }
  return cov;
}

}  // namespace sbh
