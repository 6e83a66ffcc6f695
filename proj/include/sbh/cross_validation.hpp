#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbh/box.hpp"
#include "sbh/error.hpp"
#include "sbh/parallel.hpp"
#include "sbh/peeling.hpp"
#include "sbh/random.hpp"
#include "sbh/survival.hpp"
#include "sbh/survival_data.hpp"

namespace sbh {

enum class Technique { Averaged, Combined, None };
enum class OptCriterion { LHR, LRT, CER };
/// Scale of the cross-validated log-rank statistic: z squared or signed z.
enum class LrtScale { ChiSquare, Signed };

inline const char* to_string(Technique t) {
  switch (t) {
    case Technique::Averaged: return "averaged";
    case Technique::Combined: return "combined";
    case Technique::None: return "none";
  }
  return "?";
}

inline const char* to_string(LrtScale s) { return s == LrtScale::ChiSquare ? "chisq" : "signed"; }

inline const char* to_string(OptCriterion c) {
  switch (c) {
    case OptCriterion::LHR: return "lhr";
    case OptCriterion::LRT: return "lrt";
    case OptCriterion::CER: return "cer";
  }
  return "?";
}

struct CvConfig {
  std::size_t K = 5;
  std::size_t B = 16;
  std::size_t A = 256;
  Technique technique = Technique::Combined;
  OptCriterion opt = OptCriterion::LRT;
  LrtScale lrt_scale = LrtScale::ChiSquare;
  bool one_se = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  std::size_t replicates() const { return technique == Technique::None ? 1 : B; }

  void validate() const {
    if (technique != Technique::None) require(K >= 2, ErrorCode::InvalidArgument, "K must be at least 2");
    require(B >= 1, ErrorCode::InvalidArgument, "B must be at least 1");
    require(A >= 1, ErrorCode::InvalidArgument, "A must be at least 1");
  }
};

struct FoldAssignment {
  std::vector<std::size_t> fold_of;
  std::size_t K = 1;
  Warnings warnings;
};

/// Events and censored rows are shuffled separately and dealt round-robin,
/// the censored deal continuing where the events stopped.
inline FoldAssignment stratified_kfold(const SurvivalData& data, std::size_t K, std::uint64_t seed) {
  require(K >= 1, ErrorCode::InvalidArgument, "K must be positive");
  FoldAssignment f;
  f.K = K;
  f.fold_of.assign(data.n(), 0);
  std::vector<std::size_t> events, censored;
  for (std::size_t i = 0; i < data.n(); ++i) (data.events[i] ? events : censored).push_back(i);
  if (K > 1) {
    if (events.size() < K)
      f.warnings.push_back({"StratumTooSmall", "fewer events than folds"});
    if (censored.size() < K)
      f.warnings.push_back({"StratumTooSmall", "fewer censored observations than folds"});
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(events));
  rng.shuffle(std::span<std::size_t>(censored));
  std::size_t c = 0;
  for (std::size_t i : events) f.fold_of[i] = c++ % K;
  for (std::size_t i : censored) f.fold_of[i] = c++ % K;
  return f;
}

inline std::size_t cv_max_length(std::span<const std::size_t> fold_lengths) {
  if (fold_lengths.empty()) return 0;
  return *std::min_element(fold_lengths.begin(), fold_lengths.end());
}

using PeelSequence = std::vector<std::pair<std::size_t, Side>>;

/// One cross-validation replicate, steps 0..length.
struct ReplicateResult {
  std::size_t length = 0;
  std::vector<std::size_t> fold_lengths;
  std::vector<EndPoints> stats;
  std::vector<Box> boxes;  // finite, clamped to the data range
  std::vector<double> support;
  std::vector<Mask> membership;
  std::vector<PeelSequence> peels;  // per fold trajectory
  Warnings warnings;
};

namespace detail {

struct SortedRows {
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<std::size_t> rows;
};

inline SortedRows sort_rows(const SurvivalData& data, std::span<const std::size_t> rows) {
  SortedRows s;
  s.rows.assign(rows.begin(), rows.end());
  std::stable_sort(s.rows.begin(), s.rows.end(),
                   [&](std::size_t a, std::size_t b) { return data.times[a] < data.times[b]; });
  for (std::size_t r : s.rows) {
    s.times.push_back(data.times[r]);
    s.events.push_back(data.events[r]);
  }
  return s;
}

inline void add_warning(Warnings& w, Warning x) {
  if (std::find(w.begin(), w.end(), x) == w.end()) w.push_back(std::move(x));
}

template <class InGroup>
EndPoints step_statistics(const SortedRows& s, std::size_t step, bool lrt_only, InGroup&& in) {
  if (step == 0) {
    if (lrt_only) {
      EndPoints e;
      e.lrt = 0.0;
      return e;
    }
    return full_box_end_points(s.times, s.events);
  }
  if (lrt_only) {
    EndPoints e;
    std::size_t n_in = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) n_in += in(i) ? 1 : 0;
    if (n_in > 0 && n_in < s.rows.size()) e.lrt = log_rank(s.times, s.events, in);
    return e;
  }
  return split_end_points(s.times, s.events, in);
}

inline EndPoints rescale(EndPoints e, LrtScale scale) {
  if (scale == LrtScale::ChiSquare && e.lrt) e.lrt = *e.lrt * *e.lrt;
  return e;
}

/// Mean of the present values; nullopt when none are present.
inline std::optional<double> mean_of(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

inline EndPoints average_end_points(std::span<const EndPoints> items) {
  auto field = [&](auto member) {
    std::vector<std::optional<double>> v;
    v.reserve(items.size());
    for (const auto& e : items) v.push_back(e.*member);
    return mean_of(v);
  };
  EndPoints out;
  out.lhr = field(&EndPoints::lhr);
  out.lrt = field(&EndPoints::lrt);
  out.cer = field(&EndPoints::cer);
  out.meft = field(&EndPoints::meft);
  out.mefp = field(&EndPoints::mefp);
  for (const auto& e : items) out.lhr_clamped = out.lhr_clamped || e.lhr_clamped;
  return out;
}

/// Edge-wise mean, kept within the range of the averaged edges so that
/// identical edges average to themselves.
inline Box mean_box(std::span<const Box> boxes) {
  const std::size_t p = boxes.front().p();
  Box out{std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
  Box lo{std::vector<double>(p, kInf), std::vector<double>(p, kInf)};
  Box hi{std::vector<double>(p, -kInf), std::vector<double>(p, -kInf)};
  for (const auto& b : boxes)
    for (std::size_t j = 0; j < p; ++j) {
      out.lower[j] += b.lower[j];
      out.upper[j] += b.upper[j];
      lo.lower[j] = std::min(lo.lower[j], b.lower[j]);
      lo.upper[j] = std::min(lo.upper[j], b.upper[j]);
      hi.lower[j] = std::max(hi.lower[j], b.lower[j]);
      hi.upper[j] = std::max(hi.upper[j], b.upper[j]);
    }
  const double k = static_cast<double>(boxes.size());
  for (std::size_t j = 0; j < p; ++j) {
    out.lower[j] = std::clamp(out.lower[j] / k, lo.lower[j], hi.lower[j]);
    out.upper[j] = std::clamp(out.upper[j] / k, lo.upper[j], hi.upper[j]);
  }
  return out;
}

}  // namespace detail

/// Fits one trajectory per training split and evaluates it on the held-out
/// folds. Averaged: per-fold test statistics averaged step-wise and the box
/// is the edge-wise mean. Combined and none: test memberships concatenated
/// and the statistics computed once over all n.
inline ReplicateResult run_replicate(const SurvivalData& data, const FoldAssignment& folds,
                                     const PeelConfig& peel, Technique technique,
                                     LrtScale scale = LrtScale::ChiSquare, bool lrt_only = false) {
  const std::size_t n = data.n();
  const std::size_t K = folds.K;
  ReplicateResult rep;
  rep.warnings = folds.warnings;
  const CovariateRange range = covariate_range(data);

  std::vector<std::vector<std::size_t>> test(K), train(K);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      if (folds.fold_of[i] == k) test[k].push_back(i);
      if (folds.fold_of[i] != k || K == 1) train[k].push_back(i);
    }
  }

  std::vector<Trajectory> fits;
  std::vector<detail::SortedRows> tests;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t test_events = 0;
    for (std::size_t r : test[k]) test_events += data.events[r];
    if (test[k].empty() || train[k].empty()) {
      detail::add_warning(rep.warnings, {"EmptyFold", "a fold has no rows"});
      fits.push_back(Trajectory{});
      fits.back().steps.emplace_back().box = Box::unbounded(data.p());
      tests.push_back(detail::sort_rows(data, test[k]));
      rep.fold_lengths.push_back(0);
      continue;
    }
    if (test_events == 0)
      detail::add_warning(rep.warnings, {"FoldWithoutEvents", "a test fold has no events"});
    fits.push_back(detail::grow_trajectory(data, train[k], peel, false));
    tests.push_back(detail::sort_rows(data, test[k]));
    rep.fold_lengths.push_back(fits.back().length());
    PeelSequence seq;
    for (std::size_t l = 1; l < fits.back().steps.size(); ++l)
      seq.emplace_back(*fits.back().steps[l].peeled_covariate, *fits.back().steps[l].peeled_side);
    rep.peels.push_back(std::move(seq));
  }
  rep.length = cv_max_length(rep.fold_lengths);

  const auto everyone = detail::sort_rows(data, all_rows(data));

  for (std::size_t l = 0; l <= rep.length; ++l) {
    if (technique == Technique::Averaged) {
      std::vector<EndPoints> per_fold;
      std::vector<Box> boxes;
      for (std::size_t k = 0; k < K; ++k) {
        const Box& box = fits[k].steps[l].box;
        boxes.push_back(clamp_box(box, range));
        const auto& s = tests[k];
        if (s.rows.empty()) continue;
        per_fold.push_back(detail::rescale(
            detail::step_statistics(s, l, lrt_only, [&](std::size_t i) { return box.contains(data, s.rows[i]); }),
            scale));
      }
      rep.stats.push_back(detail::average_end_points(per_fold));
      Box avg = detail::mean_box(boxes);
      Mask member = avg.membership(data);
      std::size_t count = 0;
      for (auto v : member) count += v;
      rep.support.push_back(static_cast<double>(count) / static_cast<double>(n));
      rep.boxes.push_back(std::move(avg));
      rep.membership.push_back(std::move(member));
    } else {
      Mask member(n, 0);
      for (std::size_t i = 0; i < n; ++i)
        member[i] = fits[folds.fold_of[i]].steps[l].box.contains(data, i) ? 1 : 0;
      rep.stats.push_back(detail::rescale(
          detail::step_statistics(everyone, l, lrt_only,
                                  [&](std::size_t i) { return member[everyone.rows[i]] == 1; }),
          scale));
      Box box{std::vector<double>(data.p(), kInf), std::vector<double>(data.p(), -kInf)};
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!member[i]) continue;
        ++count;
        for (std::size_t j = 0; j < data.p(); ++j) {
          box.lower[j] = std::min(box.lower[j], data.x(i, j));
          box.upper[j] = std::max(box.upper[j], data.x(i, j));
        }
      }
      if (count == 0) box = clamp_box(Box::unbounded(data.p()), range);
      rep.support.push_back(static_cast<double>(count) / static_cast<double>(n));
      rep.boxes.push_back(std::move(box));
      rep.membership.push_back(std::move(member));
    }
  }
  return rep;
}

inline ReplicateResult averaged_cv(const SurvivalData& data, const FoldAssignment& folds, const PeelConfig& peel) {
  return run_replicate(data, folds, peel, Technique::Averaged);
}

inline ReplicateResult combined_cv(const SurvivalData& data, const FoldAssignment& folds, const PeelConfig& peel) {
  return run_replicate(data, folds, peel, Technique::Combined);
}

/// Mean and standard error (sd / sqrt(count)) per step over replicates.
struct StatProfile {
  std::vector<std::optional<double>> mean;
  std::vector<std::optional<double>> se;
  std::vector<std::size_t> count;
  std::vector<std::vector<std::optional<double>>> values;  // [step][replicate]
};

inline StatProfile summarize(std::vector<std::vector<std::optional<double>>> values) {
  StatProfile p;
  p.values = std::move(values);
  for (const auto& row : p.values) {
    double sum = 0.0;
    std::size_t c = 0;
    for (const auto& v : row)
      if (v) {
        sum += *v;
        ++c;
      }
    p.count.push_back(c);
    if (c == 0) {
      p.mean.push_back(std::nullopt);
      p.se.push_back(std::nullopt);
      continue;
    }
    const double mean = sum / static_cast<double>(c);
    double ss = 0.0;
    for (const auto& v : row)
      if (v) ss += (*v - mean) * (*v - mean);
    const double sd = c > 1 ? std::sqrt(ss / static_cast<double>(c - 1)) : 0.0;
    p.mean.push_back(mean);
    p.se.push_back(sd / std::sqrt(static_cast<double>(c)));
  }
  return p;
}

struct CvProfile {
  std::size_t length = 0;  // ceiling-mean of replicate maximum lengths
  StatProfile lhr, lrt, cer, meft, mefp, support;

  const StatProfile& criterion(OptCriterion c) const {
    return c == OptCriterion::LHR ? lhr : c == OptCriterion::LRT ? lrt : cer;
  }
};

/// Optimal step over 1..L (0 when L = 0): argmax of LHR/LRT or argmin of CER,
/// ties to the smallest step. The one-SE variant takes the smallest step
/// within one standard error of the optimum.
inline std::size_t select_optimal_length(std::span<const std::optional<double>> mean,
                                         std::span<const std::optional<double>> se, bool minimize,
                                         bool one_se, Warnings* warnings = nullptr) {
  std::optional<std::size_t> best;
  double lo = kInf, hi = -kInf;
  for (std::size_t l = 1; l < mean.size(); ++l) {
    if (!mean[l]) continue;
    lo = std::min(lo, *mean[l]);
    hi = std::max(hi, *mean[l]);
    if (!best || (minimize ? *mean[l] < *mean[*best] : *mean[l] > *mean[*best])) best = l;
  }
  if (!best) return 0;
  if (warnings && hi - lo < 1e-6)
    detail::add_warning(*warnings, {"FlatProfileWarning", "criterion profile is flat; optimal length unreliable"});
  if (!one_se) return *best;
  const double margin = se[*best].value_or(0.0);
  for (std::size_t l = 1; l <= *best; ++l) {
    if (!mean[l]) continue;
    if (minimize ? *mean[l] <= *mean[*best] + margin : *mean[l] >= *mean[*best] - margin) return l;
  }
  return *best;
}

inline std::size_t select_optimal_length(const CvProfile& profile, OptCriterion opt, bool one_se,
                                         Warnings* warnings = nullptr) {
  const auto& p = profile.criterion(opt);
  return select_optimal_length(p.mean, p.se, opt == OptCriterion::CER, one_se, warnings);
}

struct RuleEdge {
  std::size_t covariate = 0;
  std::optional<double> lower, lower_se;
  std::optional<double> upper, upper_se;
};

struct StepSummary {
  std::size_t step = 0;
  std::size_t replicates = 0;  // replicates reaching this step
  Box box;                     // edge-wise mean of replicate boxes
  Box box_se;
  Mask membership;             // indicator of the averaged box
  std::size_t n_in = 0;
  double membership_support = 0.0;
  Mask vote;                   // majority vote of replicate memberships
  double vote_agreement = 1.0;
  std::optional<double> support;  // mean replicate support
  EndPoints end_points;           // replicate means
  std::vector<double> usage_lower;  // fraction of fold fits that peeled the side by this step
  std::vector<double> usage_upper;
  std::vector<double> peel_frequency;  // fraction of fold fits peeling the covariate at this step
  std::vector<double> importance;      // signed fraction of the range cut by the averaged box
  std::vector<RuleEdge> rule;
};

struct PValue {
  std::size_t step = 0;
  std::optional<double> value;
  std::size_t permutations = 0;  // permutations reaching this step
  bool below_resolution = false;
  double upper_bound = 1.0;
};

struct CvResult {
  std::size_t optimal_length = 0;
  CvProfile profile;
  std::vector<StepSummary> steps;
  std::vector<std::size_t> replicate_lengths;
  std::vector<double> peel_share;  // per covariate share of fold peels up to the optimal step
  std::vector<std::size_t> used_covariates;
  std::vector<PValue> p_values;
  Warnings warnings;

  const StepSummary& optimal() const { return steps[optimal_length]; }
};

namespace detail {

inline std::vector<ReplicateResult> run_replicates(const SurvivalData& data, const CvConfig& cv,
                                                   const PeelConfig& peel, std::size_t threads,
                                                   bool lrt_only) {
  const std::size_t B = cv.replicates();
  std::vector<ReplicateResult> reps(B);
  parallel_for(B, threads, [&](std::size_t b) {
    FoldAssignment folds;
    if (cv.technique == Technique::None) {
      folds.K = 1;
      folds.fold_of.assign(data.n(), 0);
    } else {
      folds = stratified_kfold(data, cv.K, derive_seed(cv.seed, b));
    }
    reps[b] = run_replicate(data, folds, peel, cv.technique, cv.lrt_scale, lrt_only);
  });
  return reps;
}

inline std::size_t ceiling_mean(std::span<const ReplicateResult> reps) {
  std::size_t sum = 0;
  for (const auto& r : reps) sum += r.length;
  return (sum + reps.size() - 1) / reps.size();
}

inline StatProfile profile_of(std::span<const ReplicateResult> reps, std::size_t length,
                              std::optional<double> EndPoints::*member) {
  std::vector<std::vector<std::optional<double>>> values(length + 1);
  for (std::size_t l = 0; l <= length; ++l)
    for (const auto& r : reps) values[l].push_back(l <= r.length ? r.stats[l].*member : std::nullopt);
  return summarize(std::move(values));
}

}  // namespace detail

/// Replicated cross-validation of the peeling length.
inline CvResult replicated_cv(const SurvivalData& data, const CvConfig& cv, const PeelConfig& peel) {
  cv.validate();
  peel.validate(data.p());
  require(data.event_count() > 0, ErrorCode::NoEvents, "no events in data");
  const auto reps = detail::run_replicates(data, cv, peel, cv.threads, false);
  const std::size_t n = data.n(), p = data.p();

  CvResult res;
  for (const auto& r : reps) {
    res.replicate_lengths.push_back(r.length);
    for (const auto& w : r.warnings) detail::add_warning(res.warnings, w);
  }
  const std::size_t L = detail::ceiling_mean(reps);
  res.profile.length = L;
  res.profile.lhr = detail::profile_of(reps, L, &EndPoints::lhr);
  res.profile.lrt = detail::profile_of(reps, L, &EndPoints::lrt);
  res.profile.cer = detail::profile_of(reps, L, &EndPoints::cer);
  res.profile.meft = detail::profile_of(reps, L, &EndPoints::meft);
  res.profile.mefp = detail::profile_of(reps, L, &EndPoints::mefp);
  {
    std::vector<std::vector<std::optional<double>>> values(L + 1);
    for (std::size_t l = 0; l <= L; ++l)
      for (const auto& r : reps)
        values[l].push_back(l <= r.length ? std::optional<double>(r.support[l]) : std::nullopt);
    res.profile.support = summarize(std::move(values));
  }
  res.optimal_length = select_optimal_length(res.profile, cv.opt, cv.one_se, &res.warnings);

  std::size_t trajectories = 0;
  for (const auto& r : reps) trajectories += r.peels.size();

  const CovariateRange range = covariate_range(data);
  for (std::size_t l = 0; l <= L; ++l) {
    StepSummary s;
    s.step = l;
    std::vector<Box> boxes;
    std::vector<const Mask*> members;
    std::vector<EndPoints> stats;
    for (const auto& r : reps) {
      if (l > r.length) continue;
      boxes.push_back(r.boxes[l]);
      members.push_back(&r.membership[l]);
      stats.push_back(r.stats[l]);
    }
    s.replicates = boxes.size();
    if (boxes.empty()) {
      s.box = clamp_box(Box::unbounded(p), range);
      s.box_se = Box{std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
    } else {
      s.box = detail::mean_box(boxes);
      s.box_se = Box{std::vector<double>(p, 0.0), std::vector<double>(p, 0.0)};
      if (boxes.size() > 1) {
        const double c = static_cast<double>(boxes.size());
        for (std::size_t j = 0; j < p; ++j) {
          double sl = 0.0, su = 0.0;
          for (const auto& b : boxes) {
            sl += (b.lower[j] - s.box.lower[j]) * (b.lower[j] - s.box.lower[j]);
            su += (b.upper[j] - s.box.upper[j]) * (b.upper[j] - s.box.upper[j]);
          }
          s.box_se.lower[j] = std::sqrt(sl / (c - 1.0)) / std::sqrt(c);
          s.box_se.upper[j] = std::sqrt(su / (c - 1.0)) / std::sqrt(c);
        }
      }
    }
    s.membership = s.box.membership(data);
    for (auto v : s.membership) s.n_in += v;
    s.membership_support = static_cast<double>(s.n_in) / static_cast<double>(n);

    s.vote.assign(n, 0);
    if (!members.empty()) {
      const std::size_t threshold = (members.size() + 1) / 2;
      std::size_t agree = 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t votes = 0;
        for (const Mask* m : members) votes += (*m)[i];
        s.vote[i] = votes >= threshold ? 1 : 0;
        agree += s.vote[i] == s.membership[i];
      }
      s.vote_agreement = static_cast<double>(agree) / static_cast<double>(n);
    }
    s.support = res.profile.support.mean[l];
    if (!stats.empty()) s.end_points = detail::average_end_points(stats);

    s.usage_lower.assign(p, 0.0);
    s.usage_upper.assign(p, 0.0);
    s.peel_frequency.assign(p, 0.0);
    s.importance.assign(p, 0.0);
    if (trajectories > 0) {
      for (const auto& r : reps)
        for (const auto& seq : r.peels) {
          std::vector<std::uint8_t> lo(p, 0), up(p, 0);
          for (std::size_t k = 0; k < std::min(l, seq.size()); ++k)
            (seq[k].second == Side::Lower ? lo : up)[seq[k].first] = 1;
          for (std::size_t j = 0; j < p; ++j) {
            s.usage_lower[j] += lo[j];
            s.usage_upper[j] += up[j];
          }
          if (l >= 1 && l <= seq.size()) s.peel_frequency[seq[l - 1].first] += 1.0;
        }
      const double t = static_cast<double>(trajectories);
      for (std::size_t j = 0; j < p; ++j) {
        s.usage_lower[j] /= t;
        s.usage_upper[j] /= t;
        s.peel_frequency[j] /= t;
        const double width = range.max[j] - range.min[j];
        if (!(width > 0.0) || s.usage_lower[j] + s.usage_upper[j] == 0.0) continue;
        const double cut = (s.box.lower[j] - range.min[j] + range.max[j] - s.box.upper[j]) / width;
        const double sign = s.usage_lower[j] >= s.usage_upper[j] ? 1.0 : -1.0;
        s.importance[j] = sign * std::clamp(cut, 0.0, 1.0);
      }
    }
    s.rule = {};
    res.steps.push_back(std::move(s));
  }

  // Decision rule per step: covariates peeled in at least half of the fold
  // fits; each side kept when it reaches half, else the more frequent side.
  if (trajectories > 0) {
    for (auto& s : res.steps) {
      for (std::size_t j = 0; j < p; ++j) {
        double any = 0.0;
        for (const auto& r : reps)
          for (const auto& seq : r.peels) {
            bool hit = false;
            for (std::size_t k = 0; k < std::min(s.step, seq.size()) && !hit; ++k) hit = seq[k].first == j;
            any += hit ? 1.0 : 0.0;
          }
        if (any / static_cast<double>(trajectories) < 0.5) continue;
        bool lower = s.usage_lower[j] >= 0.5, upper = s.usage_upper[j] >= 0.5;
        if (!lower && !upper) (s.usage_lower[j] >= s.usage_upper[j] ? lower : upper) = true;
        RuleEdge e;
        e.covariate = j;
        if (lower) {
          e.lower = s.box.lower[j];
          e.lower_se = s.box_se.lower[j];
        }
        if (upper) {
          e.upper = s.box.upper[j];
          e.upper_se = s.box_se.upper[j];
        }
        s.rule.push_back(e);
      }
    }
  }
  for (const auto& e : res.steps[res.optimal_length].rule) res.used_covariates.push_back(e.covariate);

  res.peel_share.assign(p, 0.0);
  std::size_t total = 0;
  for (const auto& r : reps)
    for (const auto& seq : r.peels)
      for (std::size_t k = 0; k < std::min(res.optimal_length, seq.size()); ++k) {
        res.peel_share[seq[k].first] += 1.0;
        ++total;
      }
  if (total > 0)
    for (auto& v : res.peel_share) v /= static_cast<double>(total);
  return res;
}

inline std::vector<Conjunct> rule_conjuncts(const StepSummary& s) {
  std::vector<Conjunct> out;
  for (const auto& e : s.rule) out.push_back({e.covariate, e.lower, e.upper});
  return out;
}

/// Permutation p-values of the cross-validated log-rank profile. Each
/// permutation reruns the replicated pipeline on data whose (time, event)
/// pairs are permuted jointly against the covariate rows.
inline std::vector<PValue> permutation_pvalues(const SurvivalData& data, const CvConfig& cv,
                                               const PeelConfig& peel,
                                               std::span<const std::optional<double>> observed) {
  cv.validate();
  const std::size_t A = cv.A;
  std::vector<std::vector<std::optional<double>>> null_profiles(A);
  parallel_for(A, cv.threads, [&](std::size_t a) {
    Rng rng(derive_seed(cv.seed, "perm", a));
    std::vector<std::size_t> order = all_rows(data);
    rng.shuffle(std::span<std::size_t>(order));
    SurvivalData permuted = data;
    for (std::size_t i = 0; i < data.n(); ++i) {
      permuted.times[i] = data.times[order[i]];
      permuted.events[i] = data.events[order[i]];
    }
    CvConfig inner = cv;
    inner.seed = derive_seed(cv.seed, "perm-cv", a);
    const auto reps = detail::run_replicates(permuted, inner, peel, 1, true);
    const std::size_t L = detail::ceiling_mean(reps);
    null_profiles[a] = detail::profile_of(reps, L, &EndPoints::lrt).mean;
  });

  std::vector<PValue> out;
  for (std::size_t l = 0; l < observed.size(); ++l) {
    PValue pv;
    pv.step = l;
    if (!observed[l]) {
      out.push_back(pv);
      continue;
    }
    std::size_t reach = 0, exceed = 0;
    for (const auto& prof : null_profiles) {
      if (l >= prof.size() || !prof[l]) continue;
      ++reach;
      exceed += *prof[l] >= *observed[l] ? 1 : 0;
    }
    pv.permutations = reach;
    if (reach > 0) {
      pv.value = static_cast<double>(exceed) / static_cast<double>(reach);
      pv.upper_bound = *pv.value;
      if (exceed == 0) {
        pv.below_resolution = true;
        pv.upper_bound = 1.0 / static_cast<double>(reach);
      }
    }
    out.push_back(pv);
  }
  return out;
}

}  // namespace sbh
