#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbh/box.hpp"
#include "sbh/error.hpp"
#include "sbh/random.hpp"
#include "sbh/survival_data.hpp"

namespace sbh {

enum class SimModel { M1, M1b, M2, M3, M4 };

inline std::string to_string(SimModel m) {
  switch (m) {
    case SimModel::M1: return "1";
    case SimModel::M1b: return "1b";
    case SimModel::M2: return "2";
    case SimModel::M3: return "3";
    case SimModel::M4: return "4";
  }
  return "?";
}

inline SimModel parse_model(const std::string& s) {
  if (s == "1") return SimModel::M1;
  if (s == "1b") return SimModel::M1b;
  if (s == "2") return SimModel::M2;
  if (s == "3") return SimModel::M3;
  if (s == "4") return SimModel::M4;
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + s + "'");
}

struct SimSpec {
  SimModel model = SimModel::M2;
  std::size_t n = 250;
  std::size_t p = 3;
  double pi = 0.5;       // target censored fraction; 0 disables censoring
  double sigma = 1.0;    // covariate sd for model 4
  std::uint64_t seed = 0;

  static SimSpec defaults(SimModel model, std::uint64_t seed = 0) {
    SimSpec s;
    s.model = model;
    s.seed = seed;
    if (model == SimModel::M4) {
      s.n = 100;
      s.p = 1000;
    }
    return s;
  }

  void validate() const {
    require(n >= 1, ErrorCode::InvalidArgument, "n must be positive");
    require(pi >= 0.0 && pi < 1.0, ErrorCode::InvalidArgument, "pi must lie in [0, 1)");
    require(sigma > 0.0, ErrorCode::InvalidArgument, "sigma must be positive");
    if (model == SimModel::M4) require(p >= 100, ErrorCode::InvalidArgument, "model 4 needs p >= 100");
    else require(p >= 3, ErrorCode::InvalidArgument, "models 1-3 need p >= 3");
  }
};

inline const Box& planted_region() {
  static const Box r{{0.7, 0.0, 0.0}, {1.0, 0.2, 0.4}};
  return r;
}

struct SimTruth {
  std::vector<double> true_times;
  std::vector<double> censor_times;
  std::vector<double> coefficients;
  std::vector<double> hazards;
  Mask planted;  // model 1b region membership; empty otherwise
  double censoring_bound = std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;
};

struct Simulation {
  SurvivalData data;
  SimTruth truth;
};

namespace detail {

/// P(C < T) for T ~ Exp(rate), C ~ U(0, v).
inline double censored_probability(double rate, double v) {
  const double x = rate * v;
  if (x < 1e-12) return 1.0 - 0.5 * x;
  return -std::expm1(-x) / x;
}

inline double mean_censored(std::span<const double> hazards, double v) {
  double s = 0.0;
  for (double h : hazards) s += censored_probability(h, v);
  return s / static_cast<double>(hazards.size());
}

}  // namespace detail

/// Upper limit v of U(0, v) censoring giving an expected censored fraction pi.
inline double calibrate_censoring(std::span<const double> hazards, double pi) {
  require(!hazards.empty(), ErrorCode::InvalidArgument, "no hazards");
  require(pi > 0.0 && pi < 1.0, ErrorCode::InvalidArgument, "pi must lie in (0, 1)");
  for (double h : hazards)
    require(h > 0.0 && std::isfinite(h), ErrorCode::InvalidArgument, "hazards must be positive");
  // The censored fraction falls from 1 to 0 as v grows.
  double lo = 1.0, hi = 1.0;
  int guard = 0;
  while (detail::mean_censored(hazards, hi) > pi && guard++ < 2000) hi *= 2.0;
  guard = 0;
  while (detail::mean_censored(hazards, lo) < pi && guard++ < 2000) lo *= 0.5;
  const double f_lo = detail::mean_censored(hazards, lo), f_hi = detail::mean_censored(hazards, hi);
  if (!(f_lo >= pi && f_hi <= pi) || !std::isfinite(hi) || lo == 0.0)
    throw Error(ErrorCode::CalibrationFailure, "cannot bracket the censoring rate");
  for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (detail::mean_censored(hazards, mid) > pi) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Draw order: coefficients, covariates (row-wise), region noise u, T, C.
inline Simulation generate(const SimSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.n, p = spec.p;
  Simulation sim;
  sim.data = SurvivalData::with_shape(n, p);
  auto& truth = sim.truth;

  truth.coefficients.assign(p, 0.0);
  switch (spec.model) {
    case SimModel::M1:
    case SimModel::M1b:
      truth.coefficients[0] = 12.0;
      truth.coefficients[1] = -15.0;
      truth.coefficients[2] = -5.0;
      break;
    case SimModel::M2:
      truth.coefficients[0] = 12.0;
      truth.coefficients[1] = -15.0;
      break;
    case SimModel::M3:
      break;
    case SimModel::M4:
      for (std::size_t j = 0; j < 100; ++j) truth.coefficients[j] = rng.uniform(-1.0, 1.0);
      truth.notes.push_back("model 4 nonzero coefficients drawn from U(-1, 1)");
      truth.notes.push_back("model 4 covariate sd = " + format_number(spec.sigma));
      break;
  }

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      sim.data.x(i, j) = spec.model == SimModel::M4 ? rng.normal(0.0, spec.sigma) : rng.uniform();

  std::vector<double> eta(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (truth.coefficients[j] != 0.0) eta[i] += truth.coefficients[j] * sim.data.x(i, j);

  if (spec.model == SimModel::M1b) {
    truth.planted.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      bool inside = true;
      for (std::size_t j = 0; j < 3; ++j) {
        const double v = sim.data.x(i, j);
        inside = inside && v >= planted_region().lower[j] && v <= planted_region().upper[j];
      }
      truth.planted[i] = inside ? 1 : 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      if (!truth.planted[i]) eta[i] = u;
    }
  }

  truth.hazards.resize(n);
  for (std::size_t i = 0; i < n; ++i) truth.hazards[i] = std::exp(eta[i]);

  truth.true_times.resize(n);
  for (std::size_t i = 0; i < n; ++i) truth.true_times[i] = rng.exponential(truth.hazards[i]);

  truth.censor_times.assign(n, std::numeric_limits<double>::infinity());
  if (spec.pi > 0.0) {
    truth.censoring_bound = calibrate_censoring(truth.hazards, spec.pi);
    for (std::size_t i = 0; i < n; ++i) truth.censor_times[i] = rng.uniform(0.0, truth.censoring_bound);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const bool event = truth.true_times[i] <= truth.censor_times[i];
    sim.data.times[i] = event ? truth.true_times[i] : truth.censor_times[i];
    sim.data.events[i] = event ? 1 : 0;
  }
  return sim;
}

inline double misclassification_rate(std::span<const std::uint8_t> predicted,
                                     std::span<const std::uint8_t> truth) {
  require(predicted.size() == truth.size() && !truth.empty(), ErrorCode::InvalidArgument,
          "membership vectors must be nonempty and of equal length");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += (predicted[i] != 0) != (truth[i] != 0);
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace sbh
