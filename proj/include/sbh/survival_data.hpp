#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sbh/error.hpp"

namespace sbh {

using Mask = std::vector<std::uint8_t>;

/// Right-censored observations (Y, delta, x). Covariates are column-major.
struct SurvivalData {
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<double> covariates;
  std::vector<std::string> covariate_names;

  std::size_t n() const { return times.size(); }
  std::size_t p() const { return covariate_names.size(); }

  double x(std::size_t i, std::size_t j) const { return covariates[j * n() + i]; }
  double& x(std::size_t i, std::size_t j) { return covariates[j * n() + i]; }

  std::span<const double> column(std::size_t j) const {
    return {covariates.data() + j * n(), n()};
  }

  std::size_t event_count() const {
    return static_cast<std::size_t>(std::count(events.begin(), events.end(), 1));
  }

  /// Allocates an n x p dataset with default names x1..xp.
  static SurvivalData with_shape(std::size_t n, std::size_t p) {
    SurvivalData d;
    d.times.assign(n, 0.0);
    d.events.assign(n, 0);
    d.covariates.assign(n * p, 0.0);
    d.covariate_names.reserve(p);
    for (std::size_t j = 0; j < p; ++j) d.covariate_names.push_back("x" + std::to_string(j + 1));
    return d;
  }

  /// Builds from row-major covariates.
  static SurvivalData from_rows(std::vector<double> times, std::vector<std::uint8_t> events,
                                const std::vector<std::vector<double>>& rows,
                                std::vector<std::string> names = {}) {
    const std::size_t n = times.size();
    const std::size_t p = rows.empty() ? names.size() : rows.front().size();
    SurvivalData d = with_shape(n, p);
    d.times = std::move(times);
    d.events = std::move(events);
    if (!names.empty()) d.covariate_names = std::move(names);
    require(rows.size() == n, ErrorCode::InvalidArgument, "row count does not match times");
    for (std::size_t i = 0; i < n; ++i) {
      require(rows[i].size() == p, ErrorCode::InvalidArgument, "ragged covariate rows");
      for (std::size_t j = 0; j < p; ++j) d.x(i, j) = rows[i][j];
    }
    d.validate();
    return d;
  }

  void validate() const {
    require(n() >= 1, ErrorCode::InvalidArgument, "dataset is empty");
    require(p() >= 1, ErrorCode::InvalidArgument, "dataset has no covariates");
    require(events.size() == n(), ErrorCode::InvalidArgument, "events length differs from times");
    require(covariates.size() == n() * p(), ErrorCode::InvalidArgument,
            "covariate matrix shape differs from n x p");
    for (std::size_t i = 0; i < n(); ++i) {
      require(std::isfinite(times[i]) && times[i] >= 0.0, ErrorCode::InvalidArgument,
              "time at row " + std::to_string(i + 1) + " is negative or not finite");
      require(events[i] <= 1, ErrorCode::InvalidArgument,
              "event at row " + std::to_string(i + 1) + " is not 0/1");
    }
    for (double v : covariates)
      require(std::isfinite(v), ErrorCode::InvalidArgument, "covariate value is not finite");
  }

  SurvivalData subset(std::span<const std::size_t> rows) const {
    SurvivalData d = with_shape(rows.size(), p());
    d.covariate_names = covariate_names;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      d.times[r] = times[rows[r]];
      d.events[r] = events[rows[r]];
      for (std::size_t j = 0; j < p(); ++j) d.x(r, j) = x(rows[r], j);
    }
    return d;
  }
};

/// Indices sorting `times` ascending; ties keep index order.
inline std::vector<std::size_t> time_order(std::span<const double> times) {
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  return order;
}

}  // namespace sbh
