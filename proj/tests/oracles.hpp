#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. They work on unsorted raw arrays and share no code with the library.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "sbh/random.hpp"
#include "sbh/survival_data.hpp"

namespace oracle {

struct LogRank {
  double numerator = 0.0;
  double variance = 0.0;
  double z() const { return numerator / std::sqrt(variance); }
};

/// One 2x2 table per distinct event time: hypergeometric mean and variance
/// of the in-group death count.
inline LogRank log_rank(const std::vector<double>& t, const std::vector<std::uint8_t>& e,
                        const std::vector<std::uint8_t>& g) {
  std::set<double> event_times;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (e[i]) event_times.insert(t[i]);
  LogRank out;
  for (double u : event_times) {
    double n = 0, n1 = 0, d = 0, d1 = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < u) continue;
      n += 1;
      n1 += g[i];
      if (t[i] == u && e[i]) {
        d += 1;
        d1 += g[i];
      }
    }
    const double expected = n1 * d / n;
    out.numerator += d1 - expected;
    if (n > 1) out.variance += (n1 / n) * (1.0 - n1 / n) * d * (n - d) / (n - 1.0);
  }
  return out;
}

/// Breslow partial log-likelihood of the group indicator.
inline double cox_loglik(const std::vector<double>& t, const std::vector<std::uint8_t>& e,
                         const std::vector<std::uint8_t>& g, double eta) {
  std::set<double> event_times;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (e[i]) event_times.insert(t[i]);
  double ll = 0.0;
  for (double u : event_times) {
    double n0 = 0, n1 = 0, d = 0, d1 = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < u) continue;
      (g[i] ? n1 : n0) += 1;
      if (t[i] == u && e[i]) {
        d += 1;
        d1 += g[i];
      }
    }
    ll += d1 * eta - d * std::log(n1 * std::exp(eta) + n0);
  }
  return ll;
}

/// Grid maximiser over [-10, 10] at 1e-3 resolution.
inline double cox_grid(const std::vector<double>& t, const std::vector<std::uint8_t>& e,
                       const std::vector<std::uint8_t>& g) {
  double best = -10.0, best_ll = -std::numeric_limits<double>::infinity();
  for (int k = -10000; k <= 10000; ++k) {
    const double eta = k * 1e-3;
    const double ll = cox_loglik(t, e, g, eta);
    if (ll > best_ll) {
      best_ll = ll;
      best = eta;
    }
  }
  return best;
}

/// Harrell's C error by pair enumeration; -1 when no pair is permissible.
inline double concordance_error(const std::vector<double>& t, const std::vector<std::uint8_t>& e,
                                const std::vector<double>& s) {
  double pairs = 0.0, conc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (i == j || !e[i]) continue;
      const bool ok = t[i] < t[j] || (t[i] == t[j] && !e[j]);
      if (!ok) continue;
      pairs += 1.0;
      if (s[i] > s[j]) conc += 1.0;
      else if (s[i] == s[j]) conc += 0.5;
    }
  return pairs == 0.0 ? -1.0 : 1.0 - conc / pairs;
}

/// Double sum of the in-group Nelson-Aalen estimate at each in-group time.
inline double chs_double_sum(const std::vector<double>& t, const std::vector<std::uint8_t>& e,
                             const std::vector<std::uint8_t>& g) {
  double total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!g[i]) continue;
    std::set<double> times;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (g[k] && e[k] && t[k] <= t[i]) times.insert(t[k]);
    for (double u : times) {
      double d = 0, n = 0;
      for (std::size_t k = 0; k < t.size(); ++k) {
        if (!g[k] || t[k] < u) continue;
        n += 1;
        if (t[k] == u && e[k]) d += 1;
      }
      total += d / n;
    }
  }
  return total;
}

/// Random censored sample with coarse times so that ties occur.
inline sbh::SurvivalData random_data(sbh::Rng& rng, std::size_t n, std::size_t p, double censor_prob,
                                     bool ties = true) {
  auto d = sbh::SurvivalData::with_shape(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = rng.exponential(1.0);
    d.times[i] = ties ? std::round(raw * 8.0) / 8.0 : raw;
    d.events[i] = rng.uniform() < censor_prob ? 0 : 1;
    for (std::size_t j = 0; j < p; ++j) d.x(i, j) = rng.uniform();
  }
  return d;
}

inline std::vector<std::uint8_t> random_group(sbh::Rng& rng, std::size_t n, double p_in = 0.5) {
  std::vector<std::uint8_t> g(n);
  for (auto& v : g) v = rng.uniform() < p_in ? 1 : 0;
  return g;
}

}  // namespace oracle
