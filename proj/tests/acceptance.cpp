// Acceptance criteria runner: one PASS/FAIL line per criterion.
// Usage: acceptance <path-to-sbh-cli>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

#include "oracles.hpp"
#include "sbh/sbh.hpp"

using namespace sbh;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("null"); }

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

PeelConfig directed_m2() {
  PeelConfig p;
  p.sides = {AllowedSides::LowerOnly, AllowedSides::UpperOnly, AllowedSides::UpperOnly};
  return p;
}

CvConfig rccv(std::size_t B, std::uint64_t seed) {
  CvConfig cv;
  cv.K = 5;
  cv.B = B;
  cv.seed = seed;
  cv.technique = Technique::Combined;
  cv.threads = threads();
  return cv;
}

bool in(const std::optional<double>& v, double lo, double hi) { return v && *v >= lo && *v <= hi; }

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  std::size_t checked = 0;
  double worst = 0.0;
  while (checked < 1000) {
    const std::size_t n = 2 + rng.below(49);
    auto d = oracle::random_data(rng, n, 1, rng.uniform(0.0, 0.8));
    const auto g = oracle::random_group(rng, n, rng.uniform(0.1, 0.9));
    const auto ref = oracle::log_rank(d.times, d.events, g);
    if (d.event_count() == 0 || !(ref.variance > 0.0)) continue;
    const double z = log_rank_statistic(d, g);
    worst = std::max(worst, std::abs(z - ref.z()));
    ++checked;
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-10 && secs < 10.0,
         "max |z - oracle| = " + fmt(worst) + " over 1000 datasets in " + fmt(secs) + " s");
}

void criterion2() {
  Rng rng(202);
  std::size_t checked = 0, exact = 0;
  double worst = 0.0;
  while (checked < 1000) {
    const std::size_t n = 5 + rng.below(200), p = 1 + rng.below(4);
    auto d = oracle::random_data(rng, n, p, rng.uniform(0.0, 0.7), rng.uniform() < 0.5);
    Box box = Box::unbounded(p);
    for (std::size_t j = 0; j < p; ++j) {
      const double a = rng.uniform(), b = rng.uniform();
      box.lower[j] = std::min(a, b) * 0.5;
      box.upper[j] = 0.5 + std::max(a, b) * 0.5;
    }
    const Mask m = box.membership(d);
    std::size_t events = 0, size = 0;
    for (std::size_t i = 0; i < n; ++i) {
      size += m[i];
      events += m[i] && d.events[i];
    }
    if (size == 0) continue;
    const double chs = chs_statistic(d, m);
    exact += chs == static_cast<double>(events) ? 1 : 0;
    worst = std::max(worst, std::abs(oracle::chs_double_sum(d.times, d.events, m) - static_cast<double>(events)));
    ++checked;
  }
  report(2, exact == checked && worst < 1e-9,
         std::to_string(exact) + "/1000 boxes exact; double-sum oracle max deviation " + fmt(worst));
}

void criterion3() {
  Rng rng(303);
  std::size_t checked = 0, excluded = 0;
  double worst = 0.0;
  while (checked < 200) {
    const std::size_t n = 10 + rng.below(60);
    auto d = oracle::random_data(rng, n, 1, rng.uniform(0.0, 0.6));
    const auto g = oracle::random_group(rng, n, rng.uniform(0.2, 0.8));
    const auto in_group = std::count(g.begin(), g.end(), 1);
    if (d.event_count() == 0 || in_group == 0 || in_group == static_cast<long>(n)) continue;
    const auto fit = cox_lhr(d, g);
    if (fit.clamped) {
      ++excluded;
      continue;
    }
    worst = std::max(worst, std::abs(fit.value - oracle::cox_grid(d.times, d.events, g)));
    ++checked;
  }
  report(3, worst <= 2e-3,
         "max |lhr - grid| = " + fmt(worst) + " over 200 datasets, " + std::to_string(excluded) +
             " separation cases excluded");
}

void criterion4() {
  Rng rng(404);
  std::size_t violations = 0;
  for (int c = 0; c < 100; ++c) {
    PeelConfig cfg;
    cfg.alpha0 = rng.uniform(0.03, 0.5);
    cfg.beta0 = rng.uniform(0.01, 0.6);
    cfg.criterion = static_cast<Criterion>(rng.below(3));
    cfg.pasting = rng.uniform() < 0.5;
    const std::size_t n = 10 + rng.below(300), p = 1 + rng.below(5);
    const auto d = oracle::random_data(rng, n, p, rng.uniform(0.0, 0.7), rng.uniform() < 0.5);
    const auto t = peel_trajectory(d, cfg);
    if (t.length() > max_peeling_length(cfg.alpha0, cfg.beta0)) ++violations;
  }
  const std::size_t bound = max_peeling_length(0.10, 0.05);
  report(4, violations == 0 && bound == 29,
         std::to_string(violations) + " violations in 100 configs; bound(0.10, 0.05) = " + std::to_string(bound));
}

struct ModelTwoRun {
  Simulation sim;
  CvConfig cv;
  CvResult res;
  double secs = 0.0;
};

ModelTwoRun model_two() {
  ModelTwoRun r;
  r.sim = generate(SimSpec::defaults(SimModel::M2, 1));
  r.cv = rccv(16, 1);
  const auto t0 = std::chrono::steady_clock::now();
  r.res = replicated_cv(r.sim.data, r.cv, directed_m2());
  r.secs = seconds_since(t0);
  return r;
}

void criterion5(const ModelTwoRun& r) {
  const std::size_t l_lrt = select_optimal_length(r.res.profile, OptCriterion::LRT, false);
  const std::size_t l_cer = select_optimal_length(r.res.profile, OptCriterion::CER, false);
  const bool pass = l_lrt >= 8 && l_lrt <= 14 && l_cer >= 7 && l_cer <= 13 && r.secs < 120.0;
  report(5, pass,
         "LRT optimum " + std::to_string(l_lrt) + " (target 8-14), CER optimum " + std::to_string(l_cer) +
             " (target 7-13), profile length " + std::to_string(r.res.profile.length) + ", " + fmt(r.secs) + " s");
}

void criterion6() {
  const auto sim = generate(SimSpec::defaults(SimModel::M3, 1));
  const auto comb = replicated_cv(sim.data, rccv(16, 1), directed_m2());
  const std::size_t l_lhr = select_optimal_length(comb.profile, OptCriterion::LHR, false);
  const std::size_t l_lrt = select_optimal_length(comb.profile, OptCriterion::LRT, false);
  const std::size_t l_cer = select_optimal_length(comb.profile, OptCriterion::CER, false);
  auto cv = rccv(16, 1);
  cv.technique = Technique::Averaged;
  const auto avg = replicated_cv(sim.data, cv, directed_m2());
  const std::size_t l_avg = select_optimal_length(avg.profile, OptCriterion::LRT, false);
  const bool pass = l_lhr <= 3 && l_lrt <= 3 && l_cer <= 3 && l_avg >= 20;
  report(6, pass,
         "combined optima LHR " + std::to_string(l_lhr) + ", LRT " + std::to_string(l_lrt) + ", CER " +
             std::to_string(l_cer) + " (target <= 3); averaged LRT optimum " + std::to_string(l_avg) +
             " (target >= 20)");
}

void criterion7(const ModelTwoRun& r) {
  const auto& s = r.res.optimal();
  const bool pass = in(s.support, 0.22, 0.38) && in(s.end_points.lhr, 2.5, 5.5) && in(s.end_points.cer, 0.20, 0.33);
  report(7, pass,
         "step " + std::to_string(s.step) + ": support " + fmt(s.support) + " (0.22-0.38), LHR " +
             fmt(s.end_points.lhr) + " (2.5-5.5), CER " + fmt(s.end_points.cer) + " (0.20-0.33)");
}

void criterion8(const ModelTwoRun& r) {
  const double share = r.res.peel_share.size() > 2 ? r.res.peel_share[2] : 1.0;
  report(8, share < 0.10, "x3 share of peeling steps " + fmt(share) + " (target < 0.10)");
}

// One-sided KS statistic against U(0, 1) for the alternative "stochastically smaller".
double ks_smaller(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    d = std::max(d, static_cast<double>(i + 1) / static_cast<double>(p.size()) - p[i]);
  return d;
}

void criterion9(const ModelTwoRun& r) {
  auto cv2 = r.cv;
  cv2.A = 256;
  const auto pv2 = permutation_pvalues(r.sim.data, cv2, directed_m2(), r.res.profile.lrt.mean);
  const auto& p_final = pv2[r.res.optimal_length];

  const auto sim3 = generate(SimSpec::defaults(SimModel::M3, 1));
  auto cv3 = rccv(16, 1);
  cv3.A = 256;
  const auto res3 = replicated_cv(sim3.data, cv3, directed_m2());
  const auto pv3 = permutation_pvalues(sim3.data, cv3, directed_m2(), res3.profile.lrt.mean);
  const std::optional<double> p_step2 = pv3.size() > 2 ? pv3[2].value : std::nullopt;

  std::vector<double> null_p;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    auto d = generate(SimSpec::defaults(SimModel::M2, 1000 + rep)).data;
    Rng rng(derive_seed(rep, "labels", 0));
    std::vector<std::size_t> order = all_rows(d);
    rng.shuffle(std::span<std::size_t>(order));
    const auto t = d.times;
    const auto e = d.events;
    for (std::size_t i = 0; i < d.n(); ++i) {
      d.times[i] = t[order[i]];
      d.events[i] = e[order[i]];
    }
    auto cv = rccv(4, 5000 + rep);
    cv.A = 99;
    const auto res = replicated_cv(d, cv, directed_m2());
    const auto pv = permutation_pvalues(d, cv, directed_m2(), res.profile.lrt.mean);
    if (pv.size() > 2 && pv[2].value) null_p.push_back(*pv[2].value);
  }
  const double ks = ks_smaller(null_p);
  const double crit = null_p.empty() ? 0.0 : std::sqrt(std::log(100.0) / (2.0 * static_cast<double>(null_p.size())));

  std::string final_text = fmt(p_final.value);
  if (p_final.below_resolution) final_text = "< " + fmt(p_final.upper_bound);
  const bool pass = p_final.value && *p_final.value < 0.01 && p_step2 && *p_step2 > 0.05 && null_p.size() == 50 &&
                    ks < crit;
  report(9, pass,
         "model 2 step " + std::to_string(r.res.optimal_length) + " p = " + final_text + " (target < 0.01); model 3 step 2 p = " +
             fmt(p_step2) + " (target > 0.05); null KS D+ = " + fmt(ks) + " vs " + fmt(crit) + " over " +
             std::to_string(null_p.size()) + " repetitions");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10(const std::string& cli) {
  if (cli.empty()) {
    report(10, false, "no CLI path given");
    return;
  }
  const fs::path root = fs::temp_directory_path() / ("sbh_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root);
  auto run = [&](const std::string& threads, const std::string& dir) {
    const std::string cmd = "\"" + cli + "\" cv --model 2 --seed 7 --B 8 --directed x1=lower,x2=upper,x3=upper --threads " +
                            threads + " --format json -q --out \"" + (root / dir).string() + "\"";
    return std::system(cmd.c_str());
  };
  const int a = run("1", "t1"), b = run("4", "t4");
  const std::string ja = slurp(root / "t1" / "result.json"), jb = slurp(root / "t4" / "result.json");
  fs::remove_all(root);
  const bool pass = a == 0 && b == 0 && !ja.empty() && ja == jb;
  report(10, pass,
         std::string("result.json ") + (ja == jb ? "identical" : "differs") + " for --threads 1 and 4 (" +
             std::to_string(ja.size()) + " bytes)");
}

void criterion11() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sim = generate(SimSpec::defaults(SimModel::M4, 1));
  PeelConfig peel;
  peel.criterion = Criterion::CHS;
  auto cv = rccv(8, 1);
  cv.opt = OptCriterion::CER;
  const auto res = replicated_cv(sim.data, cv, peel);
  const double secs = seconds_since(t0);
  const bool pass = secs < 600.0 && res.optimal_length <= 10 && res.used_covariates.size() <= 10;
  report(11, pass,
         "optimal length " + std::to_string(res.optimal_length) + " (target <= 10), used covariates " +
             std::to_string(res.used_covariates.size()) + " (target <= 10), " + fmt(secs) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  const auto m2 = model_two();
  criterion5(m2);
  criterion6();
  criterion7(m2);
  criterion8(m2);
  criterion9(m2);
  criterion10(cli);
  criterion11();
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
