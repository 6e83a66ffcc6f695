#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sbh/sbh.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string input;
  std::string model;
  std::optional<std::size_t> n, p;
  double pi = 0.5;
  double sigma = 1.0;
  double alpha0 = 0.10;
  double beta0 = 0.05;
  std::string criterion = "lrt";
  std::string opt = "lrt";
  std::string technique = "combined";
  std::string lrt_scale = "chisq";
  std::size_t K = 5, B = 16, A = 256, M = 1;
  bool paste = false;
  std::string directed;
  bool one_se = false;
  std::uint64_t seed = 0;
  std::size_t threads = sbh::default_thread_count();
  std::string out = ".";
  std::string format = "both";
  bool verbose = false;
  bool quiet = false;
};

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--input", o.input, "CSV with time, status and covariate columns");
  cmd->add_option("--model", o.model, "simulated model instead of --input")
      ->check(CLI::IsMember({"1", "1b", "2", "3", "4"}));
  cmd->add_option("--n", o.n, "simulated sample size");
  cmd->add_option("--p", o.p, "simulated covariate count");
  cmd->add_option("--pi", o.pi, "simulated censoring fraction, 0 for none")->capture_default_str();
  cmd->add_option("--sigma", o.sigma, "model 4 covariate sd")->capture_default_str();
}

void add_run_options(CLI::App* cmd, Options& o) {
  add_data_options(cmd, o);
  cmd->add_option("--alpha0", o.alpha0, "peeling quantile")->capture_default_str();
  cmd->add_option("--beta0", o.beta0, "minimal box support")->capture_default_str();
  cmd->add_option("--criterion", o.criterion, "peeling criterion")
      ->check(CLI::IsMember({"lrt", "chs", "lhr"}))
      ->capture_default_str();
  cmd->add_option("--opt", o.opt, "length optimisation criterion")
      ->check(CLI::IsMember({"lhr", "lrt", "cer"}))
      ->capture_default_str();
  cmd->add_option("--technique", o.technique, "cross-validation technique")
      ->check(CLI::IsMember({"averaged", "combined", "none"}))
      ->capture_default_str();
  cmd->add_option("--lrt-scale", o.lrt_scale, "cross-validated log-rank scale")
      ->check(CLI::IsMember({"chisq", "signed"}))
      ->capture_default_str();
  cmd->add_option("--K", o.K, "folds")->capture_default_str();
  cmd->add_option("--B", o.B, "replicates")->capture_default_str();
  cmd->add_option("--A", o.A, "permutations")->capture_default_str();
  cmd->add_option("--M", o.M, "boxes in the coverage loop")->capture_default_str();
  cmd->add_flag("--paste", o.paste, "paste after peeling");
  cmd->add_option("--directed", o.directed, "side table, e.g. x1=lower,x2=upper");
  cmd->add_flag("--one-se", o.one_se, "one standard error rule");
  cmd->add_option("--seed", o.seed, "master seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "worker threads")->capture_default_str();
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--format", o.format, "artifact formats")
      ->check(CLI::IsMember({"json", "csv", "both"}))
      ->capture_default_str();
  cmd->add_flag("-v,--verbose", o.verbose, "progress on stderr");
  cmd->add_flag("-q,--quiet", o.quiet, "no summary on stdout");
}

sbh::SimSpec sim_spec(const Options& o) {
  auto spec = sbh::SimSpec::defaults(sbh::parse_model(o.model), o.seed);
  if (o.n) spec.n = *o.n;
  if (o.p) spec.p = *o.p;
  spec.pi = o.pi;
  spec.sigma = o.sigma;
  return spec;
}

sbh::RunConfig resolve(const std::string& command, const Options& o) {
  sbh::RunConfig rc;
  rc.command = command;
  if (!o.input.empty()) rc.input = o.input;
  if (!o.model.empty()) rc.simulation = sim_spec(o);
  rc.peel.alpha0 = o.alpha0;
  rc.peel.beta0 = o.beta0;
  rc.peel.criterion = o.criterion == "chs" ? sbh::Criterion::CHS
                      : o.criterion == "lhr" ? sbh::Criterion::LHR
                                             : sbh::Criterion::LRT;
  rc.peel.pasting = o.paste;
  rc.cv.K = o.K;
  rc.cv.B = o.B;
  rc.cv.A = o.A;
  rc.cv.technique = o.technique == "averaged" ? sbh::Technique::Averaged
                    : o.technique == "none"   ? sbh::Technique::None
                                              : sbh::Technique::Combined;
  rc.cv.opt = o.opt == "lhr" ? sbh::OptCriterion::LHR
              : o.opt == "cer" ? sbh::OptCriterion::CER
                               : sbh::OptCriterion::LRT;
  rc.cv.lrt_scale = o.lrt_scale == "signed" ? sbh::LrtScale::Signed : sbh::LrtScale::ChiSquare;
  rc.cv.one_se = o.one_se;
  rc.cv.seed = o.seed;
  rc.cv.threads = o.threads == 0 ? 1 : o.threads;
  rc.M = o.M;
  rc.out_dir = o.out;
  rc.format = o.format == "json" ? sbh::OutputFormat::Json
              : o.format == "csv" ? sbh::OutputFormat::Csv
                                  : sbh::OutputFormat::Both;
  rc.verbosity = o.quiet ? 0 : o.verbose ? 2 : 1;
  rc.validate();
  return rc;
}

sbh::SurvivalData load_data(const sbh::RunConfig& rc) {
  if (rc.input) return sbh::load_csv(*rc.input);
  return sbh::generate(*rc.simulation).data;
}

void log(const sbh::RunConfig& rc, const std::string& msg) {
  if (rc.verbosity >= 2) std::cerr << "sbh: " << msg << '\n';
}

std::string render(auto&& writer) {
  std::ostringstream ss;
  writer(ss);
  return ss.str();
}

void write_cv_artifacts(const sbh::RunConfig& rc, const sbh::SurvivalData& data, const sbh::CvResult& res) {
  const fs::path dir(rc.out_dir);
  const auto& names = data.covariate_names;
  if (rc.json_output()) {
    auto doc = sbh::result_document(rc, data);
    doc["cv"] = sbh::cv_json(res, names);
    doc["warnings"] = sbh::warnings_json(res.warnings);
    sbh::annotate_nulls(doc);
    sbh::write_json((dir / "result.json").string(), doc);
  }
  if (rc.csv_output()) {
    sbh::write_text(dir / "profile.csv", render([&](std::ostream& o) { sbh::write_profile_csv(o, res); }));
    sbh::write_text(dir / "trajectory.csv", render([&](std::ostream& o) { sbh::write_trajectory_csv(o, res, names); }));
    sbh::write_text(dir / "traces.csv", render([&](std::ostream& o) { sbh::write_traces_csv(o, res, names); }));
    std::vector<sbh::Mask> members;
    for (const auto& s : res.steps) members.push_back(s.membership);
    sbh::write_text(dir / "km_curves.csv", render([&](std::ostream& o) { sbh::write_km_csv(o, data, members); }));
  }
  sbh::write_text(dir / "rules.txt", render([&](std::ostream& o) { sbh::write_rules(o, res, names); }));
}

void print_cv_summary(const sbh::RunConfig& rc, const sbh::SurvivalData& data, const sbh::CvResult& res) {
  if (rc.verbosity == 0) return;
  const auto& s = res.optimal();
  std::cout << "optimal length: " << res.optimal_length << " of " << res.profile.length << '\n';
  std::cout << "support: " << sbh::csv_number(s.support) << '\n';
  std::cout << "rule: " << sbh::rule_text(sbh::rule_conjuncts(s), data.covariate_names) << '\n';
  if (!res.p_values.empty() && res.optimal_length < res.p_values.size()) {
    const auto& pv = res.p_values[res.optimal_length];
    if (pv.value)
      std::cout << "p-value: " << (pv.below_resolution ? "< " + sbh::format_number(pv.upper_bound)
                                                       : sbh::format_number(*pv.value))
                << '\n';
  }
  for (const auto& w : res.warnings) std::cerr << "warning: " << w.code << ": " << w.message << '\n';
}

int run_fit(const Options& o) {
  auto rc = resolve("fit", o);
  const auto data = load_data(rc);
  if (!o.directed.empty()) rc.peel.sides = sbh::parse_sides(o.directed, data.covariate_names);
  fs::create_directories(rc.out_dir);
  log(rc, "fitting " + std::to_string(rc.M) + " box(es) on n=" + std::to_string(data.n()));
  const auto cov = sbh::coverage_loop(data, rc.peel, rc.M);
  const fs::path dir(rc.out_dir);
  const auto& names = data.covariate_names;
  if (rc.json_output()) {
    auto doc = sbh::result_document(rc, data);
    doc["fit"] = sbh::coverage_json(cov, data);
    doc["warnings"] = sbh::json::array();
    sbh::annotate_nulls(doc);
    sbh::write_json((dir / "result.json").string(), doc);
  }
  if (rc.csv_output()) {
    const auto& t = cov.boxes.front();
    sbh::write_text(dir / "profile.csv", render([&](std::ostream& os) { sbh::write_profile_csv(os, t); }));
    sbh::write_text(dir / "trajectory.csv", render([&](std::ostream& os) { sbh::write_trajectory_csv(os, cov, names); }));
    sbh::write_text(dir / "traces.csv", render([&](std::ostream& os) { sbh::write_traces_csv(os, t, names); }));
    std::vector<sbh::Mask> members;
    for (const auto& s : t.steps) members.push_back(s.box.membership(data));
    sbh::write_text(dir / "km_curves.csv", render([&](std::ostream& os) { sbh::write_km_csv(os, data, members); }));
  }
  sbh::write_text(dir / "rules.txt", render([&](std::ostream& os) { sbh::write_rules(os, cov, names); }));
  if (rc.verbosity > 0) std::cout << "rule: " << cov.rule << '\n';
  return 0;
}

int run_cv(const Options& o, bool permute) {
  auto rc = resolve(permute ? "permtest" : "cv", o);
  const auto data = load_data(rc);
  if (!o.directed.empty()) rc.peel.sides = sbh::parse_sides(o.directed, data.covariate_names);
  fs::create_directories(rc.out_dir);
  log(rc, "cross-validating with B=" + std::to_string(rc.cv.replicates()) + " on n=" + std::to_string(data.n()));
  auto res = sbh::replicated_cv(data, rc.cv, rc.peel);
  if (permute) {
    log(rc, "running " + std::to_string(rc.cv.A) + " permutations");
    res.p_values = sbh::permutation_pvalues(data, rc.cv, rc.peel, res.profile.lrt.mean);
  }
  write_cv_artifacts(rc, data, res);
  print_cv_summary(rc, data, res);
  return 0;
}

int run_simulate(const Options& o) {
  const auto spec = sim_spec(o);
  const auto sim = sbh::generate(spec);
  fs::create_directories(o.out);
  sbh::write_csv((fs::path(o.out) / "data.csv").string(), sim.data);
  sbh::write_json((fs::path(o.out) / "truth.json").string(), sbh::truth_json(spec, sim));
  if (!o.quiet)
    std::cout << "wrote n=" << sim.data.n() << " p=" << sim.data.p() << " events=" << sim.data.event_count()
              << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival bump hunting by recursive peeling"};
  app.require_subcommand(1);
  Options o;
  auto* fit = app.add_subcommand("fit", "peel boxes on the full data");
  add_run_options(fit, o);
  auto* cv = app.add_subcommand("cv", "replicated cross-validation of the peeling length");
  add_run_options(cv, o);
  auto* perm = app.add_subcommand("permtest", "cross-validation with permutation p-values");
  add_run_options(perm, o);
  auto* sim = app.add_subcommand("simulate", "write a simulated dataset and its ground truth");
  add_data_options(sim, o);
  sim->get_option("--model")->required();
  sim->add_option("--seed", o.seed, "seed")->capture_default_str();
  sim->add_option("--out", o.out, "output directory")->capture_default_str();
  sim->add_flag("-q,--quiet", o.quiet, "no summary on stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return run_fit(o);
    if (cv->parsed()) return run_cv(o, false);
    if (perm->parsed()) return run_cv(o, true);
    return run_simulate(o);
  } catch (const sbh::Error& e) {
    std::cerr << sbh::error_json(std::string(sbh::to_string(e.code())), e.what()).dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << sbh::error_json("Internal", e.what()).dump() << '\n';
    return 1;
  }
}
