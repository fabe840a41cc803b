// rate_lab: Monte Carlo rate experiments for the spectral FDA estimators.
//
// Exit codes: 0 pass, 2 a check failed, 1 usage or runtime error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "specfda/blas_guard.hpp"
#include "specfda/covariance.hpp"
#include "specfda/lab/config.hpp"
#include "specfda/lab/experiment.hpp"
#include "specfda/lab/filter_suite.hpp"
#include "specfda/lab/report.hpp"
#include "specfda/mean.hpp"
#include "specfda/sample_set.hpp"

namespace {

using namespace specfda;
using namespace specfda::lab;

constexpr int kPass = 0;
constexpr int kError = 1;
constexpr int kFail = 2;

void print_cells(const std::vector<CellResult>& cells) {
  for (const auto& c : cells) {
    if (c.ok)
      std::printf("  n=%-5zu m=%-6g nm=%-8g lambda=%-10.4g median=%-12.6g iqr=%.4g\n", c.n, c.m,
                  c.nm, c.lambda, c.median, c.iqr);
    else
      std::printf("  n=%-5zu m=%-6g aborted: %s\n", c.n, c.m, c.reason.c_str());
  }
}

void print_fit(const char* label, const std::optional<SlopeFit>& f, const std::string& reason) {
  if (f)
    std::printf("%s slope=%.4f intercept=%.4f r2=%.4f\n", label, f->slope, f->intercept, f->r2);
  else
    std::printf("%s no fit: %s\n", label, reason.c_str());
}

int cmd_run_rate(const std::string& config_path, const std::string& out_dir) {
  const RateReport r = run_rate(load_config(config_path));
  print_cells(r.cells);
  print_fit("fit vs nm:", r.fit, r.fit_reason);
  std::printf("target %.4f +- %.3f  monotone=%s  %s  (%.1f s)\n", r.target, r.tolerance,
              r.monotone ? "yes" : "no", r.pass ? "PASS" : "FAIL", r.runtime_seconds);
  write_report_files(render(r), out_dir, r.runtime_seconds);
  return r.pass ? kPass : kFail;
}

int cmd_phase_scan(const std::string& config_path, const std::string& out_dir) {
  const PhaseReport r = phase_transition_scan(load_config(config_path));
  std::printf("gamma* = %.4f\n", r.gamma_star);
  for (const auto& row : r.rows) {
    std::printf("gamma=%g (%s), m = ceil(n^gamma)\n", row.gamma, row.regime.c_str());
    print_cells(row.cells);
    print_fit("  fit vs n:", row.fit, row.fit_reason);
    std::printf("  target %.4f +- %.3f  %s\n", row.target, r.config.slope_tolerance,
                row.pass ? "PASS" : "FAIL");
  }
  std::printf("crossing: %s  %s  (%.1f s)\n",
              r.crossing ? (*r.crossing ? "yes" : "no") : "not claimed", r.pass ? "PASS" : "FAIL",
              r.runtime_seconds);
  write_report_files(render(r), out_dir, r.runtime_seconds);
  return r.pass ? kPass : kFail;
}

int cmd_saturation(const std::string& config_path, const std::string& out_dir) {
  const SaturationReport r = saturation_compare(load_config(config_path));
  for (const auto& pc : r.cells)
    std::printf("  nm=%-8g %s=%-12.6g %s=%-12.6g median ratio=%-8.4f share<=1: %.2f\n",
                pc.first.nm, r.first_filter.c_str(), pc.first.median, r.second_filter.c_str(),
                pc.second.median, pc.median_ratio, pc.fraction_at_most_one);
  print_fit((r.first_filter + ":").c_str(), r.first_fit, r.fit_reason);
  print_fit((r.second_filter + ":").c_str(), r.second_fit, r.fit_reason);
  std::printf("target exponents %s %.4f, %s %.4f; largest-cell share %.2f  %s  (%.1f s)\n",
              r.first_filter.c_str(), r.first_exponent, r.second_filter.c_str(),
              r.second_exponent, r.largest_cell_fraction, r.pass ? "PASS" : "FAIL",
              r.runtime_seconds);
  write_report_files(render(r), out_dir, r.runtime_seconds);
  return r.pass ? kPass : kFail;
}

struct FitOneArgs {
  std::string task = "mean";
  std::string kernel = "brownian";
  std::string filter = "tikhonov";
  std::string rule = "empirical-operator";
  double lambda = 0.0;
  double eta = 0.0;
  std::string data;
  std::string out;
};

int cmd_fit_one(const FitOneArgs& a) {
  const SampleSet samples = read_sample_csv(a.data);
  const Kernel1 kernel = parse_kernel(a.kernel);
  const Filter filter = parse_filter(a.filter);
  MeanFitOptions mopt;
  mopt.target = parse_target(a.rule);
  if (a.task == "mean") {
    const MeanFit fit = fit_mean(samples, kernel, filter, a.lambda, mopt);
    write_mean_csv(fit.estimate, a.out);
    std::printf("mean: %zu anchors, lambda=%g, effective dimension %.4f -> %s\n",
                static_cast<std::size_t>(fit.estimate.anchors.size()), a.lambda,
                fit.diagnostics->effective_dimension, a.out.c_str());
    return kPass;
  }
  if (a.task != "covariance") throw Error(ErrorCode::BadConfig, "task must be mean or covariance");
  mopt.diagnostics = false;
  const double eta = a.eta > 0.0 ? a.eta : a.lambda;
  const MeanFit mean = fit_mean(samples, kernel, filter, eta, mopt);
  CovFitOptions copt;
  copt.target = mopt.target;
  const CovEstimate est =
      fit_covariance(samples, mean.estimate, Kernel2::product(kernel), filter, a.lambda, copt);
  write_cov_csv(est, a.out);
  std::printf("covariance: %zu pairs, lambda=%g, eta=%g -> %s\n", est.anchors.size(), a.lambda,
              eta, a.out.c_str());
  return kPass;
}

int cmd_verify_filters(const std::string& out_dir) {
  const FilterSuite s = run_filter_suite();
  Json j = Json::array();
  for (const auto& r : s.reports) {
    std::printf("%-10s a1=%.12f a2=%.12f a3=%.12f", std::string(filter_name(r.filter.family)).c_str(),
                r.a1, r.a2, r.a3);
    for (const auto& q : r.qualification)
      std::printf("  p=%g:%s", q.p, q.pass ? "ok" : "FAIL");
    std::printf("  %s\n", r.pass() ? "PASS" : "FAIL");
    j.push_back(to_json(r));
  }
  std::printf("tikhonov witness: max p=1 envelope %.12f (<= 1), p=2 envelope at lambda=%g: %.6g (> 10)  %s\n",
              s.tikhonov_p1_envelope, s.witness_lambda, s.tikhonov_p2_envelope,
              s.witness_pass ? "PASS" : "FAIL");
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    Json doc;
    doc["families"] = std::move(j);
    doc["tikhonov_p1_envelope"] = s.tikhonov_p1_envelope;
    doc["tikhonov_p2_envelope"] = s.tikhonov_p2_envelope;
    doc["pass"] = s.pass();
    write_text(std::filesystem::path(out_dir) / "filters.json", doc.dump(2) + "\n");
  }
  return s.pass() ? kPass : kFail;
}

// Seconds-scale checks of the whole pipeline.
int cmd_selftest() {
  bool ok = true;
  const auto check = [&](const char* name, bool pass) {
    std::printf("%-44s %s\n", name, pass ? "PASS" : "FAIL");
    ok = ok && pass;
  };
  check("eigensolver reconstruction", blas_self_check());
  check("filter families", run_filter_suite().pass());

  std::vector<std::pair<double, double>> line;
  for (double x : {10.0, 100.0, 1000.0, 10000.0}) line.emplace_back(x, 2.0 * std::pow(x, -0.5));
  const SlopeFit f = fit_slope(line);
  check("slope fit on an exact power law", std::abs(f.slope + 0.5) < 1e-12 &&
                                                std::abs(f.intercept - std::log(2.0)) < 1e-12);

  ExperimentConfig c = parse_config_text(
      "task = mean\nxi_rule = none\nsigma0 = 0\nh_rule = unit\nreplications = 2\n"
      "n_list = 20\nm_list = 20\nfilter = cutoff\n");
  const Setting s = make_setting(c);
  const CellResult cell = run_cell(s, 20, 20.0, replication_seeds(c));
  check("noiseless mean cell error below 1e-2", cell.ok && cell.median < 1e-2);
  const CellResult again = run_cell(s, 20, 20.0, replication_seeds(c));
  check("cell rerun is bit-identical", cell.errors == again.errors);
  return ok ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  if (!specfda::ensure_reliable_blas(argv)) {
    std::fprintf(stderr, "rate_lab: eigensolver self-check failed for every OpenBLAS core type tried\n");
    return kError;
  }
  CLI::App app{"Monte Carlo rate experiments for spectral mean and covariance estimators"};
  app.require_subcommand(1);

  std::string config, out = "rate_lab_out";
  auto add_run = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment config (key = value)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory")->capture_default_str();
    return sub;
  };
  auto* run_rate_cmd = add_run("run-rate", "sweep (n, m) cells and fit the log-log slope against nm");
  auto* phase_cmd = add_run("phase-scan", "slopes against n with m = ceil(n^gamma) for each gamma");
  auto* sat_cmd = add_run("saturation", "paired filter comparison at identical seeds");

  FitOneArgs fa;
  auto* fit_cmd = app.add_subcommand("fit-one", "fit one estimate from a sample CSV");
  fit_cmd->add_option("--task", fa.task, "mean | covariance")->capture_default_str();
  fit_cmd->add_option("--kernel", fa.kernel, "brownian | gaussian:<bw> | matern:<nu>:<ls>")->capture_default_str();
  fit_cmd->add_option("--filter", fa.filter, "tikhonov | cutoff | showalter | landweber")->capture_default_str();
  fit_cmd->add_option("--rule", fa.rule, "empirical-operator | gram-weight-gram")->capture_default_str();
  fit_cmd->add_option("--lambda", fa.lambda, "regularization")->required();
  fit_cmd->add_option("--eta", fa.eta, "mean regularization for covariance centering (default: lambda)");
  fit_cmd->add_option("--data", fa.data, "curve_id,t,y CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fa.out, "estimate CSV")->required();

  std::string filters_out;
  auto* vf_cmd = app.add_subcommand("verify-filters", "check the four filter-family conditions");
  vf_cmd->add_option("--out", filters_out, "directory for filters.json");
  auto* self_cmd = app.add_subcommand("selftest", "quick end-to-end checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "rate_lab: %s\n\n%s", e.what(), app.help().c_str());
    return kError;
  }

  try {
    if (*run_rate_cmd) return cmd_run_rate(config, out);
    if (*phase_cmd) return cmd_phase_scan(config, out);
    if (*sat_cmd) return cmd_saturation(config, out);
    if (*fit_cmd) return cmd_fit_one(fa);
    if (*vf_cmd) return cmd_verify_filters(filters_out);
    if (*self_cmd) return cmd_selftest();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rate_lab: %s\n", e.what());
    return kError;
  }
  return kError;
}
