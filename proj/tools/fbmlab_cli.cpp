// Command-line front end over the C API: one subcommand per experiment.
//
// Exit status: 0 all checks passed, 1 a check failed, 2 configuration or
// validation error (including bad arguments), 3 numerical failure, 4 internal
// error.
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fbmlab/fbmlab.h"

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  int workers = 0;
  std::vector<std::string> overrides;
};

int exit_code(fbmlab_status s) {
  switch (s) {
    case FBMLAB_OK:
      return 0;
    case FBMLAB_CHECKS_FAILED:
      return 1;
    case FBMLAB_CONFIG_ERROR:
    case FBMLAB_VALIDATION_ERROR:
    case FBMLAB_INVALID_ARGUMENT:
      return 2;
    case FBMLAB_NUMERIC_ERROR:
      return 3;
    default:
      return 4;
  }
}

const char* status_label(fbmlab_status s) {
  switch (s) {
    case FBMLAB_CONFIG_ERROR:
      return "config error";
    case FBMLAB_VALIDATION_ERROR:
      return "validation error";
    case FBMLAB_NUMERIC_ERROR:
      return "numerical error";
    case FBMLAB_INVALID_ARGUMENT:
      return "invalid argument";
    default:
      return "internal error";
  }
}

int report_error(fbmlab_status s) {
  std::fprintf(stderr, "fbmlab: %s: %s\n", status_label(s), fbmlab_last_error());
  return exit_code(s);
}

int run(const std::string& name, const Options& opt, bool seed_given) {
  using ReqPtr = std::unique_ptr<fbmlab_request, decltype(&fbmlab_request_destroy)>;
  using RepPtr = std::unique_ptr<fbmlab_report, decltype(&fbmlab_report_destroy)>;
  fbmlab_request* raw = nullptr;
  fbmlab_status s = fbmlab_request_create(name.c_str(), &raw);
  if (s != FBMLAB_OK) return report_error(s);
  ReqPtr req(raw, fbmlab_request_destroy);
  if (!opt.config.empty() && (s = fbmlab_request_set_config_file(req.get(), opt.config.c_str())) != FBMLAB_OK)
    return report_error(s);
  for (const auto& o : opt.overrides)
    if ((s = fbmlab_request_add_override(req.get(), o.c_str())) != FBMLAB_OK) return report_error(s);
  if (seed_given && (s = fbmlab_request_set_seed(req.get(), opt.seed)) != FBMLAB_OK) return report_error(s);
  if ((s = fbmlab_request_set_workers(req.get(), opt.workers)) != FBMLAB_OK) return report_error(s);
  if ((s = fbmlab_request_set_output_dir(req.get(), opt.out.c_str())) != FBMLAB_OK) return report_error(s);

  std::fprintf(stderr, "fbmlab: running %s\n", name.c_str());
  fbmlab_report* rep_raw = nullptr;
  s = fbmlab_run(req.get(), &rep_raw);
  if (s != FBMLAB_OK && s != FBMLAB_CHECKS_FAILED) return report_error(s);
  RepPtr rep(rep_raw, fbmlab_report_destroy);
  const int n = fbmlab_report_stat_count(rep.get());
  int failed = 0;
  for (int i = 0; i < n; ++i) {
    const char* stat = nullptr;
    double value = 0.0, tol = 0.0;
    int pass = 1;
    fbmlab_report_stat(rep.get(), i, &stat, &value, &tol, &pass);
    if (!pass) {
      ++failed;
      std::fprintf(stderr, "  FAIL %s = %.6g (tolerance %.6g)\n", stat, value, tol);
    }
  }
  std::fprintf(stderr, "fbmlab: %s finished in %.1f s, %d statistics, %d failed; report in %s\n", name.c_str(),
               fbmlab_report_duration(rep.get()), n, failed, opt.out.c_str());
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on SDEs driven by fractional Brownian motion with H < 1/2"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fbmlab_version());

  Options opt;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  std::vector<CLI::Option*> seed_opts;
  const int count = fbmlab_experiment_count();
  for (int i = 0; i < count; ++i) {
    CLI::App* sub = app.add_subcommand(fbmlab_experiment_name(i), fbmlab_experiment_summary(i));
    sub->add_option("--config", opt.config, "JSON config merged over the defaults")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory for the report and data files")->capture_default_str();
    seed_opts.push_back(sub->add_option("--seed", opt.seed, "master seed (replaces the config's seed)"));
    sub->add_option("--workers", opt.workers, "worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
    sub->add_option("--override", opt.overrides, "key.path=value, applied after --config")->take_all();
    subs.emplace_back(fbmlab_experiment_name(i), sub);
  }
  app.add_subcommand("defaults", "print the default config of an experiment")
      ->add_option("experiment", opt.config, "experiment name")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (app.got_subcommand("defaults")) {
    char* doc = nullptr;
    const fbmlab_status s = fbmlab_default_config(opt.config.c_str(), &doc);
    if (s != FBMLAB_OK) return report_error(s);
    std::printf("%s\n", doc);
    fbmlab_free_string(doc);
    return 0;
  }
  for (size_t i = 0; i < subs.size(); ++i)
    if (subs[i].second->parsed()) return run(subs[i].first, opt, seed_opts[i]->count() > 0);
  return 2;
}
