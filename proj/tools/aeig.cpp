// aeig: generate datasets, train, evaluate.
//
// Exit codes: 0 success, 2 bad input or environment, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aeig/config.hpp"
#include "aeig/errors.hpp"
#include "aeig/eval.hpp"

using namespace aeig;

namespace {

constexpr int kInputError = 2;
constexpr int kNumericalError = 3;

struct Common {
  std::string use_case;
  std::string config_file;
  std::string preset;
  std::string seed;
  std::string out;
  std::string jobs;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("use_case", c.use_case, "sin, exp, tile2d or tile3d");
  cmd->add_option("--config", c.config_file, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", c.preset, "full or desk");
  cmd->add_option("--seed", c.seed, "seed for data and network initialisation");
  cmd->add_option("--out", c.out, "run directory");
  cmd->add_option("--jobs", c.jobs, "parallel oracle solves and inferences");
  cmd->add_option("--set", c.sets, "override any config key, KEY=VALUE (repeatable)");
}

config::RunConfig resolve(const Common& c) {
  config::Overrides o;
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    o.values[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) o.values[key] = v;
  };
  put("use_case", c.use_case);
  put("preset", c.preset);
  put("seed", c.seed);
  put("out", c.out);
  put("jobs", c.jobs);
  return config::resolve(c.config_file, o);
}

void print_manifest(const DatasetManifest& ds, const config::RunConfig& cfg) {
  std::printf("dataset %s: %zu train, %zu test maps, normalization max %.6g, written to %s\n",
              to_string(ds.use_case), ds.count(Split::train), ds.count(Split::test),
              ds.normalization_max, (cfg.out / "dataset").string().c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AEIG: autoencoder + image-gradient heat equation solver"};
  app.require_subcommand(1);

  Common gen_opts, train_opts, eval_opts, all_opts;
  bool reuse_ae = false, reuse_ae_all = false, oracle_only = false;

  auto* gen = app.add_subcommand("generate", "write the standard train/test power maps");
  add_common(gen, gen_opts);
  auto* trn = app.add_subcommand("train", "train the autoencoder, then the solver network");
  add_common(trn, train_opts);
  trn->add_flag("--reuse-ae", reuse_ae, "keep an existing ae.ckpt instead of retraining");
  auto* evl = app.add_subcommand("evaluate", "oracle solves, predictions and MAPE reports");
  add_common(evl, eval_opts);
  evl->add_flag("--oracle-only", oracle_only, "only run the finite-difference oracle");
  auto* all = app.add_subcommand("run-all", "generate, train and evaluate");
  add_common(all, all_opts);
  all->add_flag("--reuse-ae", reuse_ae_all, "keep an existing ae.ckpt instead of retraining");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = resolve(gen_opts);
      print_manifest(eval::generate(cfg), cfg);
    } else if (trn->parsed()) {
      const auto cfg = resolve(train_opts);
      eval::train(cfg, reuse_ae);
      std::printf("checkpoints written to %s\n", cfg.out.string().c_str());
    } else if (evl->parsed()) {
      const auto cfg = resolve(eval_opts);
      const auto res = eval::evaluate(cfg, oracle_only);
      if (oracle_only)
        std::printf("oracle solved %zu maps, results in %s\n", res.records.size(),
                    cfg.out.string().c_str());
      else
        std::cout << eval::format_summary(res);
    } else if (all->parsed()) {
      const auto cfg = resolve(all_opts);
      print_manifest(eval::generate(cfg), cfg);
      eval::train(cfg, reuse_ae_all);
      std::cout << eval::format_summary(eval::evaluate(cfg, false));
    }
  } catch (const eval::StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.numerical() ? kNumericalError : kInputError;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericalError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return 0;
}
