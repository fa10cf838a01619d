#pragma once

// Accuracy metrics and the end-to-end use-case pipeline.
//
// Run directory layout (RunConfig::out):
//   config.txt                resolved configuration
//   dataset/                  manifest.txt + maps/<id>.grid
//   ae.ckpt, ae_history.csv   autoencoder
//   ig.ckpt, ig_history.csv   solver network
//   oracle/<id>.grid          padded finite-difference solutions
//   predictions/<id>.grid     padded network predictions
//   oracle_reports.csv        per-map solver statistics
//   mape.csv                  per-map records
//   groups.csv                per-group MAPE table
//   summary.txt               experiment result
// Columns and lines whose name contains "wall" hold timings; everything
// else is reproducible bit for bit from the configuration.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "aeig/config.hpp"
#include "aeig/field.hpp"
#include "aeig/oracle.hpp"
#include "aeig/powermap.hpp"

namespace aeig::eval {

// 100 * mean |pred - truth| / |truth| over every cell of the padded grids.
// Unpadded fields are padded with their boundary value first.
double mape(const TemperatureField& pred, const TemperatureField& truth);

// Sum of squared differences over the padded grids.
double supervised_reference_loss(const TemperatureField& pred, const TemperatureField& truth);

double median(std::vector<double> v);

struct MapeRecord {
  std::string map_id;
  Split split = Split::train;
  std::string group;
  Family family = Family::sinusoidal;
  MapParams params;
  double mape = 0.0;           // percent
  double max_abs_error = 0.0;  // deg C
  double supervised_loss = 0.0;
  oracle::SolveReport oracle;
  double inference_wall_seconds = 0.0;
};

struct GroupSummary {
  std::string group;
  Split split = Split::test;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct ExperimentResult {
  UseCase use_case = UseCase::sin;
  std::uint64_t seed = 0;
  std::size_t train_maps = 0;
  std::size_t test_maps = 0;
  double train_mape = 0.0;  // mean of per-map MAPE
  double test_mape = 0.0;
  double ae_final_loss = 0.0;
  double ig_final_loss = 0.0;
  std::vector<GroupSummary> groups;
  std::vector<MapeRecord> records;
  double ae_wall_seconds = 0.0;
  double ig_wall_seconds = 0.0;
  double eval_wall_seconds = 0.0;
};

// Records grouped by (split, group) in first-seen order.
std::vector<GroupSummary> group_table(const std::vector<MapeRecord>& records);

// Oracle solutions for `maps` on up to `jobs` threads (compact operator).
// Results are in input order and independent of `jobs`.
std::vector<oracle::Solution> solve_all(const std::vector<const PowerMap*>& maps,
                                        const GridGeometry& solve_geom,
                                        const PhysicsParams& physics,
                                        const oracle::SolveOptions& opts, std::size_t jobs);

// A pipeline stage failed. `numerical` separates divergence, NaN and
// non-convergence from bad input or environment.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what, bool numerical)
      : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)), numerical_(numerical) {}
  const std::string& stage() const { return stage_; }
  bool numerical() const { return numerical_; }

 private:
  std::string stage_;
  bool numerical_;
};

// Stages. Each reads what the previous one wrote under cfg.out and throws
// StageError on failure.
DatasetManifest generate(const config::RunConfig& cfg);
// Trains the autoencoder (unless reuse_ae and ae.ckpt exists) and the solver.
void train(const config::RunConfig& cfg, bool reuse_ae);
// Oracle solves, predictions and reports. With oracle_only no checkpoint is
// needed and only the oracle outputs are written; MAPE fields stay zero.
ExperimentResult evaluate(const config::RunConfig& cfg, bool oracle_only);
// generate + train + evaluate.
ExperimentResult run_use_case(const config::RunConfig& cfg, bool reuse_ae = false);

void write_records_csv(const std::filesystem::path& path, const std::vector<MapeRecord>& records);
void write_groups_csv(const std::filesystem::path& path, const std::vector<GroupSummary>& groups);
void write_summary(const std::filesystem::path& path, const ExperimentResult& result,
                   const config::RunConfig& cfg);
// Human-readable summary: overall MAPE and the per-group table.
std::string format_summary(const ExperimentResult& result);

}  // namespace aeig::eval
