#include "aeig/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "aeig/autoencoder.hpp"
#include "aeig/checkpoint.hpp"
#include "aeig/errors.hpp"
#include "aeig/solver.hpp"
#include "aeig/text.hpp"

namespace aeig::eval {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

void check_pair(const TemperatureField& a, const TemperatureField& b, const char* what) {
  if (a.geom != b.geom)
    throw ShapeError(std::string(what) + ": fields " + a.map_id + " and " + b.map_id +
                     " are on different grids");
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

}  // namespace

double mape(const TemperatureField& pred, const TemperatureField& truth) {
  check_pair(pred, truth, "mape");
  const auto p = pred.with_boundary(), t = truth.with_boundary();
  double s = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (t.values[i] == 0.0) throw DomainError("mape: reference temperature is zero in " + truth.map_id);
    s += std::abs(p.values[i] - t.values[i]) / std::abs(t.values[i]);
  }
  return 100.0 * s / static_cast<double>(p.values.size());
}

double supervised_reference_loss(const TemperatureField& pred, const TemperatureField& truth) {
  check_pair(pred, truth, "supervised_reference_loss");
  const auto p = pred.with_boundary(), t = truth.with_boundary();
  double s = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) s += (p.values[i] - t.values[i]) * (p.values[i] - t.values[i]);
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<GroupSummary> group_table(const std::vector<MapeRecord>& records) {
  std::vector<GroupSummary> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const GroupSummary& g) {
      return g.split == r.split && g.group == r.group;
    });
    if (it == out.end()) {
      out.push_back({r.group, r.split});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(r.mape);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    const auto& v = values[g];
    out[g].count = v.size();
    double s = 0.0;
    for (double x : v) s += x;
    out[g].mean = s / static_cast<double>(v.size());
    out[g].median = median(v);
    out[g].max = *std::max_element(v.begin(), v.end());
  }
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// (lowest index) is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<oracle::Solution> solve_all(const std::vector<const PowerMap*>& maps,
                                        const GridGeometry& solve_geom,
                                        const PhysicsParams& physics,
                                        const oracle::SolveOptions& opts, std::size_t jobs) {
  std::vector<oracle::Solution> out(maps.size());
  parallel_for(maps.size(), jobs,
               [&](std::size_t i) { out[i] = oracle::solve(*maps[i], physics, solve_geom, opts); });
  return out;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

template <class F>
auto stage(const std::string& name, F fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const NumericalError& e) {
    throw StageError(name, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), false);
  }
}

void progress(const char* tag, const config::RunConfig& cfg, const nn::EpochRecord& r,
              std::size_t epochs) {
  if (cfg.log_every == 0) return;
  if (r.epoch % cfg.log_every != 0 && r.epoch + 1 != epochs) return;
  std::fprintf(stderr, "[%s] %s epoch %zu/%zu loss %.6g (%.1f s)\n", to_string(cfg.use_case), tag,
               r.epoch, epochs, r.loss, r.wall_seconds);
}

DatasetManifest load_dataset(const config::RunConfig& cfg) {
  const fs::path dir = cfg.out / "dataset";
  if (!fs::exists(dir / "manifest.txt"))
    throw IoError("no dataset at " + dir.string() + "; run generate first");
  DatasetManifest ds = read_dataset(dir);
  if (ds.use_case != cfg.use_case)
    throw ConfigError("dataset in " + dir.string() + " is for use case " + to_string(ds.use_case) +
                      ", config asks for " + to_string(cfg.use_case));
  if (ds.map_geom != cfg.map_geom() || ds.solve_geom != cfg.solve_geom())
    throw ConfigError("dataset in " + dir.string() + " was generated for a different grid");
  return ds;
}

double last_wall(const fs::path& history_csv) {
  std::ifstream is(history_csv);
  std::string line, last;
  while (std::getline(is, line))
    if (!line.empty()) last = line;
  const auto cols = text::split(last, ',');
  if (cols.size() != 3 || cols[0] == "epoch") return 0.0;
  return text::parse_double(cols[2]);
}

std::string meta_or(const nn::Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  return it == c.meta.end() ? "0" : it->second;
}

void write_fields(const fs::path& dir, const std::vector<TemperatureField>& fields) {
  fs::create_directories(dir);
  for (const auto& f : fields) write_field(dir / (f.map_id + ".grid"), f.with_boundary());
}

void write_oracle_reports(const fs::path& path, const std::vector<const PowerMap*>& maps,
                          const std::vector<oracle::Solution>& sols) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "map_id,iterations,relative_residual,omega,converged,wall_seconds\n";
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& r = sols[i].report;
    os << maps[i]->id << ',' << r.iterations << ',' << text::format_double(r.relative_residual) << ','
       << text::format_double(r.omega) << ',' << (r.converged ? 1 : 0) << ','
       << text::format_double(r.wall_seconds) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace

DatasetManifest generate(const config::RunConfig& cfg) {
  return stage("generate", [&] {
    cfg.validate();
    fs::create_directories(cfg.out);
    config::write_config_file(cfg.out / "config.txt", cfg);
    DatasetManifest ds = build_standard_datasets(cfg.use_case, cfg.dataset_options());
    write_dataset(cfg.out / "dataset", ds);
    return ds;
  });
}

void train(const config::RunConfig& cfg, bool reuse_ae) {
  const DatasetManifest ds = stage("train", [&] {
    cfg.validate();
    fs::create_directories(cfg.out);
    config::write_config_file(cfg.out / "config.txt", cfg);
    return load_dataset(cfg);
  });
  const auto train_maps = ds.split(Split::train);
  const fs::path ae_path = cfg.out / "ae.ckpt";

  const ae::AEModel model = stage("autoencoder", [&] {
    if (reuse_ae && fs::exists(ae_path)) {
      auto m = ae::load_ae(ae_path);
      if (m.geom != ds.map_geom || m.latent_dim() != cfg.ae_arch.latent_dim)
        throw ConfigError(ae_path.string() + " does not match the configured grid or latent size");
      if (cfg.log_every)
        std::fprintf(stderr, "[%s] reusing %s\n", to_string(cfg.use_case), ae_path.string().c_str());
      return m;
    }
    auto m = ae::build_ae(ds.map_geom, cfg.ae_arch, cfg.ae_seed());
    const auto x = ae::map_batch(train_maps, ds.normalization_max);
    auto hist = ae::train_ae(m, x, cfg.ae_schedule, [&](const nn::EpochRecord& r) {
      progress("autoencoder", cfg, r, cfg.ae_schedule.epochs);
    });
    nn::write_history_csv(cfg.out / "ae_history.csv", hist);
    ae::save_ae(ae_path, m,
                {{"use_case", to_string(cfg.use_case)},
                 {"normalization_max", text::format_double(ds.normalization_max)},
                 {"final_loss", hist.empty() ? "0" : text::format_double(hist.back().loss)}});
    return m;
  });

  stage("solver", [&] {
    auto ig = solver::build_ig(ds.solve_geom, model.latent_dim(), cfg.ig_arch,
                               cfg.physics.t_boundary, cfg.ig_seed());
    std::vector<nn::EpochRecord> hist;
    try {
      hist = solver::train_aeig(ig, model, ds, cfg.physics, cfg.ig_schedule,
                                [&](const nn::EpochRecord& r) {
                                  progress("solver", cfg, r, cfg.ig_schedule.schedule.epochs);
                                });
    } catch (const solver::DivergenceError& e) {
      const fs::path diag = cfg.out / "ig_diverged_history.csv";
      nn::write_history_csv(diag, e.history());
      throw NumericalError(std::string(e.what()) + "; history written to " + diag.string());
    }
    nn::write_history_csv(cfg.out / "ig_history.csv", hist);
    solver::save_ig(cfg.out / "ig.ckpt", ig,
                    {{"use_case", to_string(cfg.use_case)},
                     {"final_loss", hist.empty() ? "0" : text::format_double(hist.back().loss)}});
  });
}

ExperimentResult evaluate(const config::RunConfig& cfg, bool oracle_only) {
  const auto start = Clock::now();
  const DatasetManifest ds = stage("evaluate", [&] {
    cfg.validate();
    return load_dataset(cfg);
  });
  std::vector<const PowerMap*> maps;
  for (const auto& m : ds.maps) maps.push_back(&m);

  ExperimentResult res;
  res.use_case = cfg.use_case;
  res.seed = cfg.seed;
  res.train_maps = ds.count(Split::train);
  res.test_maps = ds.count(Split::test);

  // Load models before the (longer) oracle stage so a missing checkpoint fails fast.
  ae::AEModel enc;
  solver::IGModel ig;
  if (!oracle_only)
    stage("evaluate", [&] {
      for (const char* f : {"ae.ckpt", "ig.ckpt"})
        if (!fs::exists(cfg.out / f))
          throw IoError("missing checkpoint " + (cfg.out / f).string() + "; run train first");
      enc = ae::load_ae(cfg.out / "ae.ckpt");
      ig = solver::load_ig(cfg.out / "ig.ckpt");
      if (ig.geom != ds.solve_geom || enc.geom != ds.map_geom)
        throw ConfigError("checkpoints in " + cfg.out.string() + " do not match the dataset grid");
      res.ae_final_loss = text::parse_double(meta_or(nn::load_checkpoint(cfg.out / "ae.ckpt"), "final_loss"));
      res.ig_final_loss = text::parse_double(meta_or(nn::load_checkpoint(cfg.out / "ig.ckpt"), "final_loss"));
    });

  const auto sols = stage("oracle", [&] {
    auto s = solve_all(maps, ds.solve_geom, cfg.physics, cfg.oracle, cfg.jobs);
    std::vector<TemperatureField> fields;
    for (const auto& x : s) fields.push_back(x.field);
    write_fields(cfg.out / "oracle", fields);
    write_oracle_reports(cfg.out / "oracle_reports.csv", maps, s);
    return s;
  });

  for (std::size_t i = 0; i < maps.size(); ++i) {
    MapeRecord r;
    r.map_id = maps[i]->id;
    r.split = maps[i]->split;
    r.group = maps[i]->group;
    r.family = maps[i]->family;
    r.params = maps[i]->params;
    r.oracle = sols[i].report;
    res.records.push_back(r);
  }

  if (!oracle_only)
    stage("inference", [&] {
      std::vector<TemperatureField> preds(maps.size());
      parallel_for(maps.size(), cfg.jobs, [&](std::size_t i) {
        const auto t0 = Clock::now();
        preds[i] = solver::infer_unseen(ig, enc, *maps[i], ds.normalization_max);
        preds[i].check_finite();
        auto& r = res.records[i];
        r.inference_wall_seconds = seconds_since(t0);
        r.mape = mape(preds[i], sols[i].field);
        r.supervised_loss = supervised_reference_loss(preds[i], sols[i].field);
        const auto p = preds[i].with_boundary(), t = sols[i].field.with_boundary();
        for (std::size_t c = 0; c < p.values.size(); ++c)
          r.max_abs_error = std::max(r.max_abs_error, std::abs(p.values[c] - t.values[c]));
      });
      write_fields(cfg.out / "predictions", preds);
    });

  double s_train = 0.0, s_test = 0.0;
  for (const auto& r : res.records) (r.split == Split::train ? s_train : s_test) += r.mape;
  if (res.train_maps) res.train_mape = s_train / static_cast<double>(res.train_maps);
  if (res.test_maps) res.test_mape = s_test / static_cast<double>(res.test_maps);
  res.groups = group_table(res.records);
  res.ae_wall_seconds = last_wall(cfg.out / "ae_history.csv");
  res.ig_wall_seconds = last_wall(cfg.out / "ig_history.csv");
  res.eval_wall_seconds = seconds_since(start);

  stage("report", [&] {
    write_records_csv(cfg.out / "mape.csv", res.records);
    write_groups_csv(cfg.out / "groups.csv", res.groups);
    write_summary(cfg.out / "summary.txt", res, cfg);
  });
  return res;
}

ExperimentResult run_use_case(const config::RunConfig& cfg, bool reuse_ae) {
  generate(cfg);
  train(cfg, reuse_ae);
  return evaluate(cfg, false);
}

// ---------------------------------------------------------------------------
// Reports

void write_records_csv(const fs::path& path, const std::vector<MapeRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "map_id,split,group,family,C,a,b,bias,rotation_deg,shift_x,shift_y,mape_percent,"
        "max_abs_error,supervised_loss,oracle_iterations,oracle_relative_residual,"
        "oracle_converged,inference_wall_seconds,oracle_wall_seconds\n";
  auto d = [](double v) { return text::format_double(v); };
  for (const auto& r : records) {
    os << r.map_id << ',' << to_string(r.split) << ',' << r.group << ',' << to_string(r.family) << ','
       << d(r.params.C) << ',' << d(r.params.a) << ',' << d(r.params.b) << ',' << d(r.params.bias)
       << ',' << d(r.params.rotation_deg) << ',' << r.params.shift_x << ',' << r.params.shift_y << ','
       << d(r.mape) << ',' << d(r.max_abs_error) << ',' << d(r.supervised_loss) << ','
       << r.oracle.iterations << ',' << d(r.oracle.relative_residual) << ','
       << (r.oracle.converged ? 1 : 0) << ',' << d(r.inference_wall_seconds) << ','
       << d(r.oracle.wall_seconds) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void write_groups_csv(const fs::path& path, const std::vector<GroupSummary>& groups) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "split,group,count,mean_mape_percent,median_mape_percent,max_mape_percent\n";
  for (const auto& g : groups)
    os << to_string(g.split) << ',' << g.group << ',' << g.count << ',' << text::format_double(g.mean)
       << ',' << text::format_double(g.median) << ',' << text::format_double(g.max) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

void write_summary(const fs::path& path, const ExperimentResult& r, const config::RunConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  auto d = [](double v) { return text::format_double(v); };
  os << "use_case = " << to_string(r.use_case) << '\n'
     << "preset = " << config::to_string(cfg.preset) << '\n'
     << "seed = " << r.seed << '\n'
     << "train_maps = " << r.train_maps << '\n'
     << "test_maps = " << r.test_maps << '\n'
     << "train_mape_percent = " << d(r.train_mape) << '\n'
     << "test_mape_percent = " << d(r.test_mape) << '\n'
     << "ae_final_loss = " << d(r.ae_final_loss) << '\n'
     << "ig_final_loss = " << d(r.ig_final_loss) << '\n'
     << "manifest = dataset/manifest.txt\n"
     << "ae_checkpoint = ae.ckpt\n"
     << "ig_checkpoint = ig.ckpt\n";
  bool all_converged = true;
  for (const auto& rec : r.records) all_converged = all_converged && rec.oracle.converged;
  os << "oracle_all_converged = " << (all_converged ? "true" : "false") << '\n';
  for (const auto& g : r.groups)
    os << "group." << to_string(g.split) << '.' << g.group << " = count " << g.count << " mean "
       << d(g.mean) << " median " << d(g.median) << " max " << d(g.max) << '\n';
  os << "ae_wall_seconds = " << d(r.ae_wall_seconds) << '\n'
     << "ig_wall_seconds = " << d(r.ig_wall_seconds) << '\n'
     << "eval_wall_seconds = " << d(r.eval_wall_seconds) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

std::string format_summary(const ExperimentResult& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: train MAPE %.4f%% over %zu maps, test MAPE %.4f%% over %zu maps\n",
                to_string(r.use_case), r.train_mape, r.train_maps, r.test_mape, r.test_maps);
  os << buf;
  std::snprintf(buf, sizeof buf, "  %-6s %-14s %6s %10s %10s %10s\n", "split", "group", "maps",
                "mean %", "median %", "max %");
  os << buf;
  for (const auto& g : r.groups) {
    std::snprintf(buf, sizeof buf, "  %-6s %-14s %6zu %10.4f %10.4f %10.4f\n", to_string(g.split),
                  g.group.c_str(), g.count, g.mean, g.median, g.max);
    os << buf;
  }
  return os.str();
}

}  // namespace aeig::eval
