#include "aeig/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aeig/adam.hpp"
#include "aeig/errors.hpp"
#include "aeig/text.hpp"

namespace aeig::nn {

std::vector<EpochRecord> fit(const char* name, std::vector<ad::Tensor> params,
                             const std::function<ad::Tensor()>& loss_fn, const Schedule& schedule,
                             const EpochCallback& on_epoch, const EpochCallback& guard) {
  if (!(schedule.lr > 0.0)) throw ConfigError(std::string(name) + ": learning rate must be positive");
  AdamState adam(AdamConfig{.lr = schedule.lr});
  std::vector<EpochRecord> history;
  history.reserve(schedule.epochs);
  std::vector<double> grad_norms(params.size(), 0.0);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    for (auto& p : params) p.zero_grad();
    double loss = 0.0;
    {
      ad::Graph graph;
      ad::GraphScope scope(graph);
      const ad::Tensor l = loss_fn();
      loss = l.item();
      if (std::isfinite(loss)) ad::backward(l);
    }
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << name << ": loss became " << loss << " at epoch " << epoch << " (lr " << schedule.lr
         << "); gradient norms from the previous step:";
      for (std::size_t i = 0; i < params.size(); ++i) os << (i ? ", " : " ") << grad_norms[i];
      throw NumericalError(os.str());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      double s = 0.0;
      for (double g : params[i].grad()) s += g * g;
      grad_norms[i] = std::sqrt(s);
    }
    adam_step(params, adam);
    EpochRecord rec{epoch, loss,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    history.push_back(rec);
    if (guard) guard(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history,
                       bool append) {
  const bool header = !append || !std::filesystem::exists(path);
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  if (header) os << "epoch,loss,wall_seconds\n";
  for (const auto& r : history)
    os << r.epoch << ',' << text::format_double(r.loss) << ',' << text::format_double(r.wall_seconds) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace aeig::nn
