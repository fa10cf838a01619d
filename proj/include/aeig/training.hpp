#pragma once

// Full-batch Adam loop shared by the autoencoder and solver stages.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "aeig/tensor.hpp"

namespace aeig::nn {

struct Schedule {
  std::size_t epochs = 5000;
  double lr = 1e-4;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double wall_seconds = 0.0;  // since training started
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Runs `schedule.epochs` steps of: build the loss under a fresh graph,
// backpropagate, Adam-update `params`. `name` prefixes error messages.
// A non-finite loss throws NumericalError with the epoch, learning rate and
// gradient norm of every parameter; `guard` may throw to stop early.
std::vector<EpochRecord> fit(const char* name, std::vector<ad::Tensor> params,
                             const std::function<ad::Tensor()>& loss_fn, const Schedule& schedule,
                             const EpochCallback& on_epoch = {},
                             const EpochCallback& guard = {});

// CSV with header "epoch,loss,wall_seconds". Appends when `append` is set
// and the file exists.
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history,
                       bool append = false);

}  // namespace aeig::nn
