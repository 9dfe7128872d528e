#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "poolbench/adam.hpp"
#include "poolbench/dataset.hpp"
#include "poolbench/net.hpp"
#include "poolbench/report.hpp"

namespace poolbench {

struct BatchResult {
  double loss = 0.0;      // mean over the batch
  double accuracy = 0.0;  // fraction correct
};

// Zeroes `grads`, then fills it with the batch-mean gradient of the cross-entropy loss.
// Throws DivergedError (step 0) when the loss or a gradient is not finite.
BatchResult forward_backward(const ToyNet& net, const SyntheticDataset& data,
                             std::span<const std::size_t> batch, ToyNet& grads);

BatchResult evaluate(const ToyNet& net, const SyntheticDataset& data,
                     std::span<const std::size_t> indices);

// Pooling parameters per block: the trainable views, plus "p" for LNP and the fixed
// "tau" for SMPF.
std::vector<ParamSnapshot> snapshot_pooling(ToyNet& net);

// Called after every optimizer step (1-based) and OP projection.
using StepObserver = std::function<void(std::size_t step, const ToyNet& net)>;

// Seeded mini-batch Adam training. The training set is reshuffled each epoch with a
// generator seeded from optim.seed; train and test metrics are recorded after every epoch.
// A non-finite loss stops training and returns the partial report with `diverged` set.
RunReport train(ToyNet& net, const SyntheticDataset& data, const OptimConfig& optim,
                const StepObserver& observer = {});

}  // namespace poolbench
