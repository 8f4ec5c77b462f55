#pragma once

#include <iosfwd>
#include <optional>

#include "tsc/dataset.hpp"
#include "tsc/model_io.hpp"
#include "tsc/network.hpp"
#include "tsc/optim.hpp"

namespace tsc {

/// Halve the learning rate after `patience` epochs without a new best
/// training loss, never below `floor`. Disabled under the strict paper
/// protocol (the paper never mentions a schedule).
struct PlateauSchedule {
    bool enabled = true;
    double factor = 0.5;
    int patience = 50;
    double floor = 1e-4;
};

struct TrainingConfig {
    std::string model = "fcn";  // mlp | fcn | resnet
    std::optional<OptimizerKind> optimizer;  // default: mlp->adadelta, conv nets->adam
    int epochs = 0;                          // 0 -> default (mlp 5000, fcn/resnet 2000)
    int batch = 16;                          // clamped to N with a warning
    std::uint64_t seed = 0;
    PlateauSchedule plateau;
    std::array<int, 3> filters = {0, 0, 0};  // 0 -> standard widths
    std::string checkpoint_path;             // empty: no files written

    int resolved_epochs() const;
    OptimizerKind resolved_optimizer() const;
};

struct LrEvent {
    int epoch = 0;
    double lr = 0.0;
};

struct RunRecord {
    std::vector<double> epoch_loss;      // mean training loss per epoch
    std::vector<double> epoch_accuracy;  // training accuracy per epoch
    int best_epoch = -1;                 // epoch with the minimum mean loss
    double best_loss = 0.0;
    double wall_seconds = 0.0;
    double test_error = 0.0;  // evaluated once, on the best checkpoint
    std::vector<LrEvent> lr_events;

    std::string to_json() const;
    static RunRecord from_json(const std::string& text);
};

struct TrainResult {
    NetworkSpec spec;
    ParameterSet params;       // snapshot at the best epoch
    OptimizerState optimizer;  // state at the best epoch
    RunRecord record;
};

/// Runs the full training protocol on a normalized split: seeded shuffling,
/// mini-batches, cross-entropy loss, checkpoint at every new minimum of the
/// epoch-mean training loss, final test evaluation of the best checkpoint.
/// Deterministic given the seed. Non-finite loss aborts with NumericError.
TrainResult train(const DatasetSplit& split, const TrainingConfig& config,
                  std::ostream* log = nullptr);

/// Test error rate: misclassified/N under infer mode, argmax of the logits,
/// ties broken toward the lowest class index.
double evaluate(const NetworkSpec& spec, ParameterSet& params, const DatasetSplit& split);

/// Argmax predictions for a [N,T] matrix of series.
std::vector<int> predict(const NetworkSpec& spec, ParameterSet& params, const Tensor& series);

/// Writes checkpoint (model + optimizer state) and the run record sidecar
/// (`<path>.run.json`).
void save_checkpoint(const std::string& path, const TrainResult& result);

}  // namespace tsc
