#include "tsc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace tsc {

using nlohmann::json;

int TrainingConfig::resolved_epochs() const {
    if (epochs > 0) return epochs;
    return model == "mlp" ? 5000 : 2000;
}

OptimizerKind TrainingConfig::resolved_optimizer() const {
    if (optimizer) return *optimizer;
    return model == "mlp" ? OptimizerKind::adadelta : OptimizerKind::adam;
}

std::string RunRecord::to_json() const {
    json j{{"best_epoch", best_epoch},
           {"best_loss", best_loss},
           {"wall_seconds", wall_seconds},
           {"test_error", test_error}};
    j["epoch_loss"] = json::array();
    for (double v : epoch_loss) j["epoch_loss"].push_back(format_g17(v));
    j["epoch_accuracy"] = json::array();
    for (double v : epoch_accuracy) j["epoch_accuracy"].push_back(format_g17(v));
    j["lr_events"] = json::array();
    for (const LrEvent& e : lr_events)
        j["lr_events"].push_back(json{{"epoch", e.epoch}, {"lr", e.lr}});
    return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("run record is not valid JSON");
    RunRecord r;
    r.best_epoch = j.at("best_epoch").get<int>();
    r.best_loss = j.at("best_loss").get<double>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.test_error = j.at("test_error").get<double>();
    for (const json& v : j.at("epoch_loss"))
        r.epoch_loss.push_back(std::stod(v.get<std::string>()));
    for (const json& v : j.at("epoch_accuracy"))
        r.epoch_accuracy.push_back(std::stod(v.get<std::string>()));
    for (const json& e : j.at("lr_events"))
        r.lr_events.push_back({e.at("epoch").get<int>(), e.at("lr").get<double>()});
    return r;
}

namespace {

NetworkSpec build_network(const TrainingConfig& config, const DatasetSplit& split) {
    if (config.model == "mlp") return build_mlp(split.length, split.classes);
    if (config.model == "fcn") return build_fcn(split.length, split.classes, config.filters);
    if (config.model == "resnet")
        return build_resnet(split.length, split.classes, config.filters);
    throw DataError("unknown model kind: " + config.model);
}

Tensor gather_rows(const Tensor& matrix, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end) {
    const std::size_t t = matrix.extent(1);
    Tensor out({end - begin, t});
    for (std::size_t i = begin; i < end; ++i)
        std::copy(matrix.data() + idx[i] * t, matrix.data() + (idx[i] + 1) * t,
                  out.data() + (i - begin) * t);
    return out;
}

}  // namespace

std::vector<int> predict(const NetworkSpec& spec, ParameterSet& params, const Tensor& series) {
    series.require_rank(2, "predict");
    const std::size_t n = series.extent(0), t = series.extent(1);
    const std::size_t chunk = 32;
    std::vector<int> labels(n);
    Rng rng(0);  // unused in infer mode
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t end = std::min(begin + chunk, n);
        Tensor batch({end - begin, t});
        std::copy(series.data() + begin * t, series.data() + end * t, batch.data());
        const Tensor logits = forward(spec, params, batch, Mode::infer, rng);
        const std::size_t c = logits.extent(1);
        for (std::size_t i = 0; i < end - begin; ++i) {
            const double* row = logits.data() + i * c;
            std::size_t best = 0;
            for (std::size_t k = 1; k < c; ++k)
                if (row[k] > row[best]) best = k;  // ties keep the lowest index
            labels[begin + i] = static_cast<int>(best);
        }
    }
    return labels;
}

double evaluate(const NetworkSpec& spec, ParameterSet& params, const DatasetSplit& split) {
    const std::vector<int> predicted = predict(spec, params, split.test);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] != split.test_labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

TrainResult train(const DatasetSplit& split, const TrainingConfig& config, std::ostream* log) {
    if (!split.normalized && log)
        *log << "warning: training on a split that was not z-normalized\n";
    if (split.classes < 2) throw DataError("train: need at least two classes");
    const std::size_t n = split.train.extent(0);

    int batch = config.batch;
    if (batch < 1) throw DataError("train: batch size must be >= 1");
    if (static_cast<std::size_t>(batch) > n) {
        if (log)
            *log << "warning: batch " << batch << " larger than training set, clamping to "
                 << n << "\n";
        batch = static_cast<int>(n);
    }
    const int epochs = config.resolved_epochs();
    if (epochs < 1) throw DataError("train: epochs must be >= 1");

    const auto t0 = std::chrono::steady_clock::now();

    TrainResult result;
    result.spec = build_network(config, split);
    ParameterSet params = init_params(result.spec, config.seed);
    OptimizerState optim = OptimizerState::make(config.resolved_optimizer(), params);
    Rng rng(config.seed + 1);

    const Tensor targets_all = one_hot(split.train_labels, split.classes);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    RunRecord& rec = result.record;
    double best_loss = std::numeric_limits<double>::infinity();
    int stale = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch)) {
            const std::size_t end = std::min(begin + static_cast<std::size_t>(batch), n);
            const Tensor inputs = gather_rows(split.train, order, begin, end);
            Tensor targets({end - begin, split.classes});
            for (std::size_t i = begin; i < end; ++i)
                std::copy(targets_all.data() + order[i] * split.classes,
                          targets_all.data() + (order[i] + 1) * split.classes,
                          targets.data() + (i - begin) * split.classes);

            ForwardCache cache;
            const Tensor logits = forward(result.spec, params, inputs, Mode::train, rng, &cache);
            const auto sm = ops::softmax_cross_entropy(logits, targets);
            if (!std::isfinite(sm.loss))
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + " (try a smaller learning rate)");
            loss_sum += sm.loss * static_cast<double>(end - begin);
            for (std::size_t i = 0; i < end - begin; ++i) {
                const double* row = logits.data() + i * split.classes;
                std::size_t best = 0;
                for (std::size_t k = 1; k < split.classes; ++k)
                    if (row[k] > row[best]) best = k;
                if (static_cast<int>(best) == split.train_labels[order[begin + i]]) ++correct;
            }
            const SlotMap grads = backward(result.spec, params, cache, sm.grad_logits);
            optimizer_step(params, grads, optim);
        }
        const double epoch_loss = loss_sum / static_cast<double>(n);
        rec.epoch_loss.push_back(epoch_loss);
        rec.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));

        if (epoch_loss < best_loss) {
            best_loss = epoch_loss;
            rec.best_epoch = epoch;
            rec.best_loss = epoch_loss;
            result.params = params;  // snapshot
            result.optimizer = optim;
            stale = 0;
        } else if (config.plateau.enabled && ++stale >= config.plateau.patience) {
            const double cur = optim.learning_rate();
            if (cur > config.plateau.floor) {
                const double next = std::max(cur * config.plateau.factor, config.plateau.floor);
                optim.set_learning_rate(next);
                rec.lr_events.push_back({epoch, next});
                if (log) *log << "epoch " << epoch << ": learning rate -> " << next << "\n";
            }
            stale = 0;
        }
    }

    rec.test_error = evaluate(result.spec, result.params, split);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, result);
    return result;
}

void save_checkpoint(const std::string& path, const TrainResult& result) {
    save_model(path, result.spec, result.params, &result.optimizer);
    std::ofstream side(path + ".run.json");
    if (!side) throw DataError("cannot write run record: " + path + ".run.json");
    side << result.record.to_json() << "\n";
}

}  // namespace tsc
