#pragma once

#include "tsc/network.hpp"

namespace tsc {

enum class OptimizerKind { adam, adadelta };

const char* optimizer_kind_name(OptimizerKind kind);
OptimizerKind optimizer_kind_from_name(const std::string& name);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdadeltaConfig {
    double lr = 0.1;   // multiplies the computed delta
    double rho = 0.95;
    double epsilon = 1e-8;
};

/// Per-slot accumulators. Adam: first/second moments plus a step counter.
/// Adadelta: EMAs of squared gradients and squared updates.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    AdamConfig adam;
    AdadeltaConfig adadelta;
    long step = 0;
    SlotMap first;   // adam m | adadelta E[g^2]
    SlotMap second;  // adam v | adadelta E[dx^2]

    static OptimizerState make(OptimizerKind kind, const ParameterSet& params);
    double learning_rate() const;
    void set_learning_rate(double lr);
};

/// Bias-corrected Adam update: p -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(ParameterSet& params, const SlotMap& grads, OptimizerState& state);

/// Adadelta update: delta = -sqrt(E[dx^2]+eps)/sqrt(E[g^2]+eps) * g,
/// applied as p += lr * delta.
void adadelta_step(ParameterSet& params, const SlotMap& grads, OptimizerState& state);

void optimizer_step(ParameterSet& params, const SlotMap& grads, OptimizerState& state);

}  // namespace tsc
