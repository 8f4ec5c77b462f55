#include "tsc/optim.hpp"

#include <cmath>

namespace tsc {

const char* optimizer_kind_name(OptimizerKind kind) {
    return kind == OptimizerKind::adam ? "adam" : "adadelta";
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "adadelta") return OptimizerKind::adadelta;
    throw DataError("unknown optimizer: " + name);
}

OptimizerState OptimizerState::make(OptimizerKind kind, const ParameterSet& params) {
    OptimizerState s;
    s.kind = kind;
    for (const auto& [slot, tensor] : params.values) {
        s.first[slot] = Tensor(tensor.shape());
        s.second[slot] = Tensor(tensor.shape());
    }
    return s;
}

double OptimizerState::learning_rate() const {
    return kind == OptimizerKind::adam ? adam.lr : adadelta.lr;
}

void OptimizerState::set_learning_rate(double lr) {
    if (kind == OptimizerKind::adam)
        adam.lr = lr;
    else
        adadelta.lr = lr;
}

namespace {

void check_slots(const ParameterSet& params, const SlotMap& grads, const OptimizerState& s) {
    for (const auto& [slot, tensor] : params.values) {
        auto g = grads.find(slot);
        if (g == grads.end()) throw ShapeError("optimizer: missing gradient for " + slot);
        if (!g->second.same_shape(tensor))
            throw ShapeError("optimizer: gradient shape mismatch for " + slot);
        if (!s.first.count(slot) || !s.second.count(slot))
            throw ShapeError("optimizer: state missing slot " + slot);
    }
}

}  // namespace

void adam_step(ParameterSet& params, const SlotMap& grads, OptimizerState& state) {
    check_slots(params, grads, state);
    const AdamConfig& c = state.adam;
    state.step += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (auto& [slot, p] : params.values) {
        const Tensor& g = grads.at(slot);
        Tensor& m = state.first[slot];
        Tensor& v = state.second[slot];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

void adadelta_step(ParameterSet& params, const SlotMap& grads, OptimizerState& state) {
    check_slots(params, grads, state);
    const AdadeltaConfig& c = state.adadelta;
    state.step += 1;
    for (auto& [slot, p] : params.values) {
        const Tensor& g = grads.at(slot);
        Tensor& eg2 = state.first[slot];
        Tensor& ed2 = state.second[slot];
        for (std::size_t i = 0; i < p.size(); ++i) {
            eg2[i] = c.rho * eg2[i] + (1.0 - c.rho) * g[i] * g[i];
            const double delta =
                -std::sqrt(ed2[i] + c.epsilon) / std::sqrt(eg2[i] + c.epsilon) * g[i];
            p[i] += c.lr * delta;
            ed2[i] = c.rho * ed2[i] + (1.0 - c.rho) * delta * delta;
        }
    }
}

void optimizer_step(ParameterSet& params, const SlotMap& grads, OptimizerState& state) {
    if (state.kind == OptimizerKind::adam)
        adam_step(params, grads, state);
    else
        adadelta_step(params, grads, state);
}

}  // namespace tsc
