#pragma once

#include "tsc/tensor.hpp"

namespace tsc::ops {

// All forward/backward pairs are hand-written; gradients are validated
// against central finite differences in the test suite.

/// Same-padding 1-D convolution (stride 1, cross-correlation form).
/// input [B,Cin,T], kernels [Cout,Cin,K], bias [Cout] -> [B,Cout,T].
/// Zero padding: left (K-1)/2, right K/2, so the time length is preserved
/// for every K.
Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv1dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};
Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& kernels);

/// input [B,F], weights [F,U], bias [U] -> [B,U].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weights);

struct BatchNormOptions {
    double epsilon = 1e-5;
    double momentum = 0.99;  // running = momentum*running + (1-momentum)*batch
};

/// Saved by the train-mode forward pass for the backward pass.
struct BatchNormCache {
    Tensor x_hat;                  // normalized input, same shape as input
    std::vector<double> inv_std;   // per channel, 1/sqrt(var+eps)
    std::size_t population = 0;    // batch*time (or batch) per channel
};

/// Per-channel batch normalization. input is [B,C,T] (normalized over batch
/// and time) or [B,F] (over batch). Train mode uses batch statistics and
/// updates the running mean/variance in place; infer mode uses the running
/// statistics only. Train mode requires a population of at least 2.
Tensor batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, Mode mode,
                         BatchNormCache* cache = nullptr,
                         const BatchNormOptions& opt = {});

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};
BatchNormGrads batchnorm_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                  const Tensor& gamma);

Tensor relu_forward(const Tensor& input);
/// Passes gradient only where the forward input was > 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

struct DropoutResult {
    Tensor output;
    Tensor mask;  // entries are 0 or 1/(1-p); backward is grad*mask
};

/// Inverted dropout: training zeroes with probability p and scales survivors
/// by 1/(1-p); inference is the identity. Requires 0 <= p < 1.
DropoutResult dropout_forward(const Tensor& input, double rate, Rng& rng, Mode mode);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

/// Temporal mean per channel: [B,C,T] -> [B,C].
Tensor global_avg_pool_forward(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out, std::size_t time_len);

/// Row-wise softmax of [B,C] logits.
Tensor softmax(const Tensor& logits);

struct SoftmaxLossResult {
    double loss = 0.0;   // mean over the batch
    Tensor grad_logits;  // (softmax - target)/B
    Tensor probs;
};

/// Categorical cross entropy on logits with log-sum-exp stabilization.
/// targets is a one-hot [B,C] tensor.
SoftmaxLossResult softmax_cross_entropy(const Tensor& logits, const Tensor& targets);

Tensor add_forward(const Tensor& a, const Tensor& b);

}  // namespace tsc::ops
