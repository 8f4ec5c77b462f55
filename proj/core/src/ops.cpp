#include "tsc/ops.hpp"

#include <algorithm>
#include <cmath>

namespace tsc::ops {

namespace {

// Contiguous [B,Cin,T+K-1] copy of the input with the same-padding zeros,
// so every inner time loop below is branch-free.
Tensor pad_time(const Tensor& input, std::size_t k) {
    const std::size_t b = input.extent(0), c = input.extent(1), t = input.extent(2);
    const std::size_t pad_left = (k - 1) / 2;
    Tensor out({b, c, t + k - 1});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const double* src = input.data() + (i * c + j) * t;
            double* dst = out.data() + (i * c + j) * (t + k - 1) + pad_left;
            std::copy(src, src + t, dst);
        }
    return out;
}

void check_conv_shapes(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    input.require_rank(3, "conv1d");
    kernels.require_rank(3, "conv1d kernels");
    bias.require_rank(1, "conv1d bias");
    if (kernels.extent(1) != input.extent(1))
        throw ShapeError("conv1d: kernel input channels do not match input");
    if (bias.extent(0) != kernels.extent(0))
        throw ShapeError("conv1d: bias length does not match filter count");
    if (kernels.extent(2) < 1) throw ShapeError("conv1d: kernel size must be >= 1");
}

}  // namespace

Tensor conv1d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    check_conv_shapes(input, kernels, bias);
    const std::size_t B = input.extent(0), Ci = input.extent(1), T = input.extent(2);
    const std::size_t Co = kernels.extent(0), K = kernels.extent(2);
    const Tensor xpad = pad_time(input, K);
    const std::size_t Tp = T + K - 1;

    Tensor out({B, Co, T});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t co = 0; co < Co; ++co) {
            double* o = out.data() + (b * Co + co) * T;
            std::fill(o, o + T, bias[co]);
            for (std::size_t ci = 0; ci < Ci; ++ci) {
                const double* x = xpad.data() + (b * Ci + ci) * Tp;
                const double* w = kernels.data() + (co * Ci + ci) * K;
                for (std::size_t k = 0; k < K; ++k) {
                    const double wk = w[k];
                    const double* xs = x + k;
                    for (std::size_t t = 0; t < T; ++t) o[t] += wk * xs[t];
                }
            }
        }
    }
    return out;
}

Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& input,
                            const Tensor& kernels) {
    input.require_rank(3, "conv1d_backward input");
    grad_out.require_rank(3, "conv1d_backward grad");
    const std::size_t B = input.extent(0), Ci = input.extent(1), T = input.extent(2);
    const std::size_t Co = kernels.extent(0), K = kernels.extent(2);
    if (grad_out.extent(0) != B || grad_out.extent(1) != Co || grad_out.extent(2) != T)
        throw ShapeError("conv1d_backward: grad shape does not match forward output");
    if (kernels.extent(1) != Ci)
        throw ShapeError("conv1d_backward: kernel shape mismatch");

    const Tensor xpad = pad_time(input, K);
    const std::size_t Tp = T + K - 1;
    const std::size_t pad_left = (K - 1) / 2;

    Conv1dGrads g{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({Co})};

    // bias: sum of grad over batch and time per filter
    for (std::size_t co = 0; co < Co; ++co) {
        double acc = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const double* go = grad_out.data() + (b * Co + co) * T;
            for (std::size_t t = 0; t < T; ++t) acc += go[t];
        }
        g.bias[co] = acc;
    }

    // kernels: correlation of grad with the padded input
    for (std::size_t co = 0; co < Co; ++co) {
        for (std::size_t ci = 0; ci < Ci; ++ci) {
            double* gw = g.kernels.data() + (co * Ci + ci) * K;
            for (std::size_t b = 0; b < B; ++b) {
                const double* go = grad_out.data() + (b * Co + co) * T;
                const double* x = xpad.data() + (b * Ci + ci) * Tp;
                for (std::size_t k = 0; k < K; ++k) {
                    const double* xs = x + k;
                    double acc = 0.0;
                    for (std::size_t t = 0; t < T; ++t) acc += go[t] * xs[t];
                    gw[k] += acc;
                }
            }
        }
    }

    // input: scatter grad through the kernels into padded coordinates,
    // then drop the padding margin
    Tensor gin_pad({B, Ci, Tp});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t ci = 0; ci < Ci; ++ci) {
            double* gi = gin_pad.data() + (b * Ci + ci) * Tp;
            for (std::size_t co = 0; co < Co; ++co) {
                const double* go = grad_out.data() + (b * Co + co) * T;
                const double* w = kernels.data() + (co * Ci + ci) * K;
                for (std::size_t k = 0; k < K; ++k) {
                    const double wk = w[k];
                    double* gs = gi + k;
                    for (std::size_t t = 0; t < T; ++t) gs[t] += wk * go[t];
                }
            }
        }
    }
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t ci = 0; ci < Ci; ++ci) {
            const double* src = gin_pad.data() + (b * Ci + ci) * Tp + pad_left;
            double* dst = g.input.data() + (b * Ci + ci) * T;
            std::copy(src, src + T, dst);
        }
    return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    input.require_rank(2, "dense");
    weights.require_rank(2, "dense weights");
    bias.require_rank(1, "dense bias");
    const std::size_t B = input.extent(0), F = input.extent(1);
    const std::size_t U = weights.extent(1);
    if (weights.extent(0) != F) throw ShapeError("dense: weight rows do not match input features");
    if (bias.extent(0) != U) throw ShapeError("dense: bias length does not match units");

    Tensor out({B, U});
    for (std::size_t b = 0; b < B; ++b) {
        double* o = out.data() + b * U;
        std::copy(bias.data(), bias.data() + U, o);
        const double* x = input.data() + b * F;
        for (std::size_t f = 0; f < F; ++f) {
            const double xf = x[f];
            const double* w = weights.data() + f * U;
            for (std::size_t u = 0; u < U; ++u) o[u] += xf * w[u];
        }
    }
    return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input,
                          const Tensor& weights) {
    const std::size_t B = input.extent(0), F = input.extent(1);
    const std::size_t U = weights.extent(1);
    if (grad_out.extent(0) != B || grad_out.extent(1) != U)
        throw ShapeError("dense_backward: grad shape does not match forward output");

    DenseGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({U})};
    for (std::size_t b = 0; b < B; ++b) {
        const double* go = grad_out.data() + b * U;
        const double* x = input.data() + b * F;
        double* gi = g.input.data() + b * F;
        for (std::size_t f = 0; f < F; ++f) {
            const double* w = weights.data() + f * U;
            double acc = 0.0;
            for (std::size_t u = 0; u < U; ++u) acc += go[u] * w[u];
            gi[f] = acc;
            const double xf = x[f];
            double* gw = g.weights.data() + f * U;
            for (std::size_t u = 0; u < U; ++u) gw[u] += xf * go[u];
        }
        for (std::size_t u = 0; u < U; ++u) g.bias[u] += go[u];
    }
    return g;
}

namespace {

struct ChannelView {
    std::size_t channels = 0;
    std::size_t batch = 0;
    std::size_t time = 1;  // 1 for [B,F] tensors
};

ChannelView channel_view(const Tensor& input) {
    if (input.rank() == 2) return {input.extent(1), input.extent(0), 1};
    if (input.rank() == 3) return {input.extent(1), input.extent(0), input.extent(2)};
    throw ShapeError("batchnorm: expected rank 2 or 3 input");
}

}  // namespace

Tensor batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, Mode mode,
                         BatchNormCache* cache, const BatchNormOptions& opt) {
    const ChannelView v = channel_view(input);
    gamma.require_rank(1, "batchnorm gamma");
    if (gamma.extent(0) != v.channels || beta.extent(0) != v.channels ||
        running_mean.extent(0) != v.channels || running_var.extent(0) != v.channels)
        throw ShapeError("batchnorm: parameter length does not match channel count");

    const std::size_t N = v.batch * v.time;
    const bool conv = input.rank() == 3;
    Tensor out(input.shape());

    auto channel_ptr = [&](const Tensor& t, std::size_t b, std::size_t c) {
        return conv ? t.data() + (b * v.channels + c) * v.time : t.data() + b * v.channels + c;
    };

    if (mode == Mode::train) {
        if (N < 2) throw NumericError("batchnorm: training population must be >= 2");
        if (cache) {
            cache->x_hat = Tensor(input.shape());
            cache->inv_std.assign(v.channels, 0.0);
            cache->population = N;
        }
        for (std::size_t c = 0; c < v.channels; ++c) {
            double mean = 0.0;
            for (std::size_t b = 0; b < v.batch; ++b) {
                const double* x = channel_ptr(input, b, c);
                if (conv)
                    for (std::size_t t = 0; t < v.time; ++t) mean += x[t];
                else
                    mean += *x;
            }
            mean /= static_cast<double>(N);
            double var = 0.0;
            for (std::size_t b = 0; b < v.batch; ++b) {
                const double* x = channel_ptr(input, b, c);
                if (conv)
                    for (std::size_t t = 0; t < v.time; ++t) {
                        const double d = x[t] - mean;
                        var += d * d;
                    }
                else {
                    const double d = *x - mean;
                    var += d * d;
                }
            }
            var /= static_cast<double>(N);
            const double inv_std = 1.0 / std::sqrt(var + opt.epsilon);
            const double g = gamma[c], bt = beta[c];
            for (std::size_t b = 0; b < v.batch; ++b) {
                const double* x = channel_ptr(input, b, c);
                double* o = const_cast<double*>(channel_ptr(out, b, c));
                double* xh = cache ? const_cast<double*>(channel_ptr(cache->x_hat, b, c)) : nullptr;
                const std::size_t len = conv ? v.time : 1;
                for (std::size_t t = 0; t < len; ++t) {
                    const double h = (x[t] - mean) * inv_std;
                    if (xh) xh[t] = h;
                    o[t] = g * h + bt;
                }
            }
            if (cache) cache->inv_std[c] = inv_std;
            running_mean[c] = opt.momentum * running_mean[c] + (1.0 - opt.momentum) * mean;
            running_var[c] = opt.momentum * running_var[c] + (1.0 - opt.momentum) * var;
        }
    } else {
        for (std::size_t c = 0; c < v.channels; ++c) {
            if (running_var[c] < 0.0)
                throw NumericError("batchnorm: negative running variance");
            const double inv_std = 1.0 / std::sqrt(running_var[c] + opt.epsilon);
            const double g = gamma[c], bt = beta[c], mean = running_mean[c];
            for (std::size_t b = 0; b < v.batch; ++b) {
                const double* x = channel_ptr(input, b, c);
                double* o = const_cast<double*>(channel_ptr(out, b, c));
                const std::size_t len = conv ? v.time : 1;
                for (std::size_t t = 0; t < len; ++t) o[t] = g * (x[t] - mean) * inv_std + bt;
            }
        }
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                  const Tensor& gamma) {
    const ChannelView v = channel_view(grad_out);
    if (!grad_out.same_shape(cache.x_hat))
        throw ShapeError("batchnorm_backward: grad shape does not match cached activations");
    const bool conv = grad_out.rank() == 3;
    const double N = static_cast<double>(cache.population);

    BatchNormGrads g{Tensor(grad_out.shape()), Tensor({v.channels}), Tensor({v.channels})};
    auto channel_ptr = [&](const Tensor& t, std::size_t b, std::size_t c) {
        return conv ? t.data() + (b * v.channels + c) * v.time : t.data() + b * v.channels + c;
    };

    for (std::size_t c = 0; c < v.channels; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < v.batch; ++b) {
            const double* dy = channel_ptr(grad_out, b, c);
            const double* xh = channel_ptr(cache.x_hat, b, c);
            const std::size_t len = conv ? v.time : 1;
            for (std::size_t t = 0; t < len; ++t) {
                sum_dy += dy[t];
                sum_dy_xhat += dy[t] * xh[t];
            }
        }
        g.beta[c] = sum_dy;
        g.gamma[c] = sum_dy_xhat;
        const double scale = gamma[c] * cache.inv_std[c];
        const double mean_dy = sum_dy / N;
        const double mean_dy_xhat = sum_dy_xhat / N;
        for (std::size_t b = 0; b < v.batch; ++b) {
            const double* dy = channel_ptr(grad_out, b, c);
            const double* xh = channel_ptr(cache.x_hat, b, c);
            double* gi = const_cast<double*>(channel_ptr(g.input, b, c));
            const std::size_t len = conv ? v.time : 1;
            for (std::size_t t = 0; t < len; ++t)
                gi[t] = scale * (dy[t] - mean_dy - xh[t] * mean_dy_xhat);
        }
    }
    return g;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    if (!grad_out.same_shape(input)) throw ShapeError("relu_backward: shape mismatch");
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    return out;
}

DropoutResult dropout_forward(const Tensor& input, double rate, Rng& rng, Mode mode) {
    if (rate < 0.0 || rate >= 1.0) throw NumericError("dropout: rate must be in [0,1)");
    DropoutResult r{Tensor(input.shape()), Tensor(input.shape())};
    if (mode == Mode::infer || rate == 0.0) {
        r.output = input;
        r.mask.fill(1.0);
        return r;
    }
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double m = unif(rng) < rate ? 0.0 : scale;
        r.mask[i] = m;
        r.output[i] = input[i] * m;
    }
    return r;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
    if (!grad_out.same_shape(mask)) throw ShapeError("dropout_backward: shape mismatch");
    Tensor out(grad_out.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad_out[i] * mask[i];
    return out;
}

Tensor global_avg_pool_forward(const Tensor& input) {
    input.require_rank(3, "global_avg_pool");
    const std::size_t B = input.extent(0), C = input.extent(1), T = input.extent(2);
    Tensor out({B, C});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const double* x = input.data() + (b * C + c) * T;
            double acc = 0.0;
            for (std::size_t t = 0; t < T; ++t) acc += x[t];
            out.at(b, c) = acc / static_cast<double>(T);
        }
    return out;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, std::size_t time_len) {
    grad_out.require_rank(2, "global_avg_pool_backward");
    const std::size_t B = grad_out.extent(0), C = grad_out.extent(1);
    Tensor out({B, C, time_len});
    const double inv_t = 1.0 / static_cast<double>(time_len);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const double g = grad_out.at(b, c) * inv_t;
            double* o = out.data() + (b * C + c) * time_len;
            for (std::size_t t = 0; t < time_len; ++t) o[t] = g;
        }
    return out;
}

Tensor softmax(const Tensor& logits) {
    logits.require_rank(2, "softmax");
    const std::size_t B = logits.extent(0), C = logits.extent(1);
    Tensor out({B, C});
    for (std::size_t b = 0; b < B; ++b) {
        const double* l = logits.data() + b * C;
        double* o = out.data() + b * C;
        const double mx = *std::max_element(l, l + C);
        double denom = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            o[c] = std::exp(l[c] - mx);
            denom += o[c];
        }
        for (std::size_t c = 0; c < C; ++c) o[c] /= denom;
    }
    return out;
}

SoftmaxLossResult softmax_cross_entropy(const Tensor& logits, const Tensor& targets) {
    logits.require_rank(2, "softmax_cross_entropy");
    if (!logits.same_shape(targets))
        throw ShapeError("softmax_cross_entropy: target shape does not match logits");
    const std::size_t B = logits.extent(0), C = logits.extent(1);

    SoftmaxLossResult r;
    r.probs = softmax(logits);
    r.grad_logits = Tensor({B, C});
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        const double* l = logits.data() + b * C;
        const double* t = targets.data() + b * C;
        const double* p = r.probs.data() + b * C;
        double* g = r.grad_logits.data() + b * C;
        const double mx = *std::max_element(l, l + C);
        double lse = 0.0;
        for (std::size_t c = 0; c < C; ++c) lse += std::exp(l[c] - mx);
        lse = std::log(lse) + mx;
        for (std::size_t c = 0; c < C; ++c) {
            // -sum t*log softmax, written as t*(lse - logit) so extreme
            // logits cannot produce log(0)
            loss += t[c] * (lse - l[c]);
            g[c] = (p[c] - t[c]) * inv_b;
        }
    }
    r.loss = loss * inv_b;
    return r;
}

Tensor add_forward(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

}  // namespace tsc::ops
