#include "tsc/network.hpp"

#include <cmath>
#include <functional>

namespace tsc {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv: return "conv";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::relu: return "relu";
        case LayerKind::dropout: return "dropout";
        case LayerKind::gap: return "gap";
        case LayerKind::add_shortcut: return "add_shortcut";
        case LayerKind::softmax_head: return "softmax_head";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    for (int k = 0; k <= static_cast<int>(LayerKind::softmax_head); ++k) {
        const auto kind = static_cast<LayerKind>(k);
        if (name == layer_kind_name(kind)) return kind;
    }
    throw DataError("unknown layer kind: " + name);
}

namespace {

// Activation geometry while walking a spec: either [C,T] (conv side) or [F].
struct Shape2 {
    bool conv = false;
    std::size_t channels = 0;  // channels (conv) or features (dense)
    std::size_t time = 0;
};

using ShapeVisitor = std::function<void(std::size_t index, const LayerSpec&, const Shape2& in,
                                        const Shape2& out, const Shape2& shortcut_src)>;

Shape2 walk_shapes(const NetworkSpec& spec, const ShapeVisitor& visit) {
    Shape2 cur;
    if (spec.conv_input) {
        cur = {true, 1, spec.input_len};
    } else {
        cur = {false, spec.input_len, 0};
    }
    std::vector<Shape2> history;
    const Shape2 input_shape = cur;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const Shape2 in = cur;
        Shape2 src{};
        switch (l.kind) {
            case LayerKind::dense:
                if (in.conv) throw ShapeError("dense layer applied to [C,T] activation");
                cur.channels = static_cast<std::size_t>(l.units);
                break;
            case LayerKind::conv:
                if (!in.conv) throw ShapeError("conv layer applied to flat activation");
                cur.channels = static_cast<std::size_t>(l.filters);
                break;
            case LayerKind::batchnorm:
            case LayerKind::relu:
            case LayerKind::dropout:
            case LayerKind::softmax_head:
                break;
            case LayerKind::gap:
                if (!in.conv) throw ShapeError("gap layer applied to flat activation");
                cur = {false, in.channels, 0};
                break;
            case LayerKind::add_shortcut: {
                src = l.from < 0 ? input_shape : history.at(static_cast<std::size_t>(l.from));
                if (!in.conv || !src.conv)
                    throw ShapeError("add_shortcut requires [C,T] operands");
                if (src.time != in.time)
                    throw ShapeError("add_shortcut operands have different time lengths");
                if (!l.projection && src.channels != in.channels)
                    throw ShapeError("add_shortcut channel mismatch without projection");
                break;
            }
        }
        if (visit) visit(i, l, in, cur, src);
        history.push_back(cur);
    }
    return cur;
}

}  // namespace

void NetworkSpec::validate() const {
    if (input_len == 0) throw ShapeError("network input length must be positive");
    if (classes < 2) throw ShapeError("network needs at least two classes");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.kind == LayerKind::add_shortcut && l.from >= static_cast<int>(i))
            throw ShapeError("add_shortcut source must precede the layer");
        if (l.kind == LayerKind::dropout && (l.rate < 0.0 || l.rate >= 1.0))
            throw ShapeError("dropout rate out of [0,1)");
    }
    const Shape2 out = walk_shapes(*this, nullptr);
    if (out.conv || out.channels != classes)
        throw ShapeError("network output does not produce [B,classes] logits");
}

std::optional<std::size_t> NetworkSpec::gap_index() const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::gap) return i;
    return std::nullopt;
}

NetworkSpec build_mlp(std::size_t input_len, std::size_t classes) {
    NetworkSpec s;
    s.name = "mlp";
    s.input_len = input_len;
    s.classes = classes;
    s.conv_input = false;
    const int hidden = 500;
    auto dropout = [](double rate) {
        LayerSpec l; l.kind = LayerKind::dropout; l.rate = rate; return l;
    };
    auto dense = [](int units, std::string slot) {
        LayerSpec l; l.kind = LayerKind::dense; l.units = units; l.slot = std::move(slot); return l;
    };
    auto relu = [] { LayerSpec l; l.kind = LayerKind::relu; return l; };
    s.layers = {dropout(0.1), dense(hidden, "fc1"), relu(),
                dropout(0.2), dense(hidden, "fc2"), relu(),
                dropout(0.2), dense(hidden, "fc3"), relu(),
                dropout(0.3), dense(static_cast<int>(classes), "head")};
    LayerSpec head; head.kind = LayerKind::softmax_head;
    s.layers.push_back(head);
    s.validate();
    return s;
}

namespace {

void append_conv_block(NetworkSpec& s, int filters, int kernel, const std::string& slot) {
    LayerSpec conv; conv.kind = LayerKind::conv; conv.filters = filters;
    conv.kernel = kernel; conv.slot = slot;
    LayerSpec bn; bn.kind = LayerKind::batchnorm; bn.slot = slot + "_bn";
    LayerSpec relu; relu.kind = LayerKind::relu;
    s.layers.push_back(conv);
    s.layers.push_back(bn);
    s.layers.push_back(relu);
}

}  // namespace

NetworkSpec build_fcn(std::size_t input_len, std::size_t classes) {
    return build_fcn(input_len, classes, {0, 0, 0});
}

NetworkSpec build_fcn(std::size_t input_len, std::size_t classes, std::array<int, 3> filters) {
    if (filters[0] == 0) filters = {128, 256, 128};
    NetworkSpec s;
    s.name = "fcn";
    s.input_len = input_len;
    s.classes = classes;
    s.conv_input = true;
    const int kernels[3] = {8, 5, 3};
    for (int j = 0; j < 3; ++j)
        append_conv_block(s, filters[static_cast<std::size_t>(j)], kernels[j],
                          "conv" + std::to_string(j + 1));
    LayerSpec gap; gap.kind = LayerKind::gap;
    s.layers.push_back(gap);
    LayerSpec head; head.kind = LayerKind::dense;
    head.units = static_cast<int>(classes); head.slot = "head";
    s.layers.push_back(head);
    LayerSpec sm; sm.kind = LayerKind::softmax_head;
    s.layers.push_back(sm);
    s.validate();
    return s;
}

NetworkSpec build_resnet(std::size_t input_len, std::size_t classes) {
    return build_resnet(input_len, classes, {0, 0, 0});
}

NetworkSpec build_resnet(std::size_t input_len, std::size_t classes,
                         std::array<int, 3> filters) {
    if (filters[0] == 0) filters = {64, 128, 128};
    NetworkSpec s;
    s.name = "resnet";
    s.input_len = input_len;
    s.classes = classes;
    s.conv_input = true;
    const int kernels[3] = {8, 5, 3};
    int in_channels = 1;
    for (int j = 0; j < 3; ++j) {
        const int f = filters[static_cast<std::size_t>(j)];
        const std::string blk = "b" + std::to_string(j + 1);
        const int block_input_index = static_cast<int>(s.layers.size()) - 1;  // -1 on block 1
        for (int c = 0; c < 3; ++c)
            append_conv_block(s, f, kernels[c], blk + "c" + std::to_string(c + 1));
        LayerSpec add; add.kind = LayerKind::add_shortcut;
        add.from = block_input_index;
        add.projection = in_channels != f;
        if (add.projection) add.slot = blk + "sc";
        s.layers.push_back(add);
        LayerSpec relu; relu.kind = LayerKind::relu;
        s.layers.push_back(relu);
        in_channels = f;
    }
    LayerSpec gap; gap.kind = LayerKind::gap;
    s.layers.push_back(gap);
    LayerSpec head; head.kind = LayerKind::dense;
    head.units = static_cast<int>(classes); head.slot = "head";
    s.layers.push_back(head);
    LayerSpec sm; sm.kind = LayerKind::softmax_head;
    s.layers.push_back(sm);
    s.validate();
    return s;
}

namespace {

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> unif(-limit, limit);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = unif(rng);
    return t;
}

void add_batchnorm_slots(ParameterSet& p, const std::string& slot, std::size_t channels) {
    Tensor gamma({channels}); gamma.fill(1.0);
    p.values[slot + ".gamma"] = std::move(gamma);
    p.values[slot + ".beta"] = Tensor({channels});
    p.running[slot + ".mean"] = Tensor({channels});
    Tensor var({channels}); var.fill(1.0);
    p.running[slot + ".var"] = std::move(var);
}

}  // namespace

ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParameterSet p;
    walk_shapes(spec, [&](std::size_t, const LayerSpec& l, const Shape2& in, const Shape2& out,
                          const Shape2& src) {
        switch (l.kind) {
            case LayerKind::dense: {
                const std::size_t f = in.channels, u = out.channels;
                p.values[l.slot + ".w"] = glorot_uniform({f, u}, f, u, rng);
                p.values[l.slot + ".b"] = Tensor({u});
                break;
            }
            case LayerKind::conv: {
                const std::size_t ci = in.channels, co = out.channels;
                const auto k = static_cast<std::size_t>(l.kernel);
                p.values[l.slot + ".w"] = glorot_uniform({co, ci, k}, ci * k, co * k, rng);
                p.values[l.slot + ".b"] = Tensor({co});
                break;
            }
            case LayerKind::batchnorm:
                add_batchnorm_slots(p, l.slot, in.channels);
                break;
            case LayerKind::add_shortcut:
                if (l.projection) {
                    const std::size_t co = out.channels;
                    p.values[l.slot + ".w"] =
                        glorot_uniform({co, src.channels, 1}, src.channels, co, rng);
                    p.values[l.slot + ".b"] = Tensor({co});
                    add_batchnorm_slots(p, l.slot + "_bn", co);
                }
                break;
            default:
                break;
        }
    });
    return p;
}

std::size_t parameter_count(const ParameterSet& params) {
    std::size_t n = 0;
    for (const auto& [slot, tensor] : params.values) n += tensor.size();
    return n;
}

namespace {

const Tensor& slot_value(const ParameterSet& p, const std::string& key) {
    auto it = p.values.find(key);
    if (it == p.values.end()) throw ShapeError("missing parameter slot: " + key);
    return it->second;
}

Tensor& running_value(ParameterSet& p, const std::string& key) {
    auto it = p.running.find(key);
    if (it == p.running.end()) throw ShapeError("missing running-statistic slot: " + key);
    return it->second;
}

Tensor reshape_input(const NetworkSpec& spec, const Tensor& input) {
    if (spec.conv_input) {
        if (input.rank() == 3) return input;
        input.require_rank(2, "network input");
        if (input.extent(1) != spec.input_len)
            throw ShapeError("network input length does not match spec");
        return Tensor({input.extent(0), 1, input.extent(1)}, input.values());
    }
    input.require_rank(2, "network input");
    if (input.extent(1) != spec.input_len)
        throw ShapeError("network input length does not match spec");
    return input;
}

}  // namespace

Tensor forward(const NetworkSpec& spec, ParameterSet& params, const Tensor& input,
               Mode mode, Rng& rng, ForwardCache* cache) {
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.mode = mode;
    c.input = reshape_input(spec, input);
    c.outputs.assign(spec.layers.size(), Tensor());
    c.aux.assign(spec.layers.size(), LayerCache());

    // without a cache we can drop activations once no shortcut needs them
    std::vector<bool> keep(spec.layers.size(), cache != nullptr);
    for (const LayerSpec& l : spec.layers)
        if (l.kind == LayerKind::add_shortcut && l.from >= 0)
            keep[static_cast<std::size_t>(l.from)] = true;

    const Tensor* cur = &c.input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::dense:
                c.outputs[i] = ops::dense_forward(*cur, slot_value(params, l.slot + ".w"),
                                                  slot_value(params, l.slot + ".b"));
                break;
            case LayerKind::conv:
                c.outputs[i] = ops::conv1d_forward(*cur, slot_value(params, l.slot + ".w"),
                                                   slot_value(params, l.slot + ".b"));
                break;
            case LayerKind::batchnorm:
                c.outputs[i] = ops::batchnorm_forward(
                    *cur, slot_value(params, l.slot + ".gamma"),
                    slot_value(params, l.slot + ".beta"),
                    running_value(params, l.slot + ".mean"),
                    running_value(params, l.slot + ".var"), mode,
                    mode == Mode::train ? &c.aux[i].bn : nullptr);
                break;
            case LayerKind::relu:
                c.outputs[i] = ops::relu_forward(*cur);
                break;
            case LayerKind::dropout: {
                auto r = ops::dropout_forward(*cur, l.rate, rng, mode);
                c.outputs[i] = std::move(r.output);
                c.aux[i].dropout_mask = std::move(r.mask);
                break;
            }
            case LayerKind::gap:
                c.outputs[i] = ops::global_avg_pool_forward(*cur);
                break;
            case LayerKind::add_shortcut: {
                const Tensor& src = l.from < 0 ? c.input
                                               : c.outputs[static_cast<std::size_t>(l.from)];
                if (l.projection) {
                    c.aux[i].proj_conv_out = ops::conv1d_forward(
                        src, slot_value(params, l.slot + ".w"),
                        slot_value(params, l.slot + ".b"));
                    Tensor projected = ops::batchnorm_forward(
                        c.aux[i].proj_conv_out, slot_value(params, l.slot + "_bn.gamma"),
                        slot_value(params, l.slot + "_bn.beta"),
                        running_value(params, l.slot + "_bn.mean"),
                        running_value(params, l.slot + "_bn.var"), mode,
                        mode == Mode::train ? &c.aux[i].proj_bn : nullptr);
                    c.outputs[i] = ops::add_forward(*cur, projected);
                } else {
                    c.outputs[i] = ops::add_forward(*cur, src);
                }
                break;
            }
            case LayerKind::softmax_head:
                // marker layer; logits pass through, the loss applies softmax
                c.outputs[i] = *cur;
                break;
        }
        cur = &c.outputs[i];
        if (i > 0 && !keep[i - 1]) c.outputs[i - 1] = Tensor();
    }
    return *cur;
}

SlotMap backward(const NetworkSpec& spec, const ParameterSet& params,
                 const ForwardCache& cache, const Tensor& grad_logits) {
    if (cache.mode != Mode::train)
        throw NumericError("backward requires a train-mode forward cache");
    const std::size_t L = spec.layers.size();
    SlotMap grads;
    std::vector<Tensor> gout(L);

    auto accumulate = [](Tensor& dst, const Tensor& g) {
        if (dst.empty())
            dst = g;
        else
            dst += g;
    };

    gout[L - 1] = grad_logits;
    for (std::size_t ri = L; ri-- > 0;) {
        const LayerSpec& l = spec.layers[ri];
        const Tensor& g = gout[ri];
        if (g.empty()) throw NumericError("backward: missing gradient for layer");
        const Tensor& in = ri == 0 ? cache.input : cache.outputs[ri - 1];
        Tensor gin;
        switch (l.kind) {
            case LayerKind::dense: {
                auto dg = ops::dense_backward(g, in, slot_value(params, l.slot + ".w"));
                grads[l.slot + ".w"] = std::move(dg.weights);
                grads[l.slot + ".b"] = std::move(dg.bias);
                gin = std::move(dg.input);
                break;
            }
            case LayerKind::conv: {
                auto cg = ops::conv1d_backward(g, in, slot_value(params, l.slot + ".w"));
                grads[l.slot + ".w"] = std::move(cg.kernels);
                grads[l.slot + ".b"] = std::move(cg.bias);
                gin = std::move(cg.input);
                break;
            }
            case LayerKind::batchnorm: {
                auto bg = ops::batchnorm_backward(g, cache.aux[ri].bn,
                                                  slot_value(params, l.slot + ".gamma"));
                grads[l.slot + ".gamma"] = std::move(bg.gamma);
                grads[l.slot + ".beta"] = std::move(bg.beta);
                gin = std::move(bg.input);
                break;
            }
            case LayerKind::relu:
                gin = ops::relu_backward(g, in);
                break;
            case LayerKind::dropout:
                gin = ops::dropout_backward(g, cache.aux[ri].dropout_mask);
                break;
            case LayerKind::gap:
                gin = ops::global_avg_pool_backward(g, in.extent(2));
                break;
            case LayerKind::add_shortcut: {
                gin = g;  // main branch
                Tensor branch = g;
                if (l.projection) {
                    auto bg = ops::batchnorm_backward(branch, cache.aux[ri].proj_bn,
                                                      slot_value(params, l.slot + "_bn.gamma"));
                    grads[l.slot + "_bn.gamma"] = std::move(bg.gamma);
                    grads[l.slot + "_bn.beta"] = std::move(bg.beta);
                    const Tensor& src = l.from < 0
                        ? cache.input
                        : cache.outputs[static_cast<std::size_t>(l.from)];
                    auto cg = ops::conv1d_backward(bg.input, src,
                                                   slot_value(params, l.slot + ".w"));
                    grads[l.slot + ".w"] = std::move(cg.kernels);
                    grads[l.slot + ".b"] = std::move(cg.bias);
                    branch = std::move(cg.input);
                }
                if (l.from >= 0)
                    accumulate(gout[static_cast<std::size_t>(l.from)], branch);
                // from == -1: gradient w.r.t. the network input, not needed
                break;
            }
            case LayerKind::softmax_head:
                gin = g;
                break;
        }
        if (ri > 0) accumulate(gout[ri - 1], gin);
    }
    return grads;
}

}  // namespace tsc
