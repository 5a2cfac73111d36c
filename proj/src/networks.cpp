#include "xfrl/networks.hpp"

#include <algorithm>
#include <cmath>

#include "xfrl/error.hpp"
#include "xfrl/nn.hpp"
#include "xfrl/rng.hpp"

namespace xfrl::net {

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::a_convnet: return "a_convnet";
        case Arch::h_net: return "h_net";
        case Arch::alexnet_conv: return "alexnet_conv";
    }
    return "?";
}

Arch arch_from_name(const std::string& name) {
    if (name == "a_convnet") return Arch::a_convnet;
    if (name == "h_net") return Arch::h_net;
    if (name == "alexnet_conv") return Arch::alexnet_conv;
    throw value_error("unknown architecture '" + name +
                      "' (expected a_convnet, h_net or alexnet_conv)");
}

const std::vector<LayerSpec>& architecture(Arch a) {
    static const std::vector<LayerSpec> a_convnet = {
        {16, 5, true}, {32, 5, true}, {64, 5, false}, {128, 6, true}};
    static const std::vector<LayerSpec> h_net = {
        {48, 5, true}, {96, 5, true}, {128, 3, false}, {128, 3, false}, {256, 3, false}};
    static const std::vector<LayerSpec> alexnet_conv = {
        {96, 11, true}, {256, 5, false}, {384, 3, false}, {384, 3, false}, {256, 3, false}};
    switch (a) {
        case Arch::a_convnet: return a_convnet;
        case Arch::h_net: return h_net;
        case Arch::alexnet_conv: return alexnet_conv;
    }
    return a_convnet;
}

std::vector<std::array<std::size_t, 3>> block_out_shapes(Arch a, std::size_t in_ch,
                                                         std::size_t in_h, std::size_t in_w) {
    if (in_ch == 0 || in_h == 0 || in_w == 0) throw shape_error("block_out_shapes: empty input");
    const auto& layers = architecture(a);
    std::vector<std::array<std::size_t, 3>> shapes;
    std::size_t h = in_h, w = in_w;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& spec = layers[l];
        if (h < spec.kernel || w < spec.kernel)
            throw shape_error("block " + std::to_string(l + 1) + " of " + arch_name(a) +
                              ": input " + std::to_string(h) + "x" + std::to_string(w) +
                              " smaller than kernel " + std::to_string(spec.kernel));
        h = h - spec.kernel + 1;
        w = w - spec.kernel + 1;
        if (spec.pool) {
            if (h % 2 != 0 || w % 2 != 0)
                throw shape_error("block " + std::to_string(l + 1) + " of " + arch_name(a) +
                                  ": pool needs even dims, got " + std::to_string(h) + "x" +
                                  std::to_string(w));
            h /= 2;
            w /= 2;
        }
        shapes.push_back({spec.channels, h, w});
    }
    (void)in_ch;
    return shapes;
}

static void init_conv(Parameter& w, Parameter& b, std::uint64_t stream) {
    Rng rng(stream);
    const std::size_t co = w.value.dim(0), ci = w.value.dim(1);
    const std::size_t kh = w.value.dim(2), kw = w.value.dim(3);
    const double fan_in = static_cast<double>(ci * kh * kw);
    const double fan_out = static_cast<double>(co * kh * kw);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.value.v) v = rng.uniform(-bound, bound);
    b.value.zero();
}

static void init_dense(Parameter& w, Parameter& b, std::uint64_t stream) {
    Rng rng(stream);
    const double fan_out = static_cast<double>(w.value.dim(0));
    const double fan_in = static_cast<double>(w.value.dim(1));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.value.v) v = rng.uniform(-bound, bound);
    b.value.zero();
}

NetworkModel build(Arch a, HeadSpec head, std::size_t in_ch, std::size_t in_h, std::size_t in_w,
                   std::uint64_t seed) {
    if (head.kind == HeadKind::classification && head.num_classes < 2)
        throw value_error("build: classification head needs at least 2 classes");
    const auto shapes = block_out_shapes(a, in_ch, in_h, in_w);
    const auto& layers = architecture(a);

    NetworkModel m;
    m.arch = a;
    m.head = head;
    m.in_ch = in_ch;
    m.in_h = in_h;
    m.in_w = in_w;

    std::size_t ci = in_ch;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        ConvBlock blk;
        blk.kernel = layers[l].kernel;
        blk.pool = layers[l].pool;
        blk.w = Parameter({layers[l].channels, ci, blk.kernel, blk.kernel});
        blk.b = Parameter({layers[l].channels});
        init_conv(blk.w, blk.b, mix_seed(seed, kStreamInit, l));
        m.blocks.push_back(std::move(blk));
        ci = layers[l].channels;
    }

    const auto& top = shapes.back();
    if (head.kind == HeadKind::classification) {
        m.fc_w = Parameter({head.num_classes, top[0]});
        m.fc_b = Parameter({head.num_classes});
        init_dense(m.fc_w, m.fc_b, mix_seed(seed, kStreamHead, 0));
    } else {
        // upsample by 2 until the input size is reached; 1x1 convs in between
        std::size_t s = top[1];
        if (top[1] != top[2] || in_h != in_w)
            throw shape_error("build: reconstruction head needs square inputs");
        std::size_t stages = 0;
        while (s < in_h) {
            s *= 2;
            ++stages;
        }
        if (s != in_h)
            throw shape_error("build: reconstruction infeasible for " + arch_name(a) + " at " +
                              std::to_string(in_h) + "x" + std::to_string(in_w) +
                              ": top feature size " + std::to_string(top[1]) +
                              " cannot be doubled to the input size");
        std::size_t c = top[0];
        const std::size_t n_stages = std::max<std::size_t>(stages, 1);
        for (std::size_t j = 0; j < n_stages; ++j) {
            DecoderBlock d;
            d.upsample = stages > 0;
            const std::size_t co = (j + 1 == n_stages) ? in_ch : std::max<std::size_t>(c / 2, 1);
            d.w = Parameter({co, c, 1, 1});
            d.b = Parameter({co});
            init_conv(d.w, d.b, mix_seed(seed, kStreamHead, 1 + j));
            m.decoder.push_back(std::move(d));
            c = co;
        }
    }
    return m;
}

std::size_t NetworkModel::param_count() const {
    std::size_t n = 0;
    for (const auto& blk : blocks) n += blk.w.value.size() + blk.b.value.size();
    return n;
}

std::vector<Parameter*> NetworkModel::parameters() {
    std::vector<Parameter*> ps;
    for (auto& blk : blocks) {
        ps.push_back(&blk.w);
        ps.push_back(&blk.b);
    }
    for (auto& d : decoder) {
        ps.push_back(&d.w);
        ps.push_back(&d.b);
    }
    if (head.kind == HeadKind::classification) {
        ps.push_back(&fc_w);
        ps.push_back(&fc_b);
    }
    return ps;
}

void NetworkModel::apply_frozen() {
    if (frozen_upto > blocks.size())
        throw value_error("frozen_upto " + std::to_string(frozen_upto) + " exceeds layer count " +
                          std::to_string(blocks.size()));
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const bool train = l >= frozen_upto;
        blocks[l].w.trainable = train;
        blocks[l].b.trainable = train;
    }
}

void NetworkModel::zero_grad() {
    for (Parameter* p : parameters()) p->grad.zero();
}

ForwardTrace forward(const NetworkModel& m, const Tensor& x, std::size_t first_block) {
    const std::size_t L = m.blocks.size();
    if (first_block > 0 && m.head.kind != HeadKind::classification)
        throw value_error("forward: cached prefix requires a classification head");
    if (first_block >= L + 1) throw value_error("forward: first_block out of range");

    ForwardTrace t;
    t.input = x;
    t.first_block = first_block;
    t.blocks.resize(L);

    const Tensor* cur = &t.input;
    for (std::size_t l = first_block; l < L; ++l) {
        const auto& blk = m.blocks[l];
        Tensor conv = nn::conv2d_forward(*cur, blk.w.value, blk.b.value, 1);
        t.blocks[l].relu_out = nn::relu_forward(conv);
        if (blk.pool)
            t.blocks[l].pooled = nn::maxpool2_forward(t.blocks[l].relu_out, t.blocks[l].pool_idx);
        cur = &t.blocks[l].out(blk.pool);
    }

    if (m.head.kind == HeadKind::classification) {
        const Tensor& feat = *cur;
        const std::size_t C = feat.dim(0), hw = feat.dim(1) * feat.dim(2);
        t.gap = Tensor({C});
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            const double* plane = feat.data() + c * hw;
            for (std::size_t i = 0; i < hw; ++i) acc += plane[i];
            t.gap.v[c] = acc / static_cast<double>(hw);
        }
        t.logits = nn::dense_forward(t.gap, m.fc_w.value, m.fc_b.value);
    } else {
        const Tensor* d = cur;
        t.dec.resize(m.decoder.size());
        for (std::size_t j = 0; j < m.decoder.size(); ++j) {
            const auto& stage = m.decoder[j];
            t.dec[j].conv_in = stage.upsample ? nn::upsample2_forward(*d) : *d;
            Tensor conv = nn::conv2d_forward(t.dec[j].conv_in, stage.w.value, stage.b.value, 1);
            const bool last = (j + 1 == m.decoder.size());
            t.dec[j].act = last ? std::move(conv) : nn::relu_forward(conv);
            d = &t.dec[j].act;
        }
        t.recon = *d;
    }
    return t;
}

Tensor forward_features(const NetworkModel& m, const Tensor& image, std::size_t layer) {
    if (layer < 1 || layer > m.blocks.size())
        throw value_error("forward_features: layer " + std::to_string(layer) +
                          " out of range 1.." + std::to_string(m.blocks.size()));
    const Tensor* cur = &image;
    Tensor relu, pooled;
    std::vector<std::uint32_t> idx;
    for (std::size_t l = 0; l < layer; ++l) {
        const auto& blk = m.blocks[l];
        Tensor conv = nn::conv2d_forward(*cur, blk.w.value, blk.b.value, 1);
        relu = nn::relu_forward(conv);
        if (blk.pool) {
            pooled = nn::maxpool2_forward(relu, idx);
            cur = &pooled;
        } else {
            cur = &relu;
        }
    }
    Tensor flat({cur->size()});
    flat.v = cur->v;
    return flat;
}

static Tensor head_backward(NetworkModel& m, ForwardTrace const& t, const Tensor& head_grad,
                            const std::vector<std::size_t>& top_shape) {
    if (m.head.kind == HeadKind::classification) {
        Tensor ggap;
        nn::dense_backward(t.gap, m.fc_w.value, head_grad, &ggap, m.fc_w.grad, m.fc_b.grad);
        const std::size_t C = top_shape[0], hw = top_shape[1] * top_shape[2];
        Tensor g(top_shape);
        const double inv = 1.0 / static_cast<double>(hw);
        for (std::size_t c = 0; c < C; ++c) {
            const double v = ggap.v[c] * inv;
            double* plane = g.data() + c * hw;
            std::fill(plane, plane + hw, v);
        }
        return g;
    }
    // reconstruction: walk the decoder stages in reverse
    Tensor g = head_grad;
    for (std::size_t jr = m.decoder.size(); jr-- > 0;) {
        auto& stage = m.decoder[jr];
        const bool last = (jr + 1 == m.decoder.size());
        if (!last) g = nn::relu_backward(t.dec[jr].act, g);
        Tensor gin;
        nn::conv2d_backward(t.dec[jr].conv_in, stage.w.value, g, 1, &gin, stage.w.grad,
                            stage.b.grad);
        g = stage.upsample ? nn::upsample2_backward(gin) : std::move(gin);
    }
    return g;
}

void backward(NetworkModel& m, const ForwardTrace& trace, const Tensor* head_grad,
              const TapGrads* taps, std::size_t stop_block) {
    const std::size_t L = m.blocks.size();
    if (stop_block < trace.first_block)
        throw value_error("backward: stop_block below the computed prefix");

    std::size_t start;  // highest block with incoming gradient
    Tensor g;
    if (head_grad) {
        start = L - 1;
        const auto& top = (trace.first_block == L) ? trace.input : trace.block_out(m, L - 1);
        g = head_backward(m, trace, *head_grad, top.shape);
        if (trace.first_block == L) return;  // fully cached stack, head-only update
    } else {
        if (!taps || taps->empty()) return;
        start = taps->rbegin()->first;
        if (start >= L) throw value_error("backward: tap block index out of range");
        g = Tensor(trace.block_out(m, start).shape);
    }

    for (std::size_t l = start + 1; l-- > stop_block;) {
        if (taps) {
            auto it = taps->find(l);
            if (it != taps->end()) {
                const std::vector<double>& tap = *it->second;
                if (tap.size() != g.size())
                    throw value_error("backward: tap size mismatch at block " +
                                      std::to_string(l + 1));
                for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += tap[i];
            }
        }
        const auto& blk = m.blocks[l];
        Tensor grelu = blk.pool ? nn::maxpool2_backward(trace.blocks[l].pool_idx, g,
                                                        trace.blocks[l].relu_out.shape)
                                : std::move(g);
        Tensor gconv = nn::relu_backward(trace.blocks[l].relu_out, grelu);
        const Tensor& in = (l == trace.first_block)
                               ? trace.input
                               : trace.block_out(m, l - 1);
        Tensor gin;
        const bool need_gin = l > stop_block;
        nn::conv2d_backward(in, blk.w.value, gconv, 1, need_gin ? &gin : nullptr, m.blocks[l].w.grad,
                            m.blocks[l].b.grad);
        g = std::move(gin);
    }
}

NetworkModel surgery_transfer(const NetworkModel& source, std::size_t k, HeadSpec new_head,
                              std::size_t new_h, std::size_t new_w, std::uint64_t seed,
                              bool freeze) {
    const std::size_t L = source.blocks.size();
    if (k > L)
        throw value_error("surgery_transfer: k=" + std::to_string(k) + " exceeds layer count " +
                          std::to_string(L));
    NetworkModel target = build(source.arch, new_head, source.in_ch, new_h, new_w, seed);
    for (std::size_t l = 0; l < k; ++l) {
        target.blocks[l].w.value = source.blocks[l].w.value;
        target.blocks[l].b.value = source.blocks[l].b.value;
    }
    target.frozen_upto = freeze ? k : 0;
    target.apply_frozen();
    return target;
}

}  // namespace xfrl::net
