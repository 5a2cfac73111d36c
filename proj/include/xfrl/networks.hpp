#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xfrl/tensor.hpp"

namespace xfrl::net {

enum class Arch { a_convnet, h_net, alexnet_conv };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

// One conv block: valid conv (stride 1), relu, fixed optional 2x2 maxpool.
// Pool placement is a property of the architecture, chosen where the
// canonical 64x64 input keeps even spatial dims.
struct LayerSpec {
    std::size_t channels;
    std::size_t kernel;
    bool pool;
};

const std::vector<LayerSpec>& architecture(Arch a);

enum class HeadKind { classification, reconstruction };

struct HeadSpec {
    HeadKind kind = HeadKind::classification;
    std::size_t num_classes = 0;  // classification only
};

struct ConvBlock {
    Parameter w;  // [Co,Ci,k,k]
    Parameter b;  // [Co]
    std::size_t kernel = 0;
    bool pool = false;
};

// Reconstruction decoder stage: optional 2x nearest upsample, then 1x1 conv.
struct DecoderBlock {
    Parameter w;
    Parameter b;
    bool upsample = true;
};

struct NetworkModel {
    Arch arch = Arch::a_convnet;
    HeadSpec head;
    std::size_t in_ch = 1, in_h = 0, in_w = 0;
    std::size_t frozen_upto = 0;  // blocks 1..frozen_upto are frozen (1-based count)

    std::vector<ConvBlock> blocks;
    Parameter fc_w, fc_b;               // classification: global average pool + dense
    std::vector<DecoderBlock> decoder;  // reconstruction

    std::size_t num_layers() const { return blocks.size(); }
    std::size_t param_count() const;  // conv stack only (weights + biases)
    std::vector<Parameter*> parameters();
    void apply_frozen();  // sync trainable flags with frozen_upto
    void zero_grad();
};

// Per-block output shapes [C,H,W] for an input; throws shape_error naming the
// first infeasible block (1-based).
std::vector<std::array<std::size_t, 3>> block_out_shapes(Arch a, std::size_t in_ch,
                                                         std::size_t in_h, std::size_t in_w);

// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, one derived rng
// stream per layer so partial reinitialization reproduces a fresh build.
NetworkModel build(Arch a, HeadSpec head, std::size_t in_ch, std::size_t in_h, std::size_t in_w,
                   std::uint64_t seed);

struct BlockTrace {
    Tensor relu_out;
    std::vector<std::uint32_t> pool_idx;
    Tensor pooled;

    const Tensor& out(bool has_pool) const { return has_pool ? pooled : relu_out; }
};

struct DecoderTrace {
    Tensor conv_in;  // post-upsample input of the stage conv
    Tensor act;      // stage output (post-relu; final stage is linear)
};

struct ForwardTrace {
    Tensor input;  // as fed to the first computed block
    std::size_t first_block = 0;
    std::vector<BlockTrace> blocks;  // entries below first_block stay empty

    Tensor gap;     // classification head intermediates
    Tensor logits;
    std::vector<DecoderTrace> dec;  // reconstruction head intermediates
    Tensor recon;

    const Tensor& block_out(const NetworkModel& m, std::size_t l) const {
        return blocks[l].out(m.blocks[l].pool);
    }
};

// Full forward through blocks [first_block, L) and the head. `x` is the image
// when first_block == 0, otherwise the cached output of block first_block-1.
// first_block > 0 requires a classification head.
ForwardTrace forward(const NetworkModel& m, const Tensor& x, std::size_t first_block = 0);

// Flattened post-activation, post-pool features of block `layer` (1-based).
Tensor forward_features(const NetworkModel& m, const Tensor& image, std::size_t layer);

// Gradients of extra loss terms attached to flattened block outputs,
// keyed by 0-based block index.
using TapGrads = std::map<std::size_t, const std::vector<double>*>;

// Accumulates parameter gradients. head_grad is d(loss)/d(logits) or
// d(loss)/d(recon); pass nullptr when only tap gradients drive the backward
// pass (the walk then starts at the highest tapped block). No gradient flows
// into blocks below `stop_block` (0-based).
void backward(NetworkModel& m, const ForwardTrace& trace, const Tensor* head_grad,
              const TapGrads* taps, std::size_t stop_block);

// Copies layers 1..k of `source` into a fresh build for the new head/input
// size; layers k+1..L and the head come from the seed streams. freeze pins
// the copied prefix.
NetworkModel surgery_transfer(const NetworkModel& source, std::size_t k, HeadSpec new_head,
                              std::size_t new_h, std::size_t new_w, std::uint64_t seed,
                              bool freeze);

}  // namespace xfrl::net
