#pragma once

#include "microt/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace microt {

// ---------------------------------------------------------------------------
// Blocks and nets
// ---------------------------------------------------------------------------

enum class BlockKind : std::uint8_t {
  Dense = 0,
  Conv2D = 1,
  ReLU = 2,
  GlobalAvgPool = 3,
  Softmax = 4,
};

std::string block_kind_name(BlockKind k);

/// One sequential unit of the feature extractor: the granularity at which
/// models are split, counted and quantized. Dense accepts any input whose
/// element count matches `in` (implicit flatten); Conv2D expects [C,H,W].
struct Block {
  BlockKind kind = BlockKind::ReLU;

  // Dense
  int in = 0;
  int out = 0;

  // Conv2D
  int in_ch = 0;
  int out_ch = 0;
  int ksize = 0;
  int stride = 1;
  bool same_pad = false;  // default is valid (no) padding

  // Softmax
  double temperature = 1.0;

  Tensor weight;  // Dense: [out,in]; Conv2D: [out_ch,in_ch,k,k]
  Tensor bias;    // Dense: [out];    Conv2D: [out_ch]

  bool has_params() const { return kind == BlockKind::Dense || kind == BlockKind::Conv2D; }
};

Block dense_block(int in, int out);
Block conv2d_block(int in_ch, int out_ch, int ksize, int stride = 1, bool same_pad = false);
Block relu_block();
Block gap_block();
Block softmax_block(double temperature = 1.0);

/// Optional classifier on top of the block stack: a dense layer followed by
/// softmax. SSL/prototype heads keep apply_softmax off and expose raw logits.
struct Head {
  Block dense;  // kind == Dense
  bool apply_softmax = true;
  double temperature = 1.0;
};

struct BlockNet {
  std::vector<Block> blocks;
  std::optional<Head> head;
};

// ---------------------------------------------------------------------------
// Architecture specs (untrained descriptions; seeded_init turns them into nets)
// ---------------------------------------------------------------------------

struct BlockSpecEntry {
  BlockKind kind = BlockKind::ReLU;
  int a = 0;  // Dense in / Conv in_ch
  int b = 0;  // Dense out / Conv out_ch
  int ksize = 0;
  int stride = 1;
  bool same_pad = false;
  double temperature = 1.0;
};

struct HeadSpec {
  int in = 0;
  int out = 0;
  bool apply_softmax = true;
  double temperature = 1.0;
};

struct NetSpec {
  std::vector<BlockSpecEntry> blocks;
  std::optional<HeadSpec> head;
};

/// Parses "conv:1:8:3:2 relu conv:8:12:3 relu gap" style block lists.
/// Tokens: dense:IN:OUT | conv:IN:OUT:K[:STRIDE[:same]] | relu | gap |
/// softmax[:TEMP]. Head specs are a single "dense:IN:OUT[:nosoftmax]" token.
NetSpec parse_net_spec(const std::string& blocks, const std::string& head = "");
std::string net_spec_str(const NetSpec& spec);

// ---------------------------------------------------------------------------
// Shape flow
// ---------------------------------------------------------------------------

Shape block_output_shape(const Block& b, const Shape& in_shape);

/// Output shape of the whole net (head included); throws ShapeError with the
/// offending block index if adjacent blocks are incompatible.
Shape net_output_shape(const BlockNet& net, const Shape& input_shape);

/// Shape right before the head (after the last block).
Shape net_feature_shape(const BlockNet& net, const Shape& input_shape);

// ---------------------------------------------------------------------------
// Forward / backward / update
// ---------------------------------------------------------------------------

struct ForwardResult {
  Tensor output;       // head output if a head exists, else last block output
  Tensor features;     // last block output (pre-head view of `output` otherwise)
  Tensor head_logits;  // pre-softmax head output; empty when no head
  /// activations[0] is the input; activations[i+1] the output of block i.
  std::vector<Tensor> activations;
};

Tensor block_forward(const Block& b, const Tensor& x);
ForwardResult forward(const BlockNet& net, const Tensor& input);

struct ParamGrad {
  Tensor weight;
  Tensor bias;
};

/// One gradient per trainable parameter tensor, aligned with the net's blocks.
struct GradientTape {
  std::vector<ParamGrad> blocks;
  std::optional<ParamGrad> head;
};

/// dL/dx for one block; when the block has parameters, *pg receives dL/dW and
/// dL/db. `x` is the block input and `y` its forward output.
Tensor block_backward(const Block& b, const Tensor& x, const Tensor& y, const Tensor& dy,
                      ParamGrad* pg);

/// Reverse pass through head and blocks. `loss_grad` is dL/d(output) for the
/// same forward call that produced `fr`; mismatched activations are rejected.
GradientTape backward(const BlockNet& net, const Tensor& loss_grad, const ForwardResult& fr);

/// Returns dL/d(input) alongside the tape.
GradientTape backward(const BlockNet& net, const Tensor& loss_grad, const ForwardResult& fr,
                      Tensor* input_grad);

/// Reverse pass for a loss that also depends on an interior activation:
/// `boundary_grad` is dL/d(activations[boundary_index]) and joins the flow at
/// that boundary. Used for part/full multi-exit training. Heads are not
/// traversed; `output_grad` is dL/d(last block output).
GradientTape backward_with_boundary_grad(const BlockNet& net, const Tensor& output_grad,
                                         int boundary_index, const Tensor& boundary_grad,
                                         const ForwardResult& fr);

/// Plain SGD: theta' = theta - lr * g. No momentum state exists anywhere.
/// Non-finite gradients refuse the update and name the offending parameter.
BlockNet sgd_step(BlockNet net, const GradientTape& tape, double lr);
void sgd_step_inplace(BlockNet& net, const GradientTape& tape, double lr);

// ---------------------------------------------------------------------------
// MACs, init, splitting
// ---------------------------------------------------------------------------

/// Multiply-accumulate count: Dense in*out, Conv2D out_ch*in_ch*k^2*out_h*out_w,
/// everything else 0. Head dense is included when present.
std::int64_t mac_count(const BlockNet& net, const Shape& input_shape);
std::int64_t block_macs(const Block& b, const Shape& in_shape);

/// Deterministic init: weights uniform in +-sqrt(6/(fan_in+fan_out)), zero
/// biases. Identical (spec, seed) pairs produce bit-identical parameters.
BlockNet seeded_init(const NetSpec& spec, std::uint64_t seed);

/// part = blocks[0..index) with no head; remainder = blocks[index..) plus the
/// original head. Concatenated forward equals full forward bit-exactly.
std::pair<BlockNet, BlockNet> split_model(const BlockNet& net, int index);
BlockNet concat_models(const BlockNet& part, const BlockNet& remainder);

std::int64_t param_count(const BlockNet& net);

/// FNV-1a over the raw parameter bytes, for determinism and freeze checks.
std::uint64_t param_checksum(const BlockNet& net);

}  // namespace microt
