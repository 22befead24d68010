#include "microt/net.hpp"

#include "microt/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <sstream>

namespace microt {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<MatrixRM>;
using MapConstMat = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct ConvGeom {
  int in_ch, h, w;
  int out_h, out_w;
  int pad_top, pad_left;
};

ConvGeom conv_geometry(const Block& b, const Shape& in_shape) {
  if (in_shape.size() != 3)
    throw ShapeError("Conv2D expects a [C,H,W] input, got " + shape_str(in_shape));
  ConvGeom g{};
  g.in_ch = in_shape[0];
  g.h = in_shape[1];
  g.w = in_shape[2];
  if (g.in_ch != b.in_ch)
    throw ShapeError("Conv2D expects " + std::to_string(b.in_ch) + " input channels, got " +
                     std::to_string(g.in_ch));
  if (b.same_pad) {
    g.out_h = (g.h + b.stride - 1) / b.stride;
    g.out_w = (g.w + b.stride - 1) / b.stride;
    const int pad_h = std::max(0, (g.out_h - 1) * b.stride + b.ksize - g.h);
    const int pad_w = std::max(0, (g.out_w - 1) * b.stride + b.ksize - g.w);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (g.h < b.ksize || g.w < b.ksize)
      throw ShapeError("Conv2D kernel " + std::to_string(b.ksize) + " larger than input " +
                       shape_str(in_shape));
    g.out_h = (g.h - b.ksize) / b.stride + 1;
    g.out_w = (g.w - b.ksize) / b.stride + 1;
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

/// Unrolls conv patches into a (in_ch*k*k) x (out_h*out_w) matrix.
MatrixRM im2col(const Block& b, const Tensor& x, const ConvGeom& g) {
  const int k = b.ksize;
  MatrixRM cols = MatrixRM::Zero(static_cast<Eigen::Index>(g.in_ch) * k * k,
                                 static_cast<Eigen::Index>(g.out_h) * g.out_w);
  for (int c = 0; c < g.in_ch; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ki) * k + kj;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * b.stride - g.pad_top + ki;
          if (ih < 0 || ih >= g.h) continue;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * b.stride - g.pad_left + kj;
            if (iw < 0 || iw >= g.w) continue;
            cols(row, static_cast<Eigen::Index>(oh) * g.out_w + ow) =
                x.data[(static_cast<Eigen::Index>(c) * g.h + ih) * g.w + iw];
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-adds column gradients back onto the input image.
void col2im_accumulate(const Block& b, const MatrixRM& dcols, const ConvGeom& g, Tensor& dx) {
  const int k = b.ksize;
  for (int c = 0; c < g.in_ch; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ki) * k + kj;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * b.stride - g.pad_top + ki;
          if (ih < 0 || ih >= g.h) continue;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * b.stride - g.pad_left + kj;
            if (iw < 0 || iw >= g.w) continue;
            dx.data[(static_cast<Eigen::Index>(c) * g.h + ih) * g.w + iw] +=
                dcols(row, static_cast<Eigen::Index>(oh) * g.out_w + ow);
          }
        }
      }
    }
  }
}

Tensor softmax_stable(const Tensor& x, double temperature) {
  Tensor y(x.shape);
  const double m = x.data.maxCoeff();
  y.data = ((x.data - m) / temperature).exp();
  y.data /= y.data.sum();
  return y;
}

Tensor dense_forward(const Block& b, const Tensor& x) {
  if (x.size() != b.in)
    throw ShapeError("Dense expects " + std::to_string(b.in) + " inputs, got " +
                     shape_str(x.shape));
  Tensor y({b.out});
  MapConstMat W(b.weight.data.data(), b.out, b.in);
  VecMap(y.data.data(), b.out) =
      W * ConstVecMap(x.data.data(), b.in) + ConstVecMap(b.bias.data.data(), b.out);
  return y;
}

void check_non_finite(const Tensor& g, int block_index, const char* which) {
  if (g.all_finite()) return;
  Eigen::Index bad = 0;
  for (Eigen::Index i = 0; i < g.data.size(); ++i) {
    if (!std::isfinite(g.data[i])) {
      bad = i;
      break;
    }
  }
  std::ostringstream os;
  os << "non-finite gradient at block " << block_index << " " << which << "[" << bad
     << "]; update refused";
  throw std::runtime_error(os.str());
}

}  // namespace

std::string block_kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::Dense: return "dense";
    case BlockKind::Conv2D: return "conv";
    case BlockKind::ReLU: return "relu";
    case BlockKind::GlobalAvgPool: return "gap";
    case BlockKind::Softmax: return "softmax";
  }
  return "?";
}

Block dense_block(int in, int out) {
  Block b;
  b.kind = BlockKind::Dense;
  b.in = in;
  b.out = out;
  b.weight = Tensor({out, in});
  b.bias = Tensor({out});
  return b;
}

Block conv2d_block(int in_ch, int out_ch, int ksize, int stride, bool same_pad) {
  Block b;
  b.kind = BlockKind::Conv2D;
  b.in_ch = in_ch;
  b.out_ch = out_ch;
  b.ksize = ksize;
  b.stride = stride;
  b.same_pad = same_pad;
  b.weight = Tensor({out_ch, in_ch, ksize, ksize});
  b.bias = Tensor({out_ch});
  return b;
}

Block relu_block() {
  Block b;
  b.kind = BlockKind::ReLU;
  return b;
}

Block gap_block() {
  Block b;
  b.kind = BlockKind::GlobalAvgPool;
  return b;
}

Block softmax_block(double temperature) {
  if (temperature <= 0) throw std::invalid_argument("softmax temperature must be positive");
  Block b;
  b.kind = BlockKind::Softmax;
  b.temperature = temperature;
  return b;
}

// --- spec parsing ------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& token) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : token) {
    if (c == ':') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

BlockSpecEntry parse_block_token(const std::string& token) {
  const auto f = split_fields(token);
  BlockSpecEntry e;
  if (f[0] == "dense") {
    if (f.size() != 3) throw std::invalid_argument("dense:IN:OUT expected, got '" + token + "'");
    e.kind = BlockKind::Dense;
    e.a = std::stoi(f[1]);
    e.b = std::stoi(f[2]);
  } else if (f[0] == "conv") {
    if (f.size() < 4 || f.size() > 6)
      throw std::invalid_argument("conv:IN:OUT:K[:STRIDE[:same]] expected, got '" + token + "'");
    e.kind = BlockKind::Conv2D;
    e.a = std::stoi(f[1]);
    e.b = std::stoi(f[2]);
    e.ksize = std::stoi(f[3]);
    e.stride = f.size() >= 5 ? std::stoi(f[4]) : 1;
    e.same_pad = f.size() == 6 && f[5] == "same";
  } else if (f[0] == "relu") {
    e.kind = BlockKind::ReLU;
  } else if (f[0] == "gap") {
    e.kind = BlockKind::GlobalAvgPool;
  } else if (f[0] == "softmax") {
    e.kind = BlockKind::Softmax;
    e.temperature = f.size() >= 2 ? std::stod(f[1]) : 1.0;
  } else {
    throw std::invalid_argument("unknown block token '" + token + "'");
  }
  return e;
}

}  // namespace

NetSpec parse_net_spec(const std::string& blocks, const std::string& head) {
  NetSpec spec;
  std::istringstream is(blocks);
  std::string token;
  while (is >> token) spec.blocks.push_back(parse_block_token(token));
  if (!head.empty()) {
    const auto f = split_fields(head);
    if (f[0] != "dense" || f.size() < 3)
      throw std::invalid_argument("head spec must be dense:IN:OUT[:nosoftmax], got '" + head + "'");
    HeadSpec h;
    h.in = std::stoi(f[1]);
    h.out = std::stoi(f[2]);
    h.apply_softmax = !(f.size() >= 4 && f[3] == "nosoftmax");
    spec.head = h;
  }
  return spec;
}

std::string net_spec_str(const NetSpec& spec) {
  std::ostringstream os;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& e = spec.blocks[i];
    if (i) os << " ";
    switch (e.kind) {
      case BlockKind::Dense: os << "dense:" << e.a << ":" << e.b; break;
      case BlockKind::Conv2D:
        os << "conv:" << e.a << ":" << e.b << ":" << e.ksize << ":" << e.stride;
        if (e.same_pad) os << ":same";
        break;
      case BlockKind::ReLU: os << "relu"; break;
      case BlockKind::GlobalAvgPool: os << "gap"; break;
      case BlockKind::Softmax: os << "softmax:" << e.temperature; break;
    }
  }
  if (spec.head) {
    os << " | dense:" << spec.head->in << ":" << spec.head->out;
    if (!spec.head->apply_softmax) os << ":nosoftmax";
  }
  return os.str();
}

// --- shape flow ---------------------------------------------------------------

Shape block_output_shape(const Block& b, const Shape& in_shape) {
  switch (b.kind) {
    case BlockKind::Dense:
      if (numel(in_shape) != b.in)
        throw ShapeError("Dense expects " + std::to_string(b.in) + " inputs, got " +
                         shape_str(in_shape));
      return {b.out};
    case BlockKind::Conv2D: {
      const ConvGeom g = conv_geometry(b, in_shape);
      return {b.out_ch, g.out_h, g.out_w};
    }
    case BlockKind::ReLU:
    case BlockKind::Softmax:
      return in_shape;
    case BlockKind::GlobalAvgPool:
      if (in_shape.size() != 3)
        throw ShapeError("GlobalAvgPool expects a [C,H,W] input, got " + shape_str(in_shape));
      return {in_shape[0]};
  }
  throw std::logic_error("unreachable");
}

Shape net_feature_shape(const BlockNet& net, const Shape& input_shape) {
  Shape s = input_shape;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    try {
      s = block_output_shape(net.blocks[i], s);
    } catch (const ShapeError& e) {
      throw ShapeError("block " + std::to_string(i) + " (" +
                       block_kind_name(net.blocks[i].kind) + "): " + e.what());
    }
  }
  return s;
}

Shape net_output_shape(const BlockNet& net, const Shape& input_shape) {
  Shape s = net_feature_shape(net, input_shape);
  if (net.head) {
    if (numel(s) != net.head->dense.in)
      throw ShapeError("head expects " + std::to_string(net.head->dense.in) +
                       " features, got " + shape_str(s));
    s = {net.head->dense.out};
  }
  return s;
}

// --- forward ------------------------------------------------------------------

Tensor block_forward(const Block& b, const Tensor& x) {
  switch (b.kind) {
    case BlockKind::Dense:
      return dense_forward(b, x);
    case BlockKind::Conv2D: {
      const ConvGeom g = conv_geometry(b, x.shape);
      const MatrixRM cols = im2col(b, x, g);
      Tensor y({b.out_ch, g.out_h, g.out_w});
      MapConstMat W(b.weight.data.data(), b.out_ch,
                    static_cast<Eigen::Index>(b.in_ch) * b.ksize * b.ksize);
      MapMat Y(y.data.data(), b.out_ch, static_cast<Eigen::Index>(g.out_h) * g.out_w);
      Y.noalias() = W * cols;
      Y.colwise() += ConstVecMap(b.bias.data.data(), b.out_ch);
      return y;
    }
    case BlockKind::ReLU: {
      Tensor y(x.shape);
      y.data = x.data.max(0.0);
      return y;
    }
    case BlockKind::GlobalAvgPool: {
      if (x.shape.size() != 3)
        throw ShapeError("GlobalAvgPool expects a [C,H,W] input, got " + shape_str(x.shape));
      const int c = x.shape[0];
      const Eigen::Index hw = static_cast<Eigen::Index>(x.shape[1]) * x.shape[2];
      Tensor y({c});
      for (int i = 0; i < c; ++i) y.data[i] = x.data.segment(i * hw, hw).mean();
      return y;
    }
    case BlockKind::Softmax:
      return softmax_stable(x, b.temperature);
  }
  throw std::logic_error("unreachable");
}

ForwardResult forward(const BlockNet& net, const Tensor& input) {
  ForwardResult fr;
  fr.activations.reserve(net.blocks.size() + 1);
  fr.activations.push_back(input);
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    try {
      fr.activations.push_back(block_forward(net.blocks[i], fr.activations.back()));
    } catch (const ShapeError& e) {
      throw ShapeError("block " + std::to_string(i) + " (" +
                       block_kind_name(net.blocks[i].kind) + "): " + e.what());
    }
  }
  fr.features = fr.activations.back();
  if (net.head) {
    fr.head_logits = dense_forward(net.head->dense, fr.features);
    fr.output = net.head->apply_softmax ? softmax_stable(fr.head_logits, net.head->temperature)
                                        : fr.head_logits;
  } else {
    fr.output = fr.features;
  }
  return fr;
}

// --- backward -----------------------------------------------------------------

Tensor block_backward(const Block& b, const Tensor& x, const Tensor& y, const Tensor& dy,
                      ParamGrad* pg) {
  switch (b.kind) {
    case BlockKind::Dense: {
      MapConstMat W(b.weight.data.data(), b.out, b.in);
      ConstVecMap dyv(dy.data.data(), b.out);
      if (pg) {
        pg->weight = Tensor({b.out, b.in});
        pg->bias = Tensor({b.out});
        MapMat dW(pg->weight.data.data(), b.out, b.in);
        dW.noalias() = dyv * ConstVecMap(x.data.data(), b.in).transpose();
        pg->bias.data = dy.data;
      }
      Tensor dx(x.shape);
      VecMap(dx.data.data(), b.in).noalias() = W.transpose() * dyv;
      return dx;
    }
    case BlockKind::Conv2D: {
      const ConvGeom g = conv_geometry(b, x.shape);
      const Eigen::Index patch = static_cast<Eigen::Index>(b.in_ch) * b.ksize * b.ksize;
      const Eigen::Index opix = static_cast<Eigen::Index>(g.out_h) * g.out_w;
      const MatrixRM cols = im2col(b, x, g);
      MapConstMat dY(dy.data.data(), b.out_ch, opix);
      MapConstMat W(b.weight.data.data(), b.out_ch, patch);
      if (pg) {
        pg->weight = Tensor(b.weight.shape);
        pg->bias = Tensor({b.out_ch});
        MapMat dW(pg->weight.data.data(), b.out_ch, patch);
        dW.noalias() = dY * cols.transpose();
        VecMap(pg->bias.data.data(), b.out_ch) = dY.rowwise().sum();
      }
      MatrixRM dcols(patch, opix);
      dcols.noalias() = W.transpose() * dY;
      Tensor dx(x.shape);
      col2im_accumulate(b, dcols, g, dx);
      return dx;
    }
    case BlockKind::ReLU: {
      Tensor dx(x.shape);
      dx.data = (x.data > 0.0).select(dy.data, 0.0);
      return dx;
    }
    case BlockKind::GlobalAvgPool: {
      const int c = x.shape[0];
      const Eigen::Index hw = static_cast<Eigen::Index>(x.shape[1]) * x.shape[2];
      Tensor dx(x.shape);
      for (int i = 0; i < c; ++i)
        dx.data.segment(i * hw, hw).setConstant(dy.data[i] / static_cast<double>(hw));
      return dx;
    }
    case BlockKind::Softmax: {
      // y holds the probabilities; dx_j = (p_j/T) * (dy_j - sum_k dy_k p_k).
      const double dot = (dy.data * y.data).sum();
      Tensor dx(x.shape);
      dx.data = y.data * (dy.data - dot) / b.temperature;
      return dx;
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

void check_activations(const BlockNet& net, const ForwardResult& fr) {
  if (fr.activations.size() != net.blocks.size() + 1)
    throw std::invalid_argument("activations do not match net: expected " +
                                std::to_string(net.blocks.size() + 1) + " boundaries, got " +
                                std::to_string(fr.activations.size()));
  Shape s = fr.activations[0].shape;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    s = block_output_shape(net.blocks[i], s);
    if (!same_shape(fr.activations[i + 1].shape, s))
      throw std::invalid_argument("stale activations: boundary " + std::to_string(i + 1) +
                                  " has shape " + shape_str(fr.activations[i + 1].shape) +
                                  ", net produces " + shape_str(s));
  }
}

}  // namespace

GradientTape backward(const BlockNet& net, const Tensor& loss_grad, const ForwardResult& fr,
                      Tensor* input_grad) {
  check_activations(net, fr);
  GradientTape tape;
  tape.blocks.resize(net.blocks.size());

  Tensor dy = loss_grad;
  if (net.head) {
    require_shape(loss_grad.shape, {net.head->dense.out}, "loss gradient");
    if (net.head->apply_softmax) {
      Block sm = softmax_block(net.head->temperature);
      dy = block_backward(sm, fr.head_logits, fr.output, dy, nullptr);
    }
    ParamGrad hg;
    dy = block_backward(net.head->dense, fr.features, fr.head_logits, dy, &hg);
    tape.head = std::move(hg);
  } else {
    require_shape(loss_grad.shape, fr.output.shape, "loss gradient");
  }

  for (std::size_t i = net.blocks.size(); i-- > 0;) {
    const Block& b = net.blocks[i];
    dy = block_backward(b, fr.activations[i], fr.activations[i + 1], dy,
                        b.has_params() ? &tape.blocks[i] : nullptr);
  }
  if (input_grad) *input_grad = std::move(dy);
  return tape;
}

GradientTape backward(const BlockNet& net, const Tensor& loss_grad, const ForwardResult& fr) {
  return backward(net, loss_grad, fr, nullptr);
}

GradientTape backward_with_boundary_grad(const BlockNet& net, const Tensor& output_grad,
                                         int boundary_index, const Tensor& boundary_grad,
                                         const ForwardResult& fr) {
  check_activations(net, fr);
  const int n = static_cast<int>(net.blocks.size());
  if (net.head) throw std::invalid_argument("boundary-grad backward expects a headless net");
  if (boundary_index < 0 || boundary_index > n)
    throw std::out_of_range("boundary index " + std::to_string(boundary_index) + " outside [0, " +
                            std::to_string(n) + "]");
  require_shape(boundary_grad.shape,
                fr.activations[static_cast<std::size_t>(boundary_index)].shape, "boundary grad");
  require_shape(output_grad.shape, fr.activations.back().shape, "output grad");

  GradientTape tape;
  tape.blocks.resize(net.blocks.size());
  Tensor dy = output_grad;
  if (boundary_index == n) dy.data += boundary_grad.data;
  for (int i = n - 1; i >= 0; --i) {
    const Block& b = net.blocks[static_cast<std::size_t>(i)];
    dy = block_backward(b, fr.activations[static_cast<std::size_t>(i)],
                        fr.activations[static_cast<std::size_t>(i + 1)], dy,
                        b.has_params() ? &tape.blocks[static_cast<std::size_t>(i)] : nullptr);
    if (i == boundary_index) dy.data += boundary_grad.data;
  }
  return tape;
}

// --- SGD ------------------------------------------------------------------

void sgd_step_inplace(BlockNet& net, const GradientTape& tape, double lr) {
  if (tape.blocks.size() != net.blocks.size())
    throw std::invalid_argument("gradient tape not aligned with net");
  if (net.head.has_value() != tape.head.has_value())
    throw std::invalid_argument("gradient tape head does not match net");
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    Block& b = net.blocks[i];
    if (!b.has_params()) continue;
    const ParamGrad& g = tape.blocks[i];
    require_shape(g.weight.shape, b.weight.shape, "weight gradient");
    require_shape(g.bias.shape, b.bias.shape, "bias gradient");
    check_non_finite(g.weight, static_cast<int>(i), "weight");
    check_non_finite(g.bias, static_cast<int>(i), "bias");
    b.weight.data -= lr * g.weight.data;
    b.bias.data -= lr * g.bias.data;
  }
  if (net.head) {
    check_non_finite(tape.head->weight, -1, "head weight");
    check_non_finite(tape.head->bias, -1, "head bias");
    net.head->dense.weight.data -= lr * tape.head->weight.data;
    net.head->dense.bias.data -= lr * tape.head->bias.data;
  }
}

BlockNet sgd_step(BlockNet net, const GradientTape& tape, double lr) {
  sgd_step_inplace(net, tape, lr);
  return net;
}

// --- MACs -------------------------------------------------------------------

std::int64_t block_macs(const Block& b, const Shape& in_shape) {
  switch (b.kind) {
    case BlockKind::Dense:
      return static_cast<std::int64_t>(b.in) * b.out;
    case BlockKind::Conv2D: {
      const ConvGeom g = conv_geometry(b, in_shape);
      return static_cast<std::int64_t>(b.out_ch) * b.in_ch * b.ksize * b.ksize * g.out_h *
             g.out_w;
    }
    default:
      return 0;
  }
}

std::int64_t mac_count(const BlockNet& net, const Shape& input_shape) {
  std::int64_t total = 0;
  Shape s = input_shape;
  for (const Block& b : net.blocks) {
    total += block_macs(b, s);
    s = block_output_shape(b, s);
  }
  if (net.head) total += static_cast<std::int64_t>(net.head->dense.in) * net.head->dense.out;
  return total;
}

// --- init --------------------------------------------------------------------

namespace {

void init_params(Block& b, Rng& rng) {
  double fan_in = 0, fan_out = 0;
  if (b.kind == BlockKind::Dense) {
    fan_in = b.in;
    fan_out = b.out;
  } else {
    fan_in = static_cast<double>(b.in_ch) * b.ksize * b.ksize;
    fan_out = static_cast<double>(b.out_ch) * b.ksize * b.ksize;
  }
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < b.weight.data.size(); ++i)
    b.weight.data[i] = rng.uniform(-bound, bound);
  b.bias.data.setZero();
}

}  // namespace

BlockNet seeded_init(const NetSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  BlockNet net;
  for (const auto& e : spec.blocks) {
    Block b;
    switch (e.kind) {
      case BlockKind::Dense: b = dense_block(e.a, e.b); break;
      case BlockKind::Conv2D: b = conv2d_block(e.a, e.b, e.ksize, e.stride, e.same_pad); break;
      case BlockKind::ReLU: b = relu_block(); break;
      case BlockKind::GlobalAvgPool: b = gap_block(); break;
      case BlockKind::Softmax: b = softmax_block(e.temperature); break;
    }
    if (b.has_params()) init_params(b, rng);
    net.blocks.push_back(std::move(b));
  }
  if (spec.head) {
    Head h;
    h.dense = dense_block(spec.head->in, spec.head->out);
    h.apply_softmax = spec.head->apply_softmax;
    h.temperature = spec.head->temperature;
    init_params(h.dense, rng);
    net.head = std::move(h);
  }
  return net;
}

// --- splitting -----------------------------------------------------------------

std::pair<BlockNet, BlockNet> split_model(const BlockNet& net, int index) {
  const int n = static_cast<int>(net.blocks.size());
  if (index < 0 || index > n)
    throw std::out_of_range("split index " + std::to_string(index) + " outside [0, " +
                            std::to_string(n) + "]");
  BlockNet part, remainder;
  part.blocks.assign(net.blocks.begin(), net.blocks.begin() + index);
  remainder.blocks.assign(net.blocks.begin() + index, net.blocks.end());
  remainder.head = net.head;
  return {std::move(part), std::move(remainder)};
}

BlockNet concat_models(const BlockNet& part, const BlockNet& remainder) {
  if (part.head) throw std::invalid_argument("part model must not carry a head");
  BlockNet net;
  net.blocks = part.blocks;
  net.blocks.insert(net.blocks.end(), remainder.blocks.begin(), remainder.blocks.end());
  net.head = remainder.head;
  return net;
}

std::int64_t param_count(const BlockNet& net) {
  std::int64_t n = 0;
  for (const Block& b : net.blocks)
    if (b.has_params()) n += b.weight.size() + b.bias.size();
  if (net.head) n += net.head->dense.weight.size() + net.head->dense.bias.size();
  return n;
}

std::uint64_t param_checksum(const BlockNet& net) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const Tensor& t) {
    for (Eigen::Index i = 0; i < t.data.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &t.data[i], sizeof bits);
      for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xff;
        h *= 1099511628211ull;
      }
    }
  };
  for (const Block& b : net.blocks) {
    if (!b.has_params()) continue;
    mix(b.weight);
    mix(b.bias);
  }
  if (net.head) {
    mix(net.head->dense.weight);
    mix(net.head->dense.bias);
  }
  return h;
}

}  // namespace microt
