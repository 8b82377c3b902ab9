#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "vtw/checkpoint.hpp"
#include "vtw/errors.hpp"
#include "vtw/preprocess.hpp"
#include "vtw/rng.hpp"

namespace vtw {

// Deterministic forward kernels for the fusion and policy mathematics:
// tactile CNN, two-round multi-head cross-attention, reconstruction decoder
// and loss, and the diffusion noising/denoising recursion. Evaluation only;
// weights are loaded or seeded, never trained here.

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr int kDefaultEmbedDim = 768;
inline constexpr int kDefaultHeads = 8;
inline constexpr double kLayerNormEpsilon = 1e-5;

// ---------------------------------------------------------------------------
// Cross-attention

// One round of multi-head cross-attention: d x d projection matrices (no
// biases) plus the layer norm applied to the attention output. Dropout is
// stored for checkpoint fidelity but inert in these evaluation kernels.
template <typename Scalar>
struct AttentionParams {
  MatrixX<Scalar> wq, wk, wv, wo;
  VectorX<Scalar> ln_scale, ln_bias;
  int heads = kDefaultHeads;
  double dropout_p = 0.2;

  int dim() const { return static_cast<int>(wq.rows()); }

  void require_valid() const {
    const int d = dim();
    if (d <= 0 || wq.cols() != d || wk.rows() != d || wk.cols() != d || wv.rows() != d ||
        wv.cols() != d || wo.rows() != d || wo.cols() != d) {
      throw ShapeMismatch("attention projections must all be d x d");
    }
    if (ln_scale.size() != d || ln_bias.size() != d) {
      throw ShapeMismatch("layer norm parameters must have length d");
    }
    if (heads <= 0 || d % heads != 0) {
      throw ShapeMismatch("embedding dim must be divisible by the head count");
    }
  }
};

template <typename Scalar>
VectorX<Scalar> layer_norm(const VectorX<Scalar>& x, const VectorX<Scalar>& scale,
                           const VectorX<Scalar>& bias) {
  const Scalar mean = x.mean();
  const Scalar var = (x.array() - mean).square().mean();
  const Scalar denom = std::sqrt(var + Scalar(kLayerNormEpsilon));
  return (((x.array() - mean) / denom) * scale.array() + bias.array()).matrix();
}

namespace detail {

template <typename Scalar>
struct ProjectedSequences {
  MatrixX<Scalar> q, k, v;  // rows = tokens
};

template <typename Scalar>
ProjectedSequences<Scalar> project_sequences(const MatrixX<Scalar>& q_seq,
                                             const MatrixX<Scalar>& kv_seq,
                                             const AttentionParams<Scalar>& params) {
  params.require_valid();
  const int d = params.dim();
  if (q_seq.cols() != d || kv_seq.cols() != d) {
    throw ShapeMismatch("sequence token dim does not match the attention dim");
  }
  if (q_seq.rows() == 0 || kv_seq.rows() == 0) {
    throw ShapeMismatch("attention needs at least one query and one key token");
  }
  return {q_seq * params.wq.transpose(), kv_seq * params.wk.transpose(),
          kv_seq * params.wv.transpose()};
}

template <typename Scalar>
MatrixX<Scalar> softmax_rows(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> weights(logits.rows(), logits.cols());
  for (Eigen::Index row = 0; row < logits.rows(); ++row) {
    const Scalar max = logits.row(row).maxCoeff();
    weights.row(row) = (logits.row(row).array() - max).exp();
    weights.row(row) /= weights.row(row).sum();
  }
  return weights;
}

}  // namespace detail

// Per-head softmax attention weights, for inspection and property tests.
// Returns `heads` matrices of shape n_q x n_kv.
template <typename Scalar>
std::vector<MatrixX<Scalar>> cross_attention_weights(const MatrixX<Scalar>& q_seq,
                                                     const MatrixX<Scalar>& kv_seq,
                                                     const AttentionParams<Scalar>& params) {
  const auto proj = detail::project_sequences(q_seq, kv_seq, params);
  const int dh = params.dim() / params.heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  std::vector<MatrixX<Scalar>> weights;
  weights.reserve(static_cast<std::size_t>(params.heads));
  for (int h = 0; h < params.heads; ++h) {
    const MatrixX<Scalar> logits =
        proj.q.middleCols(h * dh, dh) * proj.k.middleCols(h * dh, dh).transpose() * scale;
    weights.push_back(detail::softmax_rows(logits));
  }
  return weights;
}

// Scaled dot-product attention per head (softmax over keys, scale
// 1/sqrt(d/h)), heads concatenated, output projection, then layer norm.
template <typename Scalar>
MatrixX<Scalar> cross_attend(const MatrixX<Scalar>& q_seq, const MatrixX<Scalar>& kv_seq,
                             const AttentionParams<Scalar>& params) {
  const auto proj = detail::project_sequences(q_seq, kv_seq, params);
  const int d = params.dim();
  const int dh = d / params.heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  MatrixX<Scalar> context(q_seq.rows(), d);
  for (int h = 0; h < params.heads; ++h) {
    const MatrixX<Scalar> logits =
        proj.q.middleCols(h * dh, dh) * proj.k.middleCols(h * dh, dh).transpose() * scale;
    context.middleCols(h * dh, dh) =
        detail::softmax_rows(logits) * proj.v.middleCols(h * dh, dh);
  }
  MatrixX<Scalar> out = context * params.wo.transpose();
  for (Eigen::Index row = 0; row < out.rows(); ++row) {
    const VectorX<Scalar> normed =
        layer_norm<Scalar>(out.row(row).transpose(), params.ln_scale, params.ln_bias);
    out.row(row) = normed.transpose();
  }
  return out;
}

// Two-round fusion: the tactile embedding queries the image embedding, then
// the image embedding queries the updated tactile one; the two results are
// concatenated (tactile half first) into a 2d vector.
template <typename Scalar>
struct FusionParams {
  AttentionParams<Scalar> tactile_round;  // round 1: Q = z_tac, K = V = z_img
  AttentionParams<Scalar> image_round;    // round 2: Q = z_img, K = V = z''_tac
};

template <typename Scalar>
VectorX<Scalar> fuse(const VectorX<Scalar>& z_tac, const VectorX<Scalar>& z_img,
                     const FusionParams<Scalar>& params) {
  const int d = params.tactile_round.dim();
  if (z_tac.size() != d || z_img.size() != d || params.image_round.dim() != d) {
    throw ShapeMismatch("fuse expects two embeddings of the configured dim");
  }
  MatrixX<Scalar> tac_row = z_tac.transpose();
  MatrixX<Scalar> img_row = z_img.transpose();
  const MatrixX<Scalar> tac_updated = cross_attend(tac_row, img_row, params.tactile_round);
  const MatrixX<Scalar> img_updated = cross_attend(img_row, tac_updated, params.image_round);
  VectorX<Scalar> fused(2 * d);
  fused.head(d) = tac_updated.row(0).transpose();
  fused.tail(d) = img_updated.row(0).transpose();
  return fused;
}

// ---------------------------------------------------------------------------
// Tactile CNN encoder

// Three stride-2 3x3 convolutions (widths 16/64/256, zero padding 1, ReLU)
// followed by an affine map to the embedding dim. linear_mode swaps every
// activation for identity so linearity properties are exactly assertable.
template <typename Scalar>
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  // weights[oc * in_channels + ic] is the 3x3 kernel for that channel pair.
  std::vector<Eigen::Matrix<Scalar, 3, 3, Eigen::RowMajor>> weights;
  VectorX<Scalar> bias;
};

template <typename Scalar>
struct CnnParams {
  std::vector<ConvLayer<Scalar>> layers;  // exactly 3
  MatrixX<Scalar> fc_weight;              // d x 3072
  VectorX<Scalar> fc_bias;                // d
  bool linear_mode = false;

  void require_valid() const {
    if (layers.size() != 3) throw ShapeMismatch("tactile CNN expects exactly 3 conv layers");
    int in_ch = 3;
    for (const ConvLayer<Scalar>& layer : layers) {
      if (layer.in_channels != in_ch ||
          layer.weights.size() !=
              static_cast<std::size_t>(layer.out_channels) * static_cast<std::size_t>(layer.in_channels) ||
          layer.bias.size() != layer.out_channels) {
        throw ShapeMismatch("conv layer shape mismatch");
      }
      in_ch = layer.out_channels;
    }
    const Eigen::Index flat = static_cast<Eigen::Index>(in_ch) * 3 * 4;
    if (fc_weight.cols() != flat || fc_bias.size() != fc_weight.rows()) {
      throw ShapeMismatch("CNN fc layer shape mismatch");
    }
  }
};

namespace detail {

// Stride-2 3x3 convolution with zero padding 1 over per-channel maps.
template <typename Scalar>
std::vector<MatrixX<Scalar>> conv_forward(const std::vector<MatrixX<Scalar>>& input,
                                          const ConvLayer<Scalar>& layer) {
  const Eigen::Index in_h = input[0].rows();
  const Eigen::Index in_w = input[0].cols();
  const Eigen::Index out_h = (in_h - 1) / 2 + 1;
  const Eigen::Index out_w = (in_w - 1) / 2 + 1;
  std::vector<MatrixX<Scalar>> output;
  output.reserve(static_cast<std::size_t>(layer.out_channels));
  for (int oc = 0; oc < layer.out_channels; ++oc) {
    MatrixX<Scalar> map = MatrixX<Scalar>::Constant(out_h, out_w, layer.bias(oc));
    for (int ic = 0; ic < layer.in_channels; ++ic) {
      const auto& kernel = layer.weights[static_cast<std::size_t>(oc * layer.in_channels + ic)];
      const MatrixX<Scalar>& in = input[static_cast<std::size_t>(ic)];
      for (Eigen::Index y = 0; y < out_h; ++y) {
        for (Eigen::Index x = 0; x < out_w; ++x) {
          Scalar acc = Scalar(0);
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const Eigen::Index sy = 2 * y + ky - 1;
              const Eigen::Index sx = 2 * x + kx - 1;
              if (sy < 0 || sy >= in_h || sx < 0 || sx >= in_w) continue;
              acc += kernel(ky, kx) * in(sy, sx);
            }
          }
          map(y, x) += acc;
        }
      }
    }
    output.push_back(std::move(map));
  }
  return output;
}

template <typename Scalar>
void relu_inplace(std::vector<MatrixX<Scalar>>& maps) {
  for (auto& map : maps) map = map.cwiseMax(Scalar(0));
}

}  // namespace detail

template <typename Scalar>
VectorX<Scalar> tactile_encode(const RgbTactileImage<Scalar>& image,
                               const CnnParams<Scalar>& params) {
  params.require_valid();
  std::vector<MatrixX<Scalar>> maps;
  maps.reserve(3);
  maps.push_back(image.r);
  maps.push_back(image.g);
  maps.push_back(image.b);
  for (const ConvLayer<Scalar>& layer : params.layers) {
    maps = detail::conv_forward(maps, layer);
    if (!params.linear_mode) detail::relu_inplace(maps);
  }
  // Flatten channel-major, row-major within each 3x4 map.
  VectorX<Scalar> flat(static_cast<Eigen::Index>(maps.size()) * maps[0].size());
  Eigen::Index pos = 0;
  for (const auto& map : maps) {
    for (Eigen::Index y = 0; y < map.rows(); ++y) {
      for (Eigen::Index x = 0; x < map.cols(); ++x) flat(pos++) = map(y, x);
    }
  }
  return params.fc_weight * flat + params.fc_bias;
}

// ---------------------------------------------------------------------------
// Reconstruction decoder and losses

template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  Scalar value;
  if (x >= Scalar(0)) {
    value = Scalar(1) / (Scalar(1) + std::exp(-x));
  } else {
    const Scalar e = std::exp(x);
    value = e / (Scalar(1) + e);
  }
  // Keep the codomain strictly inside (0, 1) even where exp saturates.
  const Scalar lo = std::numeric_limits<Scalar>::min();
  const Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / Scalar(2);
  return value < lo ? lo : (value > hi ? hi : value);
}

// Two-layer MLP: hidden layer (ReLU) then an affine map to the 24x32 pixel
// grid, sigmoid on the output.
template <typename Scalar>
struct DecoderParams {
  MatrixX<Scalar> fc1_weight;  // hidden x 2d
  VectorX<Scalar> fc1_bias;    // hidden
  MatrixX<Scalar> fc2_weight;  // 768 x hidden
  VectorX<Scalar> fc2_bias;    // 768

  void require_valid() const {
    if (fc1_weight.rows() != fc1_bias.size() || fc2_weight.cols() != fc1_weight.rows() ||
        fc2_weight.rows() != kImageRows * kImageCols ||
        fc2_bias.size() != kImageRows * kImageCols) {
      throw ShapeMismatch("decoder layer shape mismatch");
    }
  }
};

template <typename Scalar>
TactileImage<Scalar> reconstruct(const VectorX<Scalar>& z_fusion,
                                 const DecoderParams<Scalar>& params) {
  params.require_valid();
  if (z_fusion.size() != params.fc1_weight.cols()) {
    throw ShapeMismatch("fused embedding length does not match the decoder input");
  }
  VectorX<Scalar> hidden = params.fc1_weight * z_fusion + params.fc1_bias;
  hidden = hidden.cwiseMax(Scalar(0));
  const VectorX<Scalar> logits = params.fc2_weight * hidden + params.fc2_bias;
  TactileImage<Scalar> image;
  for (int row = 0; row < kImageRows; ++row) {
    for (int col = 0; col < kImageCols; ++col) {
      image(row, col) = stable_sigmoid(logits(row * kImageCols + col));
    }
  }
  return image;
}

// Mean squared error over all 768 pixels.
template <typename Scalar>
Scalar reconstruction_loss(const TactileImage<Scalar>& target,
                           const TactileImage<Scalar>& predicted) {
  return (target - predicted).array().square().mean();
}

// ---------------------------------------------------------------------------
// Model bundle and checkpoint mapping

template <typename Scalar>
struct FusionModel {
  int embed_dim = kDefaultEmbedDim;
  CnnParams<Scalar> cnn;
  FusionParams<Scalar> fusion;
  DecoderParams<Scalar> decoder;
  MaskToken<Scalar> mask_token;

  static FusionModel random(std::uint64_t seed, int embed_dim = kDefaultEmbedDim,
                            int heads = kDefaultHeads);
  static FusionModel from_table(const TensorTable& table);
  TensorTable to_table() const;
};

namespace detail {

inline constexpr int kCnnWidths[3] = {16, 64, 256};
inline constexpr int kCnnFlatSize = 256 * 3 * 4;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); the declared init for seeded runs.
template <typename Scalar>
void fill_uniform(Rng& rng, Scalar* data, std::size_t count, double fan_in) {
  const double bound = 1.0 / std::sqrt(fan_in);
  for (std::size_t i = 0; i < count; ++i) data[i] = Scalar(rng.uniform(-bound, bound));
}

template <typename Scalar>
AttentionParams<Scalar> random_attention(Rng& rng, int d, int heads) {
  AttentionParams<Scalar> params;
  params.heads = heads;
  for (MatrixX<Scalar>* w : {&params.wq, &params.wk, &params.wv, &params.wo}) {
    w->resize(d, d);
    fill_uniform(rng, w->data(), static_cast<std::size_t>(d) * static_cast<std::size_t>(d), d);
  }
  params.ln_scale = VectorX<Scalar>::Ones(d);
  params.ln_bias = VectorX<Scalar>::Zero(d);
  return params;
}

template <typename Scalar>
void matrix_to_tensor(TensorTable& table, const std::string& name, const MatrixX<Scalar>& m) {
  Tensor& t = table.add(name, {static_cast<std::uint32_t>(m.rows()),
                               static_cast<std::uint32_t>(m.cols())});
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data[pos++] = static_cast<double>(m(r, c));
  }
}

template <typename Scalar>
void vector_to_tensor(TensorTable& table, const std::string& name, const VectorX<Scalar>& v) {
  Tensor& t = table.add(name, {static_cast<std::uint32_t>(v.size())});
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<double>(v(i));
}

template <typename Scalar>
MatrixX<Scalar> tensor_to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) throw ShapeMismatch("tensor '" + t.name + "' is not a matrix");
  MatrixX<Scalar> m(t.shape[0], t.shape[1]);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = Scalar(t.data[pos++]);
  }
  return m;
}

template <typename Scalar>
VectorX<Scalar> tensor_to_vector(const Tensor& t) {
  if (t.shape.size() != 1) throw ShapeMismatch("tensor '" + t.name + "' is not a vector");
  VectorX<Scalar> v(t.shape[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Scalar(t.data[static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace detail

template <typename Scalar>
FusionModel<Scalar> FusionModel<Scalar>::random(std::uint64_t seed, int embed_dim, int heads) {
  Rng rng(seed);
  FusionModel model;
  model.embed_dim = embed_dim;

  int in_ch = 3;
  for (int layer_idx = 0; layer_idx < 3; ++layer_idx) {
    ConvLayer<Scalar> layer;
    layer.in_channels = in_ch;
    layer.out_channels = detail::kCnnWidths[layer_idx];
    layer.weights.resize(static_cast<std::size_t>(layer.in_channels) *
                         static_cast<std::size_t>(layer.out_channels));
    const double fan_in = static_cast<double>(in_ch) * 9.0;
    for (auto& kernel : layer.weights) {
      detail::fill_uniform(rng, kernel.data(), 9, fan_in);
    }
    layer.bias.resize(layer.out_channels);
    detail::fill_uniform(rng, layer.bias.data(), static_cast<std::size_t>(layer.out_channels),
                         fan_in);
    model.cnn.layers.push_back(std::move(layer));
    in_ch = detail::kCnnWidths[layer_idx];
  }
  model.cnn.fc_weight.resize(embed_dim, detail::kCnnFlatSize);
  detail::fill_uniform(rng, model.cnn.fc_weight.data(), model.cnn.fc_weight.size(),
                       detail::kCnnFlatSize);
  model.cnn.fc_bias.resize(embed_dim);
  detail::fill_uniform(rng, model.cnn.fc_bias.data(), static_cast<std::size_t>(embed_dim),
                       detail::kCnnFlatSize);

  model.fusion.tactile_round = detail::random_attention<Scalar>(rng, embed_dim, heads);
  model.fusion.image_round = detail::random_attention<Scalar>(rng, embed_dim, heads);

  const int hidden = kDefaultEmbedDim;
  const int pixels = kImageRows * kImageCols;
  model.decoder.fc1_weight.resize(hidden, 2 * embed_dim);
  detail::fill_uniform(rng, model.decoder.fc1_weight.data(), model.decoder.fc1_weight.size(),
                       2.0 * embed_dim);
  model.decoder.fc1_bias.resize(hidden);
  detail::fill_uniform(rng, model.decoder.fc1_bias.data(), static_cast<std::size_t>(hidden),
                       2.0 * embed_dim);
  model.decoder.fc2_weight.resize(pixels, hidden);
  detail::fill_uniform(rng, model.decoder.fc2_weight.data(), model.decoder.fc2_weight.size(),
                       hidden);
  model.decoder.fc2_bias.resize(pixels);
  detail::fill_uniform(rng, model.decoder.fc2_bias.data(), static_cast<std::size_t>(pixels),
                       hidden);
  return model;
}

template <typename Scalar>
TensorTable FusionModel<Scalar>::to_table() const {
  TensorTable table;
  for (int i = 0; i < 3; ++i) {
    const ConvLayer<Scalar>& layer = cnn.layers[static_cast<std::size_t>(i)];
    const std::string prefix = "cnn.conv" + std::to_string(i + 1);
    Tensor& w = table.add(prefix + ".weight",
                          {static_cast<std::uint32_t>(layer.out_channels),
                           static_cast<std::uint32_t>(layer.in_channels), 3, 3});
    std::size_t pos = 0;
    for (const auto& kernel : layer.weights) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) w.data[pos++] = static_cast<double>(kernel(ky, kx));
      }
    }
    detail::vector_to_tensor(table, prefix + ".bias", layer.bias);
  }
  detail::matrix_to_tensor(table, "cnn.fc.weight", cnn.fc_weight);
  detail::vector_to_tensor(table, "cnn.fc.bias", cnn.fc_bias);

  const auto add_round = [&table](const std::string& prefix, const AttentionParams<Scalar>& p) {
    detail::matrix_to_tensor(table, prefix + ".wq", p.wq);
    detail::matrix_to_tensor(table, prefix + ".wk", p.wk);
    detail::matrix_to_tensor(table, prefix + ".wv", p.wv);
    detail::matrix_to_tensor(table, prefix + ".wo", p.wo);
    detail::vector_to_tensor(table, prefix + ".ln_scale", p.ln_scale);
    detail::vector_to_tensor(table, prefix + ".ln_bias", p.ln_bias);
  };
  add_round("fusion.tactile", fusion.tactile_round);
  add_round("fusion.image", fusion.image_round);

  detail::matrix_to_tensor(table, "decoder.fc1.weight", decoder.fc1_weight);
  detail::vector_to_tensor(table, "decoder.fc1.bias", decoder.fc1_bias);
  detail::matrix_to_tensor(table, "decoder.fc2.weight", decoder.fc2_weight);
  detail::vector_to_tensor(table, "decoder.fc2.bias", decoder.fc2_bias);

  Tensor& token = table.add("mask_token", {kPatchSize, kPatchSize});
  std::size_t pos = 0;
  for (int y = 0; y < kPatchSize; ++y) {
    for (int x = 0; x < kPatchSize; ++x) {
      token.data[pos++] = static_cast<double>(mask_token.values(y, x));
    }
  }
  return table;
}

template <typename Scalar>
FusionModel<Scalar> FusionModel<Scalar>::from_table(const TensorTable& table) {
  FusionModel model;
  model.cnn.layers.clear();
  int in_ch = 3;
  for (int i = 0; i < 3; ++i) {
    const std::string prefix = "cnn.conv" + std::to_string(i + 1);
    const Tensor& w = table.require(prefix + ".weight");
    if (w.shape.size() != 4 || w.shape[1] != static_cast<std::uint32_t>(in_ch) ||
        w.shape[2] != 3 || w.shape[3] != 3) {
      throw ShapeMismatch("unexpected shape for " + prefix + ".weight");
    }
    ConvLayer<Scalar> layer;
    layer.in_channels = in_ch;
    layer.out_channels = static_cast<int>(w.shape[0]);
    layer.weights.resize(static_cast<std::size_t>(layer.in_channels) *
                         static_cast<std::size_t>(layer.out_channels));
    std::size_t pos = 0;
    for (auto& kernel : layer.weights) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) kernel(ky, kx) = Scalar(w.data[pos++]);
      }
    }
    layer.bias = detail::tensor_to_vector<Scalar>(table.require(prefix + ".bias"));
    in_ch = layer.out_channels;
    model.cnn.layers.push_back(std::move(layer));
  }
  model.cnn.fc_weight = detail::tensor_to_matrix<Scalar>(table.require("cnn.fc.weight"));
  model.cnn.fc_bias = detail::tensor_to_vector<Scalar>(table.require("cnn.fc.bias"));
  model.embed_dim = static_cast<int>(model.cnn.fc_weight.rows());

  const auto load_round = [&table](const std::string& prefix) {
    AttentionParams<Scalar> p;
    p.wq = detail::tensor_to_matrix<Scalar>(table.require(prefix + ".wq"));
    p.wk = detail::tensor_to_matrix<Scalar>(table.require(prefix + ".wk"));
    p.wv = detail::tensor_to_matrix<Scalar>(table.require(prefix + ".wv"));
    p.wo = detail::tensor_to_matrix<Scalar>(table.require(prefix + ".wo"));
    p.ln_scale = detail::tensor_to_vector<Scalar>(table.require(prefix + ".ln_scale"));
    p.ln_bias = detail::tensor_to_vector<Scalar>(table.require(prefix + ".ln_bias"));
    p.require_valid();
    return p;
  };
  model.fusion.tactile_round = load_round("fusion.tactile");
  model.fusion.image_round = load_round("fusion.image");

  model.decoder.fc1_weight = detail::tensor_to_matrix<Scalar>(table.require("decoder.fc1.weight"));
  model.decoder.fc1_bias = detail::tensor_to_vector<Scalar>(table.require("decoder.fc1.bias"));
  model.decoder.fc2_weight = detail::tensor_to_matrix<Scalar>(table.require("decoder.fc2.weight"));
  model.decoder.fc2_bias = detail::tensor_to_vector<Scalar>(table.require("decoder.fc2.bias"));
  model.decoder.require_valid();

  if (const Tensor* token = table.find("mask_token"); token != nullptr) {
    if (token->shape.size() != 2 || token->shape[0] != kPatchSize || token->shape[1] != kPatchSize) {
      throw ShapeMismatch("mask_token must be 4x4");
    }
    std::size_t pos = 0;
    for (int y = 0; y < kPatchSize; ++y) {
      for (int x = 0; x < kPatchSize; ++x) {
        model.mask_token.values(y, x) = Scalar(token->data[pos++]);
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Diffusion

// Forward-noising schedule (linear beta) plus the strided inference
// sub-schedule and its per-hop Eq-style coefficients
//   a_{prev} = alpha * (a_k - gamma * eps_hat) + N(0, sigma^2 I).
// The defaults follow DDIM with eta = 0: sigma = 0, and alpha/gamma chosen so
// a hop maps noise level k_j exactly onto level k_{j-1}.
struct DiffusionSchedule {
  int k_train = 0;
  int k_infer = 0;
  std::vector<double> beta;       // size k_train; beta[i] belongs to step i+1
  std::vector<double> alpha_bar;  // size k_train+1; alpha_bar[0] = 1
  std::vector<int> infer_steps;   // ascending train-step indices, size k_infer
  std::vector<double> alpha_coef; // size k_infer; hop j uses index j-1
  std::vector<double> gamma_coef;
  std::vector<double> sigma_coef;

  static DiffusionSchedule linear(int k_train = 50, int k_infer = 16, double beta_lo = 1e-4,
                                  double beta_hi = 0.02);
  void require_valid() const;
};

inline void DiffusionSchedule::require_valid() const {
  if (k_train <= 0 || k_infer <= 0 || k_infer > k_train) {
    throw ShapeMismatch("schedule needs 0 < k_infer <= k_train");
  }
  if (beta.size() != static_cast<std::size_t>(k_train) ||
      alpha_bar.size() != static_cast<std::size_t>(k_train) + 1 ||
      infer_steps.size() != static_cast<std::size_t>(k_infer) ||
      alpha_coef.size() != static_cast<std::size_t>(k_infer) ||
      gamma_coef.size() != static_cast<std::size_t>(k_infer) ||
      sigma_coef.size() != static_cast<std::size_t>(k_infer)) {
    throw ShapeMismatch("schedule coefficient arrays have inconsistent sizes");
  }
  for (double s : sigma_coef) {
    if (s < 0.0) throw ShapeMismatch("sigma coefficients must be non-negative");
  }
}

inline DiffusionSchedule DiffusionSchedule::linear(int k_train, int k_infer, double beta_lo,
                                                   double beta_hi) {
  DiffusionSchedule sched;
  sched.k_train = k_train;
  sched.k_infer = k_infer;
  sched.beta.resize(static_cast<std::size_t>(k_train));
  sched.alpha_bar.assign(static_cast<std::size_t>(k_train) + 1, 1.0);
  for (int k = 1; k <= k_train; ++k) {
    const double t = k_train > 1 ? static_cast<double>(k - 1) / (k_train - 1) : 0.0;
    sched.beta[static_cast<std::size_t>(k - 1)] = beta_lo + t * (beta_hi - beta_lo);
    sched.alpha_bar[static_cast<std::size_t>(k)] =
        sched.alpha_bar[static_cast<std::size_t>(k - 1)] *
        (1.0 - sched.beta[static_cast<std::size_t>(k - 1)]);
  }
  // Evenly strided sub-schedule: step j lands at round(j * k_train / k_infer).
  sched.infer_steps.resize(static_cast<std::size_t>(k_infer));
  for (int j = 1; j <= k_infer; ++j) {
    int step = static_cast<int>(
        std::llround(static_cast<double>(j) * k_train / static_cast<double>(k_infer)));
    if (step < 1) step = 1;
    if (step > k_train) step = k_train;
    sched.infer_steps[static_cast<std::size_t>(j - 1)] = step;
  }
  sched.alpha_coef.resize(static_cast<std::size_t>(k_infer));
  sched.gamma_coef.resize(static_cast<std::size_t>(k_infer));
  sched.sigma_coef.assign(static_cast<std::size_t>(k_infer), 0.0);
  for (int j = 1; j <= k_infer; ++j) {
    const int k = sched.infer_steps[static_cast<std::size_t>(j - 1)];
    const int k_prev = j > 1 ? sched.infer_steps[static_cast<std::size_t>(j - 2)] : 0;
    const double ab_k = sched.alpha_bar[static_cast<std::size_t>(k)];
    const double ab_prev = sched.alpha_bar[static_cast<std::size_t>(k_prev)];
    const double a = std::sqrt(ab_prev / ab_k);
    sched.alpha_coef[static_cast<std::size_t>(j - 1)] = a;
    sched.gamma_coef[static_cast<std::size_t>(j - 1)] =
        std::sqrt(1.0 - ab_k) - std::sqrt(1.0 - ab_prev) / a;
  }
  return sched;
}

struct Observation {
  VectorX<double> z_fusion;
  VectorX<double> proprio;
};

// a_k = sqrt(alpha_bar_k) * a0 + sqrt(1 - alpha_bar_k) * eps, with the caller
// supplying eps (deterministic core).
VectorX<double> add_noise_with(const VectorX<double>& a0, int k, const DiffusionSchedule& sched,
                               const VectorX<double>& eps);

struct NoisedAction {
  VectorX<double> a_k;
  VectorX<double> eps;
};

// Draws eps from the seeded stream and noises a0 at step k (1 <= k <= k_train).
NoisedAction add_noise(const VectorX<double>& a0, int k, const DiffusionSchedule& sched,
                       Rng& rng);

double noise_prediction_loss(const VectorX<double>& eps, const VectorX<double>& eps_hat);

using NoisePredictor =
    std::function<VectorX<double>(const VectorX<double>&, const Observation&, int)>;

// Runs the denoising recursion over the strided sub-schedule, from the
// deepest step down. rng may be null when every sigma is zero. Predictor
// failures surface as DenoiseAborted carrying the failing step.
VectorX<double> denoise(const VectorX<double>& a_k, const NoisePredictor& predictor,
                        const Observation& obs, const DiffusionSchedule& sched,
                        Rng* rng = nullptr);

}  // namespace vtw
