#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "embridge/geometry.hpp"

namespace embridge {

struct EncoderDims {
  int image_size = 32;
  int patch_size = 8;
  int hidden_dim = 16;
  int feature_dim = 32;

  int patches_per_side() const { return image_size / patch_size; }
  int patch_count() const { return patches_per_side() * patches_per_side(); }
  int patch_pixels() const { return patch_size * patch_size; }

  void validate() const;

  bool operator==(const EncoderDims& o) const {
    return image_size == o.image_size && patch_size == o.patch_size &&
           hidden_dim == o.hidden_dim && feature_dim == o.feature_dim;
  }
};

struct EncoderOutput {
  Eigen::VectorXd global;         // feature_dim
  Eigen::MatrixXd patch_features; // patch_count x feature_dim
};

/// Intermediate activations retained for the analytic backward pass.
struct ForwardCache {
  Eigen::MatrixXd patch_inputs; // patch_count x patch_pixels, normalized
  Eigen::MatrixXd hidden;       // patch_count x hidden_dim
  Eigen::VectorXd mean_hidden;  // hidden_dim, position-weighted pool
};

struct EncoderGradients {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  void set_zero(const EncoderDims& dims);
};

/// Tiny two-layer patch encoder. Each flattened patch is mean-centered and
/// contrast-normalized (the patch-normalization analogue — flat regions
/// contribute nothing, features respond to local contrast), then per patch
/// h = softplus(W1 x + b1) - log 2 and f = W2 h + b2. The shifted softplus
/// is zero for silent patches but answers any strong pattern with a
/// positive "presence" component on its activated channels, which keeps
/// responses to equally-shaped bright and dark content partially aligned
/// instead of exactly opposite. The global feature is W3 applied to a
/// position-weighted mean of the hidden states: a fixed sinusoidal gain
/// per (patch, channel) plays the role of position encoding, making the
/// global feature sensitive to where content sits. Patch weights are
/// shared across positions. Deterministic: same parameters and image give
/// bit-identical features.
struct ToyEncoder {
  EncoderDims dims;
  Eigen::MatrixXd w1; // hidden_dim x patch_pixels
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2; // feature_dim x hidden_dim
  Eigen::VectorXd b2;
  Eigen::MatrixXd w3; // feature_dim x hidden_dim
  Eigen::VectorXd b3;
  std::uint64_t seed = 0;
  std::string provenance = "init";

  static ToyEncoder random_init(const EncoderDims& dims, std::uint64_t seed);

  EncoderOutput forward(const GrayImage& image) const;
  EncoderOutput forward(const GrayImage& image, ForwardCache& cache) const;

  /// Accumulates parameter gradients for one image given gradients wrt the
  /// global feature and, optionally, the patch features (pass a 0-row
  /// matrix to skip the patch path).
  void backward(const ForwardCache& cache, const Eigen::VectorXd& grad_global,
                const Eigen::MatrixXd& grad_patches, EncoderGradients& grads) const;

  void apply_gradients(const EncoderGradients& grads, double learning_rate);

  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& flat);

  /// FNV-1a over the parameter bytes; used by the frozen-teacher checks.
  std::uint64_t checksum() const;

  void save(const std::filesystem::path& path) const;
  static ToyEncoder load(const std::filesystem::path& path);
};

} // namespace embridge
