#include "embridge/encoder.hpp"

#include <cstring>
#include <fstream>

#include "embridge/errors.hpp"
#include "embridge/rng.hpp"

namespace embridge {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'B', 'E', 'N', 'C', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated encoder file");
  return value;
}

// Fixed multiplicative position code applied when pooling hidden states, so
// the global feature distinguishes where content sits, not just what is
// present. The modulation depth ramps across channels: low channels pool
// position-invariantly (what is present), high channels weight patches
// unevenly (where it sits). Shared by every encoder instance; not a
// learned parameter.
double position_gain(int patch, int channel, int channel_count) {
  const double depth = channel_count > 1
                           ? static_cast<double>(channel) / (channel_count - 1)
                           : 0.0;
  return 1.0 + depth * std::sin(0.9 * (patch + 1) * (channel + 1));
}

// Shifted softplus: zero at zero pre-activation, so silent (flat) patches
// contribute nothing, while strong patterns produce a positive "presence"
// response on activated channels in addition to the signed linear part.
double softplus_centered(double z) {
  constexpr double kLog2 = 0.6931471805599453;
  if (z > 30.0) return z - kLog2;
  if (z < -30.0) return std::exp(z) - kLog2;
  return std::log1p(std::exp(z)) - kLog2;
}

// Activation slope recovered from the stored activation value:
// sigma(z) = 1 - exp(-(h + log 2)) when h = softplus(z) - log 2.
double softplus_slope(double h) {
  return 1.0 - 0.5 * std::exp(-h);
}

} // namespace

void EncoderDims::validate() const {
  if (image_size < 1 || patch_size < 1 || hidden_dim < 1 || feature_dim < 1) {
    throw ValidationError("encoder dimensions must be positive");
  }
  if (image_size % patch_size != 0) {
    throw ValidationError("patch size must divide the image size");
  }
}

void EncoderGradients::set_zero(const EncoderDims& dims) {
  w1 = Eigen::MatrixXd::Zero(dims.hidden_dim, dims.patch_pixels());
  b1 = Eigen::VectorXd::Zero(dims.hidden_dim);
  w2 = Eigen::MatrixXd::Zero(dims.feature_dim, dims.hidden_dim);
  b2 = Eigen::VectorXd::Zero(dims.feature_dim);
  w3 = Eigen::MatrixXd::Zero(dims.feature_dim, dims.hidden_dim);
  b3 = Eigen::VectorXd::Zero(dims.feature_dim);
}

ToyEncoder ToyEncoder::random_init(const EncoderDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  ToyEncoder enc;
  enc.dims = dims;
  enc.seed = seed;

  const auto fill = [&rng](Eigen::MatrixXd& m, double scale) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
    }
  };
  enc.w1.resize(dims.hidden_dim, dims.patch_pixels());
  fill(enc.w1, 1.0 / std::sqrt(static_cast<double>(dims.patch_pixels())));
  enc.b1 = Eigen::VectorXd::Zero(dims.hidden_dim);
  enc.w2.resize(dims.feature_dim, dims.hidden_dim);
  fill(enc.w2, 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim)));
  enc.b2 = Eigen::VectorXd::Zero(dims.feature_dim);
  enc.w3.resize(dims.feature_dim, dims.hidden_dim);
  fill(enc.w3, 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim)));
  enc.b3 = Eigen::VectorXd::Zero(dims.feature_dim);
  return enc;
}

EncoderOutput ToyEncoder::forward(const GrayImage& image) const {
  ForwardCache cache;
  return forward(image, cache);
}

EncoderOutput ToyEncoder::forward(const GrayImage& image, ForwardCache& cache) const {
  dims.validate();
  if (image.width != dims.image_size || image.height != dims.image_size) {
    throw ShapeError("encoder input must be " + std::to_string(dims.image_size) + "x" +
                     std::to_string(dims.image_size));
  }

  const int side = dims.patches_per_side();
  const int p_count = dims.patch_count();
  cache.patch_inputs.resize(p_count, dims.patch_pixels());
  cache.hidden.resize(p_count, dims.hidden_dim);

  EncoderOutput out;
  out.patch_features.resize(p_count, dims.feature_dim);

  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      const int p = py * side + px;
      Eigen::VectorXd x(dims.patch_pixels());
      int k = 0;
      for (int y = 0; y < dims.patch_size; ++y) {
        for (int x_off = 0; x_off < dims.patch_size; ++x_off) {
          x[k++] = image.at(px * dims.patch_size + x_off, py * dims.patch_size + y) / 255.0;
        }
      }
      x.array() -= x.mean();
      // Contrast normalization with a floor: flat patches stay near zero
      // instead of amplifying quantization noise.
      const double contrast = x.norm() / std::sqrt(static_cast<double>(x.size()));
      x /= contrast + 0.02;
      cache.patch_inputs.row(p) = x.transpose();
      const Eigen::VectorXd h =
          (w1 * x + b1).array().unaryExpr([](double z) { return softplus_centered(z); }).matrix();
      cache.hidden.row(p) = h.transpose();
      out.patch_features.row(p) = (w2 * h + b2).transpose();
    }
  }

  cache.mean_hidden = Eigen::VectorXd::Zero(dims.hidden_dim);
  for (int p = 0; p < p_count; ++p) {
    for (int j = 0; j < dims.hidden_dim; ++j) {
      cache.mean_hidden[j] += position_gain(p, j, dims.hidden_dim) * cache.hidden(p, j);
    }
  }
  cache.mean_hidden /= static_cast<double>(p_count);
  out.global = w3 * cache.mean_hidden + b3;
  return out;
}

void ToyEncoder::backward(const ForwardCache& cache, const Eigen::VectorXd& grad_global,
                          const Eigen::MatrixXd& grad_patches, EncoderGradients& grads) const {
  const int p_count = dims.patch_count();
  const bool with_patches = grad_patches.rows() > 0;
  if (with_patches &&
      (grad_patches.rows() != p_count || grad_patches.cols() != dims.feature_dim)) {
    throw ShapeError("patch gradient shape does not match the encoder");
  }
  if (grad_global.size() != dims.feature_dim) {
    throw ShapeError("global gradient length does not match the encoder");
  }

  grads.w3 += grad_global * cache.mean_hidden.transpose();
  grads.b3 += grad_global;
  const Eigen::VectorXd grad_mean = w3.transpose() * grad_global;

  for (int p = 0; p < p_count; ++p) {
    const Eigen::VectorXd h = cache.hidden.row(p).transpose();
    Eigen::VectorXd grad_h(dims.hidden_dim);
    for (int j = 0; j < dims.hidden_dim; ++j) {
      grad_h[j] = position_gain(p, j, dims.hidden_dim) * grad_mean[j] / static_cast<double>(p_count);
    }
    if (with_patches) {
      const Eigen::VectorXd gf = grad_patches.row(p).transpose();
      grads.w2 += gf * h.transpose();
      grads.b2 += gf;
      grad_h += w2.transpose() * gf;
    }
    const Eigen::VectorXd grad_pre =
        (grad_h.array() * h.array().unaryExpr([](double v) { return softplus_slope(v); }))
            .matrix();
    grads.w1 += grad_pre * cache.patch_inputs.row(p);
    grads.b1 += grad_pre;
  }
}

void ToyEncoder::apply_gradients(const EncoderGradients& grads, double learning_rate) {
  w1 -= learning_rate * grads.w1;
  b1 -= learning_rate * grads.b1;
  w2 -= learning_rate * grads.w2;
  b2 -= learning_rate * grads.b2;
  w3 -= learning_rate * grads.w3;
  b3 -= learning_rate * grads.b3;
}

std::size_t ToyEncoder::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() +
                                  w3.size() + b3.size());
}

std::vector<double> ToyEncoder::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  const auto push_matrix = [&flat](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    }
  };
  const auto push_vector = [&flat](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) flat.push_back(v[i]);
  };
  push_matrix(w1);
  push_vector(b1);
  push_matrix(w2);
  push_vector(b2);
  push_matrix(w3);
  push_vector(b3);
  return flat;
}

void ToyEncoder::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("parameter vector length does not match the encoder");
  }
  std::size_t i = 0;
  const auto pull_matrix = [&flat, &i](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[i++];
    }
  };
  const auto pull_vector = [&flat, &i](Eigen::VectorXd& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = flat[i++];
  };
  pull_matrix(w1);
  pull_vector(b1);
  pull_matrix(w2);
  pull_vector(b2);
  pull_matrix(w3);
  pull_vector(b3);
}

std::uint64_t ToyEncoder::checksum() const {
  const std::vector<double> flat = parameters();
  std::uint64_t hash = 0xcbf29ce484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(flat.data());
  for (std::size_t i = 0; i < flat.size() * sizeof(double); ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

void ToyEncoder::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::int32_t>(out, dims.image_size);
  write_pod<std::int32_t>(out, dims.patch_size);
  write_pod<std::int32_t>(out, dims.hidden_dim);
  write_pod<std::int32_t>(out, dims.feature_dim);
  write_pod<std::uint64_t>(out, seed);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(provenance.size()));
  out.write(provenance.data(), static_cast<std::streamsize>(provenance.size()));
  const std::vector<double> flat = parameters();
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(flat.size()));
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

ToyEncoder ToyEncoder::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + " is not an encoder file");
  }
  EncoderDims dims;
  dims.image_size = read_pod<std::int32_t>(in);
  dims.patch_size = read_pod<std::int32_t>(in);
  dims.hidden_dim = read_pod<std::int32_t>(in);
  dims.feature_dim = read_pod<std::int32_t>(in);
  dims.validate();

  ToyEncoder enc = random_init(dims, 0);
  enc.seed = read_pod<std::uint64_t>(in);
  const auto label_len = read_pod<std::uint32_t>(in);
  if (label_len > 4096) throw IoError("unreasonable provenance label length");
  enc.provenance.resize(label_len);
  in.read(enc.provenance.data(), label_len);
  const auto count = read_pod<std::uint64_t>(in);
  if (count != enc.parameter_count()) {
    throw IoError("encoder file parameter count does not match its header");
  }
  std::vector<double> flat(count);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw IoError("truncated encoder file");
  enc.set_parameters(flat);
  return enc;
}

} // namespace embridge
