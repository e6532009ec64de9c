#include "embridge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "embridge/errors.hpp"
#include "embridge/text_format.hpp"

namespace embridge {

void FeatureSequence::validate() const {
  if (features.empty()) throw ValidationError("feature sequence is empty");
  const auto dim = features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim) throw ShapeError("feature sequence has mixed dimensions");
    if (!f.allFinite()) throw ValidationError("feature sequence contains non-finite values");
  }
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ShapeError("cosine arguments differ in dimension");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegeneracyError("cosine of a zero-norm vector");
  if (a.isApprox(b, 0.0)) return 1.0; // identical vectors: exactly 1 by definition
  return a.dot(b) / (na * nb);
}

std::vector<double> anchored_similarity(const Eigen::VectorXd& ref,
                                        const FeatureSequence& seq) {
  seq.validate();
  std::vector<double> curve;
  curve.reserve(seq.features.size());
  for (const auto& f : seq.features) curve.push_back(cosine_similarity(ref, f));
  return curve;
}

namespace {

void accumulate(std::vector<std::vector<double>>& per_index, const std::vector<double>& curve) {
  for (std::size_t t = 0; t < per_index.size(); ++t) per_index[t].push_back(curve[t]);
}

void mean_std(const std::vector<std::vector<double>>& per_index, std::vector<double>& mean,
              std::vector<double>& stddev) {
  mean.resize(per_index.size());
  stddev.resize(per_index.size());
  for (std::size_t t = 0; t < per_index.size(); ++t) {
    const auto& xs = per_index[t];
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    var /= static_cast<double>(xs.size()); // population variance
    mean[t] = m;
    stddev[t] = std::sqrt(var);
  }
}

} // namespace

SimilarityCurves three_curve_protocol(const std::vector<ImageSequencePair>& pairs,
                                      const EncoderFn& human_encoder,
                                      const EncoderFn& pseudo_encoder,
                                      const EncoderFn& baseline_encoder) {
  if (pairs.empty()) throw ValidationError("similarity protocol needs at least one sequence");

  std::string offenders;
  std::size_t min_len = SIZE_MAX;
  for (const auto& p : pairs) {
    if (p.human.size() != p.pseudo.size() || p.human.empty()) {
      offenders += offenders.empty() ? p.id : ", " + p.id;
    } else {
      min_len = std::min(min_len, p.human.size());
    }
  }
  if (!offenders.empty()) {
    throw ValidationError("unpaired sequence lengths in: " + offenders);
  }

  std::vector<std::vector<double>> blue(min_len), green(min_len), purple(min_len);
  for (const auto& p : pairs) {
    const Eigen::VectorXd blue_anchor = pseudo_encoder(p.pseudo.front());
    const Eigen::VectorXd green_anchor = human_encoder(p.human.front());
    const Eigen::VectorXd purple_anchor = baseline_encoder(p.human.front());

    std::vector<double> b_curve, g_curve, p_curve;
    b_curve.reserve(min_len);
    g_curve.reserve(min_len);
    p_curve.reserve(min_len);
    for (std::size_t t = 0; t < min_len; ++t) {
      const Eigen::VectorXd trained = pseudo_encoder(p.pseudo[t]);
      b_curve.push_back(t == 0 ? cosine_similarity(blue_anchor, blue_anchor)
                               : cosine_similarity(blue_anchor, trained));
      g_curve.push_back(cosine_similarity(green_anchor, trained));
      p_curve.push_back(cosine_similarity(purple_anchor, baseline_encoder(p.pseudo[t])));
    }
    accumulate(blue, b_curve);
    accumulate(green, g_curve);
    accumulate(purple, p_curve);
  }

  SimilarityCurves out;
  mean_std(blue, out.in_sequence_mean, out.in_sequence_std);
  mean_std(green, out.aligned_mean, out.aligned_std);
  mean_std(purple, out.unaligned_mean, out.unaligned_std);
  return out;
}

PcaResult pca_project(const Eigen::MatrixXd& features, int k) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n < 2) throw ValidationError("PCA needs at least two samples");
  if (k < 1 || k > std::min<Eigen::Index>(n - 1, d)) {
    throw ValidationError("PCA component count must lie in [1, min(N-1, D)]");
  }

  PcaResult out;
  out.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw DegeneracyError("PCA eigendecomposition failed");
  }
  // Eigenvalues come back ascending; flip to descending variance order.
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  double total = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) total += std::max(values[i], 0.0);

  out.components.resize(d, k);
  out.explained_variance_ratio.resize(k);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd v = vectors.col(i);
    Eigen::Index max_idx = 0;
    v.cwiseAbs().maxCoeff(&max_idx);
    if (v[max_idx] < 0.0) v = -v;
    out.components.col(i) = v;
    out.explained_variance_ratio[i] = total > 0.0 ? std::max(values[i], 0.0) / total : 0.0;
  }
  out.coordinates = centered * out.components;
  return out;
}

void write_similarity_csv(const std::filesystem::path& path, const SimilarityCurves& curves) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame_index,in_sequence_mean,in_sequence_std,cross_domain_aligned_mean,"
         "cross_domain_aligned_std,cross_domain_unaligned_mean,cross_domain_unaligned_std\n";
  for (std::size_t t = 0; t < curves.length(); ++t) {
    out << t << ',' << format_double(curves.in_sequence_mean[t]) << ','
        << format_double(curves.in_sequence_std[t]) << ','
        << format_double(curves.aligned_mean[t]) << ','
        << format_double(curves.aligned_std[t]) << ','
        << format_double(curves.unaligned_mean[t]) << ','
        << format_double(curves.unaligned_std[t]) << '\n';
  }
}

void write_pca_csv(const std::filesystem::path& path, const PcaResult& result,
                   const std::vector<std::string>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != result.coordinates.rows()) {
    throw ShapeError("one label per projected row required");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "label";
  for (Eigen::Index c = 0; c < result.coordinates.cols(); ++c) out << ",pc" << (c + 1);
  out << "\n";
  for (Eigen::Index r = 0; r < result.coordinates.rows(); ++r) {
    out << labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < result.coordinates.cols(); ++c) {
      out << ',' << format_double(result.coordinates(r, c));
    }
    out << "\n";
  }
  out << "explained_variance_ratio";
  for (Eigen::Index c = 0; c < result.explained_variance_ratio.size(); ++c) {
    out << ',' << format_double(result.explained_variance_ratio[c]);
  }
  out << "\n";
}

void write_plot_description(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "plot: sequence-similarity curves\n"
         "x_axis: frame index within sequence\n"
         "y_axis: cosine similarity to the first-frame anchor\n"
         "series: in_sequence_mean | color blue | trained encoder, same domain\n"
         "series: cross_domain_aligned_mean | color green | human anchor vs trained "
         "gripper-view encoder\n"
         "series: cross_domain_unaligned_mean | color purple | untrained baseline across "
         "the same domain gap\n"
         "bands: each *_std column is the population stddev around its mean\n"
         "companion: pca.csv | per-point projections onto the top principal components, "
         "label column gives the domain\n";
}

} // namespace embridge
