#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "embridge/geometry.hpp"

namespace embridge {

struct FeatureSequence {
  std::string id;
  std::string domain; // "human" | "pseudo" | "real"
  std::vector<Eigen::VectorXd> features;

  void validate() const;
};

/// cos(ref, seq[t]) for every frame, including t = 0. Identical vectors
/// short-circuit to exactly 1. Zero-norm vectors raise DegeneracyError.
std::vector<double> anchored_similarity(const Eigen::VectorXd& ref,
                                        const FeatureSequence& seq);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Per-frame-index mean and population stddev across sequences for the
/// three anchor/encoder conditions.
struct SimilarityCurves {
  std::vector<double> in_sequence_mean, in_sequence_std;
  std::vector<double> aligned_mean, aligned_std;
  std::vector<double> unaligned_mean, unaligned_std;

  std::size_t length() const { return in_sequence_mean.size(); }
};

using EncoderFn = std::function<Eigen::VectorXd(const GrayImage&)>;

/// Index-aligned raw frames of one demonstration rendered in both domains.
struct ImageSequencePair {
  std::string id;
  std::vector<GrayImage> human;
  std::vector<GrayImage> pseudo;
};

/// The sequence-similarity protocol. Per sequence: the in-sequence curve
/// anchors the trained pseudo encoder's first-frame feature against its own
/// later frames; the aligned cross-domain curve anchors the human teacher's
/// first human frame against the pseudo encoder on pseudo frames; the
/// unaligned curve runs the untrained baseline encoder across the same
/// domain gap. Curves are truncated to the shortest sequence. Pairs whose
/// two streams disagree in length raise ValidationError naming every
/// offender.
SimilarityCurves three_curve_protocol(const std::vector<ImageSequencePair>& pairs,
                                      const EncoderFn& human_encoder,
                                      const EncoderFn& pseudo_encoder,
                                      const EncoderFn& baseline_encoder);

struct PcaResult {
  Eigen::MatrixXd coordinates;            // N x k
  Eigen::MatrixXd components;             // D x k, orthonormal columns
  Eigen::VectorXd explained_variance_ratio; // k entries
  Eigen::VectorXd mean;                   // D
};

/// Mean-centered projection onto the top-k principal directions, components
/// ordered by descending variance. Sign convention: each component's
/// largest-magnitude loading is positive.
PcaResult pca_project(const Eigen::MatrixXd& features, int k);

void write_similarity_csv(const std::filesystem::path& path, const SimilarityCurves& curves);

/// One row per point: label column then the k projected coordinates.
void write_pca_csv(const std::filesystem::path& path, const PcaResult& result,
                   const std::vector<std::string>& labels);

/// Axis labels and series descriptions so an external plotter can render
/// the curves without guessing.
void write_plot_description(const std::filesystem::path& path);

} // namespace embridge
