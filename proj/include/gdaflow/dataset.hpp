#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gdaflow/mat.hpp"
#include "gdaflow/rng.hpp"

namespace gdaflow {

/// One domain's worth of labeled data. Labels are 1-based class indices.
struct LabeledDataset {
  Mat features;             // n x D
  std::vector<int> labels;  // in {1..C}
  double time_index = 1.0;

  int n() const { return features.rows; }
  int dim() const { return features.cols; }
  int class_count() const;
  void validate() const;
};

/// Held-out labels for the unlabeled domains, kept OUTSIDE DomainSequence so
/// that no training code path can reach them; evaluation code receives this
/// bundle separately.
struct HeldOutLabels {
  std::vector<std::vector<int>> per_domain;  // index aligned with DomainSequence domains
};

/// Ordered sequence of domains: labeled source at time index 1, unlabeled
/// feature matrices (including the source's own features at position 0) up to
/// the target at time index K.
class DomainSequence {
 public:
  DomainSequence(LabeledDataset source, std::vector<Mat> unlabeled,
                 std::vector<double> time_indices);

  const LabeledDataset& source() const { return source_; }
  int domain_count() const { return static_cast<int>(unlabeled_.size()); }
  double time_index(int i) const { return time_indices_.at(i); }
  const std::vector<double>& time_indices() const { return time_indices_; }
  const Mat& unlabeled(int i) const { return unlabeled_.at(i); }
  double horizon() const { return time_indices_.back(); }
  int dim() const { return source_.dim(); }

 private:
  LabeledDataset source_;
  std::vector<Mat> unlabeled_;
  std::vector<double> time_indices_;
};

/// Interleaved half-circle two-moons dataset; n/2 points per class, labels
/// {1, 2}, isotropic Gaussian noise. Deterministic per seed.
LabeledDataset make_two_moons(int n, double noise_sd, uint64_t seed);

/// Rotate all features (D must be 2) about the origin; labels unchanged.
LabeledDataset rotate(const LabeledDataset& dataset, double angle_rad);
Mat rotate_features(const Mat& features, double angle_rad);

struct RotatingSequence {
  DomainSequence domains;
  HeldOutLabels held_out;
};

/// Rotating two-moons sequence: domain j gets a fresh noise redraw rotated by
/// angles[j] (radians, ascending, first 0). With shared_cloud the same base
/// cloud is rotated instead (visualization parity).
RotatingSequence make_rotating_sequence(int n, double noise_sd,
                                        const std::vector<double>& angles_rad, uint64_t seed,
                                        bool shared_cloud = false);

// ---- file IO ----
// CSV schema: x_0,...,x_{D-1},label,time_index  (label empty for unlabeled
// rows). Features are written with 17 significant digits so the round trip is
// exact.

struct LoadedCsv {
  Mat features;
  std::vector<std::optional<int>> labels;
  double time_index = 1.0;

  bool fully_labeled() const;
  LabeledDataset as_labeled() const;
};

void save_dataset(const LabeledDataset& dataset, const std::string& path);
void save_unlabeled(const Mat& features, double time_index, const std::string& path);
LoadedCsv load_dataset(const std::string& path);

/// Sequence manifest: JSON listing per-domain CSV paths and time indices.
struct SequenceManifest {
  std::vector<std::string> files;
  std::vector<double> time_indices;
  uint64_t seed = 0;
  std::string generator;  // free-form description of how data was produced
};

void save_sequence(const DomainSequence& domains, const HeldOutLabels& held_out,
                   const std::string& dir, SequenceManifest meta);
SequenceManifest load_manifest(const std::string& path);
RotatingSequence load_sequence(const std::string& manifest_path);

}  // namespace gdaflow
