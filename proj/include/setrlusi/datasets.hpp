#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "setrlusi/dataset.hpp"

namespace setrlusi {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvSchema {
  std::string label_column = "label";
  // Empty means every column except the label.
  std::vector<std::string> feature_columns;
  // Token mapped to 1; the other token maps to 0. Without it, "0"/"1" are
  // taken literally and any other pair is mapped in sorted order.
  std::optional<std::string> positive_label;
};

/// Comma-separated, header row first. Throws IoError for a missing file and
/// DataError for non-numeric or missing cells and for more than two labels.
DomainDataset load_csv_dataset(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes x1..xd plus a `label` column (when labeled).
void write_csv_dataset(const DomainDataset& data, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Multi-domain construction by clustering
// ---------------------------------------------------------------------------

inline constexpr int kKMeansMaxIterations = 300;
inline constexpr double kKMeansTolerance = 1e-8;

/// Lloyd's algorithm on the selected (0-based) columns with k-means++
/// seeding. Returns a cluster id in [0, k) per row.
Eigen::VectorXi kmeans_cluster(const DomainDataset& data,
                               std::span<const Eigen::Index> feature_subset, int k,
                               std::uint64_t seed);

struct DomainPartition {
  std::vector<DomainDataset> sources;
  DomainDataset target;
  std::vector<std::string> warnings;
};

/// Clusters become domains. Without an explicit target cluster, clusters are
/// ordered by decreasing size (ties by id) and the last one is the target;
/// with one, the remaining clusters become sources in decreasing size.
DomainPartition make_transfer_task(const DomainDataset& data, const Eigen::VectorXi& assignment,
                                   std::optional<int> target_cluster = std::nullopt);

// ---------------------------------------------------------------------------
// Synthetic rotated two-Gaussian domains
// ---------------------------------------------------------------------------

struct SyntheticDomain {
  double angle_degrees = 0.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double compactness = 1.0;
};

struct SyntheticSpec {
  std::vector<SyntheticDomain> domains;
  Eigen::Index n_per_domain = 200;
  // Class means sit at -offset/+offset along the first axis before rotation.
  double class_offset = 1.0;
  // Per-axis standard deviations at compactness 1, before rotation.
  Eigen::Vector2d base_std{0.6, 0.6};
  std::uint64_t seed = 0;
};

/// Builds a spec from parallel lists; a list of length 1 is broadcast.
SyntheticSpec make_synthetic_spec(std::size_t n_domains, const std::vector<double>& angles_degrees,
                                  const std::vector<Eigen::Vector2d>& centers,
                                  const std::vector<double>& compactness,
                                  Eigen::Index n_per_domain, std::uint64_t seed);

/// The 12-domain grid: 4 rotation angles x 3 centers, compactness tied to
/// the center.
SyntheticSpec twelve_domain_spec(Eigen::Index n_per_domain, std::uint64_t seed);

/// One labeled 2-D domain per spec entry. Class c has mean
/// center + R(angle) (+-offset, 0) and covariance R diag(compactness * base_std)^2 R^T.
std::vector<DomainDataset> gen_synthetic_domains(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Splitting and scaling
// ---------------------------------------------------------------------------

/// Class-stratified split keeping round(fraction * n_c) rows of each class
/// for training. Each side must keep at least 2 rows per class.
std::pair<DomainDataset, DomainDataset> split_labeled_target(const DomainDataset& target,
                                                             double fraction, std::uint64_t seed);

enum class ScalingMode { none, minmax };

/// Per-column min-max map fitted on one matrix and applied to others.
class MinMaxScaler {
 public:
  static MinMaxScaler fit(const Eigen::MatrixXd& features);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& features) const;

  const Eigen::RowVectorXd& minimum() const { return min_; }
  const Eigen::RowVectorXd& range() const { return range_; }

 private:
  Eigen::RowVectorXd min_;
  Eigen::RowVectorXd range_;
};

/// Scales every domain with the map fitted on target_train.
TransferTask scale_task(const TransferTask& task, ScalingMode mode);

}  // namespace setrlusi
