#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace setrlusi {

// Binary labels stored as 0.0 / 1.0 so they enter the linear algebra as-is.
using Labels = Eigen::VectorXd;
using IndexList = std::vector<Eigen::Index>;

/// One source or target domain: n x d features plus optional 0/1 labels.
struct DomainDataset {
  std::string name;
  Eigen::MatrixXd features;
  std::optional<Labels> labels;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool labeled() const { return labels.has_value(); }

  /// Labels or DataError when the domain is unlabeled.
  const Labels& y() const;

  /// Row count per class {count(0), count(1)}; requires labels.
  std::pair<Eigen::Index, Eigen::Index> class_counts() const;
  bool has_both_classes() const;

  /// Rows in the given order (repeats allowed), labels carried along.
  DomainDataset subset(std::span<const Eigen::Index> rows) const;

  /// Throws DataError unless features are finite, n >= 1 and labels binary.
  void validate() const;
};

/// N labeled sources, a small labeled target training set and a held-out
/// target test set, all sharing the feature dimension.
struct TransferTask {
  std::string name;
  std::vector<DomainDataset> sources;
  DomainDataset target_train;
  DomainDataset target_test;

  Eigen::Index dim() const { return target_train.dim(); }
  void validate() const;
};

}  // namespace setrlusi
