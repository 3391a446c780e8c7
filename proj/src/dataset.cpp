#include "setrlusi/dataset.hpp"

#include <string>

#include "setrlusi/errors.hpp"

namespace setrlusi {

const Labels& DomainDataset::y() const {
  if (!labels) throw DataError("domain '" + name + "' has no labels");
  return *labels;
}

std::pair<Eigen::Index, Eigen::Index> DomainDataset::class_counts() const {
  const Labels& lab = y();
  const auto ones = static_cast<Eigen::Index>((lab.array() == 1.0).count());
  return {lab.size() - ones, ones};
}

bool DomainDataset::has_both_classes() const {
  const auto [zeros, ones] = class_counts();
  return zeros > 0 && ones > 0;
}

DomainDataset DomainDataset::subset(std::span<const Eigen::Index> rows) const {
  DomainDataset out;
  out.name = name;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dim());
  if (labels) out.labels = Labels(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::Index src = rows[r];
    if (src < 0 || src >= size()) {
      throw DimensionError("subset: row " + std::to_string(src) + " out of range");
    }
    const auto dst = static_cast<Eigen::Index>(r);
    out.features.row(dst) = features.row(src);
    if (labels) (*out.labels)(dst) = (*labels)(src);
  }
  return out;
}

void DomainDataset::validate() const {
  if (size() < 1 || dim() < 1) throw DataError("domain '" + name + "' is empty");
  if (!features.allFinite()) {
    throw DataError("domain '" + name + "' has non-finite features");
  }
  if (labels) {
    if (labels->size() != size()) {
      throw DimensionError("domain '" + name + "' has " + std::to_string(labels->size()) +
                           " labels for " + std::to_string(size()) + " rows");
    }
    for (Eigen::Index i = 0; i < labels->size(); ++i) {
      const double v = (*labels)(i);
      if (v != 0.0 && v != 1.0) {
        throw DataError("domain '" + name + "' label at row " + std::to_string(i) +
                        " is not 0/1");
      }
    }
  }
}

void TransferTask::validate() const {
  if (sources.empty()) throw DataError("task '" + name + "' has no source domains");
  target_train.validate();
  target_test.validate();
  if (!target_train.labeled()) throw DataError("task '" + name + "': target train unlabeled");
  if (target_train.size() < 2) {
    throw DataError("task '" + name + "': target train needs at least 2 samples");
  }
  if (!target_train.has_both_classes()) {
    throw DataError("task '" + name + "': target train must contain both classes");
  }
  const Eigen::Index d = dim();
  if (target_test.dim() != d) throw DimensionError("task '" + name + "': test dimension");
  for (const auto& s : sources) {
    s.validate();
    if (!s.labeled()) throw DataError("task '" + name + "': source '" + s.name + "' unlabeled");
    if (s.dim() != d) {
      throw DimensionError("task '" + name + "': source '" + s.name + "' has dimension " +
                           std::to_string(s.dim()) + ", target has " + std::to_string(d));
    }
  }
}

}  // namespace setrlusi
