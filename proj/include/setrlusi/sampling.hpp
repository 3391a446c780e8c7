#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "setrlusi/dataset.hpp"
#include "setrlusi/errors.hpp"

namespace setrlusi {

/// Folds a tuple such as (trial, round, source, purpose) into one stream id.
std::uint64_t make_stream_id(std::initializer_list<std::uint64_t> parts);

/// Deterministic random stream. The engine is mt19937_64 (fully specified by
/// the standard); every derived draw is computed here rather than through
/// <random> distributions, whose algorithms differ between standard
/// libraries. Same (seed, stream_id) gives the same sequence everywhere.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Standard normal (Marsaglia polar method).
  double normal();

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Maximum number of redraws when a bootstrap comes out single-class.
inline constexpr int kMaxBootstrapRedraws = 10;

/// q row indices drawn with replacement from a q-row labeled domain. Draws
/// that miss a class are repeated up to kMaxBootstrapRedraws times, after
/// which SamplingError is thrown.
IndexList bootstrap_indices(const Labels& labels, RngStream& rng);
DomainDataset bootstrap_target(const DomainDataset& target, RngStream& rng);

/// Class-stratified sample without replacement keeping ceil(gamma * n_c)
/// rows of each class c. Rows are returned in ascending order.
IndexList proportional_sample_indices(const Labels& labels, double gamma, RngStream& rng);
DomainDataset proportional_sample_source(const DomainDataset& source, double gamma,
                                         RngStream& rng);

/// k distinct positions out of [0, n), in draw order.
IndexList sample_without_replacement(Eigen::Index n, Eigen::Index k, RngStream& rng);

/// Uniform pick from a non-empty pool.
template <typename T>
const T& draw_uniform(std::span<const T> pool, RngStream& rng) {
  if (pool.empty()) throw SamplingError("cannot draw from an empty pool");
  return pool[static_cast<std::size_t>(rng.uniform_index(pool.size()))];
}

}  // namespace setrlusi
