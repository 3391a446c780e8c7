#include "setrlusi/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace setrlusi {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

bool both_classes(const Labels& labels, const IndexList& rows) {
  bool zero = false;
  bool one = false;
  for (const auto r : rows) {
    (labels(r) == 1.0 ? one : zero) = true;
    if (zero && one) return true;
  }
  return false;
}

}  // namespace

std::uint64_t make_stream_id(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (const auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      engine_(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL)) {}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw SamplingError("uniform_index: empty range");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double RngStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

IndexList sample_without_replacement(Eigen::Index n, Eigen::Index k, RngStream& rng) {
  if (k < 0 || k > n) {
    throw SamplingError("cannot draw " + std::to_string(k) + " of " + std::to_string(n) +
                        " without replacement");
  }
  IndexList pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  // Partial Fisher-Yates: the first k slots end up holding the sample.
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

IndexList bootstrap_indices(const Labels& labels, RngStream& rng) {
  const Eigen::Index q = labels.size();
  if (q < 2) throw SamplingError("bootstrap needs at least 2 labeled samples");
  IndexList rows(static_cast<std::size_t>(q));
  for (int attempt = 0; attempt <= kMaxBootstrapRedraws; ++attempt) {
    for (auto& r : rows) r = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(q)));
    if (both_classes(labels, rows)) return rows;
  }
  throw SamplingError("bootstrap stayed single-class after " +
                      std::to_string(kMaxBootstrapRedraws) + " redraws");
}

DomainDataset bootstrap_target(const DomainDataset& target, RngStream& rng) {
  const IndexList rows = bootstrap_indices(target.y(), rng);
  return target.subset(rows);
}

IndexList proportional_sample_indices(const Labels& labels, double gamma, RngStream& rng) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw SamplingError("gamma must lie in (0, 1], got " + std::to_string(gamma));
  }
  IndexList out;
  for (const double cls : {0.0, 1.0}) {
    IndexList members;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels(i) == cls) members.push_back(i);
    }
    if (members.empty()) continue;
    const auto n = static_cast<Eigen::Index>(members.size());
    // Relative slack so that e.g. 0.1 * 30 does not round up to 4.
    auto keep = static_cast<Eigen::Index>(
        std::ceil(gamma * static_cast<double>(n) * (1.0 - 1e-12)));
    keep = std::clamp<Eigen::Index>(keep, 1, n);
    for (const auto pos : sample_without_replacement(n, keep, rng)) {
      out.push_back(members[static_cast<std::size_t>(pos)]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

DomainDataset proportional_sample_source(const DomainDataset& source, double gamma,
                                         RngStream& rng) {
  const IndexList rows = proportional_sample_indices(source.y(), gamma, rng);
  return source.subset(rows);
}

}  // namespace setrlusi
