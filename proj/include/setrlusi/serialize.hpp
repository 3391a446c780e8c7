#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "setrlusi/ensemble.hpp"

namespace setrlusi {

inline constexpr int kEnsembleFormatVersion = 1;

/// JSON artifact:
///   {"format": "setrlusi-ensemble", "version": 1,
///    "learners": [{"centers": [[...], ...], "coefficients": [...],
///                  "intercept": b, "kernel": {"kind": "rbf", "sigma": s},
///                  "epsilon": e, "beta": w}, ...]}
/// Doubles are written in shortest round-trip form, so loading restores the
/// ensemble bit for bit.
std::string serialize_ensemble(const Ensemble& ensemble);
Ensemble deserialize_ensemble(std::string_view text);

void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& path);
Ensemble load_ensemble(const std::filesystem::path& path);

}  // namespace setrlusi
