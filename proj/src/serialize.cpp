#include "setrlusi/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "setrlusi/errors.hpp"

namespace setrlusi {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw DataError("ensemble: centers must be a non-empty array");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) {
      throw DataError("ensemble: ragged centers matrix");
    }
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string serialize_ensemble(const Ensemble& ensemble) {
  json learners = json::array();
  for (const auto& l : ensemble.learners()) {
    json coeffs = json::array();
    for (Eigen::Index i = 0; i < l.coefficients.size(); ++i) coeffs.push_back(l.coefficients(i));
    learners.push_back({
        {"centers", matrix_to_json(l.centers)},
        {"coefficients", std::move(coeffs)},
        {"intercept", l.intercept},
        {"kernel", {{"kind", to_string(l.kernel.kind)}, {"sigma", l.kernel.sigma}}},
        {"epsilon", l.epsilon},
        {"beta", l.beta},
    });
  }
  const json doc{{"format", "setrlusi-ensemble"},
                 {"version", kEnsembleFormatVersion},
                 {"learners", std::move(learners)}};
  return doc.dump() + "\n";
}

Ensemble deserialize_ensemble(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("ensemble: invalid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "setrlusi-ensemble") {
      throw DataError("ensemble: unexpected format tag");
    }
    const int version = doc.at("version").get<int>();
    if (version != kEnsembleFormatVersion) {
      throw DataError("ensemble: unsupported version " + std::to_string(version));
    }
    Ensemble out;
    for (const json& item : doc.at("learners")) {
      WeakLearner l;
      l.centers = matrix_from_json(item.at("centers"));
      const auto& coeffs = item.at("coefficients");
      if (static_cast<Eigen::Index>(coeffs.size()) != l.centers.rows()) {
        throw DataError("ensemble: coefficient count differs from center count");
      }
      l.coefficients.resize(l.centers.rows());
      for (Eigen::Index i = 0; i < l.coefficients.size(); ++i) {
        l.coefficients(i) = coeffs[static_cast<std::size_t>(i)].get<double>();
      }
      l.intercept = item.at("intercept").get<double>();
      const std::string kind = item.at("kernel").at("kind").get<std::string>();
      if (kind != "rbf" && kind != "linear") throw DataError("ensemble: unknown kernel '" + kind + "'");
      l.kernel.kind = kind == "rbf" ? KernelKind::rbf : KernelKind::linear;
      l.kernel.sigma = item.at("kernel").at("sigma").get<double>();
      l.kernel.sigma_rule = SigmaRule::fixed;
      l.kernel.validate();
      l.epsilon = item.at("epsilon").get<double>();
      l.beta = item.at("beta").get<double>();
      out.add(std::move(l));
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("ensemble: malformed artifact: ") + e.what());
  }
}

void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ensemble to '" + path.string() + "'");
  out << serialize_ensemble(ensemble);
  if (!out) throw IoError("failed writing ensemble to '" + path.string() + "'");
}

Ensemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ensemble '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_ensemble(buf.str());
}

}  // namespace setrlusi
