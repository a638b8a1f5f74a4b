#include "simo/diagnostics.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "simo/errors.hpp"
#include "simo/rng.hpp"

namespace simo {

namespace {

double kernel_value(std::span<const double> a, std::span<const double> b, double epsilon,
                    SimilarityKernel kernel) {
  return kernel == SimilarityKernel::d_prime ? d_prime(a, b, epsilon)
                                             : d_double_prime(a, b, epsilon);
}

void normalize_off_diagonal(Tensor& m) {
  const std::size_t n = m.rows();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      lo = std::min(lo, m.at(i, j));
      hi = std::max(hi, m.at(i, j));
    }
  }
  if (!(hi > lo)) {
    // Degenerate range: constant off-diagonal maps to 1 when positive.
    const double v = hi > 0.0 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) m.at(i, j) = v;
      }
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) m.at(i, j) = (m.at(i, j) - lo) / (hi - lo);
    }
  }
}

Tensor kernel_matrix(const Tensor& rows, double epsilon, SimilarityKernel kernel) {
  const std::size_t n = rows.rows();
  Tensor m({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel_value(rows.row(i), rows.row(j), epsilon, kernel);
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
  return m;
}

}  // namespace

Tensor class_means(const Tensor& embeddings, const std::vector<int>& labels,
                   std::size_t num_classes) {
  const std::size_t dim = embeddings.shape()[1];
  Tensor means({num_classes, dim});
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    const auto cls = static_cast<std::size_t>(labels[r]);
    counts[cls] += 1;
    for (std::size_t c = 0; c < dim; ++c) means.at(cls, c) += embeddings.at(r, c);
  }
  for (std::size_t cls = 0; cls < num_classes; ++cls) {
    if (counts[cls] == 0) {
      throw DataError("class_means: class " + std::to_string(cls) + " has no samples");
    }
    for (std::size_t c = 0; c < dim; ++c) {
      means.at(cls, c) /= static_cast<double>(counts[cls]);
    }
  }
  return means;
}

Tensor similarity_matrix(const Tensor& embeddings, const std::vector<int>& labels,
                         const SimoConfig& config, SimilarityKind kind, bool normalize,
                         SimilarityKernel kernel) {
  config.validate();
  if (!embeddings.is_matrix() || embeddings.rows() < 2) {
    throw ShapeError("similarity_matrix: need at least 2 embeddings, got " +
                     embeddings.shape_str());
  }
  Tensor m;
  if (kind == SimilarityKind::pairwise) {
    m = kernel_matrix(embeddings, config.epsilon, kernel);
  } else {
    std::size_t num_classes = 0;
    for (int label : labels) {
      num_classes = std::max(num_classes, static_cast<std::size_t>(label) + 1);
    }
    if (num_classes < 2) {
      throw DataError("similarity_matrix: class_mean needs at least 2 classes");
    }
    m = kernel_matrix(class_means(embeddings, labels, num_classes), config.epsilon, kernel);
  }
  if (normalize) normalize_off_diagonal(m);
  return m;
}

double effective_rank(const Tensor& rows) {
  if (!rows.is_matrix() || rows.rows() < 2) {
    throw ShapeError("effective_rank: need a matrix with >= 2 rows, got " + rows.shape_str());
  }
  bool any_nonzero = false;
  for (double v : rows.data()) {
    if (v != 0.0) {
      any_nonzero = true;
      break;
    }
  }
  if (!any_nonzero) throw DataError("effective_rank: all-zero matrix");

  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
      a(rows.data().data(), static_cast<Eigen::Index>(rows.rows()),
        static_cast<Eigen::Index>(rows.shape()[1]));
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double total = sigma.sum();
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double p = sigma[i] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

std::string DiagnosticsReport::to_json() const {
  nlohmann::json j;
  auto matrix_json = [](const Tensor& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (double v : m.row(r)) row.push_back(v);
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["pairwise_matrix"] = matrix_json(pairwise_matrix);
  j["class_mean_matrix"] = matrix_json(class_mean_matrix);
  j["effective_rank"] = effective_rank;
  j["mean_intra_distance"] = mean_intra_distance;
  j["mean_inter_distance"] = mean_inter_distance;
  j["mean_inter_squared_dot"] = mean_inter_squared_dot;
  j["semimetric"] = nlohmann::json::parse(semimetric.to_json());
  j["kernel"] = kernel;
  j["normalization"] = normalization;
  j["epsilon"] = epsilon;
  return j.dump(2);
}

DiagnosticsReport diagnose(const Tensor& embeddings, const std::vector<int>& labels,
                           std::size_t num_classes, const SimoConfig& config,
                           const DiagnosticsOptions& options) {
  if (embeddings.rows() < 2) {
    throw DataError("diagnose: need at least 2 embeddings");
  }
  if (num_classes < 2) throw DataError("diagnose: need at least 2 classes");

  DiagnosticsReport report;
  report.epsilon = config.epsilon;
  report.kernel = options.kernel == SimilarityKernel::d_prime ? "d_prime" : "d_double_prime";

  // Pairwise matrix over an evenly spaced row sample.
  const std::size_t n = embeddings.rows();
  const std::size_t sample = std::min(options.pairwise_sample, n);
  const std::size_t dim = embeddings.shape()[1];
  Tensor sampled({sample, dim});
  std::vector<int> sampled_labels(sample);
  for (std::size_t i = 0; i < sample; ++i) {
    const std::size_t src = i * n / sample;
    sampled_labels[i] = labels[src];
    for (std::size_t c = 0; c < dim; ++c) sampled.at(i, c) = embeddings.at(src, c);
  }
  report.pairwise_matrix = similarity_matrix(sampled, sampled_labels, config,
                                             SimilarityKind::pairwise, true, options.kernel);
  report.class_mean_matrix = similarity_matrix(embeddings, labels, config,
                                               SimilarityKind::class_mean, true, options.kernel);

  const Tensor means = class_means(embeddings, labels, num_classes);
  report.effective_rank = ::simo::effective_rank(means);

  // Intra/inter statistics over all pairs.
  double intra = 0.0, inter = 0.0, inter_dot = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const PairTerms t = pair_terms(embeddings.row(i), embeddings.row(j));
      if (labels[i] == labels[j]) {
        intra += t.d;
        n_intra += 1;
      } else {
        inter += t.d;
        inter_dot += t.o;
        n_inter += 1;
      }
    }
  }
  report.mean_intra_distance = n_intra > 0 ? intra / static_cast<double>(n_intra) : 0.0;
  report.mean_inter_distance = n_inter > 0 ? inter / static_cast<double>(n_inter) : 0.0;
  report.mean_inter_squared_dot = n_inter > 0 ? inter_dot / static_cast<double>(n_inter) : 0.0;

  // Semi-metric spot check sampled from the embeddings themselves.
  Rng rng(options.seed);
  const PointSource source = [&]() {
    const std::size_t r = static_cast<std::size_t>(rng.below(n));
    const auto row = embeddings.row(r);
    return std::vector<double>(row.begin(), row.end());
  };
  report.semimetric = verify_semimetric(source, options.semimetric_trials, config.epsilon);
  return report;
}

void export_embeddings(const Dataset& dataset, const ModelParams& params,
                       const std::string& path) {
  const Tensor embeddings = encode(params, dataset.features);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("export: cannot open " + path + " for writing");
  const std::size_t dim = embeddings.shape()[1];
  os << "label";
  for (std::size_t c = 0; c < dim; ++c) os << ",e" << c;
  os << "\n";
  char buf[32];
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    os << dataset.labels[r];
    for (std::size_t c = 0; c < dim; ++c) {
      std::snprintf(buf, sizeof(buf), ",%.17g", embeddings.at(r, c));
      os << buf;
    }
    os << "\n";
  }
  if (!os) throw DataError("export: write failed for " + path);
}

std::pair<std::vector<int>, Tensor> import_embeddings(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("import: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("import: empty file " + path);
  std::size_t dim = 0;
  for (char ch : line) {
    if (ch == ',') ++dim;
  }
  std::vector<int> labels;
  std::vector<double> data;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    labels.push_back(std::stoi(field));
    for (std::size_t c = 0; c < dim; ++c) {
      if (!std::getline(ss, field, ',')) throw DataError("import: short row in " + path);
      data.push_back(std::stod(field));
    }
  }
  return {std::move(labels), Tensor({labels.size(), dim}, std::move(data))};
}

void write_matrix_csv(const Tensor& matrix, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("matrix: cannot open " + path + " for writing");
  char buf[32];
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    for (std::size_t c = 0; c < matrix.shape()[1]; ++c) {
      std::snprintf(buf, sizeof(buf), c == 0 ? "%.17g" : ",%.17g", matrix.at(r, c));
      os << buf;
    }
    os << "\n";
  }
  if (!os) throw DataError("matrix: write failed for " + path);
}

}  // namespace simo
