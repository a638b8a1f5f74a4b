#include "simo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "simo/errors.hpp"
#include "simo/rng.hpp"

namespace simo {

void Dataset::reindex() {
  class_index.assign(num_classes, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw DataError("dataset: label " + std::to_string(label) + " out of range at row " +
                      std::to_string(i));
    }
    class_index[static_cast<std::size_t>(label)].push_back(i);
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes == 0 || spec.samples_per_class == 0 || spec.feature_dim == 0) {
    throw ConfigError("synthetic: num_classes, samples_per_class and feature_dim must be > 0");
  }
  if (spec.cluster_spread < 0.0) throw ConfigError("synthetic: cluster_spread must be >= 0");

  Rng rng(spec.seed);
  const std::size_t n = spec.num_classes * spec.samples_per_class;
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.features = Tensor({n, spec.feature_dim});
  ds.labels.resize(n);

  std::vector<double> center(spec.feature_dim);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t d = 0; d < spec.feature_dim; ++d) center[d] = rng.uniform(0.2, 0.8);
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      ds.labels[row] = static_cast<int>(c);
      for (std::size_t d = 0; d < spec.feature_dim; ++d) {
        const double v = center[d] + spec.cluster_spread * rng.gaussian();
        ds.features.at(row, d) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  ds.reindex();
  return ds;
}

Dataset read_records(const std::string& path, std::size_t feature_dim, int max_label) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("records: cannot open " + path);
  is.seekg(0, std::ios::end);
  const std::uint64_t file_len = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0, std::ios::beg);

  const std::uint64_t record_len = feature_dim + 1;
  if (file_len % record_len != 0) {
    const std::uint64_t complete = file_len / record_len;
    throw DataError("records: bad length of " + path + ", partial record at byte offset " +
                    std::to_string(complete * record_len));
  }
  const std::size_t n = static_cast<std::size_t>(file_len / record_len);

  Dataset ds;
  ds.features = Tensor({n, feature_dim});
  ds.labels.resize(n);
  std::vector<unsigned char> buf(record_len);
  int max_seen = -1;
  for (std::size_t r = 0; r < n; ++r) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record_len));
    if (!is) throw DataError("records: read failed in " + path);
    const int label = static_cast<int>(buf[0]);
    if (label > max_label) {
      throw DataError("records: label " + std::to_string(label) + " > " +
                      std::to_string(max_label) + " at record " + std::to_string(r) + " of " +
                      path);
    }
    ds.labels[r] = label;
    max_seen = std::max(max_seen, label);
    for (std::size_t d = 0; d < feature_dim; ++d) {
      ds.features.at(r, d) = static_cast<double>(buf[1 + d]) / 255.0;
    }
  }
  ds.num_classes = static_cast<std::size_t>(max_seen) + 1;
  ds.reindex();
  return ds;
}

namespace {

constexpr std::size_t kCifarDim = 3072;   // 3 channel planes of 32x32
constexpr std::size_t kCifarSide = 32;

/// Block-average one 32x32 plane down to 8x8.
void downscale_plane(const double* src, double* dst) {
  for (std::size_t by = 0; by < 8; ++by) {
    for (std::size_t bx = 0; bx < 8; ++bx) {
      double acc = 0.0;
      for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 0; x < 4; ++x) {
          acc += src[(by * 4 + y) * kCifarSide + (bx * 4 + x)];
        }
      }
      dst[by * 8 + bx] = acc / 16.0;
    }
  }
}

}  // namespace

Dataset read_cifar10(const std::vector<std::string>& paths, bool downscale_8x8) {
  if (paths.empty()) throw DataError("cifar10: no input files");
  Dataset all;
  all.num_classes = 10;
  std::vector<Tensor> parts;
  std::size_t total = 0;
  for (const std::string& path : paths) {
    Dataset part = read_records(path, kCifarDim, 9);
    total += part.size();
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    parts.push_back(std::move(part.features));
  }

  const std::size_t out_dim = downscale_8x8 ? 192 : kCifarDim;
  all.features = Tensor({total, out_dim});
  std::size_t row = 0;
  for (const Tensor& part : parts) {
    for (std::size_t r = 0; r < part.shape()[0]; ++r, ++row) {
      const double* src = part.data().data() + r * kCifarDim;
      double* dst = all.features.data().data() + row * out_dim;
      if (downscale_8x8) {
        for (std::size_t plane = 0; plane < 3; ++plane) {
          downscale_plane(src + plane * 1024, dst + plane * 64);
        }
      } else {
        std::copy(src, src + kCifarDim, dst);
      }
    }
  }
  all.reindex();
  return all;
}

void write_records(const Dataset& dataset, const std::string& path) {
  if (dataset.num_classes > 256) {
    throw DataError("records: cannot export " + std::to_string(dataset.num_classes) +
                    " classes into one label byte");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("records: cannot open " + path + " for writing");
  const std::size_t d = dataset.feature_dim();
  std::vector<unsigned char> buf(d + 1);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    buf[0] = static_cast<unsigned char>(dataset.labels[r]);
    for (std::size_t c = 0; c < d; ++c) {
      const double v = std::clamp(dataset.features.at(r, c), 0.0, 1.0);
      buf[1 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw DataError("records: write failed for " + path);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("split: test_fraction must be in (0, 1)");
  }
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const std::size_t n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(n));
  const std::size_t d = dataset.feature_dim();

  auto take = [&](std::size_t begin, std::size_t count) {
    Dataset out;
    out.num_classes = dataset.num_classes;
    out.features = Tensor({count, d});
    out.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t src = order[begin + i];
      out.labels[i] = dataset.labels[src];
      for (std::size_t c = 0; c < d; ++c) out.features.at(i, c) = dataset.features.at(src, c);
    }
    out.reindex();
    return out;
  };
  return {take(n_test, n - n_test), take(0, n_test)};
}

}  // namespace simo
