#include "bcsc/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "bcsc/errors.hpp"

namespace bcsc {

namespace {

constexpr std::uint8_t kIdxUnsignedByte = 0x08;

// RAII wrapper so the gz handle is closed on every exit path.
struct GzFile {
  explicit GzFile(const std::string& path) : handle(gzopen(path.c_str(), "rb")) {}
  ~GzFile() {
    if (handle != nullptr) {
      gzclose(handle);
    }
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
  gzFile handle;
};

void read_exact(gzFile f, const std::string& path, void* out, std::size_t len) {
  std::size_t done = 0;
  auto* dst = static_cast<std::uint8_t*>(out);
  while (done < len) {
    const unsigned chunk = static_cast<unsigned>(
        std::min<std::size_t>(len - done, std::numeric_limits<int>::max()));
    const int got = gzread(f, dst + done, chunk);
    if (got <= 0) {
      throw FormatError(path + ": truncated IDX file (expected " + std::to_string(len) +
                        " more payload bytes, got " + std::to_string(done) + ")");
    }
    done += static_cast<std::size_t>(got);
  }
}

}  // namespace

RawIdxTensor load_idx(const std::string& path) {
  GzFile file(path);
  if (file.handle == nullptr) {
    throw IoError(path + ": cannot open");
  }
  std::array<std::uint8_t, 4> magic{};
  read_exact(file.handle, path, magic.data(), magic.size());
  if (magic[0] != 0 || magic[1] != 0 || magic[2] != kIdxUnsignedByte) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "0x%02x%02x%02x%02x", magic[0], magic[1], magic[2], magic[3]);
    throw FormatError(path + ": bad IDX magic " + buf + " (want 0x000008<rank>)");
  }
  const std::size_t rank = magic[3];
  if (rank == 0) {
    throw FormatError(path + ": IDX rank must be >= 1");
  }

  RawIdxTensor tensor;
  tensor.dims.reserve(rank);
  for (std::size_t r = 0; r < rank; ++r) {
    std::array<std::uint8_t, 4> be{};
    read_exact(file.handle, path, be.data(), be.size());
    const std::uint32_t dim = (std::uint32_t{be[0]} << 24) | (std::uint32_t{be[1]} << 16) |
                              (std::uint32_t{be[2]} << 8) | std::uint32_t{be[3]};
    tensor.dims.push_back(dim);
  }
  tensor.bytes.resize(tensor.element_count());
  read_exact(file.handle, path, tensor.bytes.data(), tensor.bytes.size());

  std::uint8_t extra = 0;
  if (gzread(file.handle, &extra, 1) != 0) {
    throw FormatError(path + ": trailing bytes after IDX payload");
  }
  return tensor;
}

void save_idx(const std::string& path, const RawIdxTensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > 255) {
    throw ConfigError("save_idx: rank must be in [1, 255]");
  }
  for (std::size_t d : tensor.dims) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw ConfigError("save_idx: dimension does not fit in 32 bits");
    }
  }
  if (tensor.element_count() != tensor.bytes.size()) {
    throw ShapeError("save_idx: dims imply " + std::to_string(tensor.element_count()) +
                     " bytes, payload has " + std::to_string(tensor.bytes.size()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError(path + ": cannot open for writing");
  }
  const std::array<std::uint8_t, 4> magic = {0, 0, kIdxUnsignedByte,
                                             static_cast<std::uint8_t>(tensor.dims.size())};
  out.write(reinterpret_cast<const char*>(magic.data()), magic.size());
  for (std::size_t d : tensor.dims) {
    const std::array<std::uint8_t, 4> be = {
        static_cast<std::uint8_t>(d >> 24), static_cast<std::uint8_t>(d >> 16),
        static_cast<std::uint8_t>(d >> 8), static_cast<std::uint8_t>(d)};
    out.write(reinterpret_cast<const char*>(be.data()), be.size());
  }
  out.write(reinterpret_cast<const char*>(tensor.bytes.data()),
            static_cast<std::streamsize>(tensor.bytes.size()));
  if (!out) {
    throw IoError(path + ": write failed");
  }
}

Dataset to_dataset(const RawIdxTensor& images, const RawIdxTensor& labels) {
  if (images.dims.size() != 3) {
    throw FormatError("to_dataset: image tensor must have rank 3, got rank " +
                      std::to_string(images.dims.size()));
  }
  if (labels.dims.size() != 1) {
    throw FormatError("to_dataset: label tensor must have rank 1, got rank " +
                      std::to_string(labels.dims.size()));
  }
  const std::size_t n = images.dims[0];
  if (labels.dims[0] != n) {
    throw ShapeError("to_dataset: " + std::to_string(n) + " images vs " +
                     std::to_string(labels.dims[0]) + " labels");
  }
  if (n == 0) {
    throw ShapeError("to_dataset: empty dataset");
  }

  Dataset ds;
  ds.sample_count = n;
  ds.feature_dim = images.dims[1] * images.dims[2];
  ds.inputs.resize(n * ds.feature_dim);
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
    ds.inputs[i] = static_cast<double>(images.bytes[i]) / 255.0;
  }
  ds.labels.resize(n);
  std::uint8_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = labels.bytes[i];
    max_label = std::max(max_label, labels.bytes[i]);
  }
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

Dataset synth_blobs(RngStream& stream, std::size_t n, std::size_t d, std::size_t k,
                    double separation) {
  if (k == 0 || d == 0) {
    throw ConfigError("synth_blobs: d and k must be >= 1");
  }
  if (n < k) {
    throw ConfigError("synth_blobs: need n >= k, got n=" + std::to_string(n) +
                      " k=" + std::to_string(k));
  }
  if (!(separation >= 0.0)) {
    throw ConfigError("synth_blobs: separation must be >= 0");
  }

  Dataset ds;
  ds.sample_count = n;
  ds.feature_dim = d;
  ds.num_classes = k;
  ds.inputs.resize(n * d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % k;
    ds.labels[i] = static_cast<std::int32_t>(cls);
    double* row = ds.inputs.data() + i * d;
    // Cluster means sit at 0, sep, 2*sep, ... on the first axis.
    row[0] = separation * static_cast<double>(cls) + stream.next_gaussian();
    for (std::size_t j = 1; j < d; ++j) {
      row[j] = stream.next_gaussian();
    }
  }
  return ds;
}

CorruptionResult corrupt_labels(RngStream& stream, const Dataset& ds, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError("corrupt_labels: rate must be in [0, 1]");
  }
  const std::size_t count =
      static_cast<std::size_t>(rate * static_cast<double>(ds.sample_count));
  CorruptionResult result;
  result.data = ds;
  if (count == 0) {
    return result;
  }
  if (ds.num_classes < 2) {
    throw ConfigError("corrupt_labels: need at least 2 classes to corrupt");
  }

  const std::vector<std::size_t> order = shuffle_indices(stream, ds.sample_count);
  result.corrupted.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(result.corrupted.begin(), result.corrupted.end());
  for (std::size_t i : result.corrupted) {
    const auto old_label = static_cast<std::uint64_t>(result.data.labels[i]);
    // Draw from the k-1 wrong labels: skip over the original.
    const std::uint64_t r = stream.next_below(ds.num_classes - 1);
    result.data.labels[i] = static_cast<std::int32_t>(r >= old_label ? r + 1 : r);
  }
  return result;
}

Dataset subset(const Dataset& ds, RngStream& stream, std::size_t n_sub) {
  if (n_sub == 0 || n_sub > ds.sample_count) {
    throw ConfigError("subset: need 1 <= n_sub <= " + std::to_string(ds.sample_count) +
                      ", got " + std::to_string(n_sub));
  }
  const std::vector<std::size_t> order = shuffle_indices(stream, ds.sample_count);
  Dataset out;
  out.sample_count = n_sub;
  out.feature_dim = ds.feature_dim;
  out.num_classes = ds.num_classes;
  out.inputs.resize(n_sub * ds.feature_dim);
  out.labels.resize(n_sub);
  for (std::size_t i = 0; i < n_sub; ++i) {
    const std::size_t src = order[i];
    std::copy_n(ds.inputs.data() + src * ds.feature_dim, ds.feature_dim,
                out.inputs.data() + i * ds.feature_dim);
    out.labels[i] = ds.labels[src];
  }
  return out;
}

}  // namespace bcsc
