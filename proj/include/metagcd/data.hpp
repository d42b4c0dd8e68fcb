#ifndef METAGCD_DATA_HPP
#define METAGCD_DATA_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metagcd/rng.hpp"
#include "metagcd/tensor.hpp"

namespace metagcd {

/// Feature vectors with class ids.
struct LabeledSet {
  Tensor x;                 // N × D
  std::vector<int> y;       // N
  std::vector<int> classes; // sorted class universe

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.cols(); }
  bool empty() const { return y.empty(); }

  std::vector<std::size_t> indices_of(int cls) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) out.push_back(i);
    return out;
  }

  LabeledSet subset(std::span<const std::size_t> idx) const {
    LabeledSet s;
    s.x = gather_rows(x, idx);
    for (std::size_t i : idx) s.y.push_back(y[i]);
    s.classes = classes;
    return s;
  }

  /// Rebuilds `classes` from the labels actually present.
  void refresh_classes() {
    const std::set<int> c(y.begin(), y.end());
    classes.assign(c.begin(), c.end());
  }

  void validate() const {
    if (empty()) throw ValidationError("labeled set is empty");
    if (x.rows() != y.size()) throw DimensionError("labeled set has mismatched feature and label counts");
    for (int c : y)
      if (!std::binary_search(classes.begin(), classes.end(), c))
        throw ValidationError("label " + std::to_string(c) + " is outside the class universe");
  }

  friend bool operator==(const LabeledSet&, const LabeledSet&) = default;
};

struct SyntheticSpec {
  std::size_t num_classes = 20;
  std::size_t dim = 32;
  std::size_t samples_per_class = 150;
  double class_separation = 12.0;  // radius of the class-mean sphere, in units of σ = 1
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 2) throw ValidationError("num_classes must be at least 2");
    if (dim == 0) throw ValidationError("dim must be positive");
    if (samples_per_class == 0) throw ValidationError("samples_per_class must be positive");
    if (!(class_separation >= 0.0)) throw ValidationError("class_separation must be non-negative");
  }
};

/// Isotropic unit-variance Gaussian classes whose means lie uniformly on a
/// sphere of radius `class_separation`. Samples are stored class-major.
inline LabeledSet gen_gaussian_mixture(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Tensor means({spec.num_classes, spec.dim});
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto m = means.row(c);
    double norm = 0.0;
    while (norm < 1e-12) {
      for (double& v : m) v = rng.normal();
      norm = std::sqrt(dot(m, m));
    }
    for (double& v : m) v *= spec.class_separation / norm;
  }
  LabeledSet out;
  out.x = Tensor({spec.num_classes * spec.samples_per_class, spec.dim});
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    out.classes.push_back(static_cast<int>(c));
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      auto r = out.x.row(out.y.size());
      for (std::size_t p = 0; p < spec.dim; ++p) r[p] = means(c, p) + rng.normal();
      out.y.push_back(static_cast<int>(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset file. Text header, one `key value` per line, terminated by `---`,
// followed by a binary payload of `samples` records:
//
//   METAGCD-DATASET 1
//   dim <D>
//   classes <C>
//   samples <N>
//   seed <S>
//   payload int32le-label,float64le[D]
//   ---
//   { int32 LE class id in [0, C) ; D × IEEE-754 binary64 LE } × N
// ---------------------------------------------------------------------------

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetMagic = "METAGCD-DATASET";
inline constexpr const char* kDatasetPayload = "int32le-label,float64le";

struct DatasetHeader {
  int version = kDatasetFormatVersion;
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct DatasetFile {
  DatasetHeader header;
  LabeledSet data;

  friend bool operator==(const DatasetFile&, const DatasetFile&) = default;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_bytes(std::istream& is, unsigned char* b, std::size_t n) {
  is.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}

}  // namespace detail

inline void write_dataset(std::ostream& os, const LabeledSet& d, std::uint64_t seed) {
  if (d.empty()) throw ValidationError("refusing to save an empty dataset");
  d.validate();
  const std::size_t n_classes = d.classes.empty() ? 0 : static_cast<std::size_t>(d.classes.back()) + 1;
  if (d.classes.front() < 0) throw ValidationError("dataset class ids must be non-negative");
  os << kDatasetMagic << ' ' << kDatasetFormatVersion << '\n'
     << "dim " << d.dim() << '\n'
     << "classes " << n_classes << '\n'
     << "samples " << d.size() << '\n'
     << "seed " << seed << '\n'
     << "payload " << kDatasetPayload << '\n'
     << "---\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    detail::put_u32(os, static_cast<std::uint32_t>(d.y[i]));
    for (double v : d.x.row(i)) detail::put_f64(os, v);
  }
}

inline DatasetFile read_dataset(std::istream& is) {
  DatasetFile f;
  std::string line;
  if (!std::getline(is, line)) throw MalformedHeaderError("dataset file is empty");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kDatasetMagic)
      throw MalformedHeaderError("not a dataset file (bad magic line '" + line.substr(0, 40) + "')");
    if (version != kDatasetFormatVersion)
      throw VersionMismatchError("dataset format version " + std::to_string(version) + ", expected " +
                                 std::to_string(kDatasetFormatVersion));
    f.header.version = version;
  }
  bool has_dim = false, has_classes = false, has_samples = false, terminated = false;
  while (std::getline(is, line)) {
    if (line == "---") {
      terminated = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto number = [&](auto& out) {
      if (!(ls >> out)) throw MalformedHeaderError("header field '" + key + "' has no numeric value");
    };
    if (key == "dim") { number(f.header.dim); has_dim = true; }
    else if (key == "classes") { number(f.header.classes); has_classes = true; }
    else if (key == "samples") { number(f.header.samples); has_samples = true; }
    else if (key == "seed") number(f.header.seed);
    else if (key == "payload") {
      std::string p;
      ls >> p;
      if (p != kDatasetPayload) throw MalformedHeaderError("unsupported payload encoding '" + p + "'");
    } else {
      throw MalformedHeaderError("unknown header field '" + key + "'");
    }
  }
  if (!terminated) throw MalformedHeaderError("header is not terminated by '---'");
  if (!has_dim || !has_classes || !has_samples) throw MalformedHeaderError("header lacks dim/classes/samples");
  if (f.header.samples == 0) throw MalformedHeaderError("dataset declares zero samples");
  if (f.header.dim == 0) throw MalformedHeaderError("dataset declares zero dimensions");

  auto& d = f.data;
  d.x = Tensor({f.header.samples, f.header.dim});
  d.y.resize(f.header.samples);
  unsigned char b[8];
  for (std::size_t i = 0; i < f.header.samples; ++i) {
    if (!detail::get_bytes(is, b, 4))
      throw TruncatedDataError("dataset truncated at record " + std::to_string(i) + " of " +
                               std::to_string(f.header.samples));
    std::uint32_t label = 0;
    for (int k = 0; k < 4; ++k) label |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    if (label >= f.header.classes)
      throw MalformedHeaderError("record " + std::to_string(i) + " has class " + std::to_string(label) +
                                 " outside the declared " + std::to_string(f.header.classes) + " classes");
    d.y[i] = static_cast<int>(label);
    for (double& v : d.x.row(i)) {
      if (!detail::get_bytes(is, b, 8))
        throw TruncatedDataError("dataset truncated inside record " + std::to_string(i));
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
      v = std::bit_cast<double>(bits);
    }
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw MalformedHeaderError("trailing bytes after " + std::to_string(f.header.samples) + " records");
  d.refresh_classes();
  return f;
}

inline void save_dataset(const std::filesystem::path& path, const LabeledSet& d, std::uint64_t seed) {
  if (d.empty()) throw ValidationError("refusing to save an empty dataset");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(os, d, seed);
  if (!os) throw IoError("write failed for " + path.string());
}

inline DatasetFile load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_dataset(is);
}

}  // namespace metagcd

#endif  // METAGCD_DATA_HPP
