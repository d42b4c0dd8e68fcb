#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "oracles.hpp"

using namespace metagcd;

namespace {

/// Nearest-class-mean accuracy: means from the first half of each class,
/// scored on the second half.
double nearest_mean_accuracy(const LabeledSet& d) {
  const std::size_t c = d.classes.size(), dim = d.dim();
  Tensor means({c, dim});
  std::vector<std::vector<std::size_t>> held(c);
  for (std::size_t k = 0; k < c; ++k) {
    const auto idx = d.indices_of(d.classes[k]);
    const std::size_t half = idx.size() / 2;
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t p = 0; p < dim; ++p) means(k, p) += d.x(idx[i], p) / static_cast<double>(half);
    held[k].assign(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
  }
  std::size_t hits = 0, total = 0;
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i : held[k]) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < c; ++j) {
        const double dd = squared_distance(d.x.row(i), means.row(j));
        if (dd < best_d) best_d = dd, best = j;
      }
      hits += best == k;
      ++total;
    }
  return static_cast<double>(hits) / static_cast<double>(total);
}

SyntheticSpec spec(std::size_t classes, std::size_t dim, std::size_t per_class, double sep, std::uint64_t seed) {
  SyntheticSpec s;
  s.num_classes = classes;
  s.dim = dim;
  s.samples_per_class = per_class;
  s.class_separation = sep;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Synthetic, ShapeAndLabels) {
  const LabeledSet d = gen_gaussian_mixture(spec(5, 7, 11, 3.0, 1));
  EXPECT_EQ(d.size(), 55u);
  EXPECT_EQ(d.dim(), 7u);
  EXPECT_EQ(d.classes, (std::vector<int>{0, 1, 2, 3, 4}));
  for (int c = 0; c < 5; ++c) EXPECT_EQ(d.indices_of(c).size(), 11u);
}

TEST(Synthetic, ZeroSeparationIsChance) {
  const double acc = nearest_mean_accuracy(gen_gaussian_mixture(spec(4, 8, 1000, 0.0, 2)));
  EXPECT_NEAR(acc, 0.25, 0.05);
}

TEST(Synthetic, WideSeparationIsNearlyPerfect) {
  EXPECT_GE(nearest_mean_accuracy(gen_gaussian_mixture(spec(20, 32, 150, 12.0, 3))), 0.99);
}

TEST(Synthetic, DeterministicInSeed) {
  EXPECT_EQ(gen_gaussian_mixture(spec(3, 4, 5, 2.0, 9)), gen_gaussian_mixture(spec(3, 4, 5, 2.0, 9)));
  EXPECT_NE(gen_gaussian_mixture(spec(3, 4, 5, 2.0, 9)).x, gen_gaussian_mixture(spec(3, 4, 5, 2.0, 10)).x);
}

TEST(Synthetic, RejectsBadSpec) {
  EXPECT_THROW(gen_gaussian_mixture(spec(1, 4, 5, 2.0, 1)), ValidationError);
  EXPECT_THROW(gen_gaussian_mixture(spec(3, 0, 5, 2.0, 1)), ValidationError);
  EXPECT_THROW(gen_gaussian_mixture(spec(3, 4, 0, 2.0, 1)), ValidationError);
  EXPECT_THROW(gen_gaussian_mixture(spec(3, 4, 5, -1.0, 1)), ValidationError);
}

TEST(DatasetFile, RoundTripIsBitExact) {
  const LabeledSet d = gen_gaussian_mixture(spec(3, 5, 7, 4.0, 11));
  std::stringstream ss;
  write_dataset(ss, d, 11);
  const DatasetFile f = read_dataset(ss);
  EXPECT_EQ(f.data, d);
  EXPECT_EQ(f.header.dim, 5u);
  EXPECT_EQ(f.header.classes, 3u);
  EXPECT_EQ(f.header.samples, 21u);
  EXPECT_EQ(f.header.seed, 11u);
}

TEST(DatasetFile, RoundTripThroughDisk) {
  const auto path = std::filesystem::temp_directory_path() / "metagcd_test_dataset.bin";
  const LabeledSet d = gen_gaussian_mixture(spec(2, 3, 4, 1.0, 5));
  save_dataset(path, d, 5);
  EXPECT_EQ(load_dataset(path).data, d);
  std::filesystem::remove(path);
  EXPECT_THROW(load_dataset(path), IoError);
}

TEST(DatasetFile, RefusesEmptyDataset) {
  std::stringstream ss;
  EXPECT_THROW(write_dataset(ss, LabeledSet{}, 0), ValidationError);
}

TEST(DatasetFile, RejectsCorruptInput) {
  const LabeledSet d = gen_gaussian_mixture(spec(2, 3, 4, 1.0, 5));
  std::stringstream ss;
  write_dataset(ss, d, 5);
  const std::string good = ss.str();
  auto read = [](const std::string& s) {
    std::istringstream is(s);
    return read_dataset(is);
  };
  std::string wrong_version = good;
  wrong_version.replace(wrong_version.find(" 1\n"), 3, " 2\n");
  EXPECT_THROW(read(wrong_version), VersionMismatchError);
  EXPECT_THROW(read("NOT-A-DATASET 1\n"), MalformedHeaderError);
  EXPECT_THROW(read(""), MalformedHeaderError);
  std::string unknown = good;
  unknown.insert(unknown.find("---"), "colour blue\n");
  EXPECT_THROW(read(unknown), MalformedHeaderError);
  EXPECT_THROW(read(good.substr(0, good.size() - 5)), TruncatedDataError);
  EXPECT_THROW(read(good + "x"), MalformedHeaderError);
}
