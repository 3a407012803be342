#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "sorel/dataset.hpp"

using namespace sorel;
namespace fs = std::filesystem;

namespace {

class TempFile {
 public:
  explicit TempFile(const std::string& text) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("sorel_dataset_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".csv");
    std::ofstream(path_) << text;
  }
  ~TempFile() { fs::remove(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string error_of(const fs::path& p) {
  try {
    load_csv(p);
  } catch (const dataset_error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(LoadCsv, ReadsFeaturesAndTarget) {
  TempFile f("x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n");
  const Dataset d = load_csv(f.path());
  EXPECT_EQ(d.n(), 3);
  EXPECT_EQ(d.d(), 2);
  EXPECT_EQ(d.features(1, 1), 5.0);
  EXPECT_EQ(d.targets[2], 9.0);
}

TEST(LoadCsv, NonNumericCellNamesRowAndColumn) {
  TempFile f("x1,x2,y\n1,2,3\n4,abc,6\n");
  const std::string msg = error_of(f.path());
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("x2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("abc"), std::string::npos) << msg;
}

TEST(LoadCsv, EmptyFileHasNoDataRows) {
  TempFile empty("");
  EXPECT_NE(error_of(empty.path()).find("no data rows"), std::string::npos);
  TempFile header_only("a,b\n");
  EXPECT_NE(error_of(header_only.path()).find("no data rows"), std::string::npos);
}

TEST(LoadCsv, RejectsMalformedFiles) {
  TempFile ragged("a,b,c\n1,2,3\n1,2\n");
  EXPECT_NE(error_of(ragged.path()).find("row 2"), std::string::npos);
  TempFile narrow("y\n1\n");
  EXPECT_FALSE(error_of(narrow.path()).empty());
  EXPECT_FALSE(error_of("/nonexistent/sorel/data.csv").empty());
}

TEST(LoadCsv, ToleratesWhitespaceAndBlankLines) {
  TempFile f("a , y\n 1.5 , -2e-1 \n\n3,4\n");
  const Dataset d = load_csv(f.path());
  EXPECT_EQ(d.n(), 2);
  EXPECT_DOUBLE_EQ(d.targets[0], -0.2);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  const Dataset raw = make_synthetic({.n = 50, .d = 4, .noise = 1.0, .seed = 3, .feature_scale = 7.0});
  const auto s = standardize(raw);
  for (Index j = 0; j < 4; ++j) {
    const auto col = s.data.features.col(j);
    EXPECT_LE(std::abs(col.mean()), 1e-12);
    EXPECT_NEAR(col.squaredNorm() / 50.0, 1.0, 1e-12);
  }
  EXPECT_EQ(s.data.targets, raw.targets);
  // Inverting the transform recovers the input.
  for (Index j = 0; j < 4; ++j)
    for (Index i = 0; i < 50; ++i)
      EXPECT_NEAR(s.data.features(i, j) * s.scales[j] + s.means[j], raw.features(i, j), 1e-12);
}

TEST(Standardize, ConstantColumnIsCenteredWithWarning) {
  Dataset raw;
  raw.features.resize(3, 2);
  raw.features << 1, 5, 2, 5, 3, 5;
  raw.targets = Vector::Zero(3);
  std::string seen;
  auto saved = warning_handler();
  warning_handler() = [&](std::string_view m) { seen = std::string(m); };
  const auto s = standardize(raw);
  warning_handler() = saved;
  EXPECT_EQ(s.data.features.col(1), Vector::Zero(3));
  EXPECT_NE(seen.find("column 2"), std::string::npos);
}

TEST(Standardize, NeedsTwoRows) {
  Dataset raw;
  raw.features = Matrix::Ones(1, 2);
  raw.targets = Vector::Ones(1);
  EXPECT_THROW(standardize(raw), std::invalid_argument);
}

TEST(Synthetic, DeterministicInSeed) {
  const SyntheticSpec spec{.n = 30, .d = 3, .noise = 0.5, .seed = 9};
  const Dataset a = make_synthetic(spec), b = make_synthetic(spec);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.targets, b.targets);
  SyntheticSpec other = spec;
  other.seed = 10;
  EXPECT_NE(make_synthetic(other).targets, a.targets);
}
