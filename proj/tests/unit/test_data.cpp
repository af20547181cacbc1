#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aloocv/data.hpp"
#include "aloocv/models.hpp"
#include "aloocv/solver.hpp"
#include "aloocv/types.hpp"
#include "oracles.hpp"

namespace {

using namespace aloocv;

std::string temp_csv(const std::string& stem) {
  const auto dir = std::filesystem::temp_directory_path();
  return (dir / (stem + ".csv")).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

struct FileGuard {
  std::string path;
  ~FileGuard() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

bool identical(const SynthData& a, const SynthData& b) {
  return (a.dataset.features().array() == b.dataset.features().array())
             .all() &&
         (a.dataset.responses().array() == b.dataset.responses().array())
             .all() &&
         (a.theta_star.array() == b.theta_star.array()).all();
}

}  // namespace

TEST_CASE("ridge generator honors its shape and sparsity contract") {
  const SynthData synth = synth_ridge(150, 50, 10, 0.1, 42);
  CHECK(synth.dataset.n() == 150);
  CHECK(synth.dataset.p() == 50);
  REQUIRE(synth.theta_star.size() == 50);
  for (Index j = 0; j < 40; ++j) CHECK(synth.theta_star[j] == 0.0);
  for (Index j = 40; j < 50; ++j) CHECK(synth.theta_star[j] != 0.0);
  CHECK(synth.dataset.features().allFinite());

  CHECK(identical(synth, synth_ridge(150, 50, 10, 0.1, 42)));
  CHECK(!identical(synth, synth_ridge(150, 50, 10, 0.1, 43)));
}

TEST_CASE("noiseless responses let least squares recover the truth") {
  const SynthData synth = synth_ridge(60, 8, 8, 0.0, 5);
  const Dataset& data = synth.dataset;

  const Vector ls = testing::least_squares(data);
  CHECK((ls - synth.theta_star).lpNorm<Eigen::Infinity>() <= 1e-6);

  const auto objective = make_objective(
      ridge_diagonal(8), LambdaVector(Vector::Constant(8, 1e-8)));
  const FittedModel fitted = fit(data, objective);
  REQUIRE(fitted.converged);
  CHECK((fitted.theta_hat - synth.theta_star).lpNorm<Eigen::Infinity>() <=
        1e-6);
}

TEST_CASE("elastic coefficients are half zero and index-weighted") {
  int zeros = 0, total = 0;
  double sum_sq = 0.0, low_abs = 0.0, high_abs = 0.0;
  int nonzero = 0, low_count = 0, high_count = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SynthData synth = synth_elastic(5, 50, seed);
    for (Index j = 0; j < 50; ++j) {
      const double value = synth.theta_star[j];
      ++total;
      if (value == 0.0) {
        ++zeros;
        continue;
      }
      ++nonzero;
      const double unit = value / static_cast<double>(j + 1);
      sum_sq += unit * unit;
      if (j < 25) {
        low_abs += std::abs(value);
        ++low_count;
      } else {
        high_abs += std::abs(value);
        ++high_count;
      }
    }
  }
  const double zero_fraction = static_cast<double>(zeros) / total;
  CHECK(zero_fraction >= 0.45);
  CHECK(zero_fraction <= 0.55);

  // Dividing out the index leaves a standard normal.
  const double unit_variance = sum_sq / nonzero;
  CHECK(unit_variance >= 0.9);
  CHECK(unit_variance <= 1.1);
  // Raw magnitudes therefore grow with the index.
  CHECK(high_abs / high_count > 2.0 * (low_abs / low_count));

  CHECK(identical(synth_elastic(40, 8, 1), synth_elastic(40, 8, 1)));
  CHECK(identical(synth_logistic(30, 4, 9), synth_logistic(30, 4, 9)));
}

TEST_CASE("logistic generator emits valid labels and bounded coefficients") {
  const SynthData synth = synth_logistic(200, 16, 3);
  CHECK(synth.dataset.n() == 200);
  CHECK(synth.dataset.p() == 16);
  int ones = 0;
  for (Index i = 0; i < 200; ++i) {
    const double y = synth.dataset.responses()[i];
    CHECK((y == 0.0 || y == 1.0));
    ones += y == 1.0;
  }
  // Margins are centered, so neither class can dominate completely.
  CHECK(ones > 20);
  CHECK(ones < 180);
}

TEST_CASE("feature moments settle near standard normal at large n") {
  const Index n = 10000;
  const std::vector<SynthData> generated = {
      synth_ridge(n, 5, 2, 0.1, 31), synth_elastic(n, 5, 31),
      synth_logistic(n, 5, 31)};
  for (const SynthData& synth : generated) {
    for (Index j = 0; j < 5; ++j) {
      const auto col = synth.dataset.features().col(j);
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / (n - 1);
      CHECK(std::abs(mean) <= 0.05);
      CHECK(std::abs(var - 1.0) <= 0.05);
    }
  }
}

TEST_CASE("random source is deterministic, bounded, and splittable") {
  Rng a(99), b(99);
  for (int k = 0; k < 200; ++k) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int k = 0; k < 200; ++k) {
    const auto v = a.uniform_int(6);
    CHECK(v == b.uniform_int(6));
    CHECK(v < 6);
  }
  for (int k = 0; k < 50; ++k) CHECK(a.normal() == b.normal());
  CHECK_THROWS_AS(a.uniform_int(0), ValidationError);

  // Derived streams differ from each other and from the base stream.
  const auto s1 = Rng::derive_seed(7, 100);
  const auto s2 = Rng::derive_seed(7, 200);
  CHECK(s1 != s2);
  Rng base(7), derived(s1);
  bool any_difference = false;
  for (int k = 0; k < 16; ++k) {
    any_difference = any_difference || base.uniform() != derived.uniform();
  }
  CHECK(any_difference);
}

TEST_CASE("handwritten csv loads with the declared shape") {
  const FileGuard guard{temp_csv("aloocv_fixture")};
  write_file(guard.path,
             "a,y,b\n"
             "1.5,10,-2\n"
             "0.25,20,4.5\n"
             "-3,30,0\n");
  const Dataset data = load_csv(guard.path, "y");
  REQUIRE(data.n() == 3);
  REQUIRE(data.p() == 2);
  // Feature order follows the header with the label column removed.
  CHECK(data.features()(0, 0) == 1.5);
  CHECK(data.features()(0, 1) == -2.0);
  CHECK(data.features()(1, 0) == 0.25);
  CHECK(data.features()(1, 1) == 4.5);
  CHECK(data.features()(2, 0) == -3.0);
  CHECK(data.responses()[0] == 10.0);
  CHECK(data.responses()[2] == 30.0);
}

TEST_CASE("binarize keeps only the named labels and maps them to 0/1") {
  const FileGuard guard{temp_csv("aloocv_binarize")};
  write_file(guard.path,
             "pix0,pix1,label\n"
             "0.1,0.2,2\n"
             "0.3,0.4,7\n"
             "0.5,0.6,3\n"
             "0.7,0.8,2\n"
             "0.9,1.0,5\n");
  const Dataset data =
      load_csv(guard.path, "label", std::make_pair(std::string("2"),
                                                   std::string("3")));
  REQUIRE(data.n() == 3);
  CHECK(data.responses()[0] == 0.0);  // label 2
  CHECK(data.responses()[1] == 1.0);  // label 3
  CHECK(data.responses()[2] == 0.0);  // label 2
  CHECK(data.features()(1, 0) == 0.5);
  CHECK(data.features()(2, 1) == 0.8);
}

TEST_CASE("save and load round-trip bit for bit") {
  const SynthData synth = synth_ridge(25, 4, 4, 1.0, 77);
  const FileGuard guard{temp_csv("aloocv_roundtrip")};
  save_csv(synth.dataset, guard.path);
  const Dataset loaded = load_csv(guard.path, "y");
  REQUIRE(loaded.n() == synth.dataset.n());
  REQUIRE(loaded.p() == synth.dataset.p());
  CHECK((loaded.features().array() == synth.dataset.features().array()).all());
  CHECK((loaded.responses().array() == synth.dataset.responses().array())
            .all());
}

TEST_CASE("csv errors carry enough context to find the problem") {
  const FileGuard bad_cell{temp_csv("aloocv_badcell")};
  write_file(bad_cell.path, "a,y\n1,2\npotato,4\n");
  CHECK_THROWS_WITH_AS(load_csv(bad_cell.path, "y"),
                       doctest::Contains("line 3"), ValidationError);

  const FileGuard ragged{temp_csv("aloocv_ragged")};
  write_file(ragged.path, "a,b,y\n1,2,3\n4,5\n");
  CHECK_THROWS_WITH_AS(load_csv(ragged.path, "y"),
                       doctest::Contains("line 3"), ValidationError);

  const FileGuard fine{temp_csv("aloocv_fine")};
  write_file(fine.path, "a,y\n1,2\n3,4\n");
  CHECK_THROWS_WITH_AS(load_csv(fine.path, "z"),
                       doctest::Contains("no column named 'z'"),
                       ValidationError);
  CHECK_THROWS_AS(load_csv(temp_csv("aloocv_does_not_exist"), "y"),
                  ValidationError);

  // Filtering away all rows is an error, not an empty dataset.
  const FileGuard filtered{temp_csv("aloocv_filtered")};
  write_file(filtered.path, "a,label\n1,9\n2,9\n");
  CHECK_THROWS_AS(load_csv(filtered.path, "label",
                           std::make_pair(std::string("2"), std::string("3"))),
                  ValidationError);
}

TEST_CASE("generator arguments are validated") {
  CHECK_THROWS_AS(synth_ridge(1, 5, 2, 0.1, 0), ValidationError);
  CHECK_THROWS_AS(synth_ridge(10, 0, 0, 0.1, 0), ValidationError);
  CHECK_THROWS_AS(synth_ridge(10, 5, 6, 0.1, 0), ValidationError);
  CHECK_THROWS_AS(synth_ridge(10, 5, 2, -0.1, 0), ValidationError);
  CHECK_THROWS_AS(synth_elastic(10, 5, 0, -1.0), ValidationError);
  CHECK_THROWS_AS(synth_logistic(1, 5, 0), ValidationError);
}
