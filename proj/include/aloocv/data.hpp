#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "aloocv/types.hpp"

namespace aloocv {

/// Deterministic random source: a fixed, standard-specified engine
/// (mt19937_64) with hand-rolled uniform/normal transforms, so the same
/// seed yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via the Marsaglia polar transform.
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t uniform_int(std::uint64_t bound);

  /// Derives an independent stream, for per-size or per-task seeding.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;  // output sequence fixed by the standard
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct SynthData {
  Dataset dataset;
  Vector theta_star;  // generating coefficients
};

/// Standard-normal features; responses theta*^T x + noise. theta* is
/// zero on the first p - n_relevant coordinates and standard normal on
/// the rest.
SynthData synth_ridge(Index n, Index p, Index n_relevant, double noise_var,
                      std::uint64_t seed);

/// Sparse, coordinate-weighted coefficients: theta*_k = k * rho_k *
/// psi_k with rho_k Bernoulli(1/2) and psi_k standard normal (k
/// 1-based), so half the coordinates vanish in expectation and the rest
/// grow linearly in their index.
SynthData synth_elastic(Index n, Index p, std::uint64_t seed,
                        double noise_var = 0.1);

/// Standard-normal features; coefficients scaled by 1/sqrt(p) so the
/// margin theta*^T x stays order one at any width. Labels drawn
/// Bernoulli with success probability sigmoid(theta*^T x).
SynthData synth_logistic(Index n, Index p, std::uint64_t seed);

/// Reads a rectangular numeric CSV with a header row. The named label
/// column becomes the response; every other column is a feature, in
/// header order. With `binarize` = (a, b), only rows whose label cell
/// equals a or b are kept, mapped to 0 and 1.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::optional<std::pair<std::string, std::string>>&
                     binarize = std::nullopt);

/// Writes features as f0..f{p-1} plus the label column, with full
/// double-precision round-trip formatting.
void save_csv(const Dataset& data, const std::string& path,
              const std::string& label_column = "y");

}  // namespace aloocv
