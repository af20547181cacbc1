#include "aloocv/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace aloocv {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() {
  // Top 53 bits, so every value is an exact multiple of 2^-53.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t Rng::uniform_int(std::uint64_t bound) {
  if (bound == 0) throw ValidationError("rng: bound must be positive");
  // Rejection below the largest multiple of bound, so no modulo bias.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

RowMatrix draw_features(Rng& rng, Index n, Index p) {
  RowMatrix x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  return x;
}

}  // namespace

SynthData synth_ridge(Index n, Index p, Index n_relevant, double noise_var,
                      std::uint64_t seed) {
  if (n < 2) throw ValidationError("synth_ridge: n must be at least 2");
  if (p < 1) throw ValidationError("synth_ridge: p must be positive");
  if (n_relevant < 0 || n_relevant > p) {
    throw ValidationError("synth_ridge: n_relevant must be in [0, p]");
  }
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
    throw ValidationError("synth_ridge: noise_var must be nonnegative");
  }
  Rng rng(seed);
  // Draw order: coefficients, then features row by row, then noise.
  Vector theta_star = Vector::Zero(p);
  for (Index j = p - n_relevant; j < p; ++j) theta_star[j] = rng.normal();
  RowMatrix x = draw_features(rng, n, p);
  const double noise_sd = std::sqrt(noise_var);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = x.row(i).dot(theta_star) + noise_sd * rng.normal();
  }
  return SynthData{Dataset(std::move(x), std::move(y)),
                   std::move(theta_star)};
}

SynthData synth_elastic(Index n, Index p, std::uint64_t seed,
                        double noise_var) {
  if (n < 2) throw ValidationError("synth_elastic: n must be at least 2");
  if (p < 1) throw ValidationError("synth_elastic: p must be positive");
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
    throw ValidationError("synth_elastic: noise_var must be nonnegative");
  }
  Rng rng(seed);
  // Per coordinate (1-based k): Bernoulli keep flag, then the normal
  // factor. Both are drawn even for dropped coordinates so that a
  // coordinate's draws do not depend on earlier flags.
  Vector theta_star(p);
  for (Index j = 0; j < p; ++j) {
    const double keep = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const double psi = rng.normal();
    theta_star[j] = static_cast<double>(j + 1) * keep * psi;
  }
  RowMatrix x = draw_features(rng, n, p);
  const double noise_sd = std::sqrt(noise_var);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = x.row(i).dot(theta_star) + noise_sd * rng.normal();
  }
  return SynthData{Dataset(std::move(x), std::move(y)),
                   std::move(theta_star)};
}

SynthData synth_logistic(Index n, Index p, std::uint64_t seed) {
  if (n < 2) throw ValidationError("synth_logistic: n must be at least 2");
  if (p < 1) throw ValidationError("synth_logistic: p must be positive");
  Rng rng(seed);
  // Coefficients scaled so the margin theta*^T x is order one whatever
  // p is; unscaled normals make the labels nearly deterministic and the
  // per-sample influence heavy-tailed.
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  Vector theta_star(p);
  for (Index j = 0; j < p; ++j) theta_star[j] = scale * rng.normal();
  RowMatrix x = draw_features(rng, n, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double prob = sigmoid(x.row(i).dot(theta_star));
    y[i] = rng.uniform() < prob ? 1.0 : 0.0;
  }
  return SynthData{Dataset(std::move(x), std::move(y)),
                   std::move(theta_star)};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

double parse_cell(std::string_view cell, std::size_t line_number,
                  std::string_view column) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw ValidationError("csv: line " + std::to_string(line_number) +
                          ", column '" + std::string(column) +
                          "': cannot parse '" + std::string(cell) + "'");
  }
  return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::optional<std::pair<std::string, std::string>>&
                     binarize) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("csv: '" + path + "' is empty");
  }
  const std::vector<std::string_view> header_cells = split_line(line);
  std::vector<std::string> header(header_cells.begin(), header_cells.end());
  std::optional<std::size_t> label_index;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      if (label_index) {
        throw ValidationError("csv: duplicate column '" + label_column + "'");
      }
      label_index = c;
    }
  }
  if (!label_index) {
    throw ValidationError("csv: no column named '" + label_column + "'");
  }
  if (header.size() < 2) {
    throw ValidationError("csv: no feature columns");
  }

  std::vector<double> features;
  std::vector<double> labels;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const std::vector<std::string_view> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError(
          "csv: line " + std::to_string(line_number) + " has " +
          std::to_string(cells.size()) + " cells, header has " +
          std::to_string(header.size()));
    }
    if (binarize) {
      const std::string_view label_cell = cells[*label_index];
      if (label_cell == binarize->first) {
        labels.push_back(0.0);
      } else if (label_cell == binarize->second) {
        labels.push_back(1.0);
      } else {
        continue;  // class filter
      }
    } else {
      labels.push_back(
          parse_cell(cells[*label_index], line_number, label_column));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == *label_index) continue;
      features.push_back(parse_cell(cells[c], line_number, header[c]));
    }
  }

  const Index n = static_cast<Index>(labels.size());
  const Index p = static_cast<Index>(header.size() - 1);
  if (n == 0) {
    throw ValidationError("csv: '" + path + "' has no usable data rows");
  }
  RowMatrix x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = features[i * p + j];
  Vector y = Eigen::Map<const Vector>(labels.data(), n);
  return Dataset(std::move(x), std::move(y));
}

void save_csv(const Dataset& data, const std::string& path,
              const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw ValidationError("csv: cannot open '" + path + "' for write");
  for (Index j = 0; j < data.p(); ++j) out << 'f' << j << ',';
  out << label_column << '\n';
  char buffer[32];
  auto write_cell = [&](double v) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    out << buffer;
  };
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.p(); ++j) {
      write_cell(data.features()(i, j));
      out << ',';
    }
    write_cell(data.y(i));
    out << '\n';
  }
  if (!out) throw ValidationError("csv: write to '" + path + "' failed");
}

}  // namespace aloocv
