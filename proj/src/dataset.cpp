#include "aloocv/types.hpp"

namespace aloocv {

Dataset::Dataset(RowMatrix features, Vector responses)
    : features_(std::move(features)), responses_(std::move(responses)) {
  if (features_.rows() != responses_.size()) {
    throw ValidationError("dataset: feature rows and response length differ");
  }
  if (features_.rows() < 2) {
    throw ValidationError("dataset: need at least 2 samples");
  }
  if (features_.cols() < 1) {
    throw ValidationError("dataset: need at least 1 feature");
  }
  if (!features_.allFinite() || !responses_.allFinite()) {
    throw ValidationError("dataset: non-finite entry");
  }
}

Dataset Dataset::from_samples(const std::vector<Sample>& samples) {
  if (samples.empty()) {
    throw ValidationError("dataset: no samples");
  }
  const Index n = static_cast<Index>(samples.size());
  const Index p = samples.front().x.size();
  RowMatrix features(n, p);
  Vector responses(n);
  for (Index i = 0; i < n; ++i) {
    if (samples[i].x.size() != p) {
      throw ValidationError("dataset: inconsistent feature dimension");
    }
    features.row(i) = samples[i].x.transpose();
    responses[i] = samples[i].y;
  }
  return Dataset(std::move(features), std::move(responses));
}

Dataset Dataset::with_response(Index i, double value) const {
  if (i < 0 || i >= n()) {
    throw ValidationError("dataset: sample index out of range");
  }
  Vector responses = responses_;
  responses[i] = value;
  return Dataset(features_, std::move(responses));
}

LambdaVector::LambdaVector(Vector values) : values_(std::move(values)) {
  if (!values_.allFinite()) {
    throw ValidationError("lambda: non-finite entry");
  }
  if ((values_.array() < 0.0).any()) {
    throw ValidationError("lambda: negative entry");
  }
}

LambdaVector LambdaVector::constant(Index m, double value) {
  return LambdaVector(Vector::Constant(m, value));
}

}  // namespace aloocv
