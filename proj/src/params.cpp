#include "dkse/params.hpp"

#include <cmath>

#include "dkse/util.hpp"

namespace dkse {
namespace {

std::array<size_t, kTensorCount> tensor_sizes(const TensorShapes& s) {
  size_t n = static_cast<size_t>(s.nodes), r = static_cast<size_t>(s.relations);
  size_t q = static_cast<size_t>(s.queries), d = static_cast<size_t>(s.dim);
  return {n * d, r * d, q * d, d * d, d, d, 1};
}

}  // namespace

TensorPack ParameterSet::zeros(const TensorShapes& shape) {
  TensorPack p;
  auto sizes = tensor_sizes(shape);
  for (int t = 0; t < kTensorCount; ++t) p[t].assign(sizes[t], 0.0);
  return p;
}

ParameterSet ParameterSet::init(const TensorShapes& shape, uint64_t seed) {
  check(shape.dim > 0, "embedding dimension must be positive");
  check(shape.queries >= 1, "query bank needs at least one query");
  check(shape.nodes >= 0 && shape.relations >= 0, "negative tensor shape");

  ParameterSet p;
  p.shape = shape;
  p.tensors = zeros(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.dim));
  Rng rng(seed);
  for (TensorId t : {kNodeEmb, kRelEmb, kQueryBank, kSelectorW, kEvaluatorW})
    for (double& x : p.tensors[t]) x = rng.uniform(-bound, bound);
  return p;
}

std::span<const double> ParameterSet::row(TensorId t, int32_t i) const {
  size_t d = static_cast<size_t>(shape.dim);
  size_t off = static_cast<size_t>(i) * d;
  check(i >= 0 && off + d <= tensors[t].size(), "tensor row out of range");
  return {tensors[t].data() + off, d};
}

bool ParameterSet::all_finite() const {
  for (const auto& t : tensors)
    for (double x : t)
      if (!std::isfinite(x)) return false;
  return true;
}

size_t ParameterSet::param_count() const {
  size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

}  // namespace dkse
