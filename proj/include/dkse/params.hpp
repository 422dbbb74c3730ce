#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dkse/rng.hpp"

namespace dkse {

enum TensorId {
  kNodeEmb = 0,   // nodes x d
  kRelEmb,        // relations x d (interact relation included)
  kQueryBank,     // queries x d
  kSelectorW,     // d x d, row-major
  kSelectorB,     // d
  kEvaluatorW,    // d
  kEvaluatorB,    // 1
  kTensorCount
};

// One buffer per TensorId; shared shape between parameters, gradients, and
// optimizer moments so they can be iterated uniformly.
using TensorPack = std::array<std::vector<double>, kTensorCount>;

struct TensorShapes {
  int32_t nodes = 0;
  int32_t relations = 0;
  int32_t queries = 0;
  int32_t dim = 0;
  bool operator==(const TensorShapes&) const = default;
};

struct ParameterSet {
  TensorShapes shape;
  TensorPack tensors;

  // Embedding-like tensors drawn from U[-1/sqrt(d), 1/sqrt(d)], biases zero.
  static ParameterSet init(const TensorShapes& shape, uint64_t seed);
  static TensorPack zeros(const TensorShapes& shape);

  std::span<const double> node(int32_t i) const { return row(kNodeEmb, i); }
  std::span<const double> relation(int32_t r) const { return row(kRelEmb, r); }
  std::span<const double> query(int32_t i) const { return row(kQueryBank, i); }
  std::span<const double> selector_w() const { return tensors[kSelectorW]; }
  std::span<const double> selector_b() const { return tensors[kSelectorB]; }
  std::span<const double> evaluator_w() const { return tensors[kEvaluatorW]; }
  double evaluator_b() const { return tensors[kEvaluatorB][0]; }

  bool all_finite() const;
  size_t param_count() const;

 private:
  std::span<const double> row(TensorId t, int32_t i) const;
};

}  // namespace dkse
