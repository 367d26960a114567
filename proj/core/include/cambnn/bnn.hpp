#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cambnn/cam.hpp"
#include "cambnn/errors.hpp"

namespace cambnn {

// A vector over {-1, +1}, one int8 per element.
using BinaryVector = std::vector<std::int8_t>;

// Elementwise sign with sign(0) = +1. Throws NumericError on NaN.
BinaryVector binarize(std::span<const float> x);
BinaryVector binarize(std::span<const double> x);

// Thresholded binarization: +1 where x >= threshold, else -1.
BinaryVector binarize(std::span<const float> x, double threshold);

// +1 -> 1, -1 -> 0 and back.
RowPattern pack_pattern(const BinaryVector& v);
BinaryVector unpack_pattern(const RowPattern& p);

// +1 when equal, -1 when different; popcount-backed over packed words.
int xnor_dot(const BinaryVector& a, const BinaryVector& b);

// One binarized fully connected layer. Weights are {-1, +1}, row-major
// (out_dim rows of in_dim), one folded additive constant per neuron.
struct BinaryLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<std::int8_t> weights;
  std::vector<std::int16_t> bn_constants;

  std::int8_t weight(std::size_t neuron, std::size_t input) const {
    return weights[neuron * in_dim + input];
  }
  std::span<const std::int8_t> weight_row(std::size_t neuron) const {
    return {weights.data() + neuron * in_dim, in_dim};
  }
  void validate() const;  // throws ShapeError / InputError
};

using BnnModel = std::vector<BinaryLayer>;

void validate_model(const BnnModel& model);

// Pre-activation score of each neuron: s_j = sum_i xnor(w_ji, x_i) + C_j.
std::vector<int> layer_scores(const BinaryLayer& layer, const BinaryVector& x);

// Activation: +1 where s_j > 0, else -1 (a zero score is -1).
BinaryVector layer_forward(const BinaryLayer& layer, const BinaryVector& x);

// Runs every layer; returns the final layer's activations.
BinaryVector model_forward(const BnnModel& model, const BinaryVector& x);

// Final layer's scores (the software classification baseline ranks these).
std::vector<int> model_scores(const BnnModel& model, const BinaryVector& x);

// Class with the highest final score, ties to the lowest index.
int argmax_class(const std::vector<int>& scores);

// Per-neuron batch normalization as learned, before folding.
struct BatchNormParams {
  double gamma = 1.0;
  double beta = 0.0;
  double mu = 0.0;      // mean of the pre-activation over the training set
  double sigma2 = 1.0;  // variance of the same
  double epsilon = 1e-5;
  double bias = 0.0;    // layer bias absorbed with the rest
};

struct FoldedBn {
  int c = 0;
  bool negate_weights = false;
};

// Folds batch norm plus bias into a single integer constant so that
// sign(gamma * (s + bias - mu) / sqrt(sigma2 + eps) + beta) equals
// sign(s' + c), with s' the (possibly negated) weight correlation and the
// real-valued decision threshold rounded to the nearest integer. |c| is
// clamped to bn_cap. Throws DegenerateBnError when gamma == 0.
FoldedBn fold_batch_norm(const BatchNormParams& bn, int bn_cap = 64);

}  // namespace cambnn
