#include "cambnn/bnn.hpp"

#include <cmath>

namespace cambnn {

namespace {

template <typename T>
BinaryVector binarize_sign(std::span<const T> x) {
  BinaryVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(static_cast<double>(x[i]))) {
      throw NumericError("cannot binarize NaN at index " + std::to_string(i));
    }
    out[i] = x[i] >= 0 ? std::int8_t{1} : std::int8_t{-1};
  }
  return out;
}

}  // namespace

BinaryVector binarize(std::span<const float> x) { return binarize_sign(x); }
BinaryVector binarize(std::span<const double> x) { return binarize_sign(x); }

BinaryVector binarize(std::span<const float> x, double threshold) {
  BinaryVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) {
      throw NumericError("cannot binarize NaN at index " + std::to_string(i));
    }
    out[i] = x[i] >= threshold ? std::int8_t{1} : std::int8_t{-1};
  }
  return out;
}

RowPattern pack_pattern(const BinaryVector& v) {
  RowPattern p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 1) {
      p.set_bit(i, true);
    } else if (v[i] != -1) {
      throw InputError("binary vector holds " + std::to_string(v[i]) +
                       " at index " + std::to_string(i));
    }
  }
  return p;
}

BinaryVector unpack_pattern(const RowPattern& p) {
  BinaryVector v(p.width());
  for (std::size_t i = 0; i < p.width(); ++i) {
    v[i] = p.bit(i) ? std::int8_t{1} : std::int8_t{-1};
  }
  return v;
}

int xnor_dot(const BinaryVector& a, const BinaryVector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("xnor over mismatched lengths " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
  int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<int>(a[i]) * static_cast<int>(b[i]);
  }
  return s;
}

void BinaryLayer::validate() const {
  if (in_dim == 0 || out_dim == 0) {
    throw ShapeError("layer dimensions must be positive");
  }
  if (weights.size() != in_dim * out_dim) {
    throw ShapeError("layer expects " + std::to_string(in_dim * out_dim) +
                     " weights, holds " + std::to_string(weights.size()));
  }
  if (bn_constants.size() != out_dim) {
    throw ShapeError("layer expects " + std::to_string(out_dim) +
                     " constants, holds " + std::to_string(bn_constants.size()));
  }
  for (auto w : weights) {
    if (w != 1 && w != -1) {
      throw InputError("layer weight outside {-1, +1}");
    }
  }
}

void validate_model(const BnnModel& model) {
  if (model.empty()) {
    throw ShapeError("model has no layers");
  }
  for (std::size_t l = 0; l < model.size(); ++l) {
    model[l].validate();
    if (l > 0 && model[l].in_dim != model[l - 1].out_dim) {
      throw ShapeError("layer " + std::to_string(l) + " fan-in " +
                       std::to_string(model[l].in_dim) +
                       " does not meet previous fan-out " +
                       std::to_string(model[l - 1].out_dim));
    }
  }
}

std::vector<int> layer_scores(const BinaryLayer& layer, const BinaryVector& x) {
  if (x.size() != layer.in_dim) {
    throw ShapeError("input length " + std::to_string(x.size()) +
                     " does not match layer fan-in " +
                     std::to_string(layer.in_dim));
  }
  std::vector<int> scores(layer.out_dim);
  for (std::size_t j = 0; j < layer.out_dim; ++j) {
    const std::int8_t* w = layer.weights.data() + j * layer.in_dim;
    int s = 0;
    for (std::size_t i = 0; i < layer.in_dim; ++i) {
      s += static_cast<int>(w[i]) * static_cast<int>(x[i]);
    }
    scores[j] = s + layer.bn_constants[j];
  }
  return scores;
}

BinaryVector layer_forward(const BinaryLayer& layer, const BinaryVector& x) {
  const auto scores = layer_scores(layer, x);
  BinaryVector out(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    out[j] = scores[j] > 0 ? std::int8_t{1} : std::int8_t{-1};
  }
  return out;
}

BinaryVector model_forward(const BnnModel& model, const BinaryVector& x) {
  if (model.empty()) {
    throw ShapeError("model has no layers");
  }
  BinaryVector h = layer_forward(model.front(), x);
  for (std::size_t l = 1; l < model.size(); ++l) {
    h = layer_forward(model[l], h);
  }
  return h;
}

std::vector<int> model_scores(const BnnModel& model, const BinaryVector& x) {
  if (model.empty()) {
    throw ShapeError("model has no layers");
  }
  BinaryVector h = x;
  for (std::size_t l = 0; l + 1 < model.size(); ++l) {
    h = layer_forward(model[l], h);
  }
  return layer_scores(model.back(), h);
}

int argmax_class(const std::vector<int>& scores) {
  if (scores.empty()) {
    throw InputError("argmax over an empty score vector");
  }
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = static_cast<int>(c);
  }
  return best;
}

FoldedBn fold_batch_norm(const BatchNormParams& bn, int bn_cap) {
  if (bn.gamma == 0.0) {
    throw DegenerateBnError("batch norm scale of zero cannot be folded");
  }
  if (bn_cap < 0) {
    throw InputError("bn_cap must be non-negative");
  }
  const double sigma_hat = std::sqrt(bn.sigma2 + bn.epsilon);
  if (!std::isfinite(sigma_hat)) {
    throw NumericError("batch norm variance is not finite");
  }
  FoldedBn folded;
  double c;
  if (bn.gamma > 0.0) {
    c = bn.beta * sigma_hat / bn.gamma - bn.mu + bn.bias;
    folded.negate_weights = false;
  } else {
    c = bn.mu - bn.bias - bn.beta * sigma_hat / bn.gamma;
    folded.negate_weights = true;
  }
  if (!std::isfinite(c)) {
    throw NumericError("folded constant is not finite");
  }
  const double clamped =
      std::min(std::max(std::round(c), -static_cast<double>(bn_cap)),
               static_cast<double>(bn_cap));
  folded.c = static_cast<int>(clamped);
  return folded;
}

}  // namespace cambnn
