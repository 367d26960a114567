#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "cambnn/bnn.hpp"
#include "cambnn/data_io.hpp"

namespace cambnn {

// Backward surrogate for the sign activations: the gradient of
// hard-tanh (identity inside [-1, 1], zero outside).
enum class TrainActivation : std::uint8_t {
  HardTanh,
};

// The defaults are the shipped MNIST recipe: together with a 0.25 input
// binarization threshold they reach about 93.8% software top-1 on the
// 784-128-10 network, and the mapped 33-pass sweep lands within a few
// tenths of that.
struct TrainConfig {
  int epochs = 85;
  std::size_t batch_size = 100;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double lr_decay = 0.97;  // per-epoch multiplier
  double bn_epsilon = 1e-5;
  std::uint64_t seed = 6;
  int bn_cap = 64;
  TrainActivation activation = TrainActivation::HardTanh;
};

// Straight-through estimator trainer for binarized MLPs.
//
// Forward binarizes weights and hidden activations to {-1, +1}; backward
// treats both binarizations as identity inside [-1, 1] and zero outside
// (the hard-tanh surrogate), so gradients flow through real-valued shadow
// weights, which are clipped to [-1, 1] after every step. Each layer
// carries batch normalization; the loss is softmax cross entropy over the
// last layer's normalized outputs. Optimizer: SGD with momentum, optional
// per-epoch learning rate decay. Single-threaded and bitwise reproducible
// per seed.
//
// The smooth flag on the check hooks replaces both binarizations with
// hard-tanh, making the network differentiable so the shared backward
// pass can be validated against finite differences.
class Trainer {
 public:
  // dims = {input, hidden..., classes}, at least two entries.
  Trainer(std::vector<std::size_t> dims, TrainConfig cfg);
  ~Trainer();
  Trainer(Trainer&&) noexcept;
  Trainer& operator=(Trainer&&) noexcept;

  void fit(const BinaryDataset& train, std::ostream* log = nullptr);

  // Deployable model: weights binarized, batch norm folded into integer
  // constants using exact statistics of a full pass over `stats_source`
  // through the already-binarized preceding layers.
  BnnModel extract(const BinaryDataset& stats_source) const;

  // Numeric check hooks over dataset rows [begin, begin + count).
  double batch_loss(const BinaryDataset& data, std::size_t begin,
                    std::size_t count, bool smooth) const;
  void compute_gradients(const BinaryDataset& data, std::size_t begin,
                         std::size_t count, bool smooth);
  double weight(std::size_t layer, std::size_t neuron, std::size_t input) const;
  void set_weight(std::size_t layer, std::size_t neuron, std::size_t input,
                  double value);
  double weight_gradient(std::size_t layer, std::size_t neuron,
                         std::size_t input) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// fit + extract in one call.
BnnModel train_model(const BinaryDataset& train, const std::vector<std::size_t>& dims,
                     const TrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace cambnn
