#include "cambnn/training.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <ostream>

#include "cambnn/rng.hpp"

namespace cambnn {

namespace {

using Matrix = Eigen::MatrixXd;
using Array = Eigen::ArrayXXd;
using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

Matrix binarized(const Matrix& w) {
  return (w.array() >= 0.0).select(Matrix::Ones(w.rows(), w.cols()),
                                   -Matrix::Ones(w.rows(), w.cols()));
}

Matrix hardtanh(const Matrix& w) {
  return w.array().min(1.0).max(-1.0).matrix();
}

}  // namespace

struct Trainer::Impl {
  struct Layer {
    Matrix w;     // out x in shadow weights
    Matrix w_vel;
    RowArray gamma, beta;
    RowArray gamma_vel, beta_vel;

    // Last forward pass (batch rows).
    Matrix input;    // B x in
    Matrix used_w;   // binarized or hard-tanh weights of that pass
    Matrix preact;   // B x out
    RowArray mu, inv_std;
    Matrix xhat;
    Matrix y;

    // Last backward pass.
    Matrix w_grad;
    RowArray gamma_grad, beta_grad;
  };

  std::vector<std::size_t> dims;
  TrainConfig cfg;
  std::vector<Layer> layers;

  Impl(std::vector<std::size_t> dims_in, TrainConfig cfg_in)
      : dims(std::move(dims_in)), cfg(cfg_in) {
    if (dims.size() < 2) {
      throw ShapeError("network needs an input and an output dimension");
    }
    for (auto d : dims) {
      if (d == 0) throw ShapeError("network dimensions must be positive");
    }
    if (cfg.epochs < 0 || cfg.batch_size == 0 || cfg.learning_rate <= 0.0) {
      throw InputError("bad training configuration");
    }
    std::mt19937_64 rng(cfg.seed);
    layers.resize(dims.size() - 1);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = layers[l];
      const auto in = static_cast<Eigen::Index>(dims[l]);
      const auto out = static_cast<Eigen::Index>(dims[l + 1]);
      layer.w.resize(out, in);
      const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
      for (Eigen::Index j = 0; j < out; ++j) {
        for (Eigen::Index i = 0; i < in; ++i) {
          layer.w(j, i) = uniform_real(rng, -limit, limit);
        }
      }
      layer.w_vel = Matrix::Zero(out, in);
      layer.gamma = RowArray::Ones(out);
      layer.beta = RowArray::Zero(out);
      layer.gamma_vel = RowArray::Zero(out);
      layer.beta_vel = RowArray::Zero(out);
    }
  }

  // Gathers dataset rows [begin, begin+count) as a B x width {-1,+1} matrix.
  Matrix gather(const BinaryDataset& data, const std::size_t* order,
                std::size_t begin, std::size_t count) const {
    Matrix x(count, data.width);
    for (std::size_t r = 0; r < count; ++r) {
      const auto row = data.image(order != nullptr ? order[begin + r] : begin + r);
      for (std::size_t i = 0; i < data.width; ++i) {
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = row[i];
      }
    }
    return x;
  }

  // Runs the batch forward, caching everything backward needs.
  // Returns the mean softmax cross entropy against `labels`.
  double forward(const Matrix& x0, const int* labels, bool smooth) {
    const auto batch = x0.rows();
    Matrix act = x0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = layers[l];
      layer.input = act;
      layer.used_w = smooth ? hardtanh(layer.w) : binarized(layer.w);
      layer.preact.noalias() = layer.input * layer.used_w.transpose();
      layer.mu = layer.preact.array().colwise().mean();
      Array centered = layer.preact.array().rowwise() - layer.mu;
      RowArray var = centered.square().colwise().mean();
      layer.inv_std = (var + cfg.bn_epsilon).rsqrt();
      layer.xhat.noalias() = centered.matrix() * layer.inv_std.matrix().asDiagonal();
      layer.y.noalias() = layer.xhat * layer.gamma.matrix().asDiagonal();
      layer.y.array().rowwise() += layer.beta;
      if (l + 1 < layers.size()) {
        act = smooth ? hardtanh(layer.y)
                     : (layer.y.array() > 0.0)
                           .select(Matrix::Ones(batch, layer.y.cols()),
                                   -Matrix::Ones(batch, layer.y.cols()));
      }
    }
    const Matrix& logits = layers.back().y;
    double loss = 0.0;
    for (Eigen::Index r = 0; r < batch; ++r) {
      const double peak = logits.row(r).maxCoeff();
      double lse = 0.0;
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        lse += std::exp(logits(r, c) - peak);
      }
      loss += std::log(lse) - (logits(r, labels[r]) - peak);
    }
    return loss / static_cast<double>(batch);
  }

  // Backward for the cached batch; fills per-layer gradients.
  void backward(const int* labels) {
    const auto batch = layers.front().input.rows();
    const double inv_batch = 1.0 / static_cast<double>(batch);

    // d(loss)/d(logits) of mean softmax cross entropy.
    const Matrix& logits = layers.back().y;
    Matrix dy(batch, logits.cols());
    for (Eigen::Index r = 0; r < batch; ++r) {
      const double peak = logits.row(r).maxCoeff();
      RowArray e = (logits.row(r).array() - peak).exp();
      RowArray p = e / e.sum();
      dy.row(r) = p.matrix() * inv_batch;
      dy(r, labels[r]) -= inv_batch;
    }

    for (std::size_t l = layers.size(); l-- > 0;) {
      auto& layer = layers[l];
      layer.gamma_grad = (dy.array() * layer.xhat.array()).colwise().sum();
      layer.beta_grad = dy.array().colwise().sum();

      // Through batch normalization (batch statistics are inputs too).
      Array dxhat = (dy * layer.gamma.matrix().asDiagonal()).array();
      RowArray mean_dxhat = dxhat.colwise().mean();
      RowArray mean_dxhat_xhat = (dxhat * layer.xhat.array()).colwise().mean();
      Array centered_grad =
          (dxhat.rowwise() - mean_dxhat) -
          (layer.xhat * mean_dxhat_xhat.matrix().asDiagonal()).array();
      Matrix da = centered_grad.matrix() * layer.inv_std.matrix().asDiagonal();

      // Straight-through into the shadow weights: identity inside the clip.
      layer.w_grad.noalias() = da.transpose() * layer.input;
      layer.w_grad.array() *= (layer.w.array().abs() <= 1.0).cast<double>();

      if (l > 0) {
        Matrix dinput = da * layer.used_w;
        // Activation straight-through: pass where |y| of the previous
        // layer is inside the clip.
        auto& prev = layers[l - 1];
        dy = (dinput.array() * (prev.y.array().abs() <= 1.0).cast<double>())
                 .matrix();
      }
    }
  }

  void apply_updates(double lr) {
    for (auto& layer : layers) {
      layer.w_vel = cfg.momentum * layer.w_vel - lr * layer.w_grad;
      layer.w += layer.w_vel;
      layer.w = hardtanh(layer.w);  // shadow weights live in [-1, 1]
      layer.gamma_vel = cfg.momentum * layer.gamma_vel - lr * layer.gamma_grad;
      layer.gamma += layer.gamma_vel;
      layer.beta_vel = cfg.momentum * layer.beta_vel - lr * layer.beta_grad;
      layer.beta += layer.beta_vel;
    }
  }
};

Trainer::Trainer(std::vector<std::size_t> dims, TrainConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(dims), cfg)) {}

Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;
Trainer& Trainer::operator=(Trainer&&) noexcept = default;

void Trainer::fit(const BinaryDataset& train, std::ostream* log) {
  auto& impl = *impl_;
  if (train.size() == 0) {
    throw InputError("training set is empty");
  }
  if (train.width != impl.dims.front()) {
    throw ShapeError("dataset width " + std::to_string(train.width) +
                     " does not match network input " +
                     std::to_string(impl.dims.front()));
  }
  if (train.classes != static_cast<int>(impl.dims.back())) {
    throw ShapeError("dataset classes " + std::to_string(train.classes) +
                     " do not match network output " +
                     std::to_string(impl.dims.back()));
  }
  std::mt19937_64 shuffle_rng(impl.cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double lr = impl.cfg.learning_rate;
  for (int epoch = 0; epoch < impl.cfg.epochs; ++epoch) {
    shuffle_pinned(order, shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < train.size();
         begin += impl.cfg.batch_size) {
      const std::size_t count = std::min(impl.cfg.batch_size, train.size() - begin);
      const Matrix x0 = impl.gather(train, order.data(), begin, count);
      std::vector<int> labels(count);
      for (std::size_t r = 0; r < count; ++r) labels[r] = train.labels[order[begin + r]];
      epoch_loss += impl.forward(x0, labels.data(), /*smooth=*/false);
      impl.backward(labels.data());
      impl.apply_updates(lr);
      ++batches;
    }
    if (log != nullptr) {
      *log << "epoch " << (epoch + 1) << "/" << impl.cfg.epochs << " loss "
           << epoch_loss / static_cast<double>(batches) << "\n";
    }
    lr *= impl.cfg.lr_decay;
  }
}

BnnModel Trainer::extract(const BinaryDataset& stats_source) const {
  const auto& impl = *impl_;
  if (stats_source.size() == 0) {
    throw InputError("statistics pass needs a non-empty dataset");
  }
  if (stats_source.width != impl.dims.front()) {
    throw ShapeError("dataset width does not match network input");
  }
  const auto n = static_cast<Eigen::Index>(stats_source.size());
  Matrix act = impl.gather(stats_source, nullptr, 0, stats_source.size());

  BnnModel model;
  model.reserve(impl.layers.size());
  for (std::size_t l = 0; l < impl.layers.size(); ++l) {
    const auto& layer = impl.layers[l];
    const Matrix wb = binarized(layer.w);
    Matrix preact(n, wb.rows());
    preact.noalias() = act * wb.transpose();

    // Population statistics of each neuron's integer pre-activation.
    const RowArray mu = preact.array().colwise().mean();
    const RowArray sigma2 =
        (preact.array().rowwise() - mu).square().colwise().mean();

    BinaryLayer out;
    out.in_dim = static_cast<std::size_t>(wb.cols());
    out.out_dim = static_cast<std::size_t>(wb.rows());
    out.weights.resize(out.in_dim * out.out_dim);
    out.bn_constants.resize(out.out_dim);
    std::vector<double> flip(out.out_dim);
    for (std::size_t j = 0; j < out.out_dim; ++j) {
      BatchNormParams bn;
      bn.gamma = layer.gamma(static_cast<Eigen::Index>(j));
      bn.beta = layer.beta(static_cast<Eigen::Index>(j));
      bn.mu = mu(static_cast<Eigen::Index>(j));
      bn.sigma2 = sigma2(static_cast<Eigen::Index>(j));
      bn.epsilon = impl.cfg.bn_epsilon;
      bn.bias = 0.0;
      const FoldedBn folded = fold_batch_norm(bn, impl.cfg.bn_cap);
      out.bn_constants[j] = static_cast<std::int16_t>(folded.c);
      flip[j] = folded.negate_weights ? -1.0 : 1.0;
      for (std::size_t i = 0; i < out.in_dim; ++i) {
        out.weights[j * out.in_dim + i] = static_cast<std::int8_t>(
            flip[j] * wb(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
      }
    }
    model.push_back(std::move(out));

    if (l + 1 < impl.layers.size()) {
      // Deployment activations feed the next layer's statistics.
      Matrix next(n, wb.rows());
      for (Eigen::Index j = 0; j < wb.rows(); ++j) {
        const double c = model.back().bn_constants[j];
        next.col(j) = ((flip[j] * preact.col(j).array() + c) > 0.0)
                          .select(Eigen::ArrayXd::Ones(n), -1.0)
                          .matrix();
      }
      act = std::move(next);
    }
  }
  return model;
}

double Trainer::batch_loss(const BinaryDataset& data, std::size_t begin,
                           std::size_t count, bool smooth) const {
  auto& impl = *impl_;
  const Matrix x0 = impl.gather(data, nullptr, begin, count);
  std::vector<int> labels(data.labels.begin() + begin,
                          data.labels.begin() + begin + count);
  return impl.forward(x0, labels.data(), smooth);
}

void Trainer::compute_gradients(const BinaryDataset& data, std::size_t begin,
                                std::size_t count, bool smooth) {
  auto& impl = *impl_;
  const Matrix x0 = impl.gather(data, nullptr, begin, count);
  std::vector<int> labels(data.labels.begin() + begin,
                          data.labels.begin() + begin + count);
  impl.forward(x0, labels.data(), smooth);
  impl.backward(labels.data());
}

double Trainer::weight(std::size_t layer, std::size_t neuron,
                       std::size_t input) const {
  return impl_->layers.at(layer).w(static_cast<Eigen::Index>(neuron),
                                   static_cast<Eigen::Index>(input));
}

void Trainer::set_weight(std::size_t layer, std::size_t neuron,
                         std::size_t input, double value) {
  impl_->layers.at(layer).w(static_cast<Eigen::Index>(neuron),
                            static_cast<Eigen::Index>(input)) = value;
}

double Trainer::weight_gradient(std::size_t layer, std::size_t neuron,
                                std::size_t input) const {
  return impl_->layers.at(layer).w_grad(static_cast<Eigen::Index>(neuron),
                                        static_cast<Eigen::Index>(input));
}

BnnModel train_model(const BinaryDataset& train, const std::vector<std::size_t>& dims,
                     const TrainConfig& cfg, std::ostream* log) {
  Trainer trainer(dims, cfg);
  trainer.fit(train, log);
  return trainer.extract(train);
}

}  // namespace cambnn
