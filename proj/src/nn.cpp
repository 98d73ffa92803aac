#include "augairl/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace augairl {

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("MlpSpec: dims must be >= 1");
  if (hidden_dims.empty())
    throw std::invalid_argument("MlpSpec: at least one hidden layer required");
  for (int h : hidden_dims)
    if (h < 1) throw std::invalid_argument("MlpSpec: hidden dim must be >= 1");
}

std::vector<int> MlpSpec::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  return dims;
}

MlpNet::MlpNet(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto dims = spec_.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    weights_.emplace_back(Eigen::MatrixXd::Zero(dims[l + 1], dims[l]));
    biases_.emplace_back(Eigen::VectorXd::Zero(dims[l + 1]));
    param_count_ += dims[l + 1] * dims[l] + dims[l + 1];
  }
}

MlpNet MlpNet::initialized(MlpSpec spec, std::uint64_t seed,
                           double final_layer_scale) {
  MlpNet net(std::move(spec));
  std::mt19937_64 rng(seed);
  const std::size_t last = net.weights_.size() - 1;
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    auto& w = net.weights_[l];
    const double bound = std::sqrt(6.0 / (w.cols() + w.rows()));
    const double scale = (l == last) ? final_layer_scale : 1.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        w(i, j) = scale * uniform_range(rng, -bound, bound);
  }
  return net;
}

namespace {
inline void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::Tanh)
    z = z.array().tanh();
  else
    z = z.array().max(0.0);
}
// derivative as a function of the post-activation value
inline Eigen::MatrixXd activation_deriv(const Eigen::MatrixXd& post,
                                        Activation act) {
  if (act == Activation::Tanh) return 1.0 - post.array().square();
  return (post.array() > 0.0).cast<double>();
}
}  // namespace

Eigen::MatrixXd MlpNet::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != spec_.input_dim)
    throw std::invalid_argument("MlpNet::forward: input dim mismatch");
  Eigen::MatrixXd h = inputs;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * h).colwise() + biases_[l];
    if (l + 1 < weights_.size()) apply_activation(z, spec_.hidden_activation);
    h = std::move(z);
  }
  return h;
}

Eigen::VectorXd MlpNet::forward(const Eigen::VectorXd& input) const {
  return forward_batch(input);
}

Eigen::VectorXd MlpNet::backward_batch(
    const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& output_grads) const {
  if (inputs.rows() != spec_.input_dim)
    throw std::invalid_argument("MlpNet::backward: input dim mismatch");
  if (output_grads.rows() != spec_.output_dim ||
      output_grads.cols() != inputs.cols())
    throw std::invalid_argument("MlpNet::backward: output_grad shape mismatch");

  const std::size_t n_layers = weights_.size();
  std::vector<Eigen::MatrixXd> acts(n_layers + 1);  // post-activation values
  acts[0] = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = (weights_[l] * acts[l]).colwise() + biases_[l];
    if (l + 1 < n_layers) apply_activation(z, spec_.hidden_activation);
    acts[l + 1] = std::move(z);
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count_);
  Eigen::MatrixXd delta = output_grads;
  // offsets of each layer's parameters in the flat vector
  std::vector<int> offsets(n_layers);
  int off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += int(weights_[l].size() + biases_[l].size());
  }
  for (std::size_t li = n_layers; li-- > 0;) {
    Eigen::MatrixXd dW = delta * acts[li].transpose();
    Eigen::VectorXd db = delta.rowwise().sum();
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>(
        grad.data() + offsets[li], dW.rows(), dW.cols()) = dW;
    grad.segment(offsets[li] + dW.size(), db.size()) = db;
    if (li > 0) {
      delta = weights_[li].transpose() * delta;
      delta.array() *= activation_deriv(acts[li], spec_.hidden_activation).array();
    }
  }
  return grad;
}

MlpNet::Gradients MlpNet::backward(const Eigen::VectorXd& input,
                                   const Eigen::VectorXd& output_grad) const {
  Gradients g;
  g.params = backward_batch(input, output_grad);
  // input gradient via full chain
  const std::size_t n_layers = weights_.size();
  std::vector<Eigen::VectorXd> acts(n_layers + 1);
  acts[0] = input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = (weights_[l] * acts[l]).colwise() + biases_[l];
    if (l + 1 < n_layers) apply_activation(z, spec_.hidden_activation);
    acts[l + 1] = z;
  }
  Eigen::VectorXd delta = output_grad;
  for (std::size_t li = n_layers; li-- > 0;) {
    delta = (weights_[li].transpose() * delta).eval();
    if (li > 0)
      delta.array() *=
          activation_deriv(acts[li], spec_.hidden_activation).array();
  }
  g.input = delta;
  return g;
}

Eigen::MatrixXd MlpNet::param_jvp_batch(const Eigen::MatrixXd& inputs,
                                        const Eigen::VectorXd& v) const {
  if (v.size() != param_count_)
    throw std::invalid_argument("MlpNet::param_jvp: direction length mismatch");
  const std::size_t n_layers = weights_.size();
  Eigen::MatrixXd h = inputs;
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(inputs.rows(), inputs.cols());
  int off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& w = weights_[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        dW(v.data() + off, w.rows(), w.cols());
    off += int(w.size());
    Eigen::Map<const Eigen::VectorXd> db(v.data() + off, biases_[l].size());
    off += int(biases_[l].size());

    Eigen::MatrixXd z = (w * h).colwise() + biases_[l];
    Eigen::MatrixXd dz = ((dW * h).colwise() + db) + w * dh;
    if (l + 1 < n_layers) {
      apply_activation(z, spec_.hidden_activation);
      dz.array() *= activation_deriv(z, spec_.hidden_activation).array();
    }
    h = std::move(z);
    dh = std::move(dz);
  }
  return dh;
}

Eigen::VectorXd MlpNet::get_flat_params() const {
  Eigen::VectorXd flat(param_count_);
  int off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>(
        flat.data() + off, weights_[l].rows(), weights_[l].cols()) =
        weights_[l];
    off += int(weights_[l].size());
    flat.segment(off, biases_[l].size()) = biases_[l];
    off += int(biases_[l].size());
  }
  return flat;
}

void MlpNet::set_flat_params(const Eigen::VectorXd& flat) {
  if (flat.size() != param_count_)
    throw std::invalid_argument("MlpNet::set_flat_params: length mismatch");
  int off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] = Eigen::Map<const Eigen::Matrix<
        double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data() + off, weights_[l].rows(), weights_[l].cols());
    off += int(weights_[l].size());
    biases_[l] = flat.segment(off, biases_[l].size());
    off += int(biases_[l].size());
  }
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const Eigen::ArrayXd shifted = logits.array() - m;
  const double lse = std::log(shifted.exp().sum());
  return shifted - lse;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  return log_softmax(logits).array().exp();
}

double categorical_logprob(const Eigen::VectorXd& logits, int action) {
  if (action < 0 || action >= logits.size())
    throw std::invalid_argument("categorical_logprob: action out of range");
  return log_softmax(logits)(action);
}

double categorical_kl(const Eigen::VectorXd& logits_p,
                      const Eigen::VectorXd& logits_q) {
  const Eigen::ArrayXd lp = log_softmax(logits_p).array();
  const Eigen::ArrayXd lq = log_softmax(logits_q).array();
  return (lp.exp() * (lp - lq)).sum();
}

double categorical_entropy(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd lp = log_softmax(logits).array();
  return -(lp.exp() * lp).sum();
}

int categorical_sample(const Eigen::VectorXd& logits, std::mt19937_64& rng) {
  const Eigen::VectorXd p = softmax(logits);
  double u = uniform01(rng);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    cum += p(i);
    if (u < cum) return int(i);
  }
  return int(p.size() - 1);
}

int categorical_argmax(const Eigen::VectorXd& logits) {
  Eigen::Index idx = 0;
  logits.maxCoeff(&idx);
  return int(idx);
}

AdamOptimizer::AdamOptimizer(int dim, double lr, double beta1, double beta2,
                             double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(dim)), v_(Eigen::VectorXd::Zero(dim)) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  params.array() -=
      lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

}  // namespace augairl
