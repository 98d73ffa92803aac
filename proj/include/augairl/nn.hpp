#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace augairl {

enum class Activation { Tanh, Relu };

// Deterministic uniform helpers so results do not depend on libstdc++
// distribution internals.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation hidden_activation = Activation::Tanh;

  void validate() const;
  std::vector<int> layer_dims() const;  // [input, hidden..., output]
};

/// Dense MLP with linear output layer. Parameters are exposed as one flat
/// vector ordered layer-major: W0 (row-major), b0, W1, b1, ...
class MlpNet {
 public:
  explicit MlpNet(MlpSpec spec);

  // Uniform +-sqrt(6/(fan_in+fan_out)) init; the final layer is scaled by
  // final_layer_scale.
  static MlpNet initialized(MlpSpec spec, std::uint64_t seed,
                            double final_layer_scale = 1.0);

  const MlpSpec& spec() const { return spec_; }
  int param_count() const { return param_count_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  // Columns are samples: input (in_dim x n) -> output (out_dim x n).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  struct Gradients {
    Eigen::VectorXd params;
    Eigen::VectorXd input;
  };
  // Exact reverse-mode gradients of <output, output_grad>.
  Gradients backward(const Eigen::VectorXd& input,
                     const Eigen::VectorXd& output_grad) const;
  // Sum over samples of the parameter gradient of <output_i, grad_col_i>.
  Eigen::VectorXd backward_batch(const Eigen::MatrixXd& inputs,
                                 const Eigen::MatrixXd& output_grads) const;
  // Forward-mode directional derivative of the outputs along the flat
  // parameter direction v (inputs held fixed).
  Eigen::MatrixXd param_jvp_batch(const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXd& v) const;

  Eigen::VectorXd get_flat_params() const;
  void set_flat_params(const Eigen::VectorXd& flat);

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  Eigen::MatrixXd& weight(std::size_t layer) { return weights_[layer]; }
  Eigen::VectorXd& bias(std::size_t layer) { return biases_[layer]; }

 private:
  MlpSpec spec_;
  std::vector<Eigen::MatrixXd> weights_;  // out x in per layer
  std::vector<Eigen::VectorXd> biases_;
  int param_count_ = 0;
};

// Numerically stable categorical distribution statistics over logits.
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
double categorical_logprob(const Eigen::VectorXd& logits, int action);
double categorical_kl(const Eigen::VectorXd& logits_p,
                      const Eigen::VectorXd& logits_q);
double categorical_entropy(const Eigen::VectorXd& logits);
int categorical_sample(const Eigen::VectorXd& logits, std::mt19937_64& rng);
int categorical_argmax(const Eigen::VectorXd& logits);

/// First-order adaptive-moment optimizer state for a flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer(int dim, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace augairl
