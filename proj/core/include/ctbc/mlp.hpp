#pragma once

#include <Eigen/Core>
#include <vector>

#include "ctbc/rng.hpp"

namespace ctbc {

// Dense feedforward network: ELU on hidden layers, linear output. All math
// in double; batches are column-major (one sample per column) so layers run
// as GEMMs.
struct Mlp {
  std::vector<Eigen::MatrixXd> W;  // W[l]: out x in
  std::vector<Eigen::VectorXd> b;

  // Layer inputs cached by the batched forward, consumed by backward.
  struct Tape {
    std::vector<Eigen::MatrixXd> x;  // input to each layer
    std::vector<Eigen::MatrixXd> z;  // pre-activation of each layer
  };

  struct Grads {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
    void setZero();
    double squared_norm() const;
  };

  // sizes = {in, hidden..., out}; orthogonal-ish scaled He init.
  static Mlp make(const std::vector<int>& sizes, Rng& rng);

  int input_dim() const { return W.empty() ? 0 : int(W.front().cols()); }
  int output_dim() const { return W.empty() ? 0 : int(W.back().rows()); }
  int layers() const { return int(W.size()); }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Tape& tape) const;
  // Accumulates dL/dW, dL/db into g (must be zeroed or carry a running sum)
  // and returns dL/dX.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& dY,
                           Grads& g) const;

  Grads zero_grads() const;
  int param_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);
  static Eigen::VectorXd flatten_grads(const Grads& g);
};

// Adam over one flat parameter vector.
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Eigen::VectorXd m, v;
  long long t = 0;

  void init(int n);
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);
};

}  // namespace ctbc
