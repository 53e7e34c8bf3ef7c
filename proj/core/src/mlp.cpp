#include "ctbc/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace ctbc {

namespace {

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
inline double elu_deriv_from(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

}  // namespace

void Mlp::Grads::setZero() {
  for (auto& w : W) w.setZero();
  for (auto& v : b) v.setZero();
}

double Mlp::Grads::squared_norm() const {
  double s = 0.0;
  for (const auto& w : W) s += w.squaredNorm();
  for (const auto& v : b) s += v.squaredNorm();
  return s;
}

Mlp Mlp::make(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp::make: need >= 2 sizes");
  Mlp net;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    if (in <= 0 || out <= 0) throw std::invalid_argument("Mlp::make: bad size");
    const bool last = l + 2 == sizes.size();
    // He for the ELU hidden layers, Xavier-ish for the linear output
    const double scale = last ? std::sqrt(1.0 / in) : std::sqrt(2.0 / in);
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = scale * rng.normal();
    net.W.push_back(std::move(w));
    net.b.push_back(Eigen::VectorXd::Zero(out));
  }
  return net;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X) const {
  Tape tape;
  return forward(X, tape);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X, Tape& tape) const {
  if (X.rows() != input_dim())
    throw std::invalid_argument("Mlp::forward: input dim mismatch");
  tape.x.clear();
  tape.z.clear();
  Eigen::MatrixXd h = X;
  for (int l = 0; l < layers(); ++l) {
    tape.x.push_back(h);
    Eigen::MatrixXd z = (W[l] * h).colwise() + b[l];
    tape.z.push_back(z);
    if (l + 1 < layers())
      h = z.unaryExpr([](double v) { return elu(v); });
    else
      h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& dY,
                              Grads& g) const {
  if (int(tape.x.size()) != layers())
    throw std::invalid_argument("Mlp::backward: tape/layer mismatch");
  Eigen::MatrixXd delta = dY;  // dL/dz at the output (linear)
  for (int l = layers() - 1; l >= 0; --l) {
    g.W[l].noalias() += delta * tape.x[l].transpose();
    g.b[l] += delta.rowwise().sum();
    if (l == 0) return W[l].transpose() * delta;
    Eigen::MatrixXd dx = W[l].transpose() * delta;
    delta = dx.cwiseProduct(
        tape.z[l - 1].unaryExpr([](double z) { return elu_deriv_from(z); }));
  }
  return {};
}

Mlp::Grads Mlp::zero_grads() const {
  Grads g;
  for (const auto& w : W) g.W.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& v : b) g.b.push_back(Eigen::VectorXd::Zero(v.size()));
  return g;
}

int Mlp::param_count() const {
  int n = 0;
  for (const auto& w : W) n += int(w.size());
  for (const auto& v : b) n += int(v.size());
  return n;
}

Eigen::VectorXd Mlp::flatten() const {
  Eigen::VectorXd theta(param_count());
  int k = 0;
  for (const auto& w : W) {
    theta.segment(k, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    k += int(w.size());
  }
  for (const auto& v : b) {
    theta.segment(k, v.size()) = v;
    k += int(v.size());
  }
  return theta;
}

void Mlp::unflatten(const Eigen::VectorXd& theta) {
  if (theta.size() != param_count())
    throw std::invalid_argument("Mlp::unflatten: size mismatch");
  int k = 0;
  for (auto& w : W) {
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = theta.segment(k, w.size());
    k += int(w.size());
  }
  for (auto& v : b) {
    v = theta.segment(k, v.size());
    k += int(v.size());
  }
}

Eigen::VectorXd Mlp::flatten_grads(const Grads& g) {
  int n = 0;
  for (const auto& w : g.W) n += int(w.size());
  for (const auto& v : g.b) n += int(v.size());
  Eigen::VectorXd flat(n);
  int k = 0;
  for (const auto& w : g.W) {
    flat.segment(k, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    k += int(w.size());
  }
  for (const auto& v : g.b) {
    flat.segment(k, v.size()) = v;
    k += int(v.size());
  }
  return flat;
}

void Adam::init(int n) {
  m = Eigen::VectorXd::Zero(n);
  v = Eigen::VectorXd::Zero(n);
  t = 0;
}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (theta.size() != m.size() || grad.size() != m.size())
    throw std::invalid_argument("Adam::step: size mismatch");
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bias1 = 1.0 - std::pow(beta1, double(t));
  const double bias2 = 1.0 - std::pow(beta2, double(t));
  theta -= (lr / bias1) * m.cwiseQuotient(
                              ((v / bias2).cwiseSqrt().array() + eps).matrix());
}

}  // namespace ctbc
