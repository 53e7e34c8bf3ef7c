#include "ctbc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ctbc {

namespace {

// Little-endian named double arrays. All fixed-width fields are written raw;
// the build targets little-endian platforms only (asserted at load by the
// magic bytes reading back correctly).

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void put_array(std::ostream& os, const std::string& name, const double* data,
               const std::vector<uint64_t>& dims) {
  put_u32(os, uint32_t(name.size()));
  os.write(name.data(), std::streamsize(name.size()));
  put_u32(os, uint32_t(dims.size()));
  uint64_t n = 1;
  for (uint64_t d : dims) {
    put_u64(os, d);
    n *= d;
  }
  os.write(reinterpret_cast<const char*>(data), std::streamsize(n * 8));
}

struct Array {
  std::vector<uint64_t> dims;
  std::vector<double> data;
};

std::map<std::string, Array> read_arrays(std::istream& is, uint32_t count) {
  std::map<std::string, Array> out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(is);
    if (!is || name_len > 4096) throw std::runtime_error("checkpoint: corrupt array name");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    Array a;
    const uint32_t ndim = get_u32(is);
    if (ndim > 8) throw std::runtime_error("checkpoint: corrupt rank");
    uint64_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      a.dims.push_back(get_u64(is));
      n *= a.dims.back();
    }
    if (n > (1ull << 30)) throw std::runtime_error("checkpoint: oversized array");
    a.data.resize(n);
    is.read(reinterpret_cast<char*>(a.data.data()), std::streamsize(n * 8));
    if (!is) throw std::runtime_error("checkpoint: truncated array " + name);
    out.emplace(std::move(name), std::move(a));
  }
  return out;
}

void put_mlp(std::ostream& os, const std::string& prefix, const Mlp& net) {
  for (int l = 0; l < net.layers(); ++l) {
    put_array(os, prefix + ".W" + std::to_string(l), net.W[l].data(),
              {uint64_t(net.W[l].rows()), uint64_t(net.W[l].cols())});
    put_array(os, prefix + ".b" + std::to_string(l), net.b[l].data(),
              {uint64_t(net.b[l].size())});
  }
}

void put_adam(std::ostream& os, const std::string& prefix, const Adam& opt) {
  const double scalars[5] = {opt.lr, opt.beta1, opt.beta2, opt.eps,
                             double(opt.t)};
  put_array(os, prefix + ".scalars", scalars, {5});
  put_array(os, prefix + ".m", opt.m.data(), {uint64_t(opt.m.size())});
  put_array(os, prefix + ".v", opt.v.data(), {uint64_t(opt.v.size())});
}

const Array& need(const std::map<std::string, Array>& arrays,
                  const std::string& name) {
  auto it = arrays.find(name);
  if (it == arrays.end())
    throw std::runtime_error("checkpoint: missing array " + name);
  return it->second;
}

Mlp get_mlp(const std::map<std::string, Array>& arrays,
            const std::string& prefix) {
  Mlp net;
  for (int l = 0;; ++l) {
    auto it = arrays.find(prefix + ".W" + std::to_string(l));
    if (it == arrays.end()) break;
    const Array& w = it->second;
    if (w.dims.size() != 2)
      throw std::runtime_error("checkpoint: " + prefix + " weight rank != 2");
    Eigen::MatrixXd W(w.dims[0], w.dims[1]);
    std::memcpy(W.data(), w.data.data(), w.data.size() * 8);
    const Array& b = need(arrays, prefix + ".b" + std::to_string(l));
    if (int(W.rows()) != int(b.data.size())) {
      std::ostringstream msg;
      msg << "checkpoint: " << prefix << " layer " << l << " shape mismatch: W "
          << W.rows() << "x" << W.cols() << " vs b " << b.data.size();
      throw std::runtime_error(msg.str());
    }
    net.W.push_back(std::move(W));
    net.b.push_back(
        Eigen::Map<const Eigen::VectorXd>(b.data.data(), b.data.size()));
  }
  if (net.layers() == 0)
    throw std::runtime_error("checkpoint: missing network " + prefix);
  for (int l = 1; l < net.layers(); ++l)
    if (net.W[l].cols() != net.W[l - 1].rows()) {
      std::ostringstream msg;
      msg << "checkpoint: " << prefix << " layer " << l << " input "
          << net.W[l].cols() << " != previous output " << net.W[l - 1].rows();
      throw std::runtime_error(msg.str());
    }
  return net;
}

Adam get_adam(const std::map<std::string, Array>& arrays,
              const std::string& prefix, int expect_n) {
  const Array& s = need(arrays, prefix + ".scalars");
  if (s.data.size() != 5)
    throw std::runtime_error("checkpoint: bad optimizer scalars " + prefix);
  Adam opt;
  opt.lr = s.data[0];
  opt.beta1 = s.data[1];
  opt.beta2 = s.data[2];
  opt.eps = s.data[3];
  opt.t = (long long)(s.data[4]);
  const Array& m = need(arrays, prefix + ".m");
  const Array& v = need(arrays, prefix + ".v");
  if (int(m.data.size()) != expect_n || int(v.data.size()) != expect_n) {
    std::ostringstream msg;
    msg << "checkpoint: optimizer " << prefix << " state size " << m.data.size()
        << " does not match parameter count " << expect_n;
    throw std::runtime_error(msg.str());
  }
  opt.m = Eigen::Map<const Eigen::VectorXd>(m.data.data(), m.data.size());
  opt.v = Eigen::Map<const Eigen::VectorXd>(v.data.data(), v.data.size());
  return opt;
}

}  // namespace

void save_checkpoint(const PolicyBundle& bundle, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write("CTBC", 4);
  put_u32(os, kCheckpointVersion);
  put_u64(os, bundle.config_hash);

  const uint32_t n_arrays =
      uint32_t(2 * (bundle.actor.layers() + bundle.critic.layers() +
                    bundle.estimator.layers()) +
               1   // log_std
               + 9  // three optimizers x 3
               + 3  // norm mean/var/count
               + 2);  // meta dims + progress
  put_u32(os, n_arrays);

  const double meta[6] = {double(bundle.obs_dim), double(bundle.priv_dim),
                          double(bundle.act_dim), double(bundle.est_out),
                          double(bundle.stack),   0.0};
  put_array(os, "meta.dims", meta, {6});
  put_array(os, "meta.progress", &bundle.progress, {1});

  put_mlp(os, "actor", bundle.actor);
  put_array(os, "actor.log_std", bundle.log_std.data(),
            {uint64_t(bundle.log_std.size())});
  put_mlp(os, "critic", bundle.critic);
  put_mlp(os, "estimator", bundle.estimator);

  put_adam(os, "opt.actor", bundle.actor_opt);
  put_adam(os, "opt.critic", bundle.critic_opt);
  put_adam(os, "opt.estimator", bundle.estimator_opt);

  put_array(os, "norm.mean", bundle.obs_norm.mean.data(),
            {uint64_t(bundle.obs_norm.mean.size())});
  put_array(os, "norm.var", bundle.obs_norm.var.data(),
            {uint64_t(bundle.obs_norm.var.size())});
  put_array(os, "norm.count", &bundle.obs_norm.count, {1});

  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

PolicyBundle load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (std::memcmp(magic, "CTBC", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint32_t version = get_u32(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  PolicyBundle bundle;
  bundle.config_hash = get_u64(is);
  const uint32_t n_arrays = get_u32(is);
  auto arrays = read_arrays(is, n_arrays);

  const Array& meta = need(arrays, "meta.dims");
  if (meta.data.size() != 6) throw std::runtime_error("checkpoint: bad meta");
  bundle.obs_dim = int(meta.data[0]);
  bundle.priv_dim = int(meta.data[1]);
  bundle.act_dim = int(meta.data[2]);
  bundle.est_out = int(meta.data[3]);
  bundle.stack = int(meta.data[4]);
  bundle.progress = need(arrays, "meta.progress").data[0];

  bundle.actor = get_mlp(arrays, "actor");
  const Array& ls = need(arrays, "actor.log_std");
  bundle.log_std =
      Eigen::Map<const Eigen::VectorXd>(ls.data.data(), ls.data.size());
  bundle.critic = get_mlp(arrays, "critic");
  bundle.estimator = get_mlp(arrays, "estimator");

  if (bundle.actor.input_dim() != bundle.obs_dim + bundle.est_out ||
      bundle.actor.output_dim() != bundle.act_dim ||
      int(bundle.log_std.size()) != bundle.act_dim ||
      bundle.critic.input_dim() != bundle.obs_dim + bundle.priv_dim ||
      bundle.estimator.input_dim() != bundle.stack * bundle.obs_dim ||
      bundle.estimator.output_dim() != bundle.est_out) {
    std::ostringstream msg;
    msg << "checkpoint: dimension report — obs " << bundle.obs_dim << ", priv "
        << bundle.priv_dim << ", act " << bundle.act_dim << ", est "
        << bundle.est_out << ", stack " << bundle.stack << "; actor "
        << bundle.actor.input_dim() << "->" << bundle.actor.output_dim()
        << ", critic " << bundle.critic.input_dim() << "->"
        << bundle.critic.output_dim() << ", estimator "
        << bundle.estimator.input_dim() << "->"
        << bundle.estimator.output_dim();
    throw std::runtime_error(msg.str());
  }

  bundle.actor_opt = get_adam(arrays, "opt.actor",
                              bundle.actor.param_count() + bundle.act_dim);
  bundle.critic_opt = get_adam(arrays, "opt.critic", bundle.critic.param_count());
  bundle.estimator_opt =
      get_adam(arrays, "opt.estimator", bundle.estimator.param_count());

  const Array& nm = need(arrays, "norm.mean");
  const Array& nv = need(arrays, "norm.var");
  if (int(nm.data.size()) != bundle.obs_dim || int(nv.data.size()) != bundle.obs_dim)
    throw std::runtime_error("checkpoint: normalization size mismatch");
  bundle.obs_norm.mean =
      Eigen::Map<const Eigen::VectorXd>(nm.data.data(), nm.data.size());
  bundle.obs_norm.var =
      Eigen::Map<const Eigen::VectorXd>(nv.data.data(), nv.data.size());
  bundle.obs_norm.count = need(arrays, "norm.count").data[0];
  return bundle;
}

}  // namespace ctbc
