#include "rldyn/networks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rldyn::nets {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'R', 'L', 'D', 'Y', 'N', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

double hidden_gain() { return std::sqrt(2.0); }

/// Orthogonal init: Gram-Schmidt over the columns of a Gaussian draw along
/// the larger dimension, so the smaller dimension ends up orthonormal.
Matrix orthogonal(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const std::size_t n = tall ? rows : cols;
  const std::size_t m = tall ? cols : rows;

  Matrix a(n, m);
  for (double& v : a.data) v = rng.normal();

  // Modified Gram-Schmidt with one re-orthogonalization pass.
  for (std::size_t j = 0; j < m; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += a(i, k) * a(i, j);
        for (std::size_t i = 0; i < n; ++i) a(i, j) -= dot * a(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += a(i, j) * a(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      // Degenerate draw; refill the column and restart it.
      for (std::size_t i = 0; i < n; ++i) a(i, j) = rng.normal();
      --j;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) a(i, j) /= norm;
  }

  Matrix w(rows, cols);
  if (tall) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) w(i, j) = gain * a(i, j);
  } else {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) w(i, j) = gain * a(j, i);
  }
  return w;
}

std::string head_name(HeadKind k) {
  switch (k) {
    case HeadKind::categorical: return "categorical";
    case HeadKind::tanhnormal: return "tanhnormal";
    case HeadKind::value: return "value";
  }
  return "?";
}

HeadKind head_from_name(const std::string& s) {
  if (s == "categorical") return HeadKind::categorical;
  if (s == "tanhnormal") return HeadKind::tanhnormal;
  if (s == "value") return HeadKind::value;
  throw std::invalid_argument("unknown head kind '" + s + "'");
}

json spec_to_json(const MlpSpec& spec) {
  return json{{"input_dim", spec.input_dim},
              {"hidden", spec.hidden_widths},
              {"activation", spec.activation == ad::Activation::relu ? "relu" : "tanh"},
              {"head", head_name(spec.head)},
              {"head_dim", spec.head_dim}};
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  spec.hidden_widths = j.at("hidden").get<std::vector<std::size_t>>();
  std::string act = j.at("activation").get<std::string>();
  spec.activation = act == "relu" ? ad::Activation::relu : ad::Activation::tanh;
  spec.head = head_from_name(j.at("head").get<std::string>());
  spec.head_dim = j.at("head_dim").get<std::size_t>();
  spec.validate();
  return spec;
}

/// Parameters in their fixed serialization/registration order.
std::vector<ad::NodePtr> ordered_params(const NetworkParams& net) {
  std::vector<ad::NodePtr> out;
  for (std::size_t l = 0; l < net.hidden_w.size(); ++l) {
    out.push_back(net.hidden_w[l]);
    out.push_back(net.hidden_b[l]);
  }
  out.push_back(net.out_w);
  out.push_back(net.out_b);
  if (net.out2_w) {
    out.push_back(net.out2_w);
    out.push_back(net.out2_b);
  }
  return out;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("MlpSpec: input_dim must be > 0");
  if (hidden_widths.empty()) {
    throw std::invalid_argument("MlpSpec: hidden_widths must be non-empty");
  }
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw std::invalid_argument("MlpSpec: hidden width must be > 0");
  }
  if (head_dim == 0) throw std::invalid_argument("MlpSpec: head_dim must be > 0");
  if (head == HeadKind::value && head_dim != 1) {
    throw std::invalid_argument("MlpSpec: value head must have head_dim 1");
  }
  if (activation == ad::Activation::softplus) {
    throw std::invalid_argument("MlpSpec: hidden activation must be relu or tanh");
  }
}

void NetworkParams::register_in(ad::ParameterSet& set, const std::string& prefix) const {
  if (owns_trunk) {
    for (std::size_t l = 0; l < hidden_w.size(); ++l) {
      set.add(prefix + "/h" + std::to_string(l) + "/W", hidden_w[l]);
      set.add(prefix + "/h" + std::to_string(l) + "/b", hidden_b[l]);
    }
  }
  set.add(prefix + "/out/W", out_w);
  set.add(prefix + "/out/b", out_b);
  if (out2_w) {
    set.add(prefix + "/out2/W", out2_w);
    set.add(prefix + "/out2/b", out2_b);
  }
}

NetworkParams init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = Rng::derive(seed, "mlp_init");

  NetworkParams net;
  net.spec = spec;
  std::size_t in = spec.input_dim;
  for (std::size_t width : spec.hidden_widths) {
    net.hidden_w.push_back(ad::leaf(orthogonal(in, width, hidden_gain(), rng)));
    net.hidden_b.push_back(ad::leaf(Matrix(1, width)));
    in = width;
  }
  const double out_gain = spec.head == HeadKind::value ? 1.0 : 0.01;
  net.out_w = ad::leaf(orthogonal(in, spec.head_dim, out_gain, rng));
  net.out_b = ad::leaf(Matrix(1, spec.head_dim));
  if (spec.head == HeadKind::tanhnormal) {
    net.out2_w = ad::leaf(orthogonal(in, spec.head_dim, out_gain, rng));
    net.out2_b = ad::leaf(Matrix(1, spec.head_dim));
  }
  return net;
}

NetworkParams make_shared_trunk_critic(const NetworkParams& trunk_owner,
                                       std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "shared_critic_head");
  NetworkParams critic;
  critic.spec = trunk_owner.spec;
  critic.spec.head = HeadKind::value;
  critic.spec.head_dim = 1;
  critic.hidden_w = trunk_owner.hidden_w;
  critic.hidden_b = trunk_owner.hidden_b;
  critic.owns_trunk = false;
  const std::size_t feat = trunk_owner.spec.hidden_widths.back();
  critic.out_w = ad::leaf(orthogonal(feat, 1, 1.0, rng));
  critic.out_b = ad::leaf(Matrix(1, 1));
  return critic;
}

ForwardTrace forward_graph(const NetworkParams& net, const ad::NodePtr& obs) {
  if (!all_finite(obs->value)) {
    throw std::invalid_argument("forward_graph: non-finite observation batch");
  }
  if (obs->value.cols != net.spec.input_dim) {
    throw std::invalid_argument("forward_graph: observation width " +
                                std::to_string(obs->value.cols) + " != input_dim " +
                                std::to_string(net.spec.input_dim));
  }
  ForwardTrace trace;
  ad::NodePtr h = obs;
  for (std::size_t l = 0; l < net.hidden_w.size(); ++l) {
    ad::NodePtr z = ad::linear(h, net.hidden_w[l], net.hidden_b[l]);
    trace.preacts.push_back(z);
    h = ad::activation(z, net.spec.activation);
    trace.acts.push_back(h);
  }
  switch (net.spec.head) {
    case HeadKind::categorical:
      trace.logits = ad::linear(h, net.out_w, net.out_b);
      break;
    case HeadKind::tanhnormal: {
      trace.mean = ad::linear(h, net.out_w, net.out_b);
      ad::NodePtr raw = ad::linear(h, net.out2_w, net.out2_b);
      trace.std = ad::add_scalar(ad::activation(raw, ad::Activation::softplus),
                                 kTanhNormalEps);
      break;
    }
    case HeadKind::value:
      trace.value = ad::linear(h, net.out_w, net.out_b);
      break;
  }
  return trace;
}

FeatureProbe probe_from(const ForwardTrace& trace) {
  FeatureProbe probe;
  for (const auto& z : trace.preacts) probe.pre_activations.push_back(z->value);
  for (const auto& a : trace.acts) probe.activations.push_back(a->value);
  return probe;
}

std::pair<DistParams, FeatureProbe> actor_forward(const NetworkParams& net,
                                                  const Matrix& obs) {
  ForwardTrace trace = forward_graph(net, ad::constant(obs));
  DistParams dist;
  dist.kind = net.spec.head;
  if (net.spec.head == HeadKind::categorical) {
    dist.logits = trace.logits->value;
  } else if (net.spec.head == HeadKind::tanhnormal) {
    dist.mean = trace.mean->value;
    dist.std = trace.std->value;
  } else {
    throw std::invalid_argument("actor_forward: network has a value head");
  }
  return {std::move(dist), probe_from(trace)};
}

std::pair<std::vector<double>, FeatureProbe> critic_forward(const NetworkParams& net,
                                                            const Matrix& obs) {
  if (net.spec.head != HeadKind::value) {
    throw std::invalid_argument("critic_forward: network head is not a value head");
  }
  ForwardTrace trace = forward_graph(net, ad::constant(obs));
  std::vector<double> values(trace.value->value.rows);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = trace.value->value(i, 0);
  return {std::move(values), probe_from(trace)};
}

CategoricalSample categorical_sample_logprob_entropy(const Matrix& logits, Rng& rng) {
  if (!all_finite(logits)) {
    throw std::invalid_argument("categorical_sample: non-finite logits");
  }
  const std::size_t n = logits.rows, a = logits.cols;
  CategoricalSample out;
  out.actions.resize(n);
  out.log_probs.resize(n);
  out.entropy.resize(n);
  std::vector<double> logp(a);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < a; ++j) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < a; ++j) sum += std::exp(logits(i, j) - mx);
    double lse = mx + std::log(sum);
    double h = 0.0;
    for (std::size_t j = 0; j < a; ++j) {
      logp[j] = logits(i, j) - lse;
      double p = std::exp(logp[j]);
      if (p > 0.0) h -= p * logp[j];
    }
    // Inverse-CDF draw over the probabilities.
    double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = a - 1;
    for (std::size_t j = 0; j < a; ++j) {
      acc += std::exp(logp[j]);
      if (u < acc) {
        pick = j;
        break;
      }
    }
    out.actions[i] = pick;
    out.log_probs[i] = logp[pick];
    out.entropy[i] = h;
  }
  return out;
}

std::vector<double> categorical_entropy(const Matrix& logits) {
  std::vector<double> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(logits(i, j) - mx);
    double lse = mx + std::log(sum);
    double h = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      double lp = logits(i, j) - lse;
      double p = std::exp(lp);
      if (p > 0.0) h -= p * lp;
    }
    out[i] = h;
  }
  return out;
}

double tanhnormal_log_prob(const Matrix& mean, const Matrix& std,
                           const Matrix& pre_squash, std::size_t row) {
  constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)
  double lp = 0.0;
  for (std::size_t k = 0; k < mean.cols; ++k) {
    double mu = mean(row, k);
    double sd = std(row, k);
    double u = pre_squash(row, k);
    double z = (u - mu) / sd;
    lp += -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
    double t = std::tanh(u);
    lp -= std::log(1.0 - t * t + kTanhNormalEps);
  }
  return lp;
}

TanhNormalSample tanhnormal_sample_logprob(const Matrix& mean, const Matrix& std,
                                           Rng& rng) {
  require_same_shape(mean, std, "tanhnormal_sample");
  for (double s : std.data) {
    if (!(s > 0.0)) throw std::invalid_argument("tanhnormal_sample: std must be > 0");
  }
  TanhNormalSample out;
  out.pre_squash = Matrix(mean.rows, mean.cols);
  out.actions = Matrix(mean.rows, mean.cols);
  out.log_probs.resize(mean.rows);
  for (std::size_t i = 0; i < mean.rows; ++i) {
    for (std::size_t k = 0; k < mean.cols; ++k) {
      double u = mean(i, k) + std(i, k) * rng.normal();
      out.pre_squash(i, k) = u;
      out.actions(i, k) = std::tanh(u);
    }
    out.log_probs[i] = tanhnormal_log_prob(mean, std, out.pre_squash, i);
  }
  return out;
}

ad::NodePtr categorical_log_prob_node(const ad::NodePtr& logits,
                                      const std::vector<std::size_t>& actions) {
  return ad::gather_cols(ad::log_softmax(logits), actions);
}

ad::NodePtr tanhnormal_log_prob_node(const ad::NodePtr& mean, const ad::NodePtr& std,
                                     const Matrix& pre_squash) {
  constexpr double kHalfLog2Pi = 0.9189385332046727;
  require_same_shape(mean->value, pre_squash, "tanhnormal_log_prob_node");
  const std::size_t n = pre_squash.rows, k = pre_squash.cols;

  ad::NodePtr u = ad::constant(pre_squash);
  ad::NodePtr z = ad::div(ad::sub(u, mean), std);
  ad::NodePtr gauss = ad::sub(ad::scale(ad::square(z), -0.5), ad::log(std));
  ad::NodePtr per_row = ad::add_scalar(ad::row_sum(gauss),
                                       -kHalfLog2Pi * static_cast<double>(k));

  // tanh volume correction; constant w.r.t. the parameters.
  Matrix corr(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double c = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double t = std::tanh(pre_squash(i, j));
      c -= std::log(1.0 - t * t + kTanhNormalEps);
    }
    corr(i, 0) = c;
  }
  return ad::add(per_row, ad::constant(corr));
}

ad::NodePtr categorical_entropy_mean_node(const ad::NodePtr& logits) {
  ad::NodePtr lsm = ad::log_softmax(logits);
  ad::NodePtr p = ad::exp(lsm);
  ad::NodePtr per_row = ad::neg(ad::row_sum(ad::mul(p, lsm)));
  return ad::reduce(per_row, ad::Reduce::mean);
}

NetworkParams clone_network(const NetworkParams& net) {
  NetworkParams out;
  out.spec = net.spec;
  out.owns_trunk = net.owns_trunk;
  for (std::size_t l = 0; l < net.hidden_w.size(); ++l) {
    out.hidden_w.push_back(ad::leaf(net.hidden_w[l]->value));
    out.hidden_b.push_back(ad::leaf(net.hidden_b[l]->value));
  }
  out.out_w = ad::leaf(net.out_w->value);
  out.out_b = ad::leaf(net.out_b->value);
  if (net.out2_w) {
    out.out2_w = ad::leaf(net.out2_w->value);
    out.out2_b = ad::leaf(net.out2_b->value);
  }
  return out;
}

std::pair<NetworkParams, NetworkParams> clone_pair(const NetworkParams& actor,
                                                   const NetworkParams& critic,
                                                   bool shared_trunk) {
  NetworkParams a = clone_network(actor);
  NetworkParams c = clone_network(critic);
  if (shared_trunk) {
    c.hidden_w = a.hidden_w;
    c.hidden_b = a.hidden_b;
    c.owns_trunk = false;
  }
  return {std::move(a), std::move(c)};
}

void save_agent_checkpoint(const std::string& path, const NetworkParams& actor,
                           const NetworkParams& critic, bool shared_trunk) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint file for writing: " + path);

  json desc{{"actor", spec_to_json(actor.spec)},
            {"critic", spec_to_json(critic.spec)},
            {"shared_trunk", shared_trunk}};
  std::string desc_str = desc.dump();

  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(desc_str.size()));
  os.write(desc_str.data(), static_cast<std::streamsize>(desc_str.size()));

  for (const NetworkParams* net : {&actor, &critic}) {
    for (const auto& p : ordered_params(*net)) {
      write_u64(os, p->value.size());
      os.write(reinterpret_cast<const char*>(p->value.data.data()),
               static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

AgentCheckpoint load_agent_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint file: " + path);

  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("bad checkpoint magic in " + path);
  }
  std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  std::uint32_t desc_len = read_u32(is);
  std::string desc_str(desc_len, '\0');
  is.read(desc_str.data(), desc_len);
  json desc = json::parse(desc_str);

  AgentCheckpoint ck;
  ck.shared_trunk = desc.at("shared_trunk").get<bool>();
  MlpSpec actor_spec = spec_from_json(desc.at("actor"));
  MlpSpec critic_spec = spec_from_json(desc.at("critic"));

  // Seed value is irrelevant; every array is overwritten below.
  ck.actor = init_mlp(actor_spec, 0);
  ck.critic = init_mlp(critic_spec, 0);

  auto read_net = [&](NetworkParams& net) {
    for (const auto& p : ordered_params(net)) {
      std::uint64_t count = read_u64(is);
      if (count != p->value.size()) {
        throw std::runtime_error("checkpoint layout mismatch in " + path);
      }
      is.read(reinterpret_cast<char*>(p->value.data.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
    }
  };
  read_net(ck.actor);
  read_net(ck.critic);
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);

  if (ck.shared_trunk) {
    ck.critic.hidden_w = ck.actor.hidden_w;
    ck.critic.hidden_b = ck.actor.hidden_b;
    ck.critic.owns_trunk = false;
  }
  return ck;
}

}  // namespace rldyn::nets
