#include "maskbeam/masknet.hpp"

#include <cmath>

#include "maskbeam/rng.hpp"

namespace maskbeam {

std::string to_string(OutputActivation a) {
  return a == OutputActivation::kSigmoid ? "sigmoid" : "clipped_relu";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "sigmoid") return OutputActivation::kSigmoid;
  if (s == "clipped_relu") return OutputActivation::kClippedRelu;
  throw ValidationError("unknown output activation '" + s + "'");
}

void MaskNetDims::validate() const {
  if (num_bins < 1 || hidden < 1)
    throw ValidationError("network dimensions must be positive");
}

namespace {

void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

LstmDirParams init_lstm_dir(const MaskNetDims& dims, std::uint64_t seed,
                            const std::string& tag) {
  const int input = dims.num_bins, hidden = dims.hidden;
  LstmDirParams p;
  p.w_ih.resize(4 * hidden, input);
  p.w_hh.resize(4 * hidden, hidden);
  p.b.resize(4 * hidden);

  Rng r_ih(mix_seed(seed, tag + ".w_ih"));
  fill_uniform(p.w_ih, 1.0 / std::sqrt(static_cast<double>(input)), r_ih);
  Rng r_hh(mix_seed(seed, tag + ".w_hh"));
  fill_uniform(p.w_hh, 1.0 / std::sqrt(static_cast<double>(hidden)), r_hh);
  Rng r_b(mix_seed(seed, tag + ".b"));
  fill_uniform(p.b, 1.0 / std::sqrt(static_cast<double>(hidden)), r_b);
  p.b.segment(hidden, hidden).array() += 1.0;  // forget-gate bias
  return p;
}

HeadParams init_head(const MaskNetDims& dims, std::uint64_t seed, const std::string& tag) {
  const int bins = dims.num_bins, hidden = dims.hidden;
  HeadParams h;
  h.w1.resize(bins, 2 * hidden);
  h.b1.resize(bins);
  h.w2.resize(bins, bins);
  h.b2.resize(bins);

  Rng r_w1(mix_seed(seed, tag + ".w1"));
  fill_uniform(h.w1, 1.0 / std::sqrt(2.0 * hidden), r_w1);
  Rng r_b1(mix_seed(seed, tag + ".b1"));
  fill_uniform(h.b1, 1.0 / std::sqrt(2.0 * hidden), r_b1);
  Rng r_w2(mix_seed(seed, tag + ".w2"));
  fill_uniform(h.w2, 1.0 / std::sqrt(static_cast<double>(bins)), r_w2);
  Rng r_b2(mix_seed(seed, tag + ".b2"));
  fill_uniform(h.b2, 1.0 / std::sqrt(static_cast<double>(bins)), r_b2);
  return h;
}

LstmDirParams zeros_lstm_dir(const MaskNetDims& dims) {
  LstmDirParams p;
  p.w_ih = Eigen::MatrixXd::Zero(4 * dims.hidden, dims.num_bins);
  p.w_hh = Eigen::MatrixXd::Zero(4 * dims.hidden, dims.hidden);
  p.b = Eigen::VectorXd::Zero(4 * dims.hidden);
  return p;
}

HeadParams zeros_head(const MaskNetDims& dims) {
  HeadParams h;
  h.w1 = Eigen::MatrixXd::Zero(dims.num_bins, 2 * dims.hidden);
  h.b1 = Eigen::VectorXd::Zero(dims.num_bins);
  h.w2 = Eigen::MatrixXd::Zero(dims.num_bins, dims.num_bins);
  h.b2 = Eigen::VectorXd::Zero(dims.num_bins);
  return h;
}

}  // namespace

MaskNetParams MaskNetParams::init(const MaskNetDims& dims, OutputActivation act,
                                  std::uint64_t seed) {
  dims.validate();
  MaskNetParams p;
  p.dims = dims;
  p.activation = act;
  p.fwd = init_lstm_dir(dims, seed, "fwd");
  p.bwd = init_lstm_dir(dims, seed, "bwd");
  p.speech = init_head(dims, seed, "speech");
  if (dims.has_noise_head) p.noise = init_head(dims, seed, "noise");
  return p;
}

MaskNetParams MaskNetParams::zeros(const MaskNetDims& dims, OutputActivation act) {
  dims.validate();
  MaskNetParams p;
  p.dims = dims;
  p.activation = act;
  p.fwd = zeros_lstm_dir(dims);
  p.bwd = zeros_lstm_dir(dims);
  p.speech = zeros_head(dims);
  if (dims.has_noise_head) p.noise = zeros_head(dims);
  return p;
}

namespace {

void push_lstm_views(std::vector<ParamView>& out, LstmDirParams& p, const std::string& tag) {
  out.push_back({tag + ".w_ih", p.w_ih.data(), p.w_ih.rows(), p.w_ih.cols()});
  out.push_back({tag + ".w_hh", p.w_hh.data(), p.w_hh.rows(), p.w_hh.cols()});
  out.push_back({tag + ".b", p.b.data(), p.b.size(), 1});
}

void push_head_views(std::vector<ParamView>& out, HeadParams& h, const std::string& tag) {
  out.push_back({tag + ".w1", h.w1.data(), h.w1.rows(), h.w1.cols()});
  out.push_back({tag + ".b1", h.b1.data(), h.b1.size(), 1});
  out.push_back({tag + ".w2", h.w2.data(), h.w2.rows(), h.w2.cols()});
  out.push_back({tag + ".b2", h.b2.data(), h.b2.size(), 1});
}

}  // namespace

std::vector<ParamView> MaskNetParams::views() {
  std::vector<ParamView> out;
  out.reserve(14);
  push_lstm_views(out, fwd, "fwd");
  push_lstm_views(out, bwd, "bwd");
  push_head_views(out, speech, "speech");
  if (noise) push_head_views(out, *noise, "noise");
  return out;
}

std::vector<ParamView> MaskNetParams::views() const {
  return const_cast<MaskNetParams*>(this)->views();
}

Eigen::Index MaskNetParams::num_params() const {
  Eigen::Index n = 0;
  for (const auto& v : views()) n += v.size();
  return n;
}

Eigen::VectorXd MaskNetParams::flatten() const {
  Eigen::VectorXd flat(num_params());
  Eigen::Index off = 0;
  for (const auto& v : views()) {
    std::copy(v.data, v.data + v.size(), flat.data() + off);
    off += v.size();
  }
  return flat;
}

void MaskNetParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != num_params())
    throw ValidationError("unflatten: size mismatch");
  Eigen::Index off = 0;
  for (auto& v : views()) {
    std::copy(flat.data() + off, flat.data() + off + v.size(), v.data);
    off += v.size();
  }
}

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* layer) {
  if (!m.allFinite())
    throw NumericalError(std::string("non-finite activations in ") + layer);
}

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

// One direction of the recurrence. Cache rows stay aligned to the original
// frame index regardless of processing order.
LstmDirCache run_lstm(const LstmDirParams& p, const Eigen::MatrixXd& x, bool reverse,
                      const char* layer) {
  const Eigen::Index T = x.rows();
  const Eigen::Index H = p.w_hh.cols();

  LstmDirCache cache;
  cache.gate_i.resize(T, H);
  cache.gate_f.resize(T, H);
  cache.gate_g.resize(T, H);
  cache.gate_o.resize(T, H);
  cache.c.resize(T, H);
  cache.tanh_c.resize(T, H);
  cache.h.resize(T, H);

  Eigen::MatrixXd pre = x * p.w_ih.transpose();
  pre.rowwise() += p.b.transpose();

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd gates(4 * H);
  for (Eigen::Index k = 0; k < T; ++k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    gates = pre.row(t).transpose();
    if (k > 0) gates.noalias() += p.w_hh * h_prev;

    Eigen::ArrayXd gi = sigmoid(gates.segment(0, H).array());
    Eigen::ArrayXd gf = sigmoid(gates.segment(H, H).array());
    Eigen::ArrayXd gg = gates.segment(2 * H, H).array().tanh();
    Eigen::ArrayXd go = sigmoid(gates.segment(3 * H, H).array());

    Eigen::ArrayXd c_t = gf * c_prev.array() + gi * gg;
    Eigen::ArrayXd tc = c_t.tanh();
    Eigen::ArrayXd h_t = go * tc;

    cache.gate_i.row(t) = gi.transpose();
    cache.gate_f.row(t) = gf.transpose();
    cache.gate_g.row(t) = gg.transpose();
    cache.gate_o.row(t) = go.transpose();
    cache.c.row(t) = c_t.transpose();
    cache.tanh_c.row(t) = tc.transpose();
    cache.h.row(t) = h_t.transpose();

    h_prev = h_t.matrix();
    c_prev = c_t.matrix();
  }
  check_finite(cache.h, layer);
  return cache;
}

HeadCache run_head(const HeadParams& hp, const Eigen::MatrixXd& concat,
                   OutputActivation act, const char* layer) {
  HeadCache hc;
  Eigen::MatrixXd z1pre = concat * hp.w1.transpose();
  z1pre.rowwise() += hp.b1.transpose();
  hc.z1 = z1pre.cwiseMax(0.0);

  hc.logits = hc.z1 * hp.w2.transpose();
  hc.logits.rowwise() += hp.b2.transpose();
  check_finite(hc.logits, layer);

  if (act == OutputActivation::kSigmoid)
    hc.mask = (1.0 / (1.0 + (-hc.logits.array()).exp())).matrix();
  else
    hc.mask = hc.logits.cwiseMax(0.0).cwiseMin(1.0);
  return hc;
}

}  // namespace

ForwardCache forward_cached(const MaskNetParams& params, const Eigen::MatrixXd& features) {
  if (features.cols() != params.dims.num_bins)
    throw ValidationError("forward: feature dimension " + std::to_string(features.cols()) +
                          " does not match network input " +
                          std::to_string(params.dims.num_bins));
  if (!features.allFinite()) throw ValidationError("forward: non-finite features");

  ForwardCache cache;
  cache.features = features;
  cache.fwd = run_lstm(params.fwd, features, false, "blstm.fwd");
  cache.bwd = run_lstm(params.bwd, features, true, "blstm.bwd");

  const Eigen::Index T = features.rows();
  const Eigen::Index H = params.dims.hidden;
  cache.concat.resize(T, 2 * H);
  cache.concat.leftCols(H) = cache.fwd.h;
  cache.concat.rightCols(H) = cache.bwd.h;

  cache.heads.emplace(MaskKind::kSpeech,
                      run_head(params.speech, cache.concat, params.activation, "head.speech"));
  if (params.noise)
    cache.heads.emplace(MaskKind::kNoise,
                        run_head(*params.noise, cache.concat, params.activation, "head.noise"));
  return cache;
}

std::map<MaskKind, MaskPlane> forward(const MaskNetParams& params,
                                      const Eigen::MatrixXd& features) {
  auto cache = forward_cached(params, features);
  std::map<MaskKind, MaskPlane> out;
  for (auto& [kind, hc] : cache.heads)
    out.emplace(kind, MaskPlane{std::move(hc.mask), kind, MaskHardness::kSoft});
  return out;
}

Eigen::MatrixXd blstm_trunk(const MaskNetParams& params, const Eigen::MatrixXd& features) {
  auto fwd = run_lstm(params.fwd, features, false, "blstm.fwd");
  auto bwd = run_lstm(params.bwd, features, true, "blstm.bwd");
  Eigen::MatrixXd concat(features.rows(), 2 * params.dims.hidden);
  concat.leftCols(params.dims.hidden) = fwd.h;
  concat.rightCols(params.dims.hidden) = bwd.h;
  return concat;
}

double loss_value(const ForwardCache& cache, std::span<const LossTerm> terms) {
  double total = 0.0;
  for (const auto& term : terms) {
    auto it = cache.heads.find(term.head);
    if (it == cache.heads.end())
      throw ValidationError("loss term addresses a head the network does not have");
    if (term.target == nullptr) throw ValidationError("loss term without target");
    total += term.weight * bce_loss(*term.target, it->second.mask);
  }
  return total;
}

namespace {

// d loss / d logits for one head, all its terms combined. For the sigmoid
// output, d bce / d logit collapses to (prediction - target) / N.
Eigen::MatrixXd loss_logit_grad(const HeadCache& hc, OutputActivation act,
                                std::span<const LossTerm> terms, MaskKind head) {
  const double n = static_cast<double>(hc.mask.size());
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(hc.mask.rows(), hc.mask.cols());
  for (const auto& term : terms) {
    if (term.head != head) continue;
    if (term.target->rows() != hc.mask.rows() || term.target->cols() != hc.mask.cols())
      throw ValidationError("loss target shape does not match prediction");
    if (act == OutputActivation::kSigmoid) {
      dlogits.array() += term.weight / n * (hc.mask.array() - term.target->array());
    } else {
      Eigen::ArrayXXd q = hc.mask.array().max(kBceClamp).min(1.0 - kBceClamp);
      Eigen::ArrayXXd dmask =
          term.weight / n * (-term.target->array() / q + (1.0 - term.target->array()) / (1.0 - q));
      Eigen::ArrayXXd open =
          ((hc.logits.array() > 0.0) && (hc.logits.array() < 1.0)).cast<double>();
      dlogits.array() += dmask * open;
    }
  }
  return dlogits;
}

void head_backward(const HeadParams& hp, const HeadCache& hc, const Eigen::MatrixXd& concat,
                   const Eigen::MatrixXd& dlogits, HeadParams& grad,
                   Eigen::MatrixXd& dconcat) {
  grad.w2.noalias() += dlogits.transpose() * hc.z1;
  grad.b2 += dlogits.colwise().sum().transpose();

  Eigen::MatrixXd dz1 = dlogits * hp.w2;
  dz1.array() *= (hc.z1.array() > 0.0).cast<double>();

  grad.w1.noalias() += dz1.transpose() * concat;
  grad.b1 += dz1.colwise().sum().transpose();
  dconcat.noalias() += dz1 * hp.w1;
}

void lstm_backward(const LstmDirParams& p, const LstmDirCache& cc, const Eigen::MatrixXd& x,
                   const Eigen::MatrixXd& dh_out, bool reverse, LstmDirParams& grad) {
  const Eigen::Index T = x.rows();
  const Eigen::Index H = p.w_hh.cols();

  Eigen::MatrixXd dgates(T, 4 * H);
  Eigen::MatrixXd h_prev_rows = Eigen::MatrixXd::Zero(T, H);
  for (Eigen::Index k = 1; k < T; ++k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    const Eigen::Index t_prev = reverse ? t + 1 : t - 1;
    h_prev_rows.row(t) = cc.h.row(t_prev);
  }

  Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_rec = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dpre(4 * H);
  for (Eigen::Index k = T - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;

    Eigen::ArrayXd dh = dh_out.row(t).transpose().array() + dh_rec.array();
    Eigen::ArrayXd gi = cc.gate_i.row(t).transpose().array();
    Eigen::ArrayXd gf = cc.gate_f.row(t).transpose().array();
    Eigen::ArrayXd gg = cc.gate_g.row(t).transpose().array();
    Eigen::ArrayXd go = cc.gate_o.row(t).transpose().array();
    Eigen::ArrayXd tc = cc.tanh_c.row(t).transpose().array();

    Eigen::ArrayXd dc = dc_rec.array() + dh * go * (1.0 - tc.square());
    Eigen::ArrayXd dpre_o = dh * tc * go * (1.0 - go);
    Eigen::ArrayXd dpre_i = dc * gg * gi * (1.0 - gi);
    Eigen::ArrayXd dpre_g = dc * gi * (1.0 - gg.square());

    Eigen::ArrayXd c_prev = Eigen::ArrayXd::Zero(H);
    if (k > 0) {
      const Eigen::Index t_prev = reverse ? t + 1 : t - 1;
      c_prev = cc.c.row(t_prev).transpose().array();
    }
    Eigen::ArrayXd dpre_f = dc * c_prev * gf * (1.0 - gf);

    dc_rec = (dc * gf).matrix();
    dpre.segment(0, H) = dpre_i.matrix();
    dpre.segment(H, H) = dpre_f.matrix();
    dpre.segment(2 * H, H) = dpre_g.matrix();
    dpre.segment(3 * H, H) = dpre_o.matrix();
    dgates.row(t) = dpre.transpose();

    dh_rec.noalias() = p.w_hh.transpose() * dpre;
  }

  grad.w_ih.noalias() += dgates.transpose() * x;
  grad.w_hh.noalias() += dgates.transpose() * h_prev_rows;
  grad.b += dgates.colwise().sum().transpose();
}

}  // namespace

MaskNetParams backward(const MaskNetParams& params, const ForwardCache& cache,
                       std::span<const LossTerm> terms) {
  for (const auto& term : terms)
    if (cache.heads.find(term.head) == cache.heads.end())
      throw ValidationError("loss term addresses a head the network does not have");

  MaskNetParams grad = MaskNetParams::zeros(params.dims, params.activation);

  const Eigen::Index T = cache.features.rows();
  const Eigen::Index H = params.dims.hidden;
  Eigen::MatrixXd dconcat = Eigen::MatrixXd::Zero(T, 2 * H);

  for (const auto& [kind, hc] : cache.heads) {
    Eigen::MatrixXd dlogits = loss_logit_grad(hc, params.activation, terms, kind);
    const HeadParams& hp = kind == MaskKind::kSpeech ? params.speech : *params.noise;
    HeadParams& ghp = kind == MaskKind::kSpeech ? grad.speech : *grad.noise;
    head_backward(hp, hc, cache.concat, dlogits, ghp, dconcat);
  }

  lstm_backward(params.fwd, cache.fwd, cache.features, dconcat.leftCols(H), false, grad.fwd);
  lstm_backward(params.bwd, cache.bwd, cache.features, dconcat.rightCols(H), true, grad.bwd);
  return grad;
}

}  // namespace maskbeam
