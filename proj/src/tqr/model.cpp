#include "ava/tqr/model.hpp"

#include <cmath>
#include <string>

#include "ava/errors.hpp"
#include "ava/rng.hpp"

namespace ava::tqr {

namespace {

constexpr double kInitStd = 0.02;

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string layer_name(std::size_t l, const char* rest) { return "layer" + std::to_string(l) + "." + rest; }

}  // namespace

std::vector<std::pair<std::string, grad::Shape>> parameter_layout(const ModelConfig& c) {
  const std::size_t d = c.d_model, v = c.vocab_size, f = c.d_ff();
  std::vector<std::pair<std::string, grad::Shape>> out;
  out.emplace_back("tok_emb", grad::Shape{v, d});
  out.emplace_back("pos_emb", grad::Shape{c.max_seq_len, d});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    out.emplace_back(layer_name(l, "ln1.gain"), grad::Shape{d});
    out.emplace_back(layer_name(l, "ln1.bias"), grad::Shape{d});
    out.emplace_back(layer_name(l, "attn.qkv.weight"), grad::Shape{d, 3 * d});
    // Query and value biases only: a key bias shifts every score in a row
    // equally and has no effect after the softmax.
    out.emplace_back(layer_name(l, "attn.qv.bias"), grad::Shape{2 * d});
    out.emplace_back(layer_name(l, "attn.out.weight"), grad::Shape{d, d});
    out.emplace_back(layer_name(l, "attn.out.bias"), grad::Shape{d});
    out.emplace_back(layer_name(l, "ln2.gain"), grad::Shape{d});
    out.emplace_back(layer_name(l, "ln2.bias"), grad::Shape{d});
    out.emplace_back(layer_name(l, "mlp.fc.weight"), grad::Shape{d, f});
    out.emplace_back(layer_name(l, "mlp.fc.bias"), grad::Shape{f});
    out.emplace_back(layer_name(l, "mlp.proj.weight"), grad::Shape{f, d});
    out.emplace_back(layer_name(l, "mlp.proj.bias"), grad::Shape{d});
  }
  out.emplace_back("ln_f.gain", grad::Shape{d});
  out.emplace_back("ln_f.bias", grad::Shape{d});
  out.emplace_back("q_head.weight", grad::Shape{d, v});
  out.emplace_back("q_head.bias", grad::Shape{v});
  out.emplace_back("reward_head.weight", grad::Shape{d, 2});
  out.emplace_back("reward_head.bias", grad::Shape{2});
  return out;
}

template <typename T>
std::size_t Parameters<T>::add(std::string name, Array<T> value) {
  for (const auto& n : names) {
    if (n == name) throw FormatError("duplicate parameter '" + name + "'");
  }
  names.push_back(std::move(name));
  arrays.push_back(std::move(value));
  return arrays.size() - 1;
}

template <typename T>
std::size_t Parameters<T>::index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw FormatError("missing parameter '" + std::string(name) + "'");
}

template <typename T>
std::size_t Parameters<T>::total_size() const {
  std::size_t n = 0;
  for (const auto& a : arrays) n += a.size();
  return n;
}

template <typename T>
TQRModel<T>::TQRModel(ModelConfig config, Parameters<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (params_.count() != layout.size()) {
    throw FormatError("expected " + std::to_string(layout.size()) + " parameter arrays, got " +
                      std::to_string(params_.count()));
  }
  for (const auto& [name, shape] : layout) {
    const auto& a = params_.arrays[params_.index(name)];
    if (a.shape != shape) {
      throw FormatError("parameter '" + name + "' has shape " + grad::shape_string(a.shape) +
                        ", expected " + grad::shape_string(shape));
    }
  }
  resolve_slots();
}

template <typename T>
void TQRModel<T>::resolve_slots() {
  tok_emb_ = params_.index("tok_emb");
  pos_emb_ = params_.index("pos_emb");
  lnf_g_ = params_.index("ln_f.gain");
  lnf_b_ = params_.index("ln_f.bias");
  q_w_ = params_.index("q_head.weight");
  q_b_ = params_.index("q_head.bias");
  r_w_ = params_.index("reward_head.weight");
  r_b_ = params_.index("reward_head.bias");
  layers_.clear();
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    layers_.push_back({params_.index(layer_name(l, "ln1.gain")), params_.index(layer_name(l, "ln1.bias")),
                       params_.index(layer_name(l, "attn.qkv.weight")),
                       params_.index(layer_name(l, "attn.qv.bias")),
                       params_.index(layer_name(l, "attn.out.weight")),
                       params_.index(layer_name(l, "attn.out.bias")), params_.index(layer_name(l, "ln2.gain")),
                       params_.index(layer_name(l, "ln2.bias")), params_.index(layer_name(l, "mlp.fc.weight")),
                       params_.index(layer_name(l, "mlp.fc.bias")),
                       params_.index(layer_name(l, "mlp.proj.weight")),
                       params_.index(layer_name(l, "mlp.proj.bias"))});
  }
}

template <typename T>
TQRModel<T> TQRModel<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Parameters<T> params;
  for (const auto& [name, shape] : parameter_layout(config)) {
    Array<T> a(shape);
    if (ends_with(name, ".gain")) {
      for (auto& v : a.data) v = T{1};
    } else if (!ends_with(name, ".bias")) {
      for (auto& v : a.data) v = static_cast<T>(kInitStd * rng.normal());
    }
    params.add(name, std::move(a));
  }
  return TQRModel(config, std::move(params));
}

template <typename T>
void TQRModel<T>::reinit_q_head(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& v : params_.arrays[q_w_].data) v = static_cast<T>(kInitStd * rng.normal());
  for (auto& v : params_.arrays[q_b_].data) v = T{0};
}

template <typename T>
std::vector<Var<T>> TQRModel<T>::bind(Tape<T>& tape, bool requires_grad) const {
  std::vector<Var<T>> vars;
  vars.reserve(params_.count());
  for (const auto& a : params_.arrays) vars.push_back(tape.leaf(a, requires_grad));
  return vars;
}

template <typename T>
TQROutput<T> TQRModel<T>::forward(Tape<T>& tape, std::span<const Var<T>> p,
                                  std::span<const TokenId> ids) const {
  using namespace grad;
  const std::size_t L = ids.size();
  const std::size_t d = config_.d_model, nh = config_.n_heads, dh = config_.d_head();
  const std::size_t V = config_.vocab_size;
  if (p.size() != params_.count()) throw ShapeError("forward: parameter count mismatch");
  if (L == 0) throw ShapeError("forward: empty sequence");
  if (L > config_.max_seq_len) {
    throw ShapeError("forward: sequence length " + std::to_string(L) + " exceeds max_seq_len " +
                     std::to_string(config_.max_seq_len));
  }
  for (std::size_t i = 0; i < L; ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V) {
      throw DomainError("forward: token id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                        " outside vocabulary of size " + std::to_string(V));
    }
  }

  std::vector<std::int32_t> positions(L);
  for (std::size_t i = 0; i < L; ++i) positions[i] = static_cast<std::int32_t>(i);
  Var<T> x = add(gather_rows(p[tok_emb_], ids), gather_rows(p[pos_emb_], std::span<const std::int32_t>(positions)));

  TQROutput<T> out;
  out.length = L;
  const T inv_sqrt_dh = T{1} / std::sqrt(static_cast<T>(dh));
  for (const LayerSlots& s : layers_) {
    Var<T> h = layer_norm_rows(x, p[s.ln1_g], p[s.ln1_b]);
    Var<T> qkv = matmul(h, p[s.w_qkv]);
    std::vector<Var<T>> heads, maps;
    for (std::size_t k = 0; k < nh; ++k) {
      Var<T> q = add_row_bias(slice_cols(qkv, k * dh, dh), slice(p[s.b_qv], k * dh, dh));
      Var<T> key = slice_cols(qkv, d + k * dh, dh);
      Var<T> v = add_row_bias(slice_cols(qkv, 2 * d + k * dh, dh), slice(p[s.b_qv], d + k * dh, dh));
      Var<T> a = causal_softmax_rows(scale(matmul_nt(q, key), inv_sqrt_dh));
      maps.push_back(a);
      heads.push_back(matmul(a, v));
    }
    out.attention.push_back(maps);
    Var<T> attn = add_row_bias(matmul(concat_cols(heads), p[s.w_o]), p[s.b_o]);
    x = add(x, attn);
    Var<T> m = layer_norm_rows(x, p[s.ln2_g], p[s.ln2_b]);
    m = gelu(add_row_bias(matmul(m, p[s.w_fc]), p[s.b_fc]));
    m = add_row_bias(matmul(m, p[s.w_proj]), p[s.b_proj]);
    x = add(x, m);
  }
  Var<T> hidden = layer_norm_rows(x, p[lnf_g_], p[lnf_b_]);

  out.policy_logits = matmul_nt(hidden, p[tok_emb_]);
  if (config_.q_mode == QMode::head) {
    out.q_values_raw = add_row_bias(matmul(hidden, p[q_w_]), p[q_b_]);
  } else {
    out.q_values_raw =
        log_softmax_rows(scale(softmax_rows(out.policy_logits), static_cast<T>(config_.alpha)));
  }

  Var<T> r = add_row_bias(matmul(hidden, p[r_w_]), p[r_b_]);
  std::vector<std::pair<std::size_t, std::size_t>> col0(L), col1(L);
  for (std::size_t i = 0; i < L; ++i) {
    col0[i] = {i, 0};
    col1[i] = {i, 1};
  }
  out.reward_mean_raw = gather_elements(r, std::span<const std::pair<std::size_t, std::size_t>>(col0));
  Var<T> spread = softplus(gather_elements(r, std::span<const std::pair<std::size_t, std::size_t>>(col1)));
  out.reward_std_raw = add_scalar(spread, kSigmaFloor);

  if (!config_.reward_weighting) {
    out.reward_weights = tape.constant(Array<T>(Shape{L}, T{1}));
    out.q_values = out.q_values_raw;
    out.reward_mean = out.reward_mean_raw;
    out.reward_std = out.reward_std_raw;
    return out;
  }
  out.reward_weights = mean_rows(average(out.attention.back()));
  out.reward_mean = mul(out.reward_mean_raw, out.reward_weights);
  if (config_.weight_mu_only) {
    out.q_values = out.q_values_raw;
    out.reward_std = out.reward_std_raw;
  } else {
    out.q_values = mul_rows(out.q_values_raw, out.reward_weights);
    // The floor is re-applied after scaling so sigma stays >= 1e-4.
    out.reward_std = add_scalar(mul(spread, out.reward_weights), kSigmaFloor);
  }
  return out;
}

template <typename T>
TQRValues<T> values_of(const TQROutput<T>& o) {
  TQRValues<T> v{o.q_values.value(),     o.reward_mean.value(),     o.reward_std.value(),
                 o.reward_weights.value(), o.q_values_raw.value(), o.reward_mean_raw.value(),
                 o.reward_std_raw.value(), o.policy_logits.value(), {}};
  for (const auto& layer : o.attention) {
    auto& dst = v.attention.emplace_back();
    for (const auto& a : layer) dst.push_back(a.value());
  }
  return v;
}

template <typename T>
TQRValues<T> TQRModel<T>::evaluate(std::span<const TokenId> ids) const {
  Tape<T> tape;
  const auto p = bind(tape, false);
  return values_of(forward(tape, p, ids));
}

template struct Parameters<float>;
template struct Parameters<double>;
template class TQRModel<float>;
template class TQRModel<double>;
template TQRValues<float> values_of(const TQROutput<float>&);
template TQRValues<double> values_of(const TQROutput<double>&);

}  // namespace ava::tqr
