#include "moelab/router.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace moelab {

const std::vector<std::string_view>& router_names() {
    static const std::vector<std::string_view> names = {
        "linear", "attention", "mlp", "hybrid", "mlp-hadamard", "hash", "self-supervised"};
    return names;
}

std::string_view router_name(RouterKind kind) {
    return router_names()[static_cast<std::size_t>(kind)];
}

RouterKind router_kind_from_name(std::string_view name) {
    const auto& names = router_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<RouterKind>(i);
    }
    std::string msg = "unknown router '" + std::string(name) + "'; expected one of";
    for (std::size_t i = 0; i < names.size(); ++i) {
        msg += (i == 0 ? " " : ", ");
        msg += names[i];
    }
    throw std::invalid_argument(msg);
}

void RouterConfig::validate() const {
    if (hidden_size < 1) throw std::invalid_argument("RouterConfig: hidden_size must be >= 1");
    if (num_experts < 1) throw std::invalid_argument("RouterConfig: num_experts must be >= 1");
    if (top_k < 1 || top_k > num_experts) {
        throw std::invalid_argument("RouterConfig: top_k must be in [1, num_experts]");
    }
    if (qk_dim < 1) throw std::invalid_argument("RouterConfig: qk_dim must be >= 1");
    if (mlp_hidden < 1) throw std::invalid_argument("RouterConfig: mlp_hidden must be >= 1");
    if (ss_dim < 1) throw std::invalid_argument("RouterConfig: ss_dim must be >= 1");
    if (router_top_k < 1 || router_top_k > num_experts) {
        throw std::invalid_argument("RouterConfig: router_top_k must be in [1, num_experts]");
    }
    if (!(temperature > 0.0)) throw std::invalid_argument("RouterConfig: temperature must be > 0");
    if (orth_lambda < 0.0) throw std::invalid_argument("RouterConfig: orth_lambda must be >= 0");
    if (init_std < 0.0) throw std::invalid_argument("RouterConfig: init_std must be >= 0");
}

Router::Router(RouterKind kind, RouterConfig config) : kind_(kind), config_(std::move(config)) {
    config_.validate();
}

void Router::check_input(const Tensor& x) const {
    if (x.rank() < 1 || x.cols() != config_.hidden_size) {
        throw std::invalid_argument(std::string(name()) +
                                    " router: input token width does not match hidden_size " +
                                    std::to_string(config_.hidden_size));
    }
}

grad::NodeId Router::penalty_node(grad::Tape& tape) { return tape.constant(Tensor({1})); }

namespace {

std::vector<std::size_t> expert_shape(const Tensor& x, std::size_t experts) {
    std::vector<std::size_t> shape = x.shape();
    shape.back() = experts;
    return shape;
}

}  // namespace

// ---------------------------------------------------------------- linear ----

LinearRouter::LinearRouter(RouterConfig config)
    : Router(RouterKind::linear, std::move(config)),
      w_({config_.num_experts, config_.hidden_size}),
      b_({config_.num_experts}) {
    Rng rng(config_.seed);
    init(rng);
}

LinearRouter::LinearRouter(RouterConfig config, Rng& rng)
    : Router(RouterKind::linear, std::move(config)),
      w_({config_.num_experts, config_.hidden_size}),
      b_({config_.num_experts}) {
    init(rng);
}

void LinearRouter::init(Rng& rng) { rng.fill_normal(w_, 0.0, config_.init_std); }

std::size_t LinearRouter::param_count() const {
    return config_.num_experts * config_.hidden_size + (config_.use_bias ? config_.num_experts : 0);
}

Tensor LinearRouter::logits(const Tensor& x) const {
    check_input(x);
    return affine_rows(x, w_, config_.use_bias ? &b_ : nullptr);
}

Tensor LinearRouter::probabilities(const Tensor& x) const { return softmax(logits(x)); }

grad::NodeId LinearRouter::logits_node(grad::Tape& tape, grad::NodeId x) {
    const grad::NodeId w = tape.param(w_);
    return config_.use_bias ? tape.linear(x, w, tape.param(b_)) : tape.linear(x, w);
}

grad::NodeId LinearRouter::probabilities_node(grad::Tape& tape, grad::NodeId x) {
    return tape.softmax_rows(logits_node(tape, x));
}

std::vector<NamedParam> LinearRouter::parameters() {
    std::vector<NamedParam> out = {{"w", &w_}};
    if (config_.use_bias) out.push_back({"b", &b_});
    return out;
}

// ------------------------------------------------------------- attention ----

AttentionRouter::AttentionRouter(RouterConfig config)
    : Router(RouterKind::attention, std::move(config)),
      w_q_({config_.qk_dim, config_.hidden_size}),
      keys_({config_.num_experts, config_.qk_dim}) {
    Rng rng(config_.seed);
    init(rng);
}

AttentionRouter::AttentionRouter(RouterConfig config, Rng& rng)
    : Router(RouterKind::attention, std::move(config)),
      w_q_({config_.qk_dim, config_.hidden_size}),
      keys_({config_.num_experts, config_.qk_dim}) {
    init(rng);
}

void AttentionRouter::init(Rng& rng) {
    rng.fill_normal(w_q_, 0.0, config_.init_std);
    if (config_.uniform_keys) {
        rng.fill_uniform(keys_, -config_.init_std, config_.init_std);
    } else {
        rng.fill_normal(keys_, 0.0, config_.init_std);
    }
}

std::size_t AttentionRouter::param_count() const {
    return config_.qk_dim * config_.hidden_size + config_.num_experts * config_.qk_dim;
}

Tensor AttentionRouter::logits(const Tensor& x) const {
    check_input(x);
    Tensor q = affine_rows(x, w_q_, nullptr);
    l2_normalize_rows_inplace(q);
    Tensor scores = affine_rows(q, keys_, nullptr);
    const double inv = 1.0 / (std::sqrt(static_cast<double>(config_.qk_dim)) * config_.temperature);
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] *= inv;
    return scores;
}

Tensor AttentionRouter::probabilities(const Tensor& x) const { return softmax(logits(x)); }

grad::NodeId AttentionRouter::logits_node(grad::Tape& tape, grad::NodeId x) {
    const grad::NodeId q = tape.linear(x, tape.param(w_q_));
    const grad::NodeId qn = tape.l2_normalize_rows(q);
    const grad::NodeId scores = tape.linear(qn, tape.param(keys_));
    return tape.scale(scores,
                      1.0 / (std::sqrt(static_cast<double>(config_.qk_dim)) * config_.temperature));
}

grad::NodeId AttentionRouter::probabilities_node(grad::Tape& tape, grad::NodeId x) {
    return tape.softmax_rows(logits_node(tape, x));
}

std::vector<NamedParam> AttentionRouter::parameters() {
    return {{"w_q", &w_q_}, {"keys", &keys_}};
}

// ------------------------------------------------------------------- mlp ----

MlpRouter::MlpRouter(RouterConfig config)
    : Router(RouterKind::mlp, std::move(config)),
      w1_({config_.mlp_hidden, config_.hidden_size}),
      b1_({config_.mlp_hidden}),
      w2_({config_.num_experts, config_.mlp_hidden}),
      b2_({config_.num_experts}) {
    Rng rng(config_.seed);
    rng.fill_normal(w1_, 0.0, config_.init_std);
    rng.fill_normal(w2_, 0.0, config_.init_std);
}

std::size_t MlpRouter::param_count() const {
    const std::size_t d_h = config_.mlp_hidden;
    return d_h * config_.hidden_size + d_h + config_.num_experts * d_h + config_.num_experts;
}

Tensor MlpRouter::probabilities(const Tensor& x) const {
    check_input(x);
    Tensor h = affine_rows(x, w1_, &b1_);
    activate(h, config_.activation);
    return softmax(affine_rows(h, w2_, &b2_));
}

grad::NodeId MlpRouter::probabilities_node(grad::Tape& tape, grad::NodeId x) {
    const grad::NodeId h =
        tape.activation(tape.linear(x, tape.param(w1_), tape.param(b1_)), config_.activation);
    return tape.softmax_rows(tape.linear(h, tape.param(w2_), tape.param(b2_)));
}

std::vector<NamedParam> MlpRouter::parameters() {
    return {{"w1", &w1_}, {"b1", &b1_}, {"w2", &w2_}, {"b2", &b2_}};
}

// ---------------------------------------------------------------- hybrid ----

namespace {

RouterConfig without_bias(RouterConfig config) {
    config.use_bias = false;  // the hybrid's linear leg carries no bias
    return config;
}

}  // namespace

HybridRouter::HybridRouter(RouterConfig config)
    : Router(RouterKind::hybrid, std::move(config)),
      init_rng_(config_.seed),
      linear_(without_bias(config_), init_rng_),
      attention_(config_, init_rng_),
      mix_({2}) {}

std::size_t HybridRouter::param_count() const {
    return linear_.param_count() + attention_.param_count() + 2;
}

Tensor HybridRouter::mix_weights() const { return softmax(mix_); }

Tensor HybridRouter::logits(const Tensor& x) const {
    const Tensor weights = mix_weights();
    const Tensor lin = linear_.logits(x);
    const Tensor att = attention_.logits(x);
    Tensor out(lin.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = weights[0] * lin[i] + weights[1] * att[i];
    }
    return out;
}

Tensor HybridRouter::probabilities(const Tensor& x) const { return softmax(logits(x)); }

grad::NodeId HybridRouter::probabilities_node(grad::Tape& tape, grad::NodeId x) {
    const grad::NodeId lin = linear_.logits_node(tape, x);
    const grad::NodeId att = attention_.logits_node(tape, x);
    const grad::NodeId weights = tape.softmax_rows(tape.param(mix_));
    const grad::NodeId scaled_lin = tape.mul_scalar_node(lin, tape.select_entries(weights, {0}));
    const grad::NodeId scaled_att = tape.mul_scalar_node(att, tape.select_entries(weights, {1}));
    return tape.softmax_rows(tape.add(scaled_lin, scaled_att));
}

std::vector<NamedParam> HybridRouter::parameters() {
    std::vector<NamedParam> out;
    for (const NamedParam& p : linear_.parameters()) out.push_back({"linear." + p.name, p.tensor});
    for (const NamedParam& p : attention_.parameters()) {
        out.push_back({"attention." + p.name, p.tensor});
    }
    out.push_back({"mix", &mix_});
    return out;
}

// ---------------------------------------------------------- mlp-hadamard ----

MlpHadamardRouter::MlpHadamardRouter(RouterConfig config)
    : Router(RouterKind::mlp_hadamard, std::move(config)),
      d_h_(config_.hadamard_hidden == 0 ? config_.hidden_size : config_.hadamard_hidden),
      w1_({d_h_, config_.hidden_size}),
      b1_({d_h_}),
      w2_({config_.num_experts, d_h_}),
      b2_({config_.num_experts}) {
    Rng rng(config_.seed);
    rng.fill_normal(w1_, 0.0, config_.init_std);
    if (has_projection()) {
        w_p_ = Tensor({d_h_, config_.hidden_size});
        rng.fill_normal(w_p_, 0.0, config_.init_std);
    }
    rng.fill_normal(w2_, 0.0, config_.init_std);
}

std::size_t MlpHadamardRouter::param_count() const {
    const std::size_t proj = has_projection() ? d_h_ * config_.hidden_size : 0;
    return d_h_ * config_.hidden_size + d_h_ + config_.num_experts * d_h_ + config_.num_experts +
           proj;
}

Tensor MlpHadamardRouter::probabilities(const Tensor& x) const {
    check_input(x);
    Tensor h = affine_rows(x, w1_, &b1_);
    activate(h, config_.activation);
    const Tensor& x_p = has_projection() ? affine_rows(x, w_p_, nullptr) : x;
    Tensor gated(h.shape());
    for (std::size_t i = 0; i < gated.size(); ++i) gated[i] = h[i] * x_p[i];
    Tensor p = softmax(affine_rows(gated, w2_, &b2_));
    return grad::straight_through_topk(p, config_.router_top_k);
}

grad::NodeId MlpHadamardRouter::probabilities_node(grad::Tape& tape, grad::NodeId x) {
    const grad::NodeId h =
        tape.activation(tape.linear(x, tape.param(w1_), tape.param(b1_)), config_.activation);
    const grad::NodeId x_p = has_projection() ? tape.linear(x, tape.param(w_p_)) : x;
    const grad::NodeId gated = tape.mul(h, x_p);
    const grad::NodeId p =
        tape.softmax_rows(tape.linear(gated, tape.param(w2_), tape.param(b2_)));
    return tape.topk_mask_renorm(p, config_.router_top_k);
}

double MlpHadamardRouter::penalty() const {
    if (config_.orth_lambda == 0.0) return 0.0;
    const Tensor gram = matmul_nt(w2_, w2_);
    double acc = 0.0;
    for (std::size_t i = 0; i < gram.rows(); ++i) {
        for (std::size_t j = 0; j < gram.cols(); ++j) {
            const double d = gram.at(i, j) - (i == j ? 1.0 : 0.0);
            acc += d * d;
        }
    }
    return config_.orth_lambda * acc;
}

grad::NodeId MlpHadamardRouter::penalty_node(grad::Tape& tape) {
    if (config_.orth_lambda == 0.0) return tape.constant(Tensor({1}));
    const grad::NodeId w2 = tape.param(w2_);
    const grad::NodeId gram = tape.linear(w2, w2);  // W2 W2^T
    const grad::NodeId diff = tape.sub(gram, tape.constant(Tensor::identity(config_.num_experts)));
    return tape.scale(tape.sum(tape.mul(diff, diff)), config_.orth_lambda);
}

std::vector<NamedParam> MlpHadamardRouter::parameters() {
    std::vector<NamedParam> out = {{"w1", &w1_}, {"b1", &b1_}};
    if (has_projection()) out.push_back({"w_p", &w_p_});
    out.push_back({"w2", &w2_});
    out.push_back({"b2", &b2_});
    return out;
}

// ------------------------------------------------------------------ hash ----

HashRouter::HashRouter(RouterConfig config) : Router(RouterKind::hash, std::move(config)) {}

std::size_t HashRouter::expert_index(const double* token, std::size_t width) const {
    std::uint64_t bits = 0;
    const std::size_t n = width < 64 ? width : 64;
    for (std::size_t i = 0; i < n; ++i) {
        if (token[i] < 0.0) bits |= std::uint64_t{1} << i;
    }
    // FNV-1a over the 8 bytes of the sign pattern, basis perturbed by the seed,
    // then a splitmix64-style finalizer: raw FNV low bits are too regular mod E.
    std::uint64_t h = 14695981039346656037ull ^ config_.seed;
    for (std::size_t byte = 0; byte < 8; ++byte) {
        h ^= (bits >> (8 * byte)) & 0xffull;
        h *= 1099511628211ull;
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return static_cast<std::size_t>(h % config_.num_experts);
}

Tensor HashRouter::probabilities(const Tensor& x) const {
    check_input(x);
    Tensor p(expert_shape(x, config_.num_experts));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        p.row(r)[expert_index(x.row(r), x.cols())] = 1.0;
    }
    return p;
}

grad::NodeId HashRouter::probabilities_node(grad::Tape& tape, grad::NodeId x) {
    return tape.constant(probabilities(tape.value(x)));
}

// ------------------------------------------------------- self-supervised ----

SelfSupervisedRouter::SelfSupervisedRouter(RouterConfig config)
    : Router(RouterKind::self_supervised, std::move(config)),
      w_a_({config_.mlp_hidden, config_.hidden_size}),
      b_a_({config_.mlp_hidden}),
      w_b_({config_.ss_dim, config_.mlp_hidden}),
      b_b_({config_.ss_dim}),
      w_route_({config_.num_experts, config_.ss_dim}),
      b_route_({config_.num_experts}) {
    Rng rng(config_.seed);
    rng.fill_normal(w_a_, 0.0, config_.init_std);
    rng.fill_normal(w_b_, 0.0, config_.init_std);
    rng.fill_normal(w_route_, 0.0, config_.init_std);
}

std::size_t SelfSupervisedRouter::param_count() const {
    const std::size_t d_h = config_.mlp_hidden, d_ss = config_.ss_dim;
    return d_h * config_.hidden_size + d_h + d_ss * d_h + d_ss +
           config_.num_experts * d_ss + config_.num_experts;
}

Tensor SelfSupervisedRouter::features(const Tensor& x) const {
    check_input(x);
    Tensor h = affine_rows(x, w_a_, &b_a_);
    activate(h, config_.activation);
    return affine_rows(h, w_b_, &b_b_);
}

grad::NodeId SelfSupervisedRouter::features_node(grad::Tape& tape, grad::NodeId x) {
    const grad::NodeId h =
        tape.activation(tape.linear(x, tape.param(w_a_), tape.param(b_a_)), config_.activation);
    return tape.linear(h, tape.param(w_b_), tape.param(b_b_));
}

Tensor SelfSupervisedRouter::probabilities(const Tensor& x) const {
    return softmax(affine_rows(features(x), w_route_, &b_route_));
}

grad::NodeId SelfSupervisedRouter::probabilities_node(grad::Tape& tape, grad::NodeId x) {
    const grad::NodeId f = features_node(tape, x);
    return tape.softmax_rows(tape.linear(f, tape.param(w_route_), tape.param(b_route_)));
}

std::vector<NamedParam> SelfSupervisedRouter::parameters() {
    return {{"w_a", &w_a_},         {"b_a", &b_a_}, {"w_b", &w_b_},
            {"b_b", &b_b_},         {"w_route", &w_route_}, {"b_route", &b_route_}};
}

// ------------------------------------------------------------- factories ----

RouterPtr make_router(RouterKind kind, const RouterConfig& config) {
    switch (kind) {
        case RouterKind::linear: return std::make_unique<LinearRouter>(config);
        case RouterKind::attention: return std::make_unique<AttentionRouter>(config);
        case RouterKind::mlp: return std::make_unique<MlpRouter>(config);
        case RouterKind::hybrid: return std::make_unique<HybridRouter>(config);
        case RouterKind::mlp_hadamard: return std::make_unique<MlpHadamardRouter>(config);
        case RouterKind::hash: return std::make_unique<HashRouter>(config);
        case RouterKind::self_supervised: return std::make_unique<SelfSupervisedRouter>(config);
    }
    throw std::invalid_argument("make_router: unknown router kind");
}

RouterPtr make_router(std::string_view name, const RouterConfig& config) {
    return make_router(router_kind_from_name(name), config);
}

// ------------------------------------------------------- contrastive loss ----

double contrastive_loss(const Tensor& anchor, const Tensor& positive,
                        const std::vector<Tensor>& negatives, double tau) {
    if (negatives.empty()) {
        throw std::invalid_argument("contrastive_loss: negatives must be non-empty");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be > 0");
    const std::size_t d = anchor.size();
    if (positive.size() != d) {
        throw std::invalid_argument("contrastive_loss: feature widths differ");
    }
    for (const Tensor& n : negatives) {
        if (n.size() != d) throw std::invalid_argument("contrastive_loss: feature widths differ");
    }
    const auto cosine = [d](const Tensor& a, const Tensor& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        const double denom = std::sqrt(na) * std::sqrt(nb);
        return dot / (denom > 1e-12 ? denom : 1e-12);
    };
    std::vector<double> logits;
    logits.reserve(negatives.size() + 1);
    logits.push_back(cosine(anchor, positive) / tau);
    for (const Tensor& n : negatives) logits.push_back(cosine(anchor, n) / tau);
    double hi = logits[0];
    for (double l : logits) hi = std::max(hi, l);
    double lse = 0.0;
    for (double l : logits) lse += std::exp(l - hi);
    return hi + std::log(lse) - logits[0];
}

}  // namespace moelab
