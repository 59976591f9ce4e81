// moe.cpp - expert FFNs, top-k selection and the sparse MoE layer
#include "moelab/moe.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace moelab {

ExpertKind expert_kind_from_name(std::string_view name) {
    if (name == "standard" || name == "standard2layer") return ExpertKind::standard2layer;
    if (name == "swiglu") return ExpertKind::swiglu;
    throw std::invalid_argument("expert_kind_from_name: unknown expert kind '" +
                                std::string(name) + "'; expected one of standard, swiglu");
}

std::string_view expert_kind_name(ExpertKind kind) {
    return kind == ExpertKind::standard2layer ? "standard" : "swiglu";
}

AuxForm aux_form_from_name(std::string_view name) {
    if (name == "product") return AuxForm::product;
    if (name == "squared") return AuxForm::squared;
    throw std::invalid_argument("aux_form_from_name: unknown balance-loss form '" +
                                std::string(name) + "'; expected one of product, squared");
}

std::string_view aux_form_name(AuxForm form) {
    return form == AuxForm::product ? "product" : "squared";
}

// ---------------------------------------------------------------- ExpertFfn

ExpertFfn::ExpertFfn(ExpertConfig config, Rng& rng) : config_(config) {
    if (config_.hidden_size == 0)
        throw std::invalid_argument("ExpertFfn: hidden_size must be positive");
    if (config_.init_std < 0.0)
        throw std::invalid_argument("ExpertFfn: init_std must be non-negative");
    const std::size_t h = config_.hidden_size;
    const std::size_t f = config_.resolved_ffn();
    if (config_.kind == ExpertKind::standard2layer) {
        w_in_ = Tensor({f, h});
        b_in_ = Tensor({f});
        w_out_ = Tensor({h, f});
        b_out_ = Tensor({h});
        rng.fill_normal(w_in_, 0.0, config_.init_std);
        rng.fill_normal(w_out_, 0.0, config_.init_std);
    } else {
        w_ = Tensor({f, h});
        v_ = Tensor({f, h});
        w2_ = Tensor({h, f});
        rng.fill_normal(w_, 0.0, config_.init_std);
        rng.fill_normal(v_, 0.0, config_.init_std);
        rng.fill_normal(w2_, 0.0, config_.init_std);
    }
}

std::size_t ExpertFfn::param_count() const {
    const std::size_t h = config_.hidden_size;
    const std::size_t f = config_.resolved_ffn();
    if (config_.kind == ExpertKind::standard2layer) return f * h + f + h * f + h;
    return 3 * f * h;
}

void ExpertFfn::check_input(const Tensor& x) const {
    if (x.empty() || x.cols() != config_.hidden_size)
        throw std::invalid_argument(
            "ExpertFfn::forward: input width " + std::to_string(x.cols()) +
            " does not match hidden_size " + std::to_string(config_.hidden_size));
}

Tensor ExpertFfn::forward(const Tensor& x) const {
    check_input(x);
    if (config_.kind == ExpertKind::standard2layer) {
        Tensor h = affine_rows(x, w_in_, &b_in_);
        activate(h, config_.activation);
        return affine_rows(h, w_out_, &b_out_);
    }
    Tensor gate = affine_rows(x, w_, nullptr);
    activate(gate, Activation::silu);
    Tensor lin = affine_rows(x, v_, nullptr);
    for (std::size_t i = 0; i < gate.size(); ++i) gate[i] *= lin[i];
    return affine_rows(gate, w2_, nullptr);
}

grad::NodeId ExpertFfn::forward_node(grad::Tape& tape, grad::NodeId x) {
    check_input(tape.value(x));
    if (config_.kind == ExpertKind::standard2layer) {
        grad::NodeId h = tape.linear(x, tape.param(w_in_), tape.param(b_in_));
        h = tape.activation(h, config_.activation);
        return tape.linear(h, tape.param(w_out_), tape.param(b_out_));
    }
    grad::NodeId gate = tape.activation(tape.linear(x, tape.param(w_)), Activation::silu);
    grad::NodeId lin = tape.linear(x, tape.param(v_));
    return tape.linear(tape.mul(gate, lin), tape.param(w2_));
}

std::vector<NamedParam> ExpertFfn::parameters() {
    if (config_.kind == ExpertKind::standard2layer)
        return {{"w_in", &w_in_}, {"b_in", &b_in_}, {"w_out", &w_out_}, {"b_out", &b_out_}};
    return {{"w", &w_}, {"v", &v_}, {"w2", &w2_}};
}

void ExpertFfn::load(const Tensor& w_in, const Tensor& b_in, const Tensor& w_out,
                     const Tensor& b_out) {
    if (config_.kind != ExpertKind::standard2layer)
        throw std::invalid_argument("ExpertFfn::load: only standard experts take a dense FFN");
    if (!w_in.same_shape(w_in_) || !b_in.same_shape(b_in_) || !w_out.same_shape(w_out_) ||
        !b_out.same_shape(b_out_))
        throw std::invalid_argument("ExpertFfn::load: weight shapes do not match this expert");
    w_in_ = w_in;
    b_in_ = b_in;
    w_out_ = w_out;
    b_out_ = b_out;
}

// ------------------------------------------------------------- select_topk

RoutingDecision select_topk(const Tensor& probabilities, std::size_t k) {
    if (probabilities.empty())
        throw std::invalid_argument("select_topk: probabilities must be non-empty");
    const std::size_t experts = probabilities.cols();
    const std::size_t rows = probabilities.rows();
    if (k == 0 || k > experts)
        throw std::invalid_argument("select_topk: k must be in [1, " + std::to_string(experts) +
                                    "], got " + std::to_string(k));
    RoutingDecision decision;
    decision.k = k;
    decision.probabilities = probabilities;
    decision.indices.reserve(rows * k);
    std::vector<std::size_t> wshape = probabilities.shape();
    wshape.back() = k;
    decision.weights = Tensor(std::move(wshape));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::vector<std::size_t> top = topk_indices(probabilities.row(r), experts, k);
        double mass = 0.0;
        for (std::size_t j = 0; j < k; ++j) mass += probabilities.at(r, top[j]);
        for (std::size_t j = 0; j < k; ++j) {
            decision.indices.push_back(top[j]);
            if (mass > 0.0) decision.weights.at(r, j) = probabilities.at(r, top[j]) / mass;
        }
    }
    return decision;
}

// ---------------------------------------------------------------- aux_loss

namespace {

// f_e: fraction of token-slot assignments landing on expert e; sums to k.
std::vector<double> dispatch_fractions(const RoutingDecision& decision, std::size_t num_experts) {
    std::vector<double> f(num_experts, 0.0);
    for (std::size_t e : decision.indices) {
        if (e >= num_experts)
            throw std::invalid_argument("aux_loss: decision routes to expert " +
                                        std::to_string(e) + " but only " +
                                        std::to_string(num_experts) + " exist");
        f[e] += 1.0;
    }
    const double rows = static_cast<double>(decision.rows());
    for (double& v : f) v /= rows;
    return f;
}

// g_e: mean probability mass on expert e, columns summed in row order.
std::vector<double> mean_probabilities(const Tensor& probabilities) {
    const std::size_t rows = probabilities.rows();
    const std::size_t experts = probabilities.cols();
    std::vector<double> g(experts, 0.0);
    for (std::size_t e = 0; e < experts; ++e) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) acc += probabilities.at(r, e);
        g[e] = acc / static_cast<double>(rows);
    }
    return g;
}

}  // namespace

double aux_loss(const RoutingDecision& decision, std::size_t num_experts, double alpha,
                AuxForm form) {
    if (decision.rows() == 0)
        throw std::invalid_argument("aux_loss: decision must cover at least one token");
    if (decision.probabilities.cols() != num_experts)
        throw std::invalid_argument("aux_loss: probabilities width " +
                                    std::to_string(decision.probabilities.cols()) +
                                    " does not match num_experts " +
                                    std::to_string(num_experts));
    const std::vector<double> f = dispatch_fractions(decision, num_experts);
    const std::vector<double> g = mean_probabilities(decision.probabilities);
    double acc = 0.0;
    if (form == AuxForm::product) {
        for (std::size_t e = 0; e < num_experts; ++e) acc += f[e] * g[e];
    } else {
        for (std::size_t e = 0; e < num_experts; ++e) acc += (g[e] * g[e]) * f[e];
    }
    return alpha * static_cast<double>(num_experts) * acc;
}

// ---------------------------------------------------------------- MoeLayer

MoeLayer::MoeLayer(RouterPtr router, ExpertConfig expert_config, double alpha, AuxForm aux_form,
                   std::optional<std::uint64_t> expert_seed)
    : router_(std::move(router)), alpha_(alpha), aux_form_(aux_form) {
    if (!router_) throw std::invalid_argument("MoeLayer: router must not be null");
    if (expert_config.hidden_size != router_->hidden_size())
        throw std::invalid_argument("MoeLayer: expert hidden_size " +
                                    std::to_string(expert_config.hidden_size) +
                                    " does not match router hidden_size " +
                                    std::to_string(router_->hidden_size()));
    if (alpha_ < 0.0) throw std::invalid_argument("MoeLayer: alpha must be non-negative");
    // Distinct stream from the router's so adding experts never shifts router init.
    Rng rng(expert_seed.value_or(router_->config().seed ^ 0x9e3779b97f4a7c15ull));
    experts_.reserve(num_experts());
    for (std::size_t e = 0; e < num_experts(); ++e) experts_.emplace_back(expert_config, rng);
}

RoutingDecision MoeLayer::route(const Tensor& x) const {
    return select_topk(router_->probabilities(x), top_k());
}

Tensor MoeLayer::combine(const Tensor& x, const RoutingDecision& decision) const {
    if (x.rows() != decision.rows())
        throw std::invalid_argument("MoeLayer::combine: decision covers " +
                                    std::to_string(decision.rows()) + " tokens, input has " +
                                    std::to_string(x.rows()));
    const std::size_t experts = num_experts();
    const std::size_t width = x.cols();
    const std::size_t k = decision.k;
    // Token slots bucketed per expert; rows ascend within each bucket so the
    // accumulation order is fixed.
    std::vector<std::vector<std::pair<std::size_t, double>>> buckets(experts);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t j = 0; j < k; ++j)
            buckets[decision.expert_at(r, j)].emplace_back(r, decision.weights.at(r, j));
    Tensor y(x.shape());
    for (std::size_t e = 0; e < experts; ++e) {
        if (buckets[e].empty()) continue;
        Tensor block({buckets[e].size(), width});
        for (std::size_t i = 0; i < buckets[e].size(); ++i) {
            const double* src = x.row(buckets[e][i].first);
            double* dst = block.row(i);
            for (std::size_t c = 0; c < width; ++c) dst[c] = src[c];
        }
        const Tensor out = experts_[e].forward(block);
        for (std::size_t i = 0; i < buckets[e].size(); ++i) {
            double* dst = y.row(buckets[e][i].first);
            const double* src = out.row(i);
            const double weight = buckets[e][i].second;
            for (std::size_t c = 0; c < width; ++c) dst[c] += weight * src[c];
        }
    }
    return y;
}

MoeLayer::ForwardResult MoeLayer::forward(const Tensor& x) const {
    RoutingDecision decision = route(x);
    Tensor y = combine(x, decision);
    const double aux = aux_loss(decision, num_experts(), alpha_, aux_form_);
    return {std::move(y), std::move(decision), aux};
}

MoeLayer::ForwardNodes MoeLayer::forward_node(grad::Tape& tape, grad::NodeId x) {
    const std::size_t rows = tape.value(x).rows();
    const std::size_t experts = num_experts();
    grad::NodeId probs = router_->probabilities_node(tape, x);
    RoutingDecision decision = select_topk(tape.value(probs), top_k());
    // Combine weights read from the masked+renormalized distribution; the
    // selection itself is treated as constant by the tape.
    grad::NodeId masked = tape.topk_mask_renorm(probs, top_k());
    std::vector<std::vector<std::size_t>> buckets(experts);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < decision.k; ++j)
            buckets[decision.expert_at(r, j)].push_back(r);
    grad::NodeId y = -1;
    for (std::size_t e = 0; e < experts; ++e) {
        if (buckets[e].empty()) continue;
        std::vector<std::size_t> flat;
        flat.reserve(buckets[e].size());
        for (std::size_t r : buckets[e]) flat.push_back(r * experts + e);
        grad::NodeId block = tape.gather_rows(x, buckets[e]);
        grad::NodeId out = experts_[e].forward_node(tape, block);
        grad::NodeId scaled = tape.scale_rows(out, tape.select_entries(masked, std::move(flat)));
        grad::NodeId scattered = tape.scatter_rows(scaled, buckets[e], rows);
        y = (y < 0) ? scattered : tape.add(y, scattered);
    }
    // Balance loss: g differentiable through the router, f constant.
    Tensor f({experts});
    for (std::size_t e : decision.indices) f[e] += 1.0;
    for (std::size_t e = 0; e < experts; ++e) f[e] /= static_cast<double>(rows);
    grad::NodeId g = tape.column_mean(probs);
    grad::NodeId fnode = tape.constant(std::move(f));
    grad::NodeId term = (aux_form_ == AuxForm::product)
                            ? tape.mul(fnode, g)
                            : tape.mul(tape.mul(g, g), fnode);
    grad::NodeId aux = tape.scale(tape.sum(term), alpha_ * static_cast<double>(experts));
    return {y, aux, std::move(decision)};
}

void MoeLayer::load_shared_ffn(const Tensor& w_in, const Tensor& b_in, const Tensor& w_out,
                               const Tensor& b_out) {
    for (ExpertFfn& expert : experts_) expert.load(w_in, b_in, w_out, b_out);
}

std::size_t MoeLayer::param_count() const {
    std::size_t total = router_->param_count();
    for (const ExpertFfn& expert : experts_) total += expert.param_count();
    return total;
}

std::vector<NamedParam> MoeLayer::parameters() {
    std::vector<NamedParam> out = router_->parameters();
    for (std::size_t e = 0; e < experts_.size(); ++e) {
        const std::string prefix = "expert" + std::to_string(e) + ".";
        for (NamedParam& p : experts_[e].parameters()) out.push_back({prefix + p.name, p.tensor});
    }
    return out;
}

}  // namespace moelab
