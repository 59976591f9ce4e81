// router.hpp - the seven routing policies behind one interface
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "moelab/kernels.hpp"
#include "moelab/rng.hpp"
#include "moelab/tape.hpp"
#include "moelab/tensor.hpp"

namespace moelab {

enum class RouterKind { linear, attention, mlp, hybrid, mlp_hadamard, hash, self_supervised };

// The seven selectable names, in documented order:
// linear, attention, mlp, hybrid, mlp-hadamard, hash, self-supervised.
const std::vector<std::string_view>& router_names();
std::string_view router_name(RouterKind kind);
// Unknown names throw std::invalid_argument listing all seven valid names.
RouterKind router_kind_from_name(std::string_view name);

struct RouterConfig {
    std::size_t hidden_size = 768;  // token width H
    std::size_t num_experts = 8;    // E
    std::size_t top_k = 2;          // dispatch width k used by the MoE layer
    std::size_t qk_dim = 64;        // query/key width of the attention router
    std::size_t mlp_hidden = 128;   // hidden width of the mlp / self-supervised extractor
    std::size_t ss_dim = 64;        // feature width of the self-supervised router
    // Hidden width of the mlp-hadamard router; 0 means "equal to hidden_size",
    // which skips the input projection and gates with the raw token.
    std::size_t hadamard_hidden = 0;
    std::size_t router_top_k = 2;   // hard mask width of the mlp-hadamard router
    double temperature = 1.0;       // attention score temperature, > 0
    double orth_lambda = 0.0;       // weight of the routing-head orthogonality penalty
    double init_std = 0.02;         // Gaussian init scale for all projections
    bool use_bias = false;          // bias on the linear router's logits
    bool uniform_keys = false;      // expert keys drawn uniform instead of Gaussian
    Activation activation = Activation::gelu;
    std::uint64_t seed = 42;

    // Throws std::invalid_argument on any violated bound.
    void validate() const;
};

struct NamedParam {
    std::string name;
    Tensor* tensor;
};

// A router maps token rows (... x H) to probability rows (... x E). Routers are
// deterministic in (parameters, input) and immutable during inference; training
// code mutates parameters through the tensors exposed by parameters().
class Router {
public:
    virtual ~Router() = default;

    RouterKind kind() const { return kind_; }
    std::string_view name() const { return router_name(kind_); }
    const RouterConfig& config() const { return config_; }
    std::size_t num_experts() const { return config_.num_experts; }
    std::size_t hidden_size() const { return config_.hidden_size; }

    // Count of learnable scalars.
    virtual std::size_t param_count() const = 0;
    // Per-token distribution over experts; rows sum to 1 (hash rows are one-hot).
    virtual Tensor probabilities(const Tensor& x) const = 0;
    // Same computation recorded on a tape for training. Parameter tensors are
    // registered on the tape (deduplicated), so gradients map 1:1 to parameters().
    virtual grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) = 0;
    // Structural regularization added to the training loss; zero for most routers.
    virtual double penalty() const { return 0.0; }
    // Tape form of penalty(); a zero constant unless overridden.
    virtual grad::NodeId penalty_node(grad::Tape& tape);
    // Named parameter tensors, in serialization order.
    virtual std::vector<NamedParam> parameters() = 0;

protected:
    Router(RouterKind kind, RouterConfig config);
    // Throws unless the input's last dimension is hidden_size.
    void check_input(const Tensor& x) const;

    RouterKind kind_;
    RouterConfig config_;
};

using RouterPtr = std::unique_ptr<Router>;

RouterPtr make_router(RouterKind kind, const RouterConfig& config);
RouterPtr make_router(std::string_view name, const RouterConfig& config);

// p(e|x) = softmax(W x + b). W is E x H; b present only with use_bias.
class LinearRouter final : public Router {
public:
    explicit LinearRouter(RouterConfig config);
    // Draws initialization from the caller's stream (used by the hybrid router).
    LinearRouter(RouterConfig config, Rng& rng);

    std::size_t param_count() const override;
    Tensor probabilities(const Tensor& x) const override;
    grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) override;
    std::vector<NamedParam> parameters() override;

    Tensor logits(const Tensor& x) const;
    grad::NodeId logits_node(grad::Tape& tape, grad::NodeId x);

private:
    void init(Rng& rng);

    Tensor w_;  // E x H
    Tensor b_;  // E, when use_bias
};

// Tokens as queries against learned expert keys:
// q = l2_normalize(W_q x); scores = q K^T / (sqrt(d_k) * temperature); softmax rows.
class AttentionRouter final : public Router {
public:
    explicit AttentionRouter(RouterConfig config);
    AttentionRouter(RouterConfig config, Rng& rng);

    std::size_t param_count() const override;
    Tensor probabilities(const Tensor& x) const override;
    grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) override;
    std::vector<NamedParam> parameters() override;

    Tensor logits(const Tensor& x) const;
    grad::NodeId logits_node(grad::Tape& tape, grad::NodeId x);

private:
    void init(Rng& rng);

    Tensor w_q_;   // d_k x H
    Tensor keys_;  // E x d_k
};

// p(e|x) = softmax(W2 act(W1 x + b1) + b2).
class MlpRouter final : public Router {
public:
    explicit MlpRouter(RouterConfig config);

    std::size_t param_count() const override;
    Tensor probabilities(const Tensor& x) const override;
    grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) override;
    std::vector<NamedParam> parameters() override;

private:
    Tensor w1_, b1_;  // d_h x H, d_h
    Tensor w2_, b2_;  // E x d_h, E
};

// Convex mix of the linear and attention routers' pre-softmax logits; the two
// mixing weights are softmax(mix) with mix a learned 2-vector.
class HybridRouter final : public Router {
public:
    explicit HybridRouter(RouterConfig config);

    std::size_t param_count() const override;
    Tensor probabilities(const Tensor& x) const override;
    grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) override;
    std::vector<NamedParam> parameters() override;

    const LinearRouter& linear_part() const { return linear_; }
    const AttentionRouter& attention_part() const { return attention_; }
    // (w_linear, w_attention) = softmax(mix).
    Tensor mix_weights() const;
    Tensor logits(const Tensor& x) const;

private:
    Rng init_rng_;  // one stream feeding both legs' initialization draws
    LinearRouter linear_;
    AttentionRouter attention_;
    Tensor mix_;  // 2 logits
};

// p(e|x) = softmax(W2 (act(W1 x + b1) ⊙ x_p) + b2), hard-masked to the top
// router_top_k entries per row and renormalized. x_p is the token itself when
// d_h = H (default), otherwise a learned projection W_p x.
class MlpHadamardRouter final : public Router {
public:
    explicit MlpHadamardRouter(RouterConfig config);

    std::size_t param_count() const override;
    Tensor probabilities(const Tensor& x) const override;
    grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) override;
    std::vector<NamedParam> parameters() override;

    // orth_lambda * ||W2 W2^T - I||_F^2, pulling expert directions toward an
    // orthonormal frame.
    double penalty() const override;
    grad::NodeId penalty_node(grad::Tape& tape) override;

    std::size_t hadamard_width() const { return d_h_; }
    bool has_projection() const { return d_h_ != config_.hidden_size; }

private:
    std::size_t d_h_;
    Tensor w1_, b1_;  // d_h x H, d_h
    Tensor w_p_;      // d_h x H, only when d_h != H
    Tensor w2_, b2_;  // E x d_h, E
};

// Parameter-free deterministic dispatch: a 64-bit mix of the sign-bit pattern
// of the first min(H, 64) coordinates, reduced mod E, emitted one-hot.
class HashRouter final : public Router {
public:
    explicit HashRouter(RouterConfig config);

    std::size_t param_count() const override { return 0; }
    Tensor probabilities(const Tensor& x) const override;
    // Constant node: hash routing passes no gradient.
    grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) override;
    std::vector<NamedParam> parameters() override { return {}; }

    std::size_t expert_index(const double* token, std::size_t width) const;
};

// Routing over features from a trainable 2-layer extractor:
// f(x) = W_b act(W_a x + b_a) + b_b; p(e|x) = softmax(W_route f(x) + b_route).
// The extractor is pretrained with the contrastive objective below.
class SelfSupervisedRouter final : public Router {
public:
    explicit SelfSupervisedRouter(RouterConfig config);

    std::size_t param_count() const override;
    Tensor probabilities(const Tensor& x) const override;
    grad::NodeId probabilities_node(grad::Tape& tape, grad::NodeId x) override;
    std::vector<NamedParam> parameters() override;

    Tensor features(const Tensor& x) const;
    grad::NodeId features_node(grad::Tape& tape, grad::NodeId x);

private:
    Tensor w_a_, b_a_;          // d_h x H, d_h
    Tensor w_b_, b_b_;          // ss_dim x d_h, ss_dim
    Tensor w_route_, b_route_;  // E x ss_dim, E
};

// InfoNCE with cosine similarity: -log( exp(sim(a,p)/tau) / (exp(sim(a,p)/tau)
// + sum_j exp(sim(a,n_j)/tau)) ). All inputs rank-1 of one width; negatives
// must be non-empty; tau > 0.
double contrastive_loss(const Tensor& anchor, const Tensor& positive,
                        const std::vector<Tensor>& negatives, double tau);

}  // namespace moelab
