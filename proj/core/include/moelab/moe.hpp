// moe.hpp - expert FFNs, top-k dispatch, weighted combination, balance loss
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moelab/router.hpp"
#include "moelab/tensor.hpp"

namespace moelab {

enum class ExpertKind { standard2layer, swiglu };

ExpertKind expert_kind_from_name(std::string_view name);
std::string_view expert_kind_name(ExpertKind kind);

struct ExpertConfig {
    std::size_t hidden_size = 768;  // H; expert output width equals input width
    std::size_t ffn_size = 0;       // d_ff; 0 means 4*H
    ExpertKind kind = ExpertKind::standard2layer;
    Activation activation = Activation::gelu;  // standard expert's nonlinearity
    double init_std = 0.02;

    std::size_t resolved_ffn() const { return ffn_size == 0 ? 4 * hidden_size : ffn_size; }
};

// One expert feed-forward block, a drop-in FFN: rows x H -> rows x H.
// standard2layer: y = W_out act(W_in x + b_in) + b_out
// swiglu:         y = (silu(x W^T) ⊙ (x V^T)) W2^T, no biases
class ExpertFfn {
public:
    // Draws weights from the provided stream (Gaussian, init_std).
    ExpertFfn(ExpertConfig config, Rng& rng);

    const ExpertConfig& config() const { return config_; }
    ExpertKind kind() const { return config_.kind; }
    std::size_t param_count() const;

    Tensor forward(const Tensor& x) const;
    grad::NodeId forward_node(grad::Tape& tape, grad::NodeId x);
    // standard2layer: w_in, b_in, w_out, b_out; swiglu: w, v, w2.
    std::vector<NamedParam> parameters();
    // Replaces a standard expert's weights with the given dense FFN (shape-checked).
    void load(const Tensor& w_in, const Tensor& b_in, const Tensor& w_out, const Tensor& b_out);

private:
    void check_input(const Tensor& x) const;

    ExpertConfig config_;
    Tensor w_in_, b_in_;   // d_ff x H, d_ff      (standard)
    Tensor w_out_, b_out_; // H x d_ff, H         (standard)
    Tensor w_, v_, w2_;    // d_ff x H, d_ff x H, H x d_ff (swiglu)
};

// Per-token dispatch plan: for every token row, the k selected experts (ties
// toward the lowest index, so indices are distinct) and their combine weights
// (the selected probabilities renormalized to sum 1).
struct RoutingDecision {
    Tensor probabilities;              // ... x E, full router output
    std::vector<std::size_t> indices;  // rows x k, flattened row-major
    Tensor weights;                    // ... x k
    std::size_t k = 0;

    std::size_t rows() const { return k == 0 ? 0 : indices.size() / k; }
    std::size_t expert_at(std::size_t row, std::size_t slot) const {
        return indices[row * k + slot];
    }
};

// Throws std::invalid_argument when k is outside [1, E].
RoutingDecision select_topk(const Tensor& probabilities, std::size_t k);

enum class AuxForm { product, squared };

AuxForm aux_form_from_name(std::string_view name);
std::string_view aux_form_name(AuxForm form);

// Load-balance penalty over a batch. With f_e the fraction of token-slot
// assignments dispatched to expert e (sums to k) and g_e the mean probability
// mass on expert e:  product form = alpha * E * sum_e f_e g_e;
//                    squared form = alpha * E * sum_e g_e^2 f_e.
double aux_loss(const RoutingDecision& decision, std::size_t num_experts, double alpha,
                AuxForm form);

// The MoE layer: router + E experts + top-k weighted combination. A drop-in
// replacement for a dense FFN of the same width. Immutable during inference;
// training mutates parameters through parameters().
class MoeLayer {
public:
    struct ForwardResult {
        Tensor output;  // same shape as the input
        RoutingDecision decision;
        double aux = 0.0;
    };
    struct ForwardNodes {
        grad::NodeId output = -1;
        grad::NodeId aux = -1;
        RoutingDecision decision;
    };

    // Builds E experts drawn sequentially from expert_seed (derived from the
    // router's seed when not given). alpha is the balance-loss weight.
    MoeLayer(RouterPtr router, ExpertConfig expert_config, double alpha = 0.005,
             AuxForm aux_form = AuxForm::squared,
             std::optional<std::uint64_t> expert_seed = std::nullopt);

    const Router& router() const { return *router_; }
    Router& router() { return *router_; }
    std::size_t num_experts() const { return router_->num_experts(); }
    std::size_t top_k() const { return router_->config().top_k; }
    double alpha() const { return alpha_; }
    AuxForm aux_form() const { return aux_form_; }
    ExpertFfn& expert(std::size_t e) { return experts_[e]; }
    const ExpertFfn& expert(std::size_t e) const { return experts_[e]; }

    // Router probabilities + top-k selection.
    RoutingDecision route(const Tensor& x) const;
    // Weighted combination of the selected experts' outputs. Experts not
    // selected for a token are not evaluated on it; evaluation and accumulation
    // run in ascending expert order for reproducible summation.
    Tensor combine(const Tensor& x, const RoutingDecision& decision) const;
    ForwardResult forward(const Tensor& x) const;
    // The same computation recorded on a tape (selection is constant; gradients
    // flow through probabilities, combine weights and expert parameters).
    ForwardNodes forward_node(grad::Tape& tape, grad::NodeId x);

    // Copies one dense FFN into every expert (shape-checked), mirroring
    // initialization from a pretrained host's feed-forward block.
    void load_shared_ffn(const Tensor& w_in, const Tensor& b_in, const Tensor& w_out,
                         const Tensor& b_out);

    std::size_t param_count() const;
    // Router parameters plus expert parameters prefixed expert<i>.
    std::vector<NamedParam> parameters();

private:
    RouterPtr router_;
    std::vector<ExpertFfn> experts_;
    double alpha_;
    AuxForm aux_form_;
};

}  // namespace moelab
