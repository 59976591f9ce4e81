// runner.hpp - experiment orchestration: configs, characterization, toy training
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "moelab/metrics.hpp"
#include "moelab/moe.hpp"
#include "moelab/router.hpp"

namespace moelab {

// Toy byte-level language model used to exercise routers end to end:
// embedding -> MoE layer -> vocab projection, cross-entropy on next-byte
// prediction, Adam with gradient accumulation.
struct TrainingConfig {
    std::size_t model_hidden = 64;  // token width of the toy model
    std::size_t seq = 256;          // window length
    std::size_t batch = 2;          // sequences per micro-batch
    std::size_t grad_accum = 4;     // micro-batches per optimizer step
    std::size_t steps = 50;         // optimizer steps
    std::size_t log_every = 10;
    double lr = 2e-4;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    bool use_sgd = false;  // plain SGD instead of Adam
};

struct ExperimentConfig {
    RouterKind kind = RouterKind::linear;
    RouterConfig router;  // H = 768, E = 8, k = 2 by default
    ExpertKind expert_kind = ExpertKind::standard2layer;
    std::size_t ffn_size = 0;  // 0 means 4 * hidden
    double alpha_aux = 0.005;
    AuxForm aux_form = AuxForm::squared;
    std::size_t batch = 16, seq = 128;  // characterization input B x S
    std::size_t runs = 1024, reps = 5, warmup = 16;
    std::string embeddings_path;  // empty: synthetic Gaussian states
    TrainingConfig training;

    void validate() const;
    // Applies flat key=value pairs (see parse_kv_text); unknown keys throw
    // std::invalid_argument naming the key.
    void apply(const std::vector<std::pair<std::string, std::string>>& pairs);
    std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

// B x S x H standard Gaussian token states.
Tensor generate_random_states(std::size_t batch, std::size_t seq, std::size_t hidden,
                              std::uint64_t seed);
// B x S x H states with the anisotropy of encoder activations: a shared mean
// offset, a low-rank dominant subspace with decaying spectrum, cluster
// structure, and isotropic noise.
Tensor generate_pretrained_style_states(std::size_t batch, std::size_t seq, std::size_t hidden,
                                        std::uint64_t seed);

// Router + experts per the config (experts seeded from the router seed).
MoeLayer build_layer(const ExperimentConfig& cfg);
// Characterization inputs: the embeddings file when set, synthetic states
// otherwise (seeded from the router seed so runs reproduce).
Tensor characterization_states(const ExperimentConfig& cfg);

// One report row per router: parameter count, per-token latency (median of
// individually timed calls, averaged across reps), mean per-token probability
// entropy, top-k mass, output stddev, balance loss and expert utilization.
// With all_routers every router runs on the same inputs; otherwise only
// cfg.kind does.
CharacterizationReport characterize(const ExperimentConfig& cfg, bool all_routers);

// Deterministic plain-text corpus (100 lines, comfortably over 1000 bytes).
std::string generate_toy_corpus();

struct TrainLogEntry {
    std::size_t step;
    double loss;
};

// Trains the toy model on the corpus bytes. The log holds the pre-update loss
// of the first batch as step 0, then the mean loss of each log_every window.
// Corpora under 1000 bytes throw std::invalid_argument.
std::vector<TrainLogEntry> train_toy(const ExperimentConfig& cfg, const std::string& corpus);

// Writes plotting data for one characterization run under the given path
// prefix: <prefix>_heatmap.csv (token x expert probabilities, optionally also
// a .pgm image), <prefix>_tokens.csv (first five tokens' distributions) and
// <prefix>_histogram.csv (64-bin histogram of the layer output). Returns the
// paths written.
std::vector<std::string> export_figure_data(const ExperimentConfig& cfg, const std::string& prefix,
                                            bool with_pgm);

}  // namespace moelab
