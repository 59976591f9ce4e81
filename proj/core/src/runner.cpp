// runner.cpp - experiment orchestration and the toy training loop
#include "moelab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <unordered_map>

#include "moelab/serialize.hpp"
#include "moelab/tape.hpp"

namespace moelab {

namespace {

// Distinct derived streams so inputs, latency probes and model extras never
// alias the router's initialization stream.
constexpr std::uint64_t kInputSalt = 0x5a17e6b350f7a21dull;
constexpr std::uint64_t kLatencySalt = 0x2d99787926d46932ull;
constexpr std::uint64_t kModelSalt = 0x8f14025a1c0e3b67ull;
constexpr std::uint64_t kBatchSalt = 0x41c64e6da3bc0074ull;

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::size_t parse_size(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': expected an integer, got '" +
                                    value + "'");
    return static_cast<std::size_t>(v);
}

double parse_real(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value +
                                    "'");
    return v;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + value +
                                "'");
}

}  // namespace

void ExperimentConfig::validate() const {
    router.validate();
    if (batch == 0 || seq == 0)
        throw std::invalid_argument("ExperimentConfig: batch and seq must be positive");
    if (runs == 0 || reps == 0)
        throw std::invalid_argument("ExperimentConfig: runs and reps must be positive");
    if (alpha_aux < 0.0)
        throw std::invalid_argument("ExperimentConfig: alpha_aux must be non-negative");
    if (training.model_hidden == 0 || training.seq == 0 || training.batch == 0 ||
        training.grad_accum == 0 || training.steps == 0 || training.log_every == 0)
        throw std::invalid_argument("ExperimentConfig: training sizes must be positive");
    if (training.lr <= 0.0) throw std::invalid_argument("ExperimentConfig: lr must be positive");
}

void ExperimentConfig::apply(const std::vector<std::pair<std::string, std::string>>& pairs) {
    for (const auto& [key, value] : pairs) {
        if (key == "router") kind = router_kind_from_name(value);
        else if (key == "hidden") router.hidden_size = parse_size(value, key);
        else if (key == "experts") router.num_experts = parse_size(value, key);
        else if (key == "top_k") router.top_k = parse_size(value, key);
        else if (key == "qk_dim") router.qk_dim = parse_size(value, key);
        else if (key == "mlp_hidden") router.mlp_hidden = parse_size(value, key);
        else if (key == "ss_dim") router.ss_dim = parse_size(value, key);
        else if (key == "hadamard_hidden") router.hadamard_hidden = parse_size(value, key);
        else if (key == "router_top_k") router.router_top_k = parse_size(value, key);
        else if (key == "temperature") router.temperature = parse_real(value, key);
        else if (key == "orth_lambda") router.orth_lambda = parse_real(value, key);
        else if (key == "init_std") router.init_std = parse_real(value, key);
        else if (key == "use_bias") router.use_bias = parse_bool(value, key);
        else if (key == "uniform_keys") router.uniform_keys = parse_bool(value, key);
        else if (key == "activation") router.activation = activation_from_name(value);
        else if (key == "seed") router.seed = parse_size(value, key);
        else if (key == "expert_kind") expert_kind = expert_kind_from_name(value);
        else if (key == "ffn_size") ffn_size = parse_size(value, key);
        else if (key == "alpha_aux") alpha_aux = parse_real(value, key);
        else if (key == "aux_form") aux_form = aux_form_from_name(value);
        else if (key == "batch") batch = parse_size(value, key);
        else if (key == "seq") seq = parse_size(value, key);
        else if (key == "runs") runs = parse_size(value, key);
        else if (key == "reps") reps = parse_size(value, key);
        else if (key == "warmup") warmup = parse_size(value, key);
        else if (key == "embeddings") embeddings_path = value;
        else if (key == "train_hidden") training.model_hidden = parse_size(value, key);
        else if (key == "train_seq") training.seq = parse_size(value, key);
        else if (key == "train_batch") training.batch = parse_size(value, key);
        else if (key == "grad_accum") training.grad_accum = parse_size(value, key);
        else if (key == "steps") training.steps = parse_size(value, key);
        else if (key == "log_every") training.log_every = parse_size(value, key);
        else if (key == "lr") training.lr = parse_real(value, key);
        else if (key == "use_sgd") training.use_sgd = parse_bool(value, key);
        else
            throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::to_pairs() const {
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.emplace_back("router", std::string(router_name(kind)));
    pairs.emplace_back("hidden", std::to_string(router.hidden_size));
    pairs.emplace_back("experts", std::to_string(router.num_experts));
    pairs.emplace_back("top_k", std::to_string(router.top_k));
    pairs.emplace_back("qk_dim", std::to_string(router.qk_dim));
    pairs.emplace_back("mlp_hidden", std::to_string(router.mlp_hidden));
    pairs.emplace_back("ss_dim", std::to_string(router.ss_dim));
    pairs.emplace_back("hadamard_hidden", std::to_string(router.hadamard_hidden));
    pairs.emplace_back("router_top_k", std::to_string(router.router_top_k));
    pairs.emplace_back("temperature", format_value(router.temperature));
    pairs.emplace_back("orth_lambda", format_value(router.orth_lambda));
    pairs.emplace_back("init_std", format_value(router.init_std));
    pairs.emplace_back("use_bias", router.use_bias ? "true" : "false");
    pairs.emplace_back("uniform_keys", router.uniform_keys ? "true" : "false");
    pairs.emplace_back("activation", std::string(activation_name(router.activation)));
    pairs.emplace_back("seed", std::to_string(router.seed));
    pairs.emplace_back("expert_kind", std::string(expert_kind_name(expert_kind)));
    pairs.emplace_back("ffn_size", std::to_string(ffn_size));
    pairs.emplace_back("alpha_aux", format_value(alpha_aux));
    pairs.emplace_back("aux_form", std::string(aux_form_name(aux_form)));
    pairs.emplace_back("batch", std::to_string(batch));
    pairs.emplace_back("seq", std::to_string(seq));
    pairs.emplace_back("runs", std::to_string(runs));
    pairs.emplace_back("reps", std::to_string(reps));
    pairs.emplace_back("warmup", std::to_string(warmup));
    if (!embeddings_path.empty()) pairs.emplace_back("embeddings", embeddings_path);
    pairs.emplace_back("train_hidden", std::to_string(training.model_hidden));
    pairs.emplace_back("train_seq", std::to_string(training.seq));
    pairs.emplace_back("train_batch", std::to_string(training.batch));
    pairs.emplace_back("grad_accum", std::to_string(training.grad_accum));
    pairs.emplace_back("steps", std::to_string(training.steps));
    pairs.emplace_back("log_every", std::to_string(training.log_every));
    pairs.emplace_back("lr", format_value(training.lr));
    pairs.emplace_back("use_sgd", training.use_sgd ? "true" : "false");
    return pairs;
}

Tensor generate_random_states(std::size_t batch, std::size_t seq, std::size_t hidden,
                              std::uint64_t seed) {
    if (batch == 0 || seq == 0 || hidden == 0)
        throw std::invalid_argument("generate_random_states: dimensions must be positive");
    Tensor states({batch, seq, hidden});
    Rng rng(seed);
    rng.fill_normal(states, 0.0, 1.0);
    return states;
}

Tensor generate_pretrained_style_states(std::size_t batch, std::size_t seq, std::size_t hidden,
                                        std::uint64_t seed) {
    if (batch == 0 || seq == 0 || hidden == 0)
        throw std::invalid_argument("generate_pretrained_style_states: dimensions must be positive");
    Rng rng(seed);
    const std::size_t rank = std::min<std::size_t>(32, hidden);
    const std::size_t clusters = 16;
    // Shared offset: every coordinate drifts the same direction, as residual
    // streams do after pretraining.
    std::vector<double> mean(hidden);
    double norm = 0.0;
    for (double& v : mean) {
        v = rng.next_normal();
        norm += v * v;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    const double mean_scale = 0.3 * std::sqrt(static_cast<double>(hidden));
    for (double& v : mean) v = v / norm * mean_scale;
    // Dominant subspace: orthonormal rows with a geometrically decaying spectrum.
    Tensor basis({rank, hidden});
    rng.fill_normal(basis, 0.0, 1.0);
    for (std::size_t i = 0; i < rank; ++i) {
        double* row = basis.row(i);
        for (std::size_t j = 0; j < i; ++j) {
            const double* prev = basis.row(j);
            double dot = 0.0;
            for (std::size_t h = 0; h < hidden; ++h) dot += row[h] * prev[h];
            for (std::size_t h = 0; h < hidden; ++h) row[h] -= dot * prev[h];
        }
        double n = 0.0;
        for (std::size_t h = 0; h < hidden; ++h) n += row[h] * row[h];
        n = std::sqrt(std::max(n, 1e-12));
        for (std::size_t h = 0; h < hidden; ++h) row[h] /= n;
    }
    std::vector<double> sigma(rank);
    const double top = 2.0, bottom = 0.3;
    for (std::size_t i = 0; i < rank; ++i)
        sigma[i] = rank == 1 ? top
                             : top * std::pow(bottom / top,
                                              static_cast<double>(i) /
                                                  static_cast<double>(rank - 1));
    Tensor centers({clusters, rank});
    rng.fill_normal(centers, 0.0, 2.0);
    Tensor states({batch, seq, hidden});
    const std::size_t rows = states.rows();
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t c = rng.next_below(clusters);
        double* out = states.row(r);
        for (std::size_t h = 0; h < hidden; ++h) out[h] = mean[h];
        for (std::size_t i = 0; i < rank; ++i) {
            const double z = (centers.at(c, i) + rng.next_normal()) * sigma[i];
            const double* dir = basis.row(i);
            for (std::size_t h = 0; h < hidden; ++h) out[h] += z * dir[h];
        }
        for (std::size_t h = 0; h < hidden; ++h) out[h] += 0.5 * rng.next_normal();
    }
    return states;
}

MoeLayer build_layer(const ExperimentConfig& cfg) {
    ExpertConfig expert;
    expert.hidden_size = cfg.router.hidden_size;
    expert.ffn_size = cfg.ffn_size;
    expert.kind = cfg.expert_kind;
    return MoeLayer(make_router(cfg.kind, cfg.router), expert, cfg.alpha_aux, cfg.aux_form);
}

Tensor characterization_states(const ExperimentConfig& cfg) {
    if (!cfg.embeddings_path.empty()) {
        Tensor states = load_embeddings(cfg.embeddings_path);
        if (states.dim(2) != cfg.router.hidden_size)
            throw std::invalid_argument("embeddings hidden size " + std::to_string(states.dim(2)) +
                                        " does not match configured hidden size " +
                                        std::to_string(cfg.router.hidden_size));
        return states;
    }
    return generate_random_states(cfg.batch, cfg.seq, cfg.router.hidden_size,
                                  cfg.router.seed ^ kInputSalt);
}

CharacterizationReport characterize(const ExperimentConfig& cfg, bool all_routers) {
    cfg.validate();
    const Tensor states = characterization_states(cfg);
    std::vector<RouterKind> kinds;
    if (all_routers) {
        for (std::string_view name : router_names()) kinds.push_back(router_kind_from_name(name));
    } else {
        kinds.push_back(cfg.kind);
    }
    CharacterizationReport report;
    for (RouterKind kind : kinds) {
        ExperimentConfig local = cfg;
        local.kind = kind;
        MoeLayer layer = build_layer(local);
        const LatencyReport latency = latency_benchmark(layer, cfg.runs, cfg.reps, cfg.warmup,
                                                        cfg.router.seed ^ kLatencySalt);
        const MoeLayer::ForwardResult fwd = layer.forward(states);
        CharacterizationRow row;
        row.router = std::string(layer.router().name());
        row.param_count = layer.router().param_count();
        row.latency_router_us = latency.router_only.median_us;
        row.latency_total_us = latency.total.median_us;
        row.entropy_nats = mean_row_entropy(fwd.decision.probabilities);
        row.mean_topk_prob = mean_topk_probability(fwd.decision);
        row.output_std = output_stats(fwd.output).stddev;
        row.aux_loss = fwd.aux;
        row.utilization = expert_utilization(fwd.decision, layer.num_experts());
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string generate_toy_corpus() {
    static const char* const subjects[] = {"the router", "a token",    "the expert",
                                           "the gate",   "a batch",    "the model",
                                           "the layer",  "a sequence", "the network"};
    static const char* const verbs[] = {"selects", "weighs",   "balances", "dispatches",
                                        "mixes",   "sharpens", "observes", "splits"};
    static const char* const objects[] = {"two experts",      "its logits",     "the hidden state",
                                          "a soft mixture",   "every channel",  "the top choice",
                                          "sparse activations", "the residual"};
    static const char* const tails[] = {"with care", "per step",     "in order",
                                        "at scale",  "without bias", "again"};
    Rng rng(0x746f79636f727075ull);  // fixed stream, corpus is a constant
    std::string corpus;
    for (int line = 0; line < 100; ++line) {
        corpus += subjects[rng.next_below(std::size(subjects))];
        corpus += ' ';
        corpus += verbs[rng.next_below(std::size(verbs))];
        corpus += ' ';
        corpus += objects[rng.next_below(std::size(objects))];
        corpus += ' ';
        corpus += tails[rng.next_below(std::size(tails))];
        corpus += ".\n";
    }
    return corpus;
}

namespace {

struct AdamSlot {
    Tensor m, v;
};

}  // namespace

std::vector<TrainLogEntry> train_toy(const ExperimentConfig& cfg, const std::string& corpus) {
    cfg.validate();
    if (corpus.size() < 1000)
        throw std::invalid_argument("train_toy: corpus must be at least 1000 bytes, got " +
                                    std::to_string(corpus.size()));
    const TrainingConfig& tc = cfg.training;
    if (corpus.size() < tc.seq + 2)
        throw std::invalid_argument("train_toy: corpus shorter than one training window");
    const std::size_t width = tc.model_hidden;
    constexpr std::size_t vocab = 256;

    RouterConfig rc = cfg.router;
    rc.hidden_size = width;
    ExpertConfig ec;
    ec.hidden_size = width;
    ec.ffn_size = cfg.ffn_size;
    ec.kind = cfg.expert_kind;
    MoeLayer layer(make_router(cfg.kind, rc), ec, cfg.alpha_aux, cfg.aux_form);

    Rng model_rng(rc.seed ^ kModelSalt);
    Tensor embedding({vocab, width});
    Tensor proj({vocab, width});
    Tensor proj_b({vocab});
    model_rng.fill_normal(embedding, 0.0, 0.02);
    model_rng.fill_normal(proj, 0.0, 0.02);

    std::vector<Tensor*> params = {&embedding, &proj, &proj_b};
    for (const NamedParam& p : layer.parameters()) params.push_back(p.tensor);
    std::unordered_map<Tensor*, std::size_t> index;
    for (std::size_t i = 0; i < params.size(); ++i) index.emplace(params[i], i);
    std::vector<Tensor> grads;
    std::vector<AdamSlot> slots;
    grads.reserve(params.size());
    slots.reserve(params.size());
    for (Tensor* p : params) {
        grads.emplace_back(p->shape());
        slots.push_back({Tensor(p->shape()), Tensor(p->shape())});
    }

    std::vector<std::size_t> bytes(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        bytes[i] = static_cast<unsigned char>(corpus[i]);

    Rng batch_rng(rc.seed ^ kBatchSalt);
    const std::size_t max_start = corpus.size() - tc.seq - 1;
    const std::size_t rows = tc.batch * tc.seq;

    std::vector<TrainLogEntry> log;
    std::vector<double> step_losses;
    step_losses.reserve(tc.steps);
    bool logged_initial = false;
    std::size_t adam_t = 0;

    for (std::size_t step = 1; step <= tc.steps; ++step) {
        for (Tensor& g : grads) g.fill(0.0);
        double micro_sum = 0.0;
        for (std::size_t micro = 0; micro < tc.grad_accum; ++micro) {
            std::vector<std::size_t> inputs, labels;
            inputs.reserve(rows);
            labels.reserve(rows);
            for (std::size_t b = 0; b < tc.batch; ++b) {
                const std::size_t start = batch_rng.next_below(max_start);
                for (std::size_t t = 0; t < tc.seq; ++t) {
                    inputs.push_back(bytes[start + t]);
                    labels.push_back(bytes[start + t + 1]);
                }
            }
            grad::Tape tape;
            const grad::NodeId x = tape.gather_rows(tape.param(embedding), std::move(inputs));
            MoeLayer::ForwardNodes moe = layer.forward_node(tape, x);
            const grad::NodeId logits =
                tape.linear(moe.output, tape.param(proj), tape.param(proj_b));
            const grad::NodeId task = tape.softmax_cross_entropy(logits, std::move(labels));
            const grad::NodeId total =
                tape.add(tape.add(task, moe.aux), layer.router().penalty_node(tape));
            tape.backward(total);
            const double loss = tape.value(total)[0];
            micro_sum += loss;
            if (!logged_initial) {
                log.push_back({0, loss});
                logged_initial = true;
            }
            for (const auto& [node, tensor] : tape.trainables()) {
                Tensor& g = grads[index.at(tensor)];
                const Tensor& dg = tape.gradient(node);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += dg[i];
            }
        }
        const double scale = 1.0 / static_cast<double>(tc.grad_accum);
        ++adam_t;
        const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(adam_t));
        const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(adam_t));
        for (std::size_t p = 0; p < params.size(); ++p) {
            Tensor& theta = *params[p];
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double g = grads[p][i] * scale;
                if (tc.use_sgd) {
                    theta[i] -= tc.lr * g;
                    continue;
                }
                AdamSlot& slot = slots[p];
                slot.m[i] = tc.beta1 * slot.m[i] + (1.0 - tc.beta1) * g;
                slot.v[i] = tc.beta2 * slot.v[i] + (1.0 - tc.beta2) * g * g;
                const double mhat = slot.m[i] / bc1;
                const double vhat = slot.v[i] / bc2;
                theta[i] -= tc.lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
            }
        }
        step_losses.push_back(micro_sum * scale);
        if (step % tc.log_every == 0) {
            double window = 0.0;
            for (std::size_t s = step - tc.log_every; s < step; ++s) window += step_losses[s];
            log.push_back({step, window / static_cast<double>(tc.log_every)});
        }
    }
    return log;
}

std::vector<std::string> export_figure_data(const ExperimentConfig& cfg, const std::string& prefix,
                                            bool with_pgm) {
    cfg.validate();
    MoeLayer layer = build_layer(cfg);
    const Tensor states = characterization_states(cfg);
    const MoeLayer::ForwardResult fwd = layer.forward(states);
    const Tensor& probs = fwd.decision.probabilities;
    const std::size_t rows = probs.rows();
    const std::size_t experts = probs.cols();
    std::vector<std::string> written;

    std::string heatmap = "token";
    for (std::size_t e = 0; e < experts; ++e) heatmap += ",prob_" + std::to_string(e);
    heatmap += '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        heatmap += std::to_string(r);
        for (std::size_t e = 0; e < experts; ++e) heatmap += ',' + format_value(probs.at(r, e));
        heatmap += '\n';
    }
    {
        const std::string path = prefix + "_heatmap.csv";
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
        out << heatmap;
        written.push_back(path);
    }
    if (with_pgm) {
        Tensor image({rows, experts});
        for (std::size_t i = 0; i < image.size(); ++i) image[i] = probs[i];
        const std::string path = prefix + "_heatmap.pgm";
        write_pgm(path, image);
        written.push_back(path);
    }

    std::string tokens = "token,expert,probability\n";
    for (std::size_t r = 0; r < std::min<std::size_t>(5, rows); ++r)
        for (std::size_t e = 0; e < experts; ++e)
            tokens += std::to_string(r) + ',' + std::to_string(e) + ',' +
                      format_value(probs.at(r, e)) + '\n';
    {
        const std::string path = prefix + "_tokens.csv";
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
        out << tokens;
        written.push_back(path);
    }

    const OutputStats stats = output_stats(fwd.output);
    std::string hist = "bin_lo,bin_hi,count\n";
    const double width = (stats.hi - stats.lo) / static_cast<double>(stats.counts.size());
    for (std::size_t b = 0; b < stats.counts.size(); ++b) {
        hist += format_value(stats.lo + width * static_cast<double>(b)) + ',' +
                format_value(stats.lo + width * static_cast<double>(b + 1)) + ',' +
                std::to_string(stats.counts[b]) + '\n';
    }
    {
        const std::string path = prefix + "_histogram.csv";
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
        out << hist;
        written.push_back(path);
    }
    return written;
}

}  // namespace moelab
