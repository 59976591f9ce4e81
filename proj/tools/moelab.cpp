// moelab.cpp - command-line front end for the routing laboratory
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "moelab/runner.hpp"
#include "moelab/serialize.hpp"

namespace {

using moelab::ExperimentConfig;

// Flag storage; optionals so explicit flags override --config file values.
struct CliOptions {
    std::string config_path;
    std::optional<std::string> router;
    std::optional<std::size_t> experts, top_k, hidden, runs, reps, batch, seq, steps;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> embeddings;
};

void add_common_options(CLI::App* cmd, CliOptions& opts) {
    cmd->add_option("--config", opts.config_path, "key=value experiment file");
    cmd->add_option("--router", opts.router,
                    "routing policy: linear, attention, mlp, hybrid, mlp-hadamard, hash, "
                    "self-supervised");
    cmd->add_option("--experts", opts.experts, "number of experts E");
    cmd->add_option("--top-k", opts.top_k, "experts combined per token");
    cmd->add_option("--hidden", opts.hidden, "token width H");
    cmd->add_option("--seed", opts.seed, "seed for parameters and synthetic inputs");
    cmd->add_option("--embeddings", opts.embeddings, "token states file (.moeb)");
}

ExperimentConfig build_config(const CliOptions& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg.apply(moelab::parse_kv_file(opts.config_path));
    if (opts.router) cfg.kind = moelab::router_kind_from_name(*opts.router);
    if (opts.experts) cfg.router.num_experts = *opts.experts;
    if (opts.top_k) cfg.router.top_k = *opts.top_k;
    if (opts.hidden) cfg.router.hidden_size = *opts.hidden;
    if (opts.seed) cfg.router.seed = *opts.seed;
    if (opts.runs) cfg.runs = *opts.runs;
    if (opts.reps) cfg.reps = *opts.reps;
    if (opts.batch) cfg.batch = *opts.batch;
    if (opts.seq) cfg.seq = *opts.seq;
    if (opts.embeddings) cfg.embeddings_path = *opts.embeddings;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
}

std::string format_us(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixture-of-experts routing laboratory"};
    app.require_subcommand(1);

    // characterize: one report row per router.
    CliOptions ch_opts;
    bool ch_all = false;
    std::string ch_format = "csv", ch_out;
    CLI::App* characterize = app.add_subcommand(
        "characterize", "measure routing statistics and latency, emit a report");
    add_common_options(characterize, ch_opts);
    CLI::Option* all_flag = characterize->add_flag("--all", ch_all, "run every router");
    characterize->get_option("--router")->excludes(all_flag);
    characterize->add_option("--batch", ch_opts.batch, "input batch dimension B");
    characterize->add_option("--seq", ch_opts.seq, "input sequence dimension S");
    characterize->add_option("--runs", ch_opts.runs, "timed forwards per rep");
    characterize->add_option("--reps", ch_opts.reps, "repetitions to average");
    characterize->add_option("--format", ch_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    characterize->add_option("--out", ch_out, "output file (default stdout)");

    // bench: latency table only.
    CliOptions be_opts;
    bool be_all = false;
    CLI::App* bench = app.add_subcommand("bench", "measure per-token latency");
    add_common_options(bench, be_opts);
    bench->add_option("--runs", be_opts.runs, "timed forwards per rep");
    bench->add_option("--reps", be_opts.reps, "repetitions to average");
    CLI::Option* bench_all = bench->add_flag("--all", be_all, "run every router");
    bench->get_option("--router")->excludes(bench_all);

    // params: learnable-scalar count of one router.
    CliOptions pa_opts;
    CLI::App* params = app.add_subcommand("params", "print a router's parameter count");
    add_common_options(params, pa_opts);

    // train: toy byte-level LM with the MoE layer in the middle.
    CliOptions tr_opts;
    std::string tr_corpus_path, tr_out;
    CLI::App* train = app.add_subcommand("train", "train the toy model, emit the loss log");
    add_common_options(train, tr_opts);
    train->add_option("--steps", tr_opts.steps, "optimizer steps");
    train->add_option("--batch", tr_opts.batch, "sequences per micro-batch");
    train->add_option("--seq", tr_opts.seq, "training window length");
    train->add_option("--corpus", tr_corpus_path, "plain-text corpus file (default: built-in)");
    train->add_option("--out", tr_out, "loss log CSV (default stdout)");

    // export: plotting data for one run.
    CliOptions ex_opts;
    std::string ex_prefix, ex_format = "csv";
    CLI::App* exporter = app.add_subcommand("export", "write heatmap/bars/histogram data");
    add_common_options(exporter, ex_opts);
    exporter->add_option("--batch", ex_opts.batch, "input batch dimension B");
    exporter->add_option("--seq", ex_opts.seq, "input sequence dimension S");
    exporter->add_option("--out", ex_prefix, "output path prefix")->required();
    exporter->add_option("--format", ex_format, "csv, or pgm to add a heatmap image")
        ->check(CLI::IsMember({"csv", "pgm"}));

    // gen-embeddings: synthetic token states on disk.
    std::size_t ge_batch = 16, ge_seq = 128, ge_hidden = 768;
    std::uint64_t ge_seed = 42;
    std::string ge_out, ge_style = "clustered";
    CLI::App* gen = app.add_subcommand("gen-embeddings", "write synthetic token states (.moeb)");
    gen->add_option("--out", ge_out, "output file")->required();
    gen->add_option("--batch", ge_batch, "batch dimension B");
    gen->add_option("--seq", ge_seq, "sequence dimension S");
    gen->add_option("--hidden", ge_hidden, "hidden dimension H");
    gen->add_option("--seed", ge_seed, "generator seed");
    gen->add_option("--style", ge_style, "gaussian, or clustered for encoder-like anisotropy")
        ->check(CLI::IsMember({"gaussian", "clustered"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (characterize->parsed()) {
            ExperimentConfig cfg = build_config(ch_opts);
            const moelab::CharacterizationReport report = moelab::characterize(cfg, ch_all);
            write_text(ch_out, ch_format == "json" ? moelab::to_json(report)
                                                   : moelab::to_csv(report));
        } else if (bench->parsed()) {
            ExperimentConfig cfg = build_config(be_opts);
            cfg.validate();
            std::vector<moelab::RouterKind> kinds;
            if (be_all) {
                for (std::string_view name : moelab::router_names())
                    kinds.push_back(moelab::router_kind_from_name(name));
            } else {
                kinds.push_back(cfg.kind);
            }
            std::ostringstream out;
            out << "router,mean_router_us,median_router_us,p99_router_us,"
                   "mean_total_us,median_total_us,p99_total_us\n";
            for (moelab::RouterKind kind : kinds) {
                ExperimentConfig local = cfg;
                local.kind = kind;
                moelab::MoeLayer layer = moelab::build_layer(local);
                const moelab::LatencyReport r = moelab::latency_benchmark(
                    layer, cfg.runs, cfg.reps, cfg.warmup, cfg.router.seed);
                out << moelab::router_name(kind) << ',' << format_us(r.router_only.mean_us) << ','
                    << format_us(r.router_only.median_us) << ',' << format_us(r.router_only.p99_us)
                    << ',' << format_us(r.total.mean_us) << ',' << format_us(r.total.median_us)
                    << ',' << format_us(r.total.p99_us) << '\n';
            }
            std::cout << out.str();
        } else if (params->parsed()) {
            ExperimentConfig cfg = build_config(pa_opts);
            cfg.router.validate();
            const moelab::RouterPtr router = moelab::make_router(cfg.kind, cfg.router);
            std::cout << router->param_count() << "\n";
        } else if (train->parsed()) {
            ExperimentConfig cfg = build_config(tr_opts);
            if (tr_opts.steps) cfg.training.steps = *tr_opts.steps;
            if (tr_opts.batch) cfg.training.batch = *tr_opts.batch;
            if (tr_opts.seq) cfg.training.seq = *tr_opts.seq;
            // --batch/--seq size the training windows here, not the report inputs.
            cfg.batch = ExperimentConfig().batch;
            cfg.seq = ExperimentConfig().seq;
            std::string corpus;
            if (tr_corpus_path.empty()) {
                corpus = moelab::generate_toy_corpus();
            } else {
                std::ifstream in(tr_corpus_path, std::ios::binary);
                if (!in)
                    throw std::runtime_error("cannot open '" + tr_corpus_path + "' for reading");
                std::ostringstream ss;
                ss << in.rdbuf();
                corpus = ss.str();
            }
            const std::vector<moelab::TrainLogEntry> log = moelab::train_toy(cfg, corpus);
            std::string text = "step,loss\n";
            for (const moelab::TrainLogEntry& entry : log) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.17g", entry.loss);
                text += std::to_string(entry.step) + ',' + buf + '\n';
            }
            write_text(tr_out, text);
        } else if (exporter->parsed()) {
            ExperimentConfig cfg = build_config(ex_opts);
            const std::vector<std::string> written =
                moelab::export_figure_data(cfg, ex_prefix, ex_format == "pgm");
            for (const std::string& path : written) std::cout << path << "\n";
        } else if (gen->parsed()) {
            const moelab::Tensor states =
                ge_style == "gaussian"
                    ? moelab::generate_random_states(ge_batch, ge_seq, ge_hidden, ge_seed)
                    : moelab::generate_pretrained_style_states(ge_batch, ge_seq, ge_hidden,
                                                               ge_seed);
            moelab::save_embeddings(ge_out, states);
            std::cout << ge_out << ": " << ge_batch << " x " << ge_seq << " x " << ge_hidden
                      << " (" << ge_style << ")\n";
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
