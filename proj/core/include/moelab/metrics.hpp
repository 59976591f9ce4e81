// metrics.hpp - routing statistics, latency measurement and report serialization
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moelab/moe.hpp"
#include "moelab/tensor.hpp"

namespace moelab {

// Shannon entropy (nats) of the batch utilization distribution: p_e is the
// fraction of token-slot assignments dispatched to expert e, normalized by k so
// the p_e sum to 1. Uniform dispatch gives ln(E); a single hot expert gives 0.
// Throws std::invalid_argument on an empty decision.
double routing_entropy(const RoutingDecision& decision, std::size_t num_experts);

// Mean over tokens of the per-row Shannon entropy (nats) of the probability
// rows, with 0 ln 0 := 0. One-hot rows give exactly 0; uniform rows give ln(E).
double mean_row_entropy(const Tensor& probabilities);

// Mean probability mass assigned to the selected experts: average of
// P[r, indices[r][j]] over all token slots.
double mean_topk_probability(const RoutingDecision& decision);

// Dispatch fractions normalized to a distribution: f_e / k, sums to 1.
std::vector<double> expert_utilization(const RoutingDecision& decision, std::size_t num_experts);

struct OutputStats {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation
    double lo = 0.0, hi = 0.0;  // histogram range: mean +- 4 stddev
    std::vector<std::size_t> counts;  // 64 bins; out-of-range values clamp to the edge bins
};

// Mean, population stddev and a 64-bin histogram over mean +- 4 stddev. With
// stddev = 0 every value lands in bin 0. Bin counts always sum to the number of
// entries. Throws std::invalid_argument on an empty tensor.
OutputStats output_stats(const Tensor& values);

struct LatencyStats {
    double mean_us = 0.0;
    double median_us = 0.0;
    double p99_us = 0.0;
};

struct LatencyReport {
    LatencyStats router_only;  // router probabilities alone
    LatencyStats total;        // full layer forward: routing + dispatch + experts
    std::size_t runs = 0, reps = 0;
};

// Single-threaded per-token latency: `runs` single-token forwards per rep, each
// call timed individually on a monotonic clock; mean/median/p99 computed per
// rep and averaged across `reps`. Tokens are drawn once from `seed` and reused.
LatencyReport latency_benchmark(const MoeLayer& layer, std::size_t runs, std::size_t reps,
                                std::size_t warmup = 16, std::uint64_t seed = 123);

struct CharacterizationRow {
    std::string router;
    std::size_t param_count = 0;
    double latency_router_us = 0.0;  // median, averaged across reps
    double latency_total_us = 0.0;
    double entropy_nats = 0.0;       // mean per-token entropy of the probability rows
    double mean_topk_prob = 0.0;
    double output_std = 0.0;
    double aux_loss = 0.0;
    std::vector<double> utilization;  // E columns, util_0..util_{E-1}
};

struct CharacterizationReport {
    std::vector<CharacterizationRow> rows;
};

// CSV with header router,param_count,latency_router_us,latency_total_us,
// entropy_nats,mean_topk_prob,output_std,aux_loss,util_0..util_{E-1}. Floats
// are written with 17 significant digits so a re-parse reproduces every value
// bit for bit.
std::string to_csv(const CharacterizationReport& report);
// Parses the exact schema above; malformed input throws std::runtime_error.
CharacterizationReport report_from_csv(const std::string& text);
std::string to_json(const CharacterizationReport& report);

}  // namespace moelab
