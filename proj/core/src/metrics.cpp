// metrics.cpp - routing statistics, latency measurement, report round-trip
#include "moelab/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "moelab/rng.hpp"

namespace moelab {

namespace {

double entropy_nats_of(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

std::vector<double> slot_fractions(const RoutingDecision& decision, std::size_t num_experts) {
    if (decision.rows() == 0 || decision.k == 0)
        throw std::invalid_argument("routing metrics: decision must cover at least one token");
    std::vector<double> p(num_experts, 0.0);
    for (std::size_t e : decision.indices) {
        if (e >= num_experts)
            throw std::invalid_argument("routing metrics: decision routes to expert " +
                                        std::to_string(e) + " but only " +
                                        std::to_string(num_experts) + " exist");
        p[e] += 1.0;
    }
    const double slots = static_cast<double>(decision.indices.size());
    for (double& v : p) v /= slots;
    return p;
}

}  // namespace

double routing_entropy(const RoutingDecision& decision, std::size_t num_experts) {
    return entropy_nats_of(slot_fractions(decision, num_experts));
}

double mean_row_entropy(const Tensor& probabilities) {
    if (probabilities.empty())
        throw std::invalid_argument("mean_row_entropy: probabilities must be non-empty");
    const std::size_t rows = probabilities.rows();
    const std::size_t width = probabilities.cols();
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = probabilities.row(r);
        double h = 0.0;
        for (std::size_t j = 0; j < width; ++j)
            if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
        acc += h;
    }
    return acc / static_cast<double>(rows);
}

double mean_topk_probability(const RoutingDecision& decision) {
    if (decision.rows() == 0 || decision.k == 0)
        throw std::invalid_argument("mean_topk_probability: decision must cover at least one token");
    double acc = 0.0;
    for (std::size_t r = 0; r < decision.rows(); ++r)
        for (std::size_t j = 0; j < decision.k; ++j)
            acc += decision.probabilities.at(r, decision.expert_at(r, j));
    return acc / static_cast<double>(decision.indices.size());
}

std::vector<double> expert_utilization(const RoutingDecision& decision, std::size_t num_experts) {
    return slot_fractions(decision, num_experts);
}

OutputStats output_stats(const Tensor& values) {
    if (values.empty()) throw std::invalid_argument("output_stats: values must be non-empty");
    const std::size_t n = values.size();
    OutputStats stats;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[i];
    stats.mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - stats.mean;
        sq += d * d;
    }
    stats.stddev = std::sqrt(sq / static_cast<double>(n));
    constexpr std::size_t bins = 64;
    stats.counts.assign(bins, 0);
    stats.lo = stats.mean - 4.0 * stats.stddev;
    stats.hi = stats.mean + 4.0 * stats.stddev;
    const double width = (stats.hi - stats.lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t bin = 0;
        if (width > 0.0) {
            const double offset = (values[i] - stats.lo) / width;
            if (offset >= static_cast<double>(bins))
                bin = bins - 1;
            else if (offset > 0.0)
                bin = static_cast<std::size_t>(offset);
        }
        ++stats.counts[bin];
    }
    return stats;
}

namespace {

LatencyStats stats_over(std::vector<double> samples) {
    LatencyStats s;
    const std::size_t n = samples.size();
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean_us = sum / static_cast<double>(n);
    std::sort(samples.begin(), samples.end());
    s.median_us = (n % 2 == 1) ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    // Nearest-rank percentile.
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
    s.p99_us = samples[std::min(n - 1, rank == 0 ? 0 : rank - 1)];
    return s;
}

}  // namespace

LatencyReport latency_benchmark(const MoeLayer& layer, std::size_t runs, std::size_t reps,
                                std::size_t warmup, std::uint64_t seed) {
    if (runs == 0 || reps == 0)
        throw std::invalid_argument("latency_benchmark: runs and reps must be positive");
    using clock = std::chrono::steady_clock;
    const std::size_t width = layer.router().hidden_size();
    Rng rng(seed);
    std::vector<Tensor> tokens;
    tokens.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        Tensor t({1, width});
        rng.fill_normal(t, 0.0, 1.0);
        tokens.push_back(std::move(t));
    }
    // Checksum keeps the measured calls observable.
    double sink = 0.0;
    for (std::size_t i = 0; i < warmup; ++i) {
        const auto result = layer.forward(tokens[i % runs]);
        sink += result.output[0];
    }
    LatencyReport report;
    report.runs = runs;
    report.reps = reps;
    std::vector<double> router_us(runs), total_us(runs);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        for (std::size_t i = 0; i < runs; ++i) {
            const auto r0 = clock::now();
            const Tensor probs = layer.router().probabilities(tokens[i]);
            const auto r1 = clock::now();
            sink += probs[0];
            router_us[i] = std::chrono::duration<double, std::micro>(r1 - r0).count();
            const auto t0 = clock::now();
            const auto result = layer.forward(tokens[i]);
            const auto t1 = clock::now();
            sink += result.output[0];
            total_us[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
        }
        const LatencyStats r = stats_over(router_us);
        const LatencyStats t = stats_over(total_us);
        report.router_only.mean_us += r.mean_us;
        report.router_only.median_us += r.median_us;
        report.router_only.p99_us += r.p99_us;
        report.total.mean_us += t.mean_us;
        report.total.median_us += t.median_us;
        report.total.p99_us += t.p99_us;
    }
    const double d = static_cast<double>(reps);
    report.router_only.mean_us /= d;
    report.router_only.median_us /= d;
    report.router_only.p99_us /= d;
    report.total.mean_us /= d;
    report.total.median_us /= d;
    report.total.p99_us /= d;
    if (!std::isfinite(sink))
        throw std::runtime_error("latency_benchmark: non-finite layer output");
    return report;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::runtime_error(std::string("report_from_csv: malformed ") + what + " '" + s +
                                 "'");
    return v;
}

constexpr const char* kFixedColumns[] = {
    "router",       "param_count", "latency_router_us", "latency_total_us",
    "entropy_nats", "mean_topk_prob", "output_std",     "aux_loss",
};
constexpr std::size_t kFixedCount = 8;

}  // namespace

std::string to_csv(const CharacterizationReport& report) {
    std::size_t experts = 0;
    for (const CharacterizationRow& row : report.rows)
        experts = std::max(experts, row.utilization.size());
    std::string out;
    for (std::size_t i = 0; i < kFixedCount; ++i) {
        if (i) out += ',';
        out += kFixedColumns[i];
    }
    for (std::size_t e = 0; e < experts; ++e) out += ",util_" + std::to_string(e);
    out += '\n';
    for (const CharacterizationRow& row : report.rows) {
        out += row.router;
        out += ',' + std::to_string(row.param_count);
        out += ',' + format_double(row.latency_router_us);
        out += ',' + format_double(row.latency_total_us);
        out += ',' + format_double(row.entropy_nats);
        out += ',' + format_double(row.mean_topk_prob);
        out += ',' + format_double(row.output_std);
        out += ',' + format_double(row.aux_loss);
        for (std::size_t e = 0; e < experts; ++e)
            out += ',' + format_double(e < row.utilization.size() ? row.utilization[e] : 0.0);
        out += '\n';
    }
    return out;
}

CharacterizationReport report_from_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw std::runtime_error("report_from_csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < kFixedCount)
        throw std::runtime_error("report_from_csv: header has " + std::to_string(header.size()) +
                                 " columns, expected at least " + std::to_string(kFixedCount));
    for (std::size_t i = 0; i < kFixedCount; ++i)
        if (header[i] != kFixedColumns[i])
            throw std::runtime_error("report_from_csv: header column " + std::to_string(i) +
                                     " is '" + header[i] + "', expected '" + kFixedColumns[i] +
                                     "'");
    const std::size_t experts = header.size() - kFixedCount;
    for (std::size_t e = 0; e < experts; ++e)
        if (header[kFixedCount + e] != "util_" + std::to_string(e))
            throw std::runtime_error("report_from_csv: header column " +
                                     std::to_string(kFixedCount + e) + " is '" +
                                     header[kFixedCount + e] + "', expected 'util_" +
                                     std::to_string(e) + "'");
    CharacterizationReport report;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error("report_from_csv: row has " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(header.size()));
        CharacterizationRow row;
        row.router = fields[0];
        row.param_count = static_cast<std::size_t>(
            std::strtoull(fields[1].c_str(), nullptr, 10));
        row.latency_router_us = parse_double(fields[2], "latency_router_us");
        row.latency_total_us = parse_double(fields[3], "latency_total_us");
        row.entropy_nats = parse_double(fields[4], "entropy_nats");
        row.mean_topk_prob = parse_double(fields[5], "mean_topk_prob");
        row.output_std = parse_double(fields[6], "output_std");
        row.aux_loss = parse_double(fields[7], "aux_loss");
        row.utilization.reserve(experts);
        for (std::size_t e = 0; e < experts; ++e)
            row.utilization.push_back(parse_double(fields[kFixedCount + e], "utilization"));
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string to_json(const CharacterizationReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const CharacterizationRow& row : report.rows) {
        rows.push_back({{"router", row.router},
                        {"param_count", row.param_count},
                        {"latency_router_us", row.latency_router_us},
                        {"latency_total_us", row.latency_total_us},
                        {"entropy_nats", row.entropy_nats},
                        {"mean_topk_prob", row.mean_topk_prob},
                        {"output_std", row.output_std},
                        {"aux_loss", row.aux_loss},
                        {"utilization", row.utilization}});
    }
    return nlohmann::json{{"rows", rows}}.dump(2) + "\n";
}

}  // namespace moelab
