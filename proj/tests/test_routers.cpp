// test_routers.cpp - the seven routing policies: parameter counts, probability
// invariants, frozen hash values, penalties, gradients, contrastive pretraining
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "moelab/router.hpp"

using namespace moelab;
using grad::NodeId;
using grad::Tape;

TEST_SUITE_BEGIN("routers");

namespace {

RouterConfig small_config() {
    RouterConfig c;
    c.hidden_size = 64;
    c.num_experts = 8;
    c.top_k = 2;
    c.qk_dim = 16;
    c.mlp_hidden = 32;
    c.ss_dim = 8;
    c.router_top_k = 2;
    c.seed = 42;
    return c;
}

Tensor* find_param(Router& r, const std::string& name) {
    for (const NamedParam& p : r.parameters()) {
        if (p.name == name) return p.tensor;
    }
    return nullptr;
}

double cosine(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        dot += a.row(ra)[j] * b.row(rb)[j];
        na += a.row(ra)[j] * a.row(ra)[j];
        nb += b.row(rb)[j] * b.row(rb)[j];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("router names round trip through the factory and unknown names throw") {
    const auto& names = router_names();
    REQUIRE(names.size() == 7);
    CHECK(names[0] == "linear");
    CHECK(names[4] == "mlp-hadamard");
    CHECK(names[6] == "self-supervised");
    const RouterConfig cfg = small_config();
    for (std::string_view n : names) {
        RouterPtr r = make_router(n, cfg);
        CHECK(r->name() == n);
        CHECK(router_kind_from_name(router_name(r->kind())) == r->kind());
    }
    CHECK_THROWS_WITH_AS(
        (void)make_router("gru", cfg),
        "unknown router 'gru'; expected one of linear, attention, mlp, hybrid, mlp-hadamard, "
        "hash, self-supervised",
        std::invalid_argument);
}

TEST_CASE("config validation rejects each out-of-range field") {
    auto expect_throw = [](RouterConfig c) { CHECK_THROWS_AS(c.validate(), std::invalid_argument); };
    RouterConfig base = small_config();
    CHECK_NOTHROW(base.validate());
    { RouterConfig c = base; c.hidden_size = 0; expect_throw(c); }
    { RouterConfig c = base; c.num_experts = 0; expect_throw(c); }
    { RouterConfig c = base; c.top_k = 0; expect_throw(c); }
    { RouterConfig c = base; c.top_k = 9; expect_throw(c); }
    { RouterConfig c = base; c.qk_dim = 0; expect_throw(c); }
    { RouterConfig c = base; c.mlp_hidden = 0; expect_throw(c); }
    { RouterConfig c = base; c.ss_dim = 0; expect_throw(c); }
    { RouterConfig c = base; c.router_top_k = 0; expect_throw(c); }
    { RouterConfig c = base; c.router_top_k = 9; expect_throw(c); }
    { RouterConfig c = base; c.temperature = 0.0; expect_throw(c); }
    { RouterConfig c = base; c.orth_lambda = -0.1; expect_throw(c); }
    { RouterConfig c = base; c.init_std = -1.0; expect_throw(c); }
}

TEST_CASE("parameter counts match the closed forms at full width") {
    RouterConfig c;  // defaults: H=768, E=8, qk=64, mlp_hidden=128, ss_dim=64
    CHECK(make_router("linear", c)->param_count() == 6144);
    CHECK(make_router("attention", c)->param_count() == 49664);
    CHECK(make_router("mlp", c)->param_count() == 99464);
    CHECK(make_router("hybrid", c)->param_count() == 55810);
    CHECK(make_router("mlp-hadamard", c)->param_count() == 596744);
    CHECK(make_router("hash", c)->param_count() == 0);
    CHECK(make_router("self-supervised", c)->param_count() == 107208);

    RouterConfig cb = c;
    cb.use_bias = true;
    CHECK(make_router("linear", cb)->param_count() == 6152);
    // The hybrid's linear leg stays bias-free regardless of the flag.
    CHECK(make_router("hybrid", cb)->param_count() == 55810);
}

TEST_CASE("parameter counts match the closed forms at reduced width") {
    const RouterConfig c = small_config();  // H=64, E=8, qk=16, mlp_hidden=32, ss_dim=8
    CHECK(make_router("linear", c)->param_count() == 512);
    CHECK(make_router("attention", c)->param_count() == 1152);
    CHECK(make_router("mlp", c)->param_count() == 2344);
    CHECK(make_router("hybrid", c)->param_count() == 1666);
    CHECK(make_router("self-supervised", c)->param_count() == 2416);

    // Narrow gate width forces the learned input projection.
    RouterConfig ch = c;
    ch.hadamard_hidden = 32;
    MlpHadamardRouter had(ch);
    CHECK(had.has_projection());
    CHECK(had.hadamard_width() == 32);
    CHECK(had.param_count() == 4392);
    CHECK(find_param(had, "w_p") != nullptr);

    MlpHadamardRouter plain(c);  // hadamard_hidden = 0 means gate width = H
    CHECK_FALSE(plain.has_projection());
    CHECK(plain.param_count() == 64 * 64 + 64 + 8 * 64 + 8);
    CHECK(find_param(plain, "w_p") == nullptr);
}

TEST_CASE("every router emits probability rows that sum to one, preserving shape") {
    const RouterConfig cfg = small_config();
    Rng rng(1001);
    const Tensor x = rng.normal_tensor({2, 3, 64}, 0.0, 1.0);
    for (std::string_view name : router_names()) {
        CAPTURE(name);
        RouterPtr r = make_router(name, cfg);
        const Tensor p = r->probabilities(x);
        REQUIRE(p.rank() == 3);
        CHECK(p.dim(0) == 2);
        CHECK(p.dim(1) == 3);
        CHECK(p.dim(2) == 8);
        for (std::size_t row = 0; row < p.rows(); ++row) {
            double s = 0.0;
            for (std::size_t e = 0; e < p.cols(); ++e) {
                CHECK(p.at(row, e) >= 0.0);
                s += p.at(row, e);
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("routers are bitwise deterministic in config and input") {
    const RouterConfig cfg = small_config();
    Rng rng(77);
    const Tensor x = rng.normal_tensor({5, 64}, 0.0, 1.0);
    for (std::string_view name : router_names()) {
        CAPTURE(name);
        CHECK(make_router(name, cfg)->probabilities(x).equals(
            make_router(name, cfg)->probabilities(x)));
    }
    // A different seed re-draws every learned projection.
    RouterConfig other = cfg;
    other.seed = 43;
    for (std::string_view name : router_names()) {
        if (name == "hash") continue;  // exercised separately with frozen values
        CAPTURE(name);
        CHECK_FALSE(make_router(name, cfg)->probabilities(x).equals(
            make_router(name, other)->probabilities(x)));
    }
}

TEST_CASE("a zero-initialized linear router is exactly uniform") {
    RouterConfig cfg = small_config();
    cfg.init_std = 0.0;
    RouterPtr r = make_router("linear", cfg);
    Rng rng(5);
    const Tensor x = rng.normal_tensor({4, 64}, 0.0, 1.0);
    const Tensor p = r->probabilities(x);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == 0.125);
    double entropy = 0.0;
    for (std::size_t e = 0; e < 8; ++e) entropy -= p.at(0, e) * std::log(p.at(0, e));
    CHECK(entropy == doctest::Approx(2.0794415416798357).epsilon(1e-15));
}

TEST_CASE("shifting every linear bias by a constant leaves probabilities unchanged") {
    RouterConfig cfg = small_config();
    cfg.use_bias = true;
    RouterPtr r = make_router("linear", cfg);
    Rng rng(6);
    const Tensor x = rng.normal_tensor({4, 64}, 0.0, 1.0);
    const Tensor before = r->probabilities(x);
    Tensor* b = find_param(*r, "b");
    REQUIRE(b != nullptr);
    for (std::size_t i = 0; i < b->size(); ++i) (*b)[i] += 5.0;
    const Tensor after = r->probabilities(x);
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
    }
}

TEST_CASE("attention routing is invariant to input scale") {
    const RouterConfig cfg = small_config();
    RouterPtr r = make_router("attention", cfg);
    Rng rng(8);
    const Tensor x = rng.normal_tensor({6, 64}, 0.0, 1.0);
    Tensor x4 = x, x3 = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x4[i] *= 4.0;
        x3[i] *= 3.0;
    }
    // Query normalization removes the magnitude. A power-of-two scale commutes
    // with every rounding step, so the result is bit-identical; an odd scale
    // agrees to rounding error.
    CHECK(r->probabilities(x4).equals(r->probabilities(x)));
    const Tensor p = r->probabilities(x);
    const Tensor p3 = r->probabilities(x3);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p3[i] == doctest::Approx(p[i]).epsilon(1e-12));
    }
}

TEST_CASE("lower attention temperature sharpens the distribution") {
    RouterConfig warm = small_config();
    RouterConfig cold = small_config();
    cold.temperature = 0.25;
    RouterPtr rw = make_router("attention", warm);
    RouterPtr rc = make_router("attention", cold);
    Rng rng(9);
    const Tensor x = rng.normal_tensor({32, 64}, 0.0, 1.0);
    const Tensor pw = rw->probabilities(x);
    const Tensor pc = rc->probabilities(x);
    double max_w = 0.0, max_c = 0.0;
    for (std::size_t row = 0; row < pw.rows(); ++row) {
        max_w += *std::max_element(pw.row(row), pw.row(row) + 8);
        max_c += *std::max_element(pc.row(row), pc.row(row) + 8);
    }
    CHECK(max_c > max_w);
}

TEST_CASE("input width is checked") {
    RouterPtr r = make_router("linear", small_config());
    CHECK_THROWS_AS((void)r->probabilities(Tensor({2, 63})), std::invalid_argument);
}

TEST_CASE("mlp router tape gradients agree with finite differences") {
    RouterConfig cfg;
    cfg.hidden_size = 16;
    cfg.num_experts = 4;
    cfg.qk_dim = 8;
    cfg.mlp_hidden = 12;
    cfg.ss_dim = 8;
    cfg.seed = 3;
    MlpRouter router(cfg);
    Rng rng(10);
    const Tensor x = rng.normal_tensor({3, 16}, 0.0, 1.0);
    const Tensor target = rng.normal_tensor({3, 4}, 0.0, 0.5);
    auto build = [&](Tape& tape) {
        return tape.mse(router.probabilities_node(tape, tape.constant(x)), target);
    };
    Tape tape;
    const NodeId loss = build(tape);
    tape.backward(loss);
    std::vector<grad::FdCheckItem> items;
    for (const auto& [id, ptr] : tape.trainables()) items.push_back({ptr, tape.gradient(id)});
    REQUIRE(items.size() == 4);
    auto eval = [&]() {
        Tape t;
        return t.value(build(t))[0];
    };
    CHECK(grad::finite_diff_max_rel_error(eval, items, grad::FdOptions{}) < 1e-4);
}

TEST_CASE("hybrid mixing starts at an even split and interpolates the two legs") {
    const RouterConfig cfg = small_config();
    HybridRouter hybrid(cfg);
    const Tensor w = hybrid.mix_weights();
    CHECK(w[0] == 0.5);
    CHECK(w[1] == 0.5);

    Rng rng(12);
    const Tensor x = rng.normal_tensor({4, 64}, 0.0, 1.0);
    const Tensor lin = hybrid.linear_part().logits(x);
    const Tensor att = hybrid.attention_part().logits(x);
    Tensor combined(lin.shape());
    for (std::size_t i = 0; i < combined.size(); ++i) {
        combined[i] = w[0] * lin[i] + w[1] * att[i];
    }
    CHECK(hybrid.logits(x).equals(combined));
    CHECK(hybrid.probabilities(x).equals(softmax(combined)));
}

TEST_CASE("hybrid tape value matches the direct computation") {
    const RouterConfig cfg = small_config();
    HybridRouter hybrid(cfg);
    Rng rng(13);
    const Tensor x = rng.normal_tensor({4, 64}, 0.0, 1.0);
    Tape tape;
    const NodeId p = hybrid.probabilities_node(tape, tape.constant(x));
    for (std::size_t i = 0; i < tape.value(p).size(); ++i) {
        CHECK(tape.value(p)[i] ==
              doctest::Approx(hybrid.probabilities(x)[i]).epsilon(1e-12));
    }
    // Both legs plus the mixing logits are registered for training.
    CHECK(tape.trainables().size() == 4);
}

TEST_CASE("gated router emits rows with at most router_top_k nonzeros summing to one") {
    RouterConfig cfg = small_config();
    cfg.router_top_k = 2;
    MlpHadamardRouter router(cfg);
    Rng rng(14);
    const Tensor x = rng.normal_tensor({16, 64}, 0.0, 1.0);
    const Tensor p = router.probabilities(x);
    for (std::size_t row = 0; row < p.rows(); ++row) {
        std::size_t nonzero = 0;
        double s = 0.0;
        for (std::size_t e = 0; e < p.cols(); ++e) {
            if (p.at(row, e) != 0.0) ++nonzero;
            s += p.at(row, e);
        }
        CHECK(nonzero <= 2);
        CHECK(nonzero >= 1);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("orthogonality penalty is zero on an orthonormal head and exact on a scaled one") {
    RouterConfig cfg = small_config();
    cfg.orth_lambda = 0.1;
    MlpHadamardRouter router(cfg);
    Tensor* w2 = find_param(router, "w2");
    REQUIRE(w2 != nullptr);
    REQUIRE(w2->dim(0) == 8);
    REQUIRE(w2->dim(1) == 64);

    w2->fill(0.0);
    for (std::size_t e = 0; e < 8; ++e) w2->at(e, e) = 1.0;  // orthonormal rows
    CHECK(router.penalty() == 0.0);

    for (std::size_t e = 0; e < 8; ++e) w2->at(e, e) = 2.0;  // gram = 4I
    // ||4I - I||_F^2 over 8 experts = 9 * 8 = 72; every product is exact.
    CHECK(router.penalty() == 0.1 * 72.0);

    Tape tape;
    const NodeId node = router.penalty_node(tape);
    CHECK(tape.value(node)[0] == router.penalty());

    RouterConfig off = small_config();
    MlpHadamardRouter unregularized(off);
    CHECK(unregularized.penalty() == 0.0);
    Tape t2;
    CHECK(t2.value(unregularized.penalty_node(t2))[0] == 0.0);
}

TEST_CASE("orthogonality penalty gradients agree with finite differences") {
    RouterConfig cfg = small_config();
    cfg.hidden_size = 16;
    cfg.orth_lambda = 0.1;
    MlpHadamardRouter router(cfg);
    auto build = [&](Tape& tape) { return router.penalty_node(tape); };
    Tape tape;
    const NodeId loss = build(tape);
    tape.backward(loss);
    std::vector<grad::FdCheckItem> items;
    for (const auto& [id, ptr] : tape.trainables()) items.push_back({ptr, tape.gradient(id)});
    REQUIRE(items.size() == 1);
    auto eval = [&]() {
        Tape t;
        return t.value(build(t))[0];
    };
    CHECK(grad::finite_diff_max_rel_error(eval, items, grad::FdOptions{}) < 1e-5);
}

// Dispatch targets frozen from an independent implementation of the sign-pattern
// hash (FNV-1a over the 8 pattern bytes, basis xor seed, splitmix64 finalizer).
TEST_CASE("hash dispatch matches the frozen reference values") {
    RouterConfig cfg = small_config();
    cfg.hidden_size = 8;
    const double token_a[8] = {-1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0};
    const double token_b[8] = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

    cfg.seed = 0;
    HashRouter h0(cfg);
    CHECK(h0.expert_index(token_a, 8) == 0);
    CHECK(h0.expert_index(token_b, 8) == 3);

    cfg.seed = 42;
    HashRouter h42(cfg);
    CHECK(h42.expert_index(token_a, 8) == 4);
    CHECK(h42.expert_index(token_b, 8) == 4);

    cfg.seed = 0;
    cfg.num_experts = 6;
    cfg.top_k = 2;
    cfg.router_top_k = 2;
    HashRouter h6(cfg);
    CHECK(h6.expert_index(token_a, 8) == 2);
    CHECK(h6.expert_index(token_b, 8) == 5);

    // Coordinates beyond the 64th cannot change the pattern.
    double wide[70];
    for (std::size_t i = 0; i < 70; ++i) wide[i] = (i % 2 == 0) ? -0.5 : 1.25;
    cfg.num_experts = 8;
    cfg.hidden_size = 70;
    HashRouter hw(cfg);
    CHECK(hw.expert_index(wide, 70) == 7);
    wide[69] = -wide[69];
    CHECK(hw.expert_index(wide, 70) == 7);
    cfg.seed = 42;
    HashRouter hw42(cfg);
    CHECK(hw42.expert_index(wide, 70) == 0);
}

TEST_CASE("hash rows are one-hot and the dispatch is balanced on random signs") {
    const RouterConfig cfg = small_config();
    HashRouter router(cfg);
    Rng rng(999);
    const Tensor x = rng.normal_tensor({100000, 64}, 0.0, 1.0);
    const Tensor p = router.probabilities(x);
    std::vector<std::size_t> counts(8, 0);
    for (std::size_t row = 0; row < p.rows(); ++row) {
        std::size_t ones = 0, hot = 0;
        for (std::size_t e = 0; e < 8; ++e) {
            if (p.at(row, e) == 1.0) {
                ++ones;
                hot = e;
            } else {
                CHECK(p.at(row, e) == 0.0);
            }
        }
        REQUIRE(ones == 1);
        ++counts[hot];
    }
    for (std::size_t e = 0; e < 8; ++e) {
        const double frac = static_cast<double>(counts[e]) / static_cast<double>(p.rows());
        CHECK(frac > 0.115);
        CHECK(frac < 0.135);
    }
}

TEST_CASE("hash routing passes no gradient") {
    const RouterConfig cfg = small_config();
    HashRouter router(cfg);
    Tensor x({2, 64});
    Rng rng(21);
    rng.fill_normal(x, 0.0, 1.0);
    Tape tape;
    const NodeId xn = tape.param(x);
    const NodeId p = router.probabilities_node(tape, xn);
    CHECK(tape.value(p).equals(router.probabilities(x)));
    tape.backward(tape.sum(p));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(tape.gradient(xn)[i] == 0.0);
}

TEST_CASE("contrastive loss matches the frozen reference values") {
    const Tensor anchor({2}, {1.0, 0.0});
    const Tensor positive({2}, {1.0, 0.0});
    const Tensor orth({2}, {0.0, 1.0});
    CHECK(contrastive_loss(anchor, positive, {orth}, 1.0) ==
          doctest::Approx(0.31326168751822286).epsilon(1e-15));
    // Negative identical to the positive: a fair coin, loss ln 2.
    CHECK(contrastive_loss(anchor, positive, {positive}, 1.0) ==
          doctest::Approx(0.69314718055994529).epsilon(1e-15));
    CHECK(contrastive_loss(anchor, positive, {orth}, 0.5) ==
          doctest::Approx(0.1269280110429726).epsilon(1e-15));
}

TEST_CASE("contrastive loss validates its inputs") {
    const Tensor a({2}, {1.0, 0.0});
    CHECK_THROWS_AS((void)contrastive_loss(a, a, {}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)contrastive_loss(a, a, {a}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)contrastive_loss(a, Tensor({3}, {1, 0, 0}), {a}, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)contrastive_loss(a, a, {Tensor({3}, {1, 0, 0})}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("self-supervised features have the configured width") {
    RouterConfig cfg = small_config();
    cfg.ss_dim = 8;
    SelfSupervisedRouter router(cfg);
    Rng rng(22);
    const Tensor f = router.features(rng.normal_tensor({5, 64}, 0.0, 1.0));
    CHECK(f.rows() == 5);
    CHECK(f.cols() == 8);
}

TEST_CASE("contrastive pretraining separates clusters and stabilizes routing") {
    RouterConfig cfg;
    cfg.hidden_size = 16;
    cfg.num_experts = 4;
    cfg.top_k = 2;
    cfg.qk_dim = 8;
    cfg.mlp_hidden = 24;
    cfg.ss_dim = 8;
    cfg.router_top_k = 2;
    cfg.seed = 17;
    SelfSupervisedRouter router(cfg);

    Rng world(2718);
    Tensor centers = world.normal_tensor({2, 16}, 0.0, 2.0);
    auto sample = [&](Rng& rng, std::size_t cluster) {
        Tensor x({1, 16});
        for (std::size_t j = 0; j < 16; ++j) {
            x[j] = centers.at(cluster, j) + 0.15 * rng.next_normal();
        }
        return x;
    };

    // InfoNCE on the extractor: anchor and positive from one cluster, four
    // negatives from the other; similarities are cosines of extracted features.
    Rng train(31415);
    const double tau = 0.2, lr = 0.2;
    for (int step = 0; step < 300; ++step) {
        const std::size_t c = step % 2;
        Tensor batch({6, 16});
        for (std::size_t row = 0; row < 6; ++row) {
            const Tensor x = sample(train, row < 2 ? c : 1 - c);
            for (std::size_t j = 0; j < 16; ++j) batch.at(row, j) = x[j];
        }
        Tape tape;
        const NodeId feats = tape.l2_normalize_rows(
            router.features_node(tape, tape.constant(batch)));
        const NodeId anchor = tape.gather_rows(feats, {0});
        const NodeId candidates = tape.gather_rows(feats, {1, 2, 3, 4, 5});
        const NodeId sims = tape.linear(anchor, candidates);  // cosine row, positive first
        const NodeId loss = tape.softmax_cross_entropy(tape.scale(sims, 1.0 / tau), {0});
        tape.backward(loss);
        for (const auto& [id, ptr] : tape.trainables()) {
            const Tensor& g = tape.gradient(id);
            for (std::size_t i = 0; i < ptr->size(); ++i) (*ptr)[i] -= lr * g[i];
        }
    }

    // Features of same-cluster pairs align far better than cross-cluster pairs.
    Rng eval(8888);
    Tensor fa({20, 16}), fb({20, 16});
    for (std::size_t i = 0; i < 20; ++i) {
        const Tensor a = sample(eval, 0), b = sample(eval, 1);
        for (std::size_t j = 0; j < 16; ++j) {
            fa.at(i, j) = a[j];
            fb.at(i, j) = b[j];
        }
    }
    const Tensor feat_a = router.features(fa);
    const Tensor feat_b = router.features(fb);
    double within = 0.0, across = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i + 1 < 20; i += 2, ++pairs) {
        within += cosine(feat_a, i, feat_a, i + 1) + cosine(feat_b, i, feat_b, i + 1);
        across += 2.0 * cosine(feat_a, i, feat_b, i);
    }
    within /= static_cast<double>(2 * pairs);
    across /= static_cast<double>(2 * pairs);
    CHECK(within > across + 0.2);

    // Routing through the head is consistent inside each cluster.
    for (const Tensor* inputs : {&fa, &fb}) {
        const Tensor p = router.probabilities(*inputs);
        std::map<std::size_t, std::size_t> votes;
        for (std::size_t row = 0; row < p.rows(); ++row) {
            const std::size_t top =
                static_cast<std::size_t>(std::max_element(p.row(row), p.row(row) + 4) - p.row(row));
            ++votes[top];
        }
        std::size_t best = 0;
        for (const auto& [expert, count] : votes) best = std::max(best, count);
        CHECK(best >= 18);  // at least 90% of 20 rows agree
    }
}

TEST_SUITE_END();
