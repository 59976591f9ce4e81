#include "moelab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "moelab/rng.hpp"

namespace moelab::grad {

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::Node& Tape::at(NodeId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw std::invalid_argument("Tape: node id " + std::to_string(id) + " out of range");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

const Tape::Node& Tape::at(NodeId id) const {
    return const_cast<Tape*>(this)->at(id);
}

void Tape::check_same_shape(NodeId a, NodeId b, const char* who) const {
    if (!at(a).value.same_shape(at(b).value)) {
        throw std::invalid_argument(std::string(who) + ": operand shapes differ");
    }
}

NodeId Tape::constant(Tensor value) {
    Node n;
    n.op = Op::constant;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Tape::param(Tensor& storage) {
    for (const auto& [id, bound] : trainables_) {
        if (bound == &storage) return id;  // one node per parameter tensor
    }
    Node n;
    n.op = Op::param;
    n.value = storage;
    n.bound = &storage;
    const NodeId id = push(std::move(n));
    trainables_.emplace_back(id, &storage);
    return id;
}

NodeId Tape::linear(NodeId x, NodeId w, NodeId bias) {
    const Tensor* b = bias >= 0 ? &at(bias).value : nullptr;
    Node n;
    n.op = Op::linear;
    n.a = x;
    n.b = w;
    n.c = bias;
    n.value = affine_rows(at(x).value, at(w).value, b);
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.value = moelab::matmul(at(a).value, at(b).value);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    check_same_shape(a, b, "Tape::add");
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.value = at(a).value;
    const Tensor& bv = at(b).value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += bv[i];
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    check_same_shape(a, b, "Tape::sub");
    Node n;
    n.op = Op::sub;
    n.a = a;
    n.b = b;
    n.value = at(a).value;
    const Tensor& bv = at(b).value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= bv[i];
    return push(std::move(n));
}

NodeId Tape::add_rowvec(NodeId m, NodeId v) {
    const Tensor& mv = at(m).value;
    const Tensor& vv = at(v).value;
    if (vv.size() != mv.cols()) {
        throw std::invalid_argument("Tape::add_rowvec: vector length must equal row width");
    }
    Node n;
    n.op = Op::add_rowvec;
    n.a = m;
    n.b = v;
    n.value = mv;
    for (std::size_t i = 0; i < n.value.rows(); ++i) {
        double* row = n.value.row(i);
        for (std::size_t j = 0; j < n.value.cols(); ++j) row[j] += vv[j];
    }
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    check_same_shape(a, b, "Tape::mul");
    Node n;
    n.op = Op::mul;
    n.a = a;
    n.b = b;
    n.value = at(a).value;
    const Tensor& bv = at(b).value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= bv[i];
    return push(std::move(n));
}

NodeId Tape::mul_scalar_node(NodeId m, NodeId s) {
    if (at(s).value.size() != 1) {
        throw std::invalid_argument("Tape::mul_scalar_node: scalar operand must have one element");
    }
    Node n;
    n.op = Op::mul_scalar;
    n.a = m;
    n.b = s;
    n.value = at(m).value;
    const double sv = at(s).value[0];
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= sv;
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.scalar = c;
    n.value = at(a).value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= c;
    return push(std::move(n));
}

NodeId Tape::activation(NodeId a, Activation act) {
    Node n;
    n.op = Op::activation;
    n.a = a;
    n.act = act;
    n.value = at(a).value;
    activate(n.value, act);
    return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a, double temperature) {
    Node n;
    n.op = Op::softmax;
    n.a = a;
    n.scalar = temperature;
    n.value = softmax(at(a).value, temperature);
    return push(std::move(n));
}

NodeId Tape::l2_normalize_rows(NodeId a, double eps) {
    Node n;
    n.op = Op::l2norm;
    n.a = a;
    n.scalar = eps;
    n.value = moelab::l2_normalize_rows(at(a).value, eps);
    return push(std::move(n));
}

NodeId Tape::topk_mask_renorm(NodeId probs, std::size_t k) {
    const Tensor& p = at(probs).value;
    if (k == 0 || k > p.cols()) {
        throw std::invalid_argument("Tape::topk_mask_renorm: k out of range");
    }
    Node n;
    n.op = Op::topk_renorm;
    n.a = probs;
    n.k = k;
    n.value = Tensor(p.shape());
    n.cache = Tensor({p.rows()});  // per-row selected mass
    n.indices.reserve(p.rows() * k);
    for (std::size_t r = 0; r < p.rows(); ++r) {
        const double* src = p.row(r);
        const auto selected = topk_indices(src, p.cols(), k);
        double mass = 0.0;
        for (std::size_t j : selected) mass += src[j];
        n.cache[r] = mass;
        double* dst = n.value.row(r);
        for (std::size_t j : selected) {
            n.indices.push_back(j);
            if (mass > 0.0) dst[j] = src[j] / mass;
        }
    }
    return push(std::move(n));
}

NodeId Tape::gather_rows(NodeId m, std::vector<std::size_t> rows) {
    const Tensor& mv = at(m).value;
    for (std::size_t r : rows) {
        if (r >= mv.rows()) throw std::invalid_argument("Tape::gather_rows: row index out of range");
    }
    Node n;
    n.op = Op::gather_rows;
    n.a = m;
    n.value = Tensor({rows.size(), mv.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = mv.row(rows[i]);
        std::copy(src, src + mv.cols(), n.value.row(i));
    }
    n.indices = std::move(rows);
    return push(std::move(n));
}

NodeId Tape::scatter_rows(NodeId m, std::vector<std::size_t> rows, std::size_t out_rows) {
    const Tensor& mv = at(m).value;
    if (rows.size() != mv.rows()) {
        throw std::invalid_argument("Tape::scatter_rows: index count must equal row count");
    }
    for (std::size_t r : rows) {
        if (r >= out_rows) throw std::invalid_argument("Tape::scatter_rows: target row out of range");
    }
    Node n;
    n.op = Op::scatter_rows;
    n.a = m;
    n.k = out_rows;
    n.value = Tensor({out_rows, mv.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double* dst = n.value.row(rows[i]);
        const double* src = mv.row(i);
        for (std::size_t j = 0; j < mv.cols(); ++j) dst[j] += src[j];
    }
    n.indices = std::move(rows);
    return push(std::move(n));
}

NodeId Tape::select_entries(NodeId m, std::vector<std::size_t> flat_indices) {
    const Tensor& mv = at(m).value;
    for (std::size_t i : flat_indices) {
        if (i >= mv.size()) throw std::invalid_argument("Tape::select_entries: index out of range");
    }
    Node n;
    n.op = Op::select_entries;
    n.a = m;
    n.value = Tensor({flat_indices.size()});
    for (std::size_t i = 0; i < flat_indices.size(); ++i) n.value[i] = mv[flat_indices[i]];
    n.indices = std::move(flat_indices);
    return push(std::move(n));
}

NodeId Tape::scale_rows(NodeId m, NodeId v) {
    const Tensor& mv = at(m).value;
    const Tensor& vv = at(v).value;
    if (vv.size() != mv.rows()) {
        throw std::invalid_argument("Tape::scale_rows: vector length must equal row count");
    }
    Node n;
    n.op = Op::scale_rows;
    n.a = m;
    n.b = v;
    n.value = mv;
    for (std::size_t i = 0; i < n.value.rows(); ++i) {
        double* row = n.value.row(i);
        for (std::size_t j = 0; j < n.value.cols(); ++j) row[j] *= vv[i];
    }
    return push(std::move(n));
}

NodeId Tape::column_mean(NodeId m) {
    const Tensor& mv = at(m).value;
    Node n;
    n.op = Op::column_mean;
    n.a = m;
    n.value = Tensor({mv.cols()});
    for (std::size_t i = 0; i < mv.rows(); ++i) {
        const double* row = mv.row(i);
        for (std::size_t j = 0; j < mv.cols(); ++j) n.value[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(mv.rows());
    for (std::size_t j = 0; j < mv.cols(); ++j) n.value[j] *= inv;
    return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
    Node n;
    n.op = Op::sum;
    n.a = a;
    n.value = Tensor({1});
    double acc = 0.0;
    for (double v : at(a).value.values()) acc += v;
    n.value[0] = acc;
    return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
    const double inv = 1.0 / static_cast<double>(at(a).value.size());
    return scale(sum(a), inv);
}

NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels) {
    const Tensor& z = at(logits).value;
    if (labels.size() != z.rows()) {
        throw std::invalid_argument("Tape::softmax_cross_entropy: one label per row required");
    }
    for (std::size_t l : labels) {
        if (l >= z.cols()) throw std::invalid_argument("Tape::softmax_cross_entropy: label out of range");
    }
    Node n;
    n.op = Op::cross_entropy;
    n.a = logits;
    n.cache = softmax(z);
    n.value = Tensor({1});
    double total = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const double* row = z.row(r);
        double hi = row[0];
        for (std::size_t j = 1; j < z.cols(); ++j) hi = std::max(hi, row[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) lse += std::exp(row[j] - hi);
        total += hi + std::log(lse) - row[labels[r]];
    }
    n.value[0] = total / static_cast<double>(z.rows());
    n.indices = std::move(labels);
    return push(std::move(n));
}

NodeId Tape::mse(NodeId a, const Tensor& target) {
    if (!at(a).value.same_shape(target)) {
        throw std::invalid_argument("Tape::mse: target shape differs from input");
    }
    const NodeId diff = sub(a, constant(target));
    return mean(mul(diff, diff));
}

const Tensor& Tape::value(NodeId id) const { return at(id).value; }

const Tensor& Tape::gradient(NodeId id) const {
    if (!ran_backward_) throw std::invalid_argument("Tape::gradient: backward has not run");
    return at(id).grad;
}

void Tape::backward(NodeId loss) {
    Node& top = at(loss);
    if (top.value.size() != 1) {
        throw std::invalid_argument("Tape::backward: loss must be a single element");
    }
    for (Node& n : nodes_) n.grad = Tensor(n.value.shape());
    top.grad[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) backward_node(nodes_[i]);
    ran_backward_ = true;
}

void Tape::backward_node(Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::constant:
        case Op::param:
            return;
        case Op::linear: {
            Node& x = at(n.a);
            Node& w = at(n.b);
            const std::size_t rows = x.value.rows(), in = x.value.cols(), out = w.value.dim(0);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* grow = g.row(r);
                const double* xrow = x.value.row(r);
                double* xg = x.grad.row(r);
                for (std::size_t o = 0; o < out; ++o) {
                    const double go = grow[o];
                    if (go == 0.0) continue;
                    const double* wrow = w.value.row(o);
                    double* wg = w.grad.row(o);
                    for (std::size_t i = 0; i < in; ++i) {
                        xg[i] += go * wrow[i];
                        wg[i] += go * xrow[i];
                    }
                }
            }
            if (n.c >= 0) {
                Node& b = at(n.c);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* grow = g.row(r);
                    for (std::size_t o = 0; o < out; ++o) b.grad[o] += grow[o];
                }
            }
            return;
        }
        case Op::matmul: {
            Node& a = at(n.a);
            Node& b = at(n.b);
            const std::size_t m = a.value.dim(0), kk = a.value.dim(1), cols = b.value.dim(1);
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = g.row(i);
                const double* arow = a.value.row(i);
                double* agrow = a.grad.row(i);
                for (std::size_t k = 0; k < kk; ++k) {
                    const double* brow = b.value.row(k);
                    double* bgrow = b.grad.row(k);
                    double acc = 0.0;
                    const double aik = arow[k];
                    for (std::size_t j = 0; j < cols; ++j) {
                        acc += grow[j] * brow[j];
                        bgrow[j] += aik * grow[j];
                    }
                    agrow[k] += acc;
                }
            }
            return;
        }
        case Op::add: {
            Node& a = at(n.a);
            Node& b = at(n.b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                a.grad[i] += g[i];
                b.grad[i] += g[i];
            }
            return;
        }
        case Op::sub: {
            Node& a = at(n.a);
            Node& b = at(n.b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                a.grad[i] += g[i];
                b.grad[i] -= g[i];
            }
            return;
        }
        case Op::add_rowvec: {
            Node& a = at(n.a);
            Node& v = at(n.b);
            for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const double* grow = g.row(r);
                for (std::size_t j = 0; j < g.cols(); ++j) v.grad[j] += grow[j];
            }
            return;
        }
        case Op::mul: {
            Node& a = at(n.a);
            Node& b = at(n.b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                a.grad[i] += g[i] * b.value[i];
                b.grad[i] += g[i] * a.value[i];
            }
            return;
        }
        case Op::mul_scalar: {
            Node& a = at(n.a);
            Node& s = at(n.b);
            const double sv = s.value[0];
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                a.grad[i] += g[i] * sv;
                acc += g[i] * a.value[i];
            }
            s.grad[0] += acc;
            return;
        }
        case Op::scale: {
            Node& a = at(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.scalar;
            return;
        }
        case Op::activation: {
            Node& a = at(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                a.grad[i] += g[i] * activation_derivative(n.act, a.value[i]);
            }
            return;
        }
        case Op::softmax: {
            Node& a = at(n.a);
            const double inv_t = 1.0 / n.scalar;
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const double* grow = g.row(r);
                const double* y = n.value.row(r);
                double* ag = a.grad.row(r);
                double dotv = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) dotv += grow[j] * y[j];
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    ag[j] += y[j] * (grow[j] - dotv) * inv_t;
                }
            }
            return;
        }
        case Op::l2norm: {
            Node& a = at(n.a);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const double* v = a.value.row(r);
                const double* grow = g.row(r);
                double* ag = a.grad.row(r);
                double norm_sq = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) norm_sq += v[j] * v[j];
                const double norm = std::sqrt(norm_sq);
                if (norm > n.scalar) {
                    const double* y = n.value.row(r);
                    double dotv = 0.0;
                    for (std::size_t j = 0; j < g.cols(); ++j) dotv += grow[j] * y[j];
                    for (std::size_t j = 0; j < g.cols(); ++j) {
                        ag[j] += (grow[j] - y[j] * dotv) / norm;
                    }
                } else {
                    for (std::size_t j = 0; j < g.cols(); ++j) ag[j] += grow[j] / n.scalar;
                }
            }
            return;
        }
        case Op::topk_renorm: {
            Node& a = at(n.a);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const double mass = n.cache[r];
                if (mass <= 0.0) continue;
                const std::size_t* sel = n.indices.data() + r * n.k;
                const double* grow = g.row(r);
                const double* y = n.value.row(r);
                double dotv = 0.0;
                for (std::size_t s = 0; s < n.k; ++s) dotv += grow[sel[s]] * y[sel[s]];
                double* ag = a.grad.row(r);
                for (std::size_t s = 0; s < n.k; ++s) {
                    const std::size_t j = sel[s];
                    ag[j] += (grow[j] - dotv) / mass;
                }
            }
            return;
        }
        case Op::gather_rows: {
            Node& a = at(n.a);
            for (std::size_t i = 0; i < n.indices.size(); ++i) {
                const double* grow = g.row(i);
                double* ag = a.grad.row(n.indices[i]);
                for (std::size_t j = 0; j < g.cols(); ++j) ag[j] += grow[j];
            }
            return;
        }
        case Op::scatter_rows: {
            Node& a = at(n.a);
            for (std::size_t i = 0; i < n.indices.size(); ++i) {
                const double* grow = g.row(n.indices[i]);
                double* ag = a.grad.row(i);
                for (std::size_t j = 0; j < g.cols(); ++j) ag[j] += grow[j];
            }
            return;
        }
        case Op::select_entries: {
            Node& a = at(n.a);
            for (std::size_t i = 0; i < n.indices.size(); ++i) a.grad[n.indices[i]] += g[i];
            return;
        }
        case Op::scale_rows: {
            Node& a = at(n.a);
            Node& v = at(n.b);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const double* grow = g.row(r);
                const double* arow = a.value.row(r);
                double* ag = a.grad.row(r);
                const double vr = v.value[r];
                double acc = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    ag[j] += grow[j] * vr;
                    acc += grow[j] * arow[j];
                }
                v.grad[r] += acc;
            }
            return;
        }
        case Op::column_mean: {
            Node& a = at(n.a);
            const double inv = 1.0 / static_cast<double>(a.value.rows());
            for (std::size_t r = 0; r < a.value.rows(); ++r) {
                double* ag = a.grad.row(r);
                for (std::size_t j = 0; j < g.size(); ++j) ag[j] += g[j] * inv;
            }
            return;
        }
        case Op::sum: {
            Node& a = at(n.a);
            const double g0 = g[0];
            for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += g0;
            return;
        }
        case Op::cross_entropy: {
            Node& a = at(n.a);
            const double g0 = g[0] / static_cast<double>(a.value.rows());
            for (std::size_t r = 0; r < a.value.rows(); ++r) {
                const double* p = n.cache.row(r);
                double* ag = a.grad.row(r);
                for (std::size_t j = 0; j < a.value.cols(); ++j) ag[j] += g0 * p[j];
                ag[n.indices[r]] -= g0;
            }
            return;
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    trainables_.clear();
    ran_backward_ = false;
}

double finite_diff_max_rel_error(const std::function<double()>& eval,
                                 std::span<const FdCheckItem> items, const FdOptions& opts) {
    Rng rng(opts.seed);
    double worst = 0.0;
    for (const FdCheckItem& item : items) {
        Tensor& p = *item.param;
        if (!p.same_shape(item.analytic)) {
            throw std::invalid_argument("finite_diff_max_rel_error: gradient shape mismatch");
        }
        const std::size_t total = p.size();
        const std::size_t probes = std::min(opts.samples_per_tensor, total);
        for (std::size_t s = 0; s < probes; ++s) {
            const std::size_t idx =
                total <= opts.samples_per_tensor ? s : static_cast<std::size_t>(rng.next_below(total));
            const double saved = p[idx];
            p[idx] = saved + opts.step;
            const double up = eval();
            p[idx] = saved - opts.step;
            const double down = eval();
            p[idx] = saved;
            const double fd = (up - down) / (2.0 * opts.step);
            const double an = item.analytic[idx];
            worst = std::max(worst, std::abs(an - fd) / (std::abs(fd) + opts.denom_floor));
        }
    }
    return worst;
}

Tensor straight_through_topk(const Tensor& probabilities, std::size_t k) {
    Tape tape;
    return tape.value(tape.topk_mask_renorm(tape.constant(probabilities), k));
}

}  // namespace moelab::grad
