// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "seedline/numerics/parameters.hpp"
#include "seedline/numerics/tensor.hpp"

namespace seedline::num {

/// Handle to a node of a Graph. Only meaningful for the graph that made it.
struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
};

/// Define-by-run reverse-mode tape. Nodes are appended in creation order,
/// which is a topological order, so backward() is one reverse sweep.
///
/// A graph is single-threaded. Build a fresh graph per training step.
class Graph {
public:
    /// Receives the owning graph and the gradient flowing into the node; must
    /// accumulate into the parents through grad_of().
    using Backward = std::function<void(Graph&, const Tensor& out_grad)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

    /// Leaf bound to a parameter. Repeated calls return the same node.
    Var param(Parameter& p) {
        if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
        Var v = push(p.value, {}, nullptr, true);
        nodes_[v.id].param = &p;
        param_nodes_.emplace(&p, v.id);
        return v;
    }

    /// Registers a custom op. `backward` is only kept if some parent needs a gradient.
    Var apply(Tensor value, std::vector<Var> parents, Backward backward) {
        bool needs = false;
        for (Var p : parents) needs = needs || nodes_.at(p.id).needs_grad;
        return push(std::move(value), std::move(parents), needs ? std::move(backward) : nullptr, needs);
    }

    [[nodiscard]] const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    [[nodiscard]] const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
    [[nodiscard]] double scalar(Var v) const { return value(v)[0]; }
    [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }

    /// Gradient accumulator of `v`, allocated on first use.
    Tensor& grad_of(Var v) {
        Node& n = nodes_[v.id];
        if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
        return n.grad;
    }

    [[nodiscard]] bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

    /// Reverse sweep from a 1x1 loss. Parameter gradients are added to
    /// Parameter::grad, so callers zero them between steps.
    void backward(Var loss) {
        if (value(loss).size() != 1)
            throw Error(Errc::NonScalarLoss, "loss has shape " + shape_str(value(loss).shape()));
        grad_of(loss).fill(1.0);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.needs_grad || n.grad.size() == 0) continue;
            if (n.backward) n.backward(*this, n.grad);
            if (n.param) {
                Tensor& pg = n.param->grad;
                if (pg.shape() != n.grad.shape()) pg = Tensor(n.grad.shape());
                for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
            }
        }
    }

    // ----------------------------------------------------------------- ops

    Var matmul(Var a, Var b) {
        Tensor out = num::matmul(value(a), value(b));
        return apply(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dc) {
            if (g.needs_grad(a)) gemm_nt_acc(dc, g.value(b), g.grad_of(a));
            if (g.needs_grad(b)) gemm_tn_acc(g.value(a), dc, g.grad_of(b));
        });
    }

    /// Same-shape sum, or a + row-broadcast of a 1 x n `b`.
    Var add(Var a, Var b) {
        Tensor out = add_broadcast(value(a), value(b));
        const bool broadcast = value(a).shape() != value(b).shape();
        return apply(std::move(out), {a, b}, [a, b, broadcast](Graph& g, const Tensor& dc) {
            if (g.needs_grad(a)) {
                Tensor& ga = g.grad_of(a);
                for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i];
            }
            if (g.needs_grad(b)) {
                Tensor& gb = g.grad_of(b);
                if (!broadcast) {
                    for (std::size_t i = 0; i < dc.size(); ++i) gb[i] += dc[i];
                } else {
                    for (std::size_t r = 0; r < dc.rows(); ++r) {
                        auto row = dc.row(r);
                        for (std::size_t j = 0; j < row.size(); ++j) gb[j] += row[j];
                    }
                }
            }
        });
    }

    Var mul(Var a, Var b) {
        require_same_shape(value(a), value(b), "mul");
        Tensor out = value(a);
        const Tensor& vb = value(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
        return apply(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& dc) {
            if (g.needs_grad(a)) {
                Tensor& ga = g.grad_of(a);
                const Tensor& vb = g.value(b);
                for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i] * vb[i];
            }
            if (g.needs_grad(b)) {
                Tensor& gb = g.grad_of(b);
                const Tensor& va = g.value(a);
                for (std::size_t i = 0; i < dc.size(); ++i) gb[i] += dc[i] * va[i];
            }
        });
    }

    Var scale(Var a, double s) {
        Tensor out = map(value(a), [s](double v) { return v * s; });
        return apply(std::move(out), {a}, [a, s](Graph& g, const Tensor& dc) {
            Tensor& ga = g.grad_of(a);
            for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += s * dc[i];
        });
    }

    Var sigmoid(Var a) {
        Tensor out = num::sigmoid(value(a));
        const std::size_t self = nodes_.size();
        return apply(std::move(out), {a}, [a, self](Graph& g, const Tensor& dc) {
            const Tensor& y = g.nodes_[self].value;
            Tensor& ga = g.grad_of(a);
            for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i] * y[i] * (1.0 - y[i]);
        });
    }

    Var tanh(Var a) {
        Tensor out = num::tanh(value(a));
        const std::size_t self = nodes_.size();
        return apply(std::move(out), {a}, [a, self](Graph& g, const Tensor& dc) {
            const Tensor& y = g.nodes_[self].value;
            Tensor& ga = g.grad_of(a);
            for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i] * (1.0 - y[i] * y[i]);
        });
    }

    Var exp(Var a) {
        Tensor out = map(value(a), [](double v) { return std::exp(v); });
        const std::size_t self = nodes_.size();
        return apply(std::move(out), {a}, [a, self](Graph& g, const Tensor& dc) {
            const Tensor& y = g.nodes_[self].value;
            Tensor& ga = g.grad_of(a);
            for (std::size_t i = 0; i < dc.size(); ++i) ga[i] += dc[i] * y[i];
        });
    }

    /// Row-wise softmax.
    Var softmax(Var a) {
        Tensor out = num::softmax(value(a));
        const std::size_t self = nodes_.size();
        return apply(std::move(out), {a}, [a, self](Graph& g, const Tensor& dc) {
            const Tensor& y = g.nodes_[self].value;
            Tensor& ga = g.grad_of(a);
            for (std::size_t r = 0; r < y.rows(); ++r) {
                auto yr = y.row(r);
                auto dr = dc.row(r);
                double dot = 0.0;
                for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * dr[j];
                auto gr = ga.row(r);
                for (std::size_t j = 0; j < yr.size(); ++j) gr[j] += yr[j] * (dr[j] - dot);
            }
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        std::vector<const Tensor*> ts;
        ts.reserve(parts.size());
        for (Var p : parts) {
            require_matrix(value(p), "concat_cols");
            ts.push_back(&value(p));
        }
        Tensor out = num::concat_cols(ts);
        return apply(std::move(out), parts, [parts](Graph& g, const Tensor& dc) {
            std::size_t offset = 0;
            for (Var p : parts) {
                const std::size_t w = g.value(p).cols();
                if (g.needs_grad(p)) {
                    Tensor& gp = g.grad_of(p);
                    for (std::size_t r = 0; r < dc.rows(); ++r) {
                        auto src = dc.row(r).subspan(offset, w);
                        auto dst = gp.row(r);
                        for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
                    }
                }
                offset += w;
            }
        });
    }

    /// Columns [begin, end).
    Var slice_cols(Var a, std::size_t begin, std::size_t end) {
        const Tensor& va = value(a);
        require_matrix(va, "slice_cols");
        if (begin >= end || end > va.cols()) throw Error(Errc::IndexOutOfRange, "slice_cols bounds");
        Tensor out = Tensor::matrix(va.rows(), end - begin);
        for (std::size_t r = 0; r < va.rows(); ++r) {
            auto src = va.row(r).subspan(begin, end - begin);
            std::copy(src.begin(), src.end(), out.row(r).begin());
        }
        return apply(std::move(out), {a}, [a, begin](Graph& g, const Tensor& dc) {
            Tensor& ga = g.grad_of(a);
            for (std::size_t r = 0; r < dc.rows(); ++r) {
                auto src = dc.row(r);
                auto dst = ga.row(r).subspan(begin, src.size());
                for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
            }
        });
    }

    Var concat_rows(const std::vector<Var>& parts) {
        const std::size_t cols = value(parts.front()).cols();
        std::size_t rows = 0;
        for (Var p : parts) {
            require_matrix(value(p), "concat_rows");
            if (value(p).cols() != cols) throw Error(Errc::ShapeMismatch, "concat_rows column count");
            rows += value(p).rows();
        }
        Tensor out = Tensor::matrix(rows, cols);
        auto it = out.data().begin();
        for (Var p : parts) it = std::copy(value(p).data().begin(), value(p).data().end(), it);
        return apply(std::move(out), parts, [parts](Graph& g, const Tensor& dc) {
            std::size_t offset = 0;
            for (Var p : parts) {
                const std::size_t n = g.value(p).size();
                if (g.needs_grad(p)) {
                    Tensor& gp = g.grad_of(p);
                    for (std::size_t i = 0; i < n; ++i) gp[i] += dc[offset + i];
                }
                offset += n;
            }
        });
    }

    /// Gathers rows of `table` (V x d) for each id.
    Var embedding(Var table, std::vector<std::size_t> ids) {
        const Tensor& t = value(table);
        require_matrix(t, "embedding");
        Tensor out = Tensor::matrix(ids.size(), t.cols());
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (ids[r] >= t.rows()) throw Error(Errc::IndexOutOfRange, "embedding id " + std::to_string(ids[r]));
            std::copy(t.row(ids[r]).begin(), t.row(ids[r]).end(), out.row(r).begin());
        }
        return apply(std::move(out), {table}, [table, ids = std::move(ids)](Graph& g, const Tensor& dc) {
            Tensor& gt = g.grad_of(table);
            for (std::size_t r = 0; r < ids.size(); ++r) {
                auto src = dc.row(r);
                auto dst = gt.row(ids[r]);
                for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
            }
        });
    }

    /// Per-row blend: row r is mask[r] * a + (1 - mask[r]) * b.
    Var blend(Var a, Var b, std::vector<double> mask) {
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        require_same_shape(va, vb, "blend");
        if (mask.size() != va.rows()) throw Error(Errc::ShapeMismatch, "blend mask length");
        Tensor out = va;
        for (std::size_t r = 0; r < va.rows(); ++r) {
            auto o = out.row(r);
            auto br = vb.row(r);
            for (std::size_t j = 0; j < o.size(); ++j) o[j] = mask[r] * o[j] + (1.0 - mask[r]) * br[j];
        }
        return apply(std::move(out), {a, b}, [a, b, mask = std::move(mask)](Graph& g, const Tensor& dc) {
            for (int side = 0; side < 2; ++side) {
                Var v = side == 0 ? a : b;
                if (!g.needs_grad(v)) continue;
                Tensor& gv = g.grad_of(v);
                for (std::size_t r = 0; r < dc.rows(); ++r) {
                    const double w = side == 0 ? mask[r] : 1.0 - mask[r];
                    if (w == 0.0) continue;
                    auto src = dc.row(r);
                    auto dst = gv.row(r);
                    for (std::size_t j = 0; j < src.size(); ++j) dst[j] += w * src[j];
                }
            }
        });
    }

    Var sum(Var a) {
        double s = 0.0;
        for (double v : value(a).data()) s += v;
        return apply(Tensor({1, 1}, s), {a}, [a](Graph& g, const Tensor& dc) {
            Tensor& ga = g.grad_of(a);
            for (double& v : ga.data()) v += dc[0];
        });
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax(logits),
    /// over rows whose mask entry is non-zero. Returns a 1x1 node (0 if every
    /// row is masked).
    Var cross_entropy(Var logits, const std::vector<std::size_t>& targets, const std::vector<std::uint8_t>& mask) {
        const Tensor& l = value(logits);
        require_matrix(l, "cross_entropy");
        if (targets.size() != l.rows() || mask.size() != l.rows())
            throw Error(Errc::ShapeMismatch, "cross_entropy targets/mask length");
        for (std::size_t r = 0; r < targets.size(); ++r)
            if (mask[r] && targets[r] >= l.cols())
                throw Error(Errc::IndexOutOfRange, "target id " + std::to_string(targets[r]));
        Tensor logp = log_softmax(l);
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t r = 0; r < targets.size(); ++r) {
            if (!mask[r]) continue;
            total -= logp(r, targets[r]);
            ++count;
        }
        const double denom = count ? static_cast<double>(count) : 1.0;
        return apply(Tensor({1, 1}, total / denom), {logits},
                     [logits, targets, mask, denom, logp = std::move(logp)](Graph& g, const Tensor& dc) {
                         Tensor& gl = g.grad_of(logits);
                         const double s = dc[0] / denom;
                         for (std::size_t r = 0; r < targets.size(); ++r) {
                             if (!mask[r]) continue;
                             auto lp = logp.row(r);
                             auto dst = gl.row(r);
                             for (std::size_t j = 0; j < lp.size(); ++j) dst[j] += s * std::exp(lp[j]);
                             dst[targets[r]] -= s;
                         }
                     });
    }

    /// Mean over rows of the closed-form KL(N(mu, exp(logvar)) || N(0, I)).
    Var kl_divergence(Var mu, Var logvar) {
        const Tensor& m = value(mu);
        const Tensor& lv = value(logvar);
        require_same_shape(m, lv, "kl_divergence");
        double total = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) total += std::exp(lv[i]) + m[i] * m[i] - 1.0 - lv[i];
        const double rows = static_cast<double>(m.rows());
        return apply(Tensor({1, 1}, 0.5 * total / rows), {mu, logvar}, [mu, logvar, rows](Graph& g, const Tensor& dc) {
            const double s = dc[0] / rows;
            if (g.needs_grad(mu)) {
                Tensor& gm = g.grad_of(mu);
                const Tensor& m = g.value(mu);
                for (std::size_t i = 0; i < m.size(); ++i) gm[i] += s * m[i];
            }
            if (g.needs_grad(logvar)) {
                Tensor& gl = g.grad_of(logvar);
                const Tensor& lv = g.value(logvar);
                for (std::size_t i = 0; i < lv.size(); ++i) gl[i] += s * 0.5 * (std::exp(lv[i]) - 1.0);
            }
        });
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<Var> parents;
        Backward backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    Var push(Tensor value, std::vector<Var> parents, Backward backward, bool needs_grad) {
        nodes_.push_back(Node{std::move(value), Tensor(), std::move(parents), std::move(backward), nullptr, needs_grad});
        return Var{nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

} // namespace seedline::num
