// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "seedline/numerics/graph.hpp"

namespace seedline::num {

/// Single-layer LSTM cell shared by the VAE encoder/decoder and the baseline
/// LM. One fused weight of shape (input + hidden) x 4*hidden with gate blocks
/// ordered [input, forget, candidate, output].
struct LstmCell {
    std::string prefix;
    std::size_t input = 0;
    std::size_t hidden = 0;

    template <class Rng>
    static LstmCell create(ParameterStore& params, std::string prefix, std::size_t input, std::size_t hidden, Rng& rng) {
        LstmCell cell{std::move(prefix), input, hidden};
        params.add(cell.prefix + ".w", glorot_init(input + hidden, 4 * hidden, rng));
        Tensor bias = Tensor::matrix(1, 4 * hidden);
        for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0; // forget gate starts open
        params.add(cell.prefix + ".b", std::move(bias));
        return cell;
    }

    struct State {
        Var h;
        Var c;
    };

    /// Differentiable step over a batch: x is B x input, state is B x hidden.
    State step(Graph& g, ParameterStore& params, Var x, State s) const {
        Var w = g.param(params.at(prefix + ".w"));
        Var b = g.param(params.at(prefix + ".b"));
        Var gates = g.add(g.matmul(g.concat_cols({x, s.h}), w), b);
        const std::size_t H = hidden;
        Var i = g.sigmoid(g.slice_cols(gates, 0, H));
        Var f = g.sigmoid(g.slice_cols(gates, H, 2 * H));
        Var cand = g.tanh(g.slice_cols(gates, 2 * H, 3 * H));
        Var o = g.sigmoid(g.slice_cols(gates, 3 * H, 4 * H));
        Var c = g.add(g.mul(f, s.c), g.mul(i, cand));
        Var h = g.mul(o, g.tanh(c));
        return {h, c};
    }

    /// Forward-only step on plain tensors; same arithmetic as step().
    void infer(const ParameterStore& params, const Tensor& x, Tensor& h, Tensor& c) const {
        const Tensor& w = params.at(prefix + ".w").value;
        const Tensor& b = params.at(prefix + ".b").value;
        const Tensor* parts[] = {&x, &h};
        Tensor gates = add_broadcast(matmul(concat_cols(parts), w), b);
        const std::size_t H = hidden;
        for (std::size_t r = 0; r < gates.rows(); ++r) {
            auto gr = gates.row(r);
            auto hr = h.row(r);
            auto cr = c.row(r);
            for (std::size_t j = 0; j < H; ++j) {
                const double i = sigmoid(gr[j]);
                const double f = sigmoid(gr[H + j]);
                const double cand = std::tanh(gr[2 * H + j]);
                const double o = sigmoid(gr[3 * H + j]);
                cr[j] = f * cr[j] + i * cand;
                hr[j] = o * std::tanh(cr[j]);
            }
        }
    }
};

} // namespace seedline::num
