// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "seedline/numerics/graph.hpp"

namespace seedline::num {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t coords_checked = 0;
};

/// Builds a scalar loss on a fresh graph. Must be a pure function of the
/// parameter values (reseed any rng inside).
using LossBuilder = std::function<Var(Graph&)>;

/// Central finite differences against the analytic gradient. Error per
/// coordinate is |ga - gn| / max(1e-8, |ga| + |gn|); the maximum is returned.
/// `coords_per_param == 0` checks every coordinate.
inline GradCheckResult grad_check(const LossBuilder& f, ParameterStore& params, double epsilon = 1e-5,
                                  std::size_t coords_per_param = 0, std::uint64_t seed = 0) {
    if (!(epsilon > 0.0)) throw Error(Errc::BadParams, "grad_check epsilon must be positive");
    params.zero_grad();
    {
        Graph g;
        Var loss = f(g);
        g.backward(loss);
    }
    auto eval = [&f] {
        Graph g;
        return g.scalar(f(g));
    };

    std::mt19937_64 rng(seed);
    GradCheckResult result;
    for (auto& p : params) {
        const std::size_t n = p->value.size();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (coords_per_param != 0 && coords_per_param < n) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(coords_per_param);
        }
        const Tensor analytic = p->grad;
        for (std::size_t k : coords) {
            const double orig = p->value[k];
            p->value[k] = orig + epsilon;
            const double up = eval();
            p->value[k] = orig - epsilon;
            const double down = eval();
            p->value[k] = orig;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double ga = analytic.size() ? analytic[k] : 0.0;
            const double err = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
            ++result.coords_checked;
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_param = p->name;
                result.worst_index = k;
            }
        }
    }
    return result;
}

} // namespace seedline::num
