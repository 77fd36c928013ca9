// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "seedline/numerics/tensor.hpp"

namespace seedline::num {

/// softmax(logits / temperature) for one row; entries whose logit is -inf get 0.
inline std::vector<double> tempered_distribution(std::span<const double> logits, double temperature) {
    if (!(temperature > 0.0)) throw Error(Errc::NonPositiveTemperature, "temperature must be > 0");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::isinf(logits[i]) ? 0.0 : std::exp((logits[i] - mx) / temperature);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

/// Keeps the k most probable entries (ties broken by lower index) and renormalises.
inline void truncate_top_k(std::vector<double>& p, std::size_t k) {
    if (k == 0 || k >= p.size()) return;
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    double z = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i >= k) p[order[i]] = 0.0;
        else z += p[order[i]];
    }
    for (double& v : p) v /= z;
}

/// Inverse-CDF draw from a probability vector. Consumes exactly one uniform.
template <class Rng>
std::size_t sample_index(std::span<const double> p, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        acc += p[i];
        last = i;
        if (u < acc) return i;
    }
    return last;
}

/// Greedy (no temperature) or tempered sampling choice for one logits row.
template <class Rng>
std::size_t choose_token(std::span<const double> logits, std::optional<double> temperature, Rng& rng,
                         std::size_t top_k = 0) {
    if (!temperature) return argmax(logits);
    auto p = tempered_distribution(logits, *temperature);
    truncate_top_k(p, top_k);
    return sample_index(std::span<const double>(p), rng);
}

inline std::vector<double> standard_normal_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

} // namespace seedline::num
