// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "seedline/lines.hpp"
#include "seedline/vae/model.hpp"

namespace seedline::vae {

inline constexpr std::size_t kDecodeChunk = 256;

namespace detail {

inline std::vector<GeneratedLine> decode_all(const VaeModel& model, const std::vector<std::vector<double>>& zs,
                                             const std::optional<std::string>& tag, std::optional<double> temperature,
                                             Rng& rng, const Provenance& base) {
    std::vector<GeneratedLine> out;
    out.reserve(zs.size());
    for (std::size_t i = 0; i < zs.size(); i += kDecodeChunk) {
        std::vector<std::vector<double>> chunk(zs.begin() + static_cast<std::ptrdiff_t>(i),
                                               zs.begin() + static_cast<std::ptrdiff_t>(std::min(zs.size(), i + kDecodeChunk)));
        auto lines = model.decode_batch(chunk, tag, temperature, rng);
        for (std::size_t k = 0; k < lines.size(); ++k) {
            GeneratedLine g;
            g.text = std::move(lines[k].text);
            g.tokens = std::move(lines[k].ids);
            g.provenance = base;
            g.provenance.latent = chunk[k];
            g.provenance.temperature = temperature;
            out.push_back(std::move(g));
        }
    }
    return out;
}

} // namespace detail

/// Draws n latents z ~ N(0, I) (all drawn before any decoding) and decodes
/// each one. Greedy when `temperature` is empty. Duplicates are kept.
inline std::vector<GeneratedLine> sample_prior(const VaeModel& model, std::size_t n, std::optional<double> temperature,
                                               Rng& rng, const std::optional<std::string>& tag = {}) {
    if (n < 1) throw Error(Errc::BadParams, "n must be >= 1");
    if (temperature && !(*temperature > 0.0)) throw Error(Errc::NonPositiveTemperature, "temperature must be > 0");
    std::vector<std::vector<double>> zs;
    zs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) zs.push_back(num::standard_normal_vector(model.config().d_z, rng));
    return detail::decode_all(model, zs, tag, temperature, rng, Provenance());
}

/// Decodes z0 + radius * eps for n independent eps ~ N(0, I).
inline std::vector<GeneratedLine> sample_neighborhood(const VaeModel& model, const std::vector<double>& z0,
                                                      double radius, std::size_t n, std::optional<double> temperature,
                                                      Rng& rng, const std::optional<std::string>& tag = {}) {
    if (n < 1) throw Error(Errc::BadParams, "n must be >= 1");
    if (!(radius >= 0.0)) throw Error(Errc::BadParams, "radius must be >= 0");
    if (z0.size() != model.config().d_z) throw Error(Errc::ShapeMismatch, "z0 has the wrong dimension");
    if (temperature && !(*temperature > 0.0)) throw Error(Errc::NonPositiveTemperature, "temperature must be > 0");
    std::vector<std::vector<double>> zs;
    for (std::size_t i = 0; i < n; ++i) {
        auto eps = num::standard_normal_vector(z0.size(), rng);
        for (std::size_t k = 0; k < eps.size(); ++k) eps[k] = z0[k] + radius * eps[k];
        zs.push_back(std::move(eps));
    }
    Provenance base;
    base.kind = SamplerKind::Neighborhood;
    base.origin = z0;
    base.radius = radius;
    return detail::decode_all(model, zs, tag, temperature, rng, base);
}

/// Greedy decodes at (1 - t) z1 + t z2 for `steps` evenly spaced t in [0, 1].
inline std::vector<GeneratedLine> interpolate(const VaeModel& model, const std::vector<double>& z1,
                                              const std::vector<double>& z2, std::size_t steps,
                                              const std::optional<std::string>& tag = {}) {
    if (steps < 2) throw Error(Errc::BadParams, "interpolation needs steps >= 2");
    if (z1.size() != model.config().d_z || z2.size() != z1.size())
        throw Error(Errc::ShapeMismatch, "interpolation endpoints have the wrong dimension");
    std::vector<std::vector<double>> zs;
    std::vector<double> ts;
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
        std::vector<double> z(z1.size());
        for (std::size_t k = 0; k < z.size(); ++k) z[k] = (1.0 - t) * z1[k] + t * z2[k];
        zs.push_back(std::move(z));
        ts.push_back(t);
    }
    Rng unused(0);
    Provenance base;
    base.kind = SamplerKind::Interpolation;
    base.origin = z1;
    base.target = z2;
    auto out = detail::decode_all(model, zs, tag, std::nullopt, unused, base);
    for (std::size_t s = 0; s < out.size(); ++s) out[s].provenance.position = ts[s];
    return out;
}

/// Jaccard overlap of the two lines' token sets; 1 when both are empty.
inline double token_overlap(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
    std::set<TokenId> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t inter = 0;
    for (TokenId t : sa) inter += sb.count(t);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

/// Token-level Levenshtein distance.
inline std::size_t edit_distance(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace seedline::vae
