// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "seedline/lm/model.hpp"
#include "seedline/vae/sampling.hpp"
#include "seedline/wundt/filter.hpp"

namespace seedline {

/// A generator, a scorer sharing its vocabulary, and the n-gram index of the
/// corpus the generator was trained on. Immutable once built.
struct Workbench {
    vae::VaeModel vae;
    lm::LmModel lm;
    wundt::NgramIndex index;

    static Workbench load(const std::filesystem::path& vae_path, const std::filesystem::path& lm_path,
                          const std::optional<std::filesystem::path>& corpus_path) {
        auto v = vae::VaeModel::load(vae_path);
        const std::string hash = v.vocab().hash();
        auto l = lm::LmModel::load(lm_path, &hash);
        wundt::NgramIndex index(wundt::kDefaultNgram);
        if (corpus_path) {
            CorpusOptions opt;
            opt.val_fraction = 0.0;
            opt.max_len = v.config().max_len;
            auto lc = load_corpus(*corpus_path, opt, &v.vocab());
            index = wundt::NgramIndex(lc.corpus);
        }
        return Workbench{std::move(v), std::move(l), std::move(index)};
    }

    /// Corpus path recorded in the VAE sidecar at training time, if any.
    static std::optional<std::filesystem::path> recorded_corpus(const std::filesystem::path& vae_path) {
        try {
            auto meta = nlohmann::ordered_json::parse(read_file(vae::VaeModel::sidecar_path(vae_path)));
            if (meta.contains("corpus") && meta["corpus"].is_string()) return meta["corpus"].get<std::string>();
        } catch (const std::exception&) {
        }
        return std::nullopt;
    }
};

inline constexpr std::uint64_t kReferenceSeedSalt = 0x9E3779B97F4A7C15ULL;

/// Resolves a band to absolute bounds. Quantile bands are measured on a
/// reference pool of prior samples drawn with a seed derived from `seed`.
inline wundt::ResolvedBand resolve_band(const Workbench& wb, const wundt::BandConfig& band,
                                        std::optional<double> temperature, std::uint64_t seed) {
    if (band.mode == wundt::BandConfig::Mode::Absolute) return wundt::resolve(band, {});
    vae::Rng rng(seed ^ kReferenceSeedSalt);
    auto ref = vae::sample_prior(wb.vae, band.reference_size, temperature, rng);
    std::vector<double> s;
    s.reserve(ref.size());
    for (const auto& l : ref) s.push_back(wb.lm.line_surprisal(l.tokens));
    return wundt::resolve(band, s);
}

struct PoolRequest {
    std::size_t n = 350;
    std::optional<double> temperature = 1.0; // empty: greedy decoding
    std::uint64_t seed = 0;
    bool apply_band = false;
    wundt::BandConfig band;
    std::optional<std::string> tag;
};

struct PoolResult {
    std::vector<GeneratedLine> lines;
    wundt::BandReport report;
    std::size_t sampled = 0;
    std::size_t unique = 0;
};

/// Prior samples -> dedup (also against `existing`) -> score -> optional band filter.
inline PoolResult generate_scored_pool(const Workbench& wb, const PoolRequest& req,
                                       const std::unordered_set<std::string>* existing = nullptr) {
    if (req.n < 1) throw Error(Errc::BadParams, "n must be >= 1");
    vae::Rng rng(req.seed);
    auto sampled = vae::sample_prior(wb.vae, req.n, req.temperature, rng, req.tag);
    PoolResult out;
    out.sampled = sampled.size();
    std::vector<GeneratedLine> unique;
    for (auto& l : wundt::dedup(sampled))
        if (!existing || !existing->count(l.text)) unique.push_back(std::move(l));
    out.unique = unique.size();

    const auto band = resolve_band(wb, req.band, req.temperature, req.seed);
    std::vector<LineScore> scores;
    scores.reserve(unique.size());
    for (auto& l : unique) {
        l.score = wundt::score_line(l, wb.lm, wb.index, band);
        scores.push_back(*l.score);
    }
    auto filtered = wundt::band_filter(unique, scores, band);
    out.report = filtered.report;
    out.lines = req.apply_band ? std::move(filtered.pool) : std::move(unique);
    return out;
}

/// One JSONL record: {"text","surprisal","novelty","in_band","provenance"}.
inline nlohmann::ordered_json line_record(const GeneratedLine& l) {
    nlohmann::ordered_json j;
    j["text"] = l.text;
    j["surprisal"] = l.score ? l.score->surprisal : 0.0;
    j["novelty"] = l.score ? l.score->novelty : 0.0;
    j["in_band"] = l.score ? l.score->in_band : false;
    j["provenance"] = to_json(l.provenance);
    return j;
}

} // namespace seedline
