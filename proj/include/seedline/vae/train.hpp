// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "seedline/numerics/optimizer.hpp"
#include "seedline/vae/model.hpp"

namespace seedline {

/// Optimisation settings shared by the VAE and the baseline LM.
struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    num::OptimizerConfig optimizer;
};

inline nlohmann::ordered_json to_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"seed", t.seed},
            {"optimizer", to_string(t.optimizer.kind)},
            {"lr", t.optimizer.lr},
            {"momentum", t.optimizer.momentum},
            {"clip", t.optimizer.clip_norm}};
}

namespace detail {

/// Shuffled train indices cut into batches.
inline std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size,
                                                          std::mt19937_64& rng) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    const std::size_t bs = std::max<std::size_t>(1, batch_size);
    for (std::size_t i = 0; i < order.size(); i += bs)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
    return batches;
}

} // namespace detail

} // namespace seedline

namespace seedline::vae {

struct EpochMetrics {
    std::size_t epoch = 0;
    double kl_weight = 0.0;
    double recon = 0.0; // nats/token, with word dropout, as optimised
    double kl = 0.0;    // mean per line
    std::optional<double> val_recon;
};

inline nlohmann::ordered_json to_json(const EpochMetrics& m) {
    nlohmann::ordered_json j{{"epoch", m.epoch}, {"kl_weight", m.kl_weight}, {"recon", m.recon}, {"kl", m.kl}};
    j["val_recon"] = m.val_recon ? nlohmann::ordered_json(*m.val_recon) : nlohmann::ordered_json(nullptr);
    return j;
}

/// Linear annealing 0 -> 1 over `anneal_epochs`; epochs are 1-based.
inline double kl_weight_for_epoch(std::size_t epoch, std::size_t anneal_epochs) {
    if (anneal_epochs == 0) return 1.0;
    return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(anneal_epochs));
}

/// Teacher-forced reconstruction (nats/token) decoding from the posterior
/// mean, without word dropout.
inline double evaluate_recon(VaeModel& model, const Corpus& corpus, const std::vector<std::size_t>& indices,
                             std::size_t batch_size = 64) {
    double total = 0.0;
    std::size_t tokens = 0;
    Rng rng(0);
    for (std::size_t i = 0; i < indices.size(); i += batch_size) {
        std::vector<const TokenizedLine*> batch;
        std::vector<std::optional<std::string>> tags;
        for (std::size_t k = i; k < std::min(indices.size(), i + batch_size); ++k) {
            batch.push_back(&corpus.lines[indices[k]]);
            tags.push_back(corpus.tags[indices[k]]);
        }
        Graph g;
        auto terms = model.loss(g, batch, tags, 0.0, 0.0, rng, false);
        total += g.scalar(terms.recon) * static_cast<double>(terms.tokens);
        tokens += terms.tokens;
    }
    return tokens ? total / static_cast<double>(tokens) : 0.0;
}

struct TrainResult {
    VaeModel model;
    std::vector<EpochMetrics> metrics;
};

/// Minibatch training of the KL-annealed objective. Deterministic given
/// train_cfg.seed: one rng drives initialisation, shuffling, eps and dropout.
inline TrainResult train(const Corpus& corpus, const Vocabulary& vocab, const VaeConfig& cfg,
                         const TrainConfig& train_cfg,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    if (corpus.train.empty()) throw Error(Errc::EmptyCorpus, "no training lines");
    std::vector<std::string> tags = cfg.conditional ? corpus.tag_inventory : std::vector<std::string>{};
    Rng rng(train_cfg.seed);
    VaeModel model(cfg, vocab, tags, rng());
    num::Optimizer opt(train_cfg.optimizer);
    TrainResult result{model, {}};
    VaeModel& m = result.model;

    for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        const double w = kl_weight_for_epoch(epoch, cfg.kl_anneal_epochs);
        double recon_sum = 0.0, kl_sum = 0.0;
        std::size_t tokens = 0, lines = 0;
        for (const auto& idx : seedline::detail::make_batches(corpus.train, train_cfg.batch_size, rng)) {
            std::vector<const TokenizedLine*> batch;
            std::vector<std::optional<std::string>> batch_tags;
            for (std::size_t i : idx) {
                batch.push_back(&corpus.lines[i]);
                batch_tags.push_back(corpus.tags[i]);
            }
            m.params().zero_grad();
            Graph g;
            auto terms = m.loss(g, batch, batch_tags, w, cfg.word_dropout, rng);
            g.backward(terms.objective);
            opt.step(m.params());
            recon_sum += g.scalar(terms.recon) * static_cast<double>(terms.tokens);
            kl_sum += g.scalar(terms.kl) * static_cast<double>(batch.size());
            tokens += terms.tokens;
            lines += batch.size();
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.kl_weight = w;
        em.recon = recon_sum / static_cast<double>(tokens);
        em.kl = kl_sum / static_cast<double>(lines);
        if (!corpus.validation.empty()) em.val_recon = evaluate_recon(m, corpus, corpus.validation);
        if (!std::isfinite(em.recon) || !std::isfinite(em.kl))
            throw Error(Errc::NonFinite, "training diverged at epoch " + std::to_string(epoch));
        result.metrics.push_back(em);
        if (on_epoch) on_epoch(em);
    }
    return result;
}

} // namespace seedline::vae
