// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seedline/lm/model.hpp"
#include "seedline/vae/train.hpp"

namespace seedline::testing {

inline std::filesystem::path source_dir() { return SEEDLINE_SOURCE_DIR; }
inline std::filesystem::path demo_corpus_path() { return source_dir() / "data" / "demo_corpus.jsonl"; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("seedline_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Fourteen curated lines plus six more in the same register.
inline const std::vector<std::string>& twenty_lines() {
    static const std::vector<std::string> lines{
        "with a shadow beside",
        "all the tears inside",
        "i turned back to the earth",
        "she walks in a better moon",
        "and i let my heart go",
        "you'll be with freedom and shelter",
        "begin to the next mother earth",
        "and the light shines on the runway",
        "driving an endless ship on fire",
        "when i'm frightened in the air",
        "rooted in the light",
        "there's the garden in the darkness for us",
        "when the promise in the rain",
        "and the stars they go",
        "the river sleeps under a paper sky",
        "we were singing in the broken rain",
        "hold the silver morning in your hands",
        "a lantern burning on the quiet sea",
        "nobody waits at the end of the road",
        "i carry the winter in my pocket",
    };
    return lines;
}

/// Twenty longer lines; at ten or more words each the per-token entropy of
/// picking a line stays low enough for an LM to overfit below perplexity 1.4.
inline const std::vector<std::string>& twenty_long_lines() {
    static const std::vector<std::string> lines{
        "the river sleeps under a paper sky and dreams of the sea",
        "we were singing in the broken rain until the morning came",
        "hold the silver morning in your hands and never let it go",
        "a lantern burning on the quiet sea calls the sailors home again",
        "nobody waits at the end of the road where the tall grass grows",
        "i carry the winter in my pocket like a stone from the river",
        "driving an endless ship on fire through the dark and silent water",
        "when i'm frightened in the air i count the stars that fall",
        "there's the garden in the darkness for us if we find the gate",
        "she walks in a better moon with her shadow close beside her",
        "all the tears inside me turned to salt and drifted out to sea",
        "begin again at the next mother earth where the rivers run clear",
        "and the light shines on the runway as the last plane leaves town",
        "rooted in the light the old tree waits for summer to return",
        "when the promise in the rain is broken we will build another",
        "my father kept a lamp in the window for the ships that never came",
        "the kitchen smells of bread and smoke on a cold december night",
        "every road we took was paved with letters nobody ever read",
        "the fire in the hearth remembers every name we ever spoke",
        "you'll be with freedom and shelter when the long war is over",
    };
    return lines;
}

inline LoadedCorpus twenty_line_corpus() {
    CorpusOptions opt;
    opt.min_count = 1;
    opt.val_fraction = 0.0;
    return make_corpus(twenty_lines(), opt);
}

inline LoadedCorpus demo_corpus(double val_fraction = 0.1, std::uint64_t seed = 0) {
    CorpusOptions opt;
    opt.val_fraction = val_fraction;
    opt.seed = seed;
    return load_corpus(demo_corpus_path(), opt);
}

inline TrainConfig adam(std::size_t epochs, std::size_t batch, double lr, std::uint64_t seed) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch;
    t.seed = seed;
    t.optimizer.kind = num::OptimizerKind::Adam;
    t.optimizer.lr = lr;
    return t;
}

/// Small VAE on the demo corpus, trained just enough to carry structure.
inline vae::VaeModel small_demo_vae(const LoadedCorpus& data, std::size_t epochs = 12) {
    vae::VaeConfig cfg;
    cfg.d_embed = 32;
    cfg.d_hidden = 64;
    cfg.d_z = 16;
    cfg.kl_anneal_epochs = 6;
    return vae::train(data.corpus, data.vocab, cfg, adam(epochs, 16, 0.005, 3)).model;
}

inline lm::LmModel small_demo_lm(const LoadedCorpus& data, std::size_t epochs = 15) {
    lm::LmConfig cfg;
    cfg.d_embed = 32;
    cfg.d_hidden = 64;
    return lm::train_lm(data.corpus, data.vocab, cfg, adam(epochs, 16, 0.005, 4)).model;
}

} // namespace seedline::testing
