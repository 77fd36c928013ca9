// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedline/corpus/corpus.hpp"
#include "seedline/numerics/checkpoint.hpp"
#include "seedline/numerics/lstm.hpp"
#include "seedline/numerics/optimizer.hpp"
#include "seedline/numerics/sampling.hpp"
#include "seedline/vae/train.hpp"

namespace seedline::lm {

using Rng = std::mt19937_64;
using num::Graph;
using num::Tensor;
using num::Var;

struct LmConfig {
    std::size_t d_embed = 64;
    std::size_t d_hidden = 128;
    std::size_t max_len = kDefaultMaxLen;

    void validate() const {
        if (d_embed < 1 || d_hidden < 1 || max_len < 1) throw Error(Errc::BadParams, "LM dimensions must be >= 1");
    }
    friend bool operator==(const LmConfig&, const LmConfig&) = default;
};

inline nlohmann::ordered_json to_json(const LmConfig& c) {
    return {{"d_embed", c.d_embed}, {"d_hidden", c.d_hidden}, {"max_len", c.max_len}};
}

inline LmConfig lm_config_from_json(const nlohmann::ordered_json& j) {
    LmConfig c;
    c.d_embed = j.value("d_embed", c.d_embed);
    c.d_hidden = j.value("d_hidden", c.d_hidden);
    c.max_len = j.value("max_len", c.max_len);
    c.validate();
    return c;
}

/// Ancestral sampling settings. top_k == 0 disables truncation.
struct SamplerConfig {
    double temperature = 1.0;
    std::size_t max_len = kDefaultMaxLen;
    std::uint64_t seed = 0;
    std::size_t top_k = 0;

    void validate() const {
        if (!(temperature > 0.0)) throw Error(Errc::NonPositiveTemperature, "temperature must be > 0");
    }
};

/// Next-token LSTM language model over SOS-prefixed, EOS-suffixed lines.
class LmModel {
public:
    LmModel(LmConfig cfg, Vocabulary vocab, std::uint64_t seed) : cfg_(cfg), vocab_(std::move(vocab)) {
        cfg_.validate();
        Rng rng(seed);
        params_.add("embed", num::uniform_init(vocab_.size(), cfg_.d_embed, 0.1, rng));
        cell_ = num::LstmCell::create(params_, "rnn", cfg_.d_embed, cfg_.d_hidden, rng);
        params_.add("out.w", num::glorot_init(cfg_.d_hidden, vocab_.size(), rng));
        params_.add("out.b", Tensor::matrix(1, vocab_.size()));
    }

    [[nodiscard]] const LmConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const Vocabulary& vocab() const noexcept { return vocab_; }
    [[nodiscard]] num::ParameterStore& params() noexcept { return params_; }
    [[nodiscard]] const num::ParameterStore& params() const noexcept { return params_; }

    struct LossTerms {
        Var ce; // nats/token
        std::size_t tokens = 0;
    };

    /// Teacher-forced next-token cross-entropy over a batch.
    LossTerms loss(Graph& g, std::span<const TokenizedLine* const> batch) {
        if (batch.empty()) throw Error(Errc::EmptyBatch, "loss over an empty batch");
        const std::size_t B = batch.size();
        std::size_t T = 0;
        for (const auto* l : batch) T = std::max(T, l->ids.size());
        Var emb = g.param(params_.at("embed"));
        num::LstmCell::State s{g.constant(Tensor::matrix(B, cfg_.d_hidden)), g.constant(Tensor::matrix(B, cfg_.d_hidden))};
        std::vector<Var> hs;
        for (std::size_t t = 0; t <= T; ++t) {
            std::vector<std::size_t> in(B, kPad);
            for (std::size_t b = 0; b < B; ++b) {
                if (t == 0) in[b] = kSos;
                else if (t <= batch[b]->ids.size()) in[b] = batch[b]->ids[t - 1];
            }
            s = cell_.step(g, params_, g.embedding(emb, in), s);
            hs.push_back(s.h);
        }
        std::vector<std::size_t> targets;
        std::vector<std::uint8_t> mask;
        LossTerms terms;
        for (std::size_t t = 0; t <= T; ++t) {
            for (std::size_t b = 0; b < B; ++b) {
                const auto& ids = batch[b]->ids;
                targets.push_back(t < ids.size() ? ids[t] : (t == ids.size() ? kEos : kPad));
                mask.push_back(t <= ids.size() ? 1 : 0);
                terms.tokens += mask.back();
            }
        }
        Var logits = g.add(g.matmul(g.concat_rows(hs), g.param(params_.at("out.w"))), g.param(params_.at("out.b")));
        terms.ce = g.cross_entropy(logits, targets, mask);
        return terms;
    }

    /// Logits for the token following SOS + context.
    [[nodiscard]] std::vector<double> next_logits(std::span<const TokenId> context) const {
        State st = start();
        advance(st, kSos);
        for (TokenId t : context) advance(st, t);
        return logits(st);
    }

    /// softmax(logits / tau) over the full vocabulary.
    [[nodiscard]] std::vector<double> next_distribution(std::span<const TokenId> context, double temperature) const {
        if (!(temperature > 0.0)) throw Error(Errc::NonPositiveTemperature, "temperature must be > 0");
        for (TokenId t : context)
            if (t >= vocab_.size()) throw Error(Errc::IndexOutOfRange, "context id " + std::to_string(t));
        return num::tempered_distribution(next_logits(context), temperature);
    }

    /// Ancestral sampling from SOS until EOS or max_len tokens. PAD, SOS and
    /// UNK are never emitted.
    [[nodiscard]] TokenizedLine generate(const SamplerConfig& cfg, Rng& rng) const {
        cfg.validate();
        return run_decoder(cfg.temperature, cfg.top_k, cfg.max_len, rng);
    }

    [[nodiscard]] TokenizedLine greedy(std::optional<std::size_t> max_len = {}) const {
        Rng unused(0);
        return run_decoder(std::nullopt, 0, max_len.value_or(cfg_.max_len), unused);
    }

    /// Mean over positions (EOS included) of -ln p(token | prefix) at tau = 1.
    [[nodiscard]] double line_surprisal(std::span<const TokenId> ids) const {
        State st = start();
        advance(st, kSos);
        double total = 0.0;
        for (std::size_t i = 0; i <= ids.size(); ++i) {
            const TokenId target = i < ids.size() ? ids[i] : kEos;
            if (target >= vocab_.size()) throw Error(Errc::IndexOutOfRange, "token id " + std::to_string(target));
            const auto lg = logits(st);
            const Tensor lp = num::log_softmax(Tensor({1, lg.size()}, lg));
            total -= lp[target];
            if (i < ids.size()) advance(st, target);
        }
        return total / static_cast<double>(ids.size() + 1);
    }

    [[nodiscard]] double line_surprisal(const TokenizedLine& line) const { return line_surprisal(line.ids); }

    void save(const std::filesystem::path& path, const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) const {
        num::save_checkpoint(path, "lm", params_);
        nlohmann::ordered_json meta;
        meta["kind"] = "lm";
        meta["config"] = to_json(cfg_);
        meta["vocab_hash"] = vocab_.hash();
        meta["vocab"] = nlohmann::ordered_json::parse(vocab_.dump());
        for (const auto& [k, v] : extra.items()) meta[k] = v;
        write_file_atomic(sidecar_path(path), meta.dump(2) + "\n");
    }

    static LmModel load(const std::filesystem::path& path, const std::string* expected_vocab_hash = nullptr) {
        auto ck = num::load_checkpoint(path);
        if (ck.kind != "lm") throw Error(Errc::CheckpointMismatch, path.string() + " is a '" + ck.kind + "' checkpoint");
        nlohmann::ordered_json meta;
        try {
            meta = nlohmann::ordered_json::parse(read_file(sidecar_path(path)));
        } catch (const Error&) {
            throw Error(Errc::CheckpointMismatch, "missing sidecar " + sidecar_path(path).string());
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::CheckpointMismatch, e.what());
        }
        Vocabulary vocab = Vocabulary::from_json(meta.at("vocab"));
        if (vocab.hash() != meta.at("vocab_hash").get<std::string>())
            throw Error(Errc::CheckpointMismatch, "sidecar vocabulary does not match its hash");
        if (expected_vocab_hash && *expected_vocab_hash != vocab.hash())
            throw Error(Errc::CheckpointMismatch, "checkpoint vocabulary " + vocab.hash() + " != expected " + *expected_vocab_hash);
        LmModel m(lm_config_from_json(meta.at("config")), std::move(vocab), 0);
        num::assign_parameters(m.params_, ck.params);
        return m;
    }

    static std::filesystem::path sidecar_path(const std::filesystem::path& path) {
        auto p = path;
        p += ".meta.json";
        return p;
    }

private:
    struct State {
        Tensor h;
        Tensor c;
    };

    [[nodiscard]] State start() const {
        return {Tensor::matrix(1, cfg_.d_hidden), Tensor::matrix(1, cfg_.d_hidden)};
    }

    void advance(State& st, TokenId token) const {
        const auto row = params_.at("embed").value.row(token);
        cell_.infer(params_, Tensor::row_vector(row), st.h, st.c);
    }

    [[nodiscard]] std::vector<double> logits(const State& st) const {
        return num::add_broadcast(num::matmul(st.h, params_.at("out.w").value), params_.at("out.b").value).storage();
    }

    [[nodiscard]] TokenizedLine run_decoder(std::optional<double> temperature, std::size_t top_k, std::size_t max_len,
                                            Rng& rng) const {
        TokenizedLine line;
        State st = start();
        advance(st, kSos);
        while (line.ids.size() < max_len) {
            auto lg = logits(st);
            lg[kPad] = -std::numeric_limits<double>::infinity();
            lg[kSos] = -std::numeric_limits<double>::infinity();
            lg[kUnk] = -std::numeric_limits<double>::infinity();
            const TokenId t = num::choose_token(std::span<const double>(lg), temperature, rng, top_k);
            if (t == kEos) break;
            line.ids.push_back(t);
            advance(st, t);
        }
        line.text = vocab_.decode(line.ids);
        return line;
    }

    LmConfig cfg_;
    Vocabulary vocab_;
    num::ParameterStore params_;
    num::LstmCell cell_;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_ce = 0.0;
    double perplexity = 0.0;
    std::optional<double> val_perplexity;
};

inline nlohmann::ordered_json to_json(const EpochMetrics& m) {
    nlohmann::ordered_json j{{"epoch", m.epoch}, {"train_ce", m.train_ce}, {"perplexity", m.perplexity}};
    j["val_perplexity"] = m.val_perplexity ? nlohmann::ordered_json(*m.val_perplexity) : nlohmann::ordered_json(nullptr);
    return j;
}

/// Mean next-token cross-entropy (nats/token) of the model over lines.
inline double cross_entropy(LmModel& model, const std::vector<const TokenizedLine*>& lines, std::size_t batch_size = 64) {
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t i = 0; i < lines.size(); i += batch_size) {
        std::vector<const TokenizedLine*> batch(lines.begin() + static_cast<std::ptrdiff_t>(i),
                                                lines.begin() + static_cast<std::ptrdiff_t>(std::min(lines.size(), i + batch_size)));
        Graph g;
        auto terms = model.loss(g, batch);
        total += g.scalar(terms.ce) * static_cast<double>(terms.tokens);
        tokens += terms.tokens;
    }
    return tokens ? total / static_cast<double>(tokens) : 0.0;
}

struct TrainResult {
    LmModel model;
    std::vector<EpochMetrics> metrics;
};

inline TrainResult train_lm(const Corpus& corpus, const Vocabulary& vocab, const LmConfig& cfg,
                            const TrainConfig& train_cfg, const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    if (corpus.train.empty()) throw Error(Errc::EmptyCorpus, "no training lines");
    Rng rng(train_cfg.seed);
    TrainResult result{LmModel(cfg, vocab, rng()), {}};
    LmModel& m = result.model;
    num::Optimizer opt(train_cfg.optimizer);
    std::vector<const TokenizedLine*> val;
    for (std::size_t i : corpus.validation) val.push_back(&corpus.lines[i]);

    for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        double total = 0.0;
        std::size_t tokens = 0;
        for (const auto& idx : seedline::detail::make_batches(corpus.train, train_cfg.batch_size, rng)) {
            std::vector<const TokenizedLine*> batch;
            for (std::size_t i : idx) batch.push_back(&corpus.lines[i]);
            m.params().zero_grad();
            Graph g;
            auto terms = m.loss(g, batch);
            g.backward(terms.ce);
            opt.step(m.params());
            total += g.scalar(terms.ce) * static_cast<double>(terms.tokens);
            tokens += terms.tokens;
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.train_ce = total / static_cast<double>(tokens);
        if (!std::isfinite(em.train_ce)) throw Error(Errc::NonFinite, "training diverged at epoch " + std::to_string(epoch));
        em.perplexity = std::exp(em.train_ce);
        if (!val.empty()) em.val_perplexity = std::exp(cross_entropy(m, val));
        result.metrics.push_back(em);
        if (on_epoch) on_epoch(em);
    }
    return result;
}

} // namespace seedline::lm
