// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seedline/corpus/corpus.hpp"
#include "seedline/numerics/checkpoint.hpp"
#include "seedline/numerics/graph.hpp"
#include "seedline/numerics/lstm.hpp"
#include "seedline/numerics/sampling.hpp"

namespace seedline::vae {

using Rng = std::mt19937_64;
using num::Graph;
using num::Tensor;
using num::Var;

struct VaeConfig {
    std::size_t d_embed = 64;
    std::size_t d_hidden = 128;
    std::size_t d_z = 32;
    std::size_t kl_anneal_epochs = 10;
    double word_dropout = 0.4;
    std::size_t max_len = kDefaultMaxLen;
    bool conditional = false;
    std::size_t tag_dim = 8;

    void validate() const {
        if (d_embed < 1 || d_hidden < 1 || d_z < 1 || max_len < 1 || (conditional && tag_dim < 1))
            throw Error(Errc::BadParams, "VAE dimensions must be >= 1");
        if (!(word_dropout >= 0.0 && word_dropout < 1.0)) throw Error(Errc::BadParams, "word_dropout must be in [0, 1)");
    }

    friend bool operator==(const VaeConfig&, const VaeConfig&) = default;
};

inline nlohmann::ordered_json to_json(const VaeConfig& c) {
    return {{"d_embed", c.d_embed},         {"d_hidden", c.d_hidden}, {"d_z", c.d_z},
            {"kl_anneal_epochs", c.kl_anneal_epochs}, {"word_dropout", c.word_dropout}, {"max_len", c.max_len},
            {"conditional", c.conditional}, {"tag_dim", c.tag_dim}};
}

inline VaeConfig vae_config_from_json(const nlohmann::ordered_json& j) {
    VaeConfig c;
    c.d_embed = j.value("d_embed", c.d_embed);
    c.d_hidden = j.value("d_hidden", c.d_hidden);
    c.d_z = j.value("d_z", c.d_z);
    c.kl_anneal_epochs = j.value("kl_anneal_epochs", c.kl_anneal_epochs);
    c.word_dropout = j.value("word_dropout", c.word_dropout);
    c.max_len = j.value("max_len", c.max_len);
    c.conditional = j.value("conditional", c.conditional);
    c.tag_dim = j.value("tag_dim", c.tag_dim);
    c.validate();
    return c;
}

/// Posterior parameters plus the realised latent z = mu + exp(logvar / 2) * eps.
struct LatentSample {
    std::vector<double> mu;
    std::vector<double> logvar;
    std::vector<double> eps;
    std::vector<double> z;
};

inline LatentSample reparameterize(std::vector<double> mu, std::vector<double> logvar, std::vector<double> eps) {
    if (mu.size() != logvar.size() || mu.size() != eps.size())
        throw Error(Errc::ShapeMismatch, "reparameterize: mu, logvar and eps must share a dimension");
    LatentSample s{std::move(mu), std::move(logvar), std::move(eps), {}};
    s.z.resize(s.mu.size());
    for (std::size_t i = 0; i < s.z.size(); ++i) s.z[i] = s.mu[i] + std::exp(0.5 * s.logvar[i]) * s.eps[i];
    return s;
}

inline LatentSample reparameterize(std::vector<double> mu, std::vector<double> logvar, Rng& rng) {
    auto eps = num::standard_normal_vector(mu.size(), rng);
    return reparameterize(std::move(mu), std::move(logvar), std::move(eps));
}

/// Closed-form KL(N(mu, diag exp(logvar)) || N(0, I)).
inline double kl_divergence(std::span<const double> mu, std::span<const double> logvar) {
    if (mu.size() != logvar.size()) throw Error(Errc::ShapeMismatch, "kl_divergence: mu and logvar differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += std::exp(logvar[i]) + mu[i] * mu[i] - 1.0 - logvar[i];
    return 0.5 * s;
}

/// Terms of one training objective evaluation.
struct LossTerms {
    Var recon;     // teacher-forced cross-entropy, nats/token
    Var kl;        // mean KL per line
    Var objective; // recon + kl_weight * kl * lines / tokens
    std::size_t tokens = 0;
};

struct Posterior {
    std::vector<double> mu;
    std::vector<double> logvar;
};

/// Sentence VAE: LSTM encoder -> (mu, logvar); LSTM decoder whose initial
/// hidden state is projected from z and whose every input embedding is
/// concatenated with z. Conditional models also append a tag embedding to
/// encoder inputs and to z.
class VaeModel {
public:
    VaeModel(VaeConfig cfg, Vocabulary vocab, std::vector<std::string> tags, std::uint64_t seed)
        : cfg_(cfg), vocab_(std::move(vocab)), tags_(std::move(tags)) {
        cfg_.validate();
        if (cfg_.conditional && tags_.empty()) throw Error(Errc::BadParams, "conditional model needs a tag inventory");
        if (!cfg_.conditional) tags_.clear();
        Rng rng(seed);
        const std::size_t V = vocab_.size();
        const std::size_t T = tag_width();
        params_.add("embed", num::uniform_init(V, cfg_.d_embed, 0.1, rng));
        if (cfg_.conditional) params_.add("tag_embed", num::uniform_init(tags_.size(), cfg_.tag_dim, 0.1, rng));
        encoder_ = num::LstmCell::create(params_, "enc", cfg_.d_embed + T, cfg_.d_hidden, rng);
        add_linear("mu", cfg_.d_hidden, cfg_.d_z, rng);
        add_linear("logvar", cfg_.d_hidden, cfg_.d_z, rng);
        add_linear("z2h", cfg_.d_z + T, cfg_.d_hidden, rng);
        decoder_ = num::LstmCell::create(params_, "dec", cfg_.d_embed + cfg_.d_z + T, cfg_.d_hidden, rng);
        add_linear("out", cfg_.d_hidden, V, rng);
    }

    [[nodiscard]] const VaeConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const Vocabulary& vocab() const noexcept { return vocab_; }
    [[nodiscard]] const std::vector<std::string>& tags() const noexcept { return tags_; }
    [[nodiscard]] num::ParameterStore& params() noexcept { return params_; }
    [[nodiscard]] const num::ParameterStore& params() const noexcept { return params_; }

    /// Deterministic posterior parameters for a line.
    [[nodiscard]] Posterior encode(const TokenizedLine& line, const std::optional<std::string>& tag = {}) const {
        if (line.ids.empty()) throw Error(Errc::EmptyLine, "cannot encode an empty line");
        if (line.ids.size() > cfg_.max_len) throw Error(Errc::TooLong, "line exceeds max_len");
        const auto tag_row = tag_vector(tag);
        const Tensor& emb = params_.at("embed").value;
        Tensor h = Tensor::matrix(1, cfg_.d_hidden);
        Tensor c = Tensor::matrix(1, cfg_.d_hidden);
        for (TokenId id : line.ids) {
            if (id >= vocab_.size()) throw Error(Errc::IndexOutOfRange, "token id " + std::to_string(id));
            std::vector<double> x(emb.row(id).begin(), emb.row(id).end());
            x.insert(x.end(), tag_row.begin(), tag_row.end());
            encoder_.infer(params_, Tensor::row_vector(x), h, c);
        }
        Posterior p;
        p.mu = linear(h, "mu").storage();
        p.logvar = linear(h, "logvar").storage();
        return p;
    }

    [[nodiscard]] TokenizedLine decode_greedy(std::span<const double> z, const std::optional<std::string>& tag = {},
                                              std::optional<std::size_t> max_len = {}) const {
        Rng unused(0);
        return decode_batch({std::vector<double>(z.begin(), z.end())}, tag, std::nullopt, unused, max_len).front();
    }

    [[nodiscard]] TokenizedLine decode_sampled(std::span<const double> z, const std::optional<std::string>& tag,
                                               double temperature, Rng& rng,
                                               std::optional<std::size_t> max_len = {}) const {
        if (!(temperature > 0.0)) throw Error(Errc::NonPositiveTemperature, "temperature must be > 0");
        return decode_batch({std::vector<double>(z.begin(), z.end())}, tag, temperature, rng, max_len).front();
    }

    /// Decodes every latent in lock-step. Greedy when `temperature` is empty;
    /// otherwise each still-active row draws one uniform per step, in row order.
    /// PAD, SOS and UNK are never emitted.
    [[nodiscard]] std::vector<TokenizedLine> decode_batch(const std::vector<std::vector<double>>& zs,
                                                          const std::optional<std::string>& tag,
                                                          std::optional<double> temperature, Rng& rng,
                                                          std::optional<std::size_t> max_len = {}) const {
        if (temperature && !(*temperature > 0.0))
            throw Error(Errc::NonPositiveTemperature, "temperature must be > 0");
        const std::size_t limit = max_len.value_or(cfg_.max_len);
        const std::size_t B = zs.size();
        std::vector<TokenizedLine> out(B);
        if (B == 0) return out;
        Tensor zc = latent_inputs(zs, tag);
        Tensor h = num::tanh(linear(zc, "z2h"));
        Tensor c = Tensor::matrix(B, cfg_.d_hidden);
        const Tensor& emb = params_.at("embed").value;
        std::vector<TokenId> prev(B, kSos);
        std::vector<bool> done(B, false);
        std::size_t active = B;
        for (std::size_t step = 0; step < limit && active > 0; ++step) {
            Tensor x = Tensor::matrix(B, cfg_.d_embed + zc.cols());
            for (std::size_t b = 0; b < B; ++b) {
                auto row = x.row(b);
                std::copy(emb.row(prev[b]).begin(), emb.row(prev[b]).end(), row.begin());
                std::copy(zc.row(b).begin(), zc.row(b).end(), row.begin() + static_cast<std::ptrdiff_t>(cfg_.d_embed));
            }
            decoder_.infer(params_, x, h, c);
            Tensor logits = linear(h, "out");
            for (std::size_t b = 0; b < B; ++b) {
                if (done[b]) continue;
                auto row = logits.row(b);
                mask_unemittable(row);
                const TokenId t = num::choose_token(std::span<const double>(row), temperature, rng);
                if (t == kEos) {
                    done[b] = true;
                    --active;
                    continue;
                }
                out[b].ids.push_back(t);
                prev[b] = t;
            }
        }
        for (auto& line : out) line.text = vocab_.decode(line.ids);
        return out;
    }

    /// Decoder logits for the first emitted token (PAD, SOS and UNK masked to -inf).
    [[nodiscard]] std::vector<double> first_step_logits(std::span<const double> z,
                                                        const std::optional<std::string>& tag = {}) const {
        Tensor zc = latent_inputs({std::vector<double>(z.begin(), z.end())}, tag);
        Tensor h = num::tanh(linear(zc, "z2h"));
        Tensor c = Tensor::matrix(1, cfg_.d_hidden);
        const Tensor& emb = params_.at("embed").value;
        std::vector<double> x(emb.row(kSos).begin(), emb.row(kSos).end());
        x.insert(x.end(), zc.row(0).begin(), zc.row(0).end());
        decoder_.infer(params_, Tensor::row_vector(x), h, c);
        Tensor logits = linear(h, "out");
        mask_unemittable(logits.row(0));
        return logits.storage();
    }

    /// Differentiable objective over a batch. Each decoder input token (not
    /// SOS) is replaced by UNK with probability `word_dropout`. The rng is
    /// consumed for eps first (row-major), then for dropout.
    LossTerms loss(Graph& g, std::span<const TokenizedLine* const> batch,
                   const std::vector<std::optional<std::string>>& batch_tags, double kl_weight, double word_dropout,
                   Rng& rng, bool sample_latent = true) {
        if (batch.empty()) throw Error(Errc::EmptyBatch, "loss over an empty batch");
        if (kl_weight < 0.0) throw Error(Errc::BadParams, "kl_weight must be >= 0");
        const std::size_t B = batch.size();
        std::size_t T = 0;
        for (const auto* l : batch) {
            if (l->ids.empty()) throw Error(Errc::EmptyLine, "empty line in batch");
            T = std::max(T, l->ids.size());
        }

        Var tag_in;
        if (cfg_.conditional) {
            std::vector<std::size_t> ids;
            for (std::size_t b = 0; b < B; ++b) ids.push_back(tag_id(b < batch_tags.size() ? batch_tags[b] : std::nullopt));
            tag_in = g.embedding(g.param(params_.at("tag_embed")), ids);
        }

        Var emb = g.param(params_.at("embed"));
        num::LstmCell::State s{g.constant(Tensor::matrix(B, cfg_.d_hidden)), g.constant(Tensor::matrix(B, cfg_.d_hidden))};
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<std::size_t> ids(B, kPad);
            std::vector<double> live(B, 0.0);
            bool all_live = true;
            for (std::size_t b = 0; b < B; ++b) {
                if (t < batch[b]->ids.size()) {
                    ids[b] = batch[b]->ids[t];
                    live[b] = 1.0;
                } else {
                    all_live = false;
                }
            }
            Var x = g.embedding(emb, ids);
            if (cfg_.conditional) x = g.concat_cols({x, tag_in});
            auto next = encoder_.step(g, params_, x, s);
            if (all_live) {
                s = next;
            } else {
                s = {g.blend(next.h, s.h, live), g.blend(next.c, s.c, live)};
            }
        }
        Var mu = linear(g, s.h, "mu");
        Var logvar = linear(g, s.h, "logvar");

        Var z = mu;
        if (sample_latent) {
            Tensor eps = Tensor::matrix(B, cfg_.d_z);
            std::normal_distribution<double> nd(0.0, 1.0);
            for (double& v : eps.data()) v = nd(rng);
            z = g.add(mu, g.mul(g.exp(g.scale(logvar, 0.5)), g.constant(std::move(eps))));
        }
        Var zc = cfg_.conditional ? g.concat_cols({z, tag_in}) : z;

        num::LstmCell::State d{g.tanh(linear(g, zc, "z2h")), g.constant(Tensor::matrix(B, cfg_.d_hidden))};
        std::bernoulli_distribution drop(word_dropout);
        std::vector<Var> hs;
        std::vector<std::size_t> targets;
        std::vector<std::uint8_t> mask;
        LossTerms terms;
        for (std::size_t t = 0; t <= T; ++t) {
            std::vector<std::size_t> in(B, kPad);
            for (std::size_t b = 0; b < B; ++b) {
                const auto& ids = batch[b]->ids;
                if (t == 0) in[b] = kSos;
                else if (t <= ids.size()) in[b] = (word_dropout > 0.0 && drop(rng)) ? kUnk : ids[t - 1];
            }
            Var x = g.concat_cols({g.embedding(emb, in), zc});
            d = decoder_.step(g, params_, x, d);
            hs.push_back(d.h);
        }
        for (std::size_t t = 0; t <= T; ++t) {
            for (std::size_t b = 0; b < B; ++b) {
                const auto& ids = batch[b]->ids;
                if (t < ids.size()) targets.push_back(ids[t]);
                else if (t == ids.size()) targets.push_back(kEos);
                else targets.push_back(kPad);
                mask.push_back(t <= ids.size() ? 1 : 0);
                terms.tokens += mask.back();
            }
        }
        Var logits = linear(g, g.concat_rows(hs), "out");
        terms.recon = g.cross_entropy(logits, targets, mask);
        terms.kl = g.kl_divergence(mu, logvar);
        // KL is spread over the batch's tokens so both terms share a per-token scale.
        const double kl_scale = kl_weight * static_cast<double>(B) / static_cast<double>(terms.tokens);
        terms.objective = g.add(terms.recon, g.scale(terms.kl, kl_scale));
        return terms;
    }

    /// Writes the parameter checkpoint plus `<path>.meta.json` holding config,
    /// vocabulary, vocabulary hash, tags and any `extra` fields.
    void save(const std::filesystem::path& path, const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) const {
        num::save_checkpoint(path, "vae", params_);
        nlohmann::ordered_json meta;
        meta["kind"] = "vae";
        meta["config"] = to_json(cfg_);
        meta["vocab_hash"] = vocab_.hash();
        meta["vocab"] = nlohmann::ordered_json::parse(vocab_.dump());
        meta["tags"] = tags_;
        for (const auto& [k, v] : extra.items()) meta[k] = v;
        write_file_atomic(sidecar_path(path), meta.dump(2) + "\n");
    }

    static VaeModel load(const std::filesystem::path& path, const std::string* expected_vocab_hash = nullptr) {
        auto ck = num::load_checkpoint(path);
        if (ck.kind != "vae") throw Error(Errc::CheckpointMismatch, path.string() + " is a '" + ck.kind + "' checkpoint");
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
        VaeModel m(vae_config_from_json(meta.at("config")), std::move(vocab),
                   meta.value("tags", std::vector<std::string>{}), 0);
        num::assign_parameters(m.params_, ck.params);
        return m;
    }

    static std::filesystem::path sidecar_path(const std::filesystem::path& path) {
        auto p = path;
        p += ".meta.json";
        return p;
    }

private:
    [[nodiscard]] std::size_t tag_width() const noexcept { return cfg_.conditional ? cfg_.tag_dim : 0; }

    void add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
        params_.add(name + ".w", num::glorot_init(in, out, rng));
        params_.add(name + ".b", Tensor::matrix(1, out));
    }

    [[nodiscard]] Tensor linear(const Tensor& x, const std::string& name) const {
        return num::add_broadcast(num::matmul(x, params_.at(name + ".w").value), params_.at(name + ".b").value);
    }

    Var linear(Graph& g, Var x, const std::string& name) {
        return g.add(g.matmul(x, g.param(params_.at(name + ".w"))), g.param(params_.at(name + ".b")));
    }

    [[nodiscard]] std::size_t tag_id(const std::optional<std::string>& tag) const {
        if (!tag) throw Error(Errc::MissingTag, "conditional model requires a tag");
        for (std::size_t i = 0; i < tags_.size(); ++i)
            if (tags_[i] == *tag) return i;
        throw Error(Errc::BadParams, "unknown tag '" + *tag + "'");
    }

    [[nodiscard]] std::vector<double> tag_vector(const std::optional<std::string>& tag) const {
        if (!cfg_.conditional) return {};
        auto row = params_.at("tag_embed").value.row(tag_id(tag));
        return {row.begin(), row.end()};
    }

    [[nodiscard]] Tensor latent_inputs(const std::vector<std::vector<double>>& zs,
                                       const std::optional<std::string>& tag) const {
        const auto tag_row = tag_vector(tag);
        Tensor zc = Tensor::matrix(zs.size(), cfg_.d_z + tag_row.size());
        for (std::size_t b = 0; b < zs.size(); ++b) {
            if (zs[b].size() != cfg_.d_z)
                throw Error(Errc::ShapeMismatch, "latent has dimension " + std::to_string(zs[b].size()) + ", model expects " +
                                                     std::to_string(cfg_.d_z));
            auto row = zc.row(b);
            std::copy(zs[b].begin(), zs[b].end(), row.begin());
            std::copy(tag_row.begin(), tag_row.end(), row.begin() + static_cast<std::ptrdiff_t>(cfg_.d_z));
        }
        return zc;
    }

    static void mask_unemittable(std::span<double> logits) {
        logits[kPad] = -std::numeric_limits<double>::infinity();
        logits[kSos] = -std::numeric_limits<double>::infinity();
        logits[kUnk] = -std::numeric_limits<double>::infinity();
    }

    VaeConfig cfg_;
    Vocabulary vocab_;
    std::vector<std::string> tags_;
    num::ParameterStore params_;
    num::LstmCell encoder_;
    num::LstmCell decoder_;
};

} // namespace seedline::vae
