// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seedline/pipeline.hpp"
#include "seedline/service/http.hpp"
#include "seedline/service/pool_service.hpp"
#include "seedline/vae/train.hpp"

namespace seedline::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Input problems the operator can fix map to exit code 2.
inline int exit_code_for(Errc code) {
    switch (code) {
    case Errc::FileNotFound:
    case Errc::MalformedRecord:
    case Errc::BadParams:
    case Errc::EmptyCorpus:
    case Errc::EmptyLine:
    case Errc::TooLong:
    case Errc::MissingTag:
    case Errc::NonPositiveTemperature:
    case Errc::CheckpointMismatch: return kExitUsage;
    default: return kExitRuntime;
    }
}

struct CorpusFlags {
    std::string corpus;
    std::size_t min_count = kDefaultMinCount;
    double val_fraction = 0.1;
    std::size_t max_len = kDefaultMaxLen;
};

struct TrainVaeArgs {
    CorpusFlags data;
    std::string out;
    std::string metrics; // default: <out>.metrics.jsonl
    vae::VaeConfig model;
    TrainConfig train;
};

struct TrainLmArgs {
    CorpusFlags data;
    std::string out;
    std::string metrics;
    std::string vocab_from; // VAE checkpoint whose vocabulary the LM adopts
    lm::LmConfig model;
    TrainConfig train;
};

struct BandFlags {
    std::vector<double> quantiles; // {lo, hi}
    std::vector<double> absolute;  // {lo, hi}
    std::size_t reference_size = 1000;

    [[nodiscard]] wundt::BandConfig band() const {
        if (!quantiles.empty() && !absolute.empty())
            throw Error(Errc::BadParams, "--band-quantiles and --band-abs are mutually exclusive");
        if (!absolute.empty()) return wundt::BandConfig::absolute(absolute.at(0), absolute.at(1));
        if (!quantiles.empty()) return wundt::BandConfig::quantiles(quantiles.at(0), quantiles.at(1), reference_size);
        return wundt::BandConfig::quantiles(0.25, 0.75, reference_size);
    }
};

struct GenerateArgs {
    std::string vae;
    std::string lm;
    std::string corpus;
    std::size_t n = 350;
    double temperature = 1.0; // 0: greedy
    std::uint64_t seed = 0;
    BandFlags band;
    bool apply_band = false;
    std::string tag;
    std::string out;
    std::string report;
};

struct ScoreArgs {
    std::string lm;
    std::string corpus;
    std::string lines;
    BandFlags band;
    std::string out;
};

struct ServeArgs {
    std::string vae;
    std::string lm;
    std::string corpus;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "sessions";
};

struct ExportArgs {
    std::string session;
    std::string format = "text";
};

namespace detail {

inline void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    write_file_atomic(path, content);
}

class MetricsLog {
public:
    explicit MetricsLog(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) throw Error(Errc::Io, "cannot open metrics log " + path);
    }
    void write(const json& record) {
        out_ << record.dump() << '\n';
        out_.flush();
        std::clog << record.dump() << '\n';
    }

private:
    std::ofstream out_;
};

inline LoadedCorpus load_training_corpus(const CorpusFlags& f, std::uint64_t seed, const Vocabulary* vocab = nullptr) {
    CorpusOptions opt;
    opt.min_count = f.min_count;
    opt.val_fraction = f.val_fraction;
    opt.seed = seed;
    opt.max_len = f.max_len;
    return load_corpus(f.corpus, opt, vocab);
}

inline std::optional<double> temperature_or_greedy(double t) {
    if (t == 0.0) return std::nullopt;
    if (!(t > 0.0)) throw Error(Errc::BadParams, "--temperature must be >= 0");
    return t;
}

/// Plain text (one line per line) or JSONL records carrying "text".
inline std::vector<std::string> read_lines_file(const std::string& path) {
    std::ifstream in(path);
    if (!fs::is_regular_file(path) || !in) throw Error(Errc::FileNotFound, path);
    std::vector<std::string> out;
    std::string raw;
    std::size_t n = 0;
    while (std::getline(in, raw)) {
        ++n;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (raw.front() == '{') {
            try {
                out.push_back(json::parse(raw).at("text").get<std::string>());
            } catch (const json::exception& e) {
                throw Error(Errc::MalformedRecord, "line " + std::to_string(n) + ": " + e.what());
            }
        } else {
            out.push_back(raw);
        }
    }
    return out;
}

} // namespace detail

inline int cmd_train_vae(const TrainVaeArgs& a) {
    a.model.validate();
    auto data = detail::load_training_corpus(a.data, a.train.seed);
    vae::VaeConfig cfg = a.model;
    cfg.max_len = a.data.max_len;
    detail::MetricsLog log(a.metrics.empty() ? a.out + ".metrics.jsonl" : a.metrics);
    log.write({{"event", "start"},
               {"lines", data.corpus.size()},
               {"train", data.corpus.train.size()},
               {"validation", data.corpus.validation.size()},
               {"vocab", data.vocab.size()},
               {"config", to_json(cfg)},
               {"train_config", to_json(a.train)}});
    auto result = vae::train(data.corpus, data.vocab, cfg, a.train,
                             [&](const vae::EpochMetrics& m) { log.write(to_json(m)); });
    result.model.save(a.out, {{"corpus", fs::absolute(a.data.corpus).string()}, {"train", to_json(a.train)}});
    log.write({{"event", "saved"}, {"checkpoint", a.out}});
    return kExitOk;
}

inline int cmd_train_lm(const TrainLmArgs& a) {
    a.model.validate();
    std::optional<Vocabulary> shared;
    if (!a.vocab_from.empty()) shared = vae::VaeModel::load(a.vocab_from).vocab();
    auto data = detail::load_training_corpus(a.data, a.train.seed, shared ? &*shared : nullptr);
    lm::LmConfig cfg = a.model;
    cfg.max_len = a.data.max_len;
    detail::MetricsLog log(a.metrics.empty() ? a.out + ".metrics.jsonl" : a.metrics);
    log.write({{"event", "start"},
               {"lines", data.corpus.size()},
               {"vocab", data.vocab.size()},
               {"config", to_json(cfg)},
               {"train_config", to_json(a.train)}});
    auto result = lm::train_lm(data.corpus, data.vocab, cfg, a.train,
                               [&](const lm::EpochMetrics& m) { log.write(to_json(m)); });
    result.model.save(a.out, {{"corpus", fs::absolute(a.data.corpus).string()}, {"train", to_json(a.train)}});
    log.write({{"event", "saved"}, {"checkpoint", a.out}});
    return kExitOk;
}

inline int cmd_generate(const GenerateArgs& a) {
    if (a.n < 1) throw Error(Errc::BadParams, "--n must be >= 1");
    std::optional<fs::path> corpus;
    if (!a.corpus.empty()) corpus = a.corpus;
    else corpus = Workbench::recorded_corpus(a.vae);
    const auto wb = Workbench::load(a.vae, a.lm, corpus);
    PoolRequest req;
    req.n = a.n;
    req.temperature = detail::temperature_or_greedy(a.temperature);
    req.seed = a.seed;
    req.apply_band = a.apply_band;
    req.band = a.band.band();
    if (!a.tag.empty()) req.tag = a.tag;
    const auto res = generate_scored_pool(wb, req);
    std::string body;
    for (const auto& l : res.lines) body += line_record(l).dump() + "\n";
    detail::write_output(a.out, body);
    json summary{{"sampled", res.sampled}, {"unique", res.unique}, {"emitted", res.lines.size()},
                 {"report", wundt::to_json(res.report)}};
    if (!a.report.empty()) write_file_atomic(a.report, summary.dump(2) + "\n");
    std::clog << summary.dump() << '\n';
    return kExitOk;
}

/// Quantile bands are resolved over the scored lines themselves.
inline int cmd_score(const ScoreArgs& a) {
    auto model = lm::LmModel::load(a.lm);
    wundt::NgramIndex index(wundt::kDefaultNgram);
    if (!a.corpus.empty()) {
        CorpusOptions opt;
        opt.val_fraction = 0.0;
        opt.max_len = model.config().max_len;
        index = wundt::NgramIndex(load_corpus(a.corpus, opt, &model.vocab()).corpus);
    }
    const auto texts = detail::read_lines_file(a.lines);
    std::vector<std::string> kept;
    std::vector<double> surprisal;
    std::vector<TokenizedLine> encoded;
    for (const auto& t : texts) {
        try {
            encoded.push_back(encode_line(t, model.vocab(), model.config().max_len));
        } catch (const Error& e) {
            std::clog << "skipping line: " << e.what() << '\n';
            continue;
        }
        kept.push_back(encoded.back().text);
        surprisal.push_back(model.line_surprisal(encoded.back().ids));
    }
    const auto cfg = a.band.band();
    const auto band = cfg.mode == wundt::BandConfig::Mode::Quantile && surprisal.empty() ? wundt::ResolvedBand{}
                                                                                          : wundt::resolve(cfg, surprisal);
    std::vector<GeneratedLine> pool;
    std::vector<LineScore> scores;
    for (const auto& e : encoded) {
        GeneratedLine g;
        g.text = e.text;
        g.tokens = e.ids;
        scores.push_back(wundt::score_line(e.ids, e.text, model, index, band));
        pool.push_back(std::move(g));
    }
    const auto filtered = wundt::band_filter(pool, scores, band);
    detail::write_output(a.out, wundt::score_report(kept, scores, filtered.report).dump(2) + "\n");
    return kExitOk;
}

namespace detail {
inline std::atomic<httplib::Server*> g_server{nullptr};
inline void stop_server(int) {
    if (auto* s = g_server.load()) s->stop();
}
} // namespace detail

inline int cmd_serve(const ServeArgs& a) {
    service::PoolService::Options opt;
    opt.data_dir = a.data_dir;
    opt.defaults.vae = a.vae;
    opt.defaults.lm = a.lm;
    if (!a.corpus.empty()) opt.defaults.corpus = a.corpus;
    service::PoolService svc(opt);
    // Fail fast on unusable checkpoints rather than on the first request.
    Workbench::load(a.vae, a.lm, a.corpus.empty() ? Workbench::recorded_corpus(a.vae) : std::optional<fs::path>(a.corpus));
    httplib::Server server;
    service::install_routes(server, svc);
    detail::g_server = &server;
    std::signal(SIGINT, detail::stop_server);
    std::signal(SIGTERM, detail::stop_server);
    std::clog << "listening on http://" << a.host << ':' << a.port << '\n';
    const bool ok = server.listen(a.host, a.port);
    detail::g_server = nullptr;
    if (!ok) throw Error(Errc::Io, "cannot listen on " + a.host + ":" + std::to_string(a.port));
    return kExitOk;
}

inline int cmd_export(const ExportArgs& a) {
    const auto s = service::import_session(read_file(a.session));
    if (a.format == "text") {
        const auto text = s.poem_text();
        detail::write_output("-", text.empty() ? text : text + "\n");
    } else if (a.format == "json") {
        detail::write_output("-", service::session_document(s));
    } else {
        throw Error(Errc::BadParams, "--format must be text or json");
    }
    return kExitOk;
}

namespace detail {

inline std::string config_key(const CLI::Option* opt) {
    std::string name = opt->get_single_name();
    for (char& c : name)
        if (c == '-') c = '_';
    return name;
}

/// Fills options that were not given on the command line from a JSON object
/// whose keys are long flag names (dashes or underscores).
inline void apply_config(CLI::App* sub, const json& cfg) {
    for (CLI::Option* opt : sub->get_options()) {
        if (opt->count() > 0 || opt->get_single_name() == "config" || opt->get_single_name() == "help") continue;
        std::string key = config_key(opt);
        std::string dashed = opt->get_single_name();
        const json* v = nullptr;
        if (cfg.contains(key)) v = &cfg[key];
        else if (cfg.contains(dashed)) v = &cfg[dashed];
        if (!v || v->is_null()) continue;
        std::vector<std::string> values;
        auto as_string = [](const json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
        if (v->is_array())
            for (const auto& x : *v) values.push_back(as_string(x));
        else if (v->is_boolean())
            values.push_back(v->get<bool>() ? "true" : "false");
        else
            values.push_back(as_string(*v));
        opt->add_result(values);
        opt->run_callback();
    }
}

} // namespace detail

/// Holds every subcommand's argument struct so CLI11 can bind into them.
struct Invocation {
    TrainVaeArgs train_vae;
    TrainLmArgs train_lm;
    GenerateArgs generate;
    ScoreArgs score;
    ServeArgs serve;
    ExportArgs exp;
    std::string optimizer_vae = "sgd";
    std::string optimizer_lm = "sgd";
    std::string config;
};

namespace detail {

inline void add_corpus_flags(CLI::App* sub, CorpusFlags& f) {
    sub->add_option("--corpus", f.corpus, "JSONL corpus ({\"text\", \"tag\"} per line)")->required();
    sub->add_option("--min-count", f.min_count, "minimum word frequency kept in the vocabulary");
    sub->add_option("--val-fraction", f.val_fraction, "share of lines held out for validation");
    sub->add_option("--max-len", f.max_len, "maximum tokens per line");
}

inline void add_train_flags(CLI::App* sub, TrainConfig& t, std::string& optimizer) {
    sub->add_option("--epochs", t.epochs);
    sub->add_option("--batch-size", t.batch_size);
    sub->add_option("--seed", t.seed);
    sub->add_option("--optimizer", optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
    sub->add_option("--lr", t.optimizer.lr);
    sub->add_option("--momentum", t.optimizer.momentum);
    sub->add_option("--clip", t.optimizer.clip_norm, "global gradient norm clip (0 disables)");
}

inline void add_band_flags(CLI::App* sub, BandFlags& b) {
    sub->add_option("--band-quantiles", b.quantiles, "surprisal band as quantiles LO HI")->expected(2);
    sub->add_option("--band-abs", b.absolute, "surprisal band in nats/token LO HI")->expected(2);
    sub->add_option("--reference-size", b.reference_size, "reference sample size for quantile bands");
}

} // namespace detail

/// Builds the command tree. The returned app binds into `inv`.
inline std::unique_ptr<CLI::App> make_app(Invocation& inv) {
    auto app = std::make_unique<CLI::App>("seedline: latent lyric generation and Wundt-band curation");
    app->require_subcommand(1);
    app->set_help_all_flag("--help-all");

    auto* tv = app->add_subcommand("train-vae", "train the LSTM-VAE line generator");
    detail::add_corpus_flags(tv, inv.train_vae.data);
    tv->add_option("--out", inv.train_vae.out, "checkpoint path")->required();
    tv->add_option("--metrics", inv.train_vae.metrics, "JSONL metrics log");
    tv->add_option("--d-embed", inv.train_vae.model.d_embed);
    tv->add_option("--d-hidden", inv.train_vae.model.d_hidden);
    tv->add_option("--d-z", inv.train_vae.model.d_z);
    tv->add_option("--kl-anneal-epochs", inv.train_vae.model.kl_anneal_epochs);
    tv->add_option("--word-dropout", inv.train_vae.model.word_dropout);
    tv->add_flag("--conditional", inv.train_vae.model.conditional, "condition on theme tags");
    tv->add_option("--tag-dim", inv.train_vae.model.tag_dim);
    detail::add_train_flags(tv, inv.train_vae.train, inv.optimizer_vae);

    auto* tl = app->add_subcommand("train-lm", "train the baseline LSTM language model");
    detail::add_corpus_flags(tl, inv.train_lm.data);
    tl->add_option("--out", inv.train_lm.out, "checkpoint path")->required();
    tl->add_option("--metrics", inv.train_lm.metrics, "JSONL metrics log");
    tl->add_option("--vocab-from", inv.train_lm.vocab_from, "reuse the vocabulary of this VAE checkpoint");
    tl->add_option("--d-embed", inv.train_lm.model.d_embed);
    tl->add_option("--d-hidden", inv.train_lm.model.d_hidden);
    detail::add_train_flags(tl, inv.train_lm.train, inv.optimizer_lm);

    auto* gen = app->add_subcommand("generate", "sample, score and optionally band-filter a pool of lines");
    gen->add_option("--vae", inv.generate.vae)->required();
    gen->add_option("--lm", inv.generate.lm)->required();
    gen->add_option("--corpus", inv.generate.corpus, "corpus for novelty (default: the one recorded at training)");
    gen->add_option("--n", inv.generate.n, "number of prior samples");
    gen->add_option("--temperature", inv.generate.temperature, "decoding temperature (0: greedy)");
    gen->add_option("--seed", inv.generate.seed);
    detail::add_band_flags(gen, inv.generate.band);
    gen->add_flag("--apply-band", inv.generate.apply_band, "keep only in-band lines");
    gen->add_option("--tag", inv.generate.tag, "theme tag for conditional models");
    gen->add_option("--out", inv.generate.out, "JSONL output (default stdout)");
    gen->add_option("--report", inv.generate.report, "write the band report JSON here");

    auto* sc = app->add_subcommand("score", "score lines for surprisal and novelty");
    sc->add_option("--lm", inv.score.lm)->required();
    sc->add_option("--corpus", inv.score.corpus, "corpus for novelty");
    sc->add_option("--lines", inv.score.lines, "text or JSONL file of lines")->required();
    detail::add_band_flags(sc, inv.score.band);
    sc->add_option("--out", inv.score.out, "report path (default stdout)");

    auto* sv = app->add_subcommand("serve", "run the curation HTTP service");
    sv->add_option("--vae", inv.serve.vae)->required();
    sv->add_option("--lm", inv.serve.lm)->required();
    sv->add_option("--corpus", inv.serve.corpus);
    sv->add_option("--host", inv.serve.host);
    sv->add_option("--port", inv.serve.port);
    sv->add_option("--data-dir", inv.serve.data_dir);

    auto* ex = app->add_subcommand("export", "print a stored session as a poem or JSON");
    ex->add_option("--session", inv.exp.session, "session JSON file")->required();
    ex->add_option("--format", inv.exp.format)->check(CLI::IsMember({"text", "json"}));

    for (auto* sub : app->get_subcommands({})) {
        sub->add_option("--config", inv.config, "JSON file of flag defaults");
    }
    return app;
}

/// Parses argv, applies any --config file, runs the chosen command.
inline int run(int argc, const char* const* argv) {
    Invocation inv;
    auto app = make_app(inv);
    // Required options may come from the config file, so requirement checks
    // run after it is merged.
    std::vector<std::pair<CLI::App*, CLI::Option*>> required;
    for (auto* sub : app->get_subcommands({}))
        for (auto* opt : sub->get_options())
            if (opt->get_required()) {
                opt->required(false);
                required.emplace_back(sub, opt);
            }
    try {
        app->parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app->exit(e) == 0 ? kExitOk : kExitUsage;
    }
    CLI::App* sub = app->get_subcommands().front();
    try {
        if (!inv.config.empty()) {
            json cfg;
            try {
                cfg = json::parse(read_file(inv.config));
            } catch (const json::exception& e) {
                throw Error(Errc::MalformedRecord, inv.config + ": " + e.what());
            }
            if (!cfg.is_object()) throw Error(Errc::MalformedRecord, inv.config + ": expected a JSON object");
            try {
                detail::apply_config(sub, cfg);
            } catch (const CLI::ParseError& e) {
                throw Error(Errc::BadParams, inv.config + ": " + e.what());
            }
        }
        for (auto [owner, opt] : required)
            if (owner == sub && opt->count() == 0)
                throw Error(Errc::BadParams, opt->get_name() + " is required");

        inv.train_vae.train.optimizer.kind = num::optimizer_kind_from_string(inv.optimizer_vae);
        inv.train_lm.train.optimizer.kind = num::optimizer_kind_from_string(inv.optimizer_lm);
        const std::string name = sub->get_name();
        if (name == "train-vae") return cmd_train_vae(inv.train_vae);
        if (name == "train-lm") return cmd_train_lm(inv.train_lm);
        if (name == "generate") return cmd_generate(inv.generate);
        if (name == "score") return cmd_score(inv.score);
        if (name == "serve") return cmd_serve(inv.serve);
        return cmd_export(inv.exp);
    } catch (const Error& e) {
        std::cerr << "seedline " << sub->get_name() << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "seedline " << sub->get_name() << ": " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace seedline::cli
