// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "seedline/service/http.hpp"
#include "support.hpp"

using namespace seedline;
using seedline::testing::scratch_dir;
using json = nlohmann::ordered_json;

namespace {

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no seedline::Error thrown";
    return Errc::Io;
}

const LoadedCorpus& demo() {
    static const LoadedCorpus c = seedline::testing::demo_corpus();
    return c;
}

struct Checkpoints {
    std::filesystem::path vae;
    std::filesystem::path lm;
    std::filesystem::path foreign_lm; // different vocabulary
};

// Small demo-corpus models written once per process.
const Checkpoints& checkpoints() {
    static const Checkpoints c = [] {
        auto dir = scratch_dir("curation_models");
        Checkpoints out{dir / "vae.ckpt", dir / "lm.ckpt", dir / "foreign_lm.ckpt"};
        const json extra{{"corpus", seedline::testing::demo_corpus_path().string()}};
        seedline::testing::small_demo_vae(demo()).save(out.vae, extra);
        seedline::testing::small_demo_lm(demo()).save(out.lm, extra);
        const auto small = seedline::testing::twenty_line_corpus();
        lm::LmConfig cfg;
        cfg.d_embed = 8;
        cfg.d_hidden = 8;
        lm::LmModel(cfg, small.vocab, 1).save(out.foreign_lm);
        return out;
    }();
    return c;
}

const Workbench& workbench() {
    static const Workbench wb =
        Workbench::load(checkpoints().vae, checkpoints().lm, seedline::testing::demo_corpus_path());
    return wb;
}

// Every contiguous k-gram of `words` checked by a plain scan of each corpus line.
double novelty_oracle(const std::string& text, const std::vector<std::string>& corpus, std::size_t n) {
    const auto words = split_words(text);
    if (words.empty()) return 0.0;
    const std::size_t k = std::min(n, words.size());
    std::size_t total = 0, found = 0;
    for (std::size_t i = 0; i + k <= words.size(); ++i) {
        ++total;
        bool hit = false;
        for (const auto& line : corpus) {
            const auto cw = split_words(line);
            for (std::size_t j = 0; j + k <= cw.size() && !hit; ++j)
                hit = std::equal(words.begin() + static_cast<std::ptrdiff_t>(i),
                                 words.begin() + static_cast<std::ptrdiff_t>(i + k),
                                 cw.begin() + static_cast<std::ptrdiff_t>(j));
            if (hit) break;
        }
        found += hit ? 1 : 0;
    }
    return 1.0 - static_cast<double>(found) / static_cast<double>(total);
}

wundt::NgramIndex index_of(const std::vector<std::string>& lines, std::size_t n = 3) {
    wundt::NgramIndex idx(n);
    for (const auto& l : lines) idx.add(l);
    return idx;
}

GeneratedLine line_with_text(const std::string& text, std::uint64_t id = 0) {
    GeneratedLine g;
    g.id = id;
    g.text = text;
    return g;
}

std::vector<LineScore> scores_of(const std::vector<double>& s) {
    std::vector<LineScore> out;
    for (double v : s) {
        LineScore ls;
        ls.surprisal = v;
        out.push_back(ls);
    }
    return out;
}

std::unique_ptr<service::PoolService> make_service(const std::filesystem::path& dir) {
    service::PoolService::Options opt;
    opt.data_dir = dir;
    opt.defaults.vae = checkpoints().vae.string();
    opt.defaults.lm = checkpoints().lm.string();
    std::int64_t tick = 1000;
    opt.clock = [tick]() mutable { return tick++; };
    return std::make_unique<service::PoolService>(opt);
}

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run_cli(const std::string& args, const std::filesystem::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + SEEDLINE_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out);
    r.err = read_file(err);
    return r;
}

} // namespace

// ------------------------------------------------------------------ novelty

TEST(Novelty, VerbatimLineScoresZero) {
    const auto& d = demo();
    wundt::NgramIndex idx(d.corpus);
    for (const auto& l : d.corpus.lines) EXPECT_DOUBLE_EQ(wundt::novelty(l.text, idx), 0.0) << l.text;
}

TEST(Novelty, UnseenWordsScoreOne) {
    auto idx = index_of({"rooted in the light", "and the stars they go"});
    EXPECT_DOUBLE_EQ(wundt::novelty("zebra quartz fjord", idx), 1.0);
    EXPECT_DOUBLE_EQ(wundt::novelty("zebra quartz fjord vex nymph", idx), 1.0);
    EXPECT_DOUBLE_EQ(wundt::novelty("zebra", idx), 1.0);
}

TEST(Novelty, ShipOnFireAgainstScanOracle) {
    const std::vector<std::string> corpus{"a ship on fire", "the endless night"};
    const std::string line = "driving an endless ship on fire";
    const double oracle = novelty_oracle(line, corpus, 3);
    EXPECT_DOUBLE_EQ(oracle, 0.75);
    EXPECT_DOUBLE_EQ(wundt::novelty(line, index_of(corpus)), oracle);
    CorpusOptions opt;
    opt.min_count = 1;
    opt.val_fraction = 0.0;
    auto c = make_corpus(corpus, opt);
    EXPECT_DOUBLE_EQ(wundt::novelty(encode_line(line, c.vocab), c.corpus), oracle);
}

TEST(Novelty, ShortLinesAndEdgeCases) {
    auto idx = index_of({"the stars they go"});
    EXPECT_DOUBLE_EQ(wundt::novelty("stars they", idx), 0.0);
    EXPECT_DOUBLE_EQ(wundt::novelty("they stars", idx), 1.0);
    EXPECT_DOUBLE_EQ(wundt::novelty("", idx), 0.0);
    EXPECT_DOUBLE_EQ(wundt::novelty("the stars they go away", idx), 1.0 - 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(wundt::novelty("the stars they go", index_of({"the stars they go"}, 2)), 0.0);
    EXPECT_EQ(code_of([] { (void)wundt::NgramIndex(1); }), Errc::BadParams);
}

TEST(Novelty, RandomCasesMatchScanOracle) {
    const auto& corpus = seedline::testing::twenty_lines();
    auto idx = index_of(corpus);
    std::vector<std::string> words;
    for (const auto& l : corpus)
        for (auto& w : split_words(l)) words.push_back(w);
    words.push_back("zebra");
    words.push_back("quartz");
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        if (trial % 4 == 0) {
            // A corpus fragment with one word swapped.
            auto ws = split_words(corpus[rng() % corpus.size()]);
            ws[rng() % ws.size()] = words[rng() % words.size()];
            text = join_words(ws);
        } else {
            std::vector<std::string> ws(1 + rng() % 8);
            for (auto& w : ws) w = words[rng() % words.size()];
            text = join_words(ws);
        }
        for (std::size_t n : {2u, 3u, 4u}) {
            const double v = wundt::novelty(text, n == 3 ? idx : index_of(corpus, n));
            EXPECT_DOUBLE_EQ(v, novelty_oracle(text, corpus, n)) << text << " n=" << n;
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Novelty, NeverRisesAsTheReferenceGrows) {
    const auto& lines = demo().corpus.lines;
    const std::vector<std::string> probes{"and the light shines on the runway", "the sea remembers every road home",
                                          "driving an endless ship on fire", "i carry the winter in my pocket"};
    wundt::NgramIndex idx(3);
    std::vector<double> prev(probes.size(), 1.0);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        idx.add(lines[i].text);
        if (i % 10 != 9) continue;
        for (std::size_t p = 0; p < probes.size(); ++p) {
            const double v = wundt::novelty(probes[p], idx);
            EXPECT_LE(v, prev[p]);
            prev[p] = v;
        }
    }
}

// ------------------------------------------------------------------ scoring

TEST(Quantile, TypeSevenHandValues) {
    EXPECT_DOUBLE_EQ(wundt::quantile({4, 1, 3, 2}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(wundt::quantile({4, 1, 3, 2}, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(wundt::quantile({4, 1, 3, 2}, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(wundt::quantile({4, 1, 3, 2}, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(wundt::quantile({7}, 0.3), 7.0);
    EXPECT_EQ(code_of([] { (void)wundt::quantile({}, 0.5); }), Errc::BadParams);
}

TEST(BandConfig, Validation) {
    EXPECT_EQ(code_of([] { (void)wundt::BandConfig::absolute(2.0, 2.0); }), Errc::BadParams);
    EXPECT_EQ(code_of([] { (void)wundt::BandConfig::quantiles(0.0, 0.5); }), Errc::BadParams);
    EXPECT_EQ(code_of([] { (void)wundt::BandConfig::quantiles(0.6, 0.5); }), Errc::BadParams);
    EXPECT_EQ(code_of([] { (void)wundt::BandConfig::quantiles(0.25, 1.0); }), Errc::BadParams);
    const auto q = wundt::BandConfig::quantiles(0.2, 0.9, 50);
    EXPECT_EQ(wundt::band_config_from_json(wundt::to_json(q)), q);
    const auto a = wundt::BandConfig::absolute(1.5, 4.0);
    EXPECT_EQ(wundt::band_config_from_json(wundt::to_json(a)), a);
    EXPECT_EQ(wundt::band_config_from_json(wundt::to_json(wundt::BandConfig::everything())), wundt::BandConfig::everything());
}

TEST(ScoreLine, ComponentsAndInclusiveBounds) {
    const auto& wb = workbench();
    const auto& line = demo().corpus.lines[3];
    const double s = wb.lm.line_surprisal(line.ids);
    auto at_low = wundt::score_line(line.ids, line.text, wb.lm, wb.index, {s, s + 1.0});
    EXPECT_TRUE(at_low.in_band);
    EXPECT_DOUBLE_EQ(at_low.surprisal, s);
    EXPECT_DOUBLE_EQ(at_low.novelty, 0.0);
    EXPECT_EQ(at_low.components.size(), 2u);
    EXPECT_EQ(at_low.components.count("surprisal"), 1u);
    EXPECT_EQ(at_low.components.count("novelty"), 1u);
    EXPECT_TRUE(wundt::score_line(line.ids, line.text, wb.lm, wb.index, {s - 1.0, s}).in_band);
    EXPECT_FALSE(wundt::score_line(line.ids, line.text, wb.lm, wb.index, {std::nextafter(s, 1e9), s + 1.0}).in_band);
}

TEST(ScoreLine, OverfitLineFallsBelowATightHighBand) {
    std::vector<std::string> same(8, "rooted in the light");
    CorpusOptions opt;
    opt.min_count = 1;
    opt.val_fraction = 0.0;
    auto data = make_corpus(same, opt);
    lm::LmConfig cfg;
    cfg.d_embed = 16;
    cfg.d_hidden = 16;
    auto m = lm::train_lm(data.corpus, data.vocab, cfg, seedline::testing::adam(60, 8, 0.02, 1)).model;
    const auto& line = data.corpus.lines[0];
    ASSERT_LT(m.line_surprisal(line.ids), 0.1);
    auto score = wundt::score_line(line.ids, line.text, m, wundt::NgramIndex(data.corpus), {1.0, 2.0});
    EXPECT_FALSE(score.in_band);
}

TEST(SpectrumSanity, TrainingLinesBeatRandomTokenStrings) {
    const auto& wb = workbench();
    const auto& d = demo();
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<TokenId> word(kFirstWordId, wb.lm.vocab().size() - 1);
    double real = 0, noise = 0;
    int lower = 0;
    for (std::size_t k = 0; k < 60; ++k) {
        const auto& ids = d.corpus.lines[d.corpus.train[k]].ids;
        std::vector<TokenId> random(ids.size());
        for (auto& t : random) t = word(rng);
        const double a = wb.lm.line_surprisal(ids), b = wb.lm.line_surprisal(random);
        real += a;
        noise += b;
        lower += a < b ? 1 : 0;
    }
    EXPECT_LT(real / 60.0, noise / 60.0);
    EXPECT_GE(lower, 50);
}

// ------------------------------------------------------------- band filter

TEST(BandFilter, OpenBandKeepsEverything) {
    std::vector<GeneratedLine> pool{line_with_text("a", 1), line_with_text("b", 2), line_with_text("c", 3)};
    auto r = wundt::band_filter(pool, scores_of({3.0, 1.0, 2.0}), wundt::ResolvedBand{});
    ASSERT_EQ(r.pool.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(r.pool[i].id, pool[i].id);
        EXPECT_TRUE(r.pool[i].score->in_band);
    }
    EXPECT_EQ(r.report.in, 3u);
    ASSERT_EQ(r.report.quantiles.size(), 7u);
    EXPECT_DOUBLE_EQ(r.report.quantiles.front().second, 1.0);
    EXPECT_DOUBLE_EQ(r.report.quantiles.back().second, 3.0);
}

TEST(BandFilter, ClosedBandKeepsNothingButCountsAll) {
    std::vector<GeneratedLine> pool{line_with_text("a"), line_with_text("b"), line_with_text("c")};
    auto r = wundt::band_filter(pool, scores_of({3.0, 1.0, 2.0}), wundt::ResolvedBand{10.0, 11.0});
    EXPECT_TRUE(r.pool.empty());
    EXPECT_EQ(r.report.below, 3u);
    EXPECT_EQ(r.report.in + r.report.above, 0u);
    auto above = wundt::band_filter(pool, scores_of({3.0, 1.0, 2.0}), wundt::ResolvedBand{-2.0, -1.0});
    EXPECT_EQ(above.report.above, 3u);
    EXPECT_EQ(code_of([&] { (void)wundt::band_filter(pool, scores_of({1.0}), wundt::ResolvedBand{}); }),
              Errc::MisalignedScores);
}

TEST(BandFilter, QuantileBandCountFollowsOrderStatistics) {
    std::mt19937_64 rng(400);
    std::normal_distribution<double> nd(4.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> s(400);
        for (auto& v : s) v = nd(rng);
        std::vector<GeneratedLine> pool;
        for (std::size_t i = 0; i < s.size(); ++i) pool.push_back(line_with_text("l" + std::to_string(i), i));
        auto r = wundt::band_filter(pool, scores_of(s), wundt::BandConfig::quantiles(0.25, 0.75));
        // Distinct values: ranks ceil(0.25 * 399) .. floor(0.75 * 399) survive.
        const auto expected = static_cast<std::size_t>(std::floor(0.75 * 399) - std::ceil(0.25 * 399) + 1);
        EXPECT_EQ(expected, 200u);
        EXPECT_EQ(r.pool.size(), expected);
        EXPECT_EQ(r.report.below + r.report.in + r.report.above, 400u);
    }
}

TEST(BandFilter, TiesMoveTheCountByAtMostTheTiedBlock) {
    std::vector<double> s;
    for (int i = 0; i < 400; ++i) s.push_back(static_cast<double>(i / 4));
    std::vector<GeneratedLine> pool(400);
    auto r = wundt::band_filter(pool, scores_of(s), wundt::BandConfig::quantiles(0.25, 0.75));
    const double lo = wundt::quantile(s, 0.25), hi = wundt::quantile(s, 0.75);
    const auto oracle = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double v) { return lo <= v && v <= hi; }));
    EXPECT_EQ(r.pool.size(), oracle);
    EXPECT_LE(std::max(oracle, std::size_t{200}) - std::min(oracle, std::size_t{200}), 4u);
}

TEST(BandFilter, IdempotentAndOrderPreserving) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    std::vector<GeneratedLine> pool;
    std::vector<double> s;
    for (std::uint64_t i = 0; i < 300; ++i) {
        pool.push_back(line_with_text("l" + std::to_string(i), i));
        s.push_back(u(rng));
    }
    const wundt::ResolvedBand band{2.0, 5.0};
    auto once = wundt::band_filter(pool, scores_of(s), band);
    std::vector<LineScore> kept_scores;
    for (const auto& l : once.pool) kept_scores.push_back(*l.score);
    auto twice = wundt::band_filter(once.pool, kept_scores, band);
    EXPECT_EQ(twice.pool, once.pool);
    for (std::size_t i = 1; i < once.pool.size(); ++i) EXPECT_LT(once.pool[i - 1].id, once.pool[i].id);
}

TEST(Dedup, KeepsFirstOccurrences) {
    std::vector<GeneratedLine> none{line_with_text("a", 1), line_with_text("b", 2)};
    EXPECT_EQ(wundt::dedup(none), none);
    auto aba = wundt::dedup({line_with_text("a", 1), line_with_text("b", 2), line_with_text("a", 3)});
    ASSERT_EQ(aba.size(), 2u);
    EXPECT_EQ(aba[0].id, 1u);
    EXPECT_EQ(aba[1].id, 2u);
    EXPECT_EQ(wundt::dedup(aba), aba);
    EXPECT_TRUE(wundt::dedup({}).empty());
}

TEST(Dedup, CollapsedModelYieldsOneLine) {
    const auto& d = demo();
    vae::VaeConfig cfg;
    cfg.d_embed = 16;
    cfg.d_hidden = 16;
    cfg.d_z = 8;
    vae::VaeModel m(cfg, d.vocab, {}, 5);
    // Cut every path from z to the decoder.
    for (double& v : m.params().at("z2h.w").value.storage()) v = 0.0;
    auto& dec = m.params().at("dec.w").value;
    for (std::size_t r = cfg.d_embed; r < cfg.d_embed + cfg.d_z; ++r)
        for (double& v : dec.row(r)) v = 0.0;
    vae::Rng rng(350);
    auto pool = vae::sample_prior(m, 350, std::nullopt, rng);
    ASSERT_EQ(pool.size(), 350u);
    EXPECT_EQ(wundt::dedup(pool).size(), 1u);
}

TEST(ScoreReport, Schema) {
    wundt::BandReport rep;
    rep.in = 1;
    rep.quantiles = {{0.5, 2.0}};
    auto j = wundt::score_report({"a b"}, scores_of({2.0}), rep);
    ASSERT_EQ(j["lines"].size(), 1u);
    for (const char* k : {"text", "surprisal", "novelty", "in_band"}) EXPECT_TRUE(j["lines"][0].contains(k)) << k;
    EXPECT_DOUBLE_EQ(j["quantiles"]["0.50"].get<double>(), 2.0);
    EXPECT_TRUE(j["band"]["low"].is_null());
}

TEST(Pipeline, PoolIsDedupedScoredAndDeterministic) {
    const auto& wb = workbench();
    PoolRequest req;
    req.n = 200;
    req.seed = 11;
    auto a = generate_scored_pool(wb, req);
    auto b = generate_scored_pool(wb, req);
    EXPECT_EQ(a.lines, b.lines);
    EXPECT_EQ(a.sampled, 200u);
    EXPECT_EQ(a.unique, a.lines.size());
    std::set<std::string> texts;
    for (const auto& l : a.lines) {
        EXPECT_TRUE(texts.insert(l.text).second);
        ASSERT_TRUE(l.score.has_value());
        EXPECT_EQ(l.score->in_band, a.report.band.contains(l.score->surprisal));
    }
    std::unordered_set<std::string> existing{a.lines.front().text};
    auto c = generate_scored_pool(wb, req, &existing);
    EXPECT_EQ(c.lines.size(), a.lines.size() - 1);
    req.apply_band = true;
    auto banded = generate_scored_pool(wb, req);
    EXPECT_EQ(banded.lines.size(), banded.report.in);
    for (const auto& l : banded.lines) EXPECT_TRUE(l.score->in_band);
    auto rec = line_record(a.lines.front());
    for (const char* k : {"text", "surprisal", "novelty", "in_band", "provenance"}) EXPECT_TRUE(rec.contains(k)) << k;
}

// ----------------------------------------------------------------- service

TEST(PoolService, CreatesDistinctSessionsAndRejectsBadCheckpoints) {
    auto dir = scratch_dir("svc_create");
    auto svc = make_service(dir);
    const auto a = svc->create_session(), b = svc->create_session();
    EXPECT_EQ(a, "s000001");
    EXPECT_EQ(b, "s000002");
    EXPECT_TRUE(std::filesystem::exists(svc->session_path(a)));
    auto s = svc->get(a);
    EXPECT_TRUE(s.pool.empty());
    EXPECT_EQ(s.created_ms, s.modified_ms);
    service::ModelRefs bad{(dir / "nope.ckpt").string(), checkpoints().lm.string(), std::nullopt};
    EXPECT_EQ(code_of([&] { (void)svc->create_session(bad); }), Errc::CheckpointMismatch);
    service::ModelRefs foreign{checkpoints().vae.string(), checkpoints().foreign_lm.string(), std::nullopt};
    EXPECT_EQ(code_of([&] { (void)svc->create_session(foreign); }), Errc::CheckpointMismatch);
    EXPECT_EQ(code_of([&] { (void)svc->get("s999999"); }), Errc::SessionNotFound);
    EXPECT_EQ(code_of([&] { (void)svc->get("../etc"); }), Errc::SessionNotFound);
}

TEST(PoolService, PoolOfThreeHundredFifty) {
    auto svc = make_service(scratch_dir("svc_pool"));
    const auto id = svc->create_session();
    service::PoolParams p;
    p.n = 350;
    p.seed = 1;
    auto out = svc->generate_pool(id, p);
    EXPECT_LE(out.added.size(), 350u);
    EXPECT_GT(out.added.size(), 0u);
    EXPECT_EQ(out.pool_size, out.added.size());
    for (std::size_t i = 0; i < out.added.size(); ++i) {
        EXPECT_EQ(out.added[i].id, i + 1);
        EXPECT_TRUE(out.added[i].score.has_value());
    }
    auto more = svc->generate_pool(id, p);
    EXPECT_TRUE(more.added.empty());
    p.seed = 2;
    more = svc->generate_pool(id, p);
    std::set<std::string> texts;
    for (const auto& l : svc->get(id).pool) EXPECT_TRUE(texts.insert(l.text).second);
    p.n = 0;
    EXPECT_EQ(code_of([&] { (void)svc->generate_pool(id, p); }), Errc::BadParams);
    p.n = 10001;
    EXPECT_EQ(code_of([&] { (void)svc->generate_pool(id, p); }), Errc::BadParams);
    p.n = 5;
    EXPECT_EQ(code_of([&] { (void)svc->generate_pool("s000404", p); }), Errc::SessionNotFound);
}

TEST(PoolService, SameSeedIntoFreshSessionsGivesIdenticalPools) {
    auto svc = make_service(scratch_dir("svc_seed"));
    const auto a = svc->create_session(), b = svc->create_session();
    service::PoolParams p;
    p.n = 120;
    p.seed = 42;
    EXPECT_EQ(svc->generate_pool(a, p).added, svc->generate_pool(b, p).added);
    EXPECT_EQ(svc->get(a).pool, svc->get(b).pool);
}

TEST(PoolService, EmptyBandResultIsNotAnError) {
    auto svc = make_service(scratch_dir("svc_empty_band"));
    const auto id = svc->create_session(std::nullopt, wundt::BandConfig::absolute(100.0, 101.0));
    service::PoolParams p;
    p.n = 40;
    p.apply_band = true;
    auto out = svc->generate_pool(id, p);
    EXPECT_TRUE(out.added.empty());
    EXPECT_EQ(out.report.in, 0u);
    EXPECT_GT(out.report.below, 0u);
    EXPECT_EQ(out.pool_size, 0u);
}

TEST(PoolService, PinUnpinArrange) {
    auto svc = make_service(scratch_dir("svc_pin"));
    const auto id = svc->create_session();
    service::PoolParams p;
    p.n = 30;
    svc->generate_pool(id, p);
    const auto base = svc->get(id);
    auto s = svc->pin(id, 3);
    EXPECT_EQ(s.pinned, (std::set<std::uint64_t>{3}));
    EXPECT_EQ(svc->pin(id, 3).pinned, s.pinned);
    s = svc->unpin(id, 3);
    EXPECT_EQ(s.pinned, base.pinned);
    EXPECT_EQ(s.arrangement, base.arrangement);
    EXPECT_EQ(code_of([&] { (void)svc->pin(id, 999); }), Errc::UnknownLine);
    EXPECT_EQ(code_of([&] { (void)svc->unpin(id, 999); }), Errc::UnknownLine);

    for (std::uint64_t l : {1, 2, 5, 7}) svc->pin(id, l);
    EXPECT_TRUE(svc->arrange(id, {}).arrangement.empty());
    EXPECT_EQ(svc->arrange(id, {7, 1, 5, 2}).arrangement, (std::vector<std::uint64_t>{7, 1, 5, 2}));
    s = svc->unpin(id, 5);
    EXPECT_EQ(s.arrangement, (std::vector<std::uint64_t>{7, 1, 2}));
    EXPECT_TRUE(s.invariants_hold());
}

TEST(PoolService, FailedOperationsChangeNothing) {
    auto svc = make_service(scratch_dir("svc_atomic"));
    const auto id = svc->create_session();
    service::PoolParams p;
    p.n = 20;
    svc->generate_pool(id, p);
    svc->pin(id, 1);
    svc->pin(id, 2);
    svc->arrange(id, {2, 1});
    const auto before = svc->get(id);
    const auto bytes = read_file(svc->session_path(id));
    EXPECT_EQ(code_of([&] { (void)svc->arrange(id, {1, 3}); }), Errc::NotPinned);
    EXPECT_EQ(code_of([&] { (void)svc->arrange(id, {1, 1}); }), Errc::DuplicateId);
    EXPECT_EQ(code_of([&] { (void)svc->arrange(id, {1, 77}); }), Errc::UnknownLine);
    service::VaryParams v;
    v.line_id = 1;
    v.radius = 0.0;
    EXPECT_EQ(code_of([&] { (void)svc->vary(id, v); }), Errc::BadParams);
    v.radius = 0.1;
    v.line_id = 404;
    EXPECT_EQ(code_of([&] { (void)svc->vary(id, v); }), Errc::UnknownLine);
    v.line_id = 1;
    v.mode = service::VaryMode::Interpolate;
    EXPECT_EQ(code_of([&] { (void)svc->vary(id, v); }), Errc::BadParams);
    v.other_line_id = 2;
    v.steps = 1;
    EXPECT_EQ(code_of([&] { (void)svc->vary(id, v); }), Errc::BadParams);
    const auto after = svc->get(id);
    EXPECT_EQ(after.pool, before.pool);
    EXPECT_EQ(after.pinned, before.pinned);
    EXPECT_EQ(after.arrangement, before.arrangement);
    EXPECT_EQ(after.modified_ms, before.modified_ms);
    EXPECT_TRUE(after.invariants_hold());
    EXPECT_EQ(read_file(svc->session_path(id)), bytes);
}

TEST(PoolService, NeighborhoodVariation) {
    auto svc = make_service(scratch_dir("svc_vary"));
    const auto id = svc->create_session();
    service::PoolParams p;
    p.n = 10;
    svc->generate_pool(id, p);
    svc->pin(id, 4);
    service::VaryParams v;
    v.line_id = 4;
    v.radius = 0.1;
    v.n = 8;
    auto fresh = svc->vary(id, v);
    ASSERT_EQ(fresh.size(), 8u);
    const auto s = svc->get(id);
    EXPECT_EQ(s.pool.size(), 18u);
    for (const auto& l : fresh) {
        EXPECT_EQ(l.provenance.kind, SamplerKind::Neighborhood);
        EXPECT_EQ(l.provenance.parent_id, std::optional<std::uint64_t>(4));
        EXPECT_EQ(*l.provenance.origin, s.find(4)->provenance.latent);
        EXPECT_TRUE(l.score.has_value());
        EXPECT_EQ(s.find(l.id)->text, l.text);
    }
}

TEST(PoolService, InterpolationMatchesDirectCall) {
    auto svc = make_service(scratch_dir("svc_interp"));
    const auto id = svc->create_session();
    service::PoolParams p;
    p.n = 10;
    svc->generate_pool(id, p);
    svc->pin(id, 2);
    svc->pin(id, 9);
    service::VaryParams v;
    v.line_id = 2;
    v.mode = service::VaryMode::Interpolate;
    v.other_line_id = 9;
    v.steps = 5;
    auto fresh = svc->vary(id, v);
    const auto s = svc->get(id);
    auto direct = vae::interpolate(workbench().vae, s.find(2)->provenance.latent, s.find(9)->provenance.latent, 5);
    ASSERT_EQ(fresh.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(fresh[i].tokens, direct[i].tokens);
        EXPECT_EQ(fresh[i].provenance.other_parent_id, std::optional<std::uint64_t>(9));
    }
    EXPECT_EQ(fresh.front().tokens, workbench().vae.decode_greedy(s.find(2)->provenance.latent).ids);
    EXPECT_EQ(fresh.back().tokens, workbench().vae.decode_greedy(s.find(9)->provenance.latent).ids);
}

TEST(PoolService, ExportFormats) {
    auto svc = make_service(scratch_dir("svc_export"));
    const auto id = svc->create_session();
    EXPECT_EQ(svc->export_session(id, service::ExportFormat::Text), "");
    service::PoolParams p;
    p.n = 60;
    p.seed = 3;
    svc->generate_pool(id, p);
    const auto pool = svc->get(id).pool;
    ASSERT_GE(pool.size(), 14u);
    std::vector<std::uint64_t> order;
    for (std::size_t i = 0; i < 14; ++i) order.push_back(pool[(i * 5) % pool.size()].id);
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    for (std::size_t i = 0; order.size() < 14; ++i)
        if (std::find(order.begin(), order.end(), pool[i].id) == order.end()) order.push_back(pool[i].id);
    std::reverse(order.begin(), order.end());
    for (auto l : order) svc->pin(id, l);
    svc->arrange(id, order);
    std::string expected;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) expected += '\n';
        for (const auto& l : pool)
            if (l.id == order[i]) expected += l.text;
    }
    const auto text = svc->export_session(id, service::ExportFormat::Text);
    EXPECT_EQ(text, expected);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 13);
    const auto doc = svc->export_session(id, service::ExportFormat::Json);
    EXPECT_EQ(service::session_document(service::import_session(doc)), doc);
    EXPECT_EQ(doc, read_file(svc->session_path(id)));
    EXPECT_EQ(code_of([] { (void)service::import_session("{\"id\": 3"); }), Errc::MalformedRecord);
}

TEST(PoolService, ImportRejectsBrokenInvariants) {
    auto svc = make_service(scratch_dir("svc_import"));
    const auto id = svc->create_session();
    auto j = json::parse(svc->export_session(id, service::ExportFormat::Json));
    j["pinned"] = {5};
    EXPECT_EQ(code_of([&] { (void)service::import_session(j.dump()); }), Errc::MalformedRecord);
}

TEST(PoolService, RestartReproducesCommittedState) {
    auto dir = scratch_dir("svc_restart");
    std::string id, doc;
    {
        auto svc = make_service(dir);
        id = svc->create_session();
        service::PoolParams p;
        p.n = 25;
        svc->generate_pool(id, p);
        svc->pin(id, 1);
        svc->pin(id, 6);
        svc->arrange(id, {6, 1});
        doc = svc->export_session(id, service::ExportFormat::Json);
    }
    auto again = make_service(dir);
    EXPECT_EQ(again->export_session(id, service::ExportFormat::Json), doc);
    EXPECT_EQ(again->create_session(), "s000002");
    again->unpin(id, 6);
    EXPECT_EQ(again->get(id).arrangement, (std::vector<std::uint64_t>{1}));
}

TEST(PoolService, ReplayGivesIdenticalExport) {
    auto replay = [](const std::filesystem::path& dir) {
        auto svc = make_service(dir);
        const auto id = svc->create_session();
        service::PoolParams p;
        p.n = 40;
        p.seed = 9;
        svc->generate_pool(id, p);
        svc->pin(id, 2);
        svc->pin(id, 3);
        service::VaryParams v;
        v.line_id = 2;
        v.seed = 4;
        v.temperature = 1.0;
        svc->vary(id, v);
        svc->pin(id, 45);
        svc->arrange(id, {45, 3, 2});
        return svc->export_session(id, service::ExportFormat::Json);
    };
    EXPECT_EQ(replay(scratch_dir("svc_replay_a")), replay(scratch_dir("svc_replay_b")));
}

TEST(PoolService, ConcurrentRequestsKeepInvariants) {
    auto svc = make_service(scratch_dir("svc_threads"));
    const auto a = svc->create_session(), b = svc->create_session();
    service::PoolParams p;
    p.n = 30;
    svc->generate_pool(a, p);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (std::uint64_t l = 1; l <= 20; ++l) {
                if ((l + static_cast<std::uint64_t>(t)) % 2) svc->pin(a, l);
                else svc->unpin(a, l);
            }
        });
    threads.emplace_back([&] {
        service::PoolParams q;
        q.n = 50;
        q.seed = 5;
        svc->generate_pool(b, q);
    });
    for (auto& t : threads) t.join();
    EXPECT_TRUE(svc->get(a).invariants_hold());
    EXPECT_TRUE(svc->get(b).invariants_hold());
    EXPECT_EQ(service::session_document(svc->get(a)), read_file(svc->session_path(a)));
}

// -------------------------------------------------------------------- http

class HttpApi : public ::testing::Test {
protected:
    void SetUp() override {
        svc_ = make_service(scratch_dir("http_api"));
        service::install_routes(server_, *svc_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        ASSERT_GT(port_, 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }
    void TearDown() override {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    json post(const std::string& path, const json& body, int expect) {
        auto r = client_->Post(path, body.dump(), "application/json");
        EXPECT_TRUE(r);
        EXPECT_EQ(r->status, expect) << path << " " << r->body;
        return r->body.empty() ? json() : json::parse(r->body);
    }
    json put(const std::string& path, const json& body, int expect) {
        auto r = client_->Put(path, body.dump(), "application/json");
        EXPECT_TRUE(r);
        EXPECT_EQ(r->status, expect) << path << " " << r->body;
        return json::parse(r->body);
    }
    void expect_error(const json& body, const std::string& code) {
        EXPECT_EQ(body.value("error", ""), code) << body.dump();
        EXPECT_TRUE(body.contains("detail"));
    }

    std::unique_ptr<service::PoolService> svc_;
    httplib::Server server_;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

TEST_F(HttpApi, FullWorkflow) {
    const std::string id = post("/sessions", json::object(), 201)["id"];
    const std::string base = "/sessions/" + id;
    auto pool = post(base + "/pool", {{"n", 40}, {"temperature", 1.0}, {"seed", 3}, {"apply_band", false}}, 200);
    ASSERT_TRUE(pool["added"].is_array());
    EXPECT_EQ(pool["pool_size"], pool["added"].size());
    for (const char* k : {"counts", "band", "quantiles"}) EXPECT_TRUE(pool["report"].contains(k)) << k;
    const auto first = pool["added"][0];
    for (const char* k : {"id", "text", "tokens", "provenance", "score"}) EXPECT_TRUE(first.contains(k)) << k;

    auto got = client_->Get(base);
    ASSERT_TRUE(got);
    EXPECT_EQ(got->status, 200);
    EXPECT_EQ(json::parse(got->body)["pool"].size(), pool["added"].size());

    EXPECT_EQ(post(base + "/pin", {{"line_id", 1}}, 200)["pinned"], json({1}));
    post(base + "/pin", {{"line_id", 2}}, 200);
    post(base + "/pin", {{"line_id", 3}}, 200);
    EXPECT_EQ(post(base + "/unpin", {{"line_id", 3}}, 200)["pinned"], json({1, 2}));
    EXPECT_EQ(put(base + "/arrangement", {{"line_ids", {2, 1}}}, 200)["arrangement"], json({2, 1}));

    auto nb = post(base + "/vary", {{"line_id", 1}, {"mode", "neighborhood"}, {"radius", 0.1}, {"n", 8}}, 200);
    ASSERT_EQ(nb["added"].size(), 8u);
    EXPECT_EQ(nb["added"][0]["provenance"]["parent_id"], 1);
    auto ip = post(base + "/vary", {{"line_id", 1}, {"mode", "interpolate"}, {"other_line_id", 2}, {"steps", 5}}, 200);
    ASSERT_EQ(ip["added"].size(), 5u);
    EXPECT_EQ(ip["added"][4]["provenance"]["other_parent_id"], 2);

    auto text = client_->Get(base + "/export?format=text");
    ASSERT_TRUE(text);
    EXPECT_EQ(text->status, 200);
    const auto s = svc_->get(id);
    EXPECT_EQ(text->body, s.find(2)->text + "\n" + s.find(1)->text);
    auto doc = client_->Get(base + "/export?format=json");
    ASSERT_TRUE(doc);
    EXPECT_EQ(doc->body, service::session_document(s));
    auto deflt = client_->Get(base + "/export");
    EXPECT_EQ(deflt->body, text->body);
}

TEST_F(HttpApi, ErrorStatusesAndBodies) {
    const std::string id = post("/sessions", json::object(), 201)["id"];
    const std::string base = "/sessions/" + id;
    post(base + "/pool", {{"n", 10}}, 200);
    post(base + "/pin", {{"line_id", 1}}, 200);

    auto missing = client_->Get("/sessions/s123456");
    EXPECT_EQ(missing->status, 404);
    expect_error(json::parse(missing->body), "SessionNotFound");
    expect_error(post("/sessions/s123456/pool", {{"n", 5}}, 404), "SessionNotFound");
    expect_error(post(base + "/pin", {{"line_id", 99}}, 404), "UnknownLine");
    expect_error(post(base + "/vary", {{"line_id", 99}, {"mode", "neighborhood"}}, 404), "UnknownLine");
    expect_error(put(base + "/arrangement", {{"line_ids", {1, 2}}}, 409), "NotPinned");
    expect_error(put(base + "/arrangement", {{"line_ids", {1, 1}}}, 409), "DuplicateId");
    expect_error(put(base + "/arrangement", {{"line_ids", 1}}, 400), "BadParams");
    expect_error(post(base + "/pool", {{"n", 0}}, 400), "BadParams");
    expect_error(post(base + "/pool", {{"n", -3}}, 400), "BadParams");
    expect_error(post(base + "/pool", {{"temperature", -1.0}}, 400), "BadParams");
    expect_error(post(base + "/pin", json::object(), 400), "BadParams");
    expect_error(post(base + "/vary", {{"line_id", 1}, {"mode", "neighborhood"}, {"radius", 0.0}}, 400), "BadParams");
    expect_error(post(base + "/vary", {{"line_id", 1}, {"mode", "sideways"}}, 400), "BadParams");
    expect_error(post(base + "/vary", {{"line_id", 1}, {"mode", "interpolate"}}, 400), "BadParams");
    expect_error(post("/sessions", {{"vae", "/no/such.ckpt"}}, 400), "CheckpointMismatch");
    expect_error(post("/sessions", {{"band", {{"mode", "absolute"}, {"low", 3}, {"high", 1}}}}, 400), "BadParams");

    auto bad_json = client_->Post(base + "/pin", "{oops", "application/json");
    EXPECT_EQ(bad_json->status, 400);
    expect_error(json::parse(bad_json->body), "BadParams");
    auto bad_format = client_->Get(base + "/export?format=pdf");
    EXPECT_EQ(bad_format->status, 400);
    EXPECT_TRUE(svc_->get(id).invariants_hold());
}

TEST_F(HttpApi, EmptyBandPoolReturnsOk) {
    const std::string id =
        post("/sessions", {{"band", {{"mode", "absolute"}, {"low", 100.0}, {"high", 101.0}}}}, 201)["id"];
    auto r = post("/sessions/" + id + "/pool", {{"n", 30}, {"apply_band", true}}, 200);
    EXPECT_TRUE(r["added"].empty());
    EXPECT_EQ(r["pool_size"], 0);
    EXPECT_EQ(r["report"]["counts"]["in"], 0);
}

TEST_F(HttpApi, GreedyWhenTemperatureIsZero) {
    const std::string id = post("/sessions", json::object(), 201)["id"];
    auto r = post("/sessions/" + id + "/pool", {{"n", 20}, {"temperature", 0}}, 200);
    for (const auto& l : r["added"]) EXPECT_FALSE(l["provenance"].contains("temperature"));
}

TEST_F(HttpApi, CorsPreflight) {
    auto r = client_->Options("/sessions");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 204);
    EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
    EXPECT_NE(r->get_header_value("Access-Control-Allow-Methods").find("PUT"), std::string::npos);
}

// --------------------------------------------------------------------- cli

TEST(Cli, MissingCorpusExitsTwo) {
    auto dir = scratch_dir("cli_missing");
    auto r = run_cli("train-vae --corpus \"" + (dir / "absent.jsonl").string() + "\" --out \"" + (dir / "m.ckpt").string() + "\"", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("FileNotFound"), std::string::npos) << r.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt"));
}

TEST(Cli, UsageErrorsExitTwo) {
    auto dir = scratch_dir("cli_usage");
    EXPECT_EQ(run_cli("", dir).code, 2);
    EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
    EXPECT_EQ(run_cli("train-vae --out x.ckpt", dir).code, 2);
    EXPECT_EQ(run_cli("train-vae --corpus c.jsonl --out x.ckpt --epochs many", dir).code, 2);
    EXPECT_EQ(run_cli("--help", dir).code, 0);
    const std::string models = "--vae \"" + checkpoints().vae.string() + "\" --lm \"" + checkpoints().lm.string() + "\"";
    auto zero = run_cli("generate " + models + " --n 0", dir);
    EXPECT_EQ(zero.code, 2);
    EXPECT_TRUE(zero.out.empty());
    EXPECT_EQ(run_cli("generate " + models + " --temperature -1", dir).code, 2);
    EXPECT_EQ(run_cli("generate " + models + " --band-abs 3 1", dir).code, 2);
    EXPECT_EQ(run_cli("generate --vae \"" + checkpoints().vae.string() + "\" --lm \"" + checkpoints().foreign_lm.string() + "\"", dir).code, 2);
}

TEST(Cli, TrainingIsDeterministicGivenSeed) {
    auto dir = scratch_dir("cli_seed");
    const std::string common = "--corpus \"" + seedline::testing::demo_corpus_path().string() +
                               "\" --epochs 2 --d-embed 8 --d-hidden 8 --d-z 4 --seed 7 --out ";
    ASSERT_EQ(run_cli("train-vae " + common + "\"" + (dir / "a.ckpt").string() + "\"", dir).code, 0);
    ASSERT_EQ(run_cli("train-vae " + common + "\"" + (dir / "b.ckpt").string() + "\"", dir).code, 0);
    EXPECT_EQ(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
    const std::string lm = "--corpus \"" + seedline::testing::demo_corpus_path().string() +
                           "\" --epochs 2 --d-embed 8 --d-hidden 8 --seed 7 --out ";
    ASSERT_EQ(run_cli("train-lm " + lm + "\"" + (dir / "la.ckpt").string() + "\"", dir).code, 0);
    ASSERT_EQ(run_cli("train-lm " + lm + "\"" + (dir / "lb.ckpt").string() + "\"", dir).code, 0);
    EXPECT_EQ(read_file(dir / "la.ckpt"), read_file(dir / "lb.ckpt"));
    auto metrics = read_file(dir / "a.ckpt.metrics.jsonl");
    EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 4);
}

TEST(Cli, ConfigFileFillsFlagsAndFlagsWin) {
    auto dir = scratch_dir("cli_config");
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << json{{"corpus", seedline::testing::demo_corpus_path().string()},
                    {"epochs", 1},
                    {"d_embed", 8},
                    {"d-hidden", 8},
                    {"d_z", 5},
                    {"optimizer", "adam"},
                    {"seed", 3}}
                   .dump();
    }
    auto r = run_cli("train-vae --config \"" + (dir / "cfg.json").string() + "\" --d-z 6 --out \"" +
                         (dir / "m.ckpt").string() + "\"",
                     dir);
    ASSERT_EQ(r.code, 0) << r.err;
    auto meta = json::parse(read_file(dir / "m.ckpt.meta.json"));
    EXPECT_EQ(meta["config"]["d_z"], 6);
    EXPECT_EQ(meta["config"]["d_embed"], 8);
    EXPECT_EQ(meta["config"]["d_hidden"], 8);
    EXPECT_EQ(meta["train"]["epochs"], 1);
    EXPECT_EQ(meta["train"]["optimizer"], "adam");
    EXPECT_EQ(meta["train"]["seed"], 3);
    {
        std::ofstream bad(dir / "bad.json");
        bad << "[1, 2";
    }
    EXPECT_EQ(run_cli("train-vae --config \"" + (dir / "bad.json").string() + "\" --out x.ckpt", dir).code, 2);
}

TEST(Cli, GenerateEmitsScoredRecords) {
    auto dir = scratch_dir("cli_generate");
    const std::string models = "--vae \"" + checkpoints().vae.string() + "\" --lm \"" + checkpoints().lm.string() + "\"";
    auto r = run_cli("generate " + models + " --n 350 --seed 5 --report \"" + (dir / "report.json").string() + "\"", dir);
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string raw;
    std::size_t count = 0, in_band = 0;
    std::set<std::string> texts;
    while (std::getline(in, raw)) {
        auto j = json::parse(raw);
        for (const char* k : {"text", "surprisal", "novelty", "in_band", "provenance"}) ASSERT_TRUE(j.contains(k)) << k;
        EXPECT_TRUE(texts.insert(j["text"].get<std::string>()).second);
        EXPECT_LE(split_words(j["text"].get<std::string>()).size(), 15u);
        EXPECT_GE(j["novelty"].get<double>(), 0.0);
        EXPECT_LE(j["novelty"].get<double>(), 1.0);
        in_band += j["in_band"].get<bool>() ? 1 : 0;
        ++count;
    }
    EXPECT_LE(count, 350u);
    EXPECT_GT(count, 0u);
    // The band is the reference pool's middle half; the pool comes from the same prior.
    EXPECT_NEAR(static_cast<double>(in_band) / static_cast<double>(count), 0.5, 0.1);
    auto report = json::parse(read_file(dir / "report.json"));
    EXPECT_EQ(report["emitted"], count);
    EXPECT_EQ(report["report"]["counts"]["in"], in_band);

    auto again = run_cli("generate " + models + " --n 350 --seed 5", dir);
    EXPECT_EQ(again.out, r.out);
    auto banded = run_cli("generate " + models + " --n 350 --seed 5 --apply-band --band-quantiles 0.25 0.75", dir);
    ASSERT_EQ(banded.code, 0);
    EXPECT_EQ(static_cast<std::size_t>(std::count(banded.out.begin(), banded.out.end(), '\n')), in_band);
}

TEST(Cli, ScoreReportsEveryLine) {
    auto dir = scratch_dir("cli_score");
    {
        std::ofstream lines(dir / "lines.txt");
        lines << "rooted in the light\n{\"text\": \"the sea\"}\n\nzebra quartz\n";
    }
    auto r = run_cli("score --lm \"" + checkpoints().lm.string() + "\" --corpus \"" +
                         seedline::testing::demo_corpus_path().string() + "\" --lines \"" + (dir / "lines.txt").string() + "\"",
                     dir);
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    ASSERT_EQ(j["lines"].size(), 3u);
    EXPECT_EQ(j["lines"][1]["text"], "the sea");
    EXPECT_DOUBLE_EQ(j["lines"][2]["novelty"].get<double>(), 1.0);
    EXPECT_TRUE(j.contains("quantiles"));
}

TEST(Cli, ExportPrintsStoredSession) {
    auto dir = scratch_dir("cli_export");
    auto svc = make_service(dir / "sessions");
    const auto id = svc->create_session();
    service::PoolParams p;
    p.n = 10;
    svc->generate_pool(id, p);
    svc->pin(id, 2);
    svc->pin(id, 1);
    svc->arrange(id, {2, 1});
    const auto path = "\"" + svc->session_path(id).string() + "\"";
    auto text = run_cli("export --session " + path, dir);
    ASSERT_EQ(text.code, 0);
    EXPECT_EQ(text.out, svc->export_session(id, service::ExportFormat::Text) + "\n");
    auto doc = run_cli("export --format json --session " + path, dir);
    EXPECT_EQ(doc.out, svc->export_session(id, service::ExportFormat::Json));
    EXPECT_EQ(run_cli("export --session \"" + (dir / "none.json").string() + "\"", dir).code, 2);
}

TEST(Cli, DefaultTrainingOnDemoCorpusImprovesSteadily) {
    auto dir = scratch_dir("cli_default_train");
    auto r = run_cli("train-vae --corpus \"" + seedline::testing::demo_corpus_path().string() + "\" --out \"" +
                         (dir / "vae.ckpt").string() + "\"",
                     dir);
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir / "vae.ckpt.metrics.jsonl");
    std::vector<double> recon;
    std::string raw;
    while (std::getline(in, raw)) {
        auto j = json::parse(raw);
        if (j.contains("recon")) recon.push_back(j["recon"].get<double>());
    }
    ASSERT_GE(recon.size(), 6u);
    for (std::size_t i = 3; i + 2 < recon.size(); ++i) {
        const double prev = (recon[i - 3] + recon[i - 2] + recon[i - 1]) / 3.0;
        const double cur = (recon[i] + recon[i + 1] + recon[i + 2]) / 3.0;
        EXPECT_LE(cur, prev) << "epoch " << i + 1;
    }
    auto meta = json::parse(read_file(dir / "vae.ckpt.meta.json"));
    EXPECT_EQ(meta["corpus"], std::filesystem::absolute(seedline::testing::demo_corpus_path()).string());
}
