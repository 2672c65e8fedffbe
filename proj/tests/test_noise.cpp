#include "doctest.h"

#include "csrlab/error.hpp"
#include "csrlab/log.hpp"
#include "csrlab/noise.hpp"
#include "oracles.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace csrlab;
using namespace csrlab::noise;

namespace {

const corpus::LanguageTag en{"EN"}, zh{"ZH"};

corpus::Sentence sentence(const std::string &text, const corpus::LanguageTag &lang) {
    return {corpus::split_tokens(text), lang};
}

// Every word "wI" maps to four neighbors "vI_0".."vI_3".
align::Lexicon full_lexicon(int words) {
    align::Lexicon lex(en, zh);
    for (int i = 0; i < words; ++i) {
        std::vector<align::Neighbor> n;
        for (int j = 0; j < 4; ++j) n.push_back({"v" + std::to_string(i) + "_" + std::to_string(j), 1.0 - 0.1 * j});
        lex.set("w" + std::to_string(i), n);
    }
    return lex;
}

} // namespace

TEST_CASE("corruption budget") {
    CHECK(corruption_budget(10, 0.35) == 4);
    CHECK(corruption_budget(1, 0.35) == 1);
    CHECK(corruption_budget(6, 0.35) == 2);
    CHECK(corruption_budget(6, 0.5) == 3);
    CHECK(corruption_budget(3, 0.5) == 2);
}

TEST_CASE("span sampling") {
    NoiseConfig c;
    SUBCASE("exact coverage, disjoint and in bounds") {
        Rng rng(1);
        for (std::size_t n = 1; n <= 60; ++n)
            for (int rep = 0; rep < 20; ++rep) {
                const auto s = sample_spans(n, c, rng);
                std::size_t covered = 0, end = 0;
                for (const auto &sp : s.spans) {
                    CHECK(sp.length >= 1);
                    CHECK(sp.start >= end);
                    end = sp.start + sp.length;
                    covered += sp.length;
                }
                CHECK(end <= n);
                CHECK(covered == corruption_budget(n, 0.35));
            }
    }
    SUBCASE("single word") {
        Rng rng(2);
        const auto s = sample_spans(1, c, rng);
        CHECK(s.spans == std::vector<Span>{{0, 1}});
    }
    SUBCASE("ten words") {
        Rng rng(3);
        std::size_t covered = 0;
        for (const auto &sp : sample_spans(10, c, rng).spans) covered += sp.length;
        CHECK(covered == 4);
    }
    SUBCASE("raw poisson lengths average the rate") {
        Rng rng(4);
        double total = 0;
        std::size_t count = 0;
        while (count < 10000) {
            for (int v : sample_spans(60, c, rng).raw_lengths) {
                total += v;
                ++count;
            }
        }
        const double mean = total / static_cast<double>(count);
        CHECK(mean >= 3.4);
        CHECK(mean <= 3.6);
    }
}

TEST_CASE("span masking") {
    NoiseConfig c;
    SUBCASE("worked masking example") {
        const auto s = sentence("Military Field Marshal Hussein Tantawi was in attendance", en);
        const auto masked = apply_span_mask(s.tokens, {{1, 0}, {4, 2}});
        const corpus::Sentence input{masked, en};
        CHECK(render_tagged(input) == "Military ⟨mask⟩ Field Marshal Hussein ⟨mask⟩ in attendance [EN]");
        CHECK(render_tagged(s) == "Military Field Marshal Hussein Tantawi was in attendance [EN]");
    }
    SUBCASE("length accounting and determinism") {
        Rng pick(5);
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<std::string> tokens;
            const auto n = 1 + pick.uniform_int(30);
            for (std::uint64_t i = 0; i < n; ++i) tokens.push_back("x" + std::to_string(i));
            const corpus::Sentence s{tokens, en};
            Rng a(rep), b(rep);
            const auto pa = span_mask(s, c, a);
            const auto pb = span_mask(s, c, b);
            CHECK(pa.input == pb.input);
            CHECK(pa.target == s);
            Rng again(rep);
            const auto spans = sample_spans(n, c, again).spans;
            std::size_t shrink = 0;
            for (const auto &sp : spans) shrink += sp.length - 1;
            CHECK(pa.input.tokens.size() == n - shrink);
        }
    }
    SUBCASE("whole sentence") {
        NoiseConfig all = c;
        all.ratio = 1.0;
        all.poisson_lambda = 50.0;
        Rng rng(6);
        const auto p = span_mask(sentence("a b c d", en), all, rng);
        if (p.input.tokens.size() == 1) CHECK(render_tagged(p.input) == "⟨mask⟩ [EN]");
        CHECK(p.replaced_positions.size() == 4);
        for (const auto &t : p.input.tokens) CHECK(t == corpus::kMask);
    }
}

TEST_CASE("sentence permutation") {
    std::vector<corpus::Sentence> doc{sentence("a b", en), sentence("c", en), sentence("d e f", en)};
    Rng single(1);
    CHECK(permute_sentences({doc[0]}, single) == std::vector<corpus::Sentence>{doc[0]});
    std::set<std::string> orders;
    for (std::uint64_t seed = 0; seed < 200 && orders.size() < 6; ++seed) {
        Rng rng(seed);
        const auto p = permute_sentences(doc, rng);
        std::string key;
        std::multiset<std::string> tokens;
        for (const auto &s : p) {
            key += s.text() + "|";
            tokens.insert(s.tokens.begin(), s.tokens.end());
        }
        CHECK(tokens == std::multiset<std::string>{"a", "b", "c", "d", "e", "f"});
        orders.insert(key);
    }
    CHECK(orders.size() == 6);
}

TEST_CASE("code switching") {
    NoiseConfig c;
    SUBCASE("budget met whenever coverage suffices") {
        const auto lex = full_lexicon(100);
        Rng pick(7);
        for (int rep = 0; rep < 10000; ++rep) {
            const auto n = 1 + pick.uniform_int(60);
            corpus::Sentence s{{}, en};
            for (std::uint64_t i = 0; i < n; ++i) s.tokens.push_back("w" + std::to_string(pick.uniform_int(100)));
            Rng rng(static_cast<std::uint64_t>(rep));
            const auto p = code_switch(s, lex, zh, c, rng);
            CHECK(p.replaced_positions.size() == corruption_budget(n, 0.35));
        }
    }
    SUBCASE("replacements come from the top-k lists") {
        const auto lex = full_lexicon(20);
        log::WarningCapture uncovered_sentences;
        NoiseConfig k2 = c;
        k2.k = 2;
        Rng pick(8);
        for (int rep = 0; rep < 1000; ++rep) {
            corpus::Sentence s{{}, en};
            const auto n = 1 + pick.uniform_int(20);
            for (std::uint64_t i = 0; i < n; ++i) {
                const bool covered = pick.bernoulli(0.6);
                s.tokens.push_back((covered ? "w" : "oov") + std::to_string(pick.uniform_int(20)));
            }
            Rng rng(static_cast<std::uint64_t>(rep));
            const auto p = code_switch(s, lex, zh, k2, rng);
            CHECK(p.target == s);
            CHECK(p.replaced_positions.size() <= corruption_budget(n, 0.35));
            for (std::size_t i = 0; i < n; ++i) {
                const bool replaced = std::find(p.replaced_positions.begin(), p.replaced_positions.end(), i) !=
                                      p.replaced_positions.end();
                if (!replaced) {
                    CHECK(p.input.tokens[i] == s.tokens[i]);
                    continue;
                }
                const auto &list = *lex.find(s.tokens[i]);
                CHECK((p.input.tokens[i] == list[0].word || p.input.tokens[i] == list[1].word));
            }
        }
    }
    SUBCASE("no coverage") {
        align::Lexicon lex(en, zh);
        lex.set("zzz", {{"q", 1.0}});
        const auto s = sentence("a b c", en);
        log::WarningCapture capture;
        Rng rng(1);
        const auto p = code_switch(s, lex, zh, c, rng);
        CHECK(p.input == s);
        CHECK(p.replaced_positions.empty());
        CHECK(capture.saw("coverage"));
        Rng rng2(1);
        CHECK(code_switch(s, align::Lexicon(en, zh), zh, c, rng2).replaced_positions.empty());
    }
    SUBCASE("direction mismatch") {
        Rng rng(1);
        CHECK_THROWS_AS(code_switch(sentence("w1", en), full_lexicon(3), en, c, rng), Error);
    }
}

TEST_CASE("golden code-switch fixture") {
    std::ifstream golden(CSRLAB_GOLDEN_DIR "/code_switch.tsv", std::ios::binary);
    REQUIRE(golden.good());
    std::stringstream expected;
    expected << golden.rdbuf();
    CHECK(oracles::golden_code_switch_dump() == expected.str());
}

TEST_CASE("restore stream") {
    corpus::Corpus corpus("c", en, zh);
    for (int i = 0; i < 4; ++i)
        corpus.add({sentence("w" + std::to_string(i) + " w" + std::to_string(i + 1) + " w9", en),
                    sentence("u" + std::to_string(i) + " u8", zh)});
    align::Lexicon src = full_lexicon(10);
    align::Lexicon tgt(zh, en);
    for (int i = 0; i < 10; ++i) tgt.set("u" + std::to_string(i), {{"w" + std::to_string(i), 1.0}});
    NoiseConfig c;

    SUBCASE("alternation and coverage") {
        RestoreStream stream(corpus, src, tgt, c, 2);
        CHECK(stream.batches_per_epoch() == 4);
        std::multiset<std::string> targets;
        for (int b = 0; b < 4; ++b) {
            const auto batch = stream.next();
            CHECK(batch.side == (b % 2 == 0 ? PairSide::source : PairSide::target));
            CHECK(batch.epoch == 0);
            for (const auto &p : batch.pairs) {
                targets.insert(render_tagged(p.target));
                CHECK(p.input.lang == p.target.lang);
            }
        }
        std::multiset<std::string> all;
        for (const auto &p : corpus.pairs()) {
            all.insert(render_tagged(p.source));
            all.insert(render_tagged(p.target));
        }
        CHECK(targets == all);
        CHECK(stream.next().epoch == 1);
    }
    SUBCASE("determinism") {
        RestoreStream a(corpus, src, tgt, c, 3), b(corpus, src, tgt, c, 3);
        for (int i = 0; i < 10; ++i) {
            const auto x = a.next(), y = b.next();
            REQUIRE(x.pairs.size() == y.pairs.size());
            for (std::size_t j = 0; j < x.pairs.size(); ++j) CHECK(x.pairs[j].input == y.pairs[j].input);
        }
    }
    SUBCASE("interleaved denoising") {
        RestoreStream s(corpus, src, tgt, c, 4, true);
        const Objective expected[] = {Objective::restore, Objective::restore, Objective::denoise, Objective::denoise};
        for (int i = 0; i < 4; ++i) {
            const auto b = s.next();
            CHECK(b.objective == expected[i]);
            CHECK(b.side == (i % 2 == 0 ? PairSide::source : PairSide::target));
        }
    }
    SUBCASE("empty corpus") {
        corpus::Corpus empty("e", en, zh);
        RestoreStream s(empty, src, tgt, c, 2);
        CHECK(s.empty());
        CHECK(s.next().pairs.empty());
    }
}
