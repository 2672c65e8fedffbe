#include "doctest.h"

#include "csrlab/error.hpp"
#include "csrlab/eval.hpp"
#include "csrlab/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

using namespace csrlab;
using namespace csrlab::eval;

namespace {

const corpus::LanguageTag en{"EN"};

corpus::Sentence s(const std::string &text) { return {corpus::split_tokens(text), en}; }

std::vector<corpus::Sentence> list(std::initializer_list<const char *> texts) {
    std::vector<corpus::Sentence> out;
    for (auto t : texts) out.push_back(s(t));
    return out;
}

BucketFMeasure f(std::initializer_list<const char *> hyp, std::initializer_list<const char *> ref) {
    return bucket_fmeasure(list(hyp), list(ref), oracles::bucket_vocab(), oracles::bucket_low, oracles::bucket_high);
}

} // namespace

TEST_CASE("bleu anchors") {
    CHECK(bleu(list({"the cat sat on the mat", "a b c d"}), list({"the cat sat on the mat", "a b c d"})) == 100.0);
    CHECK(bleu(list({"the the the"}), list({"the cat sat"})) == 0.0);
    try {
        bleu({}, {});
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::pairing);
    }
    CHECK_THROWS_AS(bleu(list({"a"}), list({"a", "b"})), Error);
}

TEST_CASE("clipped unigram precision in the zero case") {
    // "the the the" vs "the cat sat": unigrams clip to 1 of 3, so BLEU-1 is 1/3.
    CHECK(bleu(list({"the the the"}), list({"the cat sat"}), 1) == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("bleu matches a brute-force oracle") {
    int nonzero = 0;
    for (const auto &[hyp, ref] : oracles::random_bleu_trials()) {
        const double got = bleu(hyp, ref), want = oracles::bleu(hyp, ref);
        if (want > 0) ++nonzero;
        CHECK(std::abs(got - want) < 1e-9);
    }
    CHECK(nonzero >= 10);
}

TEST_CASE("bleu is a corpus statistic") {
    Rng rng(13);
    const auto ref = oracles::random_corpus(rng, 8, 3);
    auto hyp = ref;
    for (auto &h : hyp) h.tokens.push_back("w1");
    const double base = bleu(hyp, ref);
    std::vector<std::size_t> order{3, 1, 7, 0, 5, 2, 6, 4};
    std::vector<corpus::Sentence> ph, pr;
    for (auto i : order) ph.push_back(hyp[i]), pr.push_back(ref[i]);
    CHECK(bleu(ph, pr) == doctest::Approx(base).epsilon(1e-15));
    std::vector<corpus::Sentence> long_ref;
    for (int i = 0; i < 10; ++i) long_ref.push_back(s("x y z w v"));
    CHECK(bleu(long_ref, long_ref) == 100.0);
}

TEST_CASE("bucket f-measure on identical inputs") {
    const auto r = f({"hi mi lo", "hi hi"}, {"hi mi lo", "hi hi"});
    CHECK(*r.all.f == 1.0);
    CHECK(*r.high.f == 1.0);
    CHECK(*r.mid.f == 1.0);
    CHECK(*r.low.f == 1.0);
}

TEST_CASE("bucket f-measure hand counts") {
    for (const auto &c : oracles::bucket_cases()) {
        INFO(c.name);
        CHECK(oracles::bucket_case_holds(c));
    }
}

TEST_CASE("bucket precision and recall") {
    const auto over = f({"hi hi"}, {"hi"});
    CHECK(*over.high.precision == doctest::Approx(0.5));
    CHECK(*over.high.recall == 1.0);
    const auto missing = f({"hi"}, {"lo"});
    CHECK(*missing.low.recall == 0.0);
    const auto empty = f({""}, {"hi"});
    CHECK_FALSE(empty.high.precision.has_value());
    CHECK(*empty.high.recall == 0.0);
}

TEST_CASE("bucket report row") {
    BucketFMeasure b;
    b.all.f = 0.632;
    b.high.f = 0.687;
    b.mid.f = 0.584;
    b.low.f = 0.486;
    CHECK(format_bucket_row(b) == "All 63.2, High 68.7, Mid 58.4, Low 48.6");
}

TEST_CASE("representation distance") {
    SUBCASE("hand vectors") {
        Vector a1(3), a2(3), b1(3), b2(3);
        a1 << 1, 2, 3;
        b1 << 1, 0, 3;
        a2 << 0, 0, 1;
        b2 << 2, 1, 1;
        // ‖a1−b1‖² = 4, ‖a2−b2‖² = 5
        CHECK(distance_between({a1, a2}, {b1, b2}) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(distance_between({b1, b2}, {a1, a2}) == distance_between({a1, a2}, {b1, b2}));
        CHECK_THROWS_AS(distance_between({a1}, {a1, a2}), Error);
    }
    SUBCASE("model embeddings") {
        seq2seq::ModelConfig c;
        c.vocab_size = 12;
        c.dim = 8;
        c.ffn_dim = 16;
        c.max_len = 16;
        const auto m = seq2seq::init_model(c);
        const std::vector<std::vector<int>> src{{7, 8, 9}, {10, 11}}, tgt{{8, 8}, {9, 7, 11, 10}};
        CHECK(representation_distance(m, src, 5, src, 5) == 0.0);
        const double d = representation_distance(m, src, 5, tgt, 6);
        CHECK(d > 0.0);
        CHECK(representation_distance(m, tgt, 6, src, 5) == doctest::Approx(d).epsilon(1e-15));
        const auto es = seq2seq::sentence_embeddings(m, src, 5), et = seq2seq::sentence_embeddings(m, tgt, 6);
        const double manual = std::sqrt((es[0] - et[0]).squaredNorm() + (es[1] - et[1]).squaredNorm());
        CHECK(std::abs(d - manual) < 1e-6);
        try {
            representation_distance(m, src, 5, {{7}}, 6);
            FAIL("expected an error");
        } catch (const Error &e) {
            CHECK(e.kind() == ErrorKind::pairing);
        }
    }
}

namespace {

pipeline::TrainLog stage2_log(const std::vector<double> &losses) {
    pipeline::TrainLog log;
    for (std::size_t i = 0; i < losses.size(); ++i)
        log.records.push_back({static_cast<std::int64_t>(i + 1), 2, "generation", losses[i], 1e-3});
    return log;
}

pipeline::TrainLog crossing_at(std::int64_t step, std::int64_t length) {
    pipeline::TrainLog log;
    for (std::int64_t i = 1; i <= length; ++i) log.records.push_back({i, 2, "generation", i >= step ? 0.5 : 3.0, 1e-3});
    return log;
}

} // namespace

TEST_CASE("steps to threshold") {
    SUBCASE("hand-built monotone log") {
        // Loss 2.0 through step 32, then 0. The trailing 10-step mean at step s
        // is 2·(42−s)/10, first ≤ 1.0 at s = 37.
        std::vector<double> losses(60, 0.0);
        for (int i = 0; i < 32; ++i) losses[static_cast<std::size_t>(i)] = 2.0;
        const auto log = stage2_log(losses);
        CHECK(pipeline::steps_to_threshold(log, 1.0) == 37);
        CHECK(pipeline::steps_to_threshold(log, -0.1) == std::nullopt);
    }
    SUBCASE("window longer than the log") {
        const auto log = stage2_log({3.0, 1.0, 0.5});
        // Means over what exists: 3, 2, 1.5.
        CHECK(pipeline::steps_to_threshold(log, 2.0, 50) == 2);
        CHECK(*pipeline::final_smoothed_loss(log, 50) == doctest::Approx(1.5));
    }
    SUBCASE("stage one records are ignored") {
        auto log = stage2_log({1.0, 1.0});
        log.records.insert(log.records.begin(), {1, 1, "restore-source", 0.0, 1e-3});
        CHECK(pipeline::steps_to_threshold(log, 0.5) == std::nullopt);
    }
}

TEST_CASE("run comparison") {
    SUBCASE("large step counts") {
        // Loss 9 until the drop step, 0 from it on. At the drop step the 10-step
        // mean is 8.1 and one step earlier it is 9, so a threshold of 8.5 is
        // first met exactly at the drop.
        auto dropping_at = [](std::int64_t drop) {
            pipeline::TrainLog log;
            for (std::int64_t i = 1; i <= 25000; ++i) log.records.push_back({i, 2, "generation", i >= drop ? 0.0 : 9.0, 0.0});
            return log;
        };
        const auto c = compare_runs(dropping_at(12000), dropping_at(25000), 8.5);
        CHECK(c.steps_a == 12000);
        CHECK(c.steps_b == 25000);
        CHECK(*c.ratio == doctest::Approx(0.48));
    }
    SUBCASE("identical logs") {
        const auto log = crossing_at(20, 40);
        CHECK(*compare_runs(log, log, 1.0).ratio == 1.0);
    }
    SUBCASE("never reaching the threshold") {
        const auto c = compare_runs(crossing_at(20, 40), stage2_log(std::vector<double>(40, 3.0)), 1.0);
        CHECK(c.steps_a.has_value());
        CHECK_FALSE(c.steps_b.has_value());
        CHECK_FALSE(c.ratio.has_value());
    }
}

TEST_CASE("metric report text") {
    MetricReport r;
    r.bleu = 12.5;
    r.buckets.all.f = 0.75;
    r.buckets.low.f = 0.5;
    r.distance = 5.17;
    r.distance_subset = 200;
    r.convergence.steps_a = 12000;
    r.convergence.steps_b = 25000;
    r.convergence.ratio = 0.48;
    r.metadata["corpus"] = "cipher";
    std::ostringstream out;
    r.write(out);
    CHECK(out.str() == "bleu = 12.5\nf_all = 0.75\nf_high = none\nf_mid = none\nf_low = 0.5\ndistance = 5.17\n"
                       "distance_subset = 200\nsteps_to_threshold_a = 12000\nsteps_to_threshold_b = 25000\n"
                       "ratio = 0.48\nmeta.corpus = cipher\n");
    std::istringstream in(out.str());
    const auto back = MetricReport::read(in);
    std::ostringstream again;
    back.write(again);
    CHECK(again.str() == out.str());
    CHECK(r.summary().find("F-measure All 75.0, High n/a, Mid n/a, Low 50.0") != std::string::npos);

    MetricReport distances;
    distances.distance = 11.37;
    CHECK(distances.summary().find("distance 11.37") != std::string::npos);
    distances.distance = 5.17;
    CHECK(distances.summary().find("distance 5.17") != std::string::npos);
}
