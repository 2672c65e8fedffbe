// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass --only 1,3,7 to run a subset and
// --keep to leave the training runs under the work directory.

#include "csrlab/align.hpp"
#include "csrlab/corpus.hpp"
#include "csrlab/embed.hpp"
#include "csrlab/eval.hpp"
#include "csrlab/log.hpp"
#include "csrlab/noise.hpp"
#include "csrlab/pipeline.hpp"
#include "csrlab/seq2seq.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace csrlab;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char *format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string read_bytes(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Cipher settings shared by the lexicon and training criteria. The SGNS
// trainer gets 10 epochs instead of the default 5; see the README.
embed::SgnsConfig cipher_embedding() {
    embed::SgnsConfig c;
    c.epochs = 10;
    return c;
}

double cipher_precision(std::uint64_t seed) {
    corpus::CipherOptions o;
    o.seed = seed;
    const auto cp = corpus::gen_cipher_pair(o);
    const auto induced = pipeline::induce_lexicon(cp.corpus, cipher_embedding(), {});
    return pipeline::lexicon_precision(induced.lexicon.forward, cp.gold);
}

Outcome lexicon_recovery() {
    const auto start = Clock::now();
    const double p = cipher_precision(1);
    const double seconds = seconds_since(start);
    double sum = 0.0, worst = 1.0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        const double q = s == 1 ? p : cipher_precision(s);
        sum += q;
        worst = std::min(worst, q);
    }
    return {p >= 0.90 && seconds <= 120.0,
            fmt("lexicon precision@1 %.3f on cipher seed 1 in %.1f s (seeds 1-10: mean %.3f, min %.3f)", p, seconds,
                sum / 10.0, worst)};
}

std::vector<std::string> row_names(const std::string &prefix, Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

// Self-learning from the pipeline's default seed. A 10-pair seed is also
// tried and reported; it can stall when the space has many more dimensions
// than seed pairs.
Outcome rotation_recovery() {
    const auto start = Clock::now();
    double worst = 0.0, worst_small_seed = 0.0;
    int trials = 0;
    for (const auto &[rows, dim, seed] : {std::tuple{300, 16, 1}, {500, 32, 2}, {1000, 64, 3}}) {
        const Matrix x = oracles::random_rows(rows, dim, 100 + seed);
        const Matrix rot = oracles::random_rotation(dim, 200 + seed);
        const Matrix y = x * rot;
        log::WarningCapture rank_deficient_seed;
        const auto initial = align::default_seed(embed::EmbeddingMatrix(row_names("x", rows), x),
                                                 embed::EmbeddingMatrix(row_names("y", rows), y));
        worst = std::max(worst, (align::self_learn(x, y, initial).w - rot).cwiseAbs().maxCoeff());
        align::SeedLexicon small;
        for (std::size_t i = 0; i < 10; ++i) small.pairs.emplace_back(i, i);
        worst_small_seed = std::max(worst_small_seed, (align::self_learn(x, y, small).w - rot).cwiseAbs().maxCoeff());
        ++trials;
    }
    const double seconds = seconds_since(start);
    return {worst < 1e-4 && seconds <= 60.0,
            fmt("max |W - R| = %.2e over %d spaces (dims 16, 32, 64) from the default seed in %.1f s; from a 10-pair "
                "seed %.2e",
                worst, trials, seconds, worst_small_seed)};
}

Outcome corruption_budget() {
    const auto start = Clock::now();
    align::Lexicon lexicon(corpus::LanguageTag("XX"), corpus::LanguageTag("YY"));
    for (int w = 0; w < 100; ++w)
        lexicon.set("w" + std::to_string(w), {{"v" + std::to_string(w) + "a", 0.9}, {"v" + std::to_string(w) + "b", 0.8}});
    noise::NoiseConfig config;
    Rng rng(2024);
    int mismatches = 0;
    double raw_sum = 0.0;
    std::size_t raw_count = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto n = static_cast<std::size_t>(1 + rng.uniform_int(60));
        corpus::Sentence s{{}, lexicon.from()};
        for (std::size_t j = 0; j < n; ++j) s.tokens.push_back("w" + std::to_string(rng.uniform_int(100)));
        const auto pair = noise::code_switch(s, lexicon, lexicon.to(), config, rng);
        // round-half-up(0.35 n) in integer arithmetic.
        const auto expected = std::max<std::size_t>(1, (35 * n + 50) / 100);
        if (pair.replaced_positions.size() != expected) ++mismatches;
        for (int len : noise::sample_spans(n, config, rng).raw_lengths) {
            raw_sum += len;
            ++raw_count;
        }
    }
    const double mean = raw_sum / static_cast<double>(raw_count);
    const double seconds = seconds_since(start);
    return {mismatches == 0 && mean >= 3.4 && mean <= 3.6 && seconds <= 60.0,
            fmt("%d of 10000 sentences off budget; raw span length mean %.4f over %zu draws; %.1f s", mismatches, mean,
                raw_count, seconds)};
}

Outcome gradient_check() {
    const auto start = Clock::now();
    seq2seq::ModelConfig c;
    c.vocab_size = 10;
    c.dim = 8;
    c.layers = 2;
    c.heads = 2;
    c.ffn_dim = 12;
    c.max_len = 16;
    c.dropout = 0.0;
    auto eval_model = seq2seq::init_model(c);
    oracles::jitter(eval_model, 21);
    const auto eval_errors = oracles::gradient_errors(eval_model, oracles::two_sentence_batch(), 0.2, false);
    c.dropout = 0.3;
    auto train_model = seq2seq::init_model(c);
    oracles::jitter(train_model, 22);
    const auto train_errors = oracles::gradient_errors(train_model, oracles::two_sentence_batch(), 0.2, true);

    std::string worst_name;
    double worst = 0.0;
    for (const auto *errors : {&eval_errors, &train_errors})
        for (const auto &[name, e] : *errors)
            if (e >= worst) worst = e, worst_name = name;
    const double seconds = seconds_since(start);
    return {worst < 1e-3 && seconds <= 60.0,
            fmt("max relative error %.2e over %zu tensors (worst %s), with and without dropout, %.1f s", worst,
                eval_errors.size(), worst_name.c_str(), seconds)};
}

pipeline::RunConfig cipher_run(std::uint64_t seed, std::int64_t stage1, std::int64_t stage2) {
    pipeline::RunConfig c;
    c.embed = cipher_embedding();
    c.plan.stage1_steps = stage1;
    c.plan.stage2_steps = stage2;
    c.plan.batch_size = 32;
    c.plan.peak_lr = 3e-3;
    c.plan.data_seed = seed;
    c.plan.model_seed = seed;
    c.eval.beam = 1;
    c.eval.decode_max_len = 16;
    c.eval.distance_subset = 200;
    return c;
}

constexpr std::int64_t trend_stage1 = 300, trend_stage2 = 500;
const std::vector<std::uint64_t> trend_seeds{1, 2, 3};

struct TrendRuns {
    fs::path work;
    std::map<std::uint64_t, pipeline::RunResult> two_stage, direct, direct_matched;
    double seconds_main = 0.0, seconds_matched = 0.0;

    void ensure_main() {
        if (!two_stage.empty()) return;
        const auto start = Clock::now();
        for (auto s : trend_seeds) {
            two_stage[s] = pipeline::run_two_stage(cipher_run(s, trend_stage1, trend_stage2),
                                                   work / ("two_stage_" + std::to_string(s)));
            direct[s] = pipeline::run_two_stage(cipher_run(s, 0, trend_stage2), work / ("direct_" + std::to_string(s)));
        }
        seconds_main = seconds_since(start);
    }

    void ensure_matched() {
        if (!direct_matched.empty()) return;
        const auto start = Clock::now();
        for (auto s : trend_seeds)
            direct_matched[s] = pipeline::run_two_stage(cipher_run(s, 0, trend_stage1 + trend_stage2),
                                                        work / ("direct_matched_" + std::to_string(s)));
        seconds_matched = seconds_since(start);
    }
};

Outcome convergence_trend(TrendRuns &runs) {
    runs.ensure_main();
    int wins = 0;
    std::string detail;
    for (auto s : trend_seeds) {
        const auto threshold = *pipeline::final_smoothed_loss(runs.direct[s].log);
        const auto c = eval::compare_runs(runs.two_stage[s].log, runs.direct[s].log, threshold);
        const bool win = c.steps_a && c.steps_b && *c.steps_a <= *c.steps_b;
        wins += win;
        detail += fmt("%sseed %llu: %s vs %s at %.3f", detail.empty() ? "" : "; ", static_cast<unsigned long long>(s),
                      c.steps_a ? std::to_string(*c.steps_a).c_str() : "none",
                      c.steps_b ? std::to_string(*c.steps_b).c_str() : "none", threshold);
    }
    return {wins >= 2 && runs.seconds_main <= 900.0,
            fmt("two-stage reached the direct run's final loss no later in %d of 3 seeds (%s); %.0f s", wins,
                detail.c_str(), runs.seconds_main)};
}

Outcome distance_trend(TrendRuns &runs) {
    runs.ensure_main();
    runs.ensure_matched();
    int wins = 0;
    std::string detail;
    for (auto s : trend_seeds) {
        const double a = *runs.two_stage[s].report.distance;
        const double b = *runs.direct_matched[s].report.distance;
        const double b_stage2 = *runs.direct[s].report.distance;
        wins += a <= 1.05 * b;
        detail += fmt("%sseed %llu: %.1f vs %.1f (%.1f at equal stage 2)", detail.empty() ? "" : "; ",
                      static_cast<unsigned long long>(s), a, b, b_stage2);
    }

    const auto model = seq2seq::load_checkpoint(runs.work / "two_stage_1/checkpoints/stage2.ckpt");
    const auto cp = corpus::gen_cipher_pair(cipher_run(1, 0, 1).data.synth);
    const auto codec = pipeline::TaskCodec::for_corpus(cp.corpus, model.config.max_len);
    std::vector<std::vector<int>> ids;
    for (const auto &p : cp.test.pairs()) ids.push_back(codec.ids(p.source.tokens));
    const int tag = codec.vocab().tag_id(cp.test.source_lang());
    const auto vectors = seq2seq::sentence_embeddings(model, ids, tag);
    const bool self_zero = eval::distance_between(vectors, vectors) == 0.0 &&
                           eval::representation_distance(model, ids, tag, ids, tag) == 0.0;

    return {wins == 3 && self_zero && runs.seconds_matched <= 300.0,
            fmt("two-stage distance within 5%% of direct with matched total steps in %d of 3 seeds (%s); self distance "
                "%s; %.0f s extra",
                wins, detail.c_str(), self_zero ? "0" : "nonzero", runs.seconds_matched)};
}

Outcome metric_oracles() {
    double worst = 0.0;
    int exact = 0, identity_trials = 0, trials = 0;
    for (const auto &[hyp, ref] : oracles::random_bleu_trials()) {
        worst = std::max(worst, std::abs(eval::bleu(hyp, ref) - oracles::bleu(hyp, ref)));
        ++trials;
        // Unsmoothed corpus BLEU is 0 when the corpus has no 4-gram at all,
        // so the identity only applies to corpora with one.
        const bool has_4gram = std::any_of(ref.begin(), ref.end(), [](const auto &s) { return s.tokens.size() >= 4; });
        if (!has_4gram) {
            exact += eval::bleu(ref, ref) == 0.0 && oracles::bleu(ref, ref) == 0.0;
            continue;
        }
        ++identity_trials;
        exact += eval::bleu(ref, ref) == 100.0;
    }
    const auto identical = eval::bucket_fmeasure(oracles::sentences({"hi mi lo", "hi hi lo"}),
                                                 oracles::sentences({"hi mi lo", "hi hi lo"}), oracles::bucket_vocab(),
                                                 oracles::bucket_low, oracles::bucket_high);
    const bool ones = *identical.all.f == 1.0 && *identical.high.f == 1.0 && *identical.mid.f == 1.0 &&
                      *identical.low.f == 1.0;
    int hand = 0;
    const auto cases = oracles::bucket_cases();
    for (const auto &c : cases) hand += oracles::bucket_case_holds(c);
    return {worst < 1e-9 && exact == trials && ones && hand == static_cast<int>(cases.size()),
            fmt("BLEU within %.1e of the brute-force oracle on %d corpora; BLEU(x,x) as expected on %d of %d (100 on "
                "the %d with a 4-gram, 0 otherwise); bucket F %s on identical input; %d of %zu hand cases",
                worst, trials, exact, trials, identity_trials, ones ? "1.0" : "not 1.0", hand, cases.size())};
}

bool same_values(const seq2seq::Seq2SeqModel &a, const seq2seq::Seq2SeqModel &b) {
    std::vector<std::vector<double>> va, vb;
    seq2seq::for_each_tensor(a.params, [&](const std::string &, const double *d, Eigen::Index n) { va.emplace_back(d, d + n); });
    seq2seq::for_each_tensor(b.params, [&](const std::string &, const double *d, Eigen::Index n) { vb.emplace_back(d, d + n); });
    return a.config == b.config && va == vb;
}

Outcome determinism(const fs::path &work) {
    auto c = cipher_run(5, 40, 60);
    c.data.synth.n_sentences = 500;
    c.data.synth.n_test = 50;
    const auto a = work / "determinism_a", b = work / "determinism_b";
    pipeline::run_two_stage(c, a);
    pipeline::run_two_stage(c, b);
    int files = 0, differing = 0;
    for (const auto &entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        ++files;
        differing += read_bytes(entry.path()) != read_bytes(b / fs::relative(entry.path(), a));
    }
    const bool logs = read_bytes(a / "logs/stage1.log") == read_bytes(b / "logs/stage1.log") &&
                      read_bytes(a / "logs/stage2.log") == read_bytes(b / "logs/stage2.log") &&
                      !read_bytes(a / "logs/stage2.log").empty();

    const auto trained = seq2seq::load_checkpoint(a / "checkpoints/stage2.ckpt");
    seq2seq::save_checkpoint(trained, work / "roundtrip.ckpt");
    const bool checkpoint = same_values(trained, seq2seq::load_checkpoint(work / "roundtrip.ckpt")) &&
                            read_bytes(work / "roundtrip.ckpt") == read_bytes(a / "checkpoints/stage2.ckpt");

    const auto embeddings = embed::load_embeddings(a / "embeddings/source.vec");
    embed::save_embeddings(embeddings, work / "roundtrip.vec");
    const auto back = embed::load_embeddings(work / "roundtrip.vec");
    const bool vectors = back.words() == embeddings.words() && back.vectors() == embeddings.vectors();

    return {logs && differing == 0 && checkpoint && vectors,
            fmt("two runs: logs %s, %d of %d artifacts differ; checkpoint round trip %s; embedding round trip %s",
                logs ? "identical" : "differ", differing, files, checkpoint ? "exact" : "inexact",
                vectors ? "exact" : "inexact")};
}

Outcome golden_fixture() {
    const fs::path golden = CSRLAB_GOLDEN_DIR "/code_switch.tsv";
    const auto expected = read_bytes(golden);
    const auto got = oracles::golden_code_switch_dump();
    const bool expected_text = expected.find("布什 与 沙龙 held a talk [ZH]\t布什 与 沙龙 举行 了 会谈 [ZH]") != std::string::npos;
    return {!expected.empty() && got == expected && expected_text,
            fmt("code_switch output %s the checked-in fixture", got == expected ? "matches" : "differs from")};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    std::string work = (fs::temp_directory_path() / "csrlab_acceptance").string();
    bool keep = false;
    app.add_option("--only", only, "criteria to run")->delimiter(',')->check(CLI::Range(1, 9));
    app.add_option("--work", work, "directory for training runs");
    app.add_flag("--keep", keep, "keep the training runs");
    CLI11_PARSE(app, argc, argv);

    log::set_quiet(true);
    fs::remove_all(work);
    fs::create_directories(work);
    TrendRuns runs;
    runs.work = work;

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"lexicon recovery", lexicon_recovery},
        {"rotation recovery", rotation_recovery},
        {"corruption budget", corruption_budget},
        {"gradient correctness", gradient_check},
        {"convergence trend", [&] { return convergence_trend(runs); }},
        {"distance trend", [&] { return distance_trend(runs); }},
        {"metric oracles", metric_oracles},
        {"determinism and round trips", [&] { return determinism(work); }},
        {"golden fixture", golden_fixture},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failed = 0, ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        ++ran;
        failed += !o.pass;
        std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
                  << o.detail << std::endl;
    }
    std::cout << (ran - failed) << " of " << ran << " criteria passed" << std::endl;
    if (!keep) fs::remove_all(work);
    return failed == 0 ? 0 : 1;
}
