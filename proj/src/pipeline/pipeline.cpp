#include "csrlab/pipeline.hpp"

#include "csrlab/config.hpp"
#include "csrlab/error.hpp"
#include "csrlab/log.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace csrlab::pipeline {

namespace fs = std::filesystem;

void StagePlan::validate() const {
    if (stage1_steps < 0) throw Error(ErrorKind::parameter, "stage1_steps must be non-negative");
    if (stage2_steps < 1) throw Error(ErrorKind::parameter, "stage2_steps must be at least 1");
    if (batch_size < 1) throw Error(ErrorKind::parameter, "batch_size must be positive");
    if (eval_every < 0) throw Error(ErrorKind::parameter, "eval_every must be non-negative");
    if (!(peak_lr > 0.0)) throw Error(ErrorKind::parameter, "peak_lr must be positive");
    if (!(warmup_fraction > 0.0 && warmup_fraction <= 1.0))
        throw Error(ErrorKind::parameter, "warmup_fraction must lie in (0, 1]");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
        throw Error(ErrorKind::parameter, "label_smoothing must lie in [0, 1)");
}

std::int64_t StagePlan::warmup_steps(std::int64_t stage_steps) const {
    return std::max<std::int64_t>(1, std::llround(warmup_fraction * static_cast<double>(stage_steps)));
}

void RunConfig::validate() const {
    embed.validate();
    noise.validate();
    plan.validate();
    if (align.k < 1) throw Error(ErrorKind::parameter, "align k must be at least 1");
    if (align.max_iter < 1) throw Error(ErrorKind::parameter, "align max_iter must be at least 1");
    if (eval.beam < 1) throw Error(ErrorKind::parameter, "beam must be at least 1");
    if (eval.low_threshold > eval.high_threshold) throw Error(ErrorKind::parameter, "bucket thresholds out of order");
    if (data.source_lang == data.target_lang) throw Error(ErrorKind::parameter, "source and target languages coincide");
    if (data.source.empty() != data.target.empty())
        throw Error(ErrorKind::parameter, "data source and target must be given together");
    if (data.test_source.empty() != data.test_target.empty())
        throw Error(ErrorKind::parameter, "test source and target must be given together");
    embed::parse_norm_scheme(align.normalize);
    auto m = model;
    m.vocab_size = std::max(m.vocab_size, 1);
    m.validate();
}

namespace {

std::map<std::string, std::string> load_gold(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::map<std::string, std::string> gold;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(ErrorKind::format, "gold lexicon line without a tab: " + line);
        gold[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return gold;
}

void save_gold(const std::map<std::string, std::string> &gold, const fs::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    for (const auto &[s, t] : gold) out << s << '\t' << t << '\n';
}

} // namespace

Dataset load_data(const DataConfig &config) {
    if (config.synthetic()) {
        auto options = config.synth;
        options.source_lang = config.source_lang;
        options.target_lang = config.target_lang;
        auto cp = corpus::gen_cipher_pair(options);
        return {config.dedup ? corpus::dedup_exact(cp.corpus) : cp.corpus, std::move(cp.test), std::move(cp.gold)};
    }
    auto train = corpus::load_parallel(config.source, config.target, config.source_lang, config.target_lang);
    if (config.dedup) train = corpus::dedup_exact(train);
    corpus::Corpus test("test", config.source_lang, config.target_lang);
    if (!config.test_source.empty())
        test = corpus::load_parallel(config.test_source, config.test_target, config.source_lang, config.target_lang);
    std::map<std::string, std::string> gold;
    if (!config.gold.empty()) gold = load_gold(config.gold);
    return {std::move(train), std::move(test), std::move(gold)};
}

TaskCodec::TaskCodec(corpus::Vocabulary vocab, int max_len) : vocab_(std::move(vocab)), max_len_(max_len) {
    if (max_len_ < 3) throw Error(ErrorKind::parameter, "max_len must be at least 3");
}

TaskCodec TaskCodec::for_corpus(const corpus::Corpus &train, int max_len) {
    return TaskCodec(corpus::build_vocab(train, corpus::Side::both), max_len);
}

std::vector<int> TaskCodec::ids(const std::vector<std::string> &tokens) const {
    auto out = vocab_.encode(tokens);
    const auto limit = static_cast<std::size_t>(max_len_ - 2);
    if (out.size() > limit) out.resize(limit);
    return out;
}

std::vector<int> TaskCodec::encoder_input(const corpus::Sentence &sentence) const {
    auto out = ids(sentence.tokens);
    out.push_back(vocab_.tag_id(sentence.lang));
    return out;
}

std::vector<int> TaskCodec::decoder_target(const corpus::Sentence &sentence, const corpus::LanguageTag &tag) const {
    std::vector<int> out{vocab_.tag_id(tag)};
    const auto body = ids(sentence.tokens);
    out.insert(out.end(), body.begin(), body.end());
    out.push_back(corpus::Vocabulary::eos_id);
    return out;
}

seq2seq::Example TaskCodec::translation(const corpus::ParallelPair &pair) const {
    return {encoder_input(pair.source), decoder_target(pair.target, pair.target.lang)};
}

seq2seq::Example TaskCodec::restore(const noise::RestorePair &pair) const {
    return {encoder_input(pair.input), decoder_target(pair.target, pair.target.lang)};
}

std::vector<std::string> TaskCodec::words(const std::vector<int> &ids) const {
    std::vector<std::string> out;
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) continue;
        if (vocab_.is_special(static_cast<std::size_t>(id)) && id != corpus::Vocabulary::unk_id &&
            id != corpus::Vocabulary::mask_id)
            continue;
        out.push_back(vocab_.word(static_cast<std::size_t>(id)));
    }
    return out;
}

InducedLexicon induce_lexicon(const corpus::Corpus &train, const embed::SgnsConfig &embed_config,
                              const AlignConfig &align_config) {
    auto target_config = embed_config;
    target_config.seed = derive_seed(embed_config.seed, 1);
    InducedLexicon out;
    out.source_embeddings = embed::train_sgns(train.side(corpus::Side::source), embed_config);
    out.target_embeddings = embed::train_sgns(train.side(corpus::Side::target), target_config);

    const auto scheme = embed::parse_norm_scheme(align_config.normalize);
    const auto x = embed::normalize(out.source_embeddings, scheme);
    const auto y = embed::normalize(out.target_embeddings, scheme);

    align::SeedLexicon seed;
    const auto &m = align_config.seed_method;
    if (m == "default") seed = align::default_seed(x, y, align_config.retrieval);
    else if (m == "identical") seed = align::seed_lexicon(x, y, align::SeedMethod::identical_strings, align_config.retrieval);
    else if (m == "numerals") seed = align::seed_lexicon(x, y, align::SeedMethod::numerals, align_config.retrieval);
    else if (m == "similarity") seed = align::seed_lexicon(x, y, align::SeedMethod::similarity_init, align_config.retrieval);
    else throw Error(ErrorKind::parameter, "unknown seed method '" + m + "'");

    align::SelfLearnOptions options;
    options.max_iter = align_config.max_iter;
    options.retrieval = align_config.retrieval;
    options.induction_limit = align_config.induction_limit;
    out.alignment = align::self_learn(x.vectors(), y.vectors(), seed, options);

    const embed::EmbeddingMatrix mapped(x.words(), x.vectors() * out.alignment.w);
    const int k = std::min<int>(align_config.k, static_cast<int>(std::min(x.size(), y.size())));
    out.lexicon = align::extract_lexicon(mapped, y, k, align_config.retrieval, train.source_lang(), train.target_lang());
    return out;
}

double lexicon_precision(const align::Lexicon &lexicon, const std::map<std::string, std::string> &gold) {
    if (gold.empty()) throw Error(ErrorKind::parameter, "empty gold lexicon");
    std::size_t hits = 0;
    for (const auto &[word, translation] : gold) {
        const auto *n = lexicon.find(word);
        if (n && !n->empty() && n->front().word == translation) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

namespace {

using Clock = std::chrono::steady_clock;

// Training pairs scored when a run has no held-out test set.
constexpr std::size_t fallback_eval_pairs = 200;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string objective_label(const noise::RestoreBatch &batch) {
    return std::string(batch.objective == noise::Objective::restore ? "restore-" : "denoise-") +
           std::string(noise::to_string(batch.side));
}

double validation_loss(const seq2seq::Seq2SeqModel &model, const std::vector<seq2seq::Example> &examples,
                       std::size_t batch_size, double smoothing) {
    double weighted = 0.0;
    std::size_t tokens = 0;
    for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
        const auto end = std::min(examples.size(), begin + batch_size);
        const auto batch = seq2seq::Batch::from_examples(
            {examples.begin() + static_cast<std::ptrdiff_t>(begin), examples.begin() + static_cast<std::ptrdiff_t>(end)});
        Rng unused(0);
        const double l = seq2seq::loss(seq2seq::forward(model, batch, false, unused), batch, smoothing);
        weighted += l * static_cast<double>(batch.target_tokens());
        tokens += batch.target_tokens();
    }
    return weighted / static_cast<double>(tokens);
}

} // namespace

TrainLog run_stage1(seq2seq::Seq2SeqModel &model, const corpus::Corpus &train, const TaskCodec &codec,
                    const align::TranslationLexicon &lexicon, const StagePlan &plan, const noise::NoiseConfig &noise) {
    plan.validate();
    TrainLog log;
    if (plan.stage1_steps == 0) return log;
    if (lexicon.forward.empty() || lexicon.backward.empty())
        throw Error(ErrorKind::parameter, "stage 1 needs lexicons in both directions");

    const auto start = Clock::now();
    auto noise_config = noise;
    noise_config.seed = derive_seed(plan.data_seed, noise.seed);
    noise::RestoreStream stream(train, lexicon.forward, lexicon.backward, noise_config, plan.batch_size,
                                plan.interleave_denoise);
    auto optim = seq2seq::OptimState::create(model.config, plan.warmup_steps(plan.stage1_steps), plan.peak_lr);
    Rng rng(derive_seed(plan.model_seed, 1));
    std::size_t uncovered = 0;
    for (std::int64_t step = 1; step <= plan.stage1_steps; ++step) {
        noise::RestoreBatch batch;
        {
            log::WarningCapture coverage;
            batch = stream.next();
            uncovered += coverage.categories().size();
        }
        std::vector<seq2seq::Example> examples;
        for (const auto &p : batch.pairs) examples.push_back(codec.restore(p));
        const auto r = seq2seq::train_step(model, seq2seq::Batch::from_examples(examples), optim,
                                           seq2seq::Objective::restore, plan.label_smoothing, rng);
        log.records.push_back({step, 1, objective_label(batch), r.loss, r.lr});
    }
    if (uncovered > 0)
        log::warn("coverage", std::to_string(uncovered) + " stage-1 sentences had no lexicon coverage");
    log.wall_seconds[1] = seconds_since(start);
    return log;
}

std::vector<std::vector<std::size_t>> stage2_schedule(std::size_t corpus_size, const StagePlan &plan) {
    if (corpus_size == 0) throw Error(ErrorKind::empty_corpus, "stage 2 needs a non-empty corpus");
    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::uint64_t epoch = 0;
    while (static_cast<std::int64_t>(batches.size()) < plan.stage2_steps) {
        if (cursor >= order.size()) {
            order.resize(corpus_size);
            std::iota(order.begin(), order.end(), 0);
            Rng shuffle(derive_seed(plan.data_seed, 0x5354, epoch++));
            shuffle.shuffle(order);
            cursor = 0;
        }
        const auto end = std::min(order.size(), cursor + plan.batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
        cursor = end;
    }
    return batches;
}

TrainLog run_stage2(seq2seq::Seq2SeqModel &model, const corpus::Corpus &train, const TaskCodec &codec,
                    const StagePlan &plan, const corpus::Corpus *validation) {
    plan.validate();
    if (train.empty()) throw Error(ErrorKind::empty_corpus, "stage 2 needs a non-empty corpus");
    const auto start = Clock::now();
    TrainLog log;
    auto optim = seq2seq::OptimState::create(model.config, plan.warmup_steps(plan.stage2_steps), plan.peak_lr);
    Rng rng(derive_seed(plan.model_seed, 2));

    std::vector<seq2seq::Example> held_out;
    if (validation && plan.eval_every > 0)
        for (const auto &p : validation->pairs()) held_out.push_back(codec.translation(p));

    const auto schedule = stage2_schedule(train.size(), plan);
    for (std::int64_t step = 1; step <= plan.stage2_steps; ++step) {
        std::vector<seq2seq::Example> examples;
        for (std::size_t i : schedule[static_cast<std::size_t>(step - 1)])
            examples.push_back(codec.translation(train.pairs()[i]));
        const auto r = seq2seq::train_step(model, seq2seq::Batch::from_examples(examples), optim,
                                           seq2seq::Objective::generation, plan.label_smoothing, rng);
        log.records.push_back({step, 2, "generation", r.loss, r.lr});
        if (!held_out.empty() && step % plan.eval_every == 0)
            log.validation.push_back(
                {step, 2, "validation", validation_loss(model, held_out, plan.batch_size, plan.label_smoothing), r.lr});
    }
    log.wall_seconds[2] = seconds_since(start);
    return log;
}

Translation translate(const seq2seq::Seq2SeqModel &model, const TaskCodec &codec, const corpus::Corpus &corpus,
                      const EvalConfig &config) {
    Translation out;
    seq2seq::DecodeOptions options;
    options.beam = config.beam;
    options.length_penalty = config.length_penalty;
    options.max_len = config.decode_max_len;
    options.forced_prefix = {codec.vocab().tag_id(corpus.target_lang())};
    for (const auto &p : corpus.pairs()) {
        const auto result = seq2seq::decode(model, codec.encoder_input(p.source), options);
        out.hypotheses.push_back({codec.words(result.tokens), corpus.target_lang()});
        out.references.push_back(p.target);
    }
    return out;
}

eval::MetricReport evaluate(const seq2seq::Seq2SeqModel &model, const TaskCodec &codec, const corpus::Corpus &train,
                            const corpus::Corpus &test, const EvalConfig &config, const TrainLog *log) {
    eval::MetricReport report;
    corpus::Corpus fallback("train-subset", train.source_lang(), train.target_lang());
    const corpus::Corpus *eval_set = &test;
    if (test.empty()) {
        for (std::size_t i = 0; i < std::min(fallback_eval_pairs, train.size()); ++i) fallback.add(train.pairs()[i]);
        eval_set = &fallback;
    }
    report.metadata["eval_set"] = test.empty() ? "train-subset" : "test";
    report.metadata["eval_pairs"] = std::to_string(eval_set->size());
    report.metadata["corpus"] = train.id();

    const auto translation = translate(model, codec, *eval_set, config);
    report.bleu = eval::bleu(translation.hypotheses, translation.references);
    report.buckets = eval::bucket_fmeasure(translation.hypotheses, translation.references,
                                           corpus::build_vocab(train, corpus::Side::target), config.low_threshold,
                                           config.high_threshold);

    const std::size_t subset = std::min(config.distance_subset, eval_set->size());
    std::vector<std::vector<int>> src, tgt;
    for (std::size_t i = 0; i < subset; ++i) {
        src.push_back(codec.ids(eval_set->pairs()[i].source.tokens));
        tgt.push_back(codec.ids(eval_set->pairs()[i].target.tokens));
    }
    report.distance = eval::representation_distance(model, src, codec.vocab().tag_id(eval_set->source_lang()), tgt,
                                                    codec.vocab().tag_id(eval_set->target_lang()));
    report.distance_subset = subset;

    if (log && config.threshold) report.convergence.steps_a = steps_to_threshold(*log, *config.threshold, config.window);
    return report;
}

void Manifest::set(const std::string &key, const std::string &relative_path) {
    for (auto &[k, v] : entries_)
        if (k == key) {
            v = relative_path;
            return;
        }
    entries_.emplace_back(key, relative_path);
}

std::optional<std::string> Manifest::get(const std::string &key) const {
    for (const auto &[k, v] : entries_)
        if (k == key) return v;
    return std::nullopt;
}

void Manifest::save(const fs::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << "status\t" << status << '\n';
    for (const auto &[k, v] : entries_) out << k << '\t' << v << '\n';
}

Manifest Manifest::load(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(ErrorKind::format, "malformed manifest line '" + line + "'");
        if (line.substr(0, tab) == "status") m.status = line.substr(tab + 1);
        else m.set(line.substr(0, tab), line.substr(tab + 1));
    }
    return m;
}

namespace {

// Writes artifacts under the run directory and records them in the manifest.
class RunWriter {
  public:
    explicit RunWriter(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
        save();
    }

    fs::path path(const std::string &relative) const {
        const auto p = dir_ / relative;
        fs::create_directories(p.parent_path());
        return p;
    }

    void record(const std::string &key, const std::string &relative) {
        manifest_.set(key, relative);
        save();
    }

    void finish(const std::string &status) {
        manifest_.status = status;
        save();
    }

  private:
    void save() const { manifest_.save(dir_ / "manifest.txt"); }

    fs::path dir_;
    Manifest manifest_;
};

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text;
}

} // namespace

RunResult run_two_stage(const RunConfig &config, const fs::path &dir) {
    config.validate();
    RunWriter run(dir);
    try {
        RunResult result;
        result.dir = dir;
        write_text(run.path("config.ini"), cli::render_config(config));
        run.record("config", "config.ini");
        run.record("source_lang", config.data.source_lang.code());
        run.record("target_lang", config.data.target_lang.code());

        const auto data = load_data(config.data);
        corpus::save_parallel(data.train, run.path("data/train.src"), run.path("data/train.tgt"));
        run.record("train_source", "data/train.src");
        run.record("train_target", "data/train.tgt");
        if (!data.test.empty()) {
            corpus::save_parallel(data.test, run.path("data/test.src"), run.path("data/test.tgt"));
            run.record("test_source", "data/test.src");
            run.record("test_target", "data/test.tgt");
        }
        if (!data.gold.empty()) {
            save_gold(data.gold, run.path("data/gold.tsv"));
            run.record("gold", "data/gold.tsv");
        }

        const auto codec = TaskCodec::for_corpus(data.train, config.model.max_len);
        codec.vocab().save_tsv(run.path("vocab.tsv"));
        run.record("vocab", "vocab.tsv");

        log::info("training embeddings and aligning");
        const auto induced = induce_lexicon(data.train, config.embed, config.align);
        embed::save_embeddings(induced.source_embeddings, run.path("embeddings/source.vec"));
        embed::save_embeddings(induced.target_embeddings, run.path("embeddings/target.vec"));
        run.record("embeddings_source", "embeddings/source.vec");
        run.record("embeddings_target", "embeddings/target.vec");
        induced.lexicon.forward.save_tsv(run.path("lexicon/forward.tsv"));
        induced.lexicon.backward.save_tsv(run.path("lexicon/backward.tsv"));
        run.record("lexicon_forward", "lexicon/forward.tsv");
        run.record("lexicon_backward", "lexicon/backward.tsv");
        if (!data.gold.empty()) result.lexicon_precision = lexicon_precision(induced.lexicon.forward, data.gold);

        auto model_config = config.model;
        model_config.vocab_size = static_cast<int>(codec.vocab().size());
        model_config.seed = config.plan.model_seed;
        auto model = seq2seq::init_model(model_config);

        log::info("stage 1: " + std::to_string(config.plan.stage1_steps) + " restore steps");
        const auto log1 = run_stage1(model, data.train, codec, induced.lexicon, config.plan, config.noise);
        seq2seq::save_checkpoint(model, run.path("checkpoints/stage1.ckpt"));
        run.record("checkpoint_stage1", "checkpoints/stage1.ckpt");
        log1.save(run.path("logs/stage1.log"));
        run.record("log_stage1", "logs/stage1.log");

        log::info("stage 2: " + std::to_string(config.plan.stage2_steps) + " translation steps");
        const auto log2 = run_stage2(model, data.train, codec, config.plan, &data.test);
        seq2seq::save_checkpoint(model, run.path("checkpoints/stage2.ckpt"));
        run.record("checkpoint_stage2", "checkpoints/stage2.ckpt");
        log2.save(run.path("logs/stage2.log"));
        run.record("log_stage2", "logs/stage2.log");
        if (!log2.validation.empty()) {
            TrainLog v;
            v.records = log2.validation;
            v.save(run.path("logs/validation.log"));
            run.record("log_validation", "logs/validation.log");
        }

        result.log = log1;
        result.log.append(log2);

        log::info("evaluating");
        result.report = evaluate(model, codec, data.train, data.test, config.eval, &result.log);
        result.report.metadata["data_seed"] = std::to_string(config.plan.data_seed);
        result.report.metadata["model_seed"] = std::to_string(config.plan.model_seed);
        result.report.metadata["stage1_steps"] = std::to_string(config.plan.stage1_steps);
        result.report.metadata["stage2_steps"] = std::to_string(config.plan.stage2_steps);
        if (result.lexicon_precision >= 0.0)
            result.report.metadata["lexicon_p_at_1"] = format_real(result.lexicon_precision);
        result.report.save(run.path("report.txt"));
        run.record("report", "report.txt");
        run.finish("complete");
        return result;
    } catch (const Error &e) {
        run.finish("failed: " + std::string(to_string(e.kind())) + ": " + e.what());
        throw;
    }
}

namespace {

struct FinishedRun {
    fs::path dir;
    Manifest manifest;

    explicit FinishedRun(fs::path d) : dir(std::move(d)), manifest(Manifest::load(dir / "manifest.txt")) {}

    fs::path need(const std::string &key) const {
        const auto v = manifest.get(key);
        if (!v) throw Error(ErrorKind::io, "run manifest in " + dir.string() + " has no entry '" + key + "'");
        return dir / *v;
    }

    corpus::Corpus corpus_for(const std::string &prefix) const {
        const corpus::LanguageTag src(*manifest.get("source_lang")), tgt(*manifest.get("target_lang"));
        if (!manifest.get(prefix + "_source")) return corpus::Corpus(prefix, src, tgt);
        return corpus::load_parallel(need(prefix + "_source"), need(prefix + "_target"), src, tgt);
    }

    seq2seq::Seq2SeqModel model(int stage) const {
        if (stage != 1 && stage != 2) throw Error(ErrorKind::parameter, "stage must be 1 or 2");
        return seq2seq::load_checkpoint(need("checkpoint_stage" + std::to_string(stage)));
    }
};

} // namespace

TrainLog load_run_log(const fs::path &dir) {
    const FinishedRun run(dir);
    TrainLog log;
    if (run.manifest.get("log_stage1")) log.append(TrainLog::load(run.need("log_stage1")));
    log.append(TrainLog::load(run.need("log_stage2")));
    return log;
}

eval::MetricReport evaluate_run(const fs::path &dir, const EvalConfig &config) {
    const FinishedRun run(dir);
    const auto model = run.model(2);
    const TaskCodec codec(corpus::Vocabulary::load_tsv(run.need("vocab")), model.config.max_len);
    const auto log = load_run_log(dir);
    return evaluate(model, codec, run.corpus_for("train"), run.corpus_for("test"), config, &log);
}

double distance_run(const fs::path &dir, int stage, std::size_t subset) {
    const FinishedRun run(dir);
    const auto model = run.model(stage);
    const TaskCodec codec(corpus::Vocabulary::load_tsv(run.need("vocab")), model.config.max_len);
    auto pairs = run.corpus_for("test");
    std::size_t available = pairs.size();
    if (pairs.empty()) {
        pairs = run.corpus_for("train");
        available = std::min<std::size_t>(fallback_eval_pairs, pairs.size());
    }
    const std::size_t n = std::min(subset, available);
    std::vector<std::vector<int>> src, tgt;
    for (std::size_t i = 0; i < n; ++i) {
        src.push_back(codec.ids(pairs.pairs()[i].source.tokens));
        tgt.push_back(codec.ids(pairs.pairs()[i].target.tokens));
    }
    return eval::representation_distance(model, src, codec.vocab().tag_id(pairs.source_lang()), tgt,
                                         codec.vocab().tag_id(pairs.target_lang()));
}

} // namespace csrlab::pipeline
