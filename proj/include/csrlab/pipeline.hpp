#pragma once

#include "csrlab/align.hpp"
#include "csrlab/corpus.hpp"
#include "csrlab/embed.hpp"
#include "csrlab/eval.hpp"
#include "csrlab/noise.hpp"
#include "csrlab/seq2seq.hpp"
#include "csrlab/train_log.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace csrlab::pipeline {

// Parallel data either from files or, when source is empty, from the
// synthetic cipher generator.
struct DataConfig {
    std::filesystem::path source, target;
    std::filesystem::path test_source, test_target;
    std::filesystem::path gold; // optional gold lexicon TSV for precision reporting
    corpus::LanguageTag source_lang{"XX"};
    corpus::LanguageTag target_lang{"YY"};
    bool dedup = false;
    corpus::CipherOptions synth{.n_test = 200};

    bool synthetic() const { return source.empty(); }
};

struct AlignConfig {
    std::string normalize = "unit,center,unit";
    std::string seed_method = "default"; // default, identical, numerals, similarity
    align::Retrieval retrieval{};
    int k = 4;
    int max_iter = 50;
    std::size_t induction_limit = 20000;
};

struct StagePlan {
    std::int64_t stage1_steps = 500; // 0 gives the direct-finetune baseline
    std::int64_t stage2_steps = 2500;
    std::size_t batch_size = 32;
    std::int64_t eval_every = 0; // validation loss every N stage-2 steps; 0 disables
    std::uint64_t data_seed = 17;
    std::uint64_t model_seed = 13;
    double peak_lr = 1e-3;
    double warmup_fraction = 0.1;
    double label_smoothing = 0.2;
    bool interleave_denoise = false;

    void validate() const;
    std::int64_t warmup_steps(std::int64_t stage_steps) const;
};

struct EvalConfig {
    int beam = 5;
    double length_penalty = 1.0;
    int decode_max_len = 64;
    std::int64_t low_threshold = 100;
    std::int64_t high_threshold = 1000;
    std::size_t distance_subset = 20000;
    std::optional<double> threshold; // loss level for steps_to_threshold
    std::size_t window = 10;
};

struct RunConfig {
    DataConfig data;
    embed::SgnsConfig embed;
    AlignConfig align;
    noise::NoiseConfig noise;
    seq2seq::ModelConfig model; // vocab_size and seed are filled in from the data and plan
    StagePlan plan;
    EvalConfig eval;

    void validate() const;
};

struct Dataset {
    corpus::Corpus train;
    corpus::Corpus test;
    std::map<std::string, std::string> gold;
};

Dataset load_data(const DataConfig &config);

// Shared vocabulary plus the tagging convention: the encoder sees
// tokens + [src], the decoder predicts [tgt] tokens </s>. Restore pairs use
// the original sentence's tag on both sides.
class TaskCodec {
  public:
    TaskCodec(corpus::Vocabulary vocab, int max_len);
    static TaskCodec for_corpus(const corpus::Corpus &train, int max_len);

    const corpus::Vocabulary &vocab() const { return vocab_; }
    int max_len() const { return max_len_; }

    std::vector<int> ids(const std::vector<std::string> &tokens) const; // truncated to fit max_len
    std::vector<int> encoder_input(const corpus::Sentence &sentence) const;
    std::vector<int> decoder_target(const corpus::Sentence &sentence, const corpus::LanguageTag &tag) const;
    seq2seq::Example translation(const corpus::ParallelPair &pair) const;
    seq2seq::Example restore(const noise::RestorePair &pair) const;
    std::vector<std::string> words(const std::vector<int> &ids) const; // drops pad, bos, eos and tags

  private:
    corpus::Vocabulary vocab_;
    int max_len_;
};

struct InducedLexicon {
    embed::EmbeddingMatrix source_embeddings, target_embeddings;
    align::AlignmentResult alignment;
    align::TranslationLexicon lexicon;
};

InducedLexicon induce_lexicon(const corpus::Corpus &train, const embed::SgnsConfig &embed_config,
                              const AlignConfig &align_config);

// Fraction of gold source words whose first neighbor is the gold translation.
double lexicon_precision(const align::Lexicon &lexicon, const std::map<std::string, std::string> &gold);

// Trains on the alternating restore stream. Uses its own optimizer state.
TrainLog run_stage1(seq2seq::Seq2SeqModel &model, const corpus::Corpus &train, const TaskCodec &codec,
                    const align::TranslationLexicon &lexicon, const StagePlan &plan, const noise::NoiseConfig &noise);

// Corpus indices of every stage-2 batch: a fresh shuffle per epoch drawn from
// the data seed alone, with a short final batch at the end of each epoch.
std::vector<std::vector<std::size_t>> stage2_schedule(std::size_t corpus_size, const StagePlan &plan);

// Supervised translation steps. The batch order depends only on the data seed.
// A non-empty validation corpus with plan.eval_every > 0 adds
// "validation" records.
TrainLog run_stage2(seq2seq::Seq2SeqModel &model, const corpus::Corpus &train, const TaskCodec &codec,
                    const StagePlan &plan, const corpus::Corpus *validation = nullptr);

struct Translation {
    std::vector<corpus::Sentence> hypotheses;
    std::vector<corpus::Sentence> references;
};

Translation translate(const seq2seq::Seq2SeqModel &model, const TaskCodec &codec, const corpus::Corpus &corpus,
                      const EvalConfig &config);

eval::MetricReport evaluate(const seq2seq::Seq2SeqModel &model, const TaskCodec &codec, const corpus::Corpus &train,
                            const corpus::Corpus &test, const EvalConfig &config, const TrainLog *log = nullptr);

// Ordered key → path list, paths relative to the run directory.
class Manifest {
  public:
    void set(const std::string &key, const std::string &relative_path);
    std::optional<std::string> get(const std::string &key) const;
    const std::vector<std::pair<std::string, std::string>> &entries() const { return entries_; }
    std::string status = "running";

    void save(const std::filesystem::path &path) const;
    static Manifest load(const std::filesystem::path &path);

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct RunResult {
    std::filesystem::path dir;
    TrainLog log;
    eval::MetricReport report;
    double lexicon_precision = -1.0; // when a gold lexicon is available
};

// embed → align → stage 1 → stage 2 → evaluate. Every artifact is recorded
// in dir/manifest.txt as it is written; on failure the manifest keeps what
// was produced and its status names the error.
RunResult run_two_stage(const RunConfig &config, const std::filesystem::path &dir);

// Recomputes the metric report from a finished run directory.
eval::MetricReport evaluate_run(const std::filesystem::path &dir, const EvalConfig &config);

// Representation distance of a finished run's checkpoint for the given stage
// (1 or 2) on the first `subset` evaluation pairs.
double distance_run(const std::filesystem::path &dir, int stage, std::size_t subset);

// Stage-1 and stage-2 records of a finished run.
TrainLog load_run_log(const std::filesystem::path &dir);

} // namespace csrlab::pipeline
