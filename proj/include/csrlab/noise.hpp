#pragma once

#include "csrlab/align.hpp"
#include "csrlab/corpus.hpp"
#include "csrlab/rng.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace csrlab::noise {

struct NoiseConfig {
    double ratio = 0.35;
    double poisson_lambda = 3.5;
    int k = 4;
    std::uint64_t seed = 11;

    void validate() const;
};

struct Span {
    std::size_t start = 0;
    std::size_t length = 0;
    friend bool operator==(const Span &, const Span &) = default;
};

struct SpanSample {
    std::vector<Span> spans;      // disjoint, sorted by start
    std::vector<int> raw_lengths; // Poisson draws before clamping and truncation
};

// max(1, round-half-up(ratio * n))
std::size_t corruption_budget(std::size_t n, double ratio);

// Covers exactly corruption_budget(n) positions. Each span starts at a
// uniformly drawn uncovered position and stops early at the sentence end, at
// an already covered position, or when the budget is met.
SpanSample sample_spans(std::size_t n, const NoiseConfig &config, Rng &rng);

enum class PairSide { source, target };
std::string_view to_string(PairSide side);

struct RestorePair {
    corpus::Sentence input;  // corrupted; the language tag is rendered, not stored as a token
    corpus::Sentence target; // original sentence
    PairSide side = PairSide::source;
    std::vector<std::size_t> replaced_positions; // indices into target.tokens
};

// "tok tok ... [XX]"
std::string render_tagged(const corpus::Sentence &sentence);

// Collapses each span to one mask token. A zero-length span inserts a mask
// before its start position.
std::vector<std::string> apply_span_mask(const std::vector<std::string> &tokens, const std::vector<Span> &spans);

RestorePair span_mask(const corpus::Sentence &sentence, const NoiseConfig &config, Rng &rng,
                      PairSide side = PairSide::source);

std::vector<corpus::Sentence> permute_sentences(std::vector<corpus::Sentence> doc, Rng &rng);

// Replaces words inside sampled spans by a uniform pick among their top-k
// lexicon neighbors. Words with no entry are skipped without using budget.
RestorePair code_switch(const corpus::Sentence &sentence, const align::Lexicon &lexicon,
                        const corpus::LanguageTag &other_lang, const NoiseConfig &config, Rng &rng,
                        PairSide side = PairSide::source);

enum class Objective { restore, denoise };

struct RestoreBatch {
    PairSide side = PairSide::source;
    Objective objective = Objective::restore;
    std::size_t epoch = 0;
    std::vector<RestorePair> pairs;
};

// Endless stream of restore batches alternating source and target sides.
// Each epoch visits every source and every target sentence once, in an order
// shuffled from the noise seed; corruption of sentence i in epoch e uses its
// own derived rng stream.
class RestoreStream {
  public:
    RestoreStream(const corpus::Corpus &corpus, const align::Lexicon &source_lexicon,
                  const align::Lexicon &target_lexicon, NoiseConfig config, std::size_t batch_size,
                  bool interleave_denoise = false);

    RestoreBatch next();
    std::size_t batches_per_epoch() const;
    bool empty() const { return corpus_->empty(); }

  private:
    void start_epoch();
    RestorePair corrupt(PairSide side, Objective objective, std::size_t index) const;

    const corpus::Corpus *corpus_;
    const align::Lexicon *source_lexicon_;
    const align::Lexicon *target_lexicon_;
    NoiseConfig config_;
    std::size_t batch_size_;
    bool interleave_;
    std::size_t epoch_ = 0;
    std::size_t slot_ = 0;
    std::vector<std::size_t> source_order_;
    std::vector<std::size_t> target_order_;
};

// TSV lines "side<TAB>input tokens [XX]<TAB>target tokens [XX]".
void write_dump(std::ostream &out, const std::vector<RestorePair> &pairs);

} // namespace csrlab::noise
