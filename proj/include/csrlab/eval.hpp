#pragma once

#include "csrlab/corpus.hpp"
#include "csrlab/linalg.hpp"
#include "csrlab/seq2seq.hpp"
#include "csrlab/train_log.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace csrlab::eval {

// Corpus BLEU on word tokens, 0–100. No smoothing: any zero n-gram precision
// gives 0.
double bleu(const std::vector<corpus::Sentence> &hypotheses, const std::vector<corpus::Sentence> &references,
            int max_n = 4);

struct BucketScore {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f; // absent when the bucket has no reference occurrences
};

struct BucketFMeasure {
    BucketScore all, high, mid, low;
};

// Word F-measure per training-frequency bucket with per-sentence clipped
// matches. Words missing from train_vocab only count toward "all".
BucketFMeasure bucket_fmeasure(const std::vector<corpus::Sentence> &hypotheses,
                               const std::vector<corpus::Sentence> &references, const corpus::Vocabulary &train_vocab,
                               std::int64_t low_threshold = 100, std::int64_t high_threshold = 1000);

// sqrt(Σ_i ‖a_i − b_i‖²)
double distance_between(const std::vector<Vector> &source, const std::vector<Vector> &target);

// Sentences are token ids without tags; each side is embedded with its own tag.
double representation_distance(const seq2seq::Seq2SeqModel &model, const std::vector<std::vector<int>> &source,
                               int source_tag, const std::vector<std::vector<int>> &target, int target_tag);

struct Comparison {
    std::optional<std::int64_t> steps_a;
    std::optional<std::int64_t> steps_b;
    std::optional<double> ratio; // steps_a / steps_b
};

Comparison compare_runs(const pipeline::TrainLog &log_a, const pipeline::TrainLog &log_b, double threshold,
                        std::size_t window = 10);

struct MetricReport {
    std::optional<double> bleu;
    BucketFMeasure buckets;
    std::optional<double> distance;
    std::size_t distance_subset = 0;
    Comparison convergence;
    std::map<std::string, std::string> metadata;

    // "key = value" lines in a fixed order; absent values are written as "none".
    void write(std::ostream &out) const;
    static MetricReport read(std::istream &in);
    void save(const std::filesystem::path &path) const;
    static MetricReport load(const std::filesystem::path &path);

    // Human-readable summary, F-measures and BLEU ×100 with one decimal.
    std::string summary() const;
};

// "All 63.2, High 68.7, Mid 58.4, Low 48.6"
std::string format_bucket_row(const BucketFMeasure &f);

} // namespace csrlab::eval
