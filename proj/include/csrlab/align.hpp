#pragma once

#include "csrlab/corpus.hpp"
#include "csrlab/embed.hpp"
#include "csrlab/linalg.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace csrlab::align {

// (source row, target row) pairs into the two embedding matrices.
struct SeedLexicon {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;

    bool empty() const { return pairs.empty(); }
    std::size_t size() const { return pairs.size(); }
    void canonicalize(); // sort and drop duplicates
    friend bool operator==(const SeedLexicon &, const SeedLexicon &) = default;
};

enum class SeedMethod { identical_strings, numerals, similarity_init };

enum class RetrievalKind { dot, csls };

struct Retrieval {
    RetrievalKind kind = RetrievalKind::csls;
    int neighborhood = 10;
    // With penalties off, CSLS scores reduce to plain dot products.
    bool penalize = true;

    static Retrieval dot() { return {RetrievalKind::dot, 0, false}; }
};

RetrievalKind parse_retrieval(const std::string &text);

SeedLexicon seed_lexicon(const embed::EmbeddingMatrix &x, const embed::EmbeddingMatrix &y, SeedMethod method,
                         const Retrieval &retrieval = {});

// numerals ∪ identical strings, falling back to similarity_init when both are empty.
SeedLexicon default_seed(const embed::EmbeddingMatrix &x, const embed::EmbeddingMatrix &y,
                         const Retrieval &retrieval = {});

struct ProcrustesResult {
    Matrix w;                // D×D, x·w ≈ y
    bool degenerate = false; // cross-covariance was rank deficient
};

ProcrustesResult procrustes(const Matrix &x, const Matrix &y, const SeedLexicon &seed);

struct SelfLearnOptions {
    int max_iter = 50;
    Retrieval retrieval{};
    std::size_t induction_limit = 20000; // most frequent rows considered during induction
};

struct AlignmentResult {
    Matrix w;
    SeedLexicon final_lexicon;
    int iterations = 0;
    double objective = 0.0;
    bool converged = false;
    std::vector<double> objective_trace; // one entry per iteration, as computed
};

AlignmentResult self_learn(const Matrix &x, const Matrix &y, const SeedLexicon &seed,
                           const SelfLearnOptions &options = {});

struct Neighbor {
    std::string word;
    double score = 0.0;
    friend bool operator==(const Neighbor &, const Neighbor &) = default;
};

// Ranked neighbors for one translation direction.
class Lexicon {
  public:
    Lexicon() = default;
    Lexicon(corpus::LanguageTag from, corpus::LanguageTag to);

    const corpus::LanguageTag &from() const { return from_; }
    const corpus::LanguageTag &to() const { return to_; }

    void set(const std::string &word, std::vector<Neighbor> neighbors);
    const std::vector<Neighbor> *find(const std::string &word) const;
    const std::vector<std::string> &words() const { return order_; }
    std::size_t size() const { return order_.size(); }
    bool empty() const { return order_.empty(); }

    void save_tsv(const std::filesystem::path &path) const;
    static Lexicon load_tsv(const std::filesystem::path &path);

  private:
    corpus::LanguageTag from_;
    corpus::LanguageTag to_;
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::vector<Neighbor>> entries_;
};

struct TranslationLexicon {
    Lexicon forward;  // source words -> target neighbors
    Lexicon backward; // target words -> source neighbors
};

TranslationLexicon extract_lexicon(const embed::EmbeddingMatrix &x_mapped, const embed::EmbeddingMatrix &y, int k,
                                   const Retrieval &retrieval, const corpus::LanguageTag &source_lang,
                                   const corpus::LanguageTag &target_lang);

// Top-k target rows for each source row under the retrieval score, ties broken
// by lower target row. Exposed for property tests.
std::vector<std::vector<std::pair<std::size_t, double>>> retrieve_topk(const Matrix &x, const Matrix &y, int k,
                                                                       const Retrieval &retrieval);

// Mean of the k largest similarities of each row of a against all rows of b.
Vector knn_mean_similarity(const Matrix &a, const Matrix &b, int k);

} // namespace csrlab::align
