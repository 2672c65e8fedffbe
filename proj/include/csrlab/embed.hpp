#pragma once

#include "csrlab/corpus.hpp"
#include "csrlab/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace csrlab::embed {

// One row per word. Words are ordered as in the vocabulary they came from
// (descending training count).
class EmbeddingMatrix {
  public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::vector<std::string> words, Matrix vectors);

    std::size_t size() const { return words_.size(); }
    Eigen::Index dim() const { return vectors_.cols(); }
    const std::vector<std::string> &words() const { return words_; }
    const std::string &word(std::size_t row) const { return words_.at(row); }
    std::optional<std::size_t> find(const std::string &word) const;

    const Matrix &vectors() const { return vectors_; }
    Matrix &vectors() { return vectors_; }

  private:
    std::vector<std::string> words_;
    Matrix vectors_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct SgnsConfig {
    int dim = 64;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double lr = 0.025;
    int min_count = 1;
    bool shuffle = true;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SgnsResult {
    EmbeddingMatrix embeddings;
    std::vector<double> epoch_loss; // mean negative-sampling loss per (center, context) pair
};

SgnsResult train_sgns_with_stats(const std::vector<corpus::Sentence> &sentences, const SgnsConfig &config);
EmbeddingMatrix train_sgns(const std::vector<corpus::Sentence> &sentences, const SgnsConfig &config);

// Negative-sampling loss for one (center, context, negatives) triple:
//   -log σ(c·o) - Σ log σ(-c·n_k)
double sgns_pair_loss(std::span<const double> center, std::span<const double> context,
                      const std::vector<std::span<const double>> &negatives);

struct SgnsPairGradient {
    double loss = 0.0;
    std::vector<double> center;
    std::vector<double> context;
    std::vector<std::vector<double>> negatives;
};

SgnsPairGradient sgns_pair_gradient(std::span<const double> center, std::span<const double> context,
                                    const std::vector<std::span<const double>> &negatives);

// word2vec text format: "V D" header then "word c_1 ... c_D" rows. Values are
// written in shortest round-trip form, so save→load is exact.
EmbeddingMatrix load_embeddings(const std::filesystem::path &path);
void save_embeddings(const EmbeddingMatrix &embeddings, const std::filesystem::path &path);

enum class NormStep { unit, center };
std::vector<NormStep> parse_norm_scheme(const std::string &text); // e.g. "unit,center,unit"

EmbeddingMatrix normalize(const EmbeddingMatrix &embeddings, const std::vector<NormStep> &scheme);

} // namespace csrlab::embed
