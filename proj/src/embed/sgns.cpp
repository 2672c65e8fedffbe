#include "csrlab/embed.hpp"

#include "csrlab/error.hpp"
#include "csrlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace csrlab::embed {

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> words, Matrix vectors)
    : words_(std::move(words)), vectors_(std::move(vectors)) {
    if (static_cast<Eigen::Index>(words_.size()) != vectors_.rows())
        throw Error(ErrorKind::format, "embedding rows do not match word count");
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (!index_.emplace(words_[i], i).second)
            throw Error(ErrorKind::format, "duplicate embedding word: " + words_[i]);
}

std::optional<std::size_t> EmbeddingMatrix::find(const std::string &word) const {
    auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void SgnsConfig::validate() const {
    if (dim < 2 || window < 1 || negatives < 1 || epochs < 1 || !(lr > 0.0) || min_count < 1)
        throw Error(ErrorKind::parameter, "invalid skip-gram configuration");
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double dot(const double *a, const double *b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Loss and gradient of one skip-gram triple. Gradient buffers are overwritten.
double pair_gradient(const double *center, const double *context, const std::vector<const double *> &negatives,
                     std::size_t dim, double *g_center, double *g_context, const std::vector<double *> &g_negatives) {
    std::fill(g_center, g_center + dim, 0.0);
    const double pos = dot(center, context, dim);
    double loss = -log_sigmoid(pos);
    const double gp = sigmoid(pos) - 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
        g_center[i] += gp * context[i];
        g_context[i] = gp * center[i];
    }
    for (std::size_t k = 0; k < negatives.size(); ++k) {
        const double neg = dot(center, negatives[k], dim);
        loss -= log_sigmoid(-neg);
        const double gn = sigmoid(neg);
        for (std::size_t i = 0; i < dim; ++i) {
            g_center[i] += gn * negatives[k][i];
            g_negatives[k][i] = gn * center[i];
        }
    }
    return loss;
}

} // namespace

double sgns_pair_loss(std::span<const double> center, std::span<const double> context,
                      const std::vector<std::span<const double>> &negatives) {
    const std::size_t d = center.size();
    double loss = -log_sigmoid(dot(center.data(), context.data(), d));
    for (const auto &n : negatives) loss -= log_sigmoid(-dot(center.data(), n.data(), d));
    return loss;
}

SgnsPairGradient sgns_pair_gradient(std::span<const double> center, std::span<const double> context,
                                    const std::vector<std::span<const double>> &negatives) {
    const std::size_t d = center.size();
    if (context.size() != d) throw Error(ErrorKind::parameter, "dimension mismatch");
    SgnsPairGradient g;
    g.center.resize(d);
    g.context.resize(d);
    g.negatives.assign(negatives.size(), std::vector<double>(d));
    std::vector<const double *> negs;
    std::vector<double *> gnegs;
    for (std::size_t k = 0; k < negatives.size(); ++k) {
        if (negatives[k].size() != d) throw Error(ErrorKind::parameter, "dimension mismatch");
        negs.push_back(negatives[k].data());
        gnegs.push_back(g.negatives[k].data());
    }
    g.loss = pair_gradient(center.data(), context.data(), negs, d, g.center.data(), g.context.data(), gnegs);
    return g;
}

SgnsResult train_sgns_with_stats(const std::vector<corpus::Sentence> &sentences, const SgnsConfig &config) {
    config.validate();
    if (sentences.empty()) throw Error(ErrorKind::degenerate_corpus, "no sentences to train on");

    const auto vocab = corpus::build_vocab(sentences, {});
    std::vector<std::string> words;
    std::vector<double> weights;
    std::unordered_map<std::string, int> row_of;
    for (std::size_t i = vocab.num_specials(); i < vocab.size(); ++i) {
        if (vocab.count(i) < config.min_count) continue;
        row_of.emplace(vocab.word(i), static_cast<int>(words.size()));
        words.push_back(vocab.word(i));
        weights.push_back(std::pow(static_cast<double>(vocab.count(i)), 0.75));
    }
    if (words.empty()) throw Error(ErrorKind::degenerate_corpus, "vocabulary empty after min_count filter");

    std::vector<double> noise_cdf(weights.size());
    std::partial_sum(weights.begin(), weights.end(), noise_cdf.begin());
    for (auto &c : noise_cdf) c /= noise_cdf.back();

    std::vector<std::vector<int>> encoded;
    std::size_t total_tokens = 0;
    for (const auto &s : sentences) {
        std::vector<int> ids;
        for (const auto &t : s.tokens) {
            auto it = row_of.find(t);
            if (it != row_of.end()) ids.push_back(it->second);
        }
        total_tokens += ids.size();
        encoded.push_back(std::move(ids));
    }

    const auto v = static_cast<Eigen::Index>(words.size());
    const auto d = static_cast<std::size_t>(config.dim);
    Rng rng(config.seed);
    Matrix in(v, config.dim);
    Matrix out = Matrix::Zero(v, config.dim);
    for (Eigen::Index r = 0; r < v; ++r)
        for (Eigen::Index c = 0; c < config.dim; ++c) in(r, c) = (rng.uniform() - 0.5) / config.dim;

    std::vector<double> g_center(d), g_context(d);
    std::vector<std::vector<double>> g_neg_store(static_cast<std::size_t>(config.negatives), std::vector<double>(d));
    std::vector<const double *> negs;
    std::vector<double *> gnegs;
    std::vector<int> neg_rows;

    SgnsResult result;
    const double budget = static_cast<double>(total_tokens) * config.epochs;
    double processed = 0.0;
    std::vector<std::size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t pairs = 0;
        for (auto s : order) {
            const auto &ids = encoded[s];
            const auto n = static_cast<int>(ids.size());
            for (int i = 0; i < n; ++i, processed += 1.0) {
                const double lr = config.lr * std::max(1e-4, 1.0 - processed / budget);
                const int reach = config.window - static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(config.window)));
                for (int j = std::max(0, i - reach); j <= std::min(n - 1, i + reach); ++j) {
                    if (j == i) continue;
                    const int center = ids[static_cast<std::size_t>(i)];
                    const int context = ids[static_cast<std::size_t>(j)];
                    neg_rows.clear();
                    for (int k = 0; k < config.negatives; ++k) {
                        const double u = rng.uniform();
                        const int row = static_cast<int>(std::upper_bound(noise_cdf.begin(), noise_cdf.end(), u) -
                                                         noise_cdf.begin());
                        const int clamped = std::min(row, static_cast<int>(v) - 1);
                        if (clamped != context) neg_rows.push_back(clamped);
                    }
                    negs.clear();
                    gnegs.clear();
                    for (std::size_t k = 0; k < neg_rows.size(); ++k) {
                        negs.push_back(out.row(neg_rows[k]).data());
                        gnegs.push_back(g_neg_store[k].data());
                    }
                    loss_sum += pair_gradient(in.row(center).data(), out.row(context).data(), negs, d,
                                              g_center.data(), g_context.data(), gnegs);
                    ++pairs;
                    double *c = in.row(center).data();
                    double *o = out.row(context).data();
                    for (std::size_t x = 0; x < d; ++x) {
                        c[x] -= lr * g_center[x];
                        o[x] -= lr * g_context[x];
                    }
                    for (std::size_t k = 0; k < neg_rows.size(); ++k) {
                        double *nrow = out.row(neg_rows[k]).data();
                        for (std::size_t x = 0; x < d; ++x) nrow[x] -= lr * g_neg_store[k][x];
                    }
                }
            }
        }
        result.epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
    }
    result.embeddings = EmbeddingMatrix(std::move(words), std::move(in));
    return result;
}

EmbeddingMatrix train_sgns(const std::vector<corpus::Sentence> &sentences, const SgnsConfig &config) {
    return train_sgns_with_stats(sentences, config).embeddings;
}

} // namespace csrlab::embed
