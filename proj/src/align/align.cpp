#include "csrlab/align.hpp"

#include "csrlab/error.hpp"
#include "csrlab/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

namespace csrlab::align {

namespace {

constexpr Eigen::Index kBlock = 512;

bool is_numeral(const std::string &w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// CSLS-style penalties; zero when retrieval is plain dot or penalties are off.
std::pair<Vector, Vector> penalties(const Matrix &x, const Matrix &y, const Retrieval &r) {
    if (r.kind == RetrievalKind::dot || !r.penalize || r.neighborhood <= 0)
        return {Vector::Zero(x.rows()), Vector::Zero(y.rows())};
    return {knn_mean_similarity(x, y, r.neighborhood), knn_mean_similarity(y, x, r.neighborhood)};
}

std::vector<std::size_t> nearest(const Matrix &x, const Matrix &y, const Vector &px, const Vector &py) {
    std::vector<std::size_t> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index start = 0; start < x.rows(); start += kBlock) {
        const Eigen::Index n = std::min(kBlock, x.rows() - start);
        const Matrix sim = x.middleRows(start, n) * y.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (Eigen::Index j = 0; j < sim.cols(); ++j) {
                const double s = sim(i, j) - 0.5 * (px(start + i) + py(j));
                if (s > best) {
                    best = s;
                    arg = static_cast<std::size_t>(j);
                }
            }
            out[static_cast<std::size_t>(start + i)] = arg;
        }
    }
    return out;
}

Matrix sqrt_gram_sorted(const Matrix &m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
    const Eigen::MatrixXd us = svd.matrixU() * svd.singularValues().asDiagonal();
    Matrix sim = us * svd.matrixU().transpose();
    for (Eigen::Index r = 0; r < sim.rows(); ++r) std::sort(sim.row(r).data(), sim.row(r).data() + sim.cols());
    // unit, center, unit
    auto unit = [](Matrix &a) {
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            const double n = a.row(r).norm();
            if (n > 0) a.row(r) /= n;
        }
    };
    unit(sim);
    const RowVector mean = sim.colwise().mean();
    sim.rowwise() -= mean;
    unit(sim);
    return sim;
}

} // namespace

void SeedLexicon::canonicalize() {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
}

RetrievalKind parse_retrieval(const std::string &text) {
    if (text == "dot") return RetrievalKind::dot;
    if (text == "csls") return RetrievalKind::csls;
    throw Error(ErrorKind::parameter, "unknown retrieval '" + text + "' (expected dot or csls)");
}

Vector knn_mean_similarity(const Matrix &a, const Matrix &b, int k) {
    const Eigen::Index kk = std::min<Eigen::Index>(k, b.rows());
    Vector out(a.rows());
    std::vector<double> row;
    for (Eigen::Index start = 0; start < a.rows(); start += kBlock) {
        const Eigen::Index n = std::min(kBlock, a.rows() - start);
        const Matrix sim = a.middleRows(start, n) * b.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            row.assign(sim.row(i).data(), sim.row(i).data() + sim.cols());
            std::nth_element(row.begin(), row.begin() + (kk - 1), row.end(), std::greater<>());
            double s = 0.0;
            for (Eigen::Index j = 0; j < kk; ++j) s += row[static_cast<std::size_t>(j)];
            out(start + i) = kk > 0 ? s / static_cast<double>(kk) : 0.0;
        }
    }
    return out;
}

std::vector<std::vector<std::pair<std::size_t, double>>> retrieve_topk(const Matrix &x, const Matrix &y, int k,
                                                                       const Retrieval &retrieval) {
    if (k < 1 || k > y.rows()) throw Error(ErrorKind::parameter, "k out of range: " + std::to_string(k));
    const auto [px, py] = penalties(x, y, retrieval);
    std::vector<std::vector<std::pair<std::size_t, double>>> out(static_cast<std::size_t>(x.rows()));
    std::vector<std::size_t> idx(static_cast<std::size_t>(y.rows()));
    std::vector<double> score(static_cast<std::size_t>(y.rows()));
    const auto kk = static_cast<std::size_t>(k);
    for (Eigen::Index start = 0; start < x.rows(); start += kBlock) {
        const Eigen::Index n = std::min(kBlock, x.rows() - start);
        const Matrix sim = x.middleRows(start, n) * y.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < y.rows(); ++j)
                score[static_cast<std::size_t>(j)] = sim(i, j) - 0.5 * (px(start + i) + py(j));
            std::iota(idx.begin(), idx.end(), 0);
            std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                              [&](std::size_t a, std::size_t b) {
                                  return score[a] != score[b] ? score[a] > score[b] : a < b;
                              });
            auto &list = out[static_cast<std::size_t>(start + i)];
            for (std::size_t r = 0; r < kk; ++r) list.emplace_back(idx[r], score[idx[r]]);
        }
    }
    return out;
}

SeedLexicon seed_lexicon(const embed::EmbeddingMatrix &x, const embed::EmbeddingMatrix &y, SeedMethod method,
                         const Retrieval &retrieval) {
    SeedLexicon seed;
    switch (method) {
    case SeedMethod::identical_strings:
    case SeedMethod::numerals:
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (method == SeedMethod::numerals && !is_numeral(x.word(i))) continue;
            if (auto j = y.find(x.word(i))) seed.pairs.emplace_back(i, *j);
        }
        break;
    case SeedMethod::similarity_init: {
        // Compare words through the sorted profile of their in-language
        // similarities, which is invariant to rotations of either space.
        const Eigen::Index n = std::min<Eigen::Index>({static_cast<Eigen::Index>(x.size()),
                                                       static_cast<Eigen::Index>(y.size()), 4000});
        if (n == 0) break;
        const Matrix xs = sqrt_gram_sorted(x.vectors().topRows(n));
        const Matrix ys = sqrt_gram_sorted(y.vectors().topRows(n));
        const auto [px, py] = penalties(xs, ys, retrieval);
        const auto fwd = nearest(xs, ys, px, py);
        const auto bwd = nearest(ys, xs, py, px);
        for (std::size_t i = 0; i < fwd.size(); ++i) seed.pairs.emplace_back(i, fwd[i]);
        for (std::size_t j = 0; j < bwd.size(); ++j) seed.pairs.emplace_back(bwd[j], j);
        break;
    }
    }
    seed.canonicalize();
    if (seed.empty()) throw Error(ErrorKind::seeding, "seed lexicon is empty for the chosen method");
    return seed;
}

SeedLexicon default_seed(const embed::EmbeddingMatrix &x, const embed::EmbeddingMatrix &y, const Retrieval &retrieval) {
    SeedLexicon seed;
    for (auto method : {SeedMethod::numerals, SeedMethod::identical_strings}) {
        try {
            auto part = seed_lexicon(x, y, method, retrieval);
            seed.pairs.insert(seed.pairs.end(), part.pairs.begin(), part.pairs.end());
        } catch (const Error &e) {
            if (e.kind() != ErrorKind::seeding) throw;
        }
    }
    seed.canonicalize();
    if (seed.empty()) return seed_lexicon(x, y, SeedMethod::similarity_init, retrieval);
    return seed;
}

ProcrustesResult procrustes(const Matrix &x, const Matrix &y, const SeedLexicon &seed) {
    if (x.cols() != y.cols()) throw Error(ErrorKind::parameter, "embedding dimensions differ");
    if (seed.empty()) throw Error(ErrorKind::seeding, "procrustes needs a non-empty seed");
    const Eigen::Index d = x.cols();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto &[i, j] : seed.pairs) {
        if (static_cast<Eigen::Index>(i) >= x.rows() || static_cast<Eigen::Index>(j) >= y.rows())
            throw Error(ErrorKind::index, "seed pair out of range");
        cov.noalias() += x.row(static_cast<Eigen::Index>(i)).transpose() * y.row(static_cast<Eigen::Index>(j));
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd u = svd.matrixU();
    Eigen::MatrixXd v = svd.matrixV();
    for (Eigen::Index c = 0; c < d; ++c) {
        Eigen::Index arg = 0;
        u.col(c).cwiseAbs().maxCoeff(&arg);
        if (u(arg, c) < 0) {
            u.col(c) *= -1.0;
            v.col(c) *= -1.0;
        }
    }
    ProcrustesResult out;
    out.w = u * v.transpose();
    const auto &sv = svd.singularValues();
    out.degenerate = sv.size() == 0 || sv(sv.size() - 1) <= 1e-10 * std::max(sv(0), 1e-300);
    if (out.degenerate)
        log::warn("degenerate-alignment", "cross-covariance is rank deficient (" + std::to_string(seed.size()) +
                                              " seed pairs, dim " + std::to_string(d) + ")");
    return out;
}

AlignmentResult self_learn(const Matrix &x, const Matrix &y, const SeedLexicon &seed, const SelfLearnOptions &options) {
    if (options.max_iter < 1) throw Error(ErrorKind::parameter, "max_iter must be at least 1");
    const Eigen::Index nx = std::min<Eigen::Index>(x.rows(), static_cast<Eigen::Index>(options.induction_limit));
    const Eigen::Index ny = std::min<Eigen::Index>(y.rows(), static_cast<Eigen::Index>(options.induction_limit));
    const Matrix ys = y.topRows(ny);

    AlignmentResult best;
    best.objective = -std::numeric_limits<double>::infinity();
    SeedLexicon dict = seed;
    dict.canonicalize();
    int it = 0;
    bool converged = false;
    for (it = 1; it <= options.max_iter; ++it) {
        const auto step = procrustes(x, y, dict);
        const Matrix xs = x.topRows(nx) * step.w;
        const auto [px, py] = penalties(xs, ys, options.retrieval);
        const auto fwd = nearest(xs, ys, px, py);
        const auto bwd = nearest(ys, xs, py, px);
        SeedLexicon induced;
        double total = 0.0;
        for (std::size_t i = 0; i < fwd.size(); ++i) {
            if (bwd[fwd[i]] != i) continue;
            induced.pairs.emplace_back(i, fwd[i]);
            total += xs.row(static_cast<Eigen::Index>(i)).dot(ys.row(static_cast<Eigen::Index>(fwd[i])));
        }
        if (induced.empty()) {
            log::warn("alignment", "no mutual nearest neighbors at iteration " + std::to_string(it));
            break;
        }
        const double objective = total / static_cast<double>(induced.size());
        best.objective_trace.push_back(objective);
        if (objective > best.objective) {
            best.w = step.w;
            best.final_lexicon = induced;
            best.objective = objective;
        }
        if (induced == dict) {
            converged = true;
            break;
        }
        dict = std::move(induced);
    }
    if (best.objective_trace.empty()) throw Error(ErrorKind::alignment, "self-learning induced no lexicon");
    best.iterations = std::min(it, options.max_iter);
    best.converged = converged;
    if (!converged)
        log::warn("alignment", "self-learning did not converge in " + std::to_string(options.max_iter) +
                                   " iterations; returning best-so-far");
    return best;
}

Lexicon::Lexicon(corpus::LanguageTag from, corpus::LanguageTag to) : from_(std::move(from)), to_(std::move(to)) {}

void Lexicon::set(const std::string &word, std::vector<Neighbor> neighbors) {
    for (std::size_t i = 1; i < neighbors.size(); ++i)
        if (neighbors[i].score > neighbors[i - 1].score)
            throw Error(ErrorKind::parameter, "neighbor scores must be non-increasing for " + word);
    auto [it, inserted] = entries_.insert_or_assign(word, std::move(neighbors));
    if (inserted) order_.push_back(word);
}

const std::vector<Neighbor> *Lexicon::find(const std::string &word) const {
    auto it = entries_.find(word);
    return it == entries_.end() ? nullptr : &it->second;
}

void Lexicon::save_tsv(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << "# direction: " << from_.code() << "->" << to_.code() << '\n';
    char buf[64];
    for (const auto &w : order_) {
        for (const auto &n : entries_.at(w)) {
            auto res = std::to_chars(buf, buf + sizeof buf, n.score);
            out << w << '\t' << n.word << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
                << '\n';
        }
    }
}

Lexicon Lexicon::load_tsv(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# direction: ", 0) != 0)
        throw Error(ErrorKind::format, path.string() + ": missing '# direction: XX->YY' header");
    const auto spec = line.substr(13);
    const auto arrow = spec.find("->");
    if (arrow == std::string::npos) throw Error(ErrorKind::format, path.string() + ": bad direction header");
    Lexicon lex(corpus::LanguageTag::parse(spec.substr(0, arrow)), corpus::LanguageTag::parse(spec.substr(arrow + 2)));
    std::string current;
    std::vector<Neighbor> pending;
    std::size_t number = 1;
    auto flush = [&] {
        if (!current.empty()) lex.set(current, std::move(pending));
        pending.clear();
    };
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line[0] == '#') continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw Error(ErrorKind::format, path.string() + ":" + std::to_string(number) + ": expected 3 fields");
        const std::string src = line.substr(0, t1);
        Neighbor n{line.substr(t1 + 1, t2 - t1 - 1), 0.0};
        const std::string score = line.substr(t2 + 1);
        auto res = std::from_chars(score.data(), score.data() + score.size(), n.score);
        if (res.ec != std::errc{} || res.ptr != score.data() + score.size())
            throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(number) + ": bad score");
        if (src != current) {
            flush();
            if (lex.find(src)) throw Error(ErrorKind::format, path.string() + ": entries for '" + src + "' not grouped");
            current = src;
        }
        pending.push_back(std::move(n));
    }
    flush();
    return lex;
}

TranslationLexicon extract_lexicon(const embed::EmbeddingMatrix &x_mapped, const embed::EmbeddingMatrix &y, int k,
                                   const Retrieval &retrieval, const corpus::LanguageTag &source_lang,
                                   const corpus::LanguageTag &target_lang) {
    if (k < 1 || static_cast<std::size_t>(k) > std::min(x_mapped.size(), y.size()))
        throw Error(ErrorKind::parameter, "k must lie in [1, min(V_x, V_y)], got " + std::to_string(k));
    TranslationLexicon out{Lexicon(source_lang, target_lang), Lexicon(target_lang, source_lang)};
    auto fill = [k, &retrieval](Lexicon &lex, const embed::EmbeddingMatrix &a, const embed::EmbeddingMatrix &b) {
        const auto lists = retrieve_topk(a.vectors(), b.vectors(), k, retrieval);
        for (std::size_t i = 0; i < lists.size(); ++i) {
            std::vector<Neighbor> ns;
            for (const auto &[j, s] : lists[i]) ns.push_back({b.word(j), s});
            lex.set(a.word(i), std::move(ns));
        }
    };
    fill(out.forward, x_mapped, y);
    fill(out.backward, y, x_mapped);
    return out;
}

} // namespace csrlab::align
