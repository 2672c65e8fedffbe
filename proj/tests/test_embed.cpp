#include "doctest.h"

#include "csrlab/embed.hpp"
#include "csrlab/error.hpp"
#include "csrlab/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

using namespace csrlab;
using namespace csrlab::embed;

namespace {

std::filesystem::path scratch(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / "csrlab_embed_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void write(const std::filesystem::path &p, const std::string &text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

ErrorKind kind_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::usage;
}

double cosine(const Matrix &m, std::size_t a, std::size_t b) {
    const auto ea = static_cast<Eigen::Index>(a), eb = static_cast<Eigen::Index>(b);
    return m.row(ea).dot(m.row(eb)) / (m.row(ea).norm() * m.row(eb).norm());
}

// Sentences "cI cJ X cK cL" where X is p or q and each slot draws from its own small word pool.
std::vector<corpus::Sentence> shared_context_corpus(int n) {
    Rng rng(17);
    std::vector<corpus::Sentence> out;
    const corpus::LanguageTag tag("EN");
    for (int i = 0; i < n; ++i) {
        corpus::Sentence s{{}, tag};
        const int topic = static_cast<int>(rng.uniform_int(4));
        for (int slot = 0; slot < 5; ++slot) {
            if (slot == 2) {
                s.tokens.push_back(rng.bernoulli(0.5) ? "p" : "q");
                continue;
            }
            s.tokens.push_back("c" + std::to_string(topic * 10 + slot * 2 + static_cast<int>(rng.uniform_int(2))));
        }
        // Filler sentences without p or q give the other words their own contexts.
        corpus::Sentence f{{}, tag};
        for (int j = 0; j < 5; ++j) f.tokens.push_back("f" + std::to_string(rng.uniform_int(20)));
        out.push_back(std::move(s));
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace

TEST_CASE("words in identical contexts get similar vectors") {
    const auto sentences = shared_context_corpus(1000);
    SgnsConfig c;
    c.dim = 32;
    const auto e = train_sgns(sentences, c);
    const auto p = *e.find("p"), q = *e.find("q");
    CHECK(cosine(e.vectors(), p, q) > 0.9);
    CHECK(cosine(e.vectors(), p, *e.find("f3")) < 0.9);
}

TEST_CASE("sgns training is deterministic and its loss falls") {
    const auto sentences = shared_context_corpus(300);
    SgnsConfig c;
    c.dim = 16;
    c.epochs = 6;
    const auto a = train_sgns_with_stats(sentences, c);
    const auto b = train_sgns_with_stats(sentences, c);
    CHECK(a.embeddings.words() == b.embeddings.words());
    CHECK((a.embeddings.vectors() - b.embeddings.vectors()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.epoch_loss.size() == 6);
    const double first_half = a.epoch_loss[0] + a.epoch_loss[1] + a.epoch_loss[2];
    const double second_half = a.epoch_loss[3] + a.epoch_loss[4] + a.epoch_loss[5];
    CHECK(second_half < first_half);
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());
    CHECK(a.embeddings.vectors().allFinite());

    c.seed = 8;
    const auto other = train_sgns(sentences, c);
    CHECK((other.vectors() - a.embeddings.vectors()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("visiting order follows the shuffle flag") {
    const auto sentences = shared_context_corpus(100);
    SgnsConfig c;
    c.dim = 8;
    c.epochs = 2;
    c.shuffle = false;
    const auto fixed = train_sgns(sentences, c);
    CHECK((fixed.vectors() - train_sgns(sentences, c).vectors()).cwiseAbs().maxCoeff() == 0.0);
    c.shuffle = true;
    const auto shuffled = train_sgns(sentences, c);
    CHECK((shuffled.vectors() - train_sgns(sentences, c).vectors()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((fixed.vectors() - shuffled.vectors()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("sgns pair gradient matches central differences") {
    Rng rng(5);
    const int dim = 6;
    for (int trial = 0; trial < 10; ++trial) {
        auto draw = [&] {
            std::vector<double> v(dim);
            for (auto &x : v) x = rng.normal() * 0.7;
            return v;
        };
        std::vector<double> center = draw(), context = draw();
        std::vector<std::vector<double>> negs{draw(), draw(), draw()};
        auto loss_fn = [&] {
            std::vector<std::span<const double>> ns(negs.begin(), negs.end());
            return sgns_pair_loss(center, context, ns);
        };
        std::vector<std::span<const double>> ns(negs.begin(), negs.end());
        const auto g = sgns_pair_gradient(center, context, ns);
        CHECK(g.loss == doctest::Approx(loss_fn()).epsilon(1e-12));

        auto check = [&](std::vector<double> &param, const std::vector<double> &grad) {
            for (int i = 0; i < dim; ++i) {
                const double saved = param[i];
                const double h = 1e-6;
                param[i] = saved + h;
                const double up = loss_fn();
                param[i] = saved - h;
                const double down = loss_fn();
                param[i] = saved;
                const double numeric = (up - down) / (2 * h);
                const double rel = std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
                CHECK(rel < 1e-4);
            }
        };
        check(center, g.center);
        check(context, g.context);
        for (std::size_t k = 0; k < negs.size(); ++k) check(negs[k], g.negatives[k]);
    }
}

TEST_CASE("sgns configuration and degenerate input") {
    SgnsConfig c;
    c.dim = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    SgnsConfig ok;
    ok.min_count = 1000;
    CHECK(kind_of([&] { train_sgns(shared_context_corpus(10), ok); }) == ErrorKind::degenerate_corpus);
}

TEST_CASE("embedding text format") {
    SUBCASE("read") {
        write(scratch("a.vec"), "2 2\na 1 0\nb 0 1\n");
        const auto e = load_embeddings(scratch("a.vec"));
        CHECK(e.size() == 2);
        CHECK(e.dim() == 2);
        CHECK(e.vectors().isApprox(Matrix::Identity(2, 2)));
        CHECK(e.word(1) == "b");
    }
    SUBCASE("round trip is exact") {
        Rng rng(3);
        Matrix m(3, 4);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * 1e-3 + (i % 3 == 0 ? 1e10 : 0.0);
        const EmbeddingMatrix e({"x", "会谈", "z"}, m);
        save_embeddings(e, scratch("b.vec"));
        const auto back = load_embeddings(scratch("b.vec"));
        CHECK(back.words() == e.words());
        CHECK((back.vectors() - m).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("row width mismatch") {
        write(scratch("c.vec"), "2 2\na 1 0 5\nb 0 1\n");
        CHECK(kind_of([] { load_embeddings(scratch("c.vec")); }) == ErrorKind::format);
    }
    SUBCASE("row count mismatch") {
        write(scratch("d.vec"), "3 2\na 1 0\nb 0 1\n");
        CHECK(kind_of([] { load_embeddings(scratch("d.vec")); }) == ErrorKind::format);
    }
    SUBCASE("non-numeric component") {
        write(scratch("e.vec"), "1 2\na 1 zz\n");
        CHECK(kind_of([] { load_embeddings(scratch("e.vec")); }) == ErrorKind::parse);
    }
}

TEST_CASE("normalization") {
    SUBCASE("unit") {
        Matrix m(1, 2);
        m << 3, 4;
        const auto n = normalize(EmbeddingMatrix({"a"}, m), parse_norm_scheme("unit"));
        CHECK(n.vectors()(0, 0) == doctest::Approx(0.6));
        CHECK(n.vectors()(0, 1) == doctest::Approx(0.8));
        const auto again = normalize(n, parse_norm_scheme("unit"));
        CHECK((again.vectors() - n.vectors()).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("center") {
        Matrix m(2, 2);
        m << 1, 0, 3, 0;
        const auto n = normalize(EmbeddingMatrix({"a", "b"}, m), parse_norm_scheme("center"));
        CHECK(n.vectors()(0, 0) == doctest::Approx(-1.0));
        CHECK(n.vectors()(1, 0) == doctest::Approx(1.0));
        CHECK(n.vectors()(0, 1) == 0.0);
    }
    SUBCASE("unit center unit") {
        Rng rng(9);
        Matrix m(20, 5);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() + 2.0;
        std::vector<std::string> words;
        for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
        const auto n = normalize(EmbeddingMatrix(words, m), parse_norm_scheme("unit,center,unit"));
        for (Eigen::Index r = 0; r < 20; ++r) CHECK(std::abs(n.vectors().row(r).norm() - 1.0) < 1e-9);
        const auto c = normalize(EmbeddingMatrix(words, m), parse_norm_scheme("center"));
        CHECK(c.vectors().colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("zero row") {
        const EmbeddingMatrix z({"a"}, Matrix::Zero(1, 3));
        CHECK(kind_of([&] { normalize(z, parse_norm_scheme("unit")); }) == ErrorKind::normalization);
    }
    SUBCASE("bad scheme") { CHECK_THROWS_AS(parse_norm_scheme("unit,spin"), Error); }
}
