#include "csrlab/embed.hpp"

#include "csrlab/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace csrlab::embed {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::filesystem::path &path, std::size_t line, const std::string &what) {
    throw Error(kind, path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view text, const std::filesystem::path &path, std::size_t line) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
        fail(ErrorKind::parse, path, line, "non-numeric component '" + std::string(text) + "'");
    return value;
}

} // namespace

EmbeddingMatrix load_embeddings(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::format, path, 1, "missing header");
    const auto header = corpus::split_tokens(line);
    if (header.size() != 2) fail(ErrorKind::format, path, 1, "header must be 'V D'");
    long long rows = 0, dim = 0;
    try {
        rows = std::stoll(header[0]);
        dim = std::stoll(header[1]);
    } catch (const std::logic_error &) {
        fail(ErrorKind::parse, path, 1, "non-numeric header");
    }
    if (rows < 0 || dim < 1) fail(ErrorKind::format, path, 1, "bad header dimensions");

    std::vector<std::string> words;
    Matrix vectors(rows, dim);
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        auto fields = corpus::split_tokens(line);
        if (fields.empty()) continue;
        if (static_cast<long long>(fields.size()) != dim + 1)
            fail(ErrorKind::format, path, number,
                 "expected " + std::to_string(dim) + " values, got " + std::to_string(fields.size() - 1));
        if (static_cast<long long>(words.size()) >= rows) fail(ErrorKind::format, path, number, "more rows than header");
        const auto r = static_cast<Eigen::Index>(words.size());
        for (long long c = 0; c < dim; ++c)
            vectors(r, c) = parse_double(fields[static_cast<std::size_t>(c + 1)], path, number);
        words.push_back(std::move(fields[0]));
    }
    if (static_cast<long long>(words.size()) != rows)
        fail(ErrorKind::format, path, number, "fewer rows than header");
    return {std::move(words), std::move(vectors)};
}

void save_embeddings(const EmbeddingMatrix &embeddings, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << embeddings.size() << ' ' << embeddings.dim() << '\n';
    char buf[64];
    for (std::size_t r = 0; r < embeddings.size(); ++r) {
        out << embeddings.word(r);
        for (Eigen::Index c = 0; c < embeddings.dim(); ++c) {
            auto res = std::to_chars(buf, buf + sizeof buf, embeddings.vectors()(static_cast<Eigen::Index>(r), c));
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

std::vector<NormStep> parse_norm_scheme(const std::string &text) {
    std::vector<NormStep> steps;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        auto t = corpus::split_tokens(item);
        if (t.size() != 1) throw Error(ErrorKind::parameter, "bad normalization scheme: " + text);
        if (t[0] == "unit") steps.push_back(NormStep::unit);
        else if (t[0] == "center") steps.push_back(NormStep::center);
        else throw Error(ErrorKind::parameter, "unknown normalization step: " + t[0]);
    }
    return steps;
}

EmbeddingMatrix normalize(const EmbeddingMatrix &embeddings, const std::vector<NormStep> &scheme) {
    Matrix m = embeddings.vectors();
    for (auto step : scheme) {
        if (step == NormStep::unit) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                const double norm = m.row(r).norm();
                if (norm == 0.0)
                    throw Error(ErrorKind::normalization,
                                "zero vector for '" + embeddings.word(static_cast<std::size_t>(r)) + "'");
                m.row(r) /= norm;
            }
        } else {
            const RowVector mean = m.colwise().mean();
            m.rowwise() -= mean;
        }
    }
    return {embeddings.words(), std::move(m)};
}

} // namespace csrlab::embed
