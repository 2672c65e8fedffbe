#include "csrlab/eval.hpp"

#include "csrlab/error.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace csrlab::eval {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::int64_t> ngram_counts(const std::vector<std::string> &tokens, int n) {
    std::map<Ngram, std::int64_t> out;
    const auto len = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + len <= tokens.size(); ++i)
        ++out[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + len))];
    return out;
}

void check_pairing(std::size_t hyps, std::size_t refs) {
    if (hyps != refs)
        throw Error(ErrorKind::pairing,
                    std::to_string(hyps) + " hypotheses but " + std::to_string(refs) + " references");
    if (hyps == 0) throw Error(ErrorKind::pairing, "no sentence pairs to score");
}

} // namespace

double bleu(const std::vector<corpus::Sentence> &hypotheses, const std::vector<corpus::Sentence> &references,
            int max_n) {
    check_pairing(hypotheses.size(), references.size());
    if (max_n < 1) throw Error(ErrorKind::parameter, "max_n must be at least 1");
    std::vector<std::int64_t> matched(static_cast<std::size_t>(max_n), 0), total(static_cast<std::size_t>(max_n), 0);
    std::int64_t hyp_len = 0, ref_len = 0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto &h = hypotheses[s].tokens;
        const auto &r = references[s].tokens;
        hyp_len += static_cast<std::int64_t>(h.size());
        ref_len += static_cast<std::int64_t>(r.size());
        for (int n = 1; n <= max_n; ++n) {
            const auto hc = ngram_counts(h, n);
            const auto rc = ngram_counts(r, n);
            for (const auto &[gram, count] : hc) {
                const auto it = rc.find(gram);
                matched[static_cast<std::size_t>(n - 1)] += std::min(count, it == rc.end() ? 0 : it->second);
                total[static_cast<std::size_t>(n - 1)] += count;
            }
        }
    }
    double log_sum = 0.0;
    for (int n = 0; n < max_n; ++n) {
        if (matched[static_cast<std::size_t>(n)] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matched[static_cast<std::size_t>(n)]) /
                            static_cast<double>(total[static_cast<std::size_t>(n)]));
    }
    const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_sum / max_n);
}

BucketFMeasure bucket_fmeasure(const std::vector<corpus::Sentence> &hypotheses,
                               const std::vector<corpus::Sentence> &references, const corpus::Vocabulary &train_vocab,
                               std::int64_t low_threshold, std::int64_t high_threshold) {
    check_pairing(hypotheses.size(), references.size());
    if (low_threshold > high_threshold) throw Error(ErrorKind::parameter, "low threshold exceeds high threshold");

    // Index 0 is "all", then low, mid, high.
    struct Tally {
        std::int64_t matched = 0, hyp = 0, ref = 0;
    };
    std::array<Tally, 4> tally{};
    auto slots = [&](const std::string &word) {
        std::vector<std::size_t> out{0};
        switch (corpus::frequency_bucket(train_vocab, word, low_threshold, high_threshold)) {
        case corpus::Bucket::low: out.push_back(1); break;
        case corpus::Bucket::mid: out.push_back(2); break;
        case corpus::Bucket::high: out.push_back(3); break;
        case corpus::Bucket::unknown: break;
        }
        return out;
    };
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto hc = ngram_counts(hypotheses[s].tokens, 1);
        const auto rc = ngram_counts(references[s].tokens, 1);
        for (const auto &[gram, count] : hc) {
            const auto it = rc.find(gram);
            const auto match = std::min(count, it == rc.end() ? 0 : it->second);
            for (auto slot : slots(gram[0])) {
                tally[slot].hyp += count;
                tally[slot].matched += match;
            }
        }
        for (const auto &[gram, count] : rc)
            for (auto slot : slots(gram[0])) tally[slot].ref += count;
    }
    auto score = [](const Tally &t) {
        BucketScore out;
        if (t.ref == 0) return out;
        const double p = t.hyp == 0 ? 0.0 : static_cast<double>(t.matched) / static_cast<double>(t.hyp);
        const double r = static_cast<double>(t.matched) / static_cast<double>(t.ref);
        if (t.hyp > 0) out.precision = p;
        out.recall = r;
        out.f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        return out;
    };
    return {score(tally[0]), score(tally[3]), score(tally[2]), score(tally[1])};
}

double distance_between(const std::vector<Vector> &source, const std::vector<Vector> &target) {
    if (source.size() != target.size())
        throw Error(ErrorKind::pairing, std::to_string(source.size()) + " source but " +
                                            std::to_string(target.size()) + " target sentences");
    double sum = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) sum += (source[i] - target[i]).squaredNorm();
    return std::sqrt(sum);
}

double representation_distance(const seq2seq::Seq2SeqModel &model, const std::vector<std::vector<int>> &source,
                               int source_tag, const std::vector<std::vector<int>> &target, int target_tag) {
    if (source.size() != target.size())
        throw Error(ErrorKind::pairing, std::to_string(source.size()) + " source but " +
                                            std::to_string(target.size()) + " target sentences");
    return distance_between(seq2seq::sentence_embeddings(model, source, source_tag),
                            seq2seq::sentence_embeddings(model, target, target_tag));
}

Comparison compare_runs(const pipeline::TrainLog &log_a, const pipeline::TrainLog &log_b, double threshold,
                        std::size_t window) {
    Comparison c{pipeline::steps_to_threshold(log_a, threshold, window),
                 pipeline::steps_to_threshold(log_b, threshold, window), std::nullopt};
    if (c.steps_a && c.steps_b && *c.steps_b > 0)
        c.ratio = static_cast<double>(*c.steps_a) / static_cast<double>(*c.steps_b);
    return c;
}

namespace {

template <class T>
std::string optional_text(const std::optional<T> &v) {
    if (!v) return "none";
    if constexpr (std::is_floating_point_v<T>) return pipeline::format_real(*v);
    else return std::to_string(*v);
}

std::optional<double> parse_optional_real(const std::string &text) {
    if (text == "none") return std::nullopt;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used != text.size() || text.empty()) throw Error(ErrorKind::parse, "bad report value '" + text + "'");
    return v;
}

} // namespace

void MetricReport::write(std::ostream &out) const {
    out << "bleu = " << optional_text(bleu) << '\n';
    out << "f_all = " << optional_text(buckets.all.f) << '\n';
    out << "f_high = " << optional_text(buckets.high.f) << '\n';
    out << "f_mid = " << optional_text(buckets.mid.f) << '\n';
    out << "f_low = " << optional_text(buckets.low.f) << '\n';
    out << "distance = " << optional_text(distance) << '\n';
    out << "distance_subset = " << distance_subset << '\n';
    out << "steps_to_threshold_a = " << optional_text(convergence.steps_a) << '\n';
    out << "steps_to_threshold_b = " << optional_text(convergence.steps_b) << '\n';
    out << "ratio = " << optional_text(convergence.ratio) << '\n';
    for (const auto &[key, value] : metadata) out << "meta." << key << " = " << value << '\n';
}

MetricReport MetricReport::read(std::istream &in) {
    MetricReport r;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw Error(ErrorKind::format, "malformed report line '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
        auto steps = [&] {
            const auto v = parse_optional_real(value);
            return v ? std::optional<std::int64_t>(static_cast<std::int64_t>(*v)) : std::nullopt;
        };
        if (key == "bleu") r.bleu = parse_optional_real(value);
        else if (key == "f_all") r.buckets.all.f = parse_optional_real(value);
        else if (key == "f_high") r.buckets.high.f = parse_optional_real(value);
        else if (key == "f_mid") r.buckets.mid.f = parse_optional_real(value);
        else if (key == "f_low") r.buckets.low.f = parse_optional_real(value);
        else if (key == "distance") r.distance = parse_optional_real(value);
        else if (key == "distance_subset") r.distance_subset = static_cast<std::size_t>(parse_optional_real(value).value_or(0));
        else if (key == "steps_to_threshold_a") r.convergence.steps_a = steps();
        else if (key == "steps_to_threshold_b") r.convergence.steps_b = steps();
        else if (key == "ratio") r.convergence.ratio = parse_optional_real(value);
        else if (key.starts_with("meta.")) r.metadata[key.substr(5)] = value;
        else throw Error(ErrorKind::format, "unknown report key '" + key + "'");
    }
    return r;
}

void MetricReport::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    write(out);
}

MetricReport MetricReport::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    return read(in);
}

namespace {

std::string percent(const std::optional<double> &v) {
    if (!v) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * *v;
    return s.str();
}

} // namespace

std::string format_bucket_row(const BucketFMeasure &f) {
    return "All " + percent(f.all.f) + ", High " + percent(f.high.f) + ", Mid " + percent(f.mid.f) + ", Low " +
           percent(f.low.f);
}

std::string MetricReport::summary() const {
    std::ostringstream s;
    s << std::fixed;
    s << "BLEU " << (bleu ? (std::ostringstream() << std::fixed << std::setprecision(2) << *bleu).str() : "n/a") << '\n';
    s << "F-measure " << format_bucket_row(buckets) << '\n';
    if (distance) s << "distance " << std::setprecision(2) << *distance << " over " << distance_subset << " pairs\n";
    if (convergence.steps_a || convergence.steps_b) {
        s << "steps to threshold " << optional_text(convergence.steps_a) << " vs " << optional_text(convergence.steps_b);
        if (convergence.ratio) s << " (ratio " << std::setprecision(2) << *convergence.ratio << ")";
        s << '\n';
    }
    return s.str();
}

} // namespace csrlab::eval
