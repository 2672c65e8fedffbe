#include "csrlab/corpus.hpp"

#include "csrlab/error.hpp"
#include "csrlab/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace csrlab::corpus {

LanguageTag::LanguageTag(std::string code) : code_(std::move(code)) {
    if (code_.empty())
        throw Error(ErrorKind::parameter, "language tag must be non-empty");
    for (char c : code_) {
        const auto u = static_cast<unsigned char>(c);
        if (!(std::isupper(u) || std::isdigit(u) || c == '_'))
            throw Error(ErrorKind::parameter, "language tag must be uppercase: " + code_);
    }
}

LanguageTag LanguageTag::parse(std::string_view text) {
    if (text.size() >= 2 && text.front() == '[' && text.back() == ']')
        text = text.substr(1, text.size() - 2);
    return LanguageTag(std::string(text));
}

std::string Sentence::text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

Corpus::Corpus(std::string id, LanguageTag source_lang, LanguageTag target_lang)
    : id_(std::move(id)), source_lang_(std::move(source_lang)), target_lang_(std::move(target_lang)) {
    if (source_lang_ == target_lang_)
        throw Error(ErrorKind::parameter, "source and target language must differ");
}

void Corpus::add(ParallelPair pair) {
    if (pair.source.lang != source_lang_ || pair.target.lang != target_lang_)
        throw Error(ErrorKind::parameter, "pair language does not match corpus " + id_);
    pairs_.push_back(std::move(pair));
}

std::vector<Sentence> Corpus::side(Side which) const {
    std::vector<Sentence> out;
    out.reserve(which == Side::both ? 2 * pairs_.size() : pairs_.size());
    for (const auto &p : pairs_) {
        if (which != Side::target) out.push_back(p.source);
        if (which != Side::source) out.push_back(p.target);
    }
    return out;
}

std::vector<std::string> split_tokens(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_space(line[j])) ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t extra;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= text.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong forms, surrogates, out of range
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            return false;
        i += extra + 1;
    }
    return true;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!is_valid_utf8(line))
            throw Error(ErrorKind::decode,
                        path.string() + ":" + std::to_string(number) + ": invalid UTF-8");
        lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace

Corpus load_parallel(const std::filesystem::path &src_path, const std::filesystem::path &tgt_path,
                     const LanguageTag &src_lang, const LanguageTag &tgt_lang) {
    auto src = read_lines(src_path);
    auto tgt = read_lines(tgt_path);
    if (src.empty() || tgt.empty())
        throw Error(ErrorKind::empty_corpus,
                    "empty parallel file: " + (src.empty() ? src_path : tgt_path).string());
    if (src.size() != tgt.size())
        throw Error(ErrorKind::alignment, "line count mismatch: " + std::to_string(src.size()) +
                                              " vs " + std::to_string(tgt.size()));
    Corpus corpus(src_path.stem().string(), src_lang, tgt_lang);
    for (std::size_t i = 0; i < src.size(); ++i)
        corpus.add({{split_tokens(src[i]), src_lang}, {split_tokens(tgt[i]), tgt_lang}});
    return corpus;
}

void save_parallel(const Corpus &corpus, const std::filesystem::path &src_path,
                   const std::filesystem::path &tgt_path) {
    std::ofstream src(src_path, std::ios::binary);
    std::ofstream tgt(tgt_path, std::ios::binary);
    if (!src || !tgt) throw Error(ErrorKind::io, "cannot write " + src_path.string());
    for (const auto &p : corpus.pairs()) {
        src << p.source.text() << '\n';
        tgt << p.target.text() << '\n';
    }
}

Corpus dedup_exact(const Corpus &corpus) {
    Corpus out(corpus.id(), corpus.source_lang(), corpus.target_lang());
    std::set<std::pair<std::vector<std::string>, std::vector<std::string>>> seen;
    for (const auto &p : corpus.pairs())
        if (seen.emplace(p.source.tokens, p.target.tokens).second) out.add(p);
    return out;
}

Vocabulary::Vocabulary(const std::vector<LanguageTag> &tags,
                       const std::unordered_map<std::string, std::int64_t> &counts) {
    for (auto s : {kPad, kBos, kEos, kUnk, kMask}) {
        words_.emplace_back(s);
        counts_.push_back(0);
    }
    for (const auto &t : tags) {
        if (std::find(words_.begin(), words_.end(), t.rendered()) != words_.end()) continue;
        words_.push_back(t.rendered());
        counts_.push_back(0);
    }
    num_specials_ = words_.size();

    std::vector<std::pair<std::string, std::int64_t>> sorted;
    sorted.reserve(counts.size());
    for (const auto &[w, c] : counts)
        if (std::find(words_.begin(), words_.end(), w) == words_.end()) sorted.emplace_back(w, c);
    std::sort(sorted.begin(), sorted.end(), [](const auto &a, const auto &b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (auto &[w, c] : sorted) {
        words_.push_back(w);
        counts_.push_back(c);
    }
    index_words();
}

void Vocabulary::index_words() {
    index_.clear();
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<int>(i));
}

std::optional<int> Vocabulary::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::int64_t> Vocabulary::count_of(std::string_view word) const {
    auto id = find(word);
    if (!id) return std::nullopt;
    return counts_[static_cast<std::size_t>(*id)];
}

int Vocabulary::id_or_unk(std::string_view word) const { return find(word).value_or(unk_id); }

int Vocabulary::tag_id(const LanguageTag &tag) const {
    auto id = find(tag.rendered());
    if (!id || !is_special(static_cast<std::size_t>(*id)))
        throw Error(ErrorKind::index, "language tag not in vocabulary: " + tag.rendered());
    return *id;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string> &tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto &t : tokens) ids.push_back(id_or_unk(t));
    return ids;
}

void Vocabulary::save_tsv(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    for (std::size_t i = 0; i < words_.size(); ++i)
        out << words_[i] << '\t' << i << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    Vocabulary v;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::istringstream fields(line);
        std::string word, index, count;
        if (!std::getline(fields, word, '\t') || !std::getline(fields, index, '\t') ||
            !std::getline(fields, count))
            throw Error(ErrorKind::format, path.string() + ":" + std::to_string(number) + ": expected 3 fields");
        try {
            if (std::stoull(index) != number - 1)
                throw Error(ErrorKind::format, path.string() + ": indices must be dense");
            v.words_.push_back(word);
            v.counts_.push_back(std::stoll(count));
        } catch (const std::logic_error &) {
            throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(number) + ": bad number");
        }
        if (v.counts_.back() == 0 && v.num_specials_ + 1 == v.words_.size()) ++v.num_specials_;
    }
    v.index_words();
    return v;
}

Vocabulary build_vocab(const std::vector<Sentence> &sentences, const std::vector<LanguageTag> &tags) {
    if (sentences.empty()) throw Error(ErrorKind::empty_corpus, "cannot build a vocabulary from nothing");
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto &s : sentences)
        for (const auto &t : s.tokens) ++counts[t];
    return Vocabulary(tags, counts);
}

Vocabulary build_vocab(const Corpus &corpus, Side side) {
    if (corpus.empty()) throw Error(ErrorKind::empty_corpus, "corpus " + corpus.id() + " is empty");
    return build_vocab(corpus.side(side), {corpus.source_lang(), corpus.target_lang()});
}

std::string_view to_string(Bucket bucket) {
    switch (bucket) {
    case Bucket::low: return "low";
    case Bucket::mid: return "mid";
    case Bucket::high: return "high";
    case Bucket::unknown: return "unknown";
    }
    return "unknown";
}

Bucket frequency_bucket(const Vocabulary &vocab, std::string_view word, std::int64_t low_threshold,
                        std::int64_t high_threshold) {
    if (low_threshold > high_threshold)
        throw Error(ErrorKind::parameter, "frequency thresholds out of order");
    auto count = vocab.count_of(word);
    if (!count) return Bucket::unknown;
    if (*count < low_threshold) return Bucket::low;
    if (*count > high_threshold) return Bucket::high;
    return Bucket::mid;
}

namespace {

int draw_zipf(Rng &rng, const std::vector<double> &cdf) {
    const auto k = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform()) - cdf.begin();
    return std::min(static_cast<int>(k), static_cast<int>(cdf.size()) - 1);
}

Corpus sample_cipher_corpus(Rng &rng, const CipherOptions &o, const std::vector<double> &cdf,
                            const std::vector<std::vector<int>> &successors, const std::vector<int> &cipher,
                            const std::string &id, int n) {
    Corpus corpus(id, o.source_lang, o.target_lang);
    const auto span = static_cast<std::uint64_t>(o.max_len - o.min_len + 1);
    for (int s = 0; s < n; ++s) {
        const int len = o.min_len + static_cast<int>(rng.uniform_int(span));
        Sentence src{{}, o.source_lang}, tgt{{}, o.target_lang};
        int key = -1;
        for (int i = 0; i < len; ++i) {
            if (key >= 0 && rng.uniform() < o.coherence) {
                const auto &next = successors[static_cast<std::size_t>(key)];
                key = next[rng.uniform_int(next.size())];
            } else {
                key = draw_zipf(rng, cdf);
            }
            src.tokens.push_back("s" + std::to_string(key));
            tgt.tokens.push_back("t" + std::to_string(cipher[static_cast<std::size_t>(key)]));
        }
        corpus.add({std::move(src), std::move(tgt)});
    }
    return corpus;
}

} // namespace

CipherPair gen_cipher_pair(const CipherOptions &o) {
    if (o.vocab_size < 10 || o.n_sentences < 1 || o.n_test < 0 || o.min_len < 1 || o.max_len < o.min_len ||
        !(o.zipf_exponent >= 0.0) || !(o.coherence >= 0.0 && o.coherence <= 1.0) || o.successors < 1)
        throw Error(ErrorKind::parameter, "degenerate cipher-pair parameters");

    const auto v = static_cast<std::size_t>(o.vocab_size);
    std::vector<double> cdf(v);
    double total = 0.0;
    for (std::size_t k = 0; k < v; ++k) {
        total += 1.0 / std::pow(static_cast<double>(k + 1), o.zipf_exponent);
        cdf[k] = total;
    }
    for (auto &c : cdf) c /= total;

    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t seed = attempt == 0 ? o.seed : derive_seed(o.seed, attempt);
        Rng rng(seed);
        std::vector<int> cipher(v);
        std::iota(cipher.begin(), cipher.end(), 0);
        rng.shuffle(cipher);

        std::vector<std::vector<int>> successors(v);
        for (auto &next : successors)
            for (int j = 0; j < o.successors; ++j) next.push_back(draw_zipf(rng, cdf));

        CipherPair out{sample_cipher_corpus(rng, o, cdf, successors, cipher, "cipher", o.n_sentences),
                       sample_cipher_corpus(rng, o, cdf, successors, cipher, "cipher-test", o.n_test),
                       {},
                       seed};
        std::set<std::string> seen;
        for (const auto &p : out.corpus.pairs()) seen.insert(p.source.tokens.begin(), p.source.tokens.end());
        // Regenerate until every key occurs at least once in the training side.
        if (seen.size() < v && attempt < 1000) continue;
        for (std::size_t k = 0; k < v; ++k)
            out.gold.emplace("s" + std::to_string(k), "t" + std::to_string(cipher[k]));
        return out;
    }
}

} // namespace csrlab::corpus
