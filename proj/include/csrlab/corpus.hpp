#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace csrlab::corpus {

// Language identifier rendered as "[XX]".
class LanguageTag {
  public:
    LanguageTag() = default;
    explicit LanguageTag(std::string code);

    const std::string &code() const { return code_; }
    std::string rendered() const { return "[" + code_ + "]"; }

    // Accepts either "XX" or "[XX]".
    static LanguageTag parse(std::string_view text);

    friend bool operator==(const LanguageTag &, const LanguageTag &) = default;
    friend auto operator<=>(const LanguageTag &, const LanguageTag &) = default;

  private:
    std::string code_;
};

struct Sentence {
    std::vector<std::string> tokens;
    LanguageTag lang;

    std::string text() const;
    friend bool operator==(const Sentence &, const Sentence &) = default;
};

struct ParallelPair {
    Sentence source;
    Sentence target;
};

enum class Side { source, target, both };

class Corpus {
  public:
    Corpus(std::string id, LanguageTag source_lang, LanguageTag target_lang);

    void add(ParallelPair pair);

    const std::string &id() const { return id_; }
    const LanguageTag &source_lang() const { return source_lang_; }
    const LanguageTag &target_lang() const { return target_lang_; }
    const std::vector<ParallelPair> &pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }

    std::vector<Sentence> side(Side which) const;

  private:
    std::string id_;
    LanguageTag source_lang_;
    LanguageTag target_lang_;
    std::vector<ParallelPair> pairs_;
};

inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kMask = "\xE2\x9F\xA8mask\xE2\x9F\xA9"; // ⟨mask⟩

// Word index and training-corpus counts. Special symbols come first, in the
// order pad, bos, eos, unk, mask, then one entry per language tag; they carry
// count 0. Corpus words follow in descending count, ties broken by byte order.
class Vocabulary {
  public:
    static constexpr int pad_id = 0;
    static constexpr int bos_id = 1;
    static constexpr int eos_id = 2;
    static constexpr int unk_id = 3;
    static constexpr int mask_id = 4;

    Vocabulary() = default;
    Vocabulary(const std::vector<LanguageTag> &tags,
               const std::unordered_map<std::string, std::int64_t> &counts);

    std::size_t size() const { return words_.size(); }
    std::size_t num_specials() const { return num_specials_; }

    const std::string &word(std::size_t index) const { return words_.at(index); }
    std::int64_t count(std::size_t index) const { return counts_.at(index); }
    std::optional<int> find(std::string_view word) const;
    std::optional<std::int64_t> count_of(std::string_view word) const;
    int id_or_unk(std::string_view word) const;
    int tag_id(const LanguageTag &tag) const;
    bool is_special(std::size_t index) const { return index < num_specials_; }

    std::vector<int> encode(const std::vector<std::string> &tokens) const;

    void save_tsv(const std::filesystem::path &path) const;
    static Vocabulary load_tsv(const std::filesystem::path &path);

  private:
    void index_words();

    std::vector<std::string> words_;
    std::vector<std::int64_t> counts_;
    std::unordered_map<std::string, int> index_;
    std::size_t num_specials_ = 0;
};

std::vector<std::string> split_tokens(std::string_view line);
bool is_valid_utf8(std::string_view text);

Corpus load_parallel(const std::filesystem::path &src_path, const std::filesystem::path &tgt_path,
                     const LanguageTag &src_lang, const LanguageTag &tgt_lang);
void save_parallel(const Corpus &corpus, const std::filesystem::path &src_path,
                   const std::filesystem::path &tgt_path);

// Drops pairs whose (source, target) token sequences already appeared.
Corpus dedup_exact(const Corpus &corpus);

Vocabulary build_vocab(const Corpus &corpus, Side side);
Vocabulary build_vocab(const std::vector<Sentence> &sentences, const std::vector<LanguageTag> &tags);

enum class Bucket { low, mid, high, unknown };
std::string_view to_string(Bucket bucket);

Bucket frequency_bucket(const Vocabulary &vocab, std::string_view word, std::int64_t low_threshold,
                        std::int64_t high_threshold);

struct CipherOptions {
    std::uint64_t seed = 1;
    int vocab_size = 50;
    int n_sentences = 2000;
    int n_test = 0; // held-out pairs under the same cipher
    int min_len = 4;
    int max_len = 10;
    double zipf_exponent = 1.0;
    // Probability that a word is drawn from its predecessor's fixed successor
    // list instead of the unigram model. Gives the corpus co-occurrence
    // structure for embeddings to pick up; 0 yields independent tokens.
    double coherence = 0.5;
    int successors = 3;
    LanguageTag source_lang{"XX"};
    LanguageTag target_lang{"YY"};
};

struct CipherPair {
    Corpus corpus;
    Corpus test;
    std::map<std::string, std::string> gold; // "sK" -> "tσ(K)"
    std::uint64_t effective_seed;            // seed actually used after regeneration
};

CipherPair gen_cipher_pair(const CipherOptions &options);

} // namespace csrlab::corpus
