#include "csrlab/noise.hpp"

#include "csrlab/error.hpp"
#include "csrlab/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace csrlab::noise {

void NoiseConfig::validate() const {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorKind::parameter, "noise ratio must lie in (0, 1]");
    if (!(poisson_lambda > 0.0)) throw Error(ErrorKind::parameter, "poisson_lambda must be positive");
    if (k < 1) throw Error(ErrorKind::parameter, "noise k must be at least 1");
}

std::size_t corruption_budget(std::size_t n, double ratio) {
    const auto rounded = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
    return std::min(n, std::max<std::size_t>(1, rounded));
}

std::string_view to_string(PairSide side) { return side == PairSide::source ? "source" : "target"; }

SpanSample sample_spans(std::size_t n, const NoiseConfig &config, Rng &rng) {
    SpanSample out;
    if (n == 0) return out;
    const std::size_t budget = corruption_budget(n, config.ratio);
    std::vector<char> covered(n, 0);
    std::vector<std::size_t> free(n);
    std::iota(free.begin(), free.end(), 0);
    std::size_t total = 0;
    while (total < budget) {
        const int raw = rng.poisson(config.poisson_lambda);
        out.raw_lengths.push_back(raw);
        const auto want = static_cast<std::size_t>(std::max(1, raw));
        const std::size_t start = free[static_cast<std::size_t>(rng.uniform_int(free.size()))];
        std::size_t len = 0;
        while (len < want && start + len < n && !covered[start + len] && total < budget) {
            covered[start + len] = 1;
            ++len;
            ++total;
        }
        out.spans.push_back({start, len});
        free.erase(std::remove_if(free.begin(), free.end(), [&](std::size_t p) { return covered[p] != 0; }),
                   free.end());
    }
    std::sort(out.spans.begin(), out.spans.end(), [](const Span &a, const Span &b) { return a.start < b.start; });
    return out;
}

std::string render_tagged(const corpus::Sentence &sentence) {
    auto text = sentence.text();
    if (!text.empty()) text += ' ';
    return text + sentence.lang.rendered();
}

std::vector<std::string> apply_span_mask(const std::vector<std::string> &tokens, const std::vector<Span> &spans) {
    std::vector<Span> sorted = spans;
    std::sort(sorted.begin(), sorted.end(), [](const Span &a, const Span &b) {
        return a.start != b.start ? a.start < b.start : a.length < b.length;
    });
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (const auto &s : sorted) {
        if (s.start < pos || s.start + s.length > tokens.size())
            throw Error(ErrorKind::parameter, "spans overlap or run past the sentence");
        out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                   tokens.begin() + static_cast<std::ptrdiff_t>(s.start));
        out.emplace_back(corpus::kMask);
        pos = s.start + s.length;
    }
    out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos), tokens.end());
    return out;
}

RestorePair span_mask(const corpus::Sentence &sentence, const NoiseConfig &config, Rng &rng, PairSide side) {
    config.validate();
    if (sentence.tokens.empty()) throw Error(ErrorKind::parameter, "cannot mask an empty sentence");
    const auto sample = sample_spans(sentence.tokens.size(), config, rng);
    RestorePair pair{{apply_span_mask(sentence.tokens, sample.spans), sentence.lang}, sentence, side, {}};
    for (const auto &s : sample.spans)
        for (std::size_t i = 0; i < s.length; ++i) pair.replaced_positions.push_back(s.start + i);
    std::sort(pair.replaced_positions.begin(), pair.replaced_positions.end());
    return pair;
}

std::vector<corpus::Sentence> permute_sentences(std::vector<corpus::Sentence> doc, Rng &rng) {
    if (doc.empty()) throw Error(ErrorKind::parameter, "cannot permute an empty document");
    rng.shuffle(doc);
    return doc;
}

RestorePair code_switch(const corpus::Sentence &sentence, const align::Lexicon &lexicon,
                        const corpus::LanguageTag &other_lang, const NoiseConfig &config, Rng &rng, PairSide side) {
    config.validate();
    if (sentence.tokens.empty()) throw Error(ErrorKind::parameter, "cannot code-switch an empty sentence");
    if (!lexicon.empty() && (lexicon.from() != sentence.lang || lexicon.to() != other_lang))
        throw Error(ErrorKind::parameter, "lexicon direction " + lexicon.from().code() + "->" + lexicon.to().code() +
                                              " does not match " + sentence.lang.code() + "->" + other_lang.code());

    RestorePair pair{sentence, sentence, side, {}};
    const std::size_t n = sentence.tokens.size();
    const std::size_t budget = corruption_budget(n, config.ratio);
    std::vector<char> considered(n, 0);
    std::vector<std::size_t> open(n);
    std::iota(open.begin(), open.end(), 0);
    std::size_t replaced = 0;
    while (replaced < budget && !open.empty() && !lexicon.empty()) {
        const auto want = static_cast<std::size_t>(std::max(1, rng.poisson(config.poisson_lambda)));
        std::size_t pos = open[static_cast<std::size_t>(rng.uniform_int(open.size()))];
        for (std::size_t step = 0; step < want && pos < n && !considered[pos] && replaced < budget; ++step, ++pos) {
            considered[pos] = 1;
            const auto *neighbors = lexicon.find(sentence.tokens[pos]);
            if (!neighbors || neighbors->empty()) continue;
            const auto choices = std::min<std::size_t>(static_cast<std::size_t>(config.k), neighbors->size());
            pair.input.tokens[pos] = (*neighbors)[static_cast<std::size_t>(rng.uniform_int(choices))].word;
            pair.replaced_positions.push_back(pos);
            ++replaced;
        }
        open.erase(std::remove_if(open.begin(), open.end(), [&](std::size_t p) { return considered[p] != 0; }),
                   open.end());
    }
    std::sort(pair.replaced_positions.begin(), pair.replaced_positions.end());
    if (replaced == 0)
        log::warn("coverage", "lexicon covers no word of '" + sentence.text() + "'");
    return pair;
}

RestoreStream::RestoreStream(const corpus::Corpus &corpus, const align::Lexicon &source_lexicon,
                             const align::Lexicon &target_lexicon, NoiseConfig config, std::size_t batch_size,
                             bool interleave_denoise)
    : corpus_(&corpus), source_lexicon_(&source_lexicon), target_lexicon_(&target_lexicon), config_(config),
      batch_size_(batch_size), interleave_(interleave_denoise) {
    config_.validate();
    if (batch_size_ == 0) throw Error(ErrorKind::parameter, "batch size must be positive");
    if (!corpus.empty()) start_epoch();
}

std::size_t RestoreStream::batches_per_epoch() const {
    const std::size_t per_side = (corpus_->size() + batch_size_ - 1) / batch_size_;
    return per_side * 2 * (interleave_ ? 2 : 1);
}

void RestoreStream::start_epoch() {
    source_order_.resize(corpus_->size());
    std::iota(source_order_.begin(), source_order_.end(), 0);
    target_order_ = source_order_;
    Rng rng(derive_seed(config_.seed, epoch_, 0xE70C));
    rng.shuffle(source_order_);
    rng.shuffle(target_order_);
    slot_ = 0;
}

RestorePair RestoreStream::corrupt(PairSide side, Objective objective, std::size_t index) const {
    const auto &p = corpus_->pairs()[index];
    Rng rng(derive_seed(config_.seed, epoch_, side == PairSide::source ? 1 : 2, objective == Objective::restore ? 1 : 2,
                        index));
    if (objective == Objective::denoise)
        return span_mask(side == PairSide::source ? p.source : p.target, config_, rng, side);
    if (side == PairSide::source) return code_switch(p.source, *source_lexicon_, corpus_->target_lang(), config_, rng, side);
    return code_switch(p.target, *target_lexicon_, corpus_->source_lang(), config_, rng, side);
}

RestoreBatch RestoreStream::next() {
    if (corpus_->empty()) return {};
    if (slot_ == batches_per_epoch()) {
        ++epoch_;
        start_epoch();
    }
    const std::size_t cycle = interleave_ ? 4 : 2;
    const std::size_t slice = slot_ / cycle;
    const std::size_t phase = slot_ % cycle;
    RestoreBatch batch;
    batch.side = phase % 2 == 0 ? PairSide::source : PairSide::target;
    batch.objective = phase < 2 ? Objective::restore : Objective::denoise;
    batch.epoch = epoch_;
    const auto &order = batch.side == PairSide::source ? source_order_ : target_order_;
    const std::size_t begin = slice * batch_size_;
    const std::size_t end = std::min(order.size(), begin + batch_size_);
    for (std::size_t i = begin; i < end; ++i) batch.pairs.push_back(corrupt(batch.side, batch.objective, order[i]));
    ++slot_;
    return batch;
}

void write_dump(std::ostream &out, const std::vector<RestorePair> &pairs) {
    for (const auto &p : pairs)
        out << to_string(p.side) << '\t' << render_tagged(p.input) << '\t' << render_tagged(p.target) << '\n';
}

} // namespace csrlab::noise
