#pragma once

#include "csrlab/corpus.hpp"
#include "csrlab/linalg.hpp"
#include "csrlab/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace csrlab::seq2seq {

struct ModelConfig {
    int vocab_size = 0;
    int dim = 64;
    int layers = 2; // encoder and decoder depth each
    int heads = 2;
    int ffn_dim = 128;
    double dropout = 0.3;
    int max_len = 64;
    std::uint64_t seed = 13;

    void validate() const;
    friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

struct LayerNormParams {
    RowVector gain;
    RowVector bias;
};

// Projections act on row vectors: y = x·w + b.
struct AttentionParams {
    Matrix wq, wk, wv, wo;
    RowVector bq, bk, bv, bo;
};

struct FeedForwardParams {
    Matrix w1;
    RowVector b1;
    Matrix w2;
    RowVector b2;
};

struct EncoderLayerParams {
    LayerNormParams attn_norm;
    AttentionParams self_attn;
    LayerNormParams ffn_norm;
    FeedForwardParams ffn;
};

struct DecoderLayerParams {
    LayerNormParams self_norm;
    AttentionParams self_attn;
    LayerNormParams cross_norm;
    AttentionParams cross_attn;
    LayerNormParams ffn_norm;
    FeedForwardParams ffn;
};

// Pre-norm transformer weights. The output projection is the transpose of
// token_embedding.
struct Parameters {
    Matrix token_embedding;
    Matrix encoder_positions;
    Matrix decoder_positions;
    std::vector<EncoderLayerParams> encoder;
    LayerNormParams encoder_norm;
    std::vector<DecoderLayerParams> decoder;
    LayerNormParams decoder_norm;

    static Parameters zeros(const ModelConfig &config);
};

namespace detail {
template <class Tensor, class Fn>
void visit(const std::string &name, Tensor &t, Fn &fn) {
    fn(name, t.data(), t.size());
}
template <class LN, class Fn>
void visit_norm(const std::string &prefix, LN &p, Fn &fn) {
    visit(prefix + ".gain", p.gain, fn);
    visit(prefix + ".bias", p.bias, fn);
}
template <class A, class Fn>
void visit_attention(const std::string &prefix, A &p, Fn &fn) {
    visit(prefix + ".wq", p.wq, fn);
    visit(prefix + ".bq", p.bq, fn);
    visit(prefix + ".wk", p.wk, fn);
    visit(prefix + ".bk", p.bk, fn);
    visit(prefix + ".wv", p.wv, fn);
    visit(prefix + ".bv", p.bv, fn);
    visit(prefix + ".wo", p.wo, fn);
    visit(prefix + ".bo", p.bo, fn);
}
template <class F, class Fn>
void visit_ffn(const std::string &prefix, F &p, Fn &fn) {
    visit(prefix + ".w1", p.w1, fn);
    visit(prefix + ".b1", p.b1, fn);
    visit(prefix + ".w2", p.w2, fn);
    visit(prefix + ".b2", p.b2, fn);
}
} // namespace detail

// Calls fn(name, data pointer, element count) for every tensor in a fixed order.
template <class P, class Fn>
void for_each_tensor(P &params, Fn &&fn) {
    using namespace detail;
    visit("token_embedding", params.token_embedding, fn);
    visit("encoder_positions", params.encoder_positions, fn);
    visit("decoder_positions", params.decoder_positions, fn);
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        const auto p = "encoder." + std::to_string(l);
        auto &layer = params.encoder[l];
        visit_norm(p + ".attn_norm", layer.attn_norm, fn);
        visit_attention(p + ".self_attn", layer.self_attn, fn);
        visit_norm(p + ".ffn_norm", layer.ffn_norm, fn);
        visit_ffn(p + ".ffn", layer.ffn, fn);
    }
    visit_norm("encoder_norm", params.encoder_norm, fn);
    for (std::size_t l = 0; l < params.decoder.size(); ++l) {
        const auto p = "decoder." + std::to_string(l);
        auto &layer = params.decoder[l];
        visit_norm(p + ".self_norm", layer.self_norm, fn);
        visit_attention(p + ".self_attn", layer.self_attn, fn);
        visit_norm(p + ".cross_norm", layer.cross_norm, fn);
        visit_attention(p + ".cross_attn", layer.cross_attn, fn);
        visit_norm(p + ".ffn_norm", layer.ffn_norm, fn);
        visit_ffn(p + ".ffn", layer.ffn, fn);
    }
    visit_norm("decoder_norm", params.decoder_norm, fn);
}

std::size_t parameter_count(const Parameters &params);

struct Seq2SeqModel {
    ModelConfig config;
    Parameters params;
};

// Deterministic per config.seed. Weights are Xavier-uniform, embeddings
// uniform with variance 1/dim, norms at gain 1 / bias 0. Every value is
// representable as a 32-bit float so checkpoints round-trip exactly.
Seq2SeqModel init_model(const ModelConfig &config);

// One training or evaluation example in token ids. decoder_target normally
// ends with eos; the decoder input is bos followed by decoder_target minus
// its last token.
struct Example {
    std::vector<int> encoder;
    std::vector<int> decoder_target;
};

struct Batch {
    std::vector<std::vector<int>> encoder_inputs;  // padded with pad_id
    std::vector<std::vector<int>> decoder_inputs;  // bos + targets shifted right
    std::vector<std::vector<int>> decoder_targets; // padded with pad_id
    std::vector<std::size_t> encoder_lengths;
    std::vector<std::size_t> decoder_lengths;

    // Widths default to the longest row.
    static Batch from_examples(const std::vector<Example> &examples, std::size_t encoder_width = 0,
                               std::size_t decoder_width = 0);
    std::size_t size() const { return encoder_inputs.size(); }
    std::size_t target_tokens() const;
};

// Per batch row, a (decoder length)×V matrix of log-probabilities. Padded
// positions are not represented.
using LogProbs = std::vector<Matrix>;

LogProbs forward(const Seq2SeqModel &model, const Batch &batch, bool train_mode, Rng &rng);

// (1-ε)·NLL(target) + ε·mean_v NLL(v), averaged over non-pad target positions.
double loss(const LogProbs &logprobs, const Batch &batch, double label_smoothing);

struct LossAndGradients {
    double loss = 0.0;
    Parameters gradients;
};

LossAndGradients compute_gradients(const Seq2SeqModel &model, const Batch &batch, double label_smoothing,
                                   bool train_mode, Rng &rng);

struct OptimState {
    Parameters first_moment;
    Parameters second_moment;
    std::int64_t step = 0;
    std::int64_t warmup_steps = 1;
    double peak_lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-8;

    static OptimState create(const ModelConfig &config, std::int64_t warmup_steps, double peak_lr);
};

// Linear warmup to peak_lr at warmup_steps, then inverse square root decay.
double learning_rate(std::int64_t step, std::int64_t warmup_steps, double peak_lr);

enum class Objective { generation, restore };
std::string_view to_string(Objective objective);

struct StepResult {
    double loss = 0.0;
    double lr = 0.0;
};

// One Adam update. Parameters are rounded to float32 after the update.
StepResult train_step(Seq2SeqModel &model, const Batch &batch, OptimState &optim, Objective objective,
                      double label_smoothing, Rng &rng);

struct DecodeOptions {
    int beam = 5;
    int max_len = 64;           // generated tokens, excluding the forced prefix and eos
    double length_penalty = 1.0; // score / length^penalty
    std::vector<int> forced_prefix; // emitted after bos before search starts, e.g. a target tag
};

struct DecodeResult {
    std::vector<int> tokens; // generated tokens after the forced prefix, without eos
    bool finished = false;   // ended with eos
    double log_prob = 0.0;   // sum over generated tokens including eos
    double score = 0.0;      // length-normalized log_prob
};

DecodeResult decode(const Seq2SeqModel &model, const std::vector<int> &encoder_input, const DecodeOptions &options);

// Log-probability of a fixed continuation under the model; used to score hypotheses.
double sequence_log_prob(const Seq2SeqModel &model, const std::vector<int> &encoder_input,
                         const std::vector<int> &decoder_target);

// Final decoder hidden state (after the last layer norm, before projection)
// at the last position of decoder_input.
Vector decoder_final_state(const Seq2SeqModel &model, const std::vector<int> &encoder_input,
                           const std::vector<int> &decoder_input);

// Sentence representation: the tokens (ids, without tag) are fed as encoder
// input tokens + [tag] and as teacher-forced decoder input bos [tag] tokens;
// the result is decoder_final_state at the last position. Sentences longer
// than max_len - 2 are truncated with a warning.
Vector sentence_embedding(const Seq2SeqModel &model, const std::vector<int> &tokens, int tag_id);
std::vector<Vector> sentence_embeddings(const Seq2SeqModel &model, const std::vector<std::vector<int>> &sentences,
                                        int tag_id);

void save_checkpoint(const Seq2SeqModel &model, const std::filesystem::path &path);
Seq2SeqModel load_checkpoint(const std::filesystem::path &path);

} // namespace csrlab::seq2seq
