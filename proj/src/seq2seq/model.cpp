#include "csrlab/seq2seq.hpp"

#include "csrlab/error.hpp"
#include "csrlab/log.hpp"
#include "layers.hpp"

#include <algorithm>
#include <cmath>

namespace csrlab::seq2seq {

using kernels::Segment;

void ModelConfig::validate() const {
    if (vocab_size < 1 || dim < 1 || layers < 1 || heads < 1 || ffn_dim < 1 || max_len < 1)
        throw Error(ErrorKind::parameter, "model sizes must be positive");
    if (dim % heads != 0)
        throw Error(ErrorKind::parameter,
                    "dim " + std::to_string(dim) + " is not divisible by heads " + std::to_string(heads));
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::parameter, "dropout must lie in [0, 1)");
}

namespace {

LayerNormParams norm_zeros(int d) { return {RowVector::Zero(d), RowVector::Zero(d)}; }

AttentionParams attention_zeros(int d) {
    return {Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d),
            RowVector::Zero(d), RowVector::Zero(d), RowVector::Zero(d), RowVector::Zero(d)};
}

FeedForwardParams ffn_zeros(int d, int f) {
    return {Matrix::Zero(d, f), RowVector::Zero(f), Matrix::Zero(f, d), RowVector::Zero(d)};
}

double to_float_precision(double x) { return static_cast<double>(static_cast<float>(x)); }

} // namespace

Parameters Parameters::zeros(const ModelConfig &c) {
    Parameters p;
    p.token_embedding = Matrix::Zero(c.vocab_size, c.dim);
    p.encoder_positions = Matrix::Zero(c.max_len, c.dim);
    p.decoder_positions = Matrix::Zero(c.max_len, c.dim);
    for (int l = 0; l < c.layers; ++l) {
        p.encoder.push_back({norm_zeros(c.dim), attention_zeros(c.dim), norm_zeros(c.dim), ffn_zeros(c.dim, c.ffn_dim)});
        p.decoder.push_back({norm_zeros(c.dim), attention_zeros(c.dim), norm_zeros(c.dim), attention_zeros(c.dim),
                             norm_zeros(c.dim), ffn_zeros(c.dim, c.ffn_dim)});
    }
    p.encoder_norm = norm_zeros(c.dim);
    p.decoder_norm = norm_zeros(c.dim);
    return p;
}

std::size_t parameter_count(const Parameters &params) {
    std::size_t n = 0;
    for_each_tensor(params, [&](const std::string &, const double *, Eigen::Index size) {
        n += static_cast<std::size_t>(size);
    });
    return n;
}

Seq2SeqModel init_model(const ModelConfig &config) {
    config.validate();
    Seq2SeqModel model{config, Parameters::zeros(config)};
    Rng rng(config.seed);
    auto fill = [&rng](Matrix &m, double bound) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = to_float_precision((2.0 * rng.uniform() - 1.0) * bound);
    };
    auto xavier = [&fill](Matrix &m) { fill(m, std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()))); };
    auto unit_norm = [](LayerNormParams &n) { n.gain.setOnes(); };
    auto attention = [&xavier](AttentionParams &a) {
        xavier(a.wq);
        xavier(a.wk);
        xavier(a.wv);
        xavier(a.wo);
    };
    auto &p = model.params;
    const double embed_bound = std::sqrt(3.0 / config.dim);
    fill(p.token_embedding, embed_bound);
    fill(p.encoder_positions, embed_bound);
    fill(p.decoder_positions, embed_bound);
    for (auto &layer : p.encoder) {
        unit_norm(layer.attn_norm);
        attention(layer.self_attn);
        unit_norm(layer.ffn_norm);
        xavier(layer.ffn.w1);
        xavier(layer.ffn.w2);
    }
    for (auto &layer : p.decoder) {
        unit_norm(layer.self_norm);
        attention(layer.self_attn);
        unit_norm(layer.cross_norm);
        attention(layer.cross_attn);
        unit_norm(layer.ffn_norm);
        xavier(layer.ffn.w1);
        xavier(layer.ffn.w2);
    }
    unit_norm(p.encoder_norm);
    unit_norm(p.decoder_norm);
    return model;
}

Batch Batch::from_examples(const std::vector<Example> &examples, std::size_t encoder_width,
                           std::size_t decoder_width) {
    Batch b;
    for (const auto &e : examples) {
        encoder_width = std::max(encoder_width, e.encoder.size());
        decoder_width = std::max(decoder_width, e.decoder_target.size());
    }
    for (const auto &e : examples) {
        auto enc = e.encoder;
        enc.resize(encoder_width, corpus::Vocabulary::pad_id);
        std::vector<int> dec_in{corpus::Vocabulary::bos_id};
        if (!e.decoder_target.empty())
            dec_in.insert(dec_in.end(), e.decoder_target.begin(), e.decoder_target.end() - 1);
        dec_in.resize(decoder_width, corpus::Vocabulary::pad_id);
        auto dec_out = e.decoder_target;
        dec_out.resize(decoder_width, corpus::Vocabulary::pad_id);
        b.encoder_inputs.push_back(std::move(enc));
        b.decoder_inputs.push_back(std::move(dec_in));
        b.decoder_targets.push_back(std::move(dec_out));
        b.encoder_lengths.push_back(e.encoder.size());
        b.decoder_lengths.push_back(e.decoder_target.size());
    }
    return b;
}

std::size_t Batch::target_tokens() const {
    std::size_t n = 0;
    for (auto l : decoder_lengths) n += l;
    return n;
}

namespace {

struct EncoderLayerCache {
    kernels::NormCache attn_norm;
    kernels::AttentionCache attn;
    Matrix attn_mask;
    kernels::NormCache ffn_norm;
    kernels::FfnCache ffn;
    Matrix ffn_mask;
};

struct DecoderLayerCache {
    kernels::NormCache self_norm;
    kernels::AttentionCache self_attn;
    Matrix self_mask;
    kernels::NormCache cross_norm;
    kernels::AttentionCache cross_attn;
    Matrix cross_mask;
    kernels::NormCache ffn_norm;
    kernels::FfnCache ffn;
    Matrix ffn_mask;
};

struct Pass {
    std::vector<Segment> enc_segments, dec_segments;
    std::vector<int> enc_tokens, dec_tokens, enc_positions, dec_positions;
    Matrix enc_embed_mask, dec_embed_mask;
    std::vector<EncoderLayerCache> enc;
    kernels::NormCache enc_norm;
    Matrix enc_out;
    std::vector<DecoderLayerCache> dec;
    kernels::NormCache dec_norm;
    Matrix hidden;
};

void check_row(const std::vector<int> &row, std::size_t length, const ModelConfig &c, const char *what) {
    if (length == 0) throw Error(ErrorKind::parameter, std::string("empty ") + what + " sequence");
    if (length > static_cast<std::size_t>(c.max_len))
        throw Error(ErrorKind::index, std::string(what) + " length " + std::to_string(length) + " exceeds max_len " +
                                          std::to_string(c.max_len));
    for (std::size_t i = 0; i < length; ++i)
        if (row[i] < 0 || row[i] >= c.vocab_size)
            throw Error(ErrorKind::index, "token id " + std::to_string(row[i]) + " out of range");
}

Matrix embed(const Parameters &p, const Matrix &positions, const std::vector<int> &tokens,
             const std::vector<int> &pos, double scale) {
    Matrix x(static_cast<Eigen::Index>(tokens.size()), p.token_embedding.cols());
    for (std::size_t i = 0; i < tokens.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) = scale * p.token_embedding.row(tokens[i]) + positions.row(pos[i]);
    return x;
}

void stack_rows(const std::vector<std::vector<int>> &rows, const std::vector<std::size_t> &lengths,
                std::vector<Segment> &segments, std::vector<int> &tokens, std::vector<int> &positions) {
    Eigen::Index offset = 0;
    for (std::size_t b = 0; b < rows.size(); ++b) {
        segments.push_back({offset, static_cast<Eigen::Index>(lengths[b])});
        for (std::size_t i = 0; i < lengths[b]; ++i) {
            tokens.push_back(rows[b][i]);
            positions.push_back(static_cast<int>(i));
        }
        offset += static_cast<Eigen::Index>(lengths[b]);
    }
}

void run_encoder(const Seq2SeqModel &m, Pass &pass, bool train, Rng &rng) {
    const auto &c = m.config;
    const auto &p = m.params;
    Matrix x = embed(p, p.encoder_positions, pass.enc_tokens, pass.enc_positions, std::sqrt(static_cast<double>(c.dim)));
    pass.enc_embed_mask = kernels::dropout_mask(x.rows(), x.cols(), c.dropout, train, rng);
    x = kernels::apply_mask(x, pass.enc_embed_mask);
    pass.enc.resize(p.encoder.size());
    for (std::size_t l = 0; l < p.encoder.size(); ++l) {
        auto &lc = pass.enc[l];
        const auto &lp = p.encoder[l];
        const Matrix a = kernels::norm_forward(x, lp.attn_norm, lc.attn_norm);
        Matrix att = kernels::attention_forward(a, pass.enc_segments, a, pass.enc_segments, lp.self_attn, c.heads,
                                                false, lc.attn);
        lc.attn_mask = kernels::dropout_mask(att.rows(), att.cols(), c.dropout, train, rng);
        x += kernels::apply_mask(att, lc.attn_mask);
        const Matrix b = kernels::norm_forward(x, lp.ffn_norm, lc.ffn_norm);
        Matrix f = kernels::ffn_forward(b, lp.ffn, lc.ffn);
        lc.ffn_mask = kernels::dropout_mask(f.rows(), f.cols(), c.dropout, train, rng);
        x += kernels::apply_mask(f, lc.ffn_mask);
    }
    pass.enc_out = kernels::norm_forward(x, p.encoder_norm, pass.enc_norm);
}

void run_decoder(const Seq2SeqModel &m, Pass &pass, bool train, Rng &rng) {
    const auto &c = m.config;
    const auto &p = m.params;
    Matrix y = embed(p, p.decoder_positions, pass.dec_tokens, pass.dec_positions, std::sqrt(static_cast<double>(c.dim)));
    pass.dec_embed_mask = kernels::dropout_mask(y.rows(), y.cols(), c.dropout, train, rng);
    y = kernels::apply_mask(y, pass.dec_embed_mask);
    pass.dec.resize(p.decoder.size());
    for (std::size_t l = 0; l < p.decoder.size(); ++l) {
        auto &lc = pass.dec[l];
        const auto &lp = p.decoder[l];
        const Matrix a = kernels::norm_forward(y, lp.self_norm, lc.self_norm);
        Matrix sa = kernels::attention_forward(a, pass.dec_segments, a, pass.dec_segments, lp.self_attn, c.heads, true,
                                               lc.self_attn);
        lc.self_mask = kernels::dropout_mask(sa.rows(), sa.cols(), c.dropout, train, rng);
        y += kernels::apply_mask(sa, lc.self_mask);
        const Matrix q = kernels::norm_forward(y, lp.cross_norm, lc.cross_norm);
        Matrix ca = kernels::attention_forward(q, pass.dec_segments, pass.enc_out, pass.enc_segments, lp.cross_attn,
                                               c.heads, false, lc.cross_attn);
        lc.cross_mask = kernels::dropout_mask(ca.rows(), ca.cols(), c.dropout, train, rng);
        y += kernels::apply_mask(ca, lc.cross_mask);
        const Matrix b = kernels::norm_forward(y, lp.ffn_norm, lc.ffn_norm);
        Matrix f = kernels::ffn_forward(b, lp.ffn, lc.ffn);
        lc.ffn_mask = kernels::dropout_mask(f.rows(), f.cols(), c.dropout, train, rng);
        y += kernels::apply_mask(f, lc.ffn_mask);
    }
    pass.hidden = kernels::norm_forward(y, p.decoder_norm, pass.dec_norm);
}

Pass run_batch(const Seq2SeqModel &m, const Batch &batch, bool train, Rng &rng) {
    if (batch.size() == 0) throw Error(ErrorKind::degenerate_batch, "empty batch");
    for (std::size_t b = 0; b < batch.size(); ++b) {
        check_row(batch.encoder_inputs[b], batch.encoder_lengths[b], m.config, "encoder");
        check_row(batch.decoder_inputs[b], batch.decoder_lengths[b], m.config, "decoder");
        for (std::size_t i = 0; i < batch.decoder_lengths[b]; ++i)
            if (batch.decoder_targets[b][i] < 0 || batch.decoder_targets[b][i] >= m.config.vocab_size)
                throw Error(ErrorKind::index, "target id out of range");
    }
    Pass pass;
    stack_rows(batch.encoder_inputs, batch.encoder_lengths, pass.enc_segments, pass.enc_tokens, pass.enc_positions);
    stack_rows(batch.decoder_inputs, batch.decoder_lengths, pass.dec_segments, pass.dec_tokens, pass.dec_positions);
    run_encoder(m, pass, train, rng);
    run_decoder(m, pass, train, rng);
    return pass;
}

void add_residual_branch_grad(Matrix &dx, const Matrix &branch_grad) { dx += branch_grad; }

void run_backward(const Seq2SeqModel &m, const Pass &pass, const Matrix &dlogits, Parameters &g) {
    const auto &c = m.config;
    const auto &p = m.params;
    const double scale = std::sqrt(static_cast<double>(c.dim));

    g.token_embedding.noalias() += dlogits.transpose() * pass.hidden;
    Matrix dh = dlogits * p.token_embedding;
    Matrix dy = kernels::norm_backward(dh, p.decoder_norm, pass.dec_norm, g.decoder_norm);
    Matrix denc = Matrix::Zero(pass.enc_out.rows(), pass.enc_out.cols());
    Matrix dq, dkv;
    for (std::size_t li = p.decoder.size(); li-- > 0;) {
        const auto &lc = pass.dec[li];
        const auto &lp = p.decoder[li];
        auto &lg = g.decoder[li];

        Matrix df = kernels::apply_mask(dy, lc.ffn_mask);
        Matrix db = kernels::ffn_backward(df, lp.ffn, lc.ffn, lg.ffn);
        add_residual_branch_grad(dy, kernels::norm_backward(db, lp.ffn_norm, lc.ffn_norm, lg.ffn_norm));

        Matrix dca = kernels::apply_mask(dy, lc.cross_mask);
        kernels::attention_backward(dca, pass.dec_segments, pass.enc_segments, lp.cross_attn, c.heads, lc.cross_attn,
                                    lg.cross_attn, dq, dkv);
        denc += dkv;
        add_residual_branch_grad(dy, kernels::norm_backward(dq, lp.cross_norm, lc.cross_norm, lg.cross_norm));

        Matrix dsa = kernels::apply_mask(dy, lc.self_mask);
        kernels::attention_backward(dsa, pass.dec_segments, pass.dec_segments, lp.self_attn, c.heads, lc.self_attn,
                                    lg.self_attn, dq, dkv);
        dq += dkv;
        add_residual_branch_grad(dy, kernels::norm_backward(dq, lp.self_norm, lc.self_norm, lg.self_norm));
    }
    Matrix dy0 = kernels::apply_mask(dy, pass.dec_embed_mask);
    for (std::size_t i = 0; i < pass.dec_tokens.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        g.token_embedding.row(pass.dec_tokens[i]) += scale * dy0.row(r);
        g.decoder_positions.row(pass.dec_positions[i]) += dy0.row(r);
    }

    Matrix dx = kernels::norm_backward(denc, p.encoder_norm, pass.enc_norm, g.encoder_norm);
    for (std::size_t li = p.encoder.size(); li-- > 0;) {
        const auto &lc = pass.enc[li];
        const auto &lp = p.encoder[li];
        auto &lg = g.encoder[li];

        Matrix df = kernels::apply_mask(dx, lc.ffn_mask);
        Matrix db = kernels::ffn_backward(df, lp.ffn, lc.ffn, lg.ffn);
        add_residual_branch_grad(dx, kernels::norm_backward(db, lp.ffn_norm, lc.ffn_norm, lg.ffn_norm));

        Matrix dat = kernels::apply_mask(dx, lc.attn_mask);
        kernels::attention_backward(dat, pass.enc_segments, pass.enc_segments, lp.self_attn, c.heads, lc.attn,
                                    lg.self_attn, dq, dkv);
        dq += dkv;
        add_residual_branch_grad(dx, kernels::norm_backward(dq, lp.attn_norm, lc.attn_norm, lg.attn_norm));
    }
    Matrix dx0 = kernels::apply_mask(dx, pass.enc_embed_mask);
    for (std::size_t i = 0; i < pass.enc_tokens.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        g.token_embedding.row(pass.enc_tokens[i]) += scale * dx0.row(r);
        g.encoder_positions.row(pass.enc_positions[i]) += dx0.row(r);
    }
}

Matrix stacked_log_probs(const Seq2SeqModel &m, const Pass &pass) {
    return kernels::log_softmax_rows(pass.hidden * m.params.token_embedding.transpose());
}

std::vector<int> stacked_targets(const Batch &batch) {
    std::vector<int> t;
    for (std::size_t b = 0; b < batch.size(); ++b)
        t.insert(t.end(), batch.decoder_targets[b].begin(),
                 batch.decoder_targets[b].begin() + static_cast<std::ptrdiff_t>(batch.decoder_lengths[b]));
    return t;
}

double smoothed_nll(const Matrix &lp, const std::vector<int> &targets, double eps) {
    if (targets.empty()) throw Error(ErrorKind::degenerate_batch, "batch has no target tokens");
    double total = 0.0;
    const double v = static_cast<double>(lp.cols());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        total += (1.0 - eps) * -lp(r, targets[i]) + eps * -lp.row(r).sum() / v;
    }
    return total / static_cast<double>(targets.size());
}

} // namespace

LogProbs forward(const Seq2SeqModel &model, const Batch &batch, bool train_mode, Rng &rng) {
    const Pass pass = run_batch(model, batch, train_mode, rng);
    const Matrix lp = stacked_log_probs(model, pass);
    LogProbs out;
    for (const auto &s : pass.dec_segments) out.emplace_back(lp.middleRows(s.offset, s.length));
    return out;
}

double loss(const LogProbs &logprobs, const Batch &batch, double label_smoothing) {
    if (logprobs.size() != batch.size()) throw Error(ErrorKind::parameter, "log-prob grid does not match batch");
    if (batch.target_tokens() == 0) throw Error(ErrorKind::degenerate_batch, "batch has no target tokens");
    Eigen::Index rows = 0;
    for (const auto &m : logprobs) rows += m.rows();
    if (rows != static_cast<Eigen::Index>(batch.target_tokens()))
        throw Error(ErrorKind::parameter, "log-prob grid does not match batch lengths");
    Matrix stacked(rows, logprobs.front().cols());
    Eigen::Index offset = 0;
    for (const auto &m : logprobs) {
        stacked.middleRows(offset, m.rows()) = m;
        offset += m.rows();
    }
    return smoothed_nll(stacked, stacked_targets(batch), label_smoothing);
}

LossAndGradients compute_gradients(const Seq2SeqModel &model, const Batch &batch, double label_smoothing,
                                   bool train_mode, Rng &rng) {
    if (batch.target_tokens() == 0) throw Error(ErrorKind::degenerate_batch, "batch has no target tokens");
    const Pass pass = run_batch(model, batch, train_mode, rng);
    const Matrix lp = stacked_log_probs(model, pass);
    const auto targets = stacked_targets(batch);
    LossAndGradients out{smoothed_nll(lp, targets, label_smoothing), Parameters::zeros(model.config)};

    const double n = static_cast<double>(targets.size());
    const double uniform = label_smoothing / static_cast<double>(lp.cols());
    Matrix dlogits = lp.array().exp();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        dlogits.row(r).array() -= uniform;
        dlogits(r, targets[i]) -= 1.0 - label_smoothing;
    }
    dlogits /= n;
    run_backward(model, pass, dlogits, out.gradients);
    return out;
}

OptimState OptimState::create(const ModelConfig &config, std::int64_t warmup_steps, double peak_lr) {
    if (warmup_steps < 1 || !(peak_lr > 0.0)) throw Error(ErrorKind::parameter, "bad optimizer schedule");
    OptimState s;
    s.first_moment = Parameters::zeros(config);
    s.second_moment = Parameters::zeros(config);
    s.warmup_steps = warmup_steps;
    s.peak_lr = peak_lr;
    return s;
}

double learning_rate(std::int64_t step, std::int64_t warmup_steps, double peak_lr) {
    if (step <= 0) return 0.0;
    if (step <= warmup_steps) return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    return peak_lr * std::sqrt(static_cast<double>(warmup_steps) / static_cast<double>(step));
}

std::string_view to_string(Objective objective) {
    return objective == Objective::generation ? "generation" : "restore";
}

StepResult train_step(Seq2SeqModel &model, const Batch &batch, OptimState &optim, Objective,
                      double label_smoothing, Rng &rng) {
    auto [value, grads] = compute_gradients(model, batch, label_smoothing, true, rng);
    if (!std::isfinite(value))
        throw Error(ErrorKind::divergence, "non-finite loss at step " + std::to_string(optim.step + 1));

    optim.step += 1;
    const double lr = learning_rate(optim.step, optim.warmup_steps, optim.peak_lr);
    const double bc1 = 1.0 - std::pow(optim.beta1, static_cast<double>(optim.step));
    const double bc2 = 1.0 - std::pow(optim.beta2, static_cast<double>(optim.step));

    std::vector<double *> params, m1, m2;
    std::vector<const double *> gs;
    std::vector<Eigen::Index> sizes;
    for_each_tensor(model.params, [&](const std::string &, double *d, Eigen::Index n) {
        params.push_back(d);
        sizes.push_back(n);
    });
    for_each_tensor(optim.first_moment, [&](const std::string &, double *d, Eigen::Index) { m1.push_back(d); });
    for_each_tensor(optim.second_moment, [&](const std::string &, double *d, Eigen::Index) { m2.push_back(d); });
    for_each_tensor(std::as_const(grads), [&](const std::string &, const double *d, Eigen::Index) { gs.push_back(d); });

    for (std::size_t t = 0; t < params.size(); ++t) {
        for (Eigen::Index i = 0; i < sizes[t]; ++i) {
            const double g = gs[t][i];
            if (!std::isfinite(g)) throw Error(ErrorKind::divergence, "non-finite gradient");
            m1[t][i] = optim.beta1 * m1[t][i] + (1.0 - optim.beta1) * g;
            m2[t][i] = optim.beta2 * m2[t][i] + (1.0 - optim.beta2) * g * g;
            const double update = lr * (m1[t][i] / bc1) / (std::sqrt(m2[t][i] / bc2) + optim.epsilon);
            params[t][i] = to_float_precision(params[t][i] - update);
        }
    }
    return {value, lr};
}

Vector decoder_final_state(const Seq2SeqModel &model, const std::vector<int> &encoder_input,
                           const std::vector<int> &decoder_input) {
    Batch b;
    b.encoder_inputs = {encoder_input};
    b.decoder_inputs = {decoder_input};
    b.decoder_targets = {decoder_input};
    b.encoder_lengths = {encoder_input.size()};
    b.decoder_lengths = {decoder_input.size()};
    Rng unused(0);
    const Pass pass = run_batch(model, b, false, unused);
    return pass.hidden.row(pass.hidden.rows() - 1).transpose();
}

std::vector<Vector> sentence_embeddings(const Seq2SeqModel &model, const std::vector<std::vector<int>> &sentences,
                                        int tag_id) {
    const auto limit = static_cast<std::size_t>(std::max(0, model.config.max_len - 2));
    constexpr std::size_t chunk = 64;
    std::vector<Vector> out;
    out.reserve(sentences.size());
    bool truncated = false;
    for (std::size_t begin = 0; begin < sentences.size(); begin += chunk) {
        const std::size_t end = std::min(sentences.size(), begin + chunk);
        Batch b;
        for (std::size_t i = begin; i < end; ++i) {
            std::vector<int> tokens = sentences[i];
            if (tokens.size() > limit) {
                tokens.resize(limit);
                truncated = true;
            }
            std::vector<int> enc = tokens;
            enc.push_back(tag_id);
            std::vector<int> dec{corpus::Vocabulary::bos_id, tag_id};
            dec.insert(dec.end(), tokens.begin(), tokens.end());
            b.encoder_lengths.push_back(enc.size());
            b.decoder_lengths.push_back(dec.size());
            b.encoder_inputs.push_back(std::move(enc));
            b.decoder_targets.push_back(dec);
            b.decoder_inputs.push_back(std::move(dec));
        }
        Rng unused(0);
        const Pass pass = run_batch(model, b, false, unused);
        for (const auto &s : pass.dec_segments) out.emplace_back(pass.hidden.row(s.offset + s.length - 1).transpose());
    }
    if (truncated) log::warn("truncation", "sentence longer than max_len truncated for embedding");
    return out;
}

Vector sentence_embedding(const Seq2SeqModel &model, const std::vector<int> &tokens, int tag_id) {
    return sentence_embeddings(model, {tokens}, tag_id).front();
}

double sequence_log_prob(const Seq2SeqModel &model, const std::vector<int> &encoder_input,
                         const std::vector<int> &decoder_target) {
    const auto batch = Batch::from_examples({{encoder_input, decoder_target}});
    Rng unused(0);
    const auto lp = forward(model, batch, false, unused);
    double total = 0.0;
    for (std::size_t i = 0; i < decoder_target.size(); ++i) total += lp[0](static_cast<Eigen::Index>(i), decoder_target[i]);
    return total;
}

namespace detail_decode {

// Encoder output for one sentence plus a helper to score next tokens.
struct Session {
    const Seq2SeqModel &model;
    Pass base;

    Session(const Seq2SeqModel &m, const std::vector<int> &encoder_input) : model(m) {
        check_row(encoder_input, encoder_input.size(), m.config, "encoder");
        std::vector<std::vector<int>> rows{encoder_input};
        stack_rows(rows, {encoder_input.size()}, base.enc_segments, base.enc_tokens, base.enc_positions);
        Rng unused(0);
        run_encoder(m, base, false, unused);
    }

    RowVector next_log_probs(const std::vector<int> &prefix) const {
        Pass pass;
        pass.enc_segments = base.enc_segments;
        pass.enc_out = base.enc_out;
        std::vector<std::vector<int>> rows{prefix};
        check_row(prefix, prefix.size(), model.config, "decoder");
        stack_rows(rows, {prefix.size()}, pass.dec_segments, pass.dec_tokens, pass.dec_positions);
        Rng unused(0);
        run_decoder(model, pass, false, unused);
        const RowVector logits = pass.hidden.row(pass.hidden.rows() - 1) * model.params.token_embedding.transpose();
        return kernels::log_softmax_rows(logits);
    }
};

} // namespace detail_decode

DecodeResult decode(const Seq2SeqModel &model, const std::vector<int> &encoder_input, const DecodeOptions &options) {
    if (options.beam < 1) throw Error(ErrorKind::parameter, "beam must be at least 1");
    const detail_decode::Session session(model, encoder_input);

    struct Hyp {
        std::vector<int> generated;
        double log_prob = 0.0;
    };
    auto normalized = [&](const Hyp &h) {
        const auto len = static_cast<double>(h.generated.size());
        return len > 0 ? h.log_prob / std::pow(len, options.length_penalty) : h.log_prob;
    };

    std::vector<int> prefix{corpus::Vocabulary::bos_id};
    prefix.insert(prefix.end(), options.forced_prefix.begin(), options.forced_prefix.end());
    // Positions available for generated tokens, including a final eos.
    const int room = model.config.max_len - static_cast<int>(prefix.size()) + 1;
    const int max_generated = std::max(0, std::min(options.max_len, room - 1));

    std::vector<Hyp> active{Hyp{}};
    std::vector<std::pair<Hyp, bool>> finished;
    const auto beam = static_cast<std::size_t>(options.beam);

    for (int step = 0; step <= max_generated && !active.empty() && finished.size() < beam; ++step) {
        struct Candidate {
            std::size_t parent;
            int token;
            double log_prob;
        };
        std::vector<Candidate> cands;
        for (std::size_t h = 0; h < active.size(); ++h) {
            auto full = prefix;
            full.insert(full.end(), active[h].generated.begin(), active[h].generated.end());
            const RowVector lp = session.next_log_probs(full);
            for (Eigen::Index v = 0; v < lp.size(); ++v) {
                const int tok = static_cast<int>(v);
                if (tok == corpus::Vocabulary::pad_id || tok == corpus::Vocabulary::bos_id) continue;
                // Only eos may follow once the length limit is reached.
                if (step == max_generated && tok != corpus::Vocabulary::eos_id) continue;
                cands.push_back({h, tok, active[h].log_prob + lp(v)});
            }
        }
        std::stable_sort(cands.begin(), cands.end(),
                         [](const Candidate &a, const Candidate &b) { return a.log_prob > b.log_prob; });
        std::vector<Hyp> next;
        for (std::size_t r = 0; r < cands.size() && next.size() < beam; ++r) {
            Hyp h{active[cands[r].parent].generated, cands[r].log_prob};
            h.generated.push_back(cands[r].token);
            if (cands[r].token == corpus::Vocabulary::eos_id) {
                if (r < beam) finished.emplace_back(std::move(h), true);
            } else {
                next.push_back(std::move(h));
            }
        }
        active = std::move(next);
    }
    if (finished.empty())
        for (auto &h : active) finished.emplace_back(std::move(h), false);

    std::size_t best = 0;
    for (std::size_t i = 1; i < finished.size(); ++i)
        if (normalized(finished[i].first) > normalized(finished[best].first)) best = i;

    DecodeResult out;
    const auto &[hyp, done] = finished[best];
    out.finished = done;
    out.log_prob = hyp.log_prob;
    out.score = normalized(hyp);
    out.tokens = hyp.generated;
    if (done && !out.tokens.empty()) out.tokens.pop_back();
    return out;
}

} // namespace csrlab::seq2seq
