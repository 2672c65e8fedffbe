#pragma once

// Forward/backward kernels for the transformer blocks. Sequences from one
// batch are stacked row-wise; a Segment marks one sequence's rows.

#include "csrlab/rng.hpp"
#include "csrlab/seq2seq.hpp"

#include <vector>

namespace csrlab::seq2seq::kernels {

struct Segment {
    Eigen::Index offset = 0;
    Eigen::Index length = 0;
};

struct NormCache {
    Matrix xhat;
    Vector inv_std;
};

Matrix norm_forward(const Matrix &x, const LayerNormParams &p, NormCache &cache);
Matrix norm_backward(const Matrix &dy, const LayerNormParams &p, const NormCache &cache, LayerNormParams &grad);

struct AttentionCache {
    Matrix q_in, kv_in, q, k, v, context;
    std::vector<Matrix> probs; // segment-major, then head
};

// Query segment i attends to key segment i. Causal masking requires equal
// query and key segments.
Matrix attention_forward(const Matrix &q_in, const std::vector<Segment> &q_segments, const Matrix &kv_in,
                         const std::vector<Segment> &kv_segments, const AttentionParams &p, int heads, bool causal,
                         AttentionCache &cache);
void attention_backward(const Matrix &dout, const std::vector<Segment> &q_segments,
                        const std::vector<Segment> &kv_segments, const AttentionParams &p, int heads,
                        const AttentionCache &cache, AttentionParams &grad, Matrix &dq_in, Matrix &dkv_in);

struct FfnCache {
    Matrix x, pre;
};

Matrix ffn_forward(const Matrix &x, const FeedForwardParams &p, FfnCache &cache);
Matrix ffn_backward(const Matrix &dout, const FeedForwardParams &p, const FfnCache &cache, FeedForwardParams &grad);

// Inverted dropout mask; empty when dropout is inactive.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, bool active, Rng &rng);
inline Matrix apply_mask(const Matrix &x, const Matrix &mask) { return mask.size() ? Matrix(x.cwiseProduct(mask)) : x; }

Matrix log_softmax_rows(const Matrix &logits);

} // namespace csrlab::seq2seq::kernels
