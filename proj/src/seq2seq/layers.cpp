#include "layers.hpp"

#include <cmath>
#include <limits>

namespace csrlab::seq2seq::kernels {

namespace {
constexpr double kNormEpsilon = 1e-5;
}

Matrix norm_forward(const Matrix &x, const LayerNormParams &p, NormCache &cache) {
    const Eigen::Index n = x.rows();
    cache.xhat.resize(n, x.cols());
    cache.inv_std.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mean = x.row(r).mean();
        const RowVector centered = x.row(r).array() - mean;
        const double var = centered.squaredNorm() / static_cast<double>(x.cols());
        const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
        cache.inv_std(r) = inv;
        cache.xhat.row(r) = centered * inv;
    }
    Matrix y = cache.xhat.array().rowwise() * p.gain.array();
    y.rowwise() += p.bias;
    return y;
}

Matrix norm_backward(const Matrix &dy, const LayerNormParams &p, const NormCache &cache, LayerNormParams &grad) {
    grad.gain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    grad.bias += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * p.gain.array();
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).dot(cache.xhat.row(r)) / static_cast<double>(dy.cols());
        dx.row(r) = cache.inv_std(r) * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2).matrix();
    }
    return dx;
}

Matrix attention_forward(const Matrix &q_in, const std::vector<Segment> &q_segments, const Matrix &kv_in,
                         const std::vector<Segment> &kv_segments, const AttentionParams &p, int heads, bool causal,
                         AttentionCache &cache) {
    cache.q_in = q_in;
    cache.kv_in = kv_in;
    cache.q.noalias() = q_in * p.wq;
    cache.q.rowwise() += p.bq;
    cache.k.noalias() = kv_in * p.wk;
    cache.k.rowwise() += p.bk;
    cache.v.noalias() = kv_in * p.wv;
    cache.v.rowwise() += p.bv;

    const Eigen::Index d = p.wq.cols();
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    cache.context = Matrix::Zero(q_in.rows(), d);
    cache.probs.assign(q_segments.size() * static_cast<std::size_t>(heads), Matrix());
    for (std::size_t s = 0; s < q_segments.size(); ++s) {
        const auto qs = q_segments[s];
        const auto ks = kv_segments[s];
        for (int h = 0; h < heads; ++h) {
            const auto col = h * dh;
            Matrix scores = cache.q.block(qs.offset, col, qs.length, dh) *
                            cache.k.block(ks.offset, col, ks.length, dh).transpose() * scale;
            for (Eigen::Index i = 0; i < scores.rows(); ++i) {
                if (causal)
                    for (Eigen::Index j = i + 1; j < scores.cols(); ++j)
                        scores(i, j) = -std::numeric_limits<double>::infinity();
                const double mx = scores.row(i).maxCoeff();
                scores.row(i) = (scores.row(i).array() - mx).exp();
                scores.row(i) /= scores.row(i).sum();
            }
            cache.context.block(qs.offset, col, qs.length, dh).noalias() =
                scores * cache.v.block(ks.offset, col, ks.length, dh);
            cache.probs[s * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)] = std::move(scores);
        }
    }
    Matrix out = cache.context * p.wo;
    out.rowwise() += p.bo;
    return out;
}

void attention_backward(const Matrix &dout, const std::vector<Segment> &q_segments,
                        const std::vector<Segment> &kv_segments, const AttentionParams &p, int heads,
                        const AttentionCache &cache, AttentionParams &grad, Matrix &dq_in, Matrix &dkv_in) {
    grad.wo.noalias() += cache.context.transpose() * dout;
    grad.bo += dout.colwise().sum();
    const Matrix dctx = dout * p.wo.transpose();

    const Eigen::Index d = p.wq.cols();
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix dq = Matrix::Zero(cache.q.rows(), d);
    Matrix dk = Matrix::Zero(cache.k.rows(), d);
    Matrix dv = Matrix::Zero(cache.v.rows(), d);
    for (std::size_t s = 0; s < q_segments.size(); ++s) {
        const auto qs = q_segments[s];
        const auto ks = kv_segments[s];
        for (int h = 0; h < heads; ++h) {
            const auto col = h * dh;
            const Matrix &probs = cache.probs[s * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
            const auto dc = dctx.block(qs.offset, col, qs.length, dh);
            dv.block(ks.offset, col, ks.length, dh).noalias() += probs.transpose() * dc;
            const Matrix dp = dc * cache.v.block(ks.offset, col, ks.length, dh).transpose();
            Matrix ds = probs.cwiseProduct(dp);
            const Vector rowdot = ds.rowwise().sum();
            ds = (probs.array().colwise() * rowdot.array()).matrix() * -1.0 + ds;
            ds *= scale;
            dq.block(qs.offset, col, qs.length, dh).noalias() += ds * cache.k.block(ks.offset, col, ks.length, dh);
            dk.block(ks.offset, col, ks.length, dh).noalias() +=
                ds.transpose() * cache.q.block(qs.offset, col, qs.length, dh);
        }
    }
    grad.wq.noalias() += cache.q_in.transpose() * dq;
    grad.bq += dq.colwise().sum();
    grad.wk.noalias() += cache.kv_in.transpose() * dk;
    grad.bk += dk.colwise().sum();
    grad.wv.noalias() += cache.kv_in.transpose() * dv;
    grad.bv += dv.colwise().sum();
    dq_in.noalias() = dq * p.wq.transpose();
    dkv_in.noalias() = dk * p.wk.transpose();
    dkv_in.noalias() += dv * p.wv.transpose();
}

Matrix ffn_forward(const Matrix &x, const FeedForwardParams &p, FfnCache &cache) {
    cache.x = x;
    cache.pre.noalias() = x * p.w1;
    cache.pre.rowwise() += p.b1;
    Matrix out = cache.pre.cwiseMax(0.0) * p.w2;
    out.rowwise() += p.b2;
    return out;
}

Matrix ffn_backward(const Matrix &dout, const FeedForwardParams &p, const FfnCache &cache, FeedForwardParams &grad) {
    const Matrix hidden = cache.pre.cwiseMax(0.0);
    grad.w2.noalias() += hidden.transpose() * dout;
    grad.b2 += dout.colwise().sum();
    Matrix dpre = dout * p.w2.transpose();
    dpre = dpre.cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
    grad.w1.noalias() += cache.x.transpose() * dpre;
    grad.b1 += dpre.colwise().sum();
    return dpre * p.w1.transpose();
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, bool active, Rng &rng) {
    if (!active || p <= 0.0) return {};
    Matrix mask(rows, cols);
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : keep;
    return mask;
}

Matrix log_softmax_rows(const Matrix &logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
        out.row(r) = logits.row(r).array() - lse;
    }
    return out;
}

} // namespace csrlab::seq2seq::kernels
