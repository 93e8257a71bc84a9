#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rsnkg/rng.hpp"
#include "rsnkg/types.hpp"
#include "rsnkg/walker.hpp"

namespace rsnkg {

// The sequence model: one shared embedding table over entities and
// relations, a stack of LSTM cells, and the skipping combination that
// feeds subject-entity embeddings directly into relation-position
// outputs. Templated on the scalar so training runs in float while
// gradient checks run in double.

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ModelVariant : std::uint8_t { Rnn = 0, Rrn = 1, Rsn = 2 };

inline const char* variant_name(ModelVariant v) {
    switch (v) {
        case ModelVariant::Rnn: return "rnn";
        case ModelVariant::Rrn: return "rrn";
        case ModelVariant::Rsn: return "rsn";
    }
    throw InternalError("bad variant");
}

inline ModelVariant variant_from_name(const std::string& name) {
    if (name == "rnn") return ModelVariant::Rnn;
    if (name == "rrn") return ModelVariant::Rrn;
    if (name == "rsn") return ModelVariant::Rsn;
    throw DataError("unknown model variant: " + name);
}

template <typename Scalar>
struct LstmLayer {
    // Gate order within the packed 4d axis: input, forget, candidate, output.
    Mat<Scalar> w_x;   // d x 4d
    Mat<Scalar> w_h;   // d x 4d
    Mat<Scalar> bias;  // 1 x 4d
};

template <typename Scalar>
struct BatchNorm {
    Mat<Scalar> gamma, beta;               // 1 x d, learned
    Mat<Scalar> running_mean, running_var; // 1 x d, tracked with momentum 0.9
};

inline constexpr double kBnMomentum = 0.9;
inline constexpr double kBnEpsilon = 1e-5;

template <typename Scalar>
struct RsnParameters {
    std::uint32_t dim = 0;
    std::uint32_t entity_count = 0;
    std::uint32_t relation_count = 0;
    std::uint32_t layer_count = 0;
    ModelVariant variant = ModelVariant::Rsn;

    // Row layout: entity e at row e, relation r at row entity_count + r.
    Mat<Scalar> embeddings;
    std::vector<LstmLayer<Scalar>> layers;
    Mat<Scalar> s1, s2;  // d x d skip matrices
    BatchNorm<Scalar> bn_in, bn_out;

    std::uint32_t vocab_size() const { return entity_count + relation_count; }

    // Visits every trainable matrix in the fixed documented order; running
    // batch-norm moments are tracked state, not parameters, and are skipped.
    template <typename Fn>
    void for_each_parameter(Fn&& fn) {
        fn("embeddings", embeddings);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            std::string p = "layer" + std::to_string(l);
            fn(p + ".w_x", layers[l].w_x);
            fn(p + ".w_h", layers[l].w_h);
            fn(p + ".bias", layers[l].bias);
        }
        fn("skip.s1", s1);
        fn("skip.s2", s2);
        fn("bn_in.gamma", bn_in.gamma);
        fn("bn_in.beta", bn_in.beta);
        fn("bn_out.gamma", bn_out.gamma);
        fn("bn_out.beta", bn_out.beta);
    }

    template <typename Fn>
    void for_each_parameter(Fn&& fn) const {
        const_cast<RsnParameters*>(this)->for_each_parameter(
            [&fn](const std::string& name, Mat<Scalar>& m) {
                fn(name, static_cast<const Mat<Scalar>&>(m));
            });
    }
};

template <typename Scalar>
RsnParameters<Scalar> init_model(std::uint32_t dim, std::uint32_t layer_count, ModelVariant variant,
                                 std::uint32_t entity_count, std::uint32_t relation_count, Rng& rng) {
    if (dim < 1) throw DataError("embedding dimension must be >= 1");
    if (layer_count < 1) throw DataError("layer count must be >= 1");
    if (entity_count == 0 || relation_count == 0) throw DataError("empty vocabulary");

    RsnParameters<Scalar> p;
    p.dim = dim;
    p.entity_count = entity_count;
    p.relation_count = relation_count;
    p.layer_count = layer_count;
    p.variant = variant;

    auto xavier = [&rng](Mat<Scalar>& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        double bound = std::sqrt(6.0 / double(rows + cols));
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                m(i, j) = static_cast<Scalar>(rng.next_uniform(-bound, bound));
    };

    xavier(p.embeddings, p.vocab_size(), dim);
    p.layers.resize(layer_count);
    for (auto& layer : p.layers) {
        xavier(layer.w_x, dim, 4 * dim);
        xavier(layer.w_h, dim, 4 * dim);
        layer.bias = Mat<Scalar>::Zero(1, 4 * dim);
    }
    xavier(p.s1, dim, dim);
    xavier(p.s2, dim, dim);
    for (BatchNorm<Scalar>* bn : {&p.bn_in, &p.bn_out}) {
        bn->gamma = Mat<Scalar>::Ones(1, dim);
        bn->beta = Mat<Scalar>::Zero(1, dim);
        bn->running_mean = Mat<Scalar>::Zero(1, dim);
        bn->running_var = Mat<Scalar>::Ones(1, dim);
    }
    return p;
}

// Zero-valued clone with the same shapes, used as a gradient accumulator.
template <typename Scalar>
RsnParameters<Scalar> make_gradients(const RsnParameters<Scalar>& params) {
    RsnParameters<Scalar> g = params;
    g.for_each_parameter([](const std::string&, Mat<Scalar>& m) { m.setZero(); });
    g.bn_in.running_mean.setZero();
    g.bn_in.running_var.setZero();
    g.bn_out.running_mean.setZero();
    g.bn_out.running_var.setZero();
    return g;
}

// Eq.-style skipping operation on row vectors: entities pass through
// untouched, relation positions mix the hidden state with the most recent
// subject-entity embedding.
enum class ElementType : std::uint8_t { Entity = 0, Relation = 1 };

template <typename Scalar>
Mat<Scalar> skip_combine(const Mat<Scalar>& h_t, const Mat<Scalar>& x_prev, const Mat<Scalar>& s1,
                         const Mat<Scalar>& s2, ElementType type) {
    if (h_t.cols() != s1.rows()) throw DataError("skip_combine: dimension mismatch");
    if (type == ElementType::Entity) return h_t;
    if (x_prev.cols() != s2.rows() || x_prev.rows() != h_t.rows())
        throw DataError("skip_combine: dimension mismatch");
    return h_t * s1 + x_prev * s2;
}

// A batch of equal-length sequences packed time-major: element t of
// sequence b sits at row t*batch + b, already mapped to embedding-table
// rows. Sampled paths are odd-length; ranking feeds (s, r) prefixes of
// length 2.
struct PathBatch {
    std::uint32_t batch = 0;
    std::uint32_t length = 0;                // element count T >= 2
    std::vector<std::uint32_t> rows;         // length * batch entries

    // Positions carrying an in-path target, i.e. the loss terms per path.
    std::uint32_t loss_positions() const { return length - 1; }
};

PathBatch pack_paths(const std::vector<Path>& paths, std::size_t first, std::size_t count,
                     std::uint32_t entity_count, std::uint32_t relation_count);

template <typename Scalar>
struct ForwardTrace {
    Mat<Scalar> x_emb;                    // (T*B) x d raw embedding rows
    Mat<Scalar> in_hat, x_in;             // input batch-norm: normalized, and scaled+shifted
    Mat<Scalar> in_inv_std;               // 1 x d
    std::vector<Mat<Scalar>> gates;       // per layer, (T*B) x 4d post-activation [i f g o]
    std::vector<Mat<Scalar>> cells;       // per layer, (T*B) x d
    std::vector<Mat<Scalar>> tanh_cells;  // per layer, (T*B) x d
    std::vector<Mat<Scalar>> hidden;      // per layer, (T*B) x d
    std::vector<Mat<Scalar>> drop_masks;  // between layers, (T*B) x d, inverted-dropout scale
    Mat<Scalar> combined;                 // (T*B) x d variant output, pre output-norm
    Mat<Scalar> out_hat;                  // output batch-norm normalized values
    Mat<Scalar> out_inv_std;              // 1 x d
    Mat<Scalar> out_mask;                 // (T*B) x d output dropout
};

// Outputs cover every input position: row t*B + b predicts the element
// after position t of sequence b. Training consumes the first T-1 blocks
// (in-path targets); ranking reads the final block.
template <typename Scalar>
struct ForwardResult {
    Mat<Scalar> outputs;  // (T*B) x d
    ForwardTrace<Scalar> trace;
};

namespace detail {

template <typename Scalar>
void check_batch(const RsnParameters<Scalar>& params, const PathBatch& batch) {
    if (batch.batch == 0 || batch.length < 2) throw DataError("empty or degenerate path batch");
    if (batch.rows.size() != std::size_t(batch.batch) * batch.length)
        throw DataError("path batch row count does not match its shape");
    for (std::uint32_t row : batch.rows)
        if (row >= params.vocab_size()) throw DataError("path element outside the vocabulary");
}

// Per-column batch normalization over all rows. Returns scaled output;
// fills normalized values and inverse stddev for the backward pass.
template <typename Scalar>
Mat<Scalar> bn_forward_train(const Mat<Scalar>& x, BatchNorm<Scalar>& bn, Mat<Scalar>& x_hat,
                             Mat<Scalar>& inv_std) {
    const auto n = static_cast<Scalar>(x.rows());
    Mat<Scalar> mean = x.colwise().sum() / n;
    Mat<Scalar> centered = x.rowwise() - mean.row(0);
    Mat<Scalar> var = centered.array().square().colwise().sum().matrix() / n;
    inv_std = (var.array() + static_cast<Scalar>(kBnEpsilon)).rsqrt().matrix();
    x_hat = (centered.array().rowwise() * inv_std.row(0).array()).matrix();

    const auto m = static_cast<Scalar>(kBnMomentum);
    bn.running_mean = m * bn.running_mean + (Scalar(1) - m) * mean;
    bn.running_var = m * bn.running_var + (Scalar(1) - m) * var;

    Mat<Scalar> out = (x_hat.array().rowwise() * bn.gamma.row(0).array()).matrix();
    out.array().rowwise() += bn.beta.row(0).array();
    return out;
}

template <typename Scalar>
Mat<Scalar> bn_forward_eval(const Mat<Scalar>& x, const BatchNorm<Scalar>& bn) {
    Mat<Scalar> inv_std =
        (bn.running_var.array() + static_cast<Scalar>(kBnEpsilon)).rsqrt().matrix();
    Mat<Scalar> out = ((x.rowwise() - bn.running_mean.row(0)).array().rowwise() *
                       (inv_std.row(0).array() * bn.gamma.row(0).array()))
                          .matrix();
    out.array().rowwise() += bn.beta.row(0).array();
    return out;
}

// Gradient of bn_forward_train with batch statistics, the standard fused
// form: dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat)).
template <typename Scalar>
Mat<Scalar> bn_backward(const Mat<Scalar>& dy, const Mat<Scalar>& x_hat, const Mat<Scalar>& inv_std,
                        const BatchNorm<Scalar>& bn, Mat<Scalar>& d_gamma, Mat<Scalar>& d_beta) {
    const auto n = static_cast<Scalar>(dy.rows());
    d_gamma += (dy.array() * x_hat.array()).colwise().sum().matrix();
    d_beta += dy.colwise().sum();

    Mat<Scalar> dxhat = (dy.array().rowwise() * bn.gamma.row(0).array()).matrix();
    Mat<Scalar> sum_dxhat = dxhat.colwise().sum();
    Mat<Scalar> sum_dxhat_xhat = (dxhat.array() * x_hat.array()).colwise().sum().matrix();
    Mat<Scalar> dx = n * dxhat;
    dx.array().rowwise() -= sum_dxhat.row(0).array();
    dx -= (x_hat.array().rowwise() * sum_dxhat_xhat.row(0).array()).matrix();
    dx.array().rowwise() *= (inv_std.row(0).array() / n);
    return dx;
}

template <typename Scalar>
Mat<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, Scalar keep, Rng& rng) {
    Mat<Scalar> mask(rows, cols);
    if (keep >= Scalar(1)) {
        mask.setOnes();
        return mask;
    }
    const Scalar scale = Scalar(1) / keep;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            mask(i, j) = rng.next_double() < double(keep) ? scale : Scalar(0);
    return mask;
}

template <typename Block>
void sigmoid_inplace(Block block) {  // writable Eigen view, passed by value
    using Scalar = typename Block::Scalar;
    block = ((-block.array()).exp() + Scalar(1)).inverse().matrix();
}

// Runs the LSTM stack over pre-packed inputs; emits per-layer activations.
template <typename Scalar>
void run_stack(const RsnParameters<Scalar>& params, const PathBatch& batch, const Mat<Scalar>& x_in,
               bool training, Scalar keep, Rng* rng, ForwardTrace<Scalar>& trace) {
    const Eigen::Index B = batch.batch, T = batch.length, d = params.dim, N = T * B;
    const std::size_t L = params.layers.size();
    trace.gates.resize(L);
    trace.cells.resize(L);
    trace.tanh_cells.resize(L);
    trace.hidden.resize(L);
    trace.drop_masks.resize(L > 0 ? L - 1 : 0);

    const Mat<Scalar>* input = &x_in;
    Mat<Scalar> dropped;  // input to the next layer when dropout applies
    for (std::size_t l = 0; l < L; ++l) {
        const LstmLayer<Scalar>& layer = params.layers[l];
        Mat<Scalar>& gates = trace.gates[l];
        Mat<Scalar>& cells = trace.cells[l];
        Mat<Scalar>& tanh_cells = trace.tanh_cells[l];
        Mat<Scalar>& hidden = trace.hidden[l];
        gates.resize(N, 4 * d);
        cells.resize(N, d);
        tanh_cells.resize(N, d);
        hidden.resize(N, d);

        for (Eigen::Index t = 0; t < T; ++t) {
            auto z = gates.middleRows(t * B, B);
            z.noalias() = input->middleRows(t * B, B) * layer.w_x;
            if (t > 0) z.noalias() += hidden.middleRows((t - 1) * B, B) * layer.w_h;
            z.array().rowwise() += layer.bias.row(0).array();

            sigmoid_inplace(z.middleCols(0, d));
            sigmoid_inplace(z.middleCols(d, d));
            z.middleCols(2 * d, d) = z.middleCols(2 * d, d).array().tanh().matrix();
            sigmoid_inplace(z.middleCols(3 * d, d));

            auto c = cells.middleRows(t * B, B);
            c = (z.middleCols(0, d).array() * z.middleCols(2 * d, d).array()).matrix();
            if (t > 0) c.array() += z.middleCols(d, d).array() * cells.middleRows((t - 1) * B, B).array();
            tanh_cells.middleRows(t * B, B) = c.array().tanh().matrix();
            hidden.middleRows(t * B, B) =
                (z.middleCols(3 * d, d).array() * tanh_cells.middleRows(t * B, B).array()).matrix();
        }

        if (l + 1 < L) {
            if (training && keep < Scalar(1)) {
                trace.drop_masks[l] = dropout_mask<Scalar>(N, d, keep, *rng);
                dropped = (hidden.array() * trace.drop_masks[l].array()).matrix();
            } else {
                trace.drop_masks[l] = Mat<Scalar>();
                dropped = hidden;
            }
            input = &dropped;
        }
    }
}

// Variant combination over all input positions. Entity inputs sit at even
// positions (sequences are entity-first), relations at odd ones.
template <typename Scalar>
Mat<Scalar> combine_variant(const RsnParameters<Scalar>& params, const PathBatch& batch,
                            const Mat<Scalar>& x_in, const Mat<Scalar>& top_h) {
    const Eigen::Index B = batch.batch, T = batch.length, d = params.dim;
    Mat<Scalar> combined(T * B, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        auto out = combined.middleRows(t * B, B);
        auto h = top_h.middleRows(t * B, B);
        switch (params.variant) {
            case ModelVariant::Rsn:
                if (t % 2 == 1) {
                    out.noalias() = h * params.s1;
                    out.noalias() += x_in.middleRows((t - 1) * B, B) * params.s2;
                } else {
                    out = h;
                }
                break;
            case ModelVariant::Rrn:
                out = h;
                if (t > 0) out += top_h.middleRows((t - 1) * B, B);
                break;
            case ModelVariant::Rnn:
                out = h;
                break;
        }
    }
    return combined;
}

}  // namespace detail

// Training-mode forward: batch statistics, dropout, full trace. Updates the
// running batch-norm moments (hence non-const params). Deterministic given
// the rng state.
template <typename Scalar>
ForwardResult<Scalar> forward_train(RsnParameters<Scalar>& params, const PathBatch& batch,
                                    Scalar keep_prob, Rng& rng) {
    detail::check_batch(params, batch);
    if (!(keep_prob > Scalar(0) && keep_prob <= Scalar(1)))
        throw DataError("dropout keep probability must lie in (0, 1]");

    const Eigen::Index B = batch.batch, T = batch.length, d = params.dim, N = T * B;
    ForwardResult<Scalar> r;
    ForwardTrace<Scalar>& tr = r.trace;

    tr.x_emb.resize(N, d);
    for (Eigen::Index i = 0; i < N; ++i) tr.x_emb.row(i) = params.embeddings.row(batch.rows[i]);

    tr.x_in = detail::bn_forward_train(tr.x_emb, params.bn_in, tr.in_hat, tr.in_inv_std);
    detail::run_stack(params, batch, tr.x_in, true, keep_prob, &rng, tr);
    tr.combined = detail::combine_variant(params, batch, tr.x_in, tr.hidden.back());

    Mat<Scalar> out_lin = detail::bn_forward_train(tr.combined, params.bn_out, tr.out_hat, tr.out_inv_std);
    if (keep_prob < Scalar(1)) {
        tr.out_mask = detail::dropout_mask<Scalar>(out_lin.rows(), d, keep_prob, rng);
        r.outputs = (out_lin.array() * tr.out_mask.array()).matrix();
    } else {
        tr.out_mask = Mat<Scalar>();
        r.outputs = std::move(out_lin);
    }
    return r;
}

// Inference-mode forward: running statistics, no dropout, no trace. Pure.
template <typename Scalar>
Mat<Scalar> forward_eval(const RsnParameters<Scalar>& params, const PathBatch& batch) {
    detail::check_batch(params, batch);
    const Eigen::Index B = batch.batch, T = batch.length, d = params.dim, N = T * B;

    Mat<Scalar> x_emb(N, d);
    for (Eigen::Index i = 0; i < N; ++i) x_emb.row(i) = params.embeddings.row(batch.rows[i]);
    Mat<Scalar> x_in = detail::bn_forward_eval(x_emb, params.bn_in);

    ForwardTrace<Scalar> tr;
    detail::run_stack(params, batch, x_in, false, Scalar(1), nullptr, tr);
    Mat<Scalar> combined = detail::combine_variant(params, batch, x_in, tr.hidden.back());
    return detail::bn_forward_eval(combined, params.bn_out);
}

// Exact reverse-mode pass matching forward_train. Accumulates into `grads`
// (shaped like the parameters); embedding rows absent from the batch keep
// their current (zero) gradient.
template <typename Scalar>
void backward(const RsnParameters<Scalar>& params, const PathBatch& batch,
              const ForwardTrace<Scalar>& trace, const Mat<Scalar>& d_outputs,
              RsnParameters<Scalar>& grads) {
    const Eigen::Index B = batch.batch, T = batch.length, d = params.dim, N = T * B;
    if (d_outputs.rows() != N || d_outputs.cols() != d)
        throw DataError("backward: upstream gradient shape mismatch");

    // Output dropout, then output batch norm.
    Mat<Scalar> d_out_lin = trace.out_mask.size() > 0
                                ? Mat<Scalar>((d_outputs.array() * trace.out_mask.array()).matrix())
                                : d_outputs;
    Mat<Scalar> d_combined = detail::bn_backward(d_out_lin, trace.out_hat, trace.out_inv_std,
                                                 params.bn_out, grads.bn_out.gamma, grads.bn_out.beta);

    // Variant combination.
    const Mat<Scalar>& top_h = trace.hidden.back();
    Mat<Scalar> d_top_h = Mat<Scalar>::Zero(N, d);
    Mat<Scalar> d_x_in = Mat<Scalar>::Zero(N, d);  // skip-path contributions
    for (Eigen::Index t = 0; t < T; ++t) {
        auto dc = d_combined.middleRows(t * B, B);
        switch (params.variant) {
            case ModelVariant::Rsn:
                if (t % 2 == 1) {
                    d_top_h.middleRows(t * B, B).noalias() += dc * params.s1.transpose();
                    grads.s1.noalias() += top_h.middleRows(t * B, B).transpose() * dc;
                    grads.s2.noalias() += trace.x_in.middleRows((t - 1) * B, B).transpose() * dc;
                    d_x_in.middleRows((t - 1) * B, B).noalias() += dc * params.s2.transpose();
                } else {
                    d_top_h.middleRows(t * B, B) += dc;
                }
                break;
            case ModelVariant::Rrn:
                d_top_h.middleRows(t * B, B) += dc;
                if (t > 0) d_top_h.middleRows((t - 1) * B, B) += dc;
                break;
            case ModelVariant::Rnn:
                d_top_h.middleRows(t * B, B) += dc;
                break;
        }
    }

    // LSTM stack, top layer downwards.
    const std::size_t L = params.layers.size();
    Mat<Scalar> d_hidden_out = std::move(d_top_h);  // gradient on this layer's hidden output
    Mat<Scalar> d_layer_input(N, d);
    for (std::size_t li = L; li-- > 0;) {
        const LstmLayer<Scalar>& layer = params.layers[li];
        LstmLayer<Scalar>& glayer = grads.layers[li];
        const Mat<Scalar>& gates = trace.gates[li];
        const Mat<Scalar>& cells = trace.cells[li];
        const Mat<Scalar>& tanh_cells = trace.tanh_cells[li];

        // The layer input: x_in for the bottom layer, the (possibly
        // dropped) hidden states of the layer below otherwise.
        Mat<Scalar> lower;
        const Mat<Scalar>* input = nullptr;
        if (li == 0) {
            input = &trace.x_in;
        } else if (trace.drop_masks[li - 1].size() > 0) {
            lower = (trace.hidden[li - 1].array() * trace.drop_masks[li - 1].array()).matrix();
            input = &lower;
        } else {
            input = &trace.hidden[li - 1];
        }

        d_layer_input.setZero();
        Mat<Scalar> dh_next = Mat<Scalar>::Zero(B, d);
        Mat<Scalar> dc_next = Mat<Scalar>::Zero(B, d);
        Mat<Scalar> dz(B, 4 * d);
        for (Eigen::Index t = T; t-- > 0;) {
            auto i_g = gates.middleRows(t * B, B).middleCols(0, d).array();
            auto f_g = gates.middleRows(t * B, B).middleCols(d, d).array();
            auto g_g = gates.middleRows(t * B, B).middleCols(2 * d, d).array();
            auto o_g = gates.middleRows(t * B, B).middleCols(3 * d, d).array();
            auto tc = tanh_cells.middleRows(t * B, B).array();

            Mat<Scalar> dh = d_hidden_out.middleRows(t * B, B) + dh_next;
            Mat<Scalar> dc = dc_next;
            dc.array() += dh.array() * o_g * (Scalar(1) - tc.square());

            dz.middleCols(0, d) = ((dc.array() * g_g) * i_g * (Scalar(1) - i_g)).matrix();   // input gate
            if (t > 0)
                dz.middleCols(d, d) = ((dc.array() * cells.middleRows((t - 1) * B, B).array()) *
                                       f_g * (Scalar(1) - f_g))
                                          .matrix();                                         // forget gate
            else
                dz.middleCols(d, d).setZero();
            dz.middleCols(2 * d, d) = ((dc.array() * i_g) * (Scalar(1) - g_g.square())).matrix();  // candidate
            dz.middleCols(3 * d, d) = ((dh.array() * tc) * o_g * (Scalar(1) - o_g)).matrix();      // output gate

            glayer.w_x.noalias() += input->middleRows(t * B, B).transpose() * dz;
            if (t > 0) glayer.w_h.noalias() += trace.hidden[li].middleRows((t - 1) * B, B).transpose() * dz;
            glayer.bias += dz.colwise().sum();

            d_layer_input.middleRows(t * B, B).noalias() = dz * layer.w_x.transpose();
            dh_next.noalias() = dz * layer.w_h.transpose();
            dc_next = (dc.array() * f_g).matrix();
        }

        if (li == 0) {
            d_x_in += d_layer_input;
        } else if (trace.drop_masks[li - 1].size() > 0) {
            d_hidden_out = (d_layer_input.array() * trace.drop_masks[li - 1].array()).matrix();
        } else {
            d_hidden_out = std::move(d_layer_input);
            d_layer_input.resize(N, d);
        }
    }

    // Input batch norm, then the embedding table.
    Mat<Scalar> d_x_emb = detail::bn_backward(d_x_in, trace.in_hat, trace.in_inv_std, params.bn_in,
                                              grads.bn_in.gamma, grads.bn_in.beta);
    for (Eigen::Index i = 0; i < N; ++i) grads.embeddings.row(batch.rows[i]) += d_x_emb.row(i);
}

// Checkpoint: versioned binary header, then the parameter blocks in
// for_each_parameter order plus the running batch-norm moments, all as
// row-major little-endian 32-bit floats. See docs/formats.md.
void save_checkpoint(const std::string& path, const RsnParameters<float>& params,
                     std::uint64_t graph_checksum);
RsnParameters<float> load_checkpoint(const std::string& path, std::uint64_t expected_graph_checksum);
std::uint64_t checkpoint_graph_checksum(const std::string& path);

}  // namespace rsnkg
