#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rsnkg/kg.hpp"
#include "rsnkg/model.hpp"
#include "rsnkg/walker.hpp"

namespace rsnkg {

enum class TaskPreset : std::uint8_t { Alignment = 0, Completion = 1 };

const char* task_name(TaskPreset task);
TaskPreset task_from_name(const std::string& name);

struct TrainConfig {
    TaskPreset preset = TaskPreset::Alignment;
    double learning_rate = 0.003;
    std::uint32_t batch_size = 512;
    std::uint32_t negatives = 10;  // k per prediction position
    std::uint32_t epochs = 30;
    double keep_prob = 0.5;  // dropout keep probability
    std::uint64_t seed = 1;
    bool resample_corpus = true;  // fresh walks every epoch

    void validate() const;
};

// Everything hyper-parameter-shaped that a task fixes: optimizer settings
// plus the walk geometry the corpus is expected to have.
struct TaskSettings {
    TrainConfig train;
    WalkConfig walk;
    std::uint32_t dim = 256;
    std::uint32_t layers = 2;
};

TaskSettings task_settings(TaskPreset task);

// Draws k negatives of the target's type, resampling on collisions with
// the true target. Duplicates among the negatives are allowed.
std::vector<std::uint32_t> sample_negatives(std::uint32_t target, ElementType target_type,
                                            const NoiseDistribution& noise, std::uint32_t k,
                                            Rng& rng);

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + e^x) without overflow on either tail.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace detail

// -log sigmoid(h.y) - sum_j log sigmoid(-h.yj), with exact gradients for
// every input. h and target are 1 x d rows; negatives are k x d.
template <typename Scalar>
struct NceResult {
    Scalar loss = 0;
    Mat<Scalar> d_h;
    Mat<Scalar> d_target;
    Mat<Scalar> d_negatives;
};

template <typename Scalar>
NceResult<Scalar> nce_loss(const Mat<Scalar>& h, const Mat<Scalar>& target,
                           const Mat<Scalar>& negatives) {
    const Eigen::Index d = h.cols();
    if (h.rows() != 1 || target.rows() != 1 || target.cols() != d ||
        (negatives.rows() > 0 && negatives.cols() != d))
        throw DataError("nce_loss: operands disagree on the embedding dimension");
    if (!h.allFinite() || !target.allFinite() || !negatives.allFinite())
        throw DataError("nce_loss: non-finite input");

    NceResult<Scalar> r;
    const double s = double(h.row(0).dot(target.row(0)));
    double loss = detail::softplus(-s);
    const double a0 = detail::sigmoid(s) - 1.0;
    r.d_h = (Scalar(a0) * target).eval();
    r.d_target = (Scalar(a0) * h).eval();
    r.d_negatives.resize(negatives.rows(), d);
    for (Eigen::Index j = 0; j < negatives.rows(); ++j) {
        const double u = double(h.row(0).dot(negatives.row(j)));
        loss += detail::softplus(u);
        const double aj = detail::sigmoid(u);
        r.d_h += (Scalar(aj) * negatives.row(j)).matrix();
        r.d_negatives.row(j) = Scalar(aj) * h.row(0);
    }
    r.loss = Scalar(loss);
    return r;
}

// Adam with bias correction over the full parameter set; moments mirror
// the parameter shapes.
template <typename Scalar>
struct AdamState {
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    RsnParameters<Scalar> m;
    RsnParameters<Scalar> v;
    std::uint64_t step = 0;
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(const RsnParameters<Scalar>& params) {
    AdamState<Scalar> s;
    s.m = make_gradients(params);
    s.v = make_gradients(params);
    return s;
}

template <typename Scalar>
void adam_update(RsnParameters<Scalar>& params, const RsnParameters<Scalar>& grads,
                 AdamState<Scalar>& state, double lr) {
    std::vector<Mat<Scalar>*> ps, ms, vs;
    std::vector<std::pair<std::string, const Mat<Scalar>*>> gs;
    params.for_each_parameter([&](const std::string&, Mat<Scalar>& m) { ps.push_back(&m); });
    state.m.for_each_parameter([&](const std::string&, Mat<Scalar>& m) { ms.push_back(&m); });
    state.v.for_each_parameter([&](const std::string&, Mat<Scalar>& m) { vs.push_back(&m); });
    grads.for_each_parameter(
        [&](const std::string& name, const Mat<Scalar>& g) { gs.emplace_back(name, &g); });
    if (ps.size() != gs.size() || ps.size() != ms.size() || ps.size() != vs.size())
        throw InternalError("adam_update: parameter/moment structure mismatch");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(AdamState<Scalar>::kBeta1, double(state.step));
    const double bc2 = 1.0 - std::pow(AdamState<Scalar>::kBeta2, double(state.step));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const Mat<Scalar>& g = *gs[i].second;
        if (!g.allFinite())
            throw DataError("adam_update: non-finite gradient for " + gs[i].first);
        if (g.rows() != ps[i]->rows() || g.cols() != ps[i]->cols())
            throw InternalError("adam_update: gradient shape mismatch for " + gs[i].first);
        Mat<Scalar>& m = *ms[i];
        Mat<Scalar>& v = *vs[i];
        m = (Scalar(AdamState<Scalar>::kBeta1) * m.array() +
             Scalar(1.0 - AdamState<Scalar>::kBeta1) * g.array())
                .matrix();
        v = (Scalar(AdamState<Scalar>::kBeta2) * v.array() +
             Scalar(1.0 - AdamState<Scalar>::kBeta2) * g.array().square())
                .matrix();
        ps[i]->array() -= Scalar(lr) * (m.array() / Scalar(bc1)) /
                          ((v.array() / Scalar(bc2)).sqrt() + Scalar(AdamState<Scalar>::kEpsilon));
    }
}

template <typename Scalar>
double gradient_norm(const RsnParameters<Scalar>& grads) {
    double sq = 0.0;
    grads.for_each_parameter([&](const std::string&, const Mat<Scalar>& g) {
        sq += g.template cast<double>().squaredNorm();
    });
    return std::sqrt(sq);
}

// Scales the whole gradient set so its global norm is at most max_norm;
// returns the pre-clip norm.
template <typename Scalar>
double clip_gradients(RsnParameters<Scalar>& grads, double max_norm) {
    const double norm = gradient_norm(grads);
    if (norm > max_norm && norm > 0.0) {
        const Scalar scale = Scalar(max_norm / norm);
        grads.for_each_parameter([&](const std::string&, Mat<Scalar>& g) { g *= scale; });
    }
    return norm;
}

inline constexpr double kGradClipNorm = 5.0;

struct LossReport {
    std::uint32_t epoch = 0;
    double mean_loss = 0.0;       // per prediction position
    double seconds = 0.0;
    std::uint64_t loss_positions = 0;
    std::uint64_t paths_seen = 0;
};

// One pass over the corpus: shuffled length-bucketed mini-batches, NCE
// with type-based negatives at every position but the last, gradient
// clipping, Adam. Deterministic for a fixed (cfg.seed, epoch_index).
template <typename Scalar>
LossReport train_epoch(RsnParameters<Scalar>& model, const PathCorpus& corpus,
                       const TrainConfig& cfg, const NoiseDistribution& noise,
                       AdamState<Scalar>& adam, std::uint32_t epoch_index = 0) {
    cfg.validate();
    if (corpus.paths.empty()) throw DataError("train_epoch: the corpus holds no paths");
    if (noise.entity.size() != model.entity_count || noise.relation.size() != model.relation_count)
        throw DataError("train_epoch: noise distribution does not match the model vocabulary");

    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(cfg.seed, epoch_index));
    const std::uint32_t E = model.entity_count;

    // Batches mix only equal-length paths so each one packs rectangular.
    std::map<std::size_t, std::vector<std::uint32_t>> buckets;
    for (std::uint32_t i = 0; i < corpus.paths.size(); ++i)
        buckets[corpus.paths[i].size()].push_back(i);

    struct Slice {
        std::size_t length;
        std::uint32_t begin;
        std::uint32_t count;
    };
    std::vector<Slice> batches;
    for (auto& [length, ids] : buckets) {
        shuffle(ids, rng);
        for (std::uint32_t off = 0; off < ids.size(); off += cfg.batch_size)
            batches.push_back({length, off,
                               std::min<std::uint32_t>(cfg.batch_size,
                                                       std::uint32_t(ids.size()) - off)});
    }
    shuffle(batches, rng);

    double loss_sum = 0.0;
    std::uint64_t positions_total = 0, paths_total = 0;
    auto grads = make_gradients(model);
    std::vector<Path> scratch;
    for (const Slice& slice : batches) {
        const auto& ids = buckets[slice.length];
        scratch.clear();
        for (std::uint32_t i = 0; i < slice.count; ++i)
            scratch.push_back(corpus.paths[ids[slice.begin + i]]);

        auto batch = pack_paths(scratch, 0, scratch.size(), E, model.relation_count);
        auto fwd = forward_train(model, batch, Scalar(cfg.keep_prob), rng);
        grads.for_each_parameter([](const std::string&, Mat<Scalar>& g) { g.setZero(); });

        const Eigen::Index T = batch.length, B = batch.batch, d = model.dim;
        Mat<Scalar> d_out = Mat<Scalar>::Zero(T * B, d);
        double batch_loss = 0.0;
        const std::uint64_t batch_positions = std::uint64_t(T - 1) * std::uint64_t(B);
        for (Eigen::Index t = 0; t + 1 < T; ++t) {
            // Element t+1 of the path is the prediction target; paths are
            // entity-first, so odd path positions hold relations.
            const bool relation_target = ((t + 1) % 2 == 1);
            const ElementType target_type =
                relation_target ? ElementType::Relation : ElementType::Entity;
            for (Eigen::Index b = 0; b < B; ++b) {
                const std::uint32_t raw = scratch[std::size_t(b)][std::size_t(t) + 1];
                const std::uint32_t target_row = relation_target ? E + raw : raw;
                const Eigen::Index n = t * B + b;
                auto h = fwd.outputs.row(n);

                const double s = double(h.dot(model.embeddings.row(target_row)));
                batch_loss += detail::softplus(-s);
                const double a0 = detail::sigmoid(s) - 1.0;
                d_out.row(n) += Scalar(a0) * model.embeddings.row(target_row);
                grads.embeddings.row(target_row) += Scalar(a0) * h;

                auto negs = sample_negatives(raw, target_type, noise, cfg.negatives, rng);
                for (std::uint32_t nid : negs) {
                    const std::uint32_t neg_row = relation_target ? E + nid : nid;
                    const double u = double(h.dot(model.embeddings.row(neg_row)));
                    batch_loss += detail::softplus(u);
                    const double aj = detail::sigmoid(u);
                    d_out.row(n) += Scalar(aj) * model.embeddings.row(neg_row);
                    grads.embeddings.row(neg_row) += Scalar(aj) * h;
                }
            }
        }

        // Normalize the objective per prediction position so the step
        // size does not scale with path length or batch size.
        const Scalar inv = Scalar(1.0 / double(batch_positions));
        d_out *= inv;
        grads.embeddings *= inv;
        backward(model, batch, fwd.trace, d_out, grads);
        clip_gradients(grads, kGradClipNorm);
        adam_update(model, grads, adam, cfg.learning_rate);

        loss_sum += batch_loss;
        positions_total += batch_positions;
        paths_total += std::uint64_t(B);
    }

    LossReport report;
    report.epoch = epoch_index;
    report.mean_loss = loss_sum / double(positions_total);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.loss_positions = positions_total;
    report.paths_seen = paths_total;
    if (!std::isfinite(report.mean_loss))
        throw DataError("train_epoch: loss diverged to a non-finite value");
    return report;
}

}  // namespace rsnkg
