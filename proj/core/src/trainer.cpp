#include "synergraph/trainer.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace synergraph {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw Error("learning rate must be positive");
    if (batch_size < 1) throw Error("batch_size must be positive");
    if (epochs < 1) throw Error("epochs must be positive");
    if (weight_decay < 0.0) throw Error("weight_decay must be non-negative");
    if (eval_every < 1) throw Error("eval_every must be positive");
    if (early_stop_patience < 1) throw Error("early_stop_patience must be positive");
    if (eval_k < 1) throw Error("eval_k must be positive");
    if (loss.reg_lambda < 0.0) throw Error("reg_lambda must be non-negative");
    loss.circle.validate();
}

namespace {

Matrix gather(const Matrix& table, const std::vector<std::int32_t>& rows) {
    Matrix out(static_cast<Index>(rows.size()), table.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = table.row(rows[r]);
    return out;
}

void scatter_add(Matrix& table, const std::vector<std::int32_t>& rows, const Matrix& values, double scale = 1.0) {
    for (std::size_t r = 0; r < rows.size(); ++r) table.row(rows[r]) += scale * values.row(static_cast<Index>(r));
}

void check_finite(const std::vector<NamedTensor>& names, const std::vector<Matrix>& grads) {
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (!grads[k].allFinite()) throw NumericError("gradient of '" + names[k].name + "' is not finite");
    }
}

}  // namespace

BprTerms accumulate_bpr_terms(const Matrix& final_user, const Matrix& final_item, const Matrix& id_user,
                              const Matrix& id_item, const BatchTriples& batch, double lambda, Matrix* g_final_user,
                              Matrix* g_final_item, Matrix* g_id_user, Matrix* g_id_item) {
    BprTerms terms;
    const Matrix u = gather(final_user, batch.users);
    const Matrix p = gather(final_item, batch.pos_items);
    const Matrix n = gather(final_item, batch.neg_items);
    Matrix gu, gp, gn;
    const bool want = g_final_user != nullptr;
    terms.bpr = bpr_loss(u, p, n, want ? BatchGrads{&gu, &gp, &gn} : BatchGrads{});
    if (want) {
        scatter_add(*g_final_user, batch.users, gu);
        scatter_add(*g_final_item, batch.pos_items, gp);
        scatter_add(*g_final_item, batch.neg_items, gn);
    }

    const Matrix iu = gather(id_user, batch.users);
    const Matrix ip = gather(id_item, batch.pos_items);
    const Matrix in = gather(id_item, batch.neg_items);
    terms.reg = emb_reg(iu, ip, in, lambda, want ? BatchGrads{&gu, &gp, &gn} : BatchGrads{});
    if (want) {
        scatter_add(*g_id_user, batch.users, gu);
        scatter_add(*g_id_item, batch.pos_items, gp);
        scatter_add(*g_id_item, batch.neg_items, gn);
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Full model

SynerGraphModel::SynerGraphModel(ModelConfig cfg, const ModelInputs& inputs, LossSettings loss, std::uint64_t seed)
    : cfg_(std::move(cfg)), inputs_(inputs), loss_(loss) {
    cfg_.validate();
    std::vector<Index> dims;
    for (Modality m : cfg_.modalities) dims.push_back(inputs_.modality(m).features->cols());
    params_ = init_params(cfg_, dims, inputs_.n_users, inputs_.n_items, seed);
}

LossBreakdown SynerGraphModel::loss(const BatchTriples& batch) { return run(batch, nullptr); }

LossBreakdown SynerGraphModel::loss_and_gradients(const BatchTriples& batch, std::vector<Matrix>& grads) {
    return run(batch, &grads);
}

EmbeddingScorer SynerGraphModel::scorer() {
    ForwardOutput out = forward(params_, inputs_, cfg_);
    return EmbeddingScorer(std::move(out.final_user), std::move(out.final_item));
}

LossBreakdown SynerGraphModel::run(const BatchTriples& batch, std::vector<Matrix>* grads) {
    const bool want = grads != nullptr;
    ForwardTrace trace;
    const ForwardOutput out = forward(params_, inputs_, cfg_, want ? &trace : nullptr);

    ModelParams g;
    ForwardGrads up;
    if (want) {
        g = params_.zeros_like();
        up.final_user = Matrix::Zero(inputs_.n_users, cfg_.dim);
        up.final_item = Matrix::Zero(inputs_.n_items, cfg_.dim);
    }

    LossComponents parts;
    const BprTerms bpr = accumulate_bpr_terms(out.final_user, out.final_item, params_.user_emb, params_.item_emb, batch,
                                              loss_.reg_lambda, want ? &up.final_user : nullptr,
                                              want ? &up.final_item : nullptr, want ? &g.user_emb : nullptr,
                                              want ? &g.item_emb : nullptr);
    parts.bpr = bpr.bpr;
    parts.reg = bpr.reg;

    if (cfg_.use_circle) {
        const Matrix users = gather(out.behavior_user, batch.users);
        const Matrix fused = gather(out.side_item, batch.pos_items);
        const double coef = loss_.circle.coefficient;
        if (want) {
            up.behavior_user = Matrix::Zero(inputs_.n_users, cfg_.dim);
            up.side_item = Matrix::Zero(inputs_.n_items, cfg_.dim);
            up.item_modal.assign(cfg_.modalities.size(), Matrix());
        }
        for (std::size_t k = 0; k < cfg_.modalities.size(); ++k) {
            const Modality m = cfg_.modalities[k];
            const Matrix modal = gather(out.item_modal[k], batch.pos_items);
            Matrix gu, gf, gm;
            const double value = circle_loss(users, fused, modal, loss_.circle, m,
                                             want ? BatchGrads{&gu, &gf, &gm} : BatchGrads{});
            (m == Modality::textual ? parts.circle_textual : parts.circle_visual) = value;
            if (want) {
                scatter_add(up.behavior_user, batch.users, gu, coef);
                scatter_add(up.side_item, batch.pos_items, gf, coef);
                up.item_modal[k] = Matrix::Zero(inputs_.n_items, cfg_.dim);
                scatter_add(up.item_modal[k], batch.pos_items, gm, coef);
            }
        }
    }

    LossBreakdown lb;
    lb.bpr = parts.bpr;
    lb.reg = parts.reg;
    lb.circle_textual = parts.circle_textual;
    lb.circle_visual = parts.circle_visual;
    lb.total = total_loss(parts, loss_.circle.coefficient, cfg_.use_circle);

    if (want) {
        forward_backward(params_, inputs_, cfg_, out, trace, up, g);
        const auto names = params_.tensors();
        auto gt = g.tensors();
        grads->clear();
        for (auto& t : gt) grads->push_back(std::move(*t.value));
        check_finite(names, *grads);
    }
    return lb;
}

// ---------------------------------------------------------------------------
// Sampling

BatchSampler::BatchSampler(const SplitDataset& split, Index batch_size)
    : split_(split), batch_size_(batch_size), train_(split.edges(SplitLabel::train)) {
    if (batch_size_ < 1) throw Error("batch size must be positive");
    if (train_.empty()) throw SamplingError("no training edges to sample from");
}

std::vector<BatchTriples> BatchSampler::epoch(std::mt19937_64& rng) const {
    constexpr int kMaxAttempts = 100;
    std::vector<Edge> order = train_;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(split_.n_items() - 1));

    std::vector<BatchTriples> batches;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size_)) {
        const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(batch_size_), order.size() - start);
        BatchTriples b;
        b.users.reserve(len);
        b.pos_items.reserve(len);
        b.neg_items.reserve(len);
        for (std::size_t k = start; k < start + len; ++k) {
            const auto& e = order[k];
            std::int32_t neg = -1;
            for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
                const std::int32_t j = pick(rng);
                if (!split_.is_train(e.user, j)) {
                    neg = j;
                    break;
                }
            }
            if (neg < 0) {
                throw SamplingError("no negative item found for user '" + split_.base().users.raw_id(e.user) +
                                    "' after " + std::to_string(kMaxAttempts) + " attempts");
            }
            b.users.push_back(e.user);
            b.pos_items.push_back(e.item);
            b.neg_items.push_back(neg);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

std::vector<BatchTriples> sample_batches(const SplitDataset& split, Index batch_size, std::mt19937_64& rng) {
    return BatchSampler(split, batch_size).epoch(rng);
}

// ---------------------------------------------------------------------------
// Epoch loop

FitResult fit(const TrainConfig& cfg, Trainable& model, const SplitDataset& split, const EpochCallback& on_epoch) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const BatchSampler sampler(split, cfg.batch_size);
    const auto params = model.parameters();
    OptimizerState state;
    const AdamWConfig opt{cfg.lr, cfg.weight_decay};

    FitResult result;
    std::vector<Matrix> best = snapshot(params);
    std::vector<Matrix> last_good = best;
    bool have_best = false;
    int since_best = 0;
    std::vector<Matrix> grads;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        Index samples = 0;
        double per_sample_total = 0.0;
        std::size_t n_batches = 0;
        try {
            for (const auto& batch : sampler.epoch(rng)) {
                const LossBreakdown lb = model.loss_and_gradients(batch, grads);
                if (!std::isfinite(lb.total)) throw NumericError("training loss is not finite");
                adamw_step(params, grads, state, opt);
                samples += batch.size();
                ++n_batches;
                rec.loss.bpr += lb.bpr;
                rec.loss.reg += lb.reg;
                rec.loss.circle_textual += lb.circle_textual;
                rec.loss.circle_visual += lb.circle_visual;
                per_sample_total += lb.total / static_cast<double>(batch.size());
            }
        } catch (const NumericError& e) {
            result.diverged = true;
            result.message = "epoch " + std::to_string(epoch) + ": " + e.what();
            restore(params, have_best ? best : last_good);
            return result;
        }
        rec.loss.bpr /= static_cast<double>(samples);
        rec.loss.reg /= static_cast<double>(samples);
        rec.loss.circle_textual /= static_cast<double>(n_batches);
        rec.loss.circle_visual /= static_cast<double>(n_batches);
        rec.loss.total = per_sample_total / static_cast<double>(n_batches);
        last_good = snapshot(params);

        bool stop = false;
        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            const EmbeddingScorer scorer = model.scorer();
            const MetricsReport val = evaluate_model(scorer, split, Phase::val, cfg.eval_k);
            rec.val_recall = val.recall;
            rec.val_ndcg = val.ndcg;
            if (!have_best || val.recall > result.best_val_recall) {
                have_best = true;
                result.best_val_recall = val.recall;
                result.best_epoch = epoch;
                best = last_good;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop_patience) {
                stop = true;
            }
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stop) break;
    }
    if (have_best) restore(params, best);
    return result;
}

std::string history_line(const EpochRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss_total"] = r.loss.total;
    j["loss_bpr"] = r.loss.bpr;
    j["loss_reg"] = r.loss.reg;
    j["loss_circle_text"] = r.loss.circle_textual;
    j["loss_circle_image"] = r.loss.circle_visual;
    if (r.val_recall) j["val_recall20"] = *r.val_recall;
    if (r.val_ndcg) j["val_ndcg20"] = *r.val_ndcg;
    return j.dump();
}

void write_history_jsonl(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    for (const auto& r : history) out << history_line(r) << '\n';
}

// ---------------------------------------------------------------------------
// Gradient verification

GradCheckReport grad_check(Trainable& model, const BatchTriples& batch, double eps, const GradientMutation& mutate) {
    if (!(eps > 0.0)) throw Error("grad_check: eps must be positive");
    const auto params = model.parameters();
    std::vector<Matrix> analytic;
    model.loss_and_gradients(batch, analytic);
    if (mutate) mutate(analytic);

    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].value;
        Matrix numeric(p.rows(), p.cols());
        for (Index r = 0; r < p.rows(); ++r) {
            for (Index c = 0; c < p.cols(); ++c) {
                const double saved = p(r, c);
                p(r, c) = saved + eps;
                const double up = model.loss(batch).total;
                p(r, c) = saved - eps;
                const double down = model.loss(batch).total;
                p(r, c) = saved;
                numeric(r, c) = (up - down) / (2.0 * eps);
            }
        }
        const double scale = std::max(analytic[k].norm(), numeric.norm());
        const double err = scale < 1e-12 ? 0.0 : (analytic[k] - numeric).norm() / scale;
        report.per_tensor.emplace_back(params[k].name, err);
        report.max_rel_error = std::max(report.max_rel_error, err);
    }
    return report;
}

void randomize_parameters(Trainable& model, std::uint64_t seed, double stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (const auto& t : model.parameters()) {
        for (Index i = 0; i < t.value->size(); ++i) t.value->data()[i] = dist(rng);
    }
}

GradCheckFixture make_grad_check_fixture(std::uint64_t seed) {
    InteractionDataset ds;
    const Index n_users = 6;
    const Index n_items = 8;
    for (Index u = 0; u < n_users; ++u) ds.users.intern("u" + std::to_string(u));
    for (Index i = 0; i < n_items; ++i) ds.items.intern("i" + std::to_string(i));
    ds.n_users = n_users;
    ds.n_items = n_items;
    const int adjacency[6][5] = {{0, 1, 2, 3, 5}, {1, 2, 4, 6, 7}, {0, 3, 4, 5, 6},
                                 {2, 3, 5, 7, 1}, {0, 4, 6, 7, 2}, {1, 3, 5, 6, 0}};
    for (Index u = 0; u < n_users; ++u) {
        for (int i : adjacency[u]) ds.edges.push_back({static_cast<std::int32_t>(u), i});
    }
    SplitDataset split = user_split(ds, SplitRatios{}, seed);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto features = [&](Modality m, Index dim) {
        auto f = std::make_shared<FeatureMatrix>();
        f->modality = m;
        f->data.resize(n_items, dim);
        for (Index i = 0; i < n_items; ++i) {
            for (Index c = 0; c < dim; ++c) f->data(i, c) = std::abs(gauss(rng)) + 0.1;
        }
        return std::shared_ptr<const FeatureMatrix>(std::move(f));
    };
    ModelInputs inputs = build_model_inputs(split, {features(Modality::visual, 3), features(Modality::textual, 5)}, 3);

    ModelConfig mc;
    mc.dim = 4;
    mc.ui_layers = 2;
    mc.ii_layers = 1;

    LossSettings loss;
    loss.reg_lambda = 1e-2;

    BatchTriples batch;
    for (Index u = 0; u < n_users; ++u) {
        const auto train = split.items(SplitLabel::train, u);
        batch.users.push_back(static_cast<std::int32_t>(u));
        batch.pos_items.push_back(train[static_cast<std::size_t>(u) % train.size()]);
        std::int32_t neg = 0;
        while (split.is_train(u, neg)) ++neg;
        batch.neg_items.push_back(neg);
    }
    return GradCheckFixture{std::move(split), std::move(inputs), mc, loss, std::move(batch)};
}

}  // namespace synergraph
