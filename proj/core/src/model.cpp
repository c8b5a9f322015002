#include "synergraph/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace synergraph {

void ModelConfig::validate() const {
    if (dim < 1) throw Error("model dim must be >= 1");
    if (ui_layers < 0 || ii_layers < 0) throw Error("layer counts must be non-negative");
    if (modalities.empty()) throw Error("at least one modality is required");
    for (std::size_t a = 0; a < modalities.size(); ++a) {
        for (std::size_t b = a + 1; b < modalities.size(); ++b) {
            if (modalities[a] == modalities[b]) throw Error("duplicate modality in model config");
        }
    }
}

std::vector<NamedTensor> ModelParams::tensors() {
    std::vector<NamedTensor> out{{"user_emb", &user_emb}, {"item_emb", &item_emb}};
    for (auto& m : modal) {
        const std::string p = std::string(to_string(m.modality)) + ".";
        out.push_back({p + "proj_W", &m.proj_W});
        out.push_back({p + "proj_b", &m.proj_b});
        out.push_back({p + "gate_W", &m.gate_W});
        out.push_back({p + "gate_b", &m.gate_b});
        out.push_back({p + "pref_W", &m.pref_W});
        out.push_back({p + "pref_b", &m.pref_b});
    }
    out.push_back({"attn_W", &attn_W});
    out.push_back({"attn_b", &attn_b});
    out.push_back({"attn_q", &attn_q});
    return out;
}

ModelParams ModelParams::zeros_like() const {
    auto z = [](const Matrix& m) { return Matrix::Zero(m.rows(), m.cols()).eval(); };
    ModelParams out;
    out.user_emb = z(user_emb);
    out.item_emb = z(item_emb);
    for (const auto& m : modal) {
        out.modal.push_back({m.modality, z(m.proj_W), z(m.proj_b), z(m.gate_W), z(m.gate_b), z(m.pref_W), z(m.pref_b)});
    }
    out.attn_W = z(attn_W);
    out.attn_b = z(attn_b);
    out.attn_q = z(attn_q);
    return out;
}

// ---------------------------------------------------------------------------
// Inputs

const ModalityInput& ModelInputs::modality(Modality m) const {
    for (const auto& mi : modalities) {
        if (mi.modality == m) return mi;
    }
    throw Error(std::string("no ") + to_string(m) + " features were supplied");
}

bool ModelInputs::has(Modality m) const {
    return std::any_of(modalities.begin(), modalities.end(), [m](const auto& mi) { return mi.modality == m; });
}

ModelInputs build_model_inputs(const SplitDataset& split, std::vector<std::shared_ptr<const FeatureMatrix>> features,
                               Index top_k, const std::optional<std::filesystem::path>& cache_dir) {
    ModelInputs in;
    in.n_users = split.n_users();
    in.n_items = split.n_items();
    in.interactions = build_interaction_matrix(split);
    in.norm_adjacency = build_norm_adjacency(in.interactions);
    in.user_mean = row_normalize(in.interactions);
    in.user_mean_t = in.user_mean.transpose();
    for (auto& f : features) {
        if (f->rows() != in.n_items) {
            throw ShapeError(std::string(to_string(f->modality)) + " features have " + std::to_string(f->rows()) +
                             " rows for " + std::to_string(in.n_items) + " items");
        }
        ModalityGraph g = cache_dir ? cached_modality_graph(*f, top_k, *cache_dir) : build_modality_graph(*f, top_k);
        ModalityInput mi;
        mi.modality = f->modality;
        mi.graph_t = g.adjacency.transpose();
        mi.graph = std::move(g.adjacency);
        mi.features = std::move(f);
        in.modalities.push_back(std::move(mi));
    }
    return in;
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

Matrix xavier(Index rows, Index cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    }
    return m;
}

Matrix gaussian(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    }
    return m;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::span<const Index> modality_dims, Index n_users, Index n_items,
                        std::uint64_t seed) {
    cfg.validate();
    if (modality_dims.size() != cfg.modalities.size()) {
        throw ShapeError("init_params: one feature dimension per configured modality is required");
    }
    const Index d = cfg.dim;
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.user_emb = gaussian(n_users, d, 0.01, rng);
    p.item_emb = gaussian(n_items, d, 0.01, rng);
    for (std::size_t k = 0; k < cfg.modalities.size(); ++k) {
        ModalityParams m;
        m.modality = cfg.modalities[k];
        m.proj_W = xavier(d, modality_dims[k], rng);
        m.proj_b = Matrix::Zero(1, d);
        m.gate_W = xavier(d, d, rng);
        m.gate_b = Matrix::Zero(1, d);
        m.pref_W = xavier(d, d, rng);
        m.pref_b = Matrix::Zero(1, d);
        p.modal.push_back(std::move(m));
    }
    p.attn_W = xavier(d, d, rng);
    p.attn_b = Matrix::Zero(1, d);
    p.attn_q = xavier(1, d, rng);
    return p;
}

// ---------------------------------------------------------------------------
// Forward building blocks

namespace {

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix out = x * w.transpose();
    out.rowwise() += b.row(0);
    return out;
}

double frobenius_or_throw(const Matrix& m, const char* what) {
    const double n = m.norm();
    if (n == 0.0) throw NumericError(std::string(what) + ": Frobenius norm is zero, cannot rescale");
    if (!std::isfinite(n)) throw NumericError(std::string(what) + ": non-finite values");
    return n;
}

// Gradient of X / sqrt(|X|_F) with respect to X.
Matrix root_norm_scale_backward(const Matrix& x, double norm, const Matrix& g_out) {
    const double inner = (g_out.array() * x.array()).sum();
    return g_out / std::sqrt(norm) - (0.5 * inner / std::pow(norm, 2.5)) * x;
}

}  // namespace

Matrix purify(const Matrix& features, const Matrix& item_emb, const ModalityParams& params, bool use_purifier,
              ModalityTrace* trace) {
    if (features.rows() != item_emb.rows()) throw ShapeError("purify: feature rows must match item embeddings");
    if (params.proj_W.cols() != features.cols()) throw ShapeError("purify: projection width does not match features");
    Matrix projected = affine(features, params.proj_W, params.proj_b);
    if (!use_purifier) {
        if (trace) {
            trace->projected = projected;
            trace->gate.resize(0, 0);
        }
        return projected;
    }
    Matrix gate = affine(projected, params.gate_W, params.gate_b).array().tanh().matrix();
    Matrix out = item_emb.cwiseProduct(gate);
    if (trace) {
        trace->projected = std::move(projected);
        trace->gate = std::move(gate);
    }
    return out;
}

Matrix propagate_ui(const Matrix& g0, const SparseMatrix& adjacency, int n_layers) {
    if (adjacency.rows() != adjacency.cols() || adjacency.cols() != g0.rows()) {
        throw ShapeError("propagate_ui: adjacency must be square and match the embedding rows");
    }
    Matrix acc = g0;
    Matrix cur = g0;
    Matrix next;
    for (int l = 0; l < n_layers; ++l) {
        spmm_into(adjacency, cur, next);
        acc += next;
        std::swap(cur, next);
    }
    acc *= 1.0 / static_cast<double>(n_layers + 1);
    return acc;
}

Matrix propagate_ii(const Matrix& item_modal, const SparseMatrix& graph, int n_layers, bool use_item_item,
                    ModalityTrace* trace) {
    if (graph.rows() != item_modal.rows() || graph.cols() != item_modal.rows()) {
        throw ShapeError("propagate_ii: graph must cover the same items as the features");
    }
    Matrix cur = item_modal;
    if (use_item_item) {
        Matrix next;
        for (int l = 0; l < n_layers; ++l) {
            spmm_into(graph, cur, next);
            std::swap(cur, next);
        }
    }
    const double norm = frobenius_or_throw(cur, "propagate_ii");
    Matrix out = cur / std::sqrt(norm);
    if (trace) {
        trace->propagated = std::move(cur);
        trace->norm = norm;
    }
    return out;
}

Matrix lift_to_users(const SparseMatrix& interactions, const Matrix& item_modal) {
    return spmm(row_normalize(interactions), item_modal);
}

FusionWeights fusion_weights(const ModelParams& params) {
    FusionWeights w;
    for (const auto& m : params.modal) {
        w.pref_W.push_back(&m.pref_W);
        w.pref_b.push_back(&m.pref_b);
    }
    w.attn_W = &params.attn_W;
    w.attn_b = &params.attn_b;
    w.attn_q = &params.attn_q;
    return w;
}

Matrix fuse(const Matrix& behavior, std::span<const Matrix> modal, const FusionWeights& weights, FusionTrace* trace) {
    const auto n_mod = static_cast<Index>(modal.size());
    if (n_mod == 0) throw Error("fuse: at least one modality is required");
    if (static_cast<Index>(weights.pref_W.size()) != n_mod) throw ShapeError("fuse: one preference transform per modality");
    const Index n = behavior.rows();

    FusionTrace local;
    FusionTrace& t = trace ? *trace : local;
    t.pref.assign(static_cast<std::size_t>(n_mod), Matrix());
    t.gated.assign(static_cast<std::size_t>(n_mod), Matrix());
    t.hidden.assign(static_cast<std::size_t>(n_mod), Matrix());
    Matrix logits(n, n_mod);
    for (Index m = 0; m < n_mod; ++m) {
        const auto k = static_cast<std::size_t>(m);
        if (modal[k].rows() != n || modal[k].cols() != behavior.cols()) {
            throw ShapeError("fuse: modality features must match the behavior block shape");
        }
        t.pref[k] = affine(behavior, *weights.pref_W[k], *weights.pref_b[k]).array().tanh().matrix();
        t.gated[k] = t.pref[k].cwiseProduct(modal[k]);
        t.hidden[k] = affine(t.gated[k], *weights.attn_W, *weights.attn_b).array().tanh().matrix();
        logits.col(m) = t.hidden[k] * weights.attn_q->row(0).transpose();
    }
    t.attn.resize(n, n_mod);
    for (Index r = 0; r < n; ++r) {
        const double hi = logits.row(r).maxCoeff();
        double s = 0.0;
        for (Index m = 0; m < n_mod; ++m) {
            t.attn(r, m) = std::exp(logits(r, m) - hi);
            s += t.attn(r, m);
        }
        t.attn.row(r) /= s;
    }
    Matrix side = Matrix::Zero(n, behavior.cols());
    for (Index m = 0; m < n_mod; ++m) {
        side += t.attn.col(m).asDiagonal() * t.gated[static_cast<std::size_t>(m)];
    }
    if (trace) t.side = side;
    return side;
}

ForwardOutput forward(const ModelParams& params, const ModelInputs& inputs, const ModelConfig& cfg,
                      ForwardTrace* trace) {
    const std::size_t n_mod = cfg.modalities.size();
    if (params.modal.size() != n_mod) throw ShapeError("forward: parameters do not match the configured modalities");
    if (params.user_emb.rows() != inputs.n_users || params.item_emb.rows() != inputs.n_items) {
        throw ShapeError("forward: embedding tables do not match the dataset");
    }
    ForwardTrace local;
    ForwardTrace& t = trace ? *trace : local;
    t.modal.assign(n_mod, ModalityTrace{});

    ForwardOutput out;
    for (std::size_t k = 0; k < n_mod; ++k) {
        const auto& in = inputs.modality(cfg.modalities[k]);
        Matrix purified = purify(in.features->data, params.item_emb, params.modal[k], cfg.use_purifier, &t.modal[k]);
        out.item_modal.push_back(propagate_ii(purified, in.graph, cfg.ii_layers, cfg.use_item_item, &t.modal[k]));
        out.user_modal.push_back(spmm(inputs.user_mean, out.item_modal.back()));
    }

    Matrix g0(inputs.n_users + inputs.n_items, cfg.dim);
    g0.topRows(inputs.n_users) = params.user_emb;
    g0.bottomRows(inputs.n_items) = params.item_emb;
    const Matrix behavior = propagate_ui(g0, inputs.norm_adjacency, cfg.ui_layers);
    out.behavior_user = behavior.topRows(inputs.n_users);
    out.behavior_item = behavior.bottomRows(inputs.n_items);

    const FusionWeights w = fusion_weights(params);
    out.side_user = fuse(out.behavior_user, out.user_modal, w, &t.user_fusion);
    out.side_item = fuse(out.behavior_item, out.item_modal, w, &t.item_fusion);
    out.attn_user = t.user_fusion.attn;
    out.attn_item = t.item_fusion.attn;

    t.side_user_norm = frobenius_or_throw(out.side_user, "fused user features");
    t.side_item_norm = frobenius_or_throw(out.side_item, "fused item features");
    out.final_user = out.behavior_user + out.side_user / std::sqrt(t.side_user_norm);
    out.final_item = out.behavior_item + out.side_item / std::sqrt(t.side_item_norm);
    return out;
}

// ---------------------------------------------------------------------------
// Reverse pass

namespace {

void add_affine_grads(const Matrix& g_pre, const Matrix& input, Matrix& g_w, Matrix& g_b) {
    g_w.noalias() += g_pre.transpose() * input;
    g_b.row(0) += g_pre.colwise().sum();
}

// Backward of `fuse` for one block. Adds into g_behavior, g_modal[m] and the
// fusion parameter gradients.
void fuse_backward(const Matrix& behavior, std::span<const Matrix> modal, const FusionWeights& w,
                   const FusionTrace& t, const Matrix& g_side, Matrix& g_behavior, std::vector<Matrix>& g_modal,
                   ModelParams& grads) {
    const auto n_mod = static_cast<Index>(modal.size());
    const Index n = behavior.rows();

    // d side / d attn_m = row-wise <g_side, gated_m>
    Matrix g_attn(n, n_mod);
    for (Index m = 0; m < n_mod; ++m) {
        g_attn.col(m) = (g_side.array() * t.gated[static_cast<std::size_t>(m)].array()).rowwise().sum().matrix();
    }
    // Softmax Jacobian: g_logit_m = a_m (g_a_m - sum_k a_k g_a_k)
    const Eigen::VectorXd mixed = (t.attn.array() * g_attn.array()).rowwise().sum().matrix();
    Matrix g_logit(n, n_mod);
    for (Index m = 0; m < n_mod; ++m) {
        g_logit.col(m) = t.attn.col(m).cwiseProduct(g_attn.col(m) - mixed);
    }

    for (Index m = 0; m < n_mod; ++m) {
        const auto k = static_cast<std::size_t>(m);
        // logit = hidden . q
        grads.attn_q.row(0) += g_logit.col(m).transpose() * t.hidden[k];
        Matrix g_hidden = g_logit.col(m) * w.attn_q->row(0);
        Matrix g_hidden_pre = g_hidden.cwiseProduct((1.0 - t.hidden[k].array().square()).matrix());
        add_affine_grads(g_hidden_pre, t.gated[k], grads.attn_W, grads.attn_b);

        Matrix g_gated = t.attn.col(m).asDiagonal() * g_side;
        g_gated.noalias() += g_hidden_pre * (*w.attn_W);

        Matrix g_pref = g_gated.cwiseProduct(modal[k]);
        g_modal[k] += g_gated.cwiseProduct(t.pref[k]);

        Matrix g_pref_pre = g_pref.cwiseProduct((1.0 - t.pref[k].array().square()).matrix());
        add_affine_grads(g_pref_pre, behavior, grads.modal[k].pref_W, grads.modal[k].pref_b);
        g_behavior.noalias() += g_pref_pre * (*w.pref_W[k]);
    }
}

}  // namespace

void forward_backward(const ModelParams& params, const ModelInputs& inputs, const ModelConfig& cfg,
                      const ForwardOutput& out, const ForwardTrace& t, const ForwardGrads& up, ModelParams& grads) {
    const std::size_t n_mod = cfg.modalities.size();
    const Index nu = inputs.n_users;
    const Index ni = inputs.n_items;

    // final = behavior + side / sqrt(|side|_F), per block
    Matrix g_behavior_user = up.final_user;
    if (up.behavior_user.size() > 0) g_behavior_user += up.behavior_user;
    Matrix g_behavior_item = up.final_item;
    Matrix g_side_user = root_norm_scale_backward(out.side_user, t.side_user_norm, up.final_user);
    Matrix g_side_item = root_norm_scale_backward(out.side_item, t.side_item_norm, up.final_item);
    if (up.side_item.size() > 0) g_side_item += up.side_item;

    std::vector<Matrix> g_user_modal(n_mod), g_item_modal(n_mod);
    for (std::size_t k = 0; k < n_mod; ++k) {
        g_user_modal[k] = Matrix::Zero(nu, cfg.dim);
        g_item_modal[k] = Matrix::Zero(ni, cfg.dim);
        if (k < up.item_modal.size() && up.item_modal[k].size() > 0) g_item_modal[k] += up.item_modal[k];
    }

    const FusionWeights w = fusion_weights(params);
    fuse_backward(out.behavior_user, out.user_modal, w, t.user_fusion, g_side_user, g_behavior_user, g_user_modal,
                  grads);
    fuse_backward(out.behavior_item, out.item_modal, w, t.item_fusion, g_side_item, g_behavior_item, g_item_modal,
                  grads);

    // Behavior: the adjacency is symmetric, so the adjoint of the layer mean
    // is the same layer mean applied to the gradient.
    Matrix g_behavior(nu + ni, cfg.dim);
    g_behavior.topRows(nu) = g_behavior_user;
    g_behavior.bottomRows(ni) = g_behavior_item;
    const Matrix g_g0 = propagate_ui(g_behavior, inputs.norm_adjacency, cfg.ui_layers);
    grads.user_emb += g_g0.topRows(nu);
    grads.item_emb += g_g0.bottomRows(ni);

    for (std::size_t k = 0; k < n_mod; ++k) {
        const auto& in = inputs.modality(cfg.modalities[k]);
        const auto& mt = t.modal[k];
        auto& gp = grads.modal[k];
        const auto& pm = params.modal[k];

        g_item_modal[k].noalias() += spmm(inputs.user_mean_t, g_user_modal[k]);
        Matrix g_x = root_norm_scale_backward(mt.propagated, mt.norm, g_item_modal[k]);
        if (cfg.use_item_item) {
            Matrix next;
            for (int l = 0; l < cfg.ii_layers; ++l) {
                spmm_into(in.graph_t, g_x, next);
                std::swap(g_x, next);
            }
        }

        Matrix g_projected;
        if (cfg.use_purifier) {
            grads.item_emb += g_x.cwiseProduct(mt.gate);
            Matrix g_gate_pre =
                g_x.cwiseProduct(params.item_emb).cwiseProduct((1.0 - mt.gate.array().square()).matrix());
            add_affine_grads(g_gate_pre, mt.projected, gp.gate_W, gp.gate_b);
            g_projected = g_gate_pre * pm.gate_W;
        } else {
            g_projected = std::move(g_x);
        }
        add_affine_grads(g_projected, in.features->data, gp.proj_W, gp.proj_b);
    }
}

double score(const Eigen::Ref<const RowVector>& user, const Eigen::Ref<const RowVector>& item) {
    if (user.size() != item.size()) throw ShapeError("score: embedding widths differ");
    return user.dot(item);
}

}  // namespace synergraph
