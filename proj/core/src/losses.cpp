#include "synergraph/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace synergraph {

void CircleParams::validate() const {
    if (margin < 0.0 || margin > 1.0) throw Error("circle margin must lie in [0, 1]");
    if (!(scale > 0.0)) throw Error("circle scale must be positive");
    for (double c : {conf_textual, conf_visual}) {
        if (c < 0.0 || c > 1.0) throw Error("circle confidence must lie in [0, 1]");
    }
}

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void check_batch(const Matrix& a, const Matrix& b, const Matrix& c, const char* op) {
    if (a.rows() != b.rows() || a.rows() != c.rows() || a.cols() != b.cols() || a.cols() != c.cols()) {
        throw ShapeError(std::string(op) + ": batch matrices must share a shape");
    }
}

void prepare(Matrix* g, const Matrix& like) {
    if (g) g->setZero(like.rows(), like.cols());
}

// Stable log-sum-exp plus softmax weights.
double logsumexp(const std::vector<double>& x, std::vector<double>* weights) {
    const double hi = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - hi);
    if (weights) {
        weights->resize(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) (*weights)[k] = std::exp(x[k] - hi) / s;
    }
    return hi + std::log(s);
}

}  // namespace

double bpr_loss(const Matrix& users, const Matrix& pos, const Matrix& neg, BatchGrads grads) {
    check_batch(users, pos, neg, "bpr_loss");
    prepare(grads.a, users);
    prepare(grads.b, pos);
    prepare(grads.c, neg);
    double loss = 0.0;
    for (Index r = 0; r < users.rows(); ++r) {
        const double diff = users.row(r).dot(pos.row(r)) - users.row(r).dot(neg.row(r));
        loss += softplus(-diff);
        // d softplus(-x)/dx = -sigmoid(-x)
        const double g = -sigmoid(-diff);
        if (grads.a) grads.a->row(r) = g * (pos.row(r) - neg.row(r));
        if (grads.b) grads.b->row(r) = g * users.row(r);
        if (grads.c) grads.c->row(r) = -g * users.row(r);
    }
    return loss;
}

double emb_reg(const Matrix& users, const Matrix& pos, const Matrix& neg, double lambda, BatchGrads grads) {
    check_batch(users, pos, neg, "emb_reg");
    if (lambda < 0.0) throw Error("emb_reg: lambda must be non-negative");
    if (grads.a) *grads.a = 2.0 * lambda * users;
    if (grads.b) *grads.b = 2.0 * lambda * pos;
    if (grads.c) *grads.c = 2.0 * lambda * neg;
    return lambda * (users.squaredNorm() + pos.squaredNorm() + neg.squaredNorm());
}

double circle_loss(const Matrix& users, const Matrix& fused_pos, const Matrix& modal_pos,
                   const CircleParams& p, Modality modality, BatchGrads grads) {
    check_batch(users, fused_pos, modal_pos, "circle_loss");
    const Index batch = users.rows();
    if (batch == 0) throw ShapeError("circle_loss: empty batch");
    const double m = p.margin;
    const double conf = p.confidence(modality);
    const double delta_p = 1.0 - m;
    const double delta_n = m;

    std::vector<double> s_pos(batch), s_neg(batch), l_pos(batch), l_neg(batch);
    std::vector<double> dl_pos(batch), dl_neg(batch);  // d logit / d similarity
    std::vector<double> nu(batch), nf(batch), nm(batch);
    for (Index r = 0; r < batch; ++r) {
        nu[r] = users.row(r).norm();
        nf[r] = fused_pos.row(r).norm();
        nm[r] = modal_pos.row(r).norm();
        if (nu[r] == 0.0 || nf[r] == 0.0 || nm[r] == 0.0) {
            throw NumericError("circle_loss: zero-norm embedding in batch row " + std::to_string(r));
        }
        s_pos[r] = users.row(r).dot(fused_pos.row(r)) / (nu[r] * nf[r]);
        s_neg[r] = users.row(r).dot(modal_pos.row(r)) / (nu[r] * nm[r]);

        const double ap = std::max(-s_pos[r] + 1.0 + m, 0.0);
        const double an_raw = std::max(s_neg[r] + m, 0.0);
        const double an = an_raw * (1.0 - conf);
        l_pos[r] = -ap * (s_pos[r] - delta_p) * p.scale;
        l_neg[r] = an * (s_neg[r] - delta_n) * p.scale;

        const double dap = ap > 0.0 ? -1.0 : 0.0;
        const double dan = an_raw > 0.0 ? (1.0 - conf) : 0.0;
        dl_pos[r] = -(dap * (s_pos[r] - delta_p) + ap) * p.scale;
        dl_neg[r] = (dan * (s_neg[r] - delta_n) + an) * p.scale;
    }

    std::vector<double> w_pos, w_neg;
    const double t = logsumexp(l_pos, &w_pos) + logsumexp(l_neg, &w_neg);
    const double loss = softplus(t);

    if (grads.a || grads.b || grads.c) {
        prepare(grads.a, users);
        prepare(grads.b, fused_pos);
        prepare(grads.c, modal_pos);
        const double dt = sigmoid(t);
        for (Index r = 0; r < batch; ++r) {
            const double gs_pos = dt * w_pos[r] * dl_pos[r];
            const double gs_neg = dt * w_neg[r] * dl_neg[r];
            // d cos(a, b) / da = b / (|a||b|) - cos * a / |a|^2
            if (grads.a) {
                grads.a->row(r) = gs_pos * (fused_pos.row(r) / (nu[r] * nf[r]) - s_pos[r] * users.row(r) / (nu[r] * nu[r])) +
                                  gs_neg * (modal_pos.row(r) / (nu[r] * nm[r]) - s_neg[r] * users.row(r) / (nu[r] * nu[r]));
            }
            if (grads.b) {
                grads.b->row(r) =
                    gs_pos * (users.row(r) / (nu[r] * nf[r]) - s_pos[r] * fused_pos.row(r) / (nf[r] * nf[r]));
            }
            if (grads.c) {
                grads.c->row(r) =
                    gs_neg * (users.row(r) / (nu[r] * nm[r]) - s_neg[r] * modal_pos.row(r) / (nm[r] * nm[r]));
            }
        }
    }
    return loss;
}

double total_loss(const LossComponents& parts, double coefficient, bool use_circle) {
    const std::pair<const char*, double> named[] = {{"bpr", parts.bpr},
                                                    {"reg", parts.reg},
                                                    {"circle_textual", parts.circle_textual},
                                                    {"circle_visual", parts.circle_visual}};
    for (const auto& [name, v] : named) {
        if (!std::isfinite(v)) throw NumericError(std::string("loss component '") + name + "' is not finite");
    }
    double total = parts.bpr + parts.reg;
    if (use_circle) total += coefficient * (parts.circle_textual + parts.circle_visual);
    return total;
}

}  // namespace synergraph
