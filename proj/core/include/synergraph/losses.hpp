#pragma once

#include "synergraph/common.hpp"

namespace synergraph {

/// Hyperparameters of the modality-discriminating circle loss.
struct CircleParams {
    double margin = 0.75;          // M; positive optimum 1-M, negative optimum M
    double scale = 1000.0;         // logit amplification
    double conf_textual = 0.7;     // C_neg for the textual modality
    double conf_visual = 0.3;      // C_neg for the visual modality
    double coefficient = 0.1;      // weight of the circle terms in the total loss

    double confidence(Modality m) const { return m == Modality::textual ? conf_textual : conf_visual; }
    void validate() const;
};

/// Row gradients of a batch loss, resized and overwritten. Any pointer may be null.
struct BatchGrads {
    Matrix* a = nullptr;
    Matrix* b = nullptr;
    Matrix* c = nullptr;
};

/// Sum over the batch of softplus(-(u.pos - u.neg)).
double bpr_loss(const Matrix& users, const Matrix& pos, const Matrix& neg, BatchGrads grads = {});

/// lambda * (|U|^2 + |Ip|^2 + |In|^2), squared Frobenius norms.
double emb_reg(const Matrix& users, const Matrix& pos, const Matrix& neg, double lambda,
               BatchGrads grads = {});

/// Circle loss pulling users toward the fused positive item and away from
/// that item's single-modality embedding:
///   softplus(logsumexp_b L_pos + logsumexp_b L_neg).
/// Throws NumericError on any zero-norm row.
double circle_loss(const Matrix& users, const Matrix& fused_pos, const Matrix& modal_pos,
                   const CircleParams& params, Modality modality, BatchGrads grads = {});

struct LossComponents {
    double bpr = 0.0;
    double reg = 0.0;
    double circle_textual = 0.0;
    double circle_visual = 0.0;
};

/// bpr + reg + coefficient * (circle_textual + circle_visual); circle terms
/// dropped when `use_circle` is false. Non-finite components throw.
double total_loss(const LossComponents& parts, double coefficient, bool use_circle = true);

/// Numerically stable log(1 + e^x).
double softplus(double x);
double sigmoid(double x);

}  // namespace synergraph
