#pragma once

#include <vector>

#include "adaradar/autodiff.hpp"

namespace adaradar {

struct LossWeights {
    double alpha1 = 1.0;  // object-centric + localisation
    double alpha2 = 10.0; // soft dice
    double alpha3 = 5.0;  // range matching between heads
    double delta = 0.6;   // foreground share inside the object-centric term

    bool use_oc = true;
    bool use_cl = true;
    bool use_sd = true;
    bool use_mv = true;
    /// MSE between range profiles; off by default, used only in ablations.
    bool use_coherence = false;
    double coherence_weight = 1.0;

    void validate() const;
};

/// How cl_loss binarises the foreground probability.
enum class Binarize {
    StraightThrough, // hard 0.5 threshold forward, identity gradient backward
    Soft             // soft probability in both passes (for gradient checks)
};

/// Foreground probability map p_fg = 1 - probs[0], H x W.
Var foreground_prob(const Var& probs);

/// probs and gt are K x H x W; gt is one-hot. Throws if probs leave [0, 1].
Var oc_loss(const Var& probs, const Tensor& gt, double delta);
Var cl_loss(const Var& probs, const Tensor& gt, Binarize mode = Binarize::StraightThrough);
Var sd_loss(const Var& probs, const Tensor& gt, double eps = 1e-8);

/// Elementwise e^2/2 for |e| < 1, |e| - 1/2 otherwise.
Var huber(const Var& e);

/// Per-class range profiles: max over the last axis of K x R x W -> K x R.
Var range_profile(const Var& probs);
Var mv_loss(const Var& rd_probs, const Var& ra_probs);
Var coherence_loss(const Var& rd_probs, const Var& ra_probs);

struct LossTerms {
    Var oc, cl, sd, mv, col;
};

struct LossReport {
    double oc = 0.0, cl = 0.0, ca = 0.0, sd = 0.0, mv = 0.0, col = 0.0, total = 0.0;
    Var objective; // differentiable total
};

/// Evaluates every term over a batch (toggles only matter in combine).
/// oc, cl, mv and the coherence term are averaged over samples; the soft dice
/// sums run over the whole batch, as if the samples were stacked along range.
/// oc/cl/sd are summed over the RD and RA heads.
LossTerms batch_terms(const std::vector<Var>& rd_probs, const std::vector<Var>& ra_probs,
                      const std::vector<Tensor>& rd_gt, const std::vector<Tensor>& ra_gt,
                      const LossWeights& w, Binarize mode = Binarize::StraightThrough);

/// Single-sample form of batch_terms.
LossTerms compute_terms(const Var& rd_probs, const Var& ra_probs, const Tensor& rd_gt,
                        const Tensor& ra_gt, const LossWeights& w,
                        Binarize mode = Binarize::StraightThrough);

/// total = alpha1 (oc + cl) + alpha2 sd + alpha3 mv [+ coherence_weight col],
/// skipping disabled terms. Component values are reported either way.
LossReport combine(const LossTerms& terms, const LossWeights& w);

} // namespace adaradar
