#include "adaradar/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adaradar {

namespace {

constexpr double kProbTol = 1e-6;
constexpr double kLogFloor = 1e-12;

void check_pair(const char* what, const Var& probs, const Tensor& gt)
{
    if (probs.shape().size() != 3 || probs.dim(0) < 2) {
        throw std::invalid_argument(std::string(what) + ": expected K x H x W probabilities, got " +
                                    shape_str(probs.shape()));
    }
    if (gt.shape() != probs.shape()) {
        throw std::invalid_argument(std::string(what) + ": target shape " + shape_str(gt.shape()) +
                                    " differs from " + shape_str(probs.shape()));
    }
    for (double v : probs.value().data()) {
        if (!(v >= -kProbTol && v <= 1.0 + kProbTol)) {
            throw std::invalid_argument(std::string(what) + ": probability " + std::to_string(v) +
                                        " outside [0, 1]");
        }
    }
}

// 1 - gt[0], as an H x W tensor.
Tensor foreground_target(const Tensor& gt)
{
    std::size_t H = gt.dim(1), W = gt.dim(2);
    Tensor y(Shape{H, W});
    for (std::size_t i = 0; i < H * W; ++i) {
        y[i] = 1.0 - gt[i];
    }
    return y;
}

Tensor threshold(const Tensor& p)
{
    Tensor b(p.shape());
    for (std::size_t i = 0; i < p.numel(); ++i) {
        b[i] = p[i] > 0.5 ? 1.0 : 0.0;
    }
    return b;
}

double value_or_zero(const Var& v) { return v.defined() ? v.value().item() : 0.0; }

} // namespace

void LossWeights::validate() const
{
    if (alpha1 < 0 || alpha2 < 0 || alpha3 < 0 || coherence_weight < 0) {
        throw std::invalid_argument("loss weights must be non-negative");
    }
    if (alpha1 == 0 && alpha2 == 0 && alpha3 == 0) {
        throw std::invalid_argument("at least one of alpha1, alpha2, alpha3 must be positive");
    }
    if (!(delta >= 0.0 && delta <= 1.0)) {
        throw std::invalid_argument("delta must lie in [0, 1]");
    }
}

Var foreground_prob(const Var& probs)
{
    Var bg = reshape(slice(probs, 0, 0, 1), {probs.dim(1), probs.dim(2)});
    return rsub_scalar(1.0, bg);
}

Var oc_loss(const Var& probs, const Tensor& gt, double delta)
{
    check_pair("oc_loss", probs, gt);
    Var p = foreground_prob(probs);
    Tensor y = foreground_target(gt);
    Tensor gate = threshold(p.value());

    // Gate (1 - hard prediction) split into the two target regions.
    Tensor wf(y.shape()), wb(y.shape());
    double nf = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
        double g = 1.0 - gate[i];
        wf[i] = g * y[i];
        wb[i] = g * (1.0 - y[i]);
        nf += y[i];
        nb += 1.0 - y[i];
    }
    Var loss = constant(Tensor::scalar(0.0));
    if (nf > 0 && delta > 0) {
        Var bce = neg(log(clamp(p, kLogFloor, 1.0)));
        loss = add(loss, mul_scalar(sum(mul(constant(wf), bce)), delta / nf));
    }
    if (nb > 0 && delta < 1) {
        Var bce = neg(log(clamp(rsub_scalar(1.0, p), kLogFloor, 1.0)));
        loss = add(loss, mul_scalar(sum(mul(constant(wb), bce)), (1.0 - delta) / nb));
    }
    return loss;
}

Var cl_loss(const Var& probs, const Tensor& gt, Binarize mode)
{
    check_pair("cl_loss", probs, gt);
    Var p = foreground_prob(probs);
    Var b = mode == Binarize::StraightThrough ? straight_through(threshold(p.value()), p) : p;
    Tensor y = foreground_target(gt);
    Tensor not_y(y.shape());
    double positives = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
        not_y[i] = 1.0 - y[i];
        positives += y[i];
    }
    Var tp = sum(mul(b, constant(y)));
    Var fp = sum(mul(b, constant(not_y)));
    // TP + FN is the number of foreground target pixels.
    Var denom = add_scalar(fp, positives);
    if (denom.value().item() == 0.0) {
        return mul_scalar(sum(b), 0.0);
    }
    return rsub_scalar(1.0, div(tp, denom));
}

Var sd_loss(const Var& probs, const Tensor& gt, double eps)
{
    check_pair("sd_loss", probs, gt);
    std::size_t K = probs.dim(0), N = probs.dim(1) * probs.dim(2);
    Var P = reshape(probs, {K, N});
    Tensor Y = gt.reshaped({K, N});

    Tensor y2(Shape{K}, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < N; ++i) {
            y2[k] += Y.at(k, i) * Y.at(k, i);
        }
    }
    Var inter = sum_axis(mul(P, constant(Y)), 1);
    Var p2 = sum_axis(square(P), 1);
    Var denom = add_scalar(add(p2, constant(y2)), eps);
    Var terms = rsub_scalar(1.0, mul_scalar(div(inter, denom), 2.0));

    // A class missing from both target and prediction counts as solved.
    Tensor keep(Shape{K}, 1.0);
    for (std::size_t k = 0; k < K; ++k) {
        if (y2[k] == 0.0 && p2.value()[k] == 0.0) {
            keep[k] = 0.0;
        }
    }
    return mean(mul(terms, constant(keep)));
}

Var huber(const Var& e)
{
    return map(
        e, [](double v) { return std::abs(v) < 1.0 ? 0.5 * v * v : std::abs(v) - 0.5; },
        [](double v) { return std::abs(v) < 1.0 ? v : (v > 0 ? 1.0 : -1.0); });
}

Var range_profile(const Var& probs)
{
    if (probs.shape().size() != 3) {
        throw std::invalid_argument("range_profile: expected K x R x W, got " +
                                    shape_str(probs.shape()));
    }
    return max_over_axis(probs, 2).values;
}

namespace {

void check_heads(const char* what, const Var& rd, const Var& ra)
{
    if (rd.shape().size() != 3 || ra.shape().size() != 3 || rd.dim(0) != ra.dim(0) ||
        rd.dim(1) != ra.dim(1)) {
        throw std::invalid_argument(std::string(what) + ": heads " + shape_str(rd.shape()) + " and " +
                                    shape_str(ra.shape()) + " do not share classes and range bins");
    }
}

} // namespace

Var mv_loss(const Var& rd_probs, const Var& ra_probs)
{
    check_heads("mv_loss", rd_probs, ra_probs);
    return mean(huber(sub(range_profile(rd_probs), range_profile(ra_probs))));
}

Var coherence_loss(const Var& rd_probs, const Var& ra_probs)
{
    check_heads("coherence_loss", rd_probs, ra_probs);
    return mean(square(sub(range_profile(rd_probs), range_profile(ra_probs))));
}

LossTerms batch_terms(const std::vector<Var>& rd_probs, const std::vector<Var>& ra_probs,
                      const std::vector<Tensor>& rd_gt, const std::vector<Tensor>& ra_gt,
                      const LossWeights& w, Binarize mode)
{
    std::size_t n = rd_probs.size();
    if (n == 0 || ra_probs.size() != n || rd_gt.size() != n || ra_gt.size() != n) {
        throw std::invalid_argument("batch_terms: empty batch or mismatched lengths");
    }
    std::vector<Var> oc, cl, mv, col;
    for (std::size_t i = 0; i < n; ++i) {
        oc.push_back(add(oc_loss(rd_probs[i], rd_gt[i], w.delta), oc_loss(ra_probs[i], ra_gt[i], w.delta)));
        cl.push_back(add(cl_loss(rd_probs[i], rd_gt[i], mode), cl_loss(ra_probs[i], ra_gt[i], mode)));
        mv.push_back(mv_loss(rd_probs[i], ra_probs[i]));
        if (w.use_coherence) {
            col.push_back(coherence_loss(rd_probs[i], ra_probs[i]));
        }
    }
    auto avg = [n](const std::vector<Var>& xs) {
        Var s = xs[0];
        for (std::size_t i = 1; i < xs.size(); ++i) {
            s = add(s, xs[i]);
        }
        return n == 1 ? s : mul_scalar(s, 1.0 / static_cast<double>(n));
    };
    auto stack = [](const std::vector<Tensor>& ts) {
        if (ts.size() == 1) {
            return ts[0];
        }
        std::vector<Var> vs;
        for (const auto& t : ts) {
            vs.push_back(constant(t));
        }
        return concat(vs, 1).value();
    };
    auto stack_vars = [](const std::vector<Var>& vs) { return vs.size() == 1 ? vs[0] : concat(vs, 1); };

    LossTerms t;
    t.oc = avg(oc);
    t.cl = avg(cl);
    t.sd = add(sd_loss(stack_vars(rd_probs), stack(rd_gt)), sd_loss(stack_vars(ra_probs), stack(ra_gt)));
    t.mv = avg(mv);
    if (w.use_coherence) {
        t.col = avg(col);
    }
    return t;
}

LossTerms compute_terms(const Var& rd_probs, const Var& ra_probs, const Tensor& rd_gt,
                        const Tensor& ra_gt, const LossWeights& w, Binarize mode)
{
    return batch_terms({rd_probs}, {ra_probs}, {rd_gt}, {ra_gt}, w, mode);
}

LossReport combine(const LossTerms& t, const LossWeights& w)
{
    LossReport r;
    r.oc = value_or_zero(t.oc);
    r.cl = value_or_zero(t.cl);
    r.ca = r.oc + r.cl;
    r.sd = value_or_zero(t.sd);
    r.mv = value_or_zero(t.mv);
    r.col = value_or_zero(t.col);

    Var total;
    auto accumulate = [&](bool on, const Var& term, double weight) {
        if (!on || !term.defined() || weight == 0.0) {
            return;
        }
        Var scaled = mul_scalar(term, weight);
        total = total.defined() ? add(total, scaled) : scaled;
    };
    accumulate(w.use_oc, t.oc, w.alpha1);
    accumulate(w.use_cl, t.cl, w.alpha1);
    accumulate(w.use_sd, t.sd, w.alpha2);
    accumulate(w.use_mv, t.mv, w.alpha3);
    accumulate(w.use_coherence, t.col, w.coherence_weight);
    r.objective = total.defined() ? total : constant(Tensor::scalar(0.0));
    r.total = r.objective.value().item();
    return r;
}

} // namespace adaradar
