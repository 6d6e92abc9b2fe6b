#include "noiselens/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "noiselens/error.hpp"

namespace noiselens {

namespace {

// Softmax statistics of one adjusted-logit row, kept in log space so the
// loss stays finite when the labeled probability underflows.
struct SoftmaxStats {
    std::vector<double> probs;
    double log_p_label = 0.0;
    double one_minus_p_label = 0.0;  // sum of the other classes' probabilities
};

SoftmaxStats softmax_stats(std::span<const double> adjusted, std::size_t label) {
    const double top = *std::max_element(adjusted.begin(), adjusted.end());
    SoftmaxStats st;
    st.probs.resize(adjusted.size());
    double total = 0.0;
    for (std::size_t j = 0; j < adjusted.size(); ++j) {
        st.probs[j] = std::exp(adjusted[j] - top);
        total += st.probs[j];
    }
    double rest = 0.0;
    for (std::size_t j = 0; j < adjusted.size(); ++j) {
        st.probs[j] /= total;
        if (j != label) rest += st.probs[j];
    }
    st.log_p_label = std::min(0.0, adjusted[label] - top - std::log(total));
    st.one_minus_p_label = rest;
    return st;
}

void check_finite(std::span<const double> logits) {
    for (double v : logits) {
        if (!std::isfinite(v)) throw Error("non-finite logit");
    }
}

std::vector<double> adjusted_logits(std::span<const double> logits, ClassIndex label, const TransitionMatrix& tm,
                                    const ClassPrior& prior, const MarginConfig& cfg) {
    const std::size_t c = logits.size();
    if (label >= c) throw Error("label " + std::to_string(label) + " out of range");
    if (tm.values.rows() != c || tm.values.cols() != c) throw Error("transition matrix size differs from logit width");
    if (prior.values.size() != c) throw Error("class prior size differs from logit width");
    std::vector<double> a(c);
    const auto m_row = tm.values.row(label);
    for (std::size_t j = 0; j < c; ++j) {
        double v = logits[j];
        if (cfg.delta != 0.0) v += cfg.delta * m_row[j];
        if (cfg.t != 0.0) {
            if (!(prior.values[j] > 0.0)) throw Error("class prior entry must be positive for the balanced margin");
            v += cfg.t * std::log(prior.values[j]);
        }
        a[j] = v / cfg.s;
    }
    return a;
}

}  // namespace

void MarginConfig::validate() const {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("margin temperature s must be positive");
    if (!(delta >= 0.0) || !(t >= 0.0) || !(gamma >= 0.0)) throw Error("delta, t and gamma must be nonnegative");
    if (!std::isfinite(delta) || !std::isfinite(t) || !std::isfinite(gamma)) throw Error("non-finite margin config");
}

double LossBatch::mean_loss() const {
    if (per_sample_loss.empty()) return 0.0;
    double total = 0.0;
    for (double v : per_sample_loss) total += v;
    return total / static_cast<double>(per_sample_loss.size());
}

std::vector<double> nabm_probability(std::span<const double> logits, ClassIndex label, const TransitionMatrix& tm,
                                     const ClassPrior& prior, const MarginConfig& cfg) {
    cfg.validate();
    check_finite(logits);
    const auto a = adjusted_logits(logits, label, tm, prior, cfg);
    return softmax_stats(a, label).probs;
}

double cross_entropy(std::span<const double> logits, ClassIndex label) {
    check_finite(logits);
    if (label >= logits.size()) throw Error("label " + std::to_string(label) + " out of range");
    return -softmax_stats(logits, label).log_p_label;
}

double focal_loss(double prob_at_label, double gamma) {
    if (!(prob_at_label > 0.0)) throw Error("focal loss needs a positive probability");
    if (prob_at_label > 1.0) throw Error("focal loss probability exceeds 1");
    if (!(gamma >= 0.0)) throw Error("focal exponent must be nonnegative");
    return std::pow(1.0 - prob_at_label, gamma) * -std::log(prob_at_label);
}

LossBatch nabm_loss_batch(const Matrix& logits, std::span<const ClassIndex> labels, const TransitionMatrix& tm,
                          const ClassPrior& prior, const MarginConfig& cfg) {
    cfg.validate();
    if (labels.size() != logits.rows()) throw Error("label count differs from logit rows");
    const std::size_t b = logits.rows();
    const std::size_t c = logits.cols();
    LossBatch out;
    out.logits = logits;
    out.labels.assign(labels.begin(), labels.end());
    out.per_sample_loss.resize(b);
    out.nabm_prob.resize(b);
    out.grad_logits = Matrix(b, c);
    const double gamma = cfg.gamma;
    for (std::size_t i = 0; i < b; ++i) {
        const auto z = logits.row(i);
        check_finite(z);
        const ClassIndex y = labels[i];
        const auto st = softmax_stats(adjusted_logits(z, y, tm, prior, cfg), y);
        const double neg_log_p = -st.log_p_label;
        const double q = st.one_minus_p_label;
        const double p = std::exp(st.log_p_label);

        // loss = (1-p)^g * (-log p)
        // dloss/dp * p = g (1-p)^(g-1) p log p - (1-p)^g
        double modulator = 1.0;
        double dloss_dp_times_p = -1.0;
        if (gamma != 0.0) {
            modulator = std::pow(q, gamma);
            const double focal_term = q > 0.0 ? gamma * std::pow(q, gamma - 1.0) * p * st.log_p_label : 0.0;
            dloss_dp_times_p = focal_term - modulator;
        }
        out.per_sample_loss[i] = modulator * neg_log_p;
        out.nabm_prob[i] = p;

        // dp/da_j = p (1[j=y] - p_j); da_j/dz_j = 1/s
        auto g = out.grad_logits.row(i);
        const double scale = dloss_dp_times_p / cfg.s;
        for (std::size_t j = 0; j < c; ++j) {
            const double indicator_minus_p = (j == y) ? q : -st.probs[j];
            g[j] = scale * indicator_minus_p;
        }
        if (!std::isfinite(out.per_sample_loss[i])) throw Error("non-finite loss", i);
    }
    return out;
}

}  // namespace noiselens
