#include "fhproxy/proxy.hpp"

#include "fhproxy/errors.hpp"
#include "fhproxy/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fhproxy {

void ProxyConfig::validate() const {
    if (k < 1) throw InvalidInputError("ProxyConfig: k must be >= 1");
    if (refit_batch < 1) throw InvalidInputError("ProxyConfig: refit_batch must be >= 1");
    if (refit_epochs > 0 && !(refit_lr0 > 0.0))
        throw InvalidInputError("ProxyConfig: refit_lr0 must be > 0");
    sgd.validate();
}

LinearClassifier refit_classifier(const EpochRecord& record, std::span<const uint32_t> y_train,
                                  const ProxyConfig& cfg, Rng& rng) {
    cfg.validate();
    const size_t n = record.h_train.rows();
    const size_t d = record.h_train.cols();
    const size_t c = record.cls_weight.rows();
    if (record.cls_weight.cols() != d)
        throw InvalidInputError("refit_classifier: classifier/feature dim mismatch");
    if (y_train.size() != n)
        throw InvalidInputError("refit_classifier: label count mismatch");

    LinearClassifier cls{record.cls_weight, record.cls_bias};
    if (cfg.refit_epochs == 0) return cls;

    const size_t batch = std::min<size_t>(cfg.refit_batch, n);
    const size_t steps_per_epoch = (n + batch - 1) / batch;
    const uint64_t total_steps = static_cast<uint64_t>(cfg.refit_epochs) * steps_per_epoch;

    Matrix vel_w(c, d), vel_b(1, c);
    Matrix xb(batch, d), dw, db;
    std::vector<uint32_t> yb(batch);
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    uint64_t step = 0;
    for (uint32_t e = 0; e < cfg.refit_epochs; ++e) {
        rng.shuffle(order);
        for (size_t start = 0; start < n; start += batch) {
            const size_t bn = std::min(batch, n - start);
            if (xb.rows() != bn) xb = Matrix(bn, d);
            yb.resize(bn);
            for (size_t i = 0; i < bn; ++i) {
                const uint32_t src = order[start + i];
                std::copy_n(record.h_train.data() + static_cast<size_t>(src) * d, d,
                            xb.data() + i * d);
                yb[i] = y_train[src];
            }

            const Matrix probs = softmax(linear_forward(xb, cls.weight, cls.bias));
            const Matrix dlogits = softmax_xent_grad(probs, yb);
            linear_backward(xb, dlogits, dw, db);

            const double lr = linear_lr(step, total_steps, cfg.refit_lr0);
            sgd_step(cls.weight, dw, vel_w, cfg.sgd, lr);
            sgd_step(cls.bias, db, vel_b, cfg.sgd, lr);
            ++step;
        }
    }
    return cls;
}

Matrix ensemble_predict(std::span<const EnsembleMember> members) {
    if (members.empty()) throw InvalidInputError("ensemble_predict: no members");

    const size_t n = members[0].h_val->rows();
    const size_t c = members[0].classifier->weight.rows();

    Matrix mean(n, c);
    std::vector<double> acc(n * c, 0.0);
    for (const EnsembleMember& m : members) {
        if (m.h_val->rows() != n || m.classifier->weight.rows() != c)
            throw InvalidInputError("ensemble_predict: member shape mismatch");
        const Matrix probs = softmax(linear_forward(*m.h_val, m.classifier->weight,
                                                    m.classifier->bias));
        const float* p = probs.data();
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(p[i]);
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (size_t i = 0; i < acc.size(); ++i) mean.data()[i] = static_cast<float>(acc[i] * inv);
    return mean;
}

Rng member_rng(uint64_t base, uint32_t epoch) {
    return Rng(Rng::mix(base, epoch));
}

namespace {

// Refit every record in `records`, one independent child stream per epoch
// index. Safe to run members concurrently; output order is fixed.
std::vector<LinearClassifier> refit_window(const std::vector<const EpochRecord*>& records,
                                           const FeatureHistory& history, const ProxyConfig& cfg,
                                           uint64_t base, uint32_t threads) {
    std::vector<LinearClassifier> fitted(records.size());
    parallel_for(records.size(), threads, [&](size_t i) {
        Rng child = member_rng(base, records[i]->epoch);
        fitted[i] = refit_classifier(*records[i], history.y_train, cfg, child);
    });
    return fitted;
}

} // namespace

ProxyEstimate estimate(const FeatureHistory& history, uint32_t end_epoch, const ProxyConfig& cfg,
                       Rng& rng) {
    cfg.validate();
    history.validate();
    const uint64_t base = rng.next_u64();

    const auto records = window(history, end_epoch, cfg.k);
    const auto fitted = refit_window(records, history, cfg, base, cfg.threads);

    std::vector<EnsembleMember> members(records.size());
    for (size_t i = 0; i < records.size(); ++i)
        members[i] = EnsembleMember{&fitted[i], &records[i]->h_val};

    ProxyEstimate est;
    est.estimate_epoch = end_epoch;
    est.mean_probs = ensemble_predict(members);
    est.accuracy = top1_accuracy(est.mean_probs, history.y_val);
    est.per_member_accuracy.reserve(members.size());
    for (const EnsembleMember& m : members) {
        const Matrix probs = softmax(linear_forward(*m.h_val, m.classifier->weight,
                                                    m.classifier->bias));
        est.per_member_accuracy.push_back(top1_accuracy(probs, history.y_val));
    }
    return est;
}

Matrix correctness_timeline(const FeatureHistory& history, const ProxyConfig& cfg, Rng& rng,
                            TimelineMode mode) {
    cfg.validate();
    history.validate();
    if (history.epochs.empty())
        throw InvalidInputError("correctness_timeline: empty history");

    const size_t n_val = history.n_val;
    const size_t n_epochs = history.epochs.size();
    const uint64_t base = rng.next_u64();

    // Per-epoch probability matrices for the selected classifier flavor.
    std::vector<Matrix> probs(n_epochs);
    if (mode == TimelineMode::kOriginal) {
        for (size_t t = 0; t < n_epochs; ++t) {
            const EpochRecord& rec = history.epochs[t];
            probs[t] = softmax(linear_forward(rec.h_val, rec.cls_weight, rec.cls_bias));
        }
    } else {
        std::vector<const EpochRecord*> records(n_epochs);
        for (size_t t = 0; t < n_epochs; ++t) records[t] = &history.epochs[t];
        const auto fitted = refit_window(records, history, cfg, base, cfg.threads);
        for (size_t t = 0; t < n_epochs; ++t)
            probs[t] = softmax(linear_forward(records[t]->h_val, fitted[t].weight,
                                              fitted[t].bias));
    }

    Matrix timeline(n_val, n_epochs);
    std::vector<double> acc(n_val * history.c);
    for (size_t t = 0; t < n_epochs; ++t) {
        const Matrix* col_probs = &probs[t];
        Matrix mean;
        if (mode == TimelineMode::kEnsemble) {
            const size_t lo = t + 1 >= cfg.k ? t + 1 - cfg.k : 0;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (size_t m = lo; m <= t; ++m) {
                const float* p = probs[m].data();
                for (size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(p[i]);
            }
            mean = Matrix(n_val, history.c);
            const double inv = 1.0 / static_cast<double>(t - lo + 1);
            for (size_t i = 0; i < acc.size(); ++i)
                mean.data()[i] = static_cast<float>(acc[i] * inv);
            col_probs = &mean;
        }
        for (size_t i = 0; i < n_val; ++i) {
            const bool hit = argmax_row(*col_probs, i) == history.y_val[i];
            timeline.at(i, t) = hit ? 1.0f : 0.0f;
        }
    }
    return timeline;
}

AgreementCounts agreement_breakdown(std::span<const uint8_t> current,
                                    std::span<const uint8_t> final_correct) {
    if (current.size() != final_correct.size())
        throw InvalidInputError("agreement_breakdown: length mismatch");
    AgreementCounts counts;
    for (size_t i = 0; i < current.size(); ++i) {
        const bool cur = current[i] != 0;
        const bool fin = final_correct[i] != 0;
        if (cur && fin) ++counts.tp;
        else if (!cur && !fin) ++counts.tn;
        else if (cur && !fin) ++counts.fp;
        else ++counts.fn;
    }
    return counts;
}

uint64_t timeline_flip_count(const Matrix& timeline) {
    uint64_t flips = 0;
    for (size_t i = 0; i < timeline.rows(); ++i) {
        for (size_t t = 1; t < timeline.cols(); ++t)
            if (timeline.at(i, t) != timeline.at(i, t - 1)) ++flips;
    }
    return flips;
}

} // namespace fhproxy
