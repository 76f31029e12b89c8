#pragma once

#include "fhproxy/feature_store.hpp"
#include "fhproxy/numkit.hpp"
#include "fhproxy/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fhproxy {

struct LinearClassifier {
    Matrix weight; // c x d
    Matrix bias;   // 1 x c
};

struct ProxyConfig {
    uint32_t k = 10;            // trailing window size
    uint32_t refit_epochs = 5;  // epochs of classifier refit per window member
    uint32_t refit_batch = 1024; // clipped to n_train
    double refit_lr0 = 0.05;    // linear decay to 0 over all refit steps
    SgdConfig sgd{0.05f, 0.9f, 5e-4f};
    uint32_t threads = 0; // parallel refits across window members; 0 = hardware

    void validate() const;
};

struct ProxyEstimate {
    uint32_t estimate_epoch = 0;
    double accuracy = 0.0;
    Matrix mean_probs; // n_val x c
    std::vector<double> per_member_accuracy;
};

// Classifier refit on one epoch's saved train features, warm-started from
// the saved weights. refit_epochs == 0 returns the saved classifier as-is.
LinearClassifier refit_classifier(const EpochRecord& record, std::span<const uint32_t> y_train,
                                  const ProxyConfig& cfg, Rng& rng);

struct EnsembleMember {
    const LinearClassifier* classifier;
    const Matrix* h_val; // the member's own epoch's validation features
};

// Elementwise mean over members of softmax(h_val * W^T + b).
Matrix ensemble_predict(std::span<const EnsembleMember> members);

// Child stream used for the refit of a given epoch inside estimate() and
// correctness_timeline(); exposed so callers can reproduce a single member's
// refit independently.
Rng member_rng(uint64_t base, uint32_t epoch);

// The full estimate: window -> refit per record -> softmax-mean ensemble ->
// top-1 accuracy against y_val. Deterministic given (history, cfg, seed).
ProxyEstimate estimate(const FeatureHistory& history, uint32_t end_epoch, const ProxyConfig& cfg,
                       Rng& rng);

enum class TimelineMode { kOriginal, kOptimized, kEnsemble };

// Binary matrix, n_val x n_epochs: entry (i, t) is 1 iff val sample i is
// correctly classified at the t-th stored epoch by the selected classifier
// mode. Ensemble columns use the trailing-k window ending at that epoch.
Matrix correctness_timeline(const FeatureHistory& history, const ProxyConfig& cfg, Rng& rng,
                            TimelineMode mode);

struct AgreementCounts {
    uint64_t tp = 0; // current correct, final correct
    uint64_t tn = 0; // current wrong,   final wrong
    uint64_t fp = 0; // current correct, final wrong
    uint64_t fn = 0; // current wrong,   final correct
};

AgreementCounts agreement_breakdown(std::span<const uint8_t> current,
                                    std::span<const uint8_t> final_correct);

// Total 0<->1 transitions along each row of a correctness timeline.
uint64_t timeline_flip_count(const Matrix& timeline);

} // namespace fhproxy
