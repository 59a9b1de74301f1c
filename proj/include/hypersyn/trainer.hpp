#pragma once

// Training loop (whole-tree batches, Adam, early stopping on validation F1),
// evaluation, and the ablation harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/data.hpp"
#include "hypersyn/errors.hpp"
#include "hypersyn/metrics.hpp"
#include "hypersyn/model.hpp"
#include "hypersyn/optim.hpp"

namespace hypersyn::train {

struct TrainConfig {
    std::size_t batch_trees = 32;
    std::size_t max_epochs = 50;
    std::size_t patience = 10;
    AdamConfig adam{};
    std::uint64_t seed = 7;  // shuffling and dropout
    double threshold = 0.5;
    std::size_t loss_check_epochs = 5;
    /// Stop once validation F1 reaches this value (disabled when > 1).
    double target_val_f1 = 2.0;

    void validate() const {
        if (batch_trees == 0) throw ContractViolation("batch size must be positive");
        if (max_epochs == 0) throw ContractViolation("max_epochs must be positive");
        if (!(adam.lr >= 0.0)) throw ContractViolation("learning rate must be non-negative");
        if (!(adam.weight_decay >= 0.0)) throw ContractViolation("weight decay must be non-negative");
        if (!(threshold > 0.0 && threshold < 1.0)) throw ContractViolation("threshold must lie in (0, 1)");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    metrics::MetricsReport val;
    double seconds = 0.0;
    std::size_t frechet_fallbacks = 0;
};

inline nlohmann::json to_json(const EpochRecord& e) {
    return {{"event", "epoch"},
            {"epoch", e.epoch},
            {"train_loss", e.train_loss},
            {"val", metrics::to_json(e.val)},
            {"seconds", e.seconds},
            {"frechet_fallbacks", e.frechet_fallbacks}};
}

struct TrainResult {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_f1 = -1.0;
    double epoch0_loss = 0.0;
    bool loss_not_decreasing = false;  // flag: loss after the check window is not below epoch 0
    bool stopped_early = false;
};

/// Raised when the loss or a gradient becomes non-finite. Carries the last
/// parameters that produced a finite loss.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& msg, ParameterStore last_good, std::size_t epoch)
        : NumericalError(msg), last_good_(std::move(last_good)), epoch_(epoch) {}
    const ParameterStore& last_good() const noexcept { return last_good_; }
    std::size_t epoch() const noexcept { return epoch_; }

private:
    ParameterStore last_good_;
    std::size_t epoch_;
};

inline std::vector<std::size_t> trees_in_split(const data::Corpus& corpus, data::Split split) {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < corpus.trees.size(); ++t)
        for (const auto& n : corpus.trees[t].nodes)
            if (n.split == split) {
                out.push_back(t);
                break;
            }
    return out;
}

/// Mean negative log-likelihood of the training nodes in `batch`, recorded on
/// `tape`. Returns the loss tensor and the number of labelled nodes.
inline std::pair<ad::Tensor, std::size_t> batch_loss(ad::Tape& tape, const model::CosynModel& m,
                                                     const model::PreparedCorpus& p, std::span<const std::size_t> batch,
                                                     std::mt19937_64* dropout_rng, model::HgcnStats* stats = nullptr) {
    const auto sp = m.space(tape);
    const auto needed = m.authors(p, batch);
    const auto ctx = m.user_context_log(sp, p, needed, stats);
    ad::Tensor total;
    std::size_t count = 0;
    for (std::size_t t : batch) {
        const auto out = m.tree_forward(sp, p, t, ctx, dropout_rng);
        const auto& tree = p.corpus->trees[t];
        for (std::size_t j = 0; j < tree.size(); ++j) {
            if (tree.nodes[j].split != data::Split::Train) continue;
            const ad::Tensor lp = ad::slice(out.log_probs[j], static_cast<std::size_t>(tree.nodes[j].label_hate), 1);
            total = total.valid() ? total + lp : lp;
            ++count;
        }
    }
    if (count == 0) return {tape.scalar(0.0), 0};
    return {-(total / static_cast<double>(count)), count};
}

inline metrics::MetricsReport evaluate(const model::CosynModel& m, const model::PreparedCorpus& p, data::Split split,
                                       double threshold = 0.5) {
    const auto trees = trees_in_split(*p.corpus, split);
    if (trees.empty()) throw DataError("evaluate: corpus has no " + std::string(data::to_string(split)) + " split");
    auto probs = m.predict(p, trees);
    return metrics::evaluate_predictions(*p.corpus, probs, split, threshold);
}

using EpochCallback = std::function<void(const EpochRecord&)>;

inline TrainResult train(model::CosynModel& m, const model::PreparedCorpus& p, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
    cfg.validate();
    const auto train_trees = trees_in_split(*p.corpus, data::Split::Train);
    if (train_trees.empty()) throw DataError("train: corpus has no train split");
    if (trees_in_split(*p.corpus, data::Split::Val).empty()) throw DataError("train: corpus has no val split");

    ParameterStore& store = m.parameters();
    Adam adam(cfg.adam);
    std::mt19937_64 rng(cfg.seed);
    if (m.config().freeze_context) m.cache_context(p);

    TrainResult result;
    ParameterStore best = store;
    std::size_t since_best = 0;
    std::vector<std::size_t> order = train_trees;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t node_sum = 0;
        model::HgcnStats stats;
        ParameterStore last_good = store;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_trees) {
            const std::size_t e = std::min(order.size(), b + cfg.batch_trees);
            const std::span<const std::size_t> batch(order.data() + b, e - b);
            last_good.copy_values_from(store);
            store.zero_grad();
            ad::Tape tape;
            std::pair<ad::Tensor, std::size_t> step;
            try {
                step = batch_loss(tape, m, p, batch, &rng, &stats);
            } catch (const NumericalError& err) {
                throw DivergenceError(err.what(), std::move(last_good), epoch);
            }
            const auto& [loss, count] = step;
            if (count == 0) continue;
            if (!std::isfinite(loss.item()))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch), std::move(last_good), epoch);
            tape.backward(loss);
            try {
                adam.step(store);
            } catch (const NumericalError& err) {
                throw DivergenceError(err.what(), std::move(last_good), epoch);
            }
            loss_sum += loss.item() * static_cast<double>(count);
            node_sum += count;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = node_sum ? loss_sum / static_cast<double>(node_sum) : 0.0;
        try {
            rec.val = evaluate(m, p, data::Split::Val, cfg.threshold);
        } catch (const NumericalError& err) {
            throw DivergenceError(err.what(), std::move(last_good), epoch);
        }
        rec.frechet_fallbacks = stats.fallbacks;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (epoch == 0) result.epoch0_loss = rec.train_loss;
        result.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val.overall.f1 > result.best_val_f1) {
            result.best_val_f1 = rec.val.overall.f1;
            result.best_epoch = epoch;
            best.copy_values_from(store);
            since_best = 0;
        } else {
            ++since_best;
        }
        if (rec.val.overall.f1 >= cfg.target_val_f1 || since_best >= cfg.patience) {
            result.stopped_early = epoch + 1 < cfg.max_epochs;
            break;
        }
    }
    store.copy_values_from(best);
    const std::size_t w = std::min(cfg.loss_check_epochs, result.epochs.size());
    if (w >= 2) result.loss_not_decreasing = !(result.epochs[w - 1].train_loss < result.epochs[0].train_loss);
    return result;
}

struct AblationResult {
    model::Variant variant;
    TrainResult training;
    metrics::MetricsReport test;
};

/// Train and evaluate one variant; everything except the variant is shared.
inline AblationResult run_ablation(const data::Corpus& corpus, model::ModelConfig mcfg, const TrainConfig& tcfg,
                                   model::Variant variant, const EpochCallback& on_epoch = {}) {
    mcfg.variant = variant;
    model::CosynModel m(mcfg);
    const auto prep = m.prepare(corpus);
    AblationResult r{variant, train(m, prep, tcfg, on_epoch), {}};
    r.test = evaluate(m, prep, data::Split::Test, tcfg.threshold);
    return r;
}

}  // namespace hypersyn::train
