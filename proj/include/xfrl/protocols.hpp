#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "xfrl/datasets.hpp"
#include "xfrl/mmd.hpp"
#include "xfrl/networks.hpp"
#include "xfrl/report.hpp"

namespace xfrl::proto {

struct TrainConfig {
    std::size_t epochs = 10;      // 0 = evaluate the initialization only
    std::size_t batch_size = 32;  // even, >= 2
    double base_lr = 0.01;
    std::uint64_t seed = 1;
    std::size_t eval_every = 1;  // 0 = evaluate only after the final epoch
    double head_lr_multiplier = 1.0;
    std::vector<double> lr_multipliers;  // per conv block; empty = all ones

    void validate() const;
};

enum class Estimator { linear, quadratic };

// Feature-alignment penalty: lambda * sum_l alpha_l * mmd2_l at the tapped
// conv blocks, with a fresh median-heuristic kernel bank per layer per batch.
struct AdaptationPlan {
    double lambda = 0.0;
    std::vector<std::size_t> layers;  // 1-based conv blocks to align
    std::vector<double> alphas;       // same length as layers, nonnegative
    Estimator estimator = Estimator::linear;
    int bank_size = 5;

    double decay_factor = 0.1;  // lambda multiplier from the decay epoch on
    double decay_at = 0.7;      // decay epoch = floor(decay_at * epochs), 1-based; <=0 disables

    std::size_t offshelf_upto = 0;  // two-step only: blocks 1..offshelf frozen in step 1
    std::size_t step1_epochs = 0;   // two-step only
    double step1_lr = 0.0;          // two-step only; 0 = base_lr

    std::size_t source_pool = 0;  // cap on source samples drawn per epoch; 0 = all

    void validate(std::size_t num_layers) const;
};

struct ExperimentReport {
    std::vector<std::size_t> tap_ids;  // per-column layer ids for the mmd cells
    std::vector<rep::EpochRow> rows;
    double final_acc = -1.0;   // classification heads
    double final_loss = -1.0;  // reconstruction heads (mean test error)
};

// Fraction of correct argmax predictions; ties resolve to the lower index.
double evaluate(const net::NetworkModel& m, const data::LabeledSet& s);

// Mini-batch SGD on one task, honoring m.frozen_upto (the frozen prefix is
// computed once per image and cached, including for the test set).
// Classification heads train cross-entropy; reconstruction heads regress the
// input image. Epochs with no evaluation leave test_acc empty.
ExperimentReport train_supervised(net::NetworkModel& m, const data::TaskData& task,
                                  const TrainConfig& tc);

net::NetworkModel train_scratch(net::Arch arch, const data::TaskData& task, const TrainConfig& tc,
                                ExperimentReport* rep = nullptr);

// Copy k blocks from `source`, retrain on `task`; freeze pins the prefix.
// k = 0 reproduces train_scratch exactly.
net::NetworkModel transfer_train(const net::NetworkModel& source, std::size_t k, bool freeze,
                                 const data::TaskData& task, const TrainConfig& tc,
                                 ExperimentReport* rep = nullptr);

// Accuracy after transferring k = 0..L blocks (0 = scratch baseline); `ks`
// restricts the nonzero depths. relative = accuracy - baseline accuracy.
std::vector<rep::SweepRow> transferability_sweep(const net::NetworkModel& source,
                                                 const data::TaskData& task, const TrainConfig& tc,
                                                 bool freeze = true,
                                                 const std::vector<std::size_t>* ks = nullptr);

// Sequential transfer through `stages`: scratch on the first task (with
// `first_head`, which may be a reconstruction head), then for each next task
// copy all blocks, swap to a classification head, and fine-tune everything.
// Stage image sizes may differ; all stages share the input channel count.
net::NetworkModel transitive_chain(net::Arch arch, const std::vector<data::TaskData>& stages,
                                   const TrainConfig& tc,
                                   std::vector<ExperimentReport>* reps = nullptr,
                                   net::HeadKind first_head = net::HeadKind::classification);

// Joint adaptation: initialize from `source_model` (all blocks copied, fresh
// head), then minimize cross-entropy on target labels plus the plan's
// feature-alignment penalty against `source_set` batches. lambda = 0 matches
// plain fine-tuning bit for bit.
net::NetworkModel adapt_joint(const net::NetworkModel& source_model, const data::TaskData& target,
                              const data::LabeledSet& source_set, const TrainConfig& tc,
                              const AdaptationPlan& plan, ExperimentReport* rep = nullptr);

// Two-step adaptation: step 1 freezes blocks 1..offshelf_upto and trains the
// remaining blocks on the alignment penalty alone (no labels); step 2 unfreezes
// everything and trains like adapt_joint but with lambda * decay_factor fixed
// from the start (no further decay). Log rows from both steps concatenate.
net::NetworkModel adapt_two_step(const net::NetworkModel& source_model,
                                 const data::TaskData& target,
                                 const data::LabeledSet& source_set, const TrainConfig& tc,
                                 const AdaptationPlan& plan, ExperimentReport* rep = nullptr);

// Flattened block-`layer` features of every image, as one batch.
mmd::FeatureBatch collect_features(const net::NetworkModel& m, const std::vector<Tensor>& images,
                                   std::size_t layer, mmd::Role role);

}  // namespace xfrl::proto
