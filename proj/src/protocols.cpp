#include "xfrl/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xfrl/error.hpp"
#include "xfrl/nn.hpp"
#include "xfrl/rng.hpp"

namespace xfrl::proto {
namespace {

void check_compat(const net::NetworkModel& m, const data::LabeledSet& s, const char* what) {
    if (s.size() == 0) throw value_error(std::string(what) + " set is empty");
    if (m.in_ch != 1 || s.image_size != m.in_h || s.image_size != m.in_w)
        throw shape_error(std::string(what) + " images are " + std::to_string(s.image_size) + "x" +
                          std::to_string(s.image_size) + " but the model expects " +
                          std::to_string(m.in_h) + "x" + std::to_string(m.in_w));
}

void apply_multipliers(net::NetworkModel& m, const TrainConfig& tc) {
    if (!tc.lr_multipliers.empty() && tc.lr_multipliers.size() != m.blocks.size())
        throw config_error("lr_multipliers has " + std::to_string(tc.lr_multipliers.size()) +
                           " entries for " + std::to_string(m.blocks.size()) + " conv blocks");
    for (std::size_t l = 0; l < m.blocks.size(); ++l) {
        const double mult = tc.lr_multipliers.empty() ? 1.0 : tc.lr_multipliers[l];
        m.blocks[l].w.lr_multiplier = mult;
        m.blocks[l].b.lr_multiplier = mult;
    }
    m.fc_w.lr_multiplier = tc.head_lr_multiplier;
    m.fc_b.lr_multiplier = tc.head_lr_multiplier;
    for (auto& d : m.decoder) {
        d.w.lr_multiplier = tc.head_lr_multiplier;
        d.b.lr_multiplier = tc.head_lr_multiplier;
    }
}

// Outputs of block `upto` (1-based) for every image; lets a phase skip its
// frozen prefix, which never changes while the phase runs.
std::vector<Tensor> cache_at(const net::NetworkModel& m, const std::vector<Tensor>& images,
                             std::size_t upto) {
    std::vector<Tensor> out;
    out.reserve(images.size());
    for (const Tensor& x : images) {
        net::ForwardTrace tr = net::forward(m, x);
        out.push_back(tr.block_out(m, upto - 1));
    }
    return out;
}

std::size_t argmax_logits(const Tensor& logits) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits.v[c] > logits.v[best]) best = c;  // ties keep the lower index
    return best;
}

double eval_from(const net::NetworkModel& m, const std::vector<Tensor>& inputs,
                 const std::vector<int>& labels, std::size_t first_block) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        net::ForwardTrace tr = net::forward(m, inputs[i], first_block);
        if (argmax_logits(tr.logits) == static_cast<std::size_t>(labels[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

double mean_test_mse(const net::NetworkModel& m, const data::LabeledSet& s) {
    double sum = 0.0;
    for (const Tensor& x : s.images) {
        net::ForwardTrace tr = net::forward(m, x);
        sum += nn::mse(tr.recon, x).loss;
    }
    return sum / static_cast<double>(s.size());
}

double estimate(Estimator e, const mmd::FeatureBatch& s, const mmd::FeatureBatch& t,
                const mmd::KernelBank& bank) {
    return e == Estimator::linear ? mmd::mmd2_linear(s, t, bank) : mmd::mmd2_quadratic(s, t, bank);
}

void estimate_grad(Estimator e, const mmd::FeatureBatch& s, const mmd::FeatureBatch& t,
                   const mmd::KernelBank& bank, double coeff, std::vector<double>& gs,
                   std::vector<double>& gt) {
    if (e == Estimator::linear)
        mmd::mmd2_linear_grad(s, t, bank, coeff, gs, gt);
    else
        mmd::mmd2_quadratic_grad(s, t, bank, coeff, gs, gt);
}

// One contiguous span of epochs sharing a frozen prefix and loss shape.
struct Phase {
    std::size_t epochs = 0;
    double lr = 0.0;
    bool supervised = true;             // include the head loss on target labels/images
    const AdaptationPlan* plan = nullptr;
    double lambda = 0.0;                // penalty weight entering the phase
    bool decay = false;                 // apply the plan's decay schedule inside this phase
    std::size_t epoch_offset = 0;       // logged epoch = offset + local index
    bool final_eval = true;             // force an evaluation on the phase's last epoch
};

// Shared mini-batch engine. Target batches come from a per-epoch shuffle of
// the target stream; penalty source batches come from the source stream, so
// disabling the penalty leaves the target draws untouched.
void run_phase(net::NetworkModel& m, const data::TaskData& task,
               const data::LabeledSet* source_set, const TrainConfig& tc, const Phase& ph,
               ExperimentReport& rep) {
    if (ph.epochs == 0) return;
    const bool cls = m.head.kind == net::HeadKind::classification;
    const std::size_t bs = tc.batch_size;
    const std::size_t n_t = task.train.size();
    const std::size_t steps = n_t / bs;
    if (steps == 0)
        throw config_error("batch_size " + std::to_string(bs) + " exceeds training-set size " +
                           std::to_string(n_t));

    const AdaptationPlan* plan = ph.plan;
    const bool penalty = plan != nullptr && !plan->layers.empty() && ph.lambda != 0.0;
    if (penalty && source_set == nullptr) throw value_error("alignment penalty needs a source set");

    // Frozen-prefix cache (classification heads only; the trace of a skipped
    // block does not exist, so penalty taps must sit above the prefix).
    const std::size_t F = (cls && m.frozen_upto > 0) ? m.frozen_upto : 0;
    if (F > 0 && penalty)
        for (std::size_t l : plan->layers)
            if (l <= F)
                throw config_error("alignment layer " + std::to_string(l) +
                                   " lies inside the frozen prefix (1.." + std::to_string(F) + ")");

    std::vector<Tensor> train_cache, test_cache, source_cache;
    const std::vector<Tensor>* train_in = &task.train.images;
    const std::vector<Tensor>* test_in = &task.test.images;
    const std::vector<Tensor>* source_in = nullptr;
    if (penalty) source_in = &source_set->images;
    if (F > 0) {
        train_cache = cache_at(m, task.train.images, F);
        test_cache = cache_at(m, task.test.images, F);
        train_in = &train_cache;
        test_in = &test_cache;
        if (penalty) {
            source_cache = cache_at(m, source_set->images, F);
            source_in = &source_cache;
        }
    }

    const std::size_t n_s = penalty ? source_in->size() : 0;
    std::size_t s_cap = n_s;
    if (penalty && plan->source_pool > 0) s_cap = std::min(s_cap, plan->source_pool);

    const std::size_t taps = penalty ? plan->layers.size() : 0;
    const std::size_t decay_epoch =
        (ph.decay && plan != nullptr && plan->decay_at > 0.0)
            ? static_cast<std::size_t>(std::floor(plan->decay_at * double(ph.epochs)))
            : 0;

    std::vector<std::size_t> perm_t(n_t), perm_s(n_s);
    std::iota(perm_t.begin(), perm_t.end(), 0);
    std::iota(perm_s.begin(), perm_s.end(), 0);

    std::vector<net::ForwardTrace> ttr(bs), str(penalty ? bs : 0);
    std::vector<Tensor> head_grads(bs);

    for (std::size_t e = 1; e <= ph.epochs; ++e) {
        const std::size_t ge = ph.epoch_offset + e;
        const double lam =
            (decay_epoch > 0 && e >= decay_epoch) ? ph.lambda * plan->decay_factor : ph.lambda;

        Rng rt(mix_seed(tc.seed, kStreamTarget, ge));
        rt.shuffle(perm_t);
        Rng rs(mix_seed(tc.seed, kStreamSource, ge));
        if (penalty) rs.shuffle(perm_s);

        double sum_loss = 0.0;
        std::vector<double> sum_mmd(taps, 0.0);

        for (std::size_t st = 0; st < steps; ++st) {
            m.zero_grad();

            for (std::size_t j = 0; j < bs; ++j)
                ttr[j] = net::forward(m, (*train_in)[perm_t[st * bs + j]], F);

            if (ph.supervised) {
                for (std::size_t j = 0; j < bs; ++j) {
                    nn::LossGrad lg;
                    if (cls)
                        lg = nn::softmax_xent(
                            ttr[j].logits,
                            static_cast<std::size_t>(task.train.labels[perm_t[st * bs + j]]));
                    else
                        lg = nn::mse(ttr[j].recon, ttr[j].input);
                    sum_loss += lg.loss / double(bs);
                    for (double& g : lg.grad.v) g /= double(bs);
                    head_grads[j] = std::move(lg.grad);
                }
            }

            // Per-tap penalty values and per-sample feature gradients.
            std::vector<std::vector<std::vector<double>>> tg, sg;  // [tap][sample][dim]
            if (penalty) {
                for (std::size_t j = 0; j < bs; ++j)
                    str[j] = net::forward(m, (*source_in)[perm_s[(st * bs + j) % s_cap]], F);
                tg.resize(taps);
                sg.resize(taps);
                for (std::size_t t = 0; t < taps; ++t) {
                    const std::size_t bi = plan->layers[t] - 1;
                    const Tensor& probe = ttr[0].block_out(m, bi);
                    const std::size_t dim = probe.size();
                    mmd::FeatureBatch fs(mmd::Role::source, dim), ft(mmd::Role::target, dim);
                    for (std::size_t j = 0; j < bs; ++j) fs.push(str[j].block_out(m, bi).v.data());
                    for (std::size_t j = 0; j < bs; ++j) ft.push(ttr[j].block_out(m, bi).v.data());
                    const mmd::KernelBank bank =
                        mmd::bank_around(mmd::median_sq_dist(fs, ft), plan->bank_size);
                    sum_mmd[t] += estimate(plan->estimator, fs, ft, bank);
                    std::vector<double> gs(bs * dim, 0.0), gt(bs * dim, 0.0);
                    estimate_grad(plan->estimator, fs, ft, bank, lam * plan->alphas[t], gs, gt);
                    tg[t].resize(bs);
                    sg[t].resize(bs);
                    for (std::size_t j = 0; j < bs; ++j) {
                        tg[t][j].assign(gt.begin() + j * dim, gt.begin() + (j + 1) * dim);
                        sg[t][j].assign(gs.begin() + j * dim, gs.begin() + (j + 1) * dim);
                    }
                }
            }

            for (std::size_t j = 0; j < bs; ++j) {
                net::TapGrads tmap;
                for (std::size_t t = 0; t < taps; ++t) tmap[plan->layers[t] - 1] = &tg[t][j];
                net::backward(m, ttr[j], ph.supervised ? &head_grads[j] : nullptr,
                              tmap.empty() ? nullptr : &tmap, F);
            }
            if (penalty)
                for (std::size_t j = 0; j < bs; ++j) {
                    net::TapGrads smap;
                    for (std::size_t t = 0; t < taps; ++t) smap[plan->layers[t] - 1] = &sg[t][j];
                    net::backward(m, str[j], nullptr, &smap, F);
                }

            nn::sgd_step(m.parameters(), ph.lr);
        }

        rep::EpochRow row;
        row.epoch = ge;
        row.loss_cls = sum_loss / double(steps);
        row.mmd.resize(taps);
        double pen = 0.0;
        for (std::size_t t = 0; t < taps; ++t) {
            row.mmd[t] = sum_mmd[t] / double(steps);
            pen += plan->alphas[t] * row.mmd[t];
        }
        row.loss_total = row.loss_cls + lam * pen;
        const bool want_eval = (tc.eval_every > 0 && ge % tc.eval_every == 0) ||
                               (ph.final_eval && e == ph.epochs);
        if (want_eval && cls)
            row.test_acc = eval_from(m, *test_in, task.test.labels, F);
        rep.rows.push_back(row);
    }
}

void finish_report(const net::NetworkModel& m, const data::TaskData& task, ExperimentReport& rep) {
    if (m.head.kind == net::HeadKind::classification) {
        rep.final_acc = rep.rows.empty() ? evaluate(m, task.test) : rep.rows.back().test_acc;
        if (rep.final_acc < 0.0) rep.final_acc = evaluate(m, task.test);
    } else {
        rep.final_loss = mean_test_mse(m, task.test);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 2 || batch_size % 2 != 0)
        throw config_error("batch_size must be even and at least 2, got " +
                           std::to_string(batch_size));
    if (!std::isfinite(base_lr) || base_lr <= 0.0)
        throw config_error("base_lr must be finite and positive");
    if (!std::isfinite(head_lr_multiplier) || head_lr_multiplier < 0.0)
        throw config_error("head_lr_multiplier must be finite and nonnegative");
    for (double v : lr_multipliers)
        if (!std::isfinite(v) || v < 0.0)
            throw config_error("lr_multipliers entries must be finite and nonnegative");
}

void AdaptationPlan::validate(std::size_t num_layers) const {
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw config_error("lambda must be finite and nonnegative");
    if (lambda != 0.0 && layers.empty())
        throw config_error("a nonzero lambda needs at least one alignment layer");
    if (alphas.size() != layers.size())
        throw config_error("alphas has " + std::to_string(alphas.size()) + " entries for " +
                           std::to_string(layers.size()) + " alignment layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i] < 1 || layers[i] > num_layers)
            throw config_error("alignment layer " + std::to_string(layers[i]) +
                               " is outside 1.." + std::to_string(num_layers));
        if (i > 0 && layers[i] <= layers[i - 1])
            throw config_error("alignment layers must be strictly increasing");
        if (!std::isfinite(alphas[i]) || alphas[i] < 0.0)
            throw config_error("alphas entries must be finite and nonnegative");
    }
    if (!std::isfinite(decay_factor) || decay_factor < 0.0)
        throw config_error("lambda_decay_factor must be finite and nonnegative");
    if (bank_size < 1) throw config_error("kernel bank size must be at least 1");
    if (offshelf_upto > num_layers)
        throw config_error("offshelf_upto " + std::to_string(offshelf_upto) + " exceeds " +
                           std::to_string(num_layers) + " conv blocks");
    if (!std::isfinite(step1_lr) || step1_lr < 0.0)
        throw config_error("step1_lr must be finite and nonnegative");
}

double evaluate(const net::NetworkModel& m, const data::LabeledSet& s) {
    if (m.head.kind != net::HeadKind::classification)
        throw value_error("evaluate needs a classification head");
    check_compat(m, s, "evaluation");
    return eval_from(m, s.images, s.labels, 0);
}

ExperimentReport train_supervised(net::NetworkModel& m, const data::TaskData& task,
                                  const TrainConfig& tc) {
    tc.validate();
    check_compat(m, task.train, "training");
    check_compat(m, task.test, "test");
    if (m.head.kind == net::HeadKind::classification && m.head.num_classes != task.num_classes)
        throw value_error("model has " + std::to_string(m.head.num_classes) + " classes but task '" +
                          task.name + "' has " + std::to_string(task.num_classes));
    m.apply_frozen();
    apply_multipliers(m, tc);
    ExperimentReport rep;
    Phase ph;
    ph.epochs = tc.epochs;
    ph.lr = tc.base_lr;
    ph.supervised = true;
    run_phase(m, task, nullptr, tc, ph, rep);
    finish_report(m, task, rep);
    return rep;
}

net::NetworkModel train_scratch(net::Arch arch, const data::TaskData& task, const TrainConfig& tc,
                                ExperimentReport* rep) {
    net::NetworkModel m =
        net::build(arch, {net::HeadKind::classification, task.num_classes}, 1,
                   task.train.image_size, task.train.image_size, tc.seed);
    ExperimentReport r = train_supervised(m, task, tc);
    if (rep) *rep = std::move(r);
    return m;
}

net::NetworkModel transfer_train(const net::NetworkModel& source, std::size_t k, bool freeze,
                                 const data::TaskData& task, const TrainConfig& tc,
                                 ExperimentReport* rep) {
    net::NetworkModel m =
        net::surgery_transfer(source, k, {net::HeadKind::classification, task.num_classes},
                              task.train.image_size, task.train.image_size, tc.seed, freeze);
    ExperimentReport r = train_supervised(m, task, tc);
    if (rep) *rep = std::move(r);
    return m;
}

std::vector<rep::SweepRow> transferability_sweep(const net::NetworkModel& source,
                                                 const data::TaskData& task, const TrainConfig& tc,
                                                 bool freeze, const std::vector<std::size_t>* ks) {
    std::vector<std::size_t> depths;
    if (ks != nullptr) {
        depths = *ks;
        std::sort(depths.begin(), depths.end());
        depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
        for (std::size_t k : depths)
            if (k < 1 || k > source.num_layers())
                throw value_error("sweep depth " + std::to_string(k) + " is outside 1.." +
                                  std::to_string(source.num_layers()));
    } else {
        depths.resize(source.num_layers());
        std::iota(depths.begin(), depths.end(), 1);
    }

    std::vector<rep::SweepRow> rows;
    ExperimentReport r0;
    train_scratch(source.arch, task, tc, &r0);
    rows.push_back({0, r0.final_acc, 0.0});
    for (std::size_t k : depths) {
        ExperimentReport r;
        transfer_train(source, k, freeze, task, tc, &r);
        rows.push_back({k, r.final_acc, r.final_acc - r0.final_acc});
    }
    return rows;
}

net::NetworkModel transitive_chain(net::Arch arch, const std::vector<data::TaskData>& stages,
                                   const TrainConfig& tc, std::vector<ExperimentReport>* reps,
                                   net::HeadKind first_head) {
    if (stages.empty()) throw value_error("transfer chain needs at least one stage");
    ExperimentReport r;
    net::NetworkModel m;
    if (first_head == net::HeadKind::classification) {
        m = train_scratch(arch, stages[0], tc, &r);
    } else {
        m = net::build(arch, {net::HeadKind::reconstruction, 0}, 1, stages[0].train.image_size,
                       stages[0].train.image_size, tc.seed);
        r = train_supervised(m, stages[0], tc);
    }
    if (reps) reps->push_back(std::move(r));
    for (std::size_t i = 1; i < stages.size(); ++i) {
        ExperimentReport ri;
        m = transfer_train(m, m.num_layers(), false, stages[i], tc, &ri);
        if (reps) reps->push_back(std::move(ri));
    }
    return m;
}

net::NetworkModel adapt_joint(const net::NetworkModel& source_model, const data::TaskData& target,
                              const data::LabeledSet& source_set, const TrainConfig& tc,
                              const AdaptationPlan& plan, ExperimentReport* rep) {
    tc.validate();
    plan.validate(source_model.num_layers());
    net::NetworkModel m = net::surgery_transfer(
        source_model, source_model.num_layers(),
        {net::HeadKind::classification, target.num_classes}, target.train.image_size,
        target.train.image_size, tc.seed, false);
    check_compat(m, target.train, "target training");
    check_compat(m, target.test, "target test");
    const bool penalty = plan.lambda != 0.0 && !plan.layers.empty();
    if (penalty) check_compat(m, source_set, "source");
    apply_multipliers(m, tc);
    ExperimentReport r;
    if (penalty) r.tap_ids = plan.layers;
    Phase ph;
    ph.epochs = tc.epochs;
    ph.lr = tc.base_lr;
    ph.supervised = true;
    ph.plan = &plan;
    ph.lambda = plan.lambda;
    ph.decay = true;
    run_phase(m, target, &source_set, tc, ph, r);
    finish_report(m, target, r);
    if (rep) *rep = std::move(r);
    return m;
}

net::NetworkModel adapt_two_step(const net::NetworkModel& source_model,
                                 const data::TaskData& target,
                                 const data::LabeledSet& source_set, const TrainConfig& tc,
                                 const AdaptationPlan& plan, ExperimentReport* rep) {
    tc.validate();
    plan.validate(source_model.num_layers());
    if (plan.step1_epochs > 0) {
        if (plan.lambda == 0.0 || plan.layers.empty())
            throw config_error("the label-free step needs a nonzero alignment penalty");
        for (std::size_t l : plan.layers)
            if (l <= plan.offshelf_upto)
                throw config_error("alignment layer " + std::to_string(l) +
                                   " must lie above the off-shelf prefix (1.." +
                                   std::to_string(plan.offshelf_upto) + ")");
    }
    net::NetworkModel m = net::surgery_transfer(
        source_model, source_model.num_layers(),
        {net::HeadKind::classification, target.num_classes}, target.train.image_size,
        target.train.image_size, tc.seed, false);
    check_compat(m, target.train, "target training");
    check_compat(m, target.test, "target test");
    check_compat(m, source_set, "source");
    apply_multipliers(m, tc);
    ExperimentReport r;
    r.tap_ids = plan.layers;

    if (plan.step1_epochs > 0) {
        m.frozen_upto = plan.offshelf_upto;
        m.apply_frozen();
        Phase p1;
        p1.epochs = plan.step1_epochs;
        p1.lr = plan.step1_lr > 0.0 ? plan.step1_lr : tc.base_lr;
        p1.supervised = false;
        p1.plan = &plan;
        p1.lambda = plan.lambda;
        p1.final_eval = false;
        run_phase(m, target, &source_set, tc, p1, r);
    }

    m.frozen_upto = 0;
    m.apply_frozen();
    Phase p2;
    p2.epochs = tc.epochs;
    p2.lr = tc.base_lr;
    p2.supervised = true;
    p2.plan = &plan;
    p2.lambda = plan.lambda * plan.decay_factor;  // decayed from the start, held fixed
    p2.epoch_offset = plan.step1_epochs;
    run_phase(m, target, &source_set, tc, p2, r);
    finish_report(m, target, r);
    if (rep) *rep = std::move(r);
    return m;
}

mmd::FeatureBatch collect_features(const net::NetworkModel& m, const std::vector<Tensor>& images,
                                   std::size_t layer, mmd::Role role) {
    if (images.empty()) throw value_error("feature collection needs at least one image");
    Tensor first = net::forward_features(m, images[0], layer);
    mmd::FeatureBatch fb(role, first.size());
    fb.push(first.v.data());
    for (std::size_t i = 1; i < images.size(); ++i) {
        Tensor f = net::forward_features(m, images[i], layer);
        fb.push(f.v.data());
    }
    return fb;
}

}  // namespace xfrl::proto
