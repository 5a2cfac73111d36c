// Command-line front end: dataset generation, training, layer-depth sweeps,
// sequential transfer chains, domain adaptation, and checkpoint evaluation.
// Results go to files in the output directory; stdout carries a one-line
// summary; diagnostics go to stderr. Exit codes: 0 ok, 1 bad usage or
// invalid configuration, 2 runtime failure.

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "xfrl/checkpoint.hpp"
#include "xfrl/config.hpp"
#include "xfrl/datasets.hpp"
#include "xfrl/error.hpp"
#include "xfrl/networks.hpp"
#include "xfrl/protocols.hpp"
#include "xfrl/report.hpp"
#include "xfrl/threads.hpp"

namespace fs = std::filesystem;
using namespace xfrl;

namespace {

// One writer per output directory; the lock file vanishes with the guard.
class DirLock {
  public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".xfrl.lock") {
        fs::create_directories(dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw io_error("output directory " + dir.string() +
                           " is locked by another run (remove " + path_.string() +
                           " if that run is dead)");
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    fs::path path_;
    int fd_ = -1;
};

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int threads = 0;
};

cfg::Config load_cfg(const Overrides& ov) {
    if (ov.config_path.empty()) throw config_error("this command needs --config");
    return cfg::load_config(ov.config_path);
}

proto::TrainConfig train_config(const cfg::Config& c, const Overrides& ov) {
    proto::TrainConfig tc;
    tc.epochs = static_cast<std::size_t>(c.get_int_or("train.epochs", 10));
    tc.batch_size = static_cast<std::size_t>(c.get_int_or("train.batch_size", 32));
    tc.base_lr = c.get_double_or("train.base_lr", 0.01);
    tc.seed = static_cast<std::uint64_t>(c.get_int_or("train.seed", 1));
    tc.eval_every = static_cast<std::size_t>(c.get_int_or("train.eval_every", 1));
    tc.head_lr_multiplier = c.get_double_or("train.head_lr_multiplier", 1.0);
    if (c.has("train.lr_multipliers")) tc.lr_multipliers = c.get_doubles("train.lr_multipliers");
    if (ov.seed) tc.seed = *ov.seed;
    tc.validate();
    return tc;
}

fs::path out_dir(const cfg::Config& c, const Overrides& ov) {
    if (ov.out_dir) return fs::path(*ov.out_dir);
    if (c.has("output.dir")) return c.get_path("output.dir");
    return fs::path("out");
}

// A stage reference is either a pinned preset name or a manifest directory.
data::TaskData load_task_ref(const cfg::Config& c, const std::string& ref) {
    const auto names = data::preset_names();
    if (std::find(names.begin(), names.end(), ref) != names.end())
        return data::gen_synthetic(data::preset(ref));
    fs::path p(ref);
    if (!p.is_absolute()) p = c.base_dir / p;
    return data::load_manifest(p);
}

data::TaskData load_target(const cfg::Config& c) {
    const bool has_preset = c.has("data.preset");
    const bool has_dir = c.has("data.dir");
    if (has_preset == has_dir)
        throw config_error("[data] needs exactly one of 'preset' or 'dir'");
    data::TaskData task = has_preset ? data::gen_synthetic(data::preset(c.get_str("data.preset")))
                                     : data::load_manifest(c.get_path("data.dir"));
    const long quota = c.get_int_or("data.target_per_class", 0);
    if (quota > 0) task.train = task.train.subset_per_class(static_cast<std::size_t>(quota));
    data::standardize(task);
    return task;
}

data::LabeledSet load_source_set(const cfg::Config& c) {
    const bool has_preset = c.has("data.source_preset");
    const bool has_dir = c.has("data.source_dir");
    if (has_preset == has_dir)
        throw config_error("[data] needs exactly one of 'source_preset' or 'source_dir'");
    data::TaskData task = has_preset
                              ? data::gen_synthetic(data::preset(c.get_str("data.source_preset")))
                              : data::load_manifest(c.get_path("data.source_dir"));
    const long quota = c.get_int_or("data.source_per_class", 0);
    if (quota > 0) task.train = task.train.subset_per_class(static_cast<std::size_t>(quota));
    data::standardize(task.train);
    return task.train;
}

proto::AdaptationPlan adapt_plan(const cfg::Config& c) {
    proto::AdaptationPlan plan;
    plan.lambda = c.get_double_or("adapt.lambda", 1.5);
    if (c.has("adapt.adaptation_layers"))
        for (long v : c.get_ints("adapt.adaptation_layers"))
            plan.layers.push_back(static_cast<std::size_t>(v));
    if (c.has("adapt.alphas"))
        plan.alphas = c.get_doubles("adapt.alphas");
    else
        plan.alphas.assign(plan.layers.size(), 1.0);
    const std::string est = c.get_str_or("adapt.estimator", "linear");
    if (est == "linear")
        plan.estimator = proto::Estimator::linear;
    else if (est == "quadratic")
        plan.estimator = proto::Estimator::quadratic;
    else
        throw config_error("adapt.estimator must be 'linear' or 'quadratic', got '" + est + "'");
    plan.decay_factor = c.get_double_or("adapt.lambda_decay_factor", 0.1);
    plan.decay_at = c.get_double_or("adapt.lambda_decay_at", 0.7);
    plan.offshelf_upto = static_cast<std::size_t>(c.get_int_or("adapt.offshelf_upto", 0));
    plan.step1_epochs = static_cast<std::size_t>(c.get_int_or("adapt.step1_epochs", 0));
    plan.step1_lr = c.get_double_or("adapt.step1_lr", 0.0);
    plan.source_pool = static_cast<std::size_t>(c.get_int_or("adapt.source_pool", 0));
    return plan;
}

void write_log(const fs::path& dir, const std::string& name, const proto::ExperimentReport& r) {
    rep::write_train_log(dir / name, r.tap_ids, r.rows);
}

void save_model(const fs::path& dir, const cfg::Config& c, const net::NetworkModel& m) {
    const std::string name = c.get_str_or("output.checkpoint", "model.xfrl");
    ckpt::save_checkpoint(m, dir / name);
}

int cmd_gen_data(const std::string& preset_name, const std::string& out) {
    data::TaskData task = data::gen_synthetic(data::preset(preset_name));
    DirLock lock{fs::path(out)};
    data::write_pgm_set(task, fs::path(out));
    std::cout << "wrote " << task.train.size() << " train + " << task.test.size() << " test images to "
              << out << "\n";
    return 0;
}

int cmd_train(const Overrides& ov) {
    cfg::Config c = load_cfg(ov);
    proto::TrainConfig tc = train_config(c, ov);
    data::TaskData task = load_target(c);
    const fs::path dir = out_dir(c, ov);
    DirLock lock{dir};

    net::NetworkModel model;
    proto::ExperimentReport rep;
    const std::string head = c.get_str_or("network.head", "classification");
    if (c.has("network.source_checkpoint")) {
        net::NetworkModel src = ckpt::load_checkpoint(c.get_path("network.source_checkpoint"));
        const std::size_t k = static_cast<std::size_t>(
            c.get_int_or("network.transfer_layers", static_cast<long>(src.num_layers())));
        const bool freeze = c.get_bool_or("network.freeze", true);
        if (head != "classification")
            throw config_error("transfer training supports only classification heads");
        model = proto::transfer_train(src, k, freeze, task, tc, &rep);
    } else {
        const net::Arch arch = net::arch_from_name(c.get_str("network.architecture"));
        if (head == "classification") {
            model = proto::train_scratch(arch, task, tc, &rep);
        } else if (head == "reconstruction") {
            model = net::build(arch, {net::HeadKind::reconstruction, 0}, 1, task.train.image_size,
                               task.train.image_size, tc.seed);
            rep = proto::train_supervised(model, task, tc);
        } else {
            throw config_error("network.head must be 'classification' or 'reconstruction'");
        }
    }
    write_log(dir, c.get_str_or("output.log", "train_log.csv"), rep);
    save_model(dir, c, model);
    if (model.head.kind == net::HeadKind::classification)
        std::cout << "final_accuracy=" << rep::fmt(rep.final_acc) << "\n";
    else
        std::cout << "final_test_error=" << rep::fmt(rep.final_loss) << "\n";
    return 0;
}

int cmd_sweep(const Overrides& ov) {
    cfg::Config c = load_cfg(ov);
    proto::TrainConfig tc = train_config(c, ov);
    data::TaskData task = load_target(c);
    if (!c.has("network.source_checkpoint"))
        throw config_error("sweep needs network.source_checkpoint");
    net::NetworkModel src = ckpt::load_checkpoint(c.get_path("network.source_checkpoint"));
    const bool freeze = c.get_bool_or("sweep.freeze", true);
    std::vector<std::size_t> ks;
    if (c.has("sweep.layers"))
        for (long v : c.get_ints("sweep.layers")) ks.push_back(static_cast<std::size_t>(v));
    const fs::path dir = out_dir(c, ov);
    DirLock lock{dir};
    auto rows = proto::transferability_sweep(src, task, tc, freeze, ks.empty() ? nullptr : &ks);
    rep::write_sweep_csv(dir / "sweep.csv", rows);
    if (c.get_bool_or("output.svg", false)) rep::write_sweep_svg(dir / "sweep.svg", rows);
    double best = rows.front().accuracy;
    std::size_t best_k = 0;
    for (const auto& r : rows)
        if (r.accuracy > best) best = r.accuracy, best_k = r.k;
    std::cout << "baseline=" << rep::fmt(rows.front().accuracy) << " best_k=" << best_k
              << " best_accuracy=" << rep::fmt(best) << "\n";
    return 0;
}

int cmd_chain(const Overrides& ov) {
    cfg::Config c = load_cfg(ov);
    proto::TrainConfig tc = train_config(c, ov);
    if (!c.has("data.stages")) throw config_error("chain needs data.stages");
    std::vector<data::TaskData> stages;
    for (const std::string& ref : c.get_strs("data.stages")) {
        stages.push_back(load_task_ref(c, ref));
        data::standardize(stages.back());
    }
    const net::Arch arch = net::arch_from_name(c.get_str("network.architecture"));
    const std::string head = c.get_str_or("network.head", "classification");
    net::HeadKind first_head;
    if (head == "classification")
        first_head = net::HeadKind::classification;
    else if (head == "reconstruction")
        first_head = net::HeadKind::reconstruction;
    else
        throw config_error("network.head must be 'classification' or 'reconstruction'");
    const fs::path dir = out_dir(c, ov);
    DirLock lock{dir};
    std::vector<proto::ExperimentReport> reps;
    net::NetworkModel model = proto::transitive_chain(arch, stages, tc, &reps, first_head);
    for (std::size_t i = 0; i < reps.size(); ++i)
        write_log(dir, "train_log_stage" + std::to_string(i + 1) + ".csv", reps[i]);
    save_model(dir, c, model);
    if (model.head.kind == net::HeadKind::classification)
        std::cout << "final_accuracy=" << rep::fmt(reps.back().final_acc) << "\n";
    else
        std::cout << "final_test_error=" << rep::fmt(reps.back().final_loss) << "\n";
    return 0;
}

int cmd_adapt(const std::string& algo, const Overrides& ov) {
    cfg::Config c = load_cfg(ov);
    proto::TrainConfig tc = train_config(c, ov);
    data::TaskData target = load_target(c);
    data::LabeledSet source_set = load_source_set(c);
    if (!c.has("network.source_checkpoint"))
        throw config_error("adapt needs network.source_checkpoint");
    net::NetworkModel src = ckpt::load_checkpoint(c.get_path("network.source_checkpoint"));
    if (!c.has("adapt.adaptation_layers"))
        throw config_error("adapt needs the config key 'adaptation_layers' in [adapt]");
    proto::AdaptationPlan plan = adapt_plan(c);
    const fs::path dir = out_dir(c, ov);
    DirLock lock{dir};
    proto::ExperimentReport rep;
    net::NetworkModel model;
    if (algo == "itl")
        model = proto::adapt_joint(src, target, source_set, tc, plan, &rep);
    else if (algo == "stl")
        model = proto::adapt_two_step(src, target, source_set, tc, plan, &rep);
    else
        throw config_error("--algo must be 'itl' or 'stl'");
    write_log(dir, c.get_str_or("output.log", "train_log.csv"), rep);
    save_model(dir, c, model);
    std::cout << "final_accuracy=" << rep::fmt(rep.final_acc) << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& preset_name, const std::string& dir) {
    if (preset_name.empty() == dir.empty())
        throw config_error("eval needs exactly one of --preset or --dir");
    net::NetworkModel m = ckpt::load_checkpoint(ckpt_path);
    data::TaskData task = preset_name.empty() ? data::load_manifest(dir)
                                              : data::gen_synthetic(data::preset(preset_name));
    data::standardize(task);
    std::cout << "accuracy=" << rep::fmt(proto::evaluate(m, task.test)) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"transfer-learning lab for small convolutional networks"};
    app.require_subcommand(1);

    Overrides ov;
    app.add_option("--config", ov.config_path, "INI-style experiment file");
    std::uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override train.seed");
    std::string out_val;
    auto* out_opt = app.add_option("--out", out_val, "override output.dir");
    app.add_option("--threads", ov.threads, "worker threads (default: XFRL_THREADS or 1)");

    auto* gen = app.add_subcommand("gen-data", "write a pinned dataset as PGM files + manifest");
    std::string gen_preset, gen_out = "data";
    gen->add_option("--preset", gen_preset, "dataset preset name")->required();
    gen->add_option("--out", gen_out, "destination directory");

    auto* train = app.add_subcommand("train", "train from scratch or from a source checkpoint");
    auto* sweep = app.add_subcommand("sweep", "accuracy vs number of transferred layers");
    auto* chain = app.add_subcommand("chain", "sequential transfer through several tasks");

    auto* adapt = app.add_subcommand("adapt", "train with a feature-alignment penalty");
    std::string algo;
    adapt->add_option("--algo", algo, "itl (joint) or stl (two-step)")->required();

    auto* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a dataset");
    std::string eval_ckpt, eval_preset, eval_dir;
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval->add_option("--preset", eval_preset, "dataset preset name");
    eval->add_option("--dir", eval_dir, "manifest directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);                                     // prints the usage text
        return 1;
    }

    try {
        if (ov.threads > 0) set_thread_budget(ov.threads);
        if (*seed_opt) ov.seed = seed_val;
        if (*out_opt) ov.out_dir = out_val;
        if (gen->parsed()) return cmd_gen_data(gen_preset, gen_out);
        if (train->parsed()) return cmd_train(ov);
        if (sweep->parsed()) return cmd_sweep(ov);
        if (chain->parsed()) return cmd_chain(ov);
        if (adapt->parsed()) return cmd_adapt(algo, ov);
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_preset, eval_dir);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const value_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
