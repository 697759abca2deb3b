// Command-line entry point: data generation, pre-training, fine-tuning,
// learning-curve sweeps, the classical baseline and report merging.
//
// Every run directory receives the fully-resolved configuration as
// config.ini; re-running `mim <command> --config <that file>` reproduces the
// run bit for bit (timestamps are never written into outputs).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mim/harness.hpp"
#include "mim/kernels.hpp"
#include "mim/rng.hpp"

namespace fs = std::filesystem;
using namespace mim;

namespace {

struct CommonOpts {
    std::string out_dir;
    std::uint64_t seed = 1;
    int threads = 0;
    bool serial = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--out", c.out_dir, "Output directory")->required();
    cmd->add_option("--seed", c.seed, "Master seed; all randomness derives from it")
        ->capture_default_str();
    cmd->add_option("--threads", c.threads, "OpenMP thread cap (0 = library default)")
        ->capture_default_str();
    cmd->add_flag("--serial", c.serial, "Disable the OpenMP kernels");
}

void apply_common(const CommonOpts& c) {
#ifdef _OPENMP
    if (c.threads > 0) omp_set_num_threads(c.threads);
#endif
    if (c.serial) kernels::set_parallel_enabled(false);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
}

// The resolved configuration of the parsed subcommand, rerunnable as
// `mim --config <file> <subcommand>`.
void write_resolved_config(const CLI::App& app, const std::string& subname,
                           const fs::path& dir) {
    std::istringstream all(app.config_to_str(true, false));
    std::ostringstream mine;
    std::string line;
    while (std::getline(all, line)) {
        if (line.rfind(subname + ".", 0) == 0) mine << line << '\n';
    }
    write_text(dir / "config.ini", mine.str());
}

ModelConfig model_config_for(const std::vector<data::SubjectSeries>& dataset) {
    if (dataset.empty()) throw DataError("dataset is empty");
    ModelConfig cfg;
    cfg.regions = dataset.front().regions();
    cfg.encoder.input_length = dataset.front().timepoints();
    cfg.validate();
    return cfg;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ------------------------------------------------------------- gen-data --

struct GenDataOpts {
    CommonOpts common;
    std::size_t regions = 16;
    std::size_t timepoints = 160;
    std::size_t subjects = 200;
    bool labeled = false;
    double rho = 0.9;
    double noise_std = 0.25;
    std::size_t block_size = 4;
    double block_delta = 0.035;
};

int run_gen_data(const GenDataOpts& o) {
    apply_common(o.common);
    data::SynthConfig cfg;
    cfg.regions = o.regions;
    cfg.timepoints = o.timepoints;
    cfg.rho = o.rho;
    cfg.noise_std = o.noise_std;
    cfg.block_size = o.block_size;
    cfg.block_delta = o.block_delta;
    cfg.seed = o.common.seed;

    std::vector<data::SubjectSeries> subjects;
    if (o.labeled) {
        cfg.subjects_per_class = (o.subjects + 1) / 2;
        subjects = data::generate_synthetic(cfg);
        subjects.resize(o.subjects);
    } else {
        subjects = data::generate_unlabeled(cfg, o.subjects);
    }
    fs::create_directories(o.common.out_dir);
    const std::string manifest = data::save_dataset(subjects, o.common.out_dir);
    std::cout << "wrote " << subjects.size() << " subjects, manifest at " << manifest << "\n";
    return 0;
}

// ------------------------------------------------------------- pretrain --

struct PretrainOpts {
    CommonOpts common;
    std::string data_manifest;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-4;
    std::size_t patience = 10;
    double holdout_fraction = 0.1;
};

int run_pretrain(const PretrainOpts& o, const CLI::App& app) {
    apply_common(o.common);
    if (o.batch_size == 1) {
        std::cerr << "warning: --batch-size 1 makes the InfoNCE objective degenerate "
                     "(single-element softmax, loss identically 0)\n";
    }
    auto dataset = data::load_dataset(o.data_manifest);
    ModelConfig mcfg = model_config_for(dataset);

    harness::TrainConfig tcfg;
    tcfg.learning_rate = o.learning_rate;
    tcfg.pretrain_batch_size = o.batch_size;
    tcfg.max_epochs = o.epochs;
    tcfg.patience = o.patience;
    tcfg.pretrain_holdout_fraction = o.holdout_fraction;
    tcfg.seed = o.common.seed;

    MimModel model = MimModel::init(mcfg, Rng::derive(o.common.seed, "init"));
    auto result = harness::pretrain(model, dataset, tcfg);

    fs::create_directories(o.common.out_dir);
    const fs::path out(o.common.out_dir);
    save_checkpoint(result.model, (out / "checkpoint.ckpt").string());
    std::ostringstream curve;
    curve << "epoch,train_loss,holdout_loss,mi_lower_bound\n";
    for (const auto& e : result.curve) {
        curve << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.holdout_loss) << ','
              << fmt(e.mi_bound) << '\n';
    }
    write_text(out / "loss_curve.csv", curve.str());
    write_resolved_config(app, "pretrain", out);
    std::cout << "pretrained " << result.curve.size() << " epochs, best epoch "
              << result.best_epoch << ", checkpoint at " << (out / "checkpoint.ckpt") << "\n";
    return 0;
}

// ------------------------------------------------------------- finetune --

struct FinetuneOpts {
    CommonOpts common;
    std::string data_manifest;
    std::string checkpoint;
    std::size_t folds = 18;
    std::size_t val_size = 17;
    std::size_t test_size = 17;
    std::size_t trial_seeds = 10;
    std::size_t train_per_class = 0;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    double learning_rate = 1e-4;
    std::size_t patience = 10;
};

harness::TrainConfig finetune_train_config(const FinetuneOpts& o) {
    harness::TrainConfig tcfg;
    tcfg.learning_rate = o.learning_rate;
    tcfg.finetune_batch_size = o.batch_size;
    tcfg.max_epochs = o.epochs;
    tcfg.patience = o.patience;
    tcfg.seed = o.common.seed;
    tcfg.fold = {o.folds, o.val_size, o.test_size};
    return tcfg;
}

MimModel load_matching_checkpoint(const std::string& path, const ModelConfig& data_cfg) {
    MimModel model = load_checkpoint(path);
    if (model.config().regions != data_cfg.regions ||
        model.config().encoder.input_length != data_cfg.encoder.input_length) {
        throw ConfigError(
            "checkpoint config mismatch: stored R=" + std::to_string(model.config().regions) +
            ", T=" + std::to_string(model.config().encoder.input_length) + " but the dataset has R=" +
            std::to_string(data_cfg.regions) + ", T=" +
            std::to_string(data_cfg.encoder.input_length));
    }
    return model;
}

int run_finetune(const FinetuneOpts& o, const CLI::App& app) {
    apply_common(o.common);
    auto dataset = data::load_dataset(o.data_manifest);
    ModelConfig mcfg = model_config_for(dataset);

    harness::KfoldOptions opt;
    opt.trial_seeds = o.trial_seeds;
    if (o.train_per_class > 0) opt.train_per_class = o.train_per_class;
    MimModel pretrained{mcfg};
    if (!o.checkpoint.empty()) {
        pretrained = load_matching_checkpoint(o.checkpoint, mcfg);
        mcfg = pretrained.config();
        opt.init_model = &pretrained;
    }
    auto report = harness::kfold_experiment(dataset, mcfg, finetune_train_config(o), opt,
                                            o.checkpoint.empty() ? "fresh" : "pretrained");

    fs::create_directories(o.common.out_dir);
    const fs::path out(o.common.out_dir);
    write_text(out / "report.csv", harness::report_to_csv(report));
    write_text(out / "summary.txt", harness::summary_table({report}));
    write_resolved_config(app, "finetune", out);
    std::cout << harness::summary_table({report});
    return 0;
}

// ---------------------------------------------------------------- curve --

struct CurveOpts {
    CommonOpts common;
    std::string data_manifest;
    std::string checkpoint;
    std::vector<std::size_t> sizes{8, 16, 32, 64, 100};
    std::size_t trial_seeds = 5;
    std::size_t folds = 18;
    std::size_t val_size = 17;
    std::size_t test_size = 17;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    double learning_rate = 1e-4;
    std::size_t patience = 10;
};

int run_curve(const CurveOpts& o, const CLI::App& app) {
    apply_common(o.common);
    auto dataset = data::load_dataset(o.data_manifest);
    ModelConfig mcfg = model_config_for(dataset);
    MimModel pretrained = load_matching_checkpoint(o.checkpoint, mcfg);
    mcfg = pretrained.config();

    harness::TrainConfig tcfg;
    tcfg.learning_rate = o.learning_rate;
    tcfg.finetune_batch_size = o.batch_size;
    tcfg.max_epochs = o.epochs;
    tcfg.patience = o.patience;
    tcfg.seed = o.common.seed;
    tcfg.fold = {o.folds, o.val_size, o.test_size};

    harness::CurveOptions copt;
    copt.sizes = o.sizes;
    copt.trial_seeds = o.trial_seeds;
    copt.pretrained = &pretrained;
    auto report = harness::learning_curve(dataset, mcfg, tcfg, copt);

    fs::create_directories(o.common.out_dir);
    const fs::path out(o.common.out_dir);
    write_text(out / "curve.csv", harness::curve_to_csv(report));
    write_text(out / "trials.csv", harness::report_to_csv(report));
    write_resolved_config(app, "curve", out);
    std::cout << harness::curve_to_csv(report);
    return 0;
}

// ------------------------------------------------------------- baseline --

struct BaselineOpts {
    CommonOpts common;
    std::string data_manifest;
    std::string features = "fnc";
    std::size_t train_per_class = 0;
    std::size_t folds = 18;
    std::size_t val_size = 17;
    std::size_t test_size = 17;
    double l2 = 1e-2;
};

int run_baseline(const BaselineOpts& o, const CLI::App& app) {
    apply_common(o.common);
    auto dataset = data::load_dataset(o.data_manifest);
    harness::TrainConfig tcfg;
    tcfg.seed = o.common.seed;
    tcfg.fold = {o.folds, o.val_size, o.test_size};
    tcfg.baseline_l2 = o.l2;
    const auto features = o.features == "raw" ? harness::BaselineFeatures::kRaw
                                              : harness::BaselineFeatures::kFnc;
    std::optional<std::size_t> tpc;
    if (o.train_per_class > 0) tpc = o.train_per_class;
    auto report = harness::baseline_experiment(dataset, features, tcfg, tpc,
                                               "lr_" + o.features);
    fs::create_directories(o.common.out_dir);
    const fs::path out(o.common.out_dir);
    write_text(out / "report.csv", harness::report_to_csv(report));
    write_text(out / "summary.txt", harness::summary_table({report}));
    write_resolved_config(app, "baseline", out);
    std::cout << harness::summary_table({report});
    return 0;
}

// --------------------------------------------------------------- report --

struct ReportOpts {
    CommonOpts common;
    std::vector<std::string> inputs;
};

int run_report(const ReportOpts& o) {
    apply_common(o.common);
    std::vector<harness::ExperimentReport> reports;
    for (const std::string& path : o.inputs) {
        std::ifstream f(path);
        if (!f) throw IoError("cannot open report " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        const fs::path p(path);
        std::string name = p.stem().string();
        if (p.has_parent_path() && !p.parent_path().filename().empty()) {
            name = p.parent_path().filename().string() + "/" + name;
        }
        reports.push_back(harness::report_from_csv(ss.str(), name));
    }
    for (std::size_t i = 1; i < reports.size(); ++i) {
        harness::compare_reports(reports[i], reports.front());
    }
    const std::string table = harness::summary_table(reports);
    fs::create_directories(o.common.out_dir);
    write_text(fs::path(o.common.out_dir) / "summary.txt", table);
    std::cout << table;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multinetwork InfoMax: contrastive pre-training of a convolutional "
                 "encoder and a gated graph network, with fine-tuned classification"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "Read options from an ini file (the resolved config written next to "
                   "each run's outputs)");

    GenDataOpts gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    add_common(gen_cmd, gen.common);
    gen_cmd->add_option("--regions", gen.regions, "Region count R")->capture_default_str();
    gen_cmd->add_option("--timepoints", gen.timepoints, "Timepoints T")->capture_default_str();
    gen_cmd->add_option("--subjects", gen.subjects, "Subject count")->capture_default_str();
    gen_cmd->add_flag("--labeled", gen.labeled, "Split subjects across HC/SZ classes");
    gen_cmd->add_option("--rho", gen.rho, "Coupling spectral radius (< 1)")->capture_default_str();
    gen_cmd->add_option("--noise-std", gen.noise_std, "Innovation noise std")->capture_default_str();
    gen_cmd->add_option("--block-size", gen.block_size, "Class-difference block edge")->capture_default_str();
    gen_cmd->add_option("--block-delta", gen.block_delta, "Class-difference magnitude")->capture_default_str();

    PretrainOpts pre;
    CLI::App* pre_cmd = app.add_subcommand("pretrain", "InfoNCE pre-training");
    add_common(pre_cmd, pre.common);
    pre_cmd->add_option("--data", pre.data_manifest, "Dataset manifest")->required();
    pre_cmd->add_option("--epochs", pre.epochs, "Max epochs")->capture_default_str();
    pre_cmd->add_option("--batch-size", pre.batch_size, "Mini-batch size (the N of the loss)")->capture_default_str();
    pre_cmd->add_option("--lr", pre.learning_rate, "Adam learning rate")->capture_default_str();
    pre_cmd->add_option("--patience", pre.patience, "Early-stopping patience")->capture_default_str();
    pre_cmd->add_option("--holdout-fraction", pre.holdout_fraction,
                        "Held-out fraction for early stopping")
        ->capture_default_str();

    FinetuneOpts fin;
    CLI::App* fin_cmd = app.add_subcommand("finetune", "K-fold fine-tuned classification");
    add_common(fin_cmd, fin.common);
    fin_cmd->add_option("--data", fin.data_manifest, "Labeled dataset manifest")->required();
    fin_cmd->add_option("--checkpoint", fin.checkpoint, "Pre-trained checkpoint (else fresh init)")->capture_default_str();
    fin_cmd->add_option("--folds", fin.folds, "Fold count")->capture_default_str();
    fin_cmd->add_option("--val-size", fin.val_size, "Validation subjects per fold")->capture_default_str();
    fin_cmd->add_option("--test-size", fin.test_size, "Test subjects per fold")->capture_default_str();
    fin_cmd->add_option("--trial-seeds", fin.trial_seeds, "Seeded trials per fold")->capture_default_str();
    fin_cmd->add_option("--train-per-class", fin.train_per_class,
                        "Subsample the train split (0 = use all)")->capture_default_str();
    fin_cmd->add_option("--epochs", fin.epochs, "Max epochs")->capture_default_str();
    fin_cmd->add_option("--batch-size", fin.batch_size, "Mini-batch size")->capture_default_str();
    fin_cmd->add_option("--lr", fin.learning_rate, "Adam learning rate")->capture_default_str();
    fin_cmd->add_option("--patience", fin.patience, "Early-stopping patience")->capture_default_str();

    CurveOpts cur;
    CLI::App* cur_cmd = app.add_subcommand("curve", "Training-size sweep, pretrained vs fresh");
    add_common(cur_cmd, cur.common);
    cur_cmd->add_option("--data", cur.data_manifest, "Labeled dataset manifest")->required();
    cur_cmd->add_option("--checkpoint", cur.checkpoint, "Pre-trained checkpoint")->required();
    cur_cmd->add_option("--sizes", cur.sizes, "Train sizes per class")->capture_default_str();
    cur_cmd->add_option("--trial-seeds", cur.trial_seeds, "Seeded trials per fold")->capture_default_str();
    cur_cmd->add_option("--folds", cur.folds, "Fold count")->capture_default_str();
    cur_cmd->add_option("--val-size", cur.val_size, "Validation subjects per fold")->capture_default_str();
    cur_cmd->add_option("--test-size", cur.test_size, "Test subjects per fold")->capture_default_str();
    cur_cmd->add_option("--epochs", cur.epochs, "Max epochs")->capture_default_str();
    cur_cmd->add_option("--batch-size", cur.batch_size, "Mini-batch size")->capture_default_str();
    cur_cmd->add_option("--lr", cur.learning_rate, "Adam learning rate")->capture_default_str();
    cur_cmd->add_option("--patience", cur.patience, "Early-stopping patience")->capture_default_str();

    BaselineOpts base;
    CLI::App* base_cmd = app.add_subcommand("baseline", "Logistic-regression baseline");
    add_common(base_cmd, base.common);
    base_cmd->add_option("--data", base.data_manifest, "Labeled dataset manifest")->required();
    base_cmd->add_option("--features", base.features, "fnc | raw")
        ->check(CLI::IsMember({"fnc", "raw"}))->capture_default_str();
    base_cmd->add_option("--train-per-class", base.train_per_class,
                         "Subsample the train split (0 = use all)")->capture_default_str();
    base_cmd->add_option("--folds", base.folds, "Fold count")->capture_default_str();
    base_cmd->add_option("--val-size", base.val_size, "Validation subjects per fold")->capture_default_str();
    base_cmd->add_option("--test-size", base.test_size, "Test subjects per fold")->capture_default_str();
    base_cmd->add_option("--l2", base.l2, "L2 regularization strength")->capture_default_str();

    ReportOpts rep;
    CLI::App* rep_cmd = app.add_subcommand("report", "Merge report CSVs into one table");
    add_common(rep_cmd, rep.common);
    rep_cmd->add_option("--inputs", rep.inputs, "report.csv files (first is the reference)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_cmd->parsed()) return run_gen_data(gen);
        if (pre_cmd->parsed()) return run_pretrain(pre, app);
        if (fin_cmd->parsed()) return run_finetune(fin, app);
        if (cur_cmd->parsed()) return run_curve(cur, app);
        if (base_cmd->parsed()) return run_baseline(base, app);
        if (rep_cmd->parsed()) return run_report(rep);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
