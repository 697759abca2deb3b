#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mim/model.hpp"
#include "mim/optimizer.hpp"
#include "mim/stats.hpp"

namespace mim::harness {

struct FoldSpec {
    std::size_t folds = 18;
    std::size_t val_size = 17;
    std::size_t test_size = 17;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t pretrain_batch_size = 32;
    std::size_t finetune_batch_size = 16;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;
    double pretrain_holdout_fraction = 0.1;
    double baseline_l2 = 1e-2;
    std::uint64_t seed = 0;
    FoldSpec fold;

    void validate() const;
};

// ----------------------------------------------------------- pre-training --

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;   // per-subject InfoNCE over the training pool
    double holdout_loss = 0.0; // per-subject InfoNCE over the held-out pool
    double mi_bound = 0.0;     // mean per-batch log N - L/N on the holdout
};

struct PretrainResult {
    MimModel model; // weights of the best-holdout epoch
    std::vector<EpochStats> curve;
    std::size_t best_epoch = 0;
};

// Shuffled mini-batch InfoNCE training with Adam; early stop on held-out
// InfoNCE loss. Labels, if any, are ignored. Subjects are z-scored per region
// at entry.
PretrainResult pretrain(const MimModel& model,
                        const std::vector<data::SubjectSeries>& unlabeled,
                        const TrainConfig& cfg);

// ------------------------------------------------------------ fine-tuning --

struct FinetuneResult {
    MimModel model; // weights of the best-validation epoch
    double val_auc = 0.0;
    double test_auc = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
};

// Cross-entropy training of the summed two-head classifier; early stop on
// validation AUC; test AUC reported at the best-validation epoch. The epoch-0
// (untrained) model is an early-stopping candidate, so max_epochs 0 returns
// the input model's scores unchanged.
FinetuneResult finetune(const MimModel& model,
                        const std::vector<data::SubjectSeries>& train,
                        const std::vector<data::SubjectSeries>& val,
                        const std::vector<data::SubjectSeries>& test,
                        const TrainConfig& cfg);

// Classification scores (logit margin for class 1), evaluation mode.
std::vector<double> classify_scores(const MimModel& model,
                                    const std::vector<data::SubjectSeries>& subjects);
double evaluate_auc(const MimModel& model,
                    const std::vector<data::SubjectSeries>& subjects);

// ------------------------------------------------------------------ folds --

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Seeded stratified deck over the labeled subjects; folds index into it.
std::vector<std::size_t> stratified_deck(const std::vector<data::SubjectSeries>& labeled,
                                         std::uint64_t seed);
FoldSplit make_fold(const std::vector<std::size_t>& deck, const FoldSpec& spec,
                    std::size_t fold_index);

// -------------------------------------------------------------- reporting --

struct TrialRecord {
    std::size_t fold = 0;
    std::size_t seed_index = 0;
    std::uint64_t seed = 0;
    std::string arm;                  // "pretrained" | "fresh" | "fnc" | "raw" | ""
    std::size_t train_per_class = 0;  // 0 = full split
    double test_auc = 0.0;
    std::size_t best_epoch = 0;
};

struct CurvePoint {
    std::size_t train_per_class = 0;
    std::string arm; // "pretrained" | "fresh"
    double mean_auc = 0.0;
    double std_auc = 0.0;
    double p_vs_other = 1.0; // Welch p against the other arm at this size
};

struct ExperimentReport {
    std::string name;
    std::vector<TrialRecord> trials;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    std::optional<std::string> baseline_name;
    std::optional<double> t_stat;
    std::optional<double> p_value;
    std::vector<CurvePoint> curve;

    std::vector<double> aucs() const;
    void finalize(); // fills mean/std from trials
};

void compare_reports(ExperimentReport& report, const ExperimentReport& baseline);

std::string report_to_csv(const ExperimentReport& report);
ExperimentReport report_from_csv(const std::string& text, const std::string& name);
std::string curve_to_csv(const ExperimentReport& report);
std::string summary_table(const std::vector<ExperimentReport>& reports);

// ------------------------------------------------------------ experiments --

struct KfoldOptions {
    std::size_t trial_seeds = 10;
    std::optional<std::size_t> train_per_class; // subsample the train split
    const MimModel* init_model = nullptr;       // transferred weights; null = fresh init
};

// Stratified k-fold x seeded trials; one fine-tune per (fold, seed); trials
// run on parallel workers (each is an independent replica).
ExperimentReport kfold_experiment(const std::vector<data::SubjectSeries>& labeled,
                                  const ModelConfig& model_cfg, const TrainConfig& cfg,
                                  const KfoldOptions& options, const std::string& name);

struct CurveOptions {
    std::vector<std::size_t> sizes{8, 16, 32, 64, 100};
    std::size_t trial_seeds = 5;
    const MimModel* pretrained = nullptr; // required
};

// Training-size sweep of pretrained vs fresh initialization with per-size
// Welch significance; the returned report carries one CurvePoint per
// (size, arm) and one TrialRecord per underlying fine-tune.
ExperimentReport learning_curve(const std::vector<data::SubjectSeries>& labeled,
                                const ModelConfig& model_cfg, const TrainConfig& cfg,
                                const CurveOptions& options);

// --------------------------------------------------------------- baseline --

enum class BaselineFeatures { kFnc, kRaw };

struct BaselineResult {
    double test_auc = 0.0;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
};

// L2-regularized logistic regression by full-batch gradient descent with a
// Lipschitz step, run to grad-norm < 1e-6 or 10^4 iterations.
BaselineResult logistic_regression_auc(const std::vector<std::vector<double>>& train_x,
                                       const std::vector<int>& train_y,
                                       const std::vector<std::vector<double>>& test_x,
                                       const std::vector<int>& test_y, double l2);

// Fold-based baseline over FNC or raw flattened features.
ExperimentReport baseline_experiment(const std::vector<data::SubjectSeries>& labeled,
                                     BaselineFeatures features, const TrainConfig& cfg,
                                     std::optional<std::size_t> train_per_class,
                                     const std::string& name);

} // namespace mim::harness
