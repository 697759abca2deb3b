#include "mim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <set>
#include <sstream>

#include "mim/rng.hpp"

namespace mim::harness {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<data::SubjectSeries> zscore_all(const std::vector<data::SubjectSeries>& in) {
    std::vector<data::SubjectSeries> out;
    out.reserve(in.size());
    for (const auto& s : in) out.push_back(data::zscore(s));
    return out;
}

std::vector<data::SubjectSeries> select(const std::vector<data::SubjectSeries>& all,
                                        const std::vector<std::size_t>& idx) {
    std::vector<data::SubjectSeries> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(all[i]);
    return out;
}

void require_labels(const std::vector<data::SubjectSeries>& subjects, const char* what) {
    for (const auto& s : subjects) {
        if (!s.label) {
            throw DataError(std::string(what) + ": subject " + s.subject_id + " has no label");
        }
    }
}

std::vector<int> labels_of(const std::vector<data::SubjectSeries>& subjects) {
    std::vector<int> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) out.push_back(*s.label);
    return out;
}

} // namespace

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
    if (pretrain_batch_size == 0 || finetune_batch_size == 0) {
        throw ConfigError("train: batch sizes must be positive");
    }
    if (max_epochs > 0 && patience >= max_epochs) {
        throw ConfigError("train: patience (" + std::to_string(patience) +
                          ") must be smaller than max_epochs (" + std::to_string(max_epochs) + ")");
    }
    if (!(pretrain_holdout_fraction > 0.0 && pretrain_holdout_fraction < 1.0)) {
        throw ConfigError("train: pretrain holdout fraction must be in (0,1)");
    }
    if (fold.folds < 2) throw ConfigError("train: need at least 2 folds");
    if (fold.val_size == 0 || fold.test_size == 0) {
        throw ConfigError("train: val/test sizes must be positive");
    }
    if (fold.val_size > (fold.folds - 1) * fold.test_size) {
        throw ConfigError("train: val_size too large for the fold layout");
    }
}

// ----------------------------------------------------------- pre-training --

namespace {

double infonce_over_batches(const MimModel& model,
                            const std::vector<data::SubjectSeries>& subjects,
                            std::size_t batch_size, double* mi_bound_mean) {
    Tape tape;
    NoGradGuard guard(tape);
    double total = 0.0;
    double mi_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < subjects.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, subjects.size() - start);
        std::span<const data::SubjectSeries> batch(subjects.data() + start, n);
        auto out = model.forward_pretrain(tape, batch);
        Tensor scores = critic_scores(tape, out.c_embeddings, out.y_embeddings);
        const double loss = infonce_loss(tape, scores).item();
        total += loss;
        mi_sum += mi_lower_bound(loss, n);
        ++batches;
    }
    if (mi_bound_mean) *mi_bound_mean = batches ? mi_sum / double(batches) : 0.0;
    return total / double(subjects.size());
}

} // namespace

PretrainResult pretrain(const MimModel& model,
                        const std::vector<data::SubjectSeries>& unlabeled,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (unlabeled.size() < 4) {
        throw ConfigError("pretrain: need at least 4 subjects, got " +
                          std::to_string(unlabeled.size()));
    }
    if (cfg.pretrain_batch_size == 1) {
        std::cerr << "warning: pretrain batch size 1 makes InfoNCE degenerate "
                     "(every batch loss is exactly 0)\n";
    }
    const std::vector<data::SubjectSeries> all = zscore_all(unlabeled);

    // Held-out pool for early stopping.
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng holdout_rng(Rng::derive(cfg.seed, "pretrain/holdout"));
    holdout_rng.shuffle(order);
    std::size_t n_holdout = static_cast<std::size_t>(
        std::llround(cfg.pretrain_holdout_fraction * double(all.size())));
    n_holdout = std::max<std::size_t>(2, n_holdout);
    if (n_holdout >= all.size()) {
        throw ConfigError("pretrain: dataset too small for the holdout fraction");
    }
    std::vector<std::size_t> holdout_idx(order.begin(), order.begin() + n_holdout);
    std::vector<std::size_t> train_idx(order.begin() + n_holdout, order.end());
    const std::vector<data::SubjectSeries> holdout = select(all, holdout_idx);

    PretrainResult result{model.clone(), {}, 0};
    MimModel work = model.clone();
    Adam adam(work.parameters(), {cfg.learning_rate});

    double best_holdout = 0.0;
    std::vector<std::vector<double>> best_snap;
    {
        double mi0 = 0.0;
        best_holdout = infonce_over_batches(work, holdout, cfg.pretrain_batch_size, &mi0);
        best_snap = work.snapshot();
    }
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(cfg.seed, "pretrain/shuffle", epoch));
        std::vector<std::size_t> perm = train_idx;
        shuffle_rng.shuffle(perm);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < perm.size(); start += cfg.pretrain_batch_size) {
            const std::size_t n = std::min(cfg.pretrain_batch_size, perm.size() - start);
            std::vector<data::SubjectSeries> batch;
            batch.reserve(n);
            for (std::size_t i = 0; i < n; ++i) batch.push_back(all[perm[start + i]]);

            Tape tape;
            auto out = work.forward_pretrain(tape, batch);
            Tensor scores = critic_scores(tape, out.c_embeddings, out.y_embeddings);
            Tensor loss = infonce_loss(tape, scores);
            if (!std::isfinite(loss.item())) {
                throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
            }
            epoch_loss += loss.item();
            adam.zero_grad();
            tape.backward(loss);
            adam.step();
        }

        double mi = 0.0;
        const double holdout_loss =
            infonce_over_batches(work, holdout, cfg.pretrain_batch_size, &mi);
        result.curve.push_back({epoch, epoch_loss / double(train_idx.size()), holdout_loss, mi});

        if (holdout_loss < best_holdout) {
            best_holdout = holdout_loss;
            best_snap = work.snapshot();
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    work.restore(best_snap);
    result.model = std::move(work);
    return result;
}

// ------------------------------------------------------------ fine-tuning --

std::vector<double> classify_scores(const MimModel& model,
                                    const std::vector<data::SubjectSeries>& subjects) {
    // Each subject is an independent forward pass on its own tape; parameters
    // are shared read-only, so evaluation fans out across workers.
    std::vector<double> scores(subjects.size());
    std::vector<std::exception_ptr> errors(subjects.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(subjects.size()); ++i) {
        try {
            Tape tape;
            NoGradGuard guard(tape);
            Tensor logits = model.forward_classify_batch(tape, std::span(&subjects[i], 1));
            scores[i] = logits(0, 1) - logits(0, 0);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return scores;
}

double evaluate_auc(const MimModel& model,
                    const std::vector<data::SubjectSeries>& subjects) {
    require_labels(subjects, "evaluate_auc");
    return stats::auc(classify_scores(model, subjects), labels_of(subjects));
}

FinetuneResult finetune(const MimModel& model,
                        const std::vector<data::SubjectSeries>& train,
                        const std::vector<data::SubjectSeries>& val,
                        const std::vector<data::SubjectSeries>& test,
                        const TrainConfig& cfg) {
    cfg.validate();
    require_labels(train, "finetune train");
    require_labels(val, "finetune val");
    require_labels(test, "finetune test");
    if (train.empty() || val.empty() || test.empty()) {
        throw ConfigError("finetune: empty split");
    }
    {
        std::set<std::string> train_ids, seen;
        for (const auto& s : train) train_ids.insert(s.subject_id);
        for (const auto& s : val) seen.insert(s.subject_id);
        for (const auto& s : test) {
            if (!seen.insert(s.subject_id).second) {
                throw ConfigError("finetune: subject " + s.subject_id + " in both val and test");
            }
        }
        for (const std::string& id : seen) {
            if (train_ids.count(id)) {
                throw ConfigError("finetune: subject " + id + " leaks from train into val/test");
            }
        }
    }
    {
        const std::vector<int> y = labels_of(train);
        const bool has0 = std::find(y.begin(), y.end(), 0) != y.end();
        const bool has1 = std::find(y.begin(), y.end(), 1) != y.end();
        if (!has0 || !has1) {
            throw ConfigError("finetune: degenerate split, training data has a single class");
        }
    }

    const std::vector<data::SubjectSeries> train_n = zscore_all(train);
    const std::vector<data::SubjectSeries> val_n = zscore_all(val);
    const std::vector<data::SubjectSeries> test_n = zscore_all(test);

    MimModel work = model.clone();
    Adam adam(work.parameters(), {cfg.learning_rate});

    FinetuneResult result{model.clone(), 0.0, 0.0, 0, 0};
    double best_val = evaluate_auc(work, val_n); // epoch 0: the transferred model
    std::vector<std::vector<double>> best_snap = work.snapshot();
    std::size_t since_best = 0;

    std::vector<std::size_t> idx(train_n.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        result.epochs_run = epoch;
        Rng shuffle_rng(Rng::derive(cfg.seed, "finetune/shuffle", epoch));
        std::vector<std::size_t> perm = idx;
        shuffle_rng.shuffle(perm);

        for (std::size_t start = 0; start < perm.size(); start += cfg.finetune_batch_size) {
            const std::size_t n = std::min(cfg.finetune_batch_size, perm.size() - start);
            std::vector<data::SubjectSeries> batch;
            std::vector<int> batch_labels;
            batch.reserve(n);
            batch_labels.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                batch.push_back(train_n[perm[start + i]]);
                batch_labels.push_back(*train_n[perm[start + i]].label);
            }
            Tape tape;
            Tensor logits = work.forward_classify_batch(tape, batch);
            Tensor loss = nll_loss(tape, log_softmax_rows(tape, logits), batch_labels, true);
            if (!std::isfinite(loss.item())) {
                throw NumericError("finetune: non-finite loss at epoch " + std::to_string(epoch));
            }
            adam.zero_grad();
            tape.backward(loss);
            adam.step();
        }

        const double val_auc = evaluate_auc(work, val_n);
        if (val_auc > best_val) {
            best_val = val_auc;
            best_snap = work.snapshot();
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    work.restore(best_snap);
    result.val_auc = best_val;
    result.test_auc = evaluate_auc(work, test_n);
    result.model = std::move(work);
    return result;
}

// ------------------------------------------------------------------ folds --

std::vector<std::size_t> stratified_deck(const std::vector<data::SubjectSeries>& labeled,
                                         std::uint64_t seed) {
    require_labels(labeled, "stratified_deck");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const int l = *labeled[i].label;
        if (l != 0 && l != 1) {
            throw DataError("stratified_deck: label must be 0/1, subject " +
                            labeled[i].subject_id);
        }
        by_class[l].push_back(i);
    }
    if (by_class[0].empty() || by_class[1].empty()) {
        throw ConfigError("stratified_deck: both classes must be present");
    }
    Rng rng(seed);
    rng.shuffle(by_class[0]);
    rng.shuffle(by_class[1]);

    // Proportional merge: always take from the class with the larger
    // remaining fraction, so every window of the deck is near class-balanced.
    std::vector<std::size_t> deck;
    deck.reserve(labeled.size());
    std::size_t taken[2] = {0, 0};
    const double n0 = double(by_class[0].size()), n1 = double(by_class[1].size());
    while (taken[0] < by_class[0].size() || taken[1] < by_class[1].size()) {
        const double rem0 = taken[0] < by_class[0].size()
                                ? (n0 - double(taken[0])) / n0
                                : -1.0;
        const double rem1 = taken[1] < by_class[1].size()
                                ? (n1 - double(taken[1])) / n1
                                : -1.0;
        const int pick = rem0 >= rem1 ? 0 : 1;
        deck.push_back(by_class[pick][taken[pick]++]);
    }
    return deck;
}

FoldSplit make_fold(const std::vector<std::size_t>& deck, const FoldSpec& spec,
                    std::size_t fold_index) {
    if (spec.folds < 2) throw ConfigError("make_fold: need at least 2 folds");
    if (fold_index >= spec.folds) {
        throw ConfigError("make_fold: fold index out of range");
    }
    const std::size_t pool = spec.folds * spec.test_size;
    if (pool > deck.size()) {
        throw ConfigError("make_fold: fold spec needs " + std::to_string(pool) +
                          " held-out subjects but the dataset has " +
                          std::to_string(deck.size()));
    }
    if (spec.val_size > pool - spec.test_size) {
        throw ConfigError("make_fold: val_size does not fit outside the test chunk");
    }
    FoldSplit split;
    const std::size_t t0 = fold_index * spec.test_size;
    std::set<std::size_t> used;
    for (std::size_t i = 0; i < spec.test_size; ++i) {
        split.test.push_back(deck[t0 + i]);
        used.insert(t0 + i);
    }
    const std::size_t v0 = ((fold_index + 1) * spec.test_size) % pool;
    for (std::size_t i = 0; i < spec.val_size; ++i) {
        const std::size_t pos = (v0 + i) % pool;
        split.val.push_back(deck[pos]);
        used.insert(pos);
    }
    for (std::size_t pos = 0; pos < deck.size(); ++pos) {
        if (!used.count(pos)) split.train.push_back(deck[pos]);
    }
    return split;
}

// -------------------------------------------------------------- reporting --

std::vector<double> ExperimentReport::aucs() const {
    std::vector<double> out;
    out.reserve(trials.size());
    for (const TrialRecord& t : trials) out.push_back(t.test_auc);
    return out;
}

void ExperimentReport::finalize() {
    const std::vector<double> xs = aucs();
    mean_auc = stats::mean(xs);
    std_auc = xs.size() > 1 ? stats::sample_stddev(xs) : 0.0;
}

void compare_reports(ExperimentReport& report, const ExperimentReport& baseline) {
    const auto r = stats::welch_t_test(report.aucs(), baseline.aucs());
    report.baseline_name = baseline.name;
    report.t_stat = r.t;
    report.p_value = r.p;
}

std::string report_to_csv(const ExperimentReport& report) {
    std::ostringstream os;
    os << "fold,seed_index,seed,arm,train_per_class,test_auc,best_epoch\n";
    for (const TrialRecord& t : report.trials) {
        os << t.fold << ',' << t.seed_index << ',' << t.seed << ',' << t.arm << ','
           << t.train_per_class << ',' << fmt_double(t.test_auc) << ',' << t.best_epoch
           << '\n';
    }
    return os.str();
}

ExperimentReport report_from_csv(const std::string& text, const std::string& name) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw DataError("report_from_csv: empty report");
    ExperimentReport report;
    report.name = name;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 7) {
            throw DataError("report_from_csv: line " + std::to_string(lineno) +
                            " has " + std::to_string(fields.size()) + " fields, want 7");
        }
        TrialRecord t;
        t.fold = std::stoull(fields[0]);
        t.seed_index = std::stoull(fields[1]);
        t.seed = std::stoull(fields[2]);
        t.arm = fields[3];
        t.train_per_class = std::stoull(fields[4]);
        t.test_auc = std::strtod(fields[5].c_str(), nullptr);
        t.best_epoch = std::stoull(fields[6]);
        report.trials.push_back(std::move(t));
    }
    if (report.trials.empty()) throw DataError("report_from_csv: no trial records");
    report.finalize();
    return report;
}

std::string curve_to_csv(const ExperimentReport& report) {
    std::ostringstream os;
    os << "train_size,arm,mean_auc,std_auc,p_value\n";
    for (const CurvePoint& p : report.curve) {
        os << p.train_per_class << ',' << p.arm << ',' << fmt_double(p.mean_auc) << ','
           << fmt_double(p.std_auc) << ',' << fmt_double(p.p_vs_other) << '\n';
    }
    return os.str();
}

std::string summary_table(const std::vector<ExperimentReport>& reports) {
    std::ostringstream os;
    os << "name                              trials   mean_auc   std_auc   t_vs_ref     p_vs_ref\n";
    for (const ExperimentReport& r : reports) {
        char line[160];
        if (r.t_stat && r.p_value) {
            std::snprintf(line, sizeof(line), "%-32s %6zu   %8.4f  %8.4f  %9.4f  %11.6f\n",
                          r.name.c_str(), r.trials.size(), r.mean_auc, r.std_auc, *r.t_stat,
                          *r.p_value);
        } else {
            std::snprintf(line, sizeof(line), "%-32s %6zu   %8.4f  %8.4f          -            -\n",
                          r.name.c_str(), r.trials.size(), r.mean_auc, r.std_auc);
        }
        os << line;
    }
    return os.str();
}

// ------------------------------------------------------------ experiments --

namespace {

std::vector<std::size_t> subsample_per_class(const std::vector<data::SubjectSeries>& all,
                                             const std::vector<std::size_t>& pool,
                                             std::size_t per_class, Rng& rng) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i : pool) by_class[*all[i].label].push_back(i);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < per_class) {
            throw ConfigError("subsample: train split has " +
                              std::to_string(by_class[c].size()) + " subjects of class " +
                              std::to_string(c) + ", need " + std::to_string(per_class));
        }
        rng.shuffle(by_class[c]);
        by_class[c].resize(per_class);
    }
    std::vector<std::size_t> out = by_class[0];
    out.insert(out.end(), by_class[1].begin(), by_class[1].end());
    std::sort(out.begin(), out.end()); // deterministic order for batching
    return out;
}

struct TrialPlan {
    std::size_t fold;
    std::size_t seed_index;
    std::uint64_t seed;
};

} // namespace

ExperimentReport kfold_experiment(const std::vector<data::SubjectSeries>& labeled,
                                  const ModelConfig& model_cfg, const TrainConfig& cfg,
                                  const KfoldOptions& options, const std::string& name) {
    cfg.validate();
    model_cfg.validate();
    require_labels(labeled, "kfold_experiment");
    if (options.trial_seeds == 0) throw ConfigError("kfold: need at least one trial seed");

    const std::vector<std::size_t> deck =
        stratified_deck(labeled, Rng::derive(cfg.seed, "folds"));

    std::vector<TrialPlan> plans;
    for (std::size_t f = 0; f < cfg.fold.folds; ++f) {
        make_fold(deck, cfg.fold, f); // feasibility check before launching
        for (std::size_t s = 0; s < options.trial_seeds; ++s) {
            plans.push_back({f, s, Rng::derive(cfg.seed, "trial", f * 100003ULL + s)});
        }
    }

    ExperimentReport report;
    report.name = name;
    report.trials.resize(plans.size());
    std::vector<std::exception_ptr> errors(plans.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(plans.size()); ++pi) {
        try {
            const TrialPlan& plan = plans[pi];
            FoldSplit split = make_fold(deck, cfg.fold, plan.fold);
            std::vector<std::size_t> train_idx = split.train;
            if (options.train_per_class) {
                Rng sub_rng(Rng::derive(plan.seed, "subsample"));
                train_idx = subsample_per_class(labeled, split.train,
                                                *options.train_per_class, sub_rng);
            }
            TrainConfig trial_cfg = cfg;
            trial_cfg.seed = plan.seed;
            MimModel model = options.init_model
                                 ? options.init_model->clone()
                                 : MimModel::init(model_cfg, Rng::derive(plan.seed, "init"));
            FinetuneResult r = finetune(model, select(labeled, train_idx),
                                        select(labeled, split.val),
                                        select(labeled, split.test), trial_cfg);
            TrialRecord rec;
            rec.fold = plan.fold;
            rec.seed_index = plan.seed_index;
            rec.seed = plan.seed;
            rec.arm = options.init_model ? "pretrained" : "fresh";
            rec.train_per_class = options.train_per_class.value_or(0);
            rec.test_auc = r.test_auc;
            rec.best_epoch = r.best_epoch;
            report.trials[pi] = std::move(rec);
        } catch (...) {
            errors[pi] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    report.finalize();
    return report;
}

ExperimentReport learning_curve(const std::vector<data::SubjectSeries>& labeled,
                                const ModelConfig& model_cfg, const TrainConfig& cfg,
                                const CurveOptions& options) {
    if (!options.pretrained) {
        throw ConfigError("learning_curve: a pretrained model is required");
    }
    if (options.sizes.empty()) throw ConfigError("learning_curve: no train sizes");

    ExperimentReport report;
    report.name = "learning_curve";
    for (std::size_t size : options.sizes) {
        KfoldOptions pre_opt;
        pre_opt.trial_seeds = options.trial_seeds;
        pre_opt.train_per_class = size;
        pre_opt.init_model = options.pretrained;
        ExperimentReport pre = kfold_experiment(labeled, model_cfg, cfg, pre_opt,
                                                "pretrained@" + std::to_string(size));

        KfoldOptions fresh_opt = pre_opt;
        fresh_opt.init_model = nullptr;
        ExperimentReport fresh = kfold_experiment(labeled, model_cfg, cfg, fresh_opt,
                                                  "fresh@" + std::to_string(size));

        const auto tt = stats::welch_t_test(pre.aucs(), fresh.aucs());
        report.curve.push_back({size, "pretrained", pre.mean_auc, pre.std_auc, tt.p});
        report.curve.push_back({size, "fresh", fresh.mean_auc, fresh.std_auc, tt.p});
        report.trials.insert(report.trials.end(), pre.trials.begin(), pre.trials.end());
        report.trials.insert(report.trials.end(), fresh.trials.begin(), fresh.trials.end());
    }
    report.finalize();
    return report;
}

// --------------------------------------------------------------- baseline --

BaselineResult logistic_regression_auc(const std::vector<std::vector<double>>& train_x,
                                       const std::vector<int>& train_y,
                                       const std::vector<std::vector<double>>& test_x,
                                       const std::vector<int>& test_y, double l2) {
    if (train_x.empty() || test_x.empty()) {
        throw ConfigError("logistic_regression: empty split");
    }
    if (train_x.size() != train_y.size() || test_x.size() != test_y.size()) {
        throw ContractError("logistic_regression: feature/label count mismatch");
    }
    const std::size_t d = train_x.front().size();
    for (const auto& row : train_x) {
        if (row.size() != d) throw ShapeError("logistic_regression: inconsistent feature dim");
    }
    for (const auto& row : test_x) {
        if (row.size() != d) throw ShapeError("logistic_regression: inconsistent feature dim");
    }
    const std::size_t n = train_x.size();

    // Lipschitz step: hessian of the mean logistic loss is bounded by
    // X^T X / (4n) + l2 I, and ||X^T X||_2 <= ||X||_F^2 (with the implicit
    // all-ones bias column included).
    double frob2 = 0.0;
    for (const auto& row : train_x) {
        for (double v : row) frob2 += v * v;
        frob2 += 1.0;
    }
    const double lipschitz = frob2 / (4.0 * double(n)) + l2;
    const double step = 1.0 / lipschitz;

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    std::vector<double> gw(d);
    BaselineResult result;
    constexpr std::size_t kMaxIter = 10000;
    constexpr double kTol = 1e-6;
    for (std::size_t it = 0; it < kMaxIter; ++it) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double>& x = train_x[i];
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
            const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                      : std::exp(z) / (1.0 + std::exp(z));
            const double r = p - double(train_y[i]);
            for (std::size_t j = 0; j < d; ++j) gw[j] += r * x[j];
            gb += r;
        }
        double norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            gw[j] = gw[j] / double(n) + l2 * w[j];
            norm2 += gw[j] * gw[j];
        }
        gb /= double(n);
        norm2 += gb * gb;
        result.iterations = it + 1;
        result.grad_norm = std::sqrt(norm2);
        if (result.grad_norm < kTol) break;
        for (std::size_t j = 0; j < d; ++j) w[j] -= step * gw[j];
        b -= step * gb;
    }

    std::vector<double> scores(test_x.size());
    for (std::size_t i = 0; i < test_x.size(); ++i) {
        double z = b;
        for (std::size_t j = 0; j < d; ++j) z += w[j] * test_x[i][j];
        scores[i] = z;
    }
    result.test_auc = stats::auc(scores, test_y);
    return result;
}

ExperimentReport baseline_experiment(const std::vector<data::SubjectSeries>& labeled,
                                     BaselineFeatures features, const TrainConfig& cfg,
                                     std::optional<std::size_t> train_per_class,
                                     const std::string& name) {
    cfg.validate();
    require_labels(labeled, "baseline_experiment");
    const std::vector<std::size_t> deck =
        stratified_deck(labeled, Rng::derive(cfg.seed, "folds"));

    auto features_of = [&](std::size_t i) {
        return features == BaselineFeatures::kFnc ? data::fnc_features(labeled[i])
                                                  : data::raw_features(labeled[i]);
    };

    ExperimentReport report;
    report.name = name;
    for (std::size_t f = 0; f < cfg.fold.folds; ++f) {
        FoldSplit split = make_fold(deck, cfg.fold, f);
        std::vector<std::size_t> train_idx = split.train;
        if (train_per_class) {
            Rng sub_rng(Rng::derive(cfg.seed, "baseline/subsample", f));
            train_idx = subsample_per_class(labeled, split.train, *train_per_class, sub_rng);
        }
        std::vector<std::vector<double>> train_x, test_x;
        std::vector<int> train_y, test_y;
        for (std::size_t i : train_idx) {
            train_x.push_back(features_of(i));
            train_y.push_back(*labeled[i].label);
        }
        for (std::size_t i : split.test) {
            test_x.push_back(features_of(i));
            test_y.push_back(*labeled[i].label);
        }
        BaselineResult r = logistic_regression_auc(train_x, train_y, test_x, test_y,
                                                   cfg.baseline_l2);
        TrialRecord rec;
        rec.fold = f;
        rec.seed_index = 0;
        rec.seed = cfg.seed;
        rec.arm = features == BaselineFeatures::kFnc ? "fnc" : "raw";
        rec.train_per_class = train_per_class.value_or(0);
        rec.test_auc = r.test_auc;
        rec.best_epoch = r.iterations;
        report.trials.push_back(std::move(rec));
    }
    report.finalize();
    return report;
}

} // namespace mim::harness
