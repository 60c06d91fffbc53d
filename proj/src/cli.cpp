#include "rehab/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rehab/errors.hpp"
#include "rehab/evaluation.hpp"
#include "rehab/feedback.hpp"
#include "rehab/run_config.hpp"

namespace rehab {

namespace {

// REHAB_ASSESS_LOG: quiet | info | debug. Logs go to stderr so stdout stays
// pipeable.
int log_level() {
    static const int level = [] {
        const char* env = std::getenv("REHAB_ASSESS_LOG");
        if (!env) return 1;
        const std::string s = env;
        if (s == "quiet") return 0;
        if (s == "debug") return 2;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[rehab-assess] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[rehab-assess] " << msg << "\n";
}

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path,
                    "run configuration JSON; flags override it");
    cmd->add_option("--seed", opts.seed, "master seed for every stage");
    cmd->add_option("--threads", opts.threads,
                    "worker threads (default 1, reproducible at any value)");
}

RunConfig load_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty())
        cfg = RunConfig::from_json_file(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.threads) {
        if (*opts.threads < 1)
            throw ConfigError("cli: --threads must be at least 1");
        cfg.threads = *opts.threads;
    }
    cfg.propagate_seed();
    return cfg;
}

// Output sink: path "-" or empty means stdout.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw IoError("cannot open '" + path + "' for writing");
            path_ = path;
        }
    }
    std::ostream& stream() { return path_.empty() ? std::cout : file_; }
    void finish() {
        if (path_.empty()) {
            std::cout.flush();
            return;
        }
        file_.close();
        if (!file_) throw IoError("failed writing '" + path_ + "'");
    }

private:
    std::ofstream file_;
    std::string path_;
};

struct LabeledFeatures {
    std::vector<FeatureVector> raw;
    std::vector<int> labels;
};

LabeledFeatures extract_labeled(const Dataset& ds, const FeatureConfig& fc,
                                const std::optional<Exercise>& only) {
    LabeledFeatures out;
    for (const auto& rep : ds.repetitions) {
        if (only && rep.exercise != *only) continue;
        if (!rep.label) continue;
        out.raw.push_back(extract_features(rep, fc));
        out.labels.push_back(rep.label->overall);
    }
    if (out.raw.empty())
        throw DomainError("cli: no labeled repetitions to train on");
    return out;
}

std::optional<Exercise> parse_exercise_flag(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const auto ex = exercise_from_string(s);
    if (!ex) throw ConfigError("cli: unknown exercise '" + s + "'");
    return ex;
}

int cmd_synth(const CommonOpts& common, const std::string& out_path) {
    RunConfig cfg = load_config(common);
    cfg.synth.validate();
    const Dataset ds = synth_dataset(cfg.synth);
    Sink sink(out_path);
    sink.stream() << serialize_dataset(ds);
    sink.finish();
    log_info("synth: " + std::to_string(ds.subjects.size()) + " subjects, " +
             std::to_string(ds.repetitions.size()) + " repetitions (seed " +
             std::to_string(cfg.synth.seed) + ")");
    return 0;
}

int cmd_extract(const CommonOpts& common, const std::string& in_path,
                const std::string& out_path) {
    RunConfig cfg = load_config(common);
    const Dataset ds = parse_dataset(in_path);
    Sink sink(out_path);
    export_feature_csv(ds, cfg.feature, sink.stream());
    sink.finish();
    log_info("extract: " + std::to_string(ds.repetitions.size()) +
             " repetitions");
    return 0;
}

int cmd_train(const CommonOpts& common, const std::string& in_path,
              std::string out_path, const std::string& exercise_flag) {
    RunConfig cfg = load_config(common);
    if (common.threads) cfg.train.threads = *common.threads;
    if (out_path.empty()) out_path = cfg.predictor_path;
    const Dataset ds = parse_dataset(in_path);
    const auto only = parse_exercise_flag(exercise_flag);
    LabeledFeatures data = extract_labeled(ds, cfg.feature, only);

    const NormParams norm = fit_zscore(data.raw);
    std::vector<std::vector<double>> X;
    X.reserve(data.raw.size());
    for (const auto& fv : data.raw)
        X.push_back(encode_input(apply_zscore(norm, fv)));
    auto [model, report] = train_predictor(X, data.labels, cfg.train);

    const GridCell& best = report.cells[report.best_index];
    std::string arch;
    for (int h : best.hidden) arch += (arch.empty() ? "" : "x") + std::to_string(h);
    log_info("train: " + std::to_string(X.size()) + " instances, best arch " +
             arch + " lr " + std::to_string(best.lr) + " val F1 " +
             std::to_string(best.val_f1));
    for (const auto& cell : report.cells) {
        std::string a;
        for (int h : cell.hidden)
            a += (a.empty() ? "" : "x") + std::to_string(h);
        log_debug("  grid " + a + " lr " + std::to_string(cell.lr) +
                  " val F1 " + std::to_string(cell.val_f1) + " iters " +
                  std::to_string(cell.iterations));
    }
    save_predictor({model, norm}, out_path);
    log_info("train: wrote " + out_path);
    return 0;
}

int cmd_select(const CommonOpts& common, const std::string& in_path,
               std::string out_path, const std::string& exercise_flag,
               const std::string& traces_path) {
    RunConfig cfg = load_config(common);
    if (out_path.empty()) out_path = cfg.selector_path;
    const Dataset ds = parse_dataset(in_path);
    const auto only = parse_exercise_flag(exercise_flag);
    LabeledFeatures data = extract_labeled(ds, cfg.feature, only);

    const NormParams norm = fit_zscore(data.raw);
    std::vector<FeatureVector> instances;
    instances.reserve(data.raw.size());
    for (const auto& fv : data.raw) instances.push_back(apply_zscore(norm, fv));

    const SelectorNets nets = train_selector(instances, data.labels, cfg.rl);
    save_selector(nets, norm, out_path);
    log_info("select: trained on " + std::to_string(instances.size()) +
             " instances, mean greedy reward " +
             std::to_string(nets.val_reward));
    log_info("select: wrote " + out_path);

    if (!traces_path.empty()) {
        Sink sink(traces_path);
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const EpisodeTrace t = select_and_classify(
                nets.online, instances[i], cfg.rl, &data.labels[i]);
            sink.stream() << trace_to_json(t) << '\n';
        }
        sink.finish();
        log_info("select: wrote traces to " + traces_path);
    }
    return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& in_path,
                 std::string out_path, std::string tp_path,
                 const std::string& format) {
    RunConfig cfg = load_config(common);
    if (out_path.empty()) out_path = cfg.out;
    if (tp_path.empty()) tp_path = cfg.tp_agreement_path;
    if (format != "text" && format != "json")
        throw ConfigError("cli: --format must be text or json");

    const Dataset ds = parse_dataset(in_path);
    const EvalResult res = loso_evaluate(ds, cfg.eval_config());

    std::optional<TpAgreement> tp;
    if (!tp_path.empty()) tp = load_tp_agreement(tp_path);

    const std::string json = res.to_json();
    if (!out_path.empty() && out_path != "-") {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot open '" + out_path + "' for writing");
        out << json << '\n';
        if (!out) throw IoError("failed writing '" + out_path + "'");
        log_info("evaluate: wrote " + out_path);
    }
    if (format == "json")
        std::cout << json << '\n';
    else
        std::cout << emit_results_table(res, tp ? &*tp : nullptr);
    std::cout.flush();
    return 0;
}

int cmd_feedback(const CommonOpts& common, const std::string& in_path,
                 const std::string& subject, const std::string& exercise_flag,
                 const std::string& side_flag, int rep_index,
                 const std::string& predictor_path, const std::string& format,
                 double threshold_flag, const std::string& templates_flag,
                 const std::string& out_path) {
    RunConfig cfg = load_config(common);
    if (format != "text" && format != "json")
        throw ConfigError("cli: --format must be text or json");
    const auto exercise = parse_exercise_flag(exercise_flag);
    if (!exercise) throw ConfigError("cli: --exercise is required");
    const auto side = side_from_string(side_flag);
    if (!side) throw ConfigError("cli: unknown side '" + side_flag + "'");
    const double threshold =
        threshold_flag > 0.0 ? threshold_flag : cfg.feedback_threshold;
    std::string templates_path =
        !templates_flag.empty() ? templates_flag : cfg.templates_path;

    const Dataset ds = parse_dataset(in_path);
    const MotionRepetition* rep = nullptr;
    for (const auto& r : ds.repetitions)
        if (r.subject_id == subject && r.exercise == *exercise &&
            r.side == *side && r.rep_index == rep_index)
            rep = &r;
    if (!rep)
        throw DomainError("cli: no repetition " + std::to_string(rep_index) +
                          " for subject " + subject + ", exercise " +
                          to_string(*exercise) + ", side " + to_string(*side));

    const auto pool = normal_pool(ds, subject, *exercise);
    std::vector<FeatureVector> normals;
    normals.reserve(pool.size());
    for (const auto* r : pool)
        normals.push_back(extract_features(*r, cfg.feature));
    const NormalProfile profile = fit_normal_profile(normals);
    log_debug("feedback: profile from " + std::to_string(profile.source_count) +
              " normal repetitions");

    const FeatureVector fv = extract_features(*rep, cfg.feature);

    int predicted;
    if (!predictor_path.empty()) {
        const PredictorCheckpoint cp =
            load_predictor(predictor_path, fv.names.get());
        predicted = predict(cp.model, apply_zscore(cp.norm, fv)).label;
        log_debug("feedback: predictor says " + std::to_string(predicted));
    } else if (rep->label) {
        predicted = rep->label->overall;
        log_debug("feedback: using stored label " + std::to_string(predicted));
    } else {
        throw DomainError(
            "cli: repetition is unlabeled and no --predictor was given");
    }

    const FeedbackTemplates templates = templates_path.empty()
                                            ? default_templates()
                                            : load_templates(templates_path);
    const auto scores = deviation_scores(profile, fv);
    const FeedbackReport report =
        generate_feedback(scores, predicted, templates, threshold);

    Sink sink(out_path);
    if (format == "json")
        sink.stream() << render_feedback_json(report) << '\n';
    else
        sink.stream() << render_feedback_text(report);
    sink.finish();
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"personalized rehabilitation assessment pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    CommonOpts synth_common;
    add_common(synth, synth_common);
    std::string synth_out;
    synth->add_option("--out", synth_out, "corpus JSONL path (default stdout)");

    // extract
    auto* extract =
        app.add_subcommand("extract", "extract kinematic features to CSV");
    CommonOpts extract_common;
    add_common(extract, extract_common);
    std::string extract_in, extract_out;
    extract->add_option("--in", extract_in, "corpus JSONL")->required();
    extract->add_option("--out", extract_out, "CSV path (default stdout)");

    // train
    auto* train =
        app.add_subcommand("train", "train the full-feature quality predictor");
    CommonOpts train_common;
    add_common(train, train_common);
    std::string train_in, train_out, train_exercise;
    train->add_option("--in", train_in, "corpus JSONL")->required();
    train->add_option("--out", train_out, "predictor checkpoint path");
    train->add_option("--exercise", train_exercise,
                      "restrict training to one exercise");

    // select
    auto* select =
        app.add_subcommand("select", "train the feature acquisition agent");
    CommonOpts select_common;
    add_common(select, select_common);
    std::string select_in, select_out, select_exercise, select_traces;
    select->add_option("--in", select_in, "corpus JSONL")->required();
    select->add_option("--out", select_out, "selector checkpoint path");
    select->add_option("--exercise", select_exercise,
                       "restrict training to one exercise");
    select->add_option("--traces", select_traces,
                       "write per-instance greedy rollout traces (JSONL)");

    // evaluate
    auto* evaluate = app.add_subcommand(
        "evaluate", "leave-one-subject-out comparison of the methods");
    CommonOpts eval_common;
    add_common(evaluate, eval_common);
    std::string eval_in, eval_out, eval_tp, eval_format = "text";
    evaluate->add_option("--in", eval_in, "corpus JSONL")->required();
    evaluate->add_option("--out", eval_out, "results JSON path");
    evaluate->add_option("--tp", eval_tp,
                         "therapist agreement side file for the report");
    evaluate->add_option("--format", eval_format, "stdout format: text|json");

    // feedback
    auto* feedback = app.add_subcommand(
        "feedback", "corrective feedback for one repetition");
    CommonOpts fb_common;
    add_common(feedback, fb_common);
    std::string fb_in, fb_subject, fb_exercise, fb_side = "affected";
    std::string fb_predictor, fb_format = "text", fb_templates, fb_out;
    int fb_rep = 0;
    double fb_threshold = 0.0;
    feedback->add_option("--in", fb_in, "corpus JSONL")->required();
    feedback->add_option("--subject", fb_subject, "subject id")->required();
    feedback->add_option("--exercise", fb_exercise, "exercise id")->required();
    feedback->add_option("--side", fb_side, "side (default affected)");
    feedback->add_option("--rep", fb_rep, "repetition index")->required();
    feedback->add_option("--predictor", fb_predictor,
                         "predictor checkpoint; stored label used otherwise");
    feedback->add_option("--format", fb_format, "output format: text|json");
    feedback->add_option("--threshold", fb_threshold,
                         "deviation threshold in z units");
    feedback->add_option("--templates", fb_templates,
                         "message template JSON file");
    feedback->add_option("--out", fb_out, "output path (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        (void)app.exit(e);
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        (void)app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return 2;
    }

    try {
        if (*synth) return cmd_synth(synth_common, synth_out);
        if (*extract)
            return cmd_extract(extract_common, extract_in, extract_out);
        if (*train)
            return cmd_train(train_common, train_in, train_out,
                             train_exercise);
        if (*select)
            return cmd_select(select_common, select_in, select_out,
                              select_exercise, select_traces);
        if (*evaluate)
            return cmd_evaluate(eval_common, eval_in, eval_out, eval_tp,
                                eval_format);
        if (*feedback)
            return cmd_feedback(fb_common, fb_in, fb_subject, fb_exercise,
                                fb_side, fb_rep, fb_predictor, fb_format,
                                fb_threshold, fb_templates, fb_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace rehab
