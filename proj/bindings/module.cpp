// Python bindings for the assessment pipeline. The module exposes the main
// operations (corpus synthesis, feature extraction, predictor and selector
// training, RFE, LOSO evaluation, feedback) over plain Python types; heavy
// calls release the GIL.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rehab/errors.hpp"
#include "rehab/evaluation.hpp"
#include "rehab/feedback.hpp"
#include "rehab/kinematics.hpp"
#include "rehab/metrics.hpp"
#include "rehab/mlp.hpp"
#include "rehab/motion_data.hpp"
#include "rehab/selector.hpp"
#include "rehab/synth.hpp"

namespace py = pybind11;

namespace {

using namespace rehab;

Exercise parse_exercise(const std::string& s) {
    const auto ex = exercise_from_string(s);
    if (!ex) throw ConfigError("bindings: unknown exercise '" + s + "'");
    return *ex;
}

Side parse_side(const std::string& s) {
    const auto side = side_from_string(s);
    if (!side) throw ConfigError("bindings: unknown side '" + s + "'");
    return *side;
}

Method parse_method(const std::string& s) {
    const auto m = method_from_string(s);
    if (!m) throw ConfigError("bindings: unknown method '" + s + "'");
    return *m;
}

// Extracted feature rows plus per-row metadata, the common input to the
// training entry points below.
struct FeatureTable {
    std::shared_ptr<const std::vector<std::string>> names;
    std::vector<FeatureVector> rows;
    std::vector<int> labels;  // -1 when the repetition is unlabeled
    std::vector<std::string> subjects, exercises, sides;

    std::pair<std::vector<FeatureVector>, std::vector<int>> labeled() const {
        std::vector<FeatureVector> fvs;
        std::vector<int> ys;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (labels[i] < 0) continue;
            fvs.push_back(rows[i]);
            ys.push_back(labels[i]);
        }
        if (fvs.empty()) throw DomainError("bindings: no labeled repetitions");
        return {std::move(fvs), std::move(ys)};
    }
};

FeatureTable extract_table(const Dataset& ds,
                           const std::optional<std::string>& exercise) {
    std::optional<Exercise> only;
    if (exercise) only = parse_exercise(*exercise);
    const FeatureConfig cfg;
    FeatureTable t;
    t.names = feature_names(cfg);
    for (const auto& rep : ds.repetitions) {
        if (only && rep.exercise != *only) continue;
        t.rows.push_back(extract_features(rep, cfg));
        t.labels.push_back(rep.label ? rep.label->overall : -1);
        t.subjects.push_back(rep.subject_id);
        t.exercises.push_back(to_string(rep.exercise));
        t.sides.push_back(to_string(rep.side));
    }
    return t;
}

// Standardizes raw rows with a freshly fitted z-score and returns both.
std::pair<NormParams, std::vector<FeatureVector>> standardized(
    const std::vector<FeatureVector>& raw) {
    NormParams norm = fit_zscore(raw);
    std::vector<FeatureVector> out;
    out.reserve(raw.size());
    for (const auto& fv : raw) out.push_back(apply_zscore(norm, fv));
    return {std::move(norm), std::move(out)};
}

struct PyPredictor {
    PredictorCheckpoint cp;
    std::optional<TrainReport> report;
};

struct PySelector {
    SelectorNets nets;
    NormParams norm;
    RlConfig cfg;  // defaults when loaded from a checkpoint
};

PyPredictor train_predictor_py(const FeatureTable& t, std::uint64_t seed,
                               int threads, std::vector<int> depths,
                               std::vector<int> widths,
                               std::vector<double> learning_rates, int max_iter,
                               double tol) {
    auto [fvs, ys] = t.labeled();
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.threads = threads;
    if (!depths.empty()) cfg.depths = std::move(depths);
    if (!widths.empty()) cfg.widths = std::move(widths);
    if (!learning_rates.empty()) cfg.learning_rates = std::move(learning_rates);
    cfg.max_iter = max_iter;
    cfg.tol = tol;
    cfg.validate();
    auto [norm, std_fvs] = standardized(fvs);
    std::vector<std::vector<double>> X;
    X.reserve(std_fvs.size());
    for (const auto& fv : std_fvs) X.push_back(encode_input(fv));
    auto [model, report] = train_predictor(X, ys, cfg);
    return PyPredictor{{std::move(model), std::move(norm)}, std::move(report)};
}

PySelector train_selector_py(const FeatureTable& t, std::uint64_t seed,
                             int episodes, double feature_cost,
                             std::vector<std::vector<int>> q_hidden,
                             int minibatch, int target_sync_every,
                             int update_every, double q_lr,
                             int replay_capacity) {
    auto [fvs, ys] = t.labeled();
    RlConfig cfg;
    cfg.seed = seed;
    cfg.episodes = episodes;
    cfg.feature_cost = feature_cost;
    if (!q_hidden.empty()) cfg.q_hidden = std::move(q_hidden);
    cfg.minibatch = minibatch;
    cfg.target_sync_every = target_sync_every;
    cfg.update_every = update_every;
    cfg.q_lr = q_lr;
    cfg.replay_capacity = static_cast<std::size_t>(replay_capacity);
    cfg.validate();
    auto [norm, std_fvs] = standardized(fvs);
    SelectorNets nets = train_selector(std_fvs, ys, cfg);
    return PySelector{std::move(nets), std::move(norm), std::move(cfg)};
}

// dict conversions stay tiny and explicit; they run with the GIL held.
py::dict cell_dict(const GridCell& c) {
    py::dict d;
    d["hidden"] = c.hidden;
    d["lr"] = c.lr;
    d["val_f1"] = c.val_f1;
    d["final_loss"] = c.final_loss;
    d["iterations"] = c.iterations;
    return d;
}

py::dict trace_dict(const EpisodeTrace& t) {
    py::dict d;
    d["actions"] = t.actions;
    d["rewards"] = t.rewards;
    d["mask"] = std::vector<int>(t.final_mask.begin(), t.final_mask.end());
    d["prediction"] = t.prediction;
    d["acquisitions"] = t.acquisitions();
    d["total_reward"] = t.total_reward();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Personalized rehabilitation assessment: kinematic features, "
        "per-instance feature selection, quality prediction, feedback.";
    m.attr("__version__") = "0.1.0";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    py::class_<Dataset>(m, "Dataset", "Motion corpus: subjects and repetitions.")
        .def_static(
            "load", [](const std::string& path) { return parse_dataset(path); },
            py::arg("path"), "Parse and validate a JSON Lines corpus file.")
        .def(
            "save",
            [](const Dataset& ds, const std::string& path) {
                write_dataset(ds, path);
            },
            py::arg("path"))
        .def("to_jsonl", [](const Dataset& ds) { return serialize_dataset(ds); })
        .def("validate",
             [](const Dataset& ds) { return validate_dataset(ds); },
             "List of violated invariants, empty when valid.")
        .def_property_readonly(
            "n_subjects", [](const Dataset& ds) { return ds.subjects.size(); })
        .def_property_readonly(
            "n_repetitions",
            [](const Dataset& ds) { return ds.repetitions.size(); })
        .def("subjects",
             [](const Dataset& ds) {
                 py::list out;
                 for (const auto& s : ds.subjects) {
                     py::dict d;
                     d["id"] = s.subject_id;
                     d["cohort"] = to_string(s.cohort);
                     d["fugl_meyer"] = s.fugl_meyer ? py::cast(*s.fugl_meyer)
                                                    : py::object(py::none());
                     out.append(d);
                 }
                 return out;
             })
        .def("exercises",
             [](const Dataset& ds) {
                 std::set<std::string> ex;
                 for (const auto& r : ds.repetitions)
                     ex.insert(to_string(r.exercise));
                 return std::vector<std::string>(ex.begin(), ex.end());
             })
        .def("__len__",
             [](const Dataset& ds) { return ds.repetitions.size(); })
        .def("__repr__", [](const Dataset& ds) {
            return "<Dataset: " + std::to_string(ds.subjects.size()) +
                   " subjects, " + std::to_string(ds.repetitions.size()) +
                   " repetitions>";
        });

    m.def(
        "synth_dataset",
        [](int n_patients, int n_healthy, int reps_per_patient_side,
           int reps_per_healthy, const std::vector<std::string>& exercises,
           std::uint64_t seed) {
            CorpusSpec spec;
            spec.n_patients = n_patients;
            spec.n_healthy = n_healthy;
            spec.reps_per_patient_side = reps_per_patient_side;
            spec.reps_per_healthy = reps_per_healthy;
            if (!exercises.empty()) {
                spec.exercises.clear();
                for (const auto& e : exercises)
                    spec.exercises.push_back(parse_exercise(e));
            }
            spec.seed = seed;
            spec.validate();
            return synth_dataset(spec);
        },
        py::arg("n_patients") = 15, py::arg("n_healthy") = 11,
        py::arg("reps_per_patient_side") = 10, py::arg("reps_per_healthy") = 15,
        py::arg("exercises") = std::vector<std::string>{},
        py::arg("seed") = 0,
        "Generate a synthetic labeled motion corpus.");

    py::class_<FeatureTable>(m, "FeatureTable",
                             "Feature rows with per-row metadata.")
        .def_property_readonly(
            "names", [](const FeatureTable& t) { return *t.names; })
        .def_property_readonly(
            "labels", [](const FeatureTable& t) { return t.labels; },
            "Per-row label, -1 when the repetition is unlabeled.")
        .def_property_readonly(
            "subjects", [](const FeatureTable& t) { return t.subjects; })
        .def_property_readonly(
            "exercises", [](const FeatureTable& t) { return t.exercises; })
        .def_property_readonly(
            "sides", [](const FeatureTable& t) { return t.sides; })
        .def("values",
             [](const FeatureTable& t) {
                 std::vector<std::vector<double>> out;
                 out.reserve(t.rows.size());
                 for (const auto& fv : t.rows) out.push_back(fv.values);
                 return out;
             },
             "Raw (unstandardized) feature values, one row per repetition.")
        .def("__len__", [](const FeatureTable& t) { return t.rows.size(); });

    m.def("extract_features", &extract_table, py::arg("dataset"),
          py::arg("exercise") = std::nullopt,
          py::call_guard<py::gil_scoped_release>(),
          "Extract kinematic features for every repetition, optionally "
          "restricted to one exercise.");

    py::class_<PyPredictor>(m, "Predictor",
                            "Grid-searched quality predictor with its "
                            "standardization parameters.")
        .def(
            "predict",
            [](const PyPredictor& p, const std::vector<double>& values,
               const std::optional<std::vector<bool>>& mask) {
                FeatureVector fv;
                fv.names = p.cp.norm.names;
                fv.values = values;
                if (mask) fv.mask.assign(mask->begin(), mask->end());
                const Prediction pr =
                    predict(p.cp.model, apply_zscore(p.cp.norm, fv));
                py::dict d;
                d["label"] = pr.label;
                d["probability"] = pr.probability;
                return d;
            },
            py::arg("values"), py::arg("mask") = std::nullopt,
            "Predict from raw feature values; mask marks acquired entries.")
        .def(
            "save",
            [](const PyPredictor& p, const std::string& path) {
                save_predictor(p.cp, path);
            },
            py::arg("path"))
        .def_static(
            "load",
            [](const std::string& path) {
                return PyPredictor{load_predictor(path), std::nullopt};
            },
            py::arg("path"))
        .def_property_readonly(
            "feature_names",
            [](const PyPredictor& p) { return *p.cp.norm.names; })
        .def_property_readonly("grid",
                               [](const PyPredictor& p) {
                                   py::list out;
                                   if (!p.report) return out;
                                   for (const auto& c : p.report->cells)
                                       out.append(cell_dict(c));
                                   return out;
                               })
        .def_property_readonly("best", [](const PyPredictor& p) -> py::object {
            if (!p.report) return py::none();
            return cell_dict(p.report->cells[p.report->best_index]);
        });

    m.def("train_predictor", &train_predictor_py, py::arg("table"),
          py::arg("seed") = 7, py::arg("threads") = 1,
          py::arg("depths") = std::vector<int>{},
          py::arg("widths") = std::vector<int>{},
          py::arg("learning_rates") = std::vector<double>{},
          py::arg("max_iter") = 200, py::arg("tol") = 1e-4,
          py::call_guard<py::gil_scoped_release>(),
          "Grid search over depth x width x learning rate on the labeled "
          "rows; empty lists keep the default grid.");

    py::class_<PySelector>(m, "Selector",
                           "Per-instance feature selection policy (double "
                           "Q-learning) with its standardization parameters.")
        .def(
            "run",
            [](const PySelector& s, const std::vector<double>& values,
               const std::optional<int>& true_label) {
                FeatureVector fv;
                fv.names = s.norm.names;
                fv.values = values;
                const FeatureVector std_fv = apply_zscore(s.norm, fv);
                const int* truth = true_label ? &*true_label : nullptr;
                return trace_dict(
                    select_and_classify(s.nets.online, std_fv, s.cfg, truth));
            },
            py::arg("values"), py::arg("true_label") = std::nullopt,
            "Greedy rollout on raw feature values. Rewards are only "
            "meaningful when true_label is given.")
        .def(
            "save",
            [](const PySelector& s, const std::string& path) {
                save_selector(s.nets, s.norm, path);
            },
            py::arg("path"))
        .def_static(
            "load",
            [](const std::string& path) {
                auto [nets, norm] = load_selector(path);
                return PySelector{std::move(nets), std::move(norm), RlConfig{}};
            },
            py::arg("path"))
        .def_property_readonly(
            "feature_names",
            [](const PySelector& s) { return *s.norm.names; })
        .def_property_readonly(
            "val_reward",
            [](const PySelector& s) { return s.nets.val_reward; });

    m.def("train_selector", &train_selector_py, py::arg("table"),
          py::arg("seed") = 7, py::arg("episodes") = 3000,
          py::arg("feature_cost") = 0.05,
          py::arg("q_hidden") = std::vector<std::vector<int>>{},
          py::arg("minibatch") = 64, py::arg("target_sync_every") = 200,
          py::arg("update_every") = 1, py::arg("q_lr") = 0.001,
          py::arg("replay_capacity") = 10000,
          py::call_guard<py::gil_scoped_release>(),
          "Train the acquisition policy on the labeled rows; an empty "
          "q_hidden keeps the default architecture.");

    m.def(
        "rfe_select",
        [](const FeatureTable& t, std::uint64_t seed, std::vector<int> hidden,
           double lr, int max_iter, double drop_fraction) {
            auto [fvs, ys] = t.labeled();
            RfeConfig cfg;
            cfg.seed = seed;
            if (!hidden.empty()) cfg.hidden = std::move(hidden);
            cfg.lr = lr;
            cfg.max_iter = max_iter;
            cfg.drop_fraction = drop_fraction;
            cfg.validate();
            auto [norm, std_fvs] = standardized(fvs);
            const RfeResult r = rfe_select(std_fvs, ys, cfg);
            py::gil_scoped_acquire gil;
            py::dict d;
            d["ranking"] = r.ranking;
            d["chosen_mask"] =
                std::vector<int>(r.chosen_mask.begin(), r.chosen_mask.end());
            d["chosen_size"] = r.chosen_size;
            py::list rounds;
            for (const auto& round : r.rounds) {
                py::dict rd;
                rd["active_count"] = round.active_count;
                rd["val_f1"] = round.val_f1;
                rounds.append(rd);
            }
            d["rounds"] = rounds;
            return d;
        },
        py::arg("table"), py::arg("seed") = 7,
        py::arg("hidden") = std::vector<int>{}, py::arg("lr") = 0.01,
        py::arg("max_iter") = 100, py::arg("drop_fraction") = 0.1,
        py::call_guard<py::gil_scoped_release>(),
        "Recursive feature elimination; returns ranking, chosen mask and "
        "per-round validation scores.");

    m.def(
        "loso_evaluate",
        [](const Dataset& ds, const std::vector<std::string>& methods,
           std::vector<std::uint64_t> seeds, int threads,
           const std::optional<int>& episodes,
           const std::optional<std::vector<std::vector<int>>>& q_hidden,
           const std::optional<int>& minibatch,
           const std::optional<std::vector<int>>& depths,
           const std::optional<std::vector<int>>& widths,
           const std::optional<std::vector<double>>& learning_rates,
           const std::optional<int>& max_iter,
           const std::optional<std::vector<int>>& rfe_hidden,
           const std::optional<int>& rfe_max_iter) {
            EvalConfig cfg;
            cfg.methods.clear();
            for (const auto& s : methods)
                cfg.methods.push_back(parse_method(s));
            if (!seeds.empty()) cfg.seeds = std::move(seeds);
            cfg.threads = threads;
            if (episodes) cfg.rl_cfg.episodes = *episodes;
            if (q_hidden) cfg.rl_cfg.q_hidden = *q_hidden;
            if (minibatch) cfg.rl_cfg.minibatch = *minibatch;
            if (depths) cfg.train_cfg.depths = *depths;
            if (widths) cfg.train_cfg.widths = *widths;
            if (learning_rates) cfg.train_cfg.learning_rates = *learning_rates;
            if (max_iter) cfg.train_cfg.max_iter = *max_iter;
            if (rfe_hidden) cfg.rfe_cfg.hidden = *rfe_hidden;
            if (rfe_max_iter) cfg.rfe_cfg.max_iter = *rfe_max_iter;
            cfg.validate();
            const EvalResult res = loso_evaluate(ds, cfg);
            const std::string json = res.to_json();
            const std::string table = emit_results_table(res, nullptr);
            py::gil_scoped_acquire gil;
            return py::make_tuple(json, table);
        },
        py::arg("dataset"),
        py::arg("methods") = std::vector<std::string>{"rl", "rfe", "full"},
        py::arg("seeds") = std::vector<std::uint64_t>{7},
        py::arg("threads") = 1, py::arg("episodes") = std::nullopt,
        py::arg("q_hidden") = std::nullopt, py::arg("minibatch") = std::nullopt,
        py::arg("depths") = std::nullopt, py::arg("widths") = std::nullopt,
        py::arg("learning_rates") = std::nullopt,
        py::arg("max_iter") = std::nullopt, py::arg("rfe_hidden") = std::nullopt,
        py::arg("rfe_max_iter") = std::nullopt,
        py::call_guard<py::gil_scoped_release>(),
        "Leave-one-subject-out evaluation. Returns (results_json, table_text); "
        "optional keyword overrides replace the corresponding defaults.");

    m.def(
        "feedback_report",
        [](const Dataset& ds, const std::string& subject,
           const std::string& exercise, int rep_index, const std::string& side,
           double threshold, const PyPredictor* predictor) {
            const Exercise ex = parse_exercise(exercise);
            const Side sd = parse_side(side);
            const FeatureConfig fcfg;
            const MotionRepetition* rep = nullptr;
            for (const auto& r : ds.repetitions)
                if (r.subject_id == subject && r.exercise == ex &&
                    r.side == sd && r.rep_index == rep_index)
                    rep = &r;
            if (!rep)
                throw DomainError("bindings: no repetition " +
                                  std::to_string(rep_index) + " for subject " +
                                  subject + ", exercise " + exercise +
                                  ", side " + to_string(sd));
            const auto pool = normal_pool(ds, subject, ex);
            std::vector<FeatureVector> normals;
            normals.reserve(pool.size());
            for (const auto* r : pool)
                normals.push_back(extract_features(*r, fcfg));
            const NormalProfile profile = fit_normal_profile(normals);
            const FeatureVector fv = extract_features(*rep, fcfg);
            int predicted;
            if (predictor) {
                predicted = predict(predictor->cp.model,
                                    apply_zscore(predictor->cp.norm, fv))
                                .label;
            } else if (rep->label) {
                predicted = rep->label->overall;
            } else {
                throw DomainError(
                    "bindings: repetition is unlabeled and no predictor was "
                    "given");
            }
            const FeedbackReport report =
                generate_feedback(deviation_scores(profile, fv), predicted,
                                  default_templates(), threshold);
            const std::string text = render_feedback_text(report);
            const std::string json = render_feedback_json(report);
            py::gil_scoped_acquire gil;
            return py::make_tuple(text, json);
        },
        py::arg("dataset"), py::arg("subject"), py::arg("exercise"),
        py::arg("rep_index"), py::arg("side") = "affected",
        py::arg("threshold") = 2.0, py::arg("predictor") = nullptr,
        py::call_guard<py::gil_scoped_release>(),
        "Corrective feedback for one repetition against the subject's "
        "normal-motion profile. Returns (text, json).");

    m.def(
        "feature_names",
        [] {
            const FeatureConfig cfg;
            return *feature_names(cfg);
        },
        "Feature-name list under the default configuration.");
    m.def("base_series_names", &base_series_names,
          "The per-repetition time series, in extraction order.");
    m.def("min_jerk_scalar", &min_jerk_scalar, py::arg("x0"), py::arg("xf"),
          py::arg("tau"),
          "Quintic minimum-jerk interpolation between x0 and xf.");
    m.def("f1_score", &f1_score, py::arg("predictions"), py::arg("truths"),
          "F1 for positive class 1; 0 when precision + recall is 0.");
    m.def("double_q_target",
          static_cast<double (*)(double, bool, const std::vector<double>&,
                                 const std::vector<double>&,
                                 const std::vector<int>&, double)>(
              &double_q_target),
          py::arg("reward"), py::arg("done"), py::arg("q_online_next"),
          py::arg("q_target_next"), py::arg("legal_next"), py::arg("gamma"),
          "Bootstrapped target: online net picks the legal argmax, target "
          "net evaluates it.");
}
