#include "rehab/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "json_convert.hpp"
#include "rehab/errors.hpp"
#include "rehab/metrics.hpp"

namespace rehab {

namespace {

const std::vector<std::string> kMethodNames = {"ML-Full", "ML-RFE", "ML-RL"};
const std::vector<std::string> kMethodKeys = {"ml_full", "ml_rfe", "ml_rl"};

}  // namespace

const std::string& to_string(Method m) {
    return kMethodNames[static_cast<int>(m)];
}

const std::string& method_json_key(Method m) {
    return kMethodKeys[static_cast<int>(m)];
}

std::optional<Method> method_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (kMethodNames[i] == s || kMethodKeys[i] == s)
            return static_cast<Method>(i);
    if (s == "full" || s == "nn") return Method::FullNN;
    if (s == "rfe") return Method::Rfe;
    if (s == "rl") return Method::Rl;
    return std::nullopt;
}

void EvalConfig::validate() const {
    if (methods.empty()) throw ConfigError("eval: no methods selected");
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = i + 1; j < methods.size(); ++j)
            if (methods[i] == methods[j])
                throw ConfigError("eval: duplicate method");
    if (seeds.empty()) throw ConfigError("eval: no seeds");
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size())
        throw ConfigError("eval: duplicate seeds");
    if (threads < 1) throw ConfigError("eval: threads must be at least 1");
    feature_cfg.validate();
    train_cfg.validate();
    rfe_cfg.validate();
    rl_cfg.validate();
}

namespace {

struct RepRef {
    std::size_t rep_index;
    int label;
};

struct FoldOutcome {
    // Aligned with cfg.methods.
    std::vector<double> f1;
    std::vector<double> acq;
    std::size_t test_count = 0;
};

FoldOutcome run_fold(const EvalConfig& cfg,
                     const std::vector<FeatureVector>& raw_features,
                     const std::vector<RepRef>& train_refs,
                     const std::vector<RepRef>& test_refs,
                     std::uint64_t fold_seed) {
    std::vector<FeatureVector> train_raw;
    std::vector<int> train_y;
    train_raw.reserve(train_refs.size());
    for (const RepRef& r : train_refs) {
        train_raw.push_back(raw_features[r.rep_index]);
        train_y.push_back(r.label);
    }
    const NormParams norm = fit_zscore(train_raw);

    std::vector<FeatureVector> train_std;
    train_std.reserve(train_raw.size());
    for (const auto& fv : train_raw) train_std.push_back(apply_zscore(norm, fv));

    std::vector<FeatureVector> test_std;
    std::vector<int> test_y;
    test_std.reserve(test_refs.size());
    for (const RepRef& r : test_refs) {
        test_std.push_back(apply_zscore(norm, raw_features[r.rep_index]));
        test_y.push_back(r.label);
    }

    const std::size_t F = train_std.front().size();
    FoldOutcome out;
    out.test_count = test_refs.size();

    for (Method method : cfg.methods) {
        double f1 = 0.0;
        double acq = 0.0;
        switch (method) {
            case Method::FullNN: {
                TrainConfig tc = cfg.train_cfg;
                tc.seed = fold_seed;
                std::vector<std::vector<double>> X;
                X.reserve(train_std.size());
                for (const auto& fv : train_std) X.push_back(encode_input(fv));
                auto [model, report] = train_predictor(X, train_y, tc);
                (void)report;
                std::vector<int> preds;
                preds.reserve(test_std.size());
                for (const auto& fv : test_std)
                    preds.push_back(predict(model, fv).label);
                f1 = f1_score(preds, test_y);
                acq = static_cast<double>(F);
                break;
            }
            case Method::Rfe: {
                RfeConfig rc = cfg.rfe_cfg;
                rc.seed = fold_seed;
                const RfeResult rfe = rfe_select(train_std, train_y, rc);
                TrainConfig tc = cfg.train_cfg;
                tc.seed = fold_seed;
                std::vector<std::vector<double>> X;
                X.reserve(train_std.size());
                for (const auto& fv : train_std) {
                    FeatureVector masked = fv;
                    masked.mask = rfe.chosen_mask;
                    X.push_back(encode_input(masked));
                }
                auto [model, report] = train_predictor(X, train_y, tc);
                (void)report;
                std::vector<int> preds;
                preds.reserve(test_std.size());
                for (const auto& fv : test_std) {
                    FeatureVector masked = fv;
                    masked.mask = rfe.chosen_mask;
                    preds.push_back(predict(model, masked).label);
                }
                f1 = f1_score(preds, test_y);
                acq = static_cast<double>(rfe.chosen_size);
                break;
            }
            case Method::Rl: {
                RlConfig rc = cfg.rl_cfg;
                rc.seed = fold_seed;
                const SelectorNets nets =
                    train_selector(train_std, train_y, rc);
                std::vector<int> preds;
                preds.reserve(test_std.size());
                double total_acq = 0.0;
                for (const auto& fv : test_std) {
                    const EpisodeTrace t =
                        select_and_classify(nets.online, fv, rc);
                    preds.push_back(t.prediction);
                    total_acq += t.acquisitions();
                }
                f1 = f1_score(preds, test_y);
                acq = test_std.empty() ? 0.0 : total_acq / test_std.size();
                break;
            }
        }
        out.f1.push_back(f1);
        out.acq.push_back(acq);
    }
    return out;
}

}  // namespace

EvalResult loso_evaluate(const Dataset& ds, const EvalConfig& cfg) {
    cfg.validate();
    {
        const auto violations = validate_dataset(ds);
        if (!violations.empty())
            throw DomainError("evaluation: invalid dataset: " +
                              violations.front());
    }
    if (ds.subjects.size() < 3)
        throw DomainError("evaluation: need at least 3 subjects");
    for (const auto& rep : ds.repetitions)
        if (!rep.label)
            throw DomainError("evaluation: unlabeled repetition for subject " +
                              rep.subject_id);

    // Feature extraction is fold independent, so it runs once per rep.
    std::vector<FeatureVector> raw_features;
    raw_features.reserve(ds.repetitions.size());
    for (const auto& rep : ds.repetitions)
        raw_features.push_back(extract_features(rep, cfg.feature_cfg));

    std::vector<std::string> patients;
    for (const auto& s : ds.subjects)
        if (s.cohort == Cohort::Patient) patients.push_back(s.subject_id);
    std::sort(patients.begin(), patients.end());
    if (patients.empty())
        throw DomainError("evaluation: no patient subjects to hold out");

    std::set<Exercise> exercise_set;
    for (const auto& rep : ds.repetitions) exercise_set.insert(rep.exercise);
    const std::vector<Exercise> exercises(exercise_set.begin(),
                                          exercise_set.end());

    // Per (exercise, subject) rep references.
    std::map<Exercise, std::map<std::string, std::vector<RepRef>>> by_ex_subj;
    for (std::size_t i = 0; i < ds.repetitions.size(); ++i) {
        const auto& rep = ds.repetitions[i];
        by_ex_subj[rep.exercise][rep.subject_id].push_back(
            {i, rep.label->overall});
    }

    struct FoldJob {
        std::size_t seed_slot;
        Exercise exercise;
        std::string subject;
        std::uint64_t fold_seed;
    };
    std::vector<FoldJob> jobs;
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
        std::uint64_t fold_index = 0;
        for (Exercise ex : exercises) {
            for (const std::string& subject : patients) {
                const auto& subj_map = by_ex_subj.at(ex);
                if (subj_map.find(subject) == subj_map.end()) {
                    ++fold_index;
                    continue;
                }
                jobs.push_back(
                    {s, ex, subject, cfg.seeds[s] ^ fold_index});
                ++fold_index;
            }
        }
    }

    std::vector<FoldOutcome> outcomes(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    auto run_job = [&](std::size_t j) {
        const FoldJob& job = jobs[j];
        try {
            std::vector<RepRef> train_refs, test_refs;
            for (const auto& [subject, refs] : by_ex_subj.at(job.exercise)) {
                auto& dest = subject == job.subject ? test_refs : train_refs;
                dest.insert(dest.end(), refs.begin(), refs.end());
            }
            outcomes[j] = run_fold(cfg, raw_features, train_refs, test_refs,
                                   job.fold_seed);
        } catch (const std::exception& e) {
            try {
                throw Error("evaluation: held-out subject " + job.subject +
                            ", exercise " + to_string(job.exercise) + ": " +
                            e.what());
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };

    if (cfg.threads <= 1 || jobs.size() <= 1) {
        for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t j = next.fetch_add(1);
                if (j >= jobs.size()) return;
                run_job(j);
            }
        };
        std::vector<std::thread> pool;
        const int n =
            std::min<int>(cfg.threads, static_cast<int>(jobs.size()));
        pool.reserve(n);
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t j = 0; j < jobs.size(); ++j)
        if (errors[j]) std::rethrow_exception(errors[j]);

    // Collapse seeds first, then aggregate across subjects.
    EvalResult res;
    res.exercises = exercises;
    res.subjects = patients;
    res.seeds = cfg.seeds;
    res.feature_count = raw_features.empty() ? 0 : raw_features.front().size();

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        MethodResult mr;
        mr.method = cfg.methods[mi];

        // subject -> per-exercise mean f1, for the overall std.
        std::map<std::string, std::vector<double>> subject_f1s;

        for (Exercise ex : exercises) {
            ExerciseStats stats;
            std::vector<double> f1s, acqs;
            for (const std::string& subject : patients) {
                std::vector<double> per_seed_f1, per_seed_acq;
                std::size_t test_count = 0;
                for (std::size_t j = 0; j < jobs.size(); ++j) {
                    if (jobs[j].exercise != ex || jobs[j].subject != subject)
                        continue;
                    per_seed_f1.push_back(outcomes[j].f1[mi]);
                    per_seed_acq.push_back(outcomes[j].acq[mi]);
                    test_count = outcomes[j].test_count;
                }
                if (per_seed_f1.empty()) continue;  // no reps of ex
                SubjectScore score;
                score.subject = subject;
                score.f1 = mean_of(per_seed_f1);
                score.mean_acquisitions = mean_of(per_seed_acq);
                score.test_count = test_count;
                stats.per_subject.push_back(score);
                f1s.push_back(score.f1);
                acqs.push_back(score.mean_acquisitions);
                subject_f1s[subject].push_back(score.f1);
            }
            stats.mean_f1 = mean_of(f1s);
            stats.std_f1 = std_of(f1s);
            stats.mean_acquisitions = mean_of(acqs);
            mr.by_exercise[ex] = std::move(stats);
        }

        std::vector<double> ex_means, ex_acqs;
        for (Exercise ex : exercises) {
            ex_means.push_back(mr.by_exercise[ex].mean_f1);
            ex_acqs.push_back(mr.by_exercise[ex].mean_acquisitions);
        }
        mr.overall_mean = mean_of(ex_means);
        mr.overall_mean_acquisitions = mean_of(ex_acqs);

        std::vector<double> subject_overall;
        for (const std::string& subject : patients) {
            const auto it = subject_f1s.find(subject);
            if (it != subject_f1s.end())
                subject_overall.push_back(mean_of(it->second));
        }
        mr.overall_std = std_of(subject_overall);

        res.methods.push_back(std::move(mr));
    }
    return res;
}

std::string EvalResult::to_json() const {
    nlohmann::json j;
    std::vector<std::string> ex_names;
    for (Exercise ex : exercises) ex_names.push_back(to_string(ex));
    j["exercises"] = ex_names;
    j["subjects"] = subjects;
    j["seeds"] = seeds;
    j["feature_count"] = feature_count;
    nlohmann::json jm;
    for (const auto& mr : methods) {
        nlohmann::json m;
        m["overall"] = {{"mean_f1", mr.overall_mean},
                        {"std_f1", mr.overall_std},
                        {"mean_acquisitions", mr.overall_mean_acquisitions}};
        nlohmann::json per_ex;
        for (const auto& [ex, stats] : mr.by_exercise) {
            nlohmann::json e;
            e["mean_f1"] = stats.mean_f1;
            e["std_f1"] = stats.std_f1;
            e["mean_acquisitions"] = stats.mean_acquisitions;
            nlohmann::json per_subj;
            for (const auto& s : stats.per_subject)
                per_subj[s.subject] = {{"f1", s.f1},
                                       {"mean_acquisitions",
                                        s.mean_acquisitions},
                                       {"test_count", s.test_count}};
            e["per_subject"] = per_subj;
            per_ex[to_string(ex)] = e;
        }
        m["per_exercise"] = per_ex;
        jm[method_json_key(mr.method)] = m;
    }
    j["methods"] = jm;
    return j.dump(2);
}

TpAgreement load_tp_agreement(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("tp agreement '" + path + "': " + e.what());
    }
    detail::require_keys(j, {"label", "per_exercise", "overall"},
                         "tp agreement");
    TpAgreement tp;
    try {
        if (j.contains("label")) tp.label = j.at("label").get<std::string>();
        for (const auto& [name, pair] : j.at("per_exercise").items()) {
            const auto v = pair.get<std::vector<double>>();
            if (v.size() != 2)
                throw ConfigError("tp agreement: expected [mean, std]");
            tp.per_exercise[name] = {v[0], v[1]};
        }
        const auto ov = j.at("overall").get<std::vector<double>>();
        if (ov.size() != 2)
            throw ConfigError("tp agreement: expected [mean, std]");
        tp.overall = {ov[0], ov[1]};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("tp agreement: malformed: ") + e.what());
    }
    return tp;
}

std::string emit_results_table(const EvalResult& res, const TpAgreement* tp) {
    const int label_w = 8;
    const int cell_w = 19;
    char buf[64];

    auto header_of = [](Exercise ex) {
        const std::string& id = to_string(ex);
        // "E1" -> "Exercise 1 (E1)".
        if (id.size() == 2 && id[0] == 'E')
            return "Exercise " + id.substr(1) + " (" + id + ")";
        return id;
    };

    // Plus-minus kept ASCII so the table is safe on any terminal.
    auto cell = [&](double mean, double stddev) {
        std::snprintf(buf, sizeof buf, "%.4f +- %.4f", mean, stddev);
        return std::string(buf);
    };

    auto pad = [](std::string s, int w) {
        if (static_cast<int>(s.size()) < w) s.append(w - s.size(), ' ');
        return s;
    };

    std::string out;
    out += pad("Method", label_w);
    for (Exercise ex : res.exercises) out += pad(header_of(ex), cell_w);
    out += "Overall";
    out += '\n';

    for (const auto& mr : res.methods) {
        out += pad(to_string(mr.method), label_w);
        for (Exercise ex : res.exercises) {
            const auto& stats = mr.by_exercise.at(ex);
            out += pad(cell(stats.mean_f1, stats.std_f1), cell_w);
        }
        out += cell(mr.overall_mean, mr.overall_std);
        out += '\n';
    }

    if (tp) {
        out += pad(tp->label, label_w);
        for (Exercise ex : res.exercises) {
            const auto it = tp->per_exercise.find(to_string(ex));
            if (it == tp->per_exercise.end())
                out += pad("--", cell_w);
            else
                out += pad(cell(it->second.first, it->second.second),
                           cell_w);
        }
        out += cell(tp->overall.first, tp->overall.second);
        out += '\n';
    }

    for (const auto& mr : res.methods) {
        if (mr.method != Method::Rl) continue;
        std::snprintf(buf, sizeof buf,
                      "ML-RL mean features acquired: %.2f of %zu\n",
                      mr.overall_mean_acquisitions, res.feature_count);
        out += buf;
    }
    return out;
}

}  // namespace rehab
