#include "rehab/run_config.hpp"

#include <fstream>

#include <json.hpp>

#include "json_convert.hpp"
#include "rehab/errors.hpp"

namespace rehab {

namespace {

using nlohmann::json;

FeatureConfig feature_from_json(const json& j) {
    detail::require_keys(j, {"side_mode", "summaries", "smoothing_window"},
                         "feature config");
    FeatureConfig cfg;
    if (j.contains("side_mode")) {
        const std::string s = j.at("side_mode").get<std::string>();
        if (s == "from_side")
            cfg.side_mode = SideMode::FromSide;
        else if (s == "left")
            cfg.side_mode = SideMode::Left;
        else if (s == "right")
            cfg.side_mode = SideMode::Right;
        else if (s == "auto")
            cfg.side_mode = SideMode::AutoDisplacement;
        else
            throw ConfigError("feature config: unknown side_mode '" + s + "'");
    }
    if (j.contains("summaries")) {
        cfg.summaries.clear();
        for (const auto& e : j.at("summaries")) {
            const auto s = summary_from_string(e.get<std::string>());
            if (!s)
                throw ConfigError("feature config: unknown summary '" +
                                  e.get<std::string>() + "'");
            cfg.summaries.push_back(*s);
        }
    }
    if (j.contains("smoothing_window"))
        cfg.smoothing_window = j.at("smoothing_window").get<int>();
    cfg.validate();
    return cfg;
}

TrainConfig train_from_json(const json& j) {
    detail::require_keys(j,
                         {"depths", "widths", "learning_rates", "tol",
                          "max_iter", "val_fraction", "threads"},
                         "train config");
    TrainConfig cfg;
    if (j.contains("depths")) cfg.depths = j.at("depths").get<std::vector<int>>();
    if (j.contains("widths")) cfg.widths = j.at("widths").get<std::vector<int>>();
    if (j.contains("learning_rates"))
        cfg.learning_rates = j.at("learning_rates").get<std::vector<double>>();
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
    if (j.contains("val_fraction"))
        cfg.val_fraction = j.at("val_fraction").get<double>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    cfg.validate();
    return cfg;
}

RlConfig rl_from_json(const json& j) {
    detail::require_keys(
        j,
        {"feature_cost", "misclass_penalty", "correct_reward", "gamma",
         "eps_start", "eps_end", "replay_capacity", "minibatch",
         "target_sync_every", "update_every", "max_episode_steps", "episodes",
         "q_lr", "q_hidden", "val_fraction"},
        "rl config");
    RlConfig cfg;
    if (j.contains("feature_cost"))
        cfg.feature_cost = j.at("feature_cost").get<double>();
    if (j.contains("misclass_penalty"))
        cfg.misclass_penalty = j.at("misclass_penalty").get<double>();
    if (j.contains("correct_reward"))
        cfg.correct_reward = j.at("correct_reward").get<double>();
    if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
    if (j.contains("eps_start")) cfg.eps_start = j.at("eps_start").get<double>();
    if (j.contains("eps_end")) cfg.eps_end = j.at("eps_end").get<double>();
    if (j.contains("replay_capacity"))
        cfg.replay_capacity = j.at("replay_capacity").get<std::size_t>();
    if (j.contains("minibatch")) cfg.minibatch = j.at("minibatch").get<int>();
    if (j.contains("target_sync_every"))
        cfg.target_sync_every = j.at("target_sync_every").get<int>();
    if (j.contains("update_every"))
        cfg.update_every = j.at("update_every").get<int>();
    if (j.contains("max_episode_steps"))
        cfg.max_episode_steps = j.at("max_episode_steps").get<int>();
    if (j.contains("episodes")) cfg.episodes = j.at("episodes").get<int>();
    if (j.contains("q_lr")) cfg.q_lr = j.at("q_lr").get<double>();
    if (j.contains("q_hidden"))
        cfg.q_hidden = j.at("q_hidden").get<std::vector<std::vector<int>>>();
    if (j.contains("val_fraction"))
        cfg.val_fraction = j.at("val_fraction").get<double>();
    cfg.validate();
    return cfg;
}

RfeConfig rfe_from_json(const json& j) {
    detail::require_keys(
        j, {"hidden", "lr", "tol", "max_iter", "drop_fraction", "val_fraction"},
        "rfe config");
    RfeConfig cfg;
    if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
    if (j.contains("drop_fraction"))
        cfg.drop_fraction = j.at("drop_fraction").get<double>();
    if (j.contains("val_fraction"))
        cfg.val_fraction = j.at("val_fraction").get<double>();
    cfg.validate();
    return cfg;
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("run config '" + path + "': " + e.what());
    }
    detail::require_keys(
        j,
        {"seed", "threads", "corpus", "predictor", "selector", "out",
         "templates", "tp_agreement", "feedback_threshold", "synth", "feature",
         "train", "rfe", "rl", "methods", "eval_seeds"},
        "run config");
    RunConfig cfg;
    try {
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
        if (j.contains("corpus")) cfg.corpus = j.at("corpus").get<std::string>();
        if (j.contains("predictor"))
            cfg.predictor_path = j.at("predictor").get<std::string>();
        if (j.contains("selector"))
            cfg.selector_path = j.at("selector").get<std::string>();
        if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
        if (j.contains("templates"))
            cfg.templates_path = j.at("templates").get<std::string>();
        if (j.contains("tp_agreement"))
            cfg.tp_agreement_path = j.at("tp_agreement").get<std::string>();
        if (j.contains("feedback_threshold"))
            cfg.feedback_threshold = j.at("feedback_threshold").get<double>();
        if (j.contains("synth"))
            cfg.synth = detail::corpus_spec_from_json(j.at("synth"));
        if (j.contains("feature")) cfg.feature = feature_from_json(j.at("feature"));
        if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
        if (j.contains("rfe")) cfg.rfe = rfe_from_json(j.at("rfe"));
        if (j.contains("rl")) cfg.rl = rl_from_json(j.at("rl"));
        if (j.contains("methods")) {
            cfg.methods.clear();
            for (const auto& e : j.at("methods")) {
                const auto m = method_from_string(e.get<std::string>());
                if (!m)
                    throw ConfigError("run config: unknown method '" +
                                      e.get<std::string>() + "'");
                cfg.methods.push_back(*m);
            }
        }
        if (j.contains("eval_seeds"))
            cfg.eval_seeds =
                j.at("eval_seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception& e) {
        throw ConfigError("run config '" + path + "': " + e.what());
    }
    if (cfg.threads < 1) throw ConfigError("run config: threads must be >= 1");
    if (cfg.feedback_threshold <= 0.0)
        throw ConfigError("run config: feedback_threshold must be positive");
    cfg.propagate_seed();
    return cfg;
}

void RunConfig::propagate_seed() {
    synth.seed = seed;
    train.seed = seed;
    rfe.seed = seed;
    rl.seed = seed;
}

EvalConfig RunConfig::eval_config() const {
    EvalConfig cfg;
    cfg.methods = methods;
    cfg.seeds = eval_seeds.empty() ? std::vector<std::uint64_t>{seed}
                                   : eval_seeds;
    cfg.threads = threads;
    cfg.feature_cfg = feature;
    cfg.train_cfg = train;
    cfg.rfe_cfg = rfe;
    cfg.rl_cfg = rl;
    // Folds parallelize; the grid inside each fold stays serial.
    cfg.train_cfg.threads = 1;
    return cfg;
}

}  // namespace rehab
