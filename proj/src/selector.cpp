#include "rehab/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

#include "json_convert.hpp"
#include "rehab/errors.hpp"
#include "rehab/metrics.hpp"
#include "split.hpp"

namespace rehab {

namespace {

void check_instances(const std::vector<FeatureVector>& instances,
                     const std::vector<int>& labels) {
    if (instances.empty()) throw EmptyTrainingSet("selector: no instances");
    if (instances.size() != labels.size())
        throw DimensionMismatch("selector: instances and labels disagree");
    const std::size_t f = instances.front().size();
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].size() != f)
            throw DimensionMismatch("selector: ragged instance matrix");
        if (!instances[i].all_acquired())
            throw DomainError("selector: training instances must be fully acquired");
        if (labels[i] != 0 && labels[i] != 1)
            throw DomainError("selector: labels must be 0 or 1");
        (labels[i] ? pos : neg) = true;
    }
    if (!pos || !neg) throw DegenerateLabels();
}

int greedy_action(const std::vector<double>& q, const std::vector<int>& legal) {
    int best = legal.front();
    for (int a : legal)
        if (q[a] > q[best]) best = a;
    return best;
}

}  // namespace

AcquisitionState initial_state(std::size_t feature_count) {
    AcquisitionState s;
    s.observed.assign(feature_count, 0.0);
    s.mask.assign(feature_count, 0);
    s.budget_used = 0;
    return s;
}

std::vector<int> legal_actions(const AcquisitionState& s) {
    std::vector<int> out;
    out.reserve(s.mask.size() + 2);
    for (std::size_t i = 0; i < s.mask.size(); ++i)
        if (!s.mask[i]) out.push_back(static_cast<int>(i));
    out.push_back(classify_action(s.mask.size(), 0));
    out.push_back(classify_action(s.mask.size(), 1));
    return out;
}

std::vector<double> encode_state(const AcquisitionState& s) {
    const std::size_t f = s.mask.size();
    std::vector<double> x(2 * f);
    for (std::size_t i = 0; i < f; ++i) {
        x[i] = s.observed[i];
        x[f + i] = s.mask[i] ? 1.0 : 0.0;
    }
    return x;
}

void RlConfig::validate() const {
    if (feature_cost <= 0.0)
        throw ConfigError("rl: feature_cost must be positive");
    if (misclass_penalty <= 0.0 || correct_reward <= 0.0)
        throw ConfigError("rl: rewards must be positive");
    if (gamma <= 0.0 || gamma > 1.0)
        throw ConfigError("rl: gamma must be in (0,1]");
    if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 ||
        eps_end > eps_start)
        throw ConfigError("rl: epsilon schedule must satisfy 0 <= end <= start <= 1");
    if (minibatch < 1 || replay_capacity < static_cast<std::size_t>(minibatch))
        throw ConfigError("rl: replay capacity must hold a minibatch");
    if (target_sync_every < 1 || update_every < 1)
        throw ConfigError("rl: update cadences must be at least 1");
    if (max_episode_steps < 1)
        throw ConfigError("rl: max_episode_steps must be at least 1");
    if (episodes < 1) throw ConfigError("rl: episodes must be at least 1");
    if (q_lr <= 0.0) throw ConfigError("rl: q_lr must be positive");
    if (q_hidden.empty()) throw ConfigError("rl: no architecture candidates");
    for (const auto& h : q_hidden) {
        if (h.empty() || h.size() > 3)
            throw ConfigError("rl: candidate depth must be 1..3");
        for (int w : h)
            if (w < 1) throw ConfigError("rl: candidate widths must be positive");
    }
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("rl: val_fraction must be in (0,1)");
}

std::tuple<AcquisitionState, double, bool> transition(
    const AcquisitionState& s, int action, const FeatureVector& fv,
    int true_label, const RlConfig& cfg) {
    const std::size_t f = s.mask.size();
    if (fv.size() != f)
        throw DimensionMismatch("selector transition: state and instance disagree");
    if (action < 0 || action >= static_cast<int>(f) + 2)
        throw IllegalAction("action " + std::to_string(action) +
                            " out of range");
    if (is_classify(f, action)) {
        const int predicted = action - static_cast<int>(f);
        const double reward = predicted == true_label ? cfg.correct_reward
                                                      : -cfg.misclass_penalty;
        return {s, reward, true};
    }
    if (s.mask[action])
        throw IllegalAction("feature " + std::to_string(action) +
                            " already acquired");
    AcquisitionState next = s;
    next.observed[action] = fv.values[action];
    next.mask[action] = 1;
    next.budget_used += 1;
    return {std::move(next), -cfg.feature_cost, false};
}

double double_q_target(double reward, bool done,
                       const std::vector<double>& q_online_next,
                       const std::vector<double>& q_target_next,
                       const std::vector<int>& legal_next, double gamma) {
    if (done || legal_next.empty()) return reward;
    const int a = greedy_action(q_online_next, legal_next);
    return reward + gamma * q_target_next[a];
}

double double_q_target(double reward, bool done,
                       const std::vector<double>& next_encoded,
                       const MlpModel& online, const MlpModel& target,
                       const std::vector<int>& legal_next, double gamma) {
    if (done || legal_next.empty()) return reward;
    return double_q_target(reward, false, forward(online, next_encoded),
                           forward(target, next_encoded), legal_next, gamma);
}

FeatureAcquisitionEnv::FeatureAcquisitionEnv(
    const std::vector<FeatureVector>* instances,
    const std::vector<int>* labels, const RlConfig* cfg)
    : instances_(instances), labels_(labels), cfg_(cfg) {
    check_instances(*instances_, *labels_);
    cfg_->validate();
    state_ = initial_state(instances_->front().size());
}

int FeatureAcquisitionEnv::input_dim() const {
    return static_cast<int>(2 * instances_->front().size());
}

int FeatureAcquisitionEnv::action_count() const {
    return static_cast<int>(instances_->front().size()) + 2;
}

void FeatureAcquisitionEnv::reset(Rng& rng) {
    if (!pinned_) current_ = rng.below(instances_->size());
    state_ = initial_state(instances_->front().size());
}

void FeatureAcquisitionEnv::set_instance(std::size_t index) {
    if (index >= instances_->size())
        throw DimensionMismatch("selector env: instance index out of range");
    current_ = index;
    pinned_ = true;
    state_ = initial_state(instances_->front().size());
}

std::vector<int> FeatureAcquisitionEnv::legal_actions() const {
    return rehab::legal_actions(state_);
}

std::pair<double, bool> FeatureAcquisitionEnv::step(int action) {
    auto [next, reward, done] = transition(
        state_, action, (*instances_)[current_], (*labels_)[current_], *cfg_);
    state_ = std::move(next);
    return {reward, done};
}

std::vector<double> FeatureAcquisitionEnv::encode() const {
    return encode_state(state_);
}

std::pair<double, double> FeatureAcquisitionEnv::return_bounds() const {
    // Worst case acquires everything then misclassifies; best case classifies
    // correctly at once.
    const double f = static_cast<double>(instances_->front().size());
    return {-f * cfg_->feature_cost - cfg_->misclass_penalty,
            cfg_->correct_reward};
}

std::pair<MlpModel, MlpModel> train_double_q(QEnv& env,
                                             const std::vector<int>& hidden,
                                             const RlConfig& cfg,
                                             std::uint64_t seed) {
    cfg.validate();
    std::vector<int> dims;
    dims.push_back(env.input_dim());
    for (int h : hidden) dims.push_back(h);
    dims.push_back(env.action_count());
    MlpModel online =
        MlpModel::init(dims, OutputHead::LinearQ, derive_seed(seed, 11));
    MlpModel target = online;
    AdamState adam = AdamState::zeros_like(online);
    Rng rng(derive_seed(seed, 12));

    struct Transition {
        std::vector<double> s, s2;
        int action;
        double reward;
        bool done;
        std::vector<int> legal_next;
    };
    std::vector<Transition> replay;
    replay.reserve(std::min<std::size_t>(cfg.replay_capacity, 4096));
    std::size_t write = 0;

    long long env_steps = 0;
    long long updates = 0;
    const int half = std::max(1, cfg.episodes / 2);

    std::vector<std::vector<double>> bx;
    std::vector<int> ba;
    std::vector<double> bt;

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        const double frac = std::min(1.0, static_cast<double>(ep) / half);
        const double eps = cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
        env.reset(rng);
        bool done = false;
        int steps = 0;
        while (!done && steps < cfg.max_episode_steps) {
            ++steps;
            std::vector<double> s = env.encode();
            const std::vector<int> legal = env.legal_actions();
            int action;
            if (rng.bernoulli(eps)) {
                action = legal[rng.below(legal.size())];
            } else {
                action = greedy_action(forward(online, s), legal);
            }
            auto [reward, fin] = env.step(action);
            done = fin;
            Transition t;
            t.s = std::move(s);
            t.s2 = env.encode();
            t.action = action;
            t.reward = reward;
            t.done = done;
            if (!done) t.legal_next = env.legal_actions();
            if (replay.size() < cfg.replay_capacity) {
                replay.push_back(std::move(t));
            } else {
                replay[write] = std::move(t);
                write = (write + 1) % cfg.replay_capacity;
            }
            ++env_steps;
            if (replay.size() < static_cast<std::size_t>(cfg.minibatch) ||
                env_steps % cfg.update_every != 0)
                continue;

            bx.clear();
            ba.clear();
            bt.clear();
            const auto [ret_lo, ret_hi] = env.return_bounds();
            for (int k = 0; k < cfg.minibatch; ++k) {
                const Transition& tr = replay[rng.below(replay.size())];
                bx.push_back(tr.s);
                ba.push_back(tr.action);
                double y = double_q_target(tr.reward, tr.done, tr.s2, online,
                                           target, tr.legal_next, cfg.gamma);
                // The continuation value is itself a return, so a bootstrapped
                // target cannot leave [r + g*lo, r + g*hi]. Terminal targets
                // are exact already.
                if (!tr.done)
                    y = std::clamp(y, tr.reward + cfg.gamma * ret_lo,
                                   tr.reward + cfg.gamma * ret_hi);
                bt.push_back(y);
            }
            auto [loss, grads] = q_loss_and_grad(online, bx, ba, bt);
            (void)loss;
            adam_step(online, grads, adam, cfg.q_lr);
            ++updates;
            if (updates % cfg.target_sync_every == 0) target = online;
        }
    }
    return {std::move(online), std::move(target)};
}

double EpisodeTrace::total_reward() const {
    double s = 0.0;
    for (double r : rewards) s += r;
    return s;
}

int EpisodeTrace::acquisitions() const {
    int n = 0;
    for (auto b : final_mask) n += b ? 1 : 0;
    return n;
}

std::string trace_to_json(const EpisodeTrace& t) {
    nlohmann::json j;
    j["actions"] = t.actions;
    j["rewards"] = t.rewards;
    j["mask"] = std::vector<int>(t.final_mask.begin(), t.final_mask.end());
    j["prediction"] = t.prediction;
    j["truth"] = t.true_label;
    return j.dump();
}

EpisodeTrace select_and_classify(const MlpModel& q_online,
                                 const FeatureVector& fv, const RlConfig& cfg,
                                 const int* true_label) {
    cfg.validate();
    if (!fv.all_acquired())
        throw DomainError("selector rollout: instance must be fully acquired");
    const std::size_t f = fv.size();
    if (q_online.input_size() != static_cast<int>(2 * f) ||
        q_online.output_size() != static_cast<int>(f) + 2)
        throw DimensionMismatch("selector rollout: network does not fit instance");

    EpisodeTrace trace;
    trace.true_label = true_label ? *true_label : -1;
    AcquisitionState state = initial_state(f);
    for (std::size_t step = 0; step <= f; ++step) {
        const std::vector<int> legal = legal_actions(state);
        const int action =
            greedy_action(forward(q_online, encode_state(state)), legal);
        trace.actions.push_back(action);
        if (is_classify(f, action)) {
            trace.prediction = action - static_cast<int>(f);
            double reward = 0.0;
            if (true_label)
                reward = trace.prediction == *true_label
                             ? cfg.correct_reward
                             : -cfg.misclass_penalty;
            trace.rewards.push_back(reward);
            break;
        }
        auto [next, reward, done] =
            transition(state, action, fv, true_label ? *true_label : 0, cfg);
        state = std::move(next);
        trace.rewards.push_back(reward);
        (void)done;
    }
    trace.final_mask = state.mask;
    return trace;
}

namespace {

// Mean greedy total reward over a set of instances; the candidate picker's
// criterion.
double mean_greedy_reward(const MlpModel& online,
                          const std::vector<FeatureVector>& instances,
                          const std::vector<int>& labels, const RlConfig& cfg,
                          const std::vector<std::size_t>& indices) {
    double total = 0.0;
    for (std::size_t i : indices) {
        const EpisodeTrace t =
            select_and_classify(online, instances[i], cfg, &labels[i]);
        total += t.total_reward();
    }
    return indices.empty() ? 0.0 : total / indices.size();
}

}  // namespace

SelectorNets train_selector(const std::vector<FeatureVector>& instances,
                            const std::vector<int>& labels,
                            const RlConfig& cfg) {
    cfg.validate();
    check_instances(instances, labels);

    if (cfg.q_hidden.size() == 1) {
        FeatureAcquisitionEnv env(&instances, &labels, &cfg);
        auto [online, target] =
            train_double_q(env, cfg.q_hidden.front(), cfg,
                           derive_seed(cfg.seed, 0, 2));
        SelectorNets nets{std::move(online), std::move(target),
                          cfg.q_hidden.front(), 0.0};
        std::vector<std::size_t> all(instances.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        nets.val_reward =
            mean_greedy_reward(nets.online, instances, labels, cfg, all);
        return nets;
    }

    // Several candidates: train each on an inner split, compare greedy
    // validation reward, retrain the winner on everything.
    const detail::Split split =
        detail::stratified_split(labels, cfg.val_fraction,
                                 derive_seed(cfg.seed, 77));
    std::vector<FeatureVector> tr_x;
    std::vector<int> tr_y;
    for (std::size_t i : split.train) {
        tr_x.push_back(instances[i]);
        tr_y.push_back(labels[i]);
    }

    std::size_t best = 0;
    double best_reward = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cfg.q_hidden.size(); ++c) {
        FeatureAcquisitionEnv env(&tr_x, &tr_y, &cfg);
        auto [online, target] =
            train_double_q(env, cfg.q_hidden[c], cfg, derive_seed(cfg.seed, c, 1));
        (void)target;
        const double reward =
            mean_greedy_reward(online, instances, labels, cfg, split.val);
        if (reward > best_reward) {
            best_reward = reward;
            best = c;
        }
    }

    FeatureAcquisitionEnv env(&instances, &labels, &cfg);
    auto [online, target] = train_double_q(env, cfg.q_hidden[best], cfg,
                                           derive_seed(cfg.seed, best, 2));
    return {std::move(online), std::move(target), cfg.q_hidden[best],
            best_reward};
}

void save_selector(const SelectorNets& nets, const NormParams& norm,
                   const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["hidden"] = nets.hidden;
    j["val_reward"] = nets.val_reward;
    j["online"] = detail::model_to_json(nets.online);
    j["target"] = detail::model_to_json(nets.target);
    j["norm"] = detail::norm_to_json(norm);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::pair<SelectorNets, NormParams> load_selector(
    const std::string& path, const std::vector<std::string>* expected_names) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("selector checkpoint '" + path + "': " + e.what());
    }
    detail::require_keys(
        j, {"version", "hidden", "val_reward", "online", "target", "norm"},
        "selector checkpoint");
    try {
        if (j.at("version").get<int>() != 1)
            throw ConfigError("selector checkpoint '" + path +
                              "': unsupported version");
        SelectorNets nets;
        nets.hidden = j.at("hidden").get<std::vector<int>>();
        nets.val_reward = j.at("val_reward").get<double>();
        nets.online = detail::model_from_json(j.at("online"));
        nets.target = detail::model_from_json(j.at("target"));
        NormParams norm = detail::norm_from_json(j.at("norm"));
        const std::size_t f = norm.mean.size();
        if (nets.online.input_size() != static_cast<int>(2 * f) ||
            nets.online.output_size() != static_cast<int>(f) + 2 ||
            nets.online.dims != nets.target.dims)
            throw ConfigError("selector checkpoint '" + path +
                              "': network shape does not match feature count");
        if (expected_names && *expected_names != *norm.names)
            throw ConfigError("selector checkpoint '" + path +
                              "': feature names do not match the current "
                              "feature configuration");
        return {std::move(nets), std::move(norm)};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("selector checkpoint: malformed: ") +
                          e.what());
    }
}

void RfeConfig::validate() const {
    if (hidden.empty() || hidden.size() > 3)
        throw ConfigError("rfe: hidden depth must be 1..3");
    for (int w : hidden)
        if (w < 1) throw ConfigError("rfe: hidden widths must be positive");
    if (lr <= 0.0) throw ConfigError("rfe: lr must be positive");
    if (tol <= 0.0) throw ConfigError("rfe: tol must be positive");
    if (max_iter < 1) throw ConfigError("rfe: max_iter must be at least 1");
    if (drop_fraction <= 0.0 || drop_fraction >= 1.0)
        throw ConfigError("rfe: drop_fraction must be in (0,1)");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("rfe: val_fraction must be in (0,1)");
}

RfeResult rfe_select(const std::vector<FeatureVector>& instances,
                     const std::vector<int>& labels, const RfeConfig& cfg) {
    cfg.validate();
    check_instances(instances, labels);
    const std::size_t f = instances.front().size();

    const detail::Split split = detail::stratified_split(
        labels, cfg.val_fraction, derive_seed(cfg.seed, 301));

    std::vector<std::uint8_t> active(f, 1);
    std::size_t active_count = f;
    std::vector<int> elimination;  // least important first
    RfeResult res;

    std::vector<std::uint8_t> best_mask;
    double best_f1 = -1.0;
    std::size_t best_size = f + 1;

    int round = 0;
    while (active_count >= 1) {
        // Train on the active subset; inactive features are masked out of
        // the encoded input.
        std::vector<std::vector<double>> Xtr, Xval;
        std::vector<int> ytr, yval;
        auto encode_masked = [&](std::size_t i) {
            FeatureVector fv = instances[i];
            fv.mask = active;
            return encode_input(fv);
        };
        for (std::size_t i : split.train) {
            Xtr.push_back(encode_masked(i));
            ytr.push_back(labels[i]);
        }
        for (std::size_t i : split.val) {
            Xval.push_back(encode_masked(i));
            yval.push_back(labels[i]);
        }

        std::vector<int> dims;
        dims.push_back(static_cast<int>(2 * f));
        for (int h : cfg.hidden) dims.push_back(h);
        dims.push_back(1);
        MlpModel m = MlpModel::init(dims, OutputHead::SigmoidBinary,
                                    derive_seed(cfg.seed, 400, round));
        train_single(m, Xtr, ytr, cfg.lr, cfg.tol, cfg.max_iter);

        double val_f1 = 0.0;
        if (!Xval.empty()) {
            std::vector<int> preds;
            preds.reserve(Xval.size());
            for (const auto& x : Xval)
                preds.push_back(forward(m, x)[0] >= 0.5 ? 1 : 0);
            val_f1 = f1_score(preds, yval);
        }
        res.rounds.push_back({active_count, val_f1});
        if (val_f1 > best_f1 ||
            (val_f1 == best_f1 && active_count < best_size)) {
            best_f1 = val_f1;
            best_size = active_count;
            best_mask = active;
        }

        // Importance = mean absolute input-layer weight of the value column.
        const Layer& first = m.layers.front();
        std::vector<std::pair<double, int>> scored;
        for (std::size_t i = 0; i < f; ++i) {
            if (!active[i]) continue;
            double s = 0.0;
            for (int r = 0; r < first.out; ++r)
                s += std::abs(first.w[static_cast<std::size_t>(r) * first.in + i]);
            scored.emplace_back(s / first.out, static_cast<int>(i));
        }
        std::sort(scored.begin(), scored.end());

        const std::size_t drop = std::max<std::size_t>(
            1, static_cast<std::size_t>(cfg.drop_fraction * active_count));
        for (std::size_t k = 0; k < drop && k < scored.size(); ++k) {
            active[scored[k].second] = 0;
            elimination.push_back(scored[k].second);
            --active_count;
        }
        ++round;
    }

    res.ranking.assign(elimination.rbegin(), elimination.rend());
    res.chosen_mask = std::move(best_mask);
    res.chosen_size = best_size;
    return res;
}

std::vector<std::uint8_t> mask_for_size(const std::vector<int>& ranking,
                                        std::size_t k) {
    if (k > ranking.size())
        throw DomainError("rfe: requested subset exceeds feature count");
    std::vector<std::uint8_t> mask(ranking.size(), 0);
    for (std::size_t i = 0; i < k; ++i) mask[ranking[i]] = 1;
    return mask;
}

}  // namespace rehab
