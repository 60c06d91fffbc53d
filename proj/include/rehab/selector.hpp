#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rehab/mlp.hpp"
#include "rehab/rng.hpp"

namespace rehab {

// Per-instance acquisition state. Actions are encoded as integers:
// [0, F) acquires feature i, F classifies as 0, F + 1 classifies as 1.
struct AcquisitionState {
    std::vector<double> observed;     // standardized value where acquired, 0 elsewhere
    std::vector<std::uint8_t> mask;   // acquisition bits
    int budget_used = 0;              // = popcount(mask)
};

AcquisitionState initial_state(std::size_t feature_count);

inline int classify_action(std::size_t feature_count, int label) {
    return static_cast<int>(feature_count) + label;
}

inline bool is_classify(std::size_t feature_count, int action) {
    return action >= static_cast<int>(feature_count);
}

std::vector<int> legal_actions(const AcquisitionState& s);

// State encoding fed to the Q-networks: observed values then mask bits.
// Matches the predictor's input encoding.
std::vector<double> encode_state(const AcquisitionState& s);

struct RlConfig {
    double feature_cost = 0.05;
    double misclass_penalty = 1.0;
    double correct_reward = 1.0;
    double gamma = 1.0;
    // Exploration decays linearly from eps_start to eps_end over the first
    // half of the episodes, then stays at eps_end.
    double eps_start = 1.0;
    double eps_end = 0.05;
    std::size_t replay_capacity = 10000;
    int minibatch = 64;
    int target_sync_every = 200;  // gradient updates between target refreshes
    int update_every = 1;         // environment steps between updates
    int max_episode_steps = 1000; // safety cutoff for generic environments
    int episodes = 3000;
    double q_lr = 0.001;
    // Candidate hidden architectures for the Q-networks. With several
    // candidates each is trained on an inner split and the one with the best
    // mean greedy validation reward wins; with one, no split is made.
    std::vector<std::vector<int>> q_hidden = {{64}};
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

// Applies one action to one instance. Acquire reveals the standardized value
// and costs feature_cost; classification ends the episode with
// correct_reward or -misclass_penalty.
std::tuple<AcquisitionState, double, bool> transition(
    const AcquisitionState& s, int action, const FeatureVector& fv,
    int true_label, const RlConfig& cfg);

// Double-Q bootstrap: the online network picks the argmax over legal
// actions, the target network supplies its value. Returns reward when done.
double double_q_target(double reward, bool done,
                       const std::vector<double>& q_online_next,
                       const std::vector<double>& q_target_next,
                       const std::vector<int>& legal_next, double gamma);

double double_q_target(double reward, bool done,
                       const std::vector<double>& next_encoded,
                       const MlpModel& online, const MlpModel& target,
                       const std::vector<int>& legal_next, double gamma);

// Abstract episodic environment, enough for Q-learning with legal-action
// masking. Implementations own their state; encode() reflects it.
class QEnv {
public:
    virtual ~QEnv() = default;
    virtual int input_dim() const = 0;
    virtual int action_count() const = 0;
    // Starts a new episode; may consume rng draws.
    virtual void reset(Rng& rng) = 0;
    virtual std::vector<int> legal_actions() const = 0;
    // Applies an action, returns (reward, done).
    virtual std::pair<double, bool> step(int action) = 0;
    virtual std::vector<double> encode() const = 0;
    // Feasible return range from any state. Bootstrapped targets are clamped
    // to it; true action values always lie inside, so the fixed point is
    // unchanged but bootstrap runaway cannot feed on itself.
    virtual std::pair<double, double> return_bounds() const = 0;
};

// Sequential feature acquisition as a QEnv over a fixed instance pool.
// reset() samples an instance uniformly; set_instance pins one instead.
class FeatureAcquisitionEnv : public QEnv {
public:
    FeatureAcquisitionEnv(const std::vector<FeatureVector>* instances,
                          const std::vector<int>* labels, const RlConfig* cfg);

    int input_dim() const override;
    int action_count() const override;
    void reset(Rng& rng) override;
    std::vector<int> legal_actions() const override;
    std::pair<double, bool> step(int action) override;
    std::vector<double> encode() const override;
    std::pair<double, double> return_bounds() const override;

    void set_instance(std::size_t index);
    const AcquisitionState& state() const { return state_; }

private:
    const std::vector<FeatureVector>* instances_;
    const std::vector<int>* labels_;
    const RlConfig* cfg_;
    std::size_t current_ = 0;
    bool pinned_ = false;
    AcquisitionState state_;
};

// Episodic double Q-learning with uniform experience replay and periodic
// target sync. Deterministic for a given seed. Returns (online, target).
std::pair<MlpModel, MlpModel> train_double_q(QEnv& env,
                                             const std::vector<int>& hidden,
                                             const RlConfig& cfg,
                                             std::uint64_t seed);

struct EpisodeTrace {
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<std::uint8_t> final_mask;
    int prediction = -1;
    int true_label = -1;  // -1 when unknown

    double total_reward() const;
    int acquisitions() const;
};

std::string trace_to_json(const EpisodeTrace& t);

struct SelectorNets {
    MlpModel online;
    MlpModel target;
    std::vector<int> hidden;
    double val_reward = 0.0;  // mean greedy reward backing the choice
};

// Trains the acquisition agent on standardized instances. With several
// architecture candidates the winner is picked by greedy validation reward
// on an inner split, then retrained on everything.
SelectorNets train_selector(const std::vector<FeatureVector>& instances,
                            const std::vector<int>& labels,
                            const RlConfig& cfg);

// Greedy rollout on one instance. Pass the true label to fill in terminal
// reward and truth; otherwise the terminal reward is recorded as 0.
EpisodeTrace select_and_classify(const MlpModel& q_online,
                                 const FeatureVector& fv, const RlConfig& cfg,
                                 const int* true_label = nullptr);

// A selector checkpoint carries the normalization so rollouts from the CLI
// standardize exactly as training did.
void save_selector(const SelectorNets& nets, const NormParams& norm,
                   const std::string& path);
std::pair<SelectorNets, NormParams> load_selector(
    const std::string& path,
    const std::vector<std::string>* expected_names = nullptr);

// Recursive feature elimination baseline: one fixed subset for everybody.
struct RfeConfig {
    std::vector<int> hidden = {32};
    double lr = 0.01;
    double tol = 1e-4;
    int max_iter = 100;
    double drop_fraction = 0.10;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RfeRound {
    std::size_t active_count = 0;
    double val_f1 = 0.0;
};

struct RfeResult {
    // Every feature, most important first (reverse elimination order).
    std::vector<int> ranking;
    std::vector<std::uint8_t> chosen_mask;
    std::size_t chosen_size = 0;
    std::vector<RfeRound> rounds;
};

// Repeatedly trains the predictor, scores features by the mean absolute
// input-layer weight of their value column, and drops the lowest 10% of the
// active set. The subset size with the best validation F1 wins; ties go to
// the smaller subset.
RfeResult rfe_select(const std::vector<FeatureVector>& instances,
                     const std::vector<int>& labels, const RfeConfig& cfg);

// Nested subset of the ranking's top k features as an acquisition mask.
std::vector<std::uint8_t> mask_for_size(const std::vector<int>& ranking,
                                        std::size_t k);

}  // namespace rehab
