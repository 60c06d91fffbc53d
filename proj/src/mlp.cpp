#include "rehab/mlp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "json_convert.hpp"
#include "rehab/errors.hpp"
#include "rehab/metrics.hpp"
#include "rehab/rng.hpp"
#include "split.hpp"

namespace rehab {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_dims(const std::vector<int>& dims, OutputHead head) {
    if (dims.size() < 3 || dims.size() > 5)
        throw DomainError("mlp: 1 to 3 hidden layers required");
    for (int d : dims)
        if (d < 1) throw DomainError("mlp: layer sizes must be positive");
    if (head == OutputHead::SigmoidBinary && dims.back() != 1)
        throw DomainError("mlp: sigmoid head requires a single output unit");
}

}  // namespace

MlpModel MlpModel::init(const std::vector<int>& dims, OutputHead head,
                        std::uint64_t seed) {
    check_dims(dims, head);
    MlpModel m;
    m.dims = dims;
    m.head = head;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
        layer.b.assign(layer.out, 0.0);
        // He-style uniform scaling by fan-in; weights drawn row-major.
        const double limit = std::sqrt(6.0 / layer.in);
        for (double& w : layer.w) w = rng.uniform(-limit, limit);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

ForwardCache forward_cached(const MlpModel& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.input_size())
        throw DimensionMismatch("mlp forward: input size " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(m.input_size()));
    ForwardCache cache;
    cache.acts.reserve(m.layers.size() + 1);
    cache.acts.push_back(x);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const Layer& layer = m.layers[l];
        const std::vector<double>& a = cache.acts.back();
        std::vector<double> z(layer.out);
        for (int r = 0; r < layer.out; ++r) {
            double s = layer.b[r];
            const double* wrow = layer.w.data() +
                                 static_cast<std::size_t>(r) * layer.in;
            for (int c = 0; c < layer.in; ++c) s += wrow[c] * a[c];
            z[r] = s;
        }
        const bool last = (l + 1 == m.layers.size());
        if (!last)
            for (double& v : z) v = std::max(0.0, v);
        cache.acts.push_back(std::move(z));
    }
    return cache;
}

std::vector<double> forward(const MlpModel& m, const std::vector<double>& x) {
    ForwardCache cache = forward_cached(m, x);
    std::vector<double> out = cache.acts.back();
    if (m.head == OutputHead::SigmoidBinary)
        for (double& v : out) v = sigmoid(v);
    return out;
}

Gradients Gradients::zeros_like(const MlpModel& m) {
    Gradients g;
    for (const auto& l : m.layers) {
        g.dw.emplace_back(l.w.size(), 0.0);
        g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

void Gradients::scale(double k) {
    for (auto& v : dw)
        for (double& x : v) x *= k;
    for (auto& v : db)
        for (double& x : v) x *= k;
}

void backward(const MlpModel& m, const ForwardCache& cache,
              const std::vector<double>& dz_out, Gradients& grads) {
    if (grads.dw.size() != m.layers.size())
        throw ShapeMismatch("mlp backward: gradient layout");
    std::vector<double> dz = dz_out;
    for (int l = static_cast<int>(m.layers.size()) - 1; l >= 0; --l) {
        const Layer& layer = m.layers[l];
        const std::vector<double>& a = cache.acts[l];
        if (static_cast<int>(dz.size()) != layer.out)
            throw ShapeMismatch("mlp backward: output gradient size");
        for (int r = 0; r < layer.out; ++r) {
            double* dwrow = grads.dw[l].data() +
                            static_cast<std::size_t>(r) * layer.in;
            for (int c = 0; c < layer.in; ++c) dwrow[c] += dz[r] * a[c];
            grads.db[l][r] += dz[r];
        }
        if (l == 0) break;
        std::vector<double> prev(layer.in, 0.0);
        for (int r = 0; r < layer.out; ++r) {
            const double* wrow = layer.w.data() +
                                 static_cast<std::size_t>(r) * layer.in;
            for (int c = 0; c < layer.in; ++c) prev[c] += wrow[c] * dz[r];
        }
        // Rectifier derivative taken from the post-activation values.
        const std::vector<double>& act = cache.acts[l];
        for (int c = 0; c < layer.in; ++c)
            if (act[c] <= 0.0) prev[c] = 0.0;
        dz = std::move(prev);
    }
}

std::pair<double, Gradients> loss_and_grad(
    const MlpModel& m, const std::vector<std::vector<double>>& X,
    const std::vector<int>& y) {
    if (m.head != OutputHead::SigmoidBinary)
        throw DomainError("mlp loss: cross-entropy requires the sigmoid head");
    if (X.empty() || X.size() != y.size())
        throw DimensionMismatch("mlp loss: batch sizes disagree or empty");
    Gradients grads = Gradients::zeros_like(m);
    double loss = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        ForwardCache cache = forward_cached(m, X[i]);
        const double z = cache.acts.back()[0];
        const double yi = y[i];
        // Stable cross-entropy from the logit.
        loss += std::max(z, 0.0) - z * yi + std::log1p(std::exp(-std::abs(z)));
        backward(m, cache, {sigmoid(z) - yi}, grads);
    }
    const double inv = 1.0 / X.size();
    grads.scale(inv);
    return {loss * inv, std::move(grads)};
}

std::pair<double, Gradients> q_loss_and_grad(
    const MlpModel& m, const std::vector<std::vector<double>>& X,
    const std::vector<int>& action_index, const std::vector<double>& targets) {
    if (m.head != OutputHead::LinearQ)
        throw DomainError("mlp q-loss: requires the linear head");
    if (X.empty() || X.size() != action_index.size() ||
        X.size() != targets.size())
        throw DimensionMismatch("mlp q-loss: batch sizes disagree or empty");
    Gradients grads = Gradients::zeros_like(m);
    double loss = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const int a = action_index[i];
        if (a < 0 || a >= m.output_size())
            throw DimensionMismatch("mlp q-loss: action index out of range");
        ForwardCache cache = forward_cached(m, X[i]);
        const double e = cache.acts.back()[a] - targets[i];
        loss += 0.5 * e * e;
        std::vector<double> dz(m.output_size(), 0.0);
        dz[a] = e;
        backward(m, cache, dz, grads);
    }
    const double inv = 1.0 / X.size();
    grads.scale(inv);
    return {loss * inv, std::move(grads)};
}

AdamState AdamState::zeros_like(const MlpModel& m) {
    AdamState s;
    for (const auto& l : m.layers) {
        s.mw.emplace_back(l.w.size(), 0.0);
        s.vw.emplace_back(l.w.size(), 0.0);
        s.mb.emplace_back(l.b.size(), 0.0);
        s.vb.emplace_back(l.b.size(), 0.0);
    }
    return s;
}

void adam_step(MlpModel& m, const Gradients& grads, AdamState& state,
               double lr) {
    if (grads.dw.size() != m.layers.size() ||
        state.mw.size() != m.layers.size())
        throw ShapeMismatch("adam: layer count disagrees");
    for (std::size_t l = 0; l < m.layers.size(); ++l)
        if (grads.dw[l].size() != m.layers[l].w.size() ||
            grads.db[l].size() != m.layers[l].b.size())
            throw ShapeMismatch("adam: gradient shape disagrees");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step);

    auto update = [&](std::vector<double>& theta, const std::vector<double>& g,
                      std::vector<double>& mm, std::vector<double>& vv) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            mm[i] = state.beta1 * mm[i] + (1.0 - state.beta1) * g[i];
            vv[i] = state.beta2 * vv[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = mm[i] / bc1;
            const double vhat = vv[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        update(m.layers[l].w, grads.dw[l], state.mw[l], state.vw[l]);
        update(m.layers[l].b, grads.db[l], state.mb[l], state.vb[l]);
    }
}

void TrainConfig::validate() const {
    if (depths.empty() || widths.empty() || learning_rates.empty())
        throw ConfigError("train: empty architecture or learning-rate grid");
    for (int d : depths)
        if (d < 1 || d > 3) throw ConfigError("train: depths must be in 1..3");
    for (int w : widths)
        if (w < 1) throw ConfigError("train: widths must be positive");
    for (double lr : learning_rates)
        if (lr <= 0.0) throw ConfigError("train: learning rates must be positive");
    if (tol <= 0.0) throw ConfigError("train: tol must be positive");
    if (max_iter < 1) throw ConfigError("train: max_iter must be at least 1");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("train: val_fraction must be in (0,1)");
    if (threads < 1) throw ConfigError("train: threads must be at least 1");
}

std::vector<std::vector<int>> TrainConfig::hidden_grid() const {
    std::vector<std::vector<int>> grid;
    for (int d : depths)
        for (int w : widths) grid.emplace_back(d, w);
    return grid;
}

std::pair<double, int> train_single(MlpModel& m,
                                    const std::vector<std::vector<double>>& X,
                                    const std::vector<int>& y, double lr,
                                    double tol, int max_iter) {
    AdamState state = AdamState::zeros_like(m);
    double prev = std::numeric_limits<double>::infinity();
    double loss = 0.0;
    int iter = 0;
    while (iter < max_iter) {
        ++iter;
        auto [cur, grads] = loss_and_grad(m, X, y);
        loss = cur;
        if (std::abs(cur - prev) < tol) break;
        adam_step(m, grads, state, lr);
        prev = cur;
    }
    return {loss, iter};
}

std::pair<MlpModel, TrainReport> train_predictor(
    const std::vector<std::vector<double>>& X, const std::vector<int>& y,
    const TrainConfig& cfg) {
    cfg.validate();
    if (X.empty()) throw EmptyTrainingSet("train: no instances");
    if (X.size() != y.size())
        throw DimensionMismatch("train: instances and labels disagree");
    const int in_dim = static_cast<int>(X.front().size());
    for (const auto& row : X)
        if (static_cast<int>(row.size()) != in_dim)
            throw DimensionMismatch("train: ragged feature matrix");

    const detail::Split split =
        detail::stratified_split(y, cfg.val_fraction, cfg.seed);
    std::vector<std::vector<double>> Xtr, Xval;
    std::vector<int> ytr, yval;
    for (std::size_t i : split.train) {
        Xtr.push_back(X[i]);
        ytr.push_back(y[i]);
    }
    for (std::size_t i : split.val) {
        Xval.push_back(X[i]);
        yval.push_back(y[i]);
    }

    const auto archs = cfg.hidden_grid();
    const std::size_t n_cells = archs.size() * cfg.learning_rates.size();

    TrainReport report;
    report.cells.resize(n_cells);

    auto run_cell = [&](std::size_t cell) -> MlpModel {
        const std::size_t ai = cell / cfg.learning_rates.size();
        const std::size_t li = cell % cfg.learning_rates.size();
        std::vector<int> dims;
        dims.push_back(in_dim);
        for (int h : archs[ai]) dims.push_back(h);
        dims.push_back(1);
        MlpModel m = MlpModel::init(dims, OutputHead::SigmoidBinary,
                                    derive_seed(cfg.seed, cell));
        auto [loss, iters] = train_single(m, Xtr, ytr, cfg.learning_rates[li],
                                          cfg.tol, cfg.max_iter);
        GridCell& gc = report.cells[cell];
        gc.hidden = archs[ai];
        gc.lr = cfg.learning_rates[li];
        gc.final_loss = loss;
        gc.iterations = iters;
        if (Xval.empty()) {
            gc.val_f1 = 0.0;
        } else {
            std::vector<int> preds;
            preds.reserve(Xval.size());
            for (const auto& x : Xval)
                preds.push_back(forward(m, x)[0] >= 0.5 ? 1 : 0);
            gc.val_f1 = f1_score(preds, yval);
        }
        return m;
    };

    if (cfg.threads <= 1 || n_cells <= 1) {
        for (std::size_t c = 0; c < n_cells; ++c) run_cell(c);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= n_cells) return;
                run_cell(c);
            }
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(cfg.threads, static_cast<int>(n_cells));
        pool.reserve(n);
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Best by validation F1, ties to the earlier grid cell. The winning cell
    // is retrained with its own seed rather than kept in memory.
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_cells; ++c)
        if (report.cells[c].val_f1 > report.cells[best].val_f1) best = c;
    report.best_index = best;
    MlpModel model = run_cell(best);
    return {std::move(model), std::move(report)};
}

std::vector<double> encode_input(const FeatureVector& fv) {
    const std::size_t f = fv.values.size();
    if (!fv.mask.empty() && fv.mask.size() != f)
        throw DimensionMismatch("encode: mask and values disagree");
    std::vector<double> x(2 * f);
    for (std::size_t i = 0; i < f; ++i) {
        const bool on = fv.mask.empty() || fv.mask[i];
        x[i] = on ? fv.values[i] : 0.0;
        x[f + i] = on ? 1.0 : 0.0;
    }
    return x;
}

Prediction predict(const MlpModel& m, const FeatureVector& fv) {
    const std::vector<double> x = encode_input(fv);
    const double p = forward(m, x)[0];
    return {p >= 0.5 ? 1 : 0, p};
}

namespace detail {

void require_keys(const nlohmann::json& j,
                  const std::vector<std::string>& allowed,
                  const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) ==
            allowed.end())
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

nlohmann::json model_to_json(const MlpModel& m) {
    nlohmann::json j;
    j["dims"] = m.dims;
    j["head"] = m.head == OutputHead::SigmoidBinary ? "sigmoid" : "linear";
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers) layers.push_back({{"w", l.w}, {"b", l.b}});
    j["layers"] = layers;
    return j;
}

MlpModel model_from_json(const nlohmann::json& j) {
    require_keys(j, {"dims", "head", "layers"}, "model");
    MlpModel m;
    try {
        m.dims = j.at("dims").get<std::vector<int>>();
        const std::string head = j.at("head").get<std::string>();
        if (head == "sigmoid")
            m.head = OutputHead::SigmoidBinary;
        else if (head == "linear")
            m.head = OutputHead::LinearQ;
        else
            throw ConfigError("model: unknown head '" + head + "'");
        check_dims(m.dims, m.head);
        const auto& layers = j.at("layers");
        if (!layers.is_array() || layers.size() + 1 != m.dims.size())
            throw ConfigError("model: layer count disagrees with dims");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            require_keys(layers[l], {"w", "b"}, "model layer");
            Layer layer;
            layer.in = m.dims[l];
            layer.out = m.dims[l + 1];
            layer.w = layers[l].at("w").get<std::vector<double>>();
            layer.b = layers[l].at("b").get<std::vector<double>>();
            if (layer.w.size() !=
                    static_cast<std::size_t>(layer.in) * layer.out ||
                layer.b.size() != static_cast<std::size_t>(layer.out))
                throw ConfigError("model: parameter array shape disagrees");
            for (double v : layer.w)
                if (!std::isfinite(v))
                    throw ConfigError("model: non-finite weight");
            for (double v : layer.b)
                if (!std::isfinite(v))
                    throw ConfigError("model: non-finite bias");
            m.layers.push_back(std::move(layer));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model: malformed checkpoint: ") +
                          e.what());
    }
    return m;
}

nlohmann::json norm_to_json(const NormParams& p) {
    nlohmann::json j;
    j["feature_names"] =
        p.names ? *p.names : std::vector<std::string>{};
    j["mean"] = p.mean;
    j["std"] = p.std_dev;
    return j;
}

NormParams norm_from_json(const nlohmann::json& j) {
    require_keys(j, {"feature_names", "mean", "std"}, "norm");
    NormParams p;
    try {
        p.names = std::make_shared<const std::vector<std::string>>(
            j.at("feature_names").get<std::vector<std::string>>());
        p.mean = j.at("mean").get<std::vector<double>>();
        p.std_dev = j.at("std").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("norm: malformed checkpoint: ") +
                          e.what());
    }
    if (p.mean.size() != p.std_dev.size() ||
        p.mean.size() != p.names->size())
        throw ConfigError("norm: array lengths disagree");
    for (double s : p.std_dev)
        if (!(s > 0.0))
            throw ConfigError("norm: standard deviations must be positive");
    return p;
}

}  // namespace detail

void save_predictor(const PredictorCheckpoint& cp, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["model"] = detail::model_to_json(cp.model);
    j["norm"] = detail::norm_to_json(cp.norm);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

PredictorCheckpoint load_predictor(
    const std::string& path, const std::vector<std::string>* expected_names) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint '" + path + "': " + e.what());
    }
    detail::require_keys(j, {"version", "model", "norm"}, "checkpoint");
    if (!j.contains("version") || !j.at("version").is_number_integer() ||
        j.at("version").get<int>() != 1)
        throw ConfigError("checkpoint '" + path + "': unsupported version");
    PredictorCheckpoint cp;
    cp.model = detail::model_from_json(j.at("model"));
    cp.norm = detail::norm_from_json(j.at("norm"));
    // The predictor input doubles the feature count (values then mask bits).
    if (cp.model.input_size() != static_cast<int>(2 * cp.norm.mean.size()))
        throw ConfigError("checkpoint '" + path +
                          "': model input does not match feature count");
    if (expected_names && *expected_names != *cp.norm.names)
        throw ConfigError("checkpoint '" + path +
                          "': feature names do not match the current feature "
                          "configuration");
    return cp;
}

}  // namespace rehab
