#include "outtree/semisup.hpp"

#include "outtree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace outtree::semisup {

namespace {

using Edit = treemath::LogdetSession::Edit;
using Index = Eigen::Index;

Index ix(std::size_t i) { return static_cast<Index>(i); }

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

Matrix label_matrix(const std::vector<int>& y, const LabelModel& lm) {
    const Index T = ix(y.size());
    Matrix L(T, T);
    for (Index u = 0; u < T; ++u)
        for (Index v = 0; v < T; ++v) L(u, v) = u == v ? 0.0 : lm.log_label(y[static_cast<std::size_t>(u)], y[static_cast<std::size_t>(v)]);
    return L;
}

void check_assigned(const std::vector<int>& y, int K) {
    for (std::size_t t = 0; t < y.size(); ++t)
        if (y[t] < 0 || y[t] >= K)
            throw DataError("label of node " + std::to_string(t) + " is unassigned or outside [0, " + std::to_string(K) + ")");
}

std::unique_ptr<models::MutationModel> scaled_model(const models::MutationModel& model, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ConfigError("conditional_scale must be positive");
    if (factor == 1.0) return model.clone();
    const auto* g = dynamic_cast<const models::GaussianModel*>(&model);
    if (!g) throw ConfigError("conditional_scale applies to the gaussian family only");
    return g->with_conditional_scale(factor).clone();
}

struct Run {
    std::vector<int> labels;
    double log_Z = 0.0;
    int sweeps = 0;
    int flips = 0;
};

// Sweeps until no flip commits. Returns the state's labels and ln Z.
Run climb(InferenceState& state, const std::vector<std::size_t>& free, int K, int max_sweeps, double min_gain,
          Rng& rng) {
    Run run;
    std::vector<std::size_t> order = free;
    while (run.sweeps < max_sweeps) {
        ++run.sweeps;
        shuffle(order, rng);
        bool changed = false;
        for (std::size_t i : order) {
            const int cur = state.labels()[i];
            int best = -1;
            double best_lin = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < K; ++c) {
                if (c == cur) continue;
                const double lin = K == 2 ? 0.0 : state.linearized_delta(i, c);
                if (best < 0 || lin > best_lin) {
                    best = c;
                    best_lin = lin;
                }
            }
            if (best < 0) continue;
            if (state.flip_delta(i, best) > min_gain) {
                state.commit(i, best);
                ++run.flips;
                changed = true;
            }
        }
        if (!changed) break;
    }
    run.labels = state.labels();
    run.log_Z = state.log_partition();
    return run;
}

}  // namespace

void LabelModel::validate() const {
    if (K < 2) throw ConfigError("label model needs K >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("stickiness alpha must lie in (0, 1)");
}

double LabelModel::log_label(int child, int parent) const {
    return child == parent ? std::log(alpha) : std::log((1.0 - alpha) / (K - 1));
}

void validate_labels(const std::vector<int>& y, int K, std::size_t T) {
    if (K < 2) throw DataError("labels need K >= 2 classes");
    if (y.size() != T) throw DataError("label count " + std::to_string(y.size()) + " does not match T = " + std::to_string(T));
    bool any = false;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (y[t] == kMissing) continue;
        if (y[t] < 0 || y[t] >= K)
            throw DataError("label " + std::to_string(y[t]) + " of node " + std::to_string(t) + " outside [0, " + std::to_string(K) + ")");
        any = true;
    }
    if (!any) throw DataError("at least one label must be observed");
}

likelihood::LogWeightOffset label_offset(const std::vector<int>& y, const LabelModel& labels) {
    labels.validate();
    check_assigned(y, labels.K);
    return {label_matrix(y, labels), Vector::Constant(ix(y.size()), -std::log(static_cast<double>(labels.K)))};
}

std::pair<treemath::WeightMatrix, treemath::RootWeights> build_joint_beta(const Matrix& X, const std::vector<int>& y,
                                                                        const models::MutationModel& model,
                                                                        const LabelModel& labels) {
    if (y.size() != static_cast<std::size_t>(X.rows())) throw DataError("label count does not match the data rows");
    const auto off = label_offset(y, labels);
    auto [beta, roots] = models::build_beta(X, model);
    return {treemath::WeightMatrix::from_log(beta.log_weights() + off.edge),
            treemath::RootWeights::from_log(roots.log_values() + off.root)};
}

// ------------------------------------------------------------ InferenceState

InferenceState::InferenceState(Matrix base_log_beta, Vector base_log_root, std::vector<int> labels, LabelModel label_model)
    : base_(std::move(base_log_beta)),
      base_root_(std::move(base_log_root)),
      labels_(std::move(labels)),
      lm_(label_model),
      session_([&] {
          lm_.validate();
          if (base_.rows() != base_.cols() || base_.rows() != base_root_.size() || static_cast<std::size_t>(base_.rows()) != labels_.size())
              throw DataError("inference state sizes disagree");
          check_assigned(labels_, lm_.K);
          return treemath::WeightMatrix::from_log(base_ + label_matrix(labels_, lm_));
      }(),
               treemath::RootWeights::from_log(base_root_.array() - std::log(static_cast<double>(lm_.K)))) {}

void InferenceState::check_flip(std::size_t i, int new_label) const {
    if (i >= size()) throw DataError("node " + std::to_string(i) + " out of range");
    if (new_label < 0 || new_label >= lm_.K) throw DataError("label " + std::to_string(new_label) + " out of range");
    if (new_label == labels_[i]) throw ConfigError("flip to the current label of node " + std::to_string(i));
}

std::vector<Edit> InferenceState::edits_for(std::size_t i, int new_label) const {
    std::vector<Edit> edits;
    edits.reserve(2 * (size() - 1));
    for (std::size_t v = 0; v < size(); ++v) {
        if (v == i) continue;
        edits.push_back({i, v, base_(ix(i), ix(v)) + lm_.log_label(new_label, labels_[v])});
        edits.push_back({v, i, base_(ix(v), ix(i)) + lm_.log_label(labels_[v], new_label)});
    }
    return edits;
}

double InferenceState::flip_delta(std::size_t i, int new_label) const {
    check_flip(i, new_label);
    const auto edits = edits_for(i, new_label);
    treemath::LogdetSession scratch = session_;
    try {
        scratch.apply(edits);
    } catch (const CapacitanceFault&) {
        scratch.assign(edits);
    }
    return scratch.log_partition() - session_.log_partition();
}

double InferenceState::linearized_delta(std::size_t i, int new_label) const {
    check_flip(i, new_label);
    return session_.linearized_delta(edits_for(i, new_label));
}

void InferenceState::commit(std::size_t i, int new_label) {
    check_flip(i, new_label);
    const auto edits = edits_for(i, new_label);
    try {
        session_.apply(edits);
    } catch (const CapacitanceFault&) {
        session_.assign(edits);
    }
    labels_[i] = new_label;
}

double InferenceState::recompute() const {
    return treemath::log_partition(treemath::WeightMatrix::from_log(base_ + label_matrix(labels_, lm_)),
                                   treemath::RootWeights::from_log(base_root_.array() - std::log(static_cast<double>(lm_.K))))
        .log_Z;
}

// ------------------------------------------------------------------ inference

InferenceResult greedy_label_inference(const Matrix& X, const std::vector<int>& y_partial,
                                       const models::MutationModel& model, const LabelModel& label_model,
                                       const InferenceOptions& options) {
    label_model.validate();
    const std::size_t T = static_cast<std::size_t>(X.rows());
    validate_labels(y_partial, label_model.K, T);
    if (options.restarts < 1) throw ConfigError("restarts must be >= 1");
    if (options.max_sweeps < 0) throw ConfigError("max_sweeps must be >= 0");
    if (options.joint_rounds < 0) throw ConfigError("joint_rounds must be >= 0");

    std::vector<std::size_t> free;
    for (std::size_t t = 0; t < T; ++t)
        if (y_partial[t] == kMissing) free.push_back(t);

    InferenceResult result;
    std::unique_ptr<models::MutationModel> current = scaled_model(model, options.conditional_scale);
    if (free.empty()) {
        result.labels = y_partial;
        if (T >= 2) {
            auto [beta, roots] = build_joint_beta(X, y_partial, *current, label_model);
            result.log_partition = treemath::log_partition(beta, roots).log_Z;
        }
        if (options.final_deltas) result.deltas = Matrix::Zero(ix(T), label_model.K);
        return result;
    }
    if (T < 2) throw DataError("label inference needs T >= 2");

    const Rng base(options.seed);
    Run best;
    bool have = false;
    for (int r = 0; r < options.restarts; ++r) {
        Rng rng = base.substream(static_cast<std::uint64_t>(r));
        std::vector<int> init = y_partial;
        for (std::size_t t : free) init[t] = static_cast<int>(rng.index(static_cast<std::size_t>(label_model.K)));
        auto [beta, roots] = models::build_beta(X, *current);
        InferenceState state(beta.log_weights(), roots.log_values(), init, label_model);
        Run run = climb(state, free, label_model.K, options.max_sweeps, options.min_gain, rng);
        if (!have || run.log_Z > best.log_Z) {
            best = std::move(run);
            result.restart = r;
            have = true;
        }
    }

    for (int round = 0; round < options.joint_rounds; ++round) {
        const auto off = label_offset(best.labels, label_model);
        likelihood::FitOptions fo = options.joint_fit;
        fo.offset = &off;
        current = std::move(likelihood::fit_ml(X, *current, fo).model);
        auto [beta, roots] = models::build_beta(X, *current);
        InferenceState state(beta.log_weights(), roots.log_values(), best.labels, label_model);
        Rng rng = base.substream(static_cast<std::uint64_t>(options.restarts + round));
        Run run = climb(state, free, label_model.K, options.max_sweeps, options.min_gain, rng);
        run.sweeps += best.sweeps;
        run.flips += best.flips;
        best = std::move(run);
    }

    result.labels = best.labels;
    result.log_partition = best.log_Z;
    result.sweeps = best.sweeps;
    result.flips = best.flips;
    if (options.final_deltas) {
        auto [beta, roots] = models::build_beta(X, *current);
        const InferenceState state(beta.log_weights(), roots.log_values(), best.labels, label_model);
        result.deltas = Matrix::Zero(ix(T), label_model.K);
        for (std::size_t t : free)
            for (int c = 0; c < label_model.K; ++c)
                if (c != best.labels[t]) result.deltas(ix(t), c) = state.flip_delta(t, c);
    }
    if (options.joint_rounds > 0) result.model = std::move(current);
    return result;
}

std::vector<int> sample_labels(const treemath::OutTree& tree, const LabelModel& labels, Rng& rng) {
    labels.validate();
    tree.validate();
    std::vector<int> y(tree.size(), kMissing);
    for (std::size_t t : tree.topological_order()) {
        if (!tree.parent[t]) {
            y[t] = static_cast<int>(rng.index(static_cast<std::size_t>(labels.K)));
            continue;
        }
        const int p = y[*tree.parent[t]];
        if (rng.uniform() < labels.alpha) {
            y[t] = p;
        } else {
            const int other = static_cast<int>(rng.index(static_cast<std::size_t>(labels.K - 1)));
            y[t] = other >= p ? other + 1 : other;
        }
    }
    return y;
}

std::vector<int> majority_baseline(const std::vector<int>& y_partial, int K) {
    validate_labels(y_partial, K, y_partial.size());
    std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
    for (int y : y_partial)
        if (y != kMissing) ++counts[static_cast<std::size_t>(y)];
    const int top = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    std::vector<int> out = y_partial;
    for (int& y : out)
        if (y == kMissing) y = top;
    return out;
}

std::size_t select_alpha(const std::vector<double>& grid, const std::vector<double>& accuracy,
                         const std::vector<double>& log_score) {
    if (grid.empty()) throw ConfigError("alpha grid is empty");
    if (accuracy.size() != grid.size() || log_score.size() != grid.size())
        throw ConfigError("alpha scores do not match the grid");
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double da = accuracy[g] - accuracy[best];
        const double ds = log_score[g] - log_score[best];
        const double dg = std::abs(grid[g] - 0.5), db = std::abs(grid[best] - 0.5);
        const bool same_acc = std::abs(da) <= 1e-12;
        const bool same_score = std::abs(ds) <= 1e-9 * std::max(1.0, std::abs(log_score[best]));
        if ((!same_acc && da > 0.0) || (same_acc && !same_score && ds > 0.0) ||
            (same_acc && same_score && (dg < db || (dg == db && grid[g] < grid[best]))))
            best = g;
    }
    return best;
}

AlphaSelection cross_validate_alpha(const Matrix& X, const std::vector<int>& y_partial,
                                    const models::MutationModel& model, int K, const std::vector<double>& grid,
                                    int folds, const InferenceOptions& options) {
    if (grid.empty()) throw ConfigError("alpha grid is empty");
    for (double a : grid) LabelModel{a, K}.validate();
    validate_labels(y_partial, K, static_cast<std::size_t>(X.rows()));
    std::vector<std::size_t> observed;
    for (std::size_t t = 0; t < y_partial.size(); ++t)
        if (y_partial[t] != kMissing) observed.push_back(t);
    if (observed.size() < 2) throw DataError("cross-validation needs at least two observed labels");
    if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
    const std::size_t F = std::min<std::size_t>(static_cast<std::size_t>(folds), observed.size());

    AlphaSelection sel;
    sel.accuracy.assign(grid.size(), 0.0);
    sel.log_score.assign(grid.size(), 0.0);
    if (grid.size() == 1) {
        sel.alpha = grid[0];
        return sel;
    }
    Rng rng = Rng(options.seed).substream(0xC0FFEEu);
    shuffle(observed, rng);

    std::vector<double> correct(grid.size(), 0.0), score(grid.size(), 0.0);
    for (std::size_t f = 0; f < F; ++f) {
        std::vector<int> y = y_partial;
        std::vector<std::size_t> held;
        for (std::size_t k = f; k < observed.size(); k += F) {
            held.push_back(observed[k]);
            y[observed[k]] = kMissing;
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            InferenceOptions o = options;
            o.final_deltas = true;
            o.seed = Rng(options.seed).substream(1 + f).seed();
            const auto res = greedy_label_inference(X, y, model, LabelModel{grid[g], K}, o);
            for (std::size_t t : held) {
                correct[g] += res.labels[t] == y_partial[t];
                const Vector d = res.deltas.row(ix(t)).transpose();
                const double hi = d.maxCoeff();
                score[g] += d(y_partial[t]) - hi - std::log((d.array() - hi).exp().sum());
            }
        }
    }
    const double total = static_cast<double>(observed.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        sel.accuracy[g] = correct[g] / total;
        sel.log_score[g] = score[g] / total;
    }
    const std::size_t best = select_alpha(grid, sel.accuracy, sel.log_score);
    sel.alpha = grid[best];
    return sel;
}

}  // namespace outtree::semisup
