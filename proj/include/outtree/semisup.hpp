#pragma once

// Semi-supervised label inference on the joint input/label tree model:
//
//   log beta(u, v) = log p(X_u | X_v) + log p(y_u | y_v)
//   p(y_u | y_v)   = alpha if y_u == y_v, else (1 - alpha) / (K - 1)
//   root weight    = log p(X_r) - log K
//
// Missing labels are filled by greedy hill climbing on ln Z. Changing the
// label of node i rewrites row i and column i of beta; those 2(T-1) entries
// are pushed through a LogdetSession as rank-1 edits.

#include "outtree/likelihood.hpp"
#include "outtree/models.hpp"
#include "outtree/rng.hpp"
#include "outtree/treemath.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace outtree::semisup {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Label value marking a missing entry.
inline constexpr int kMissing = -1;

struct LabelModel {
    double alpha = 0.9;
    int K = 2;

    void validate() const;
    double log_label(int child, int parent) const;
};

/// Throws DataError unless every label is kMissing or in [0, K) and at least
/// one is observed.
void validate_labels(const std::vector<int>& y, int K, std::size_t T);

/// Joint weights for fully assigned labels.
std::pair<treemath::WeightMatrix, treemath::RootWeights> build_joint_beta(const Matrix& X, const std::vector<int>& y,
                                                                        const models::MutationModel& model,
                                                                        const LabelModel& labels);

/// Label offsets in likelihood::LogWeightOffset form (edge label terms and
/// -log K per root).
likelihood::LogWeightOffset label_offset(const std::vector<int>& y, const LabelModel& labels);

/// Current labels with a factored joint Laplacian.
class InferenceState {
public:
    /// `base_log_beta` / `base_log_root` are the input-model log weights.
    InferenceState(Matrix base_log_beta, Vector base_log_root, std::vector<int> labels, LabelModel label_model);

    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<int>& labels() const noexcept { return labels_; }
    double log_partition() const noexcept { return session_.log_partition(); }

    /// Exact change of ln Z if node i took `new_label`; nothing is committed.
    /// Falls back to a full recomputation when the rank-1 path faults.
    double flip_delta(std::size_t i, int new_label) const;
    /// First-order estimate of the same change from the maintained inverse.
    double linearized_delta(std::size_t i, int new_label) const;
    void commit(std::size_t i, int new_label);
    /// ln Z rebuilt from scratch for the current labels.
    double recompute() const;

private:
    std::vector<treemath::LogdetSession::Edit> edits_for(std::size_t i, int new_label) const;
    void check_flip(std::size_t i, int new_label) const;

    Matrix base_;
    Vector base_root_;
    std::vector<int> labels_;
    LabelModel lm_;
    treemath::LogdetSession session_;
};

struct InferenceOptions {
    int restarts = 1;
    int max_sweeps = 50;
    std::uint64_t seed = 0;
    /// Commit threshold on the exact ln Z change.
    double min_gain = 1e-9;
    /// Multiplies the Gaussian conditional covariance before inference.
    double conditional_scale = 1.0;
    /// Rounds of (refit theta with labels fixed, re-run flips); 0 keeps theta frozen.
    int joint_rounds = 0;
    likelihood::FitOptions joint_fit;
    /// Exact ln Z change of every alternative label after the last sweep.
    bool final_deltas = false;
};

struct InferenceResult {
    std::vector<int> labels;
    double log_partition = 0.0;
    int sweeps = 0;       // in the returned restart
    int flips = 0;        // committed flips in the returned restart
    int restart = 0;      // index of the returned restart
    Matrix deltas;        // T x K when final_deltas; 0 for observed nodes and the current label
    std::unique_ptr<models::MutationModel> model;  // refit model when joint_rounds > 0
};

InferenceResult greedy_label_inference(const Matrix& X, const std::vector<int>& y_partial,
                                       const models::MutationModel& model, const LabelModel& label_model,
                                       const InferenceOptions& options = {});

/// Labels mutated along `tree`: the root label is uniform and every child
/// keeps its parent's label with probability alpha.
std::vector<int> sample_labels(const treemath::OutTree& tree, const LabelModel& labels, Rng& rng);

/// Predict the most frequent observed label everywhere (ties: smallest label).
std::vector<int> majority_baseline(const std::vector<int>& y_partial, int K);

struct AlphaSelection {
    double alpha = 0.0;
    std::vector<double> accuracy;   // per grid value, pooled over folds
    std::vector<double> log_score;  // mean held-out log p(true label | rest)
};

/// Hides each of `folds` disjoint groups of observed labels in turn, infers
/// them for every alpha and returns the alpha with the best held-out
/// accuracy. Accuracy ties are broken by the held-out log score, where
/// p(label | rest) is proportional to exp of the exact ln Z change of each
/// alternative at the inferred completion; remaining ties go to the alpha
/// nearest 0.5.
/// Index of the selected alpha: best accuracy, then best log score, then
/// nearest 0.5, then smallest.
std::size_t select_alpha(const std::vector<double>& grid, const std::vector<double>& accuracy,
                         const std::vector<double>& log_score);

AlphaSelection cross_validate_alpha(const Matrix& X, const std::vector<int>& y_partial,
                                    const models::MutationModel& model, int K, const std::vector<double>& grid,
                                    int folds, const InferenceOptions& options = {});

}  // namespace outtree::semisup
