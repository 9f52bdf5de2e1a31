#pragma once

// The tree-dependent likelihood
//
//   p(X_1..X_T) = T^-(T-1) sum_r p(X_r) |Q_r|
//
// its gradient in the model's flat parameters, maximum-likelihood fitting
// by backtracking gradient ascent, and the train-conditioned test score.

#include "outtree/models.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace outtree::likelihood {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using models::MutationModel;

/// Additive log-weight offsets (e.g. a label factor) applied on top of the
/// model's log weights. Empty members mean no offset.
struct LogWeightOffset {
    Matrix edge;  // T x T
    Vector root;  // T
};

/// ln Z - (T-1) ln T.
double tdid_log_likelihood(const Matrix& data, const MutationModel& model,
                           const LogWeightOffset* offset = nullptr);

/// sum_t log_marginal(X_t).
double iid_log_likelihood(const Matrix& data, const MutationModel& model);

struct Gradient {
    double value = 0.0;  // tdid log-likelihood
    Vector grad;         // d value / d theta
};

/// Value and gradient from one inverse of the augmented Laplacian:
/// sum_uv W_uv grad log beta_uv + sum_r posterior_r grad log p(X_r).
Gradient grad_tdid(const Matrix& data, const MutationModel& model, const LogWeightOffset* offset = nullptr);

enum class StopReason { grad_tol, max_iters, line_search, early_stop };
std::string stop_reason_name(StopReason r);

struct FitOptions {
    int max_iters = 500;
    double grad_tol = 1e-5;
    double armijo = 1e-4;
    double min_step = 1e-12;
    /// Held-out rows for early stopping; empty disables it.
    Matrix validation;
    /// Iterations without a held-out improvement before stopping.
    int patience = 10;
    /// Optional offsets; must match the training data size.
    const LogWeightOffset* offset = nullptr;
};

struct FitIteration {
    int iteration = 0;
    double objective = 0.0;  // penalized tdid log-likelihood
    double step = 0.0;
    double grad_norm = 0.0;  // sup norm
    std::optional<double> validation;
};

struct FitReport {
    double initial = 0.0;  // objective at model0
    double final = 0.0;
    std::vector<FitIteration> trace;
    StopReason reason = StopReason::max_iters;
    std::unique_ptr<MutationModel> model;
};

/// Maximizes tdid - model.penalty() over the flat parameter vector.
/// The step starts at min(1, twice the last accepted step) and halves until
/// the Armijo condition holds; reaching `min_step` ends the fit.
FitReport fit_ml(const Matrix& data, const MutationModel& model0, const FitOptions& options = {});

/// Writes `iteration objective step grad_norm [validation]` rows.
void write_fit_log(std::ostream& os, const FitReport& report);

struct TestScore {
    double log_score = 0.0;
    double log_Z_union = 0.0;
    double log_Z_train = 0.0;
    double correction = 0.0;  // (T-1) ln T - (T+U-1) ln(T+U)
};

/// ln p(test | train) = ln Z(train + test) - ln Z(train) + correction.
TestScore test_log_likelihood(const Matrix& train, const Matrix& test, const MutationModel& model);

}  // namespace outtree::likelihood
