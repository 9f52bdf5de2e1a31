#pragma once

// Density baselines: isotropic Parzen windows and Gaussian mixtures by EM.

#include "outtree/rng.hpp"

#include <Eigen/Dense>

#include <vector>

namespace outtree::cli {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// sum over rows of ln (1/n) sum_t N(x | train_t, sigma^2 I).
double parzen_log_likelihood(const Matrix& train, const Matrix& points, double sigma);

/// 25 log-spaced values from 1e-3 to 3 times the data scale sqrt(trace(cov) / D).
std::vector<double> default_bandwidth_grid(const Matrix& train);

struct ParzenResult {
    double sigma = 0.0;
    double validation = 0.0;
    double test = 0.0;
    std::vector<double> grid;
    std::vector<double> validation_curve;
};

/// sigma maximizes the validation score; test rows score against every train row.
ParzenResult baseline_parzen(const Matrix& train, const Matrix& validation, const Matrix& test,
                             std::vector<double> grid = {});

struct Gmm {
    Vector weights;
    std::vector<Vector> means;
    std::vector<Matrix> covs;

    std::size_t components() const noexcept { return means.size(); }
};

double gmm_log_likelihood(const Gmm& model, const Matrix& X);

struct GmmOptions {
    int max_iters = 500;
    double tol = 1e-8;
    /// lambda = ridge_scale * trace(cov) / D; covariances are (S_k + lambda I) / N_k.
    double ridge_scale = 1e-6;
};

struct GmmFit {
    Gmm model;
    /// EM objective per iteration: log-likelihood - sum_k lambda/2 tr(Sigma_k^-1).
    std::vector<double> trace;
    int reseeds = 0;
    bool converged = false;
};

/// One EM run from k-means++ seeds. Components whose responsibility mass
/// collapses are re-seeded at a far point.
GmmFit fit_gmm(const Matrix& X, int k, Rng& rng, const GmmOptions& options = {});

/// Best of `restarts` runs by final objective.
GmmFit fit_gmm_restarts(const Matrix& X, int k, int restarts, const Rng& rng, const GmmOptions& options = {});

struct GmmScore {
    int k = 0;
    double train = 0.0;
    double validation = 0.0;
    double test = 0.0;
};

struct GmmResult {
    std::vector<GmmScore> per_k;
    std::size_t selected = 0;  // best validation score
};

GmmResult baseline_gmm(const Matrix& train, const Matrix& validation, const Matrix& test, int k_max, int restarts,
                       const Rng& rng, const GmmOptions& options = {});

}  // namespace outtree::cli
