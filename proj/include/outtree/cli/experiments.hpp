#pragma once

// Synthetic experiment protocols: spiral density estimation against the
// Parzen and mixture baselines, and semi-supervised label inference on
// labels mutated along a latent tree.

#include "outtree/models.hpp"
#include "outtree/rng.hpp"

#include <cstdint>
#include <vector>

namespace outtree::cli {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ------------------------------------------------------------------ spiral

struct SpiralSpec {
    std::size_t T = 600;
    double noise = 0.2;
    double turns = 2.0;
    static constexpr int D = 3;

    void validate() const;
};

/// (s cos s, s sin s, s) with s uniform on [0, 2 pi turns], plus isotropic
/// Gaussian noise of standard deviation `noise`.
Matrix gen_spiral(const SpiralSpec& spec, const Rng& rng);

Vector spiral_point(double s);

/// Euclidean distance from x to the noise-free curve.
double distance_to_spiral(const Vector& x, double turns);

// --------------------------------------------------------------- utilities

/// Centred rows projected on the top-k principal axes of the sample
/// covariance (exact eigendecomposition; each axis signed so that its
/// largest-magnitude entry is positive).
Matrix pca_project(const Matrix& X, int k);

/// Root N(mean, ridged covariance); child N(parent, sigma^2 I).
models::GaussianModel walk_model(const Matrix& data, double sigma);

struct WalkFit {
    models::GaussianModel model;
    double sigma = 0.0;
    double log_likelihood = 0.0;
};

/// sigma maximizing the tdid likelihood of the isotropic walk: a log grid
/// over [1e-3, 3] times the data scale, refined by golden section.
WalkFit fit_walk(const Matrix& data);

// ------------------------------------------------------------------ spiral

struct SpiralOptions {
    SpiralSpec spec;
    /// Rows to evaluate instead of a generated spiral (any D); empty generates.
    Matrix data;
    int folds = 10;
    /// Unrestricted gradient steps after the walk fit, early-stopped on the
    /// validation block; 0 keeps the walk fit.
    int fit_iters = 0;
    std::vector<double> bandwidth_grid;  // empty: default_bandwidth_grid
    int gmm_k_max = 5;
    int restarts = 10;
    std::uint64_t seed = 0;
};

struct SpiralFold {
    int fold = 0;
    std::size_t n_train = 0, n_validation = 0, n_test = 0;
    double walk_sigma = 0.0;
    double tdid = 0.0;  // test log-likelihood given train
    double gmm1 = 0.0;
    double gmm_best = 0.0;
    int gmm_best_k = 0;
    double parzen = 0.0;
    double parzen_sigma = 0.0;
};

struct Summary {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
};
Summary summarize(const std::vector<double>& xs);

struct SpiralReport {
    Matrix data;
    std::vector<SpiralFold> folds;
    Summary tdid, gmm1, gmm_best, parzen;
};

SpiralReport spiral_experiment(const SpiralOptions& options);

// ---------------------------------------------------------- semi-supervised

struct SemisupOptions {
    std::size_t T = 60;
    int D = 30;
    int K = 2;
    double alpha_true = 0.9;
    double fraction = 0.3;  // labeled share
    double step = 0.3;      // walk step of the generating model
    int pca = 0;            // project attributes to this many axes; 0 keeps them
    std::vector<double> alpha_grid{0.6, 0.7, 0.8, 0.9, 0.95};
    int cv_folds = 4;
    int restarts = 3;
};

struct SemisupRun {
    std::uint64_t seed = 0;
    std::size_t labeled = 0;
    double alpha = 0.0;  // selected by cross-validation
    double walk_sigma = 0.0;
    double accuracy_tree = 0.0;      // on unlabeled nodes
    double accuracy_majority = 0.0;  // on unlabeled nodes
    bool tree_wins() const noexcept { return accuracy_tree > accuracy_majority; }
};

struct SemisupTask {
    Matrix X;
    std::vector<int> truth;
    std::vector<int> observed;
};

SemisupTask semisup_task(const SemisupOptions& options, std::uint64_t seed);
SemisupRun semisup_experiment(const SemisupOptions& options, std::uint64_t seed);

}  // namespace outtree::cli
