#pragma once

// Mutation models: a root marginal p(X_r) and one stationary parent -> child
// conditional p(X_t | X_parent) shared by every edge of the tree.
//
// Data are T x D matrices, one sample per row. Every model exposes an
// unconstrained flat parameter vector (covariances through Cholesky factors
// with log diagonals, probability tables through log-odds against the last
// category) and analytic gradients of its log densities in that vector.

#include "outtree/document.hpp"
#include "outtree/rng.hpp"
#include "outtree/treemath.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace outtree::models {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ConstVec = Eigen::Ref<const Vector>;
using GradOut = Eigen::Ref<Vector>;

enum class Family { gaussian, tabular, kernel };

std::string family_name(Family f);
Family parse_family(const std::string& name);

class MutationModel {
public:
    virtual ~MutationModel() = default;

    virtual Family family() const noexcept = 0;
    virtual std::size_t dim() const noexcept = 0;

    virtual double log_marginal(ConstVec x) const = 0;
    virtual double log_conditional(ConstVec child, ConstVec parent) const = 0;

    virtual std::size_t num_params() const noexcept = 0;
    virtual Vector param_vector() const = 0;
    virtual std::unique_ptr<MutationModel> with_params(const Vector& theta) const = 0;
    virtual std::unique_ptr<MutationModel> clone() const = 0;

    /// grad += weight * d log_marginal(x) / d theta
    virtual void add_grad_log_marginal(ConstVec x, double weight, GradOut grad) const = 0;
    /// grad += weight * d log_conditional(child, parent) / d theta
    virtual void add_grad_log_conditional(ConstVec child, ConstVec parent, double weight,
                                          GradOut grad) const = 0;

    virtual Vector sample_marginal(Rng& rng) const = 0;
    virtual Vector sample_conditional(ConstVec parent, Rng& rng) const = 0;

    /// (u, v) = log_conditional(X_u, X_v); diagonal -inf.
    virtual Matrix log_conditional_matrix(const Matrix& data) const;
    virtual Vector log_marginal_vector(const Matrix& data) const;

    /// Accumulates sum_{u != v} edge(u, v) grad log_conditional(X_u, X_v)
    /// + sum_r root(r) grad log_marginal(X_r) into `grad`.
    virtual void add_weighted_gradient(const Matrix& data, const Matrix& edge, const Vector& root,
                                       GradOut grad) const;

    /// Penalty subtracted from the likelihood during fitting (zero by default).
    virtual double penalty() const { return 0.0; }
    virtual void add_grad_penalty(GradOut) const {}

    /// Throws DataError if the data cannot be scored by this model.
    virtual void validate_data(const Matrix& data) const;

    /// Family-specific key/value entries for persistence (after family/dim).
    virtual void describe(Document& doc) const = 0;
};

// ------------------------------------------------------------------ Gaussian

struct GaussianParams {
    Vector mu_c;               // child offset
    Vector mu_pi;              // root mean
    Matrix Sigma_c_given_pi;   // regression of child on parent
    Matrix Sigma_cc;           // conditional covariance
    Matrix Sigma_pipi;         // root covariance
};

/// Root N(mu_pi, Sigma_pipi); child N(Sigma_c|pi x_parent + mu_c, Sigma_cc).
class GaussianModel final : public MutationModel {
public:
    explicit GaussianModel(const GaussianParams& params);
    /// From lower Cholesky factors of Sigma_cc and Sigma_pipi.
    static GaussianModel from_cholesky(Vector mu_c, Vector mu_pi, Matrix regression, Matrix chol_cc,
                                       Matrix chol_pipi);

    Family family() const noexcept override { return Family::gaussian; }
    std::size_t dim() const noexcept override { return static_cast<std::size_t>(mu_c_.size()); }
    GaussianParams params() const;
    const Matrix& regression() const noexcept { return regression_; }
    const Matrix& chol_cc() const noexcept { return chol_cc_; }
    const Matrix& chol_pipi() const noexcept { return chol_pipi_; }

    double log_marginal(ConstVec x) const override;
    double log_conditional(ConstVec child, ConstVec parent) const override;

    std::size_t num_params() const noexcept override;
    Vector param_vector() const override;
    std::unique_ptr<MutationModel> with_params(const Vector& theta) const override;
    std::unique_ptr<MutationModel> clone() const override { return std::make_unique<GaussianModel>(*this); }

    void add_grad_log_marginal(ConstVec x, double weight, GradOut grad) const override;
    void add_grad_log_conditional(ConstVec child, ConstVec parent, double weight, GradOut grad) const override;

    Vector sample_marginal(Rng& rng) const override;
    Vector sample_conditional(ConstVec parent, Rng& rng) const override;

    Matrix log_conditional_matrix(const Matrix& data) const override;
    void add_weighted_gradient(const Matrix& data, const Matrix& edge, const Vector& root,
                               GradOut grad) const override;

    /// Same model with the conditional covariance multiplied by `factor`.
    GaussianModel with_conditional_scale(double factor) const;

    void describe(Document& doc) const override;

private:
    GaussianModel() = default;
    void finish();

    Vector mu_c_, mu_pi_;
    Matrix regression_;
    Matrix chol_cc_, chol_pipi_;  // lower Cholesky factors
    double log_norm_cc_ = 0.0, log_norm_pipi_ = 0.0;
};

struct IidInitOptions {
    /// Ridge epsilon = ridge_scale * trace(cov) / D; 0 disables the ridge.
    double ridge_scale = 1e-6;
};

/// mu_pi = mu_c = sample mean, Sigma_pipi = Sigma_cc = (ridged) maximum
/// likelihood covariance, Sigma_c|pi = 0. The conditional then equals the
/// marginal, so the tree likelihood equals the iid likelihood.
GaussianModel gaussian_init_iid(const Matrix& data, const IidInitOptions& options = {});

// ------------------------------------------------------------------- Tabular

struct TabularParams {
    std::vector<Vector> root;         // per dimension, K_d probabilities
    std::vector<Matrix> conditional;  // per dimension, K_d x K_d; column b = p(child | parent b)
};

/// Discrete attributes; dimension d of the child depends only on dimension d
/// of the parent. Values are integers in [0, K_d), stored as doubles.
class TabularModel final : public MutationModel {
public:
    explicit TabularModel(TabularParams params);

    Family family() const noexcept override { return Family::tabular; }
    std::size_t dim() const noexcept override { return params_.root.size(); }
    const TabularParams& params() const noexcept { return params_; }
    std::vector<int> alphabet() const;

    double log_marginal(ConstVec x) const override;
    double log_conditional(ConstVec child, ConstVec parent) const override;

    std::size_t num_params() const noexcept override { return num_params_; }
    Vector param_vector() const override;
    std::unique_ptr<MutationModel> with_params(const Vector& theta) const override;
    std::unique_ptr<MutationModel> clone() const override { return std::make_unique<TabularModel>(*this); }

    void add_grad_log_marginal(ConstVec x, double weight, GradOut grad) const override;
    void add_grad_log_conditional(ConstVec child, ConstVec parent, double weight, GradOut grad) const override;

    Vector sample_marginal(Rng& rng) const override;
    Vector sample_conditional(ConstVec parent, Rng& rng) const override;

    void validate_data(const Matrix& data) const override;
    void describe(Document& doc) const override;

    /// Builds a model from a flat vector for the given alphabet sizes.
    static TabularModel from_vector(const std::vector<int>& alphabet, const Vector& theta);

private:
    void finish();

    TabularParams params_;
    std::vector<Vector> log_root_;
    std::vector<Matrix> log_cond_;
    std::vector<std::size_t> offset_;  // start of dimension d in the flat vector
    std::size_t num_params_ = 0;
};

/// Root table = smoothed frequencies; every conditional column = root table.
TabularModel tabular_init_iid(const Matrix& data, const std::vector<int>& alphabet, double smoothing = 0.5);

/// Integer category of `x` checked against [0, k).
int category(double x, int k);

// -------------------------------------------------------------------- Kernel

enum class KernelKind { rbf, linear };

struct Kernel {
    KernelKind kind = KernelKind::rbf;
    double bandwidth = 1.0;  // RBF: k(x, y) = exp(-|x - y|^2 / (2 bandwidth^2))
    double operator()(ConstVec x, ConstVec y) const;
};

struct KernelConditionalParams {
    Kernel kernel;
    Matrix alpha;    // anchors x D
    Vector mu;       // D
    Vector sigma;    // D standard deviations
    Matrix anchors;  // anchors x D
    Vector root_mean;   // root marginal N(root_mean, root_cov)
    Matrix root_cov;
    double l2_penalty = 1e-3;  // lambda * |alpha|^2 during fitting
};

/// Child dimension d ~ N(sum_t alpha(t, d) k(parent, anchor_t) + mu_d, sigma_d^2).
/// The bandwidth is the last flat parameter (as its log) for RBF kernels; its
/// gradient is a central finite difference.
class KernelModel final : public MutationModel {
public:
    explicit KernelModel(KernelConditionalParams params);
    /// `root_cov` is ignored and rebuilt from the lower Cholesky factor.
    KernelModel(KernelConditionalParams params, Matrix chol_root);

    Family family() const noexcept override { return Family::kernel; }
    std::size_t dim() const noexcept override { return static_cast<std::size_t>(p_.mu.size()); }
    const KernelConditionalParams& params() const noexcept { return p_; }

    double log_marginal(ConstVec x) const override;
    double log_conditional(ConstVec child, ConstVec parent) const override;
    /// Kernel-regression mean for a parent.
    Vector conditional_mean(ConstVec parent) const;

    std::size_t num_params() const noexcept override;
    Vector param_vector() const override;
    std::unique_ptr<MutationModel> with_params(const Vector& theta) const override;
    std::unique_ptr<MutationModel> clone() const override { return std::make_unique<KernelModel>(*this); }

    void add_grad_log_marginal(ConstVec x, double weight, GradOut grad) const override;
    void add_grad_log_conditional(ConstVec child, ConstVec parent, double weight, GradOut grad) const override;

    Vector sample_marginal(Rng& rng) const override;
    Vector sample_conditional(ConstVec parent, Rng& rng) const override;

    Matrix log_conditional_matrix(const Matrix& data) const override;
    void add_weighted_gradient(const Matrix& data, const Matrix& edge, const Vector& root,
                               GradOut grad) const override;

    double penalty() const override;
    void add_grad_penalty(GradOut grad) const override;

    void describe(Document& doc) const override;

private:
    void finish();
    double log_conditional_with(const Kernel& k, ConstVec child, ConstVec parent) const;
    Matrix log_conditional_matrix_with(const Kernel& k, const Matrix& data) const;

    KernelConditionalParams p_;
    Matrix chol_root_;
    double log_norm_root_ = 0.0;
};

/// alpha = 0, mu / sigma = per-dimension sample moments, root = iid Gaussian,
/// anchors = the data. A bandwidth <= 0 selects the median pairwise distance.
KernelModel kernel_init_iid(const Matrix& data, Kernel kernel, double l2_penalty = 1e-3);

// ----------------------------------------------------------------- utilities

/// log beta(u, v) = log_conditional(X_u, X_v), root weights = log_marginal(X_r).
/// DataError naming the offending pair on any non-finite log density.
std::pair<treemath::WeightMatrix, treemath::RootWeights> build_beta(const Matrix& data,
                                                                   const MutationModel& model);

/// Per-parameter derivative matrices of every log weight.
struct LogWeightGradients {
    std::vector<Matrix> edge;  // edge[i](u, v) = d log beta(u, v) / d theta_i
    Matrix root;               // root(i, r) = d log p(X_r) / d theta_i
};
LogWeightGradients grad_log_weights(const Matrix& data, const MutationModel& model);

void save_model(std::ostream& os, const MutationModel& model);
std::unique_ptr<MutationModel> load_model(std::istream& is);
Document model_document(const MutationModel& model);
std::unique_ptr<MutationModel> model_from_document(const Document& doc);

/// Maximum-likelihood mean and covariance (divisor T).
std::pair<Vector, Matrix> sample_moments(const Matrix& data);

}  // namespace outtree::models
