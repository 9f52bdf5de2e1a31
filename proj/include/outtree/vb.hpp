#pragma once

// Variational Bayes for the tabular model with Dirichlet priors.
//
// Factorization q(r) q_r(T_r) q_c(theta_c). The root parameters are
// integrated exactly: a single root observation has Dirichlet-marginal
// evidence m(X_r) = prod_d a0_d(x_rd) / sum(a0_d) under the prior root
// counts. The conditional tables get a Dirichlet posterior per parent value.
//
//   ELBO = sum_r q(r) [ln m(X_r) + E_{q_r} sum_edges ln beta~ + H(q_r)]
//          + H(q) - KL(q_c || p_c) - (T-1) ln T
//
// with ln beta~(u, v) = sum_d psi(A_d(x_u, x_v)) - psi(sum_a A_d(a, x_v)).

#include "outtree/document.hpp"
#include "outtree/treemath.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace outtree::vb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Per dimension: root counts (length K_d) and conditional counts
/// (K_d x K_d, column b = counts over child values given parent value b).
struct DirichletCounts {
    std::vector<Vector> root;
    std::vector<Matrix> conditional;

    std::size_t dim() const noexcept { return root.size(); }
    std::vector<int> alphabet() const;
    /// Throws DataError unless every count is finite and > 0 and shapes agree.
    void validate() const;

    /// Same counts `c` everywhere.
    static DirichletCounts symmetric(const std::vector<int>& alphabet, double c);
};

using DirichletPrior = DirichletCounts;

/// Integer categories of the data, checked against the alphabet.
std::vector<std::vector<int>> categories(const Matrix& data, const std::vector<int>& alphabet);

struct ExpectedLogWeights {
    treemath::WeightMatrix beta;  // ln beta~
    Vector root;                  // sum_d E[ln theta_root(x_r)] under the root counts
};

ExpectedLogWeights expected_log_weights(const Matrix& data, const DirichletCounts& counts);

/// ln m(X_r) under the prior root counts.
Vector log_root_evidence(const Matrix& data, const DirichletPrior& prior);

/// Per-root tree posteriors q_r for fixed beta~.
struct RootedPosteriors {
    std::vector<Matrix> P;   // P[r](u, v) = q_r(edge v -> u)
    Vector entropy;          // H(q_r)
    Vector log_Zr;           // ln Z~_r
};
RootedPosteriors rooted_posteriors(const treemath::WeightMatrix& beta_tilde);

struct VariationalState {
    DirichletCounts counts;
    Vector q_root;
    Matrix log_beta_tilde;
    RootedPosteriors rooted;
    Matrix W;  // sum_r q(r) P_r
    double elbo = 0.0;
};

/// The two routes to ln q(r) (unnormalized): the literal one from the
/// entropy and expected log weights, and ln m(X_r) + ln Z~_r.
struct RootUpdate {
    Vector literal;
    Vector simplified;
    Vector q_root;  // normalized from `simplified`
};
RootUpdate update_q_root(const treemath::WeightMatrix& beta_tilde, const RootedPosteriors& rooted,
                         const Vector& log_root_evidence);

/// Prior plus expected edge (and root) sufficient statistics.
DirichletCounts update_q_c(const Matrix& data, const DirichletPrior& prior, const Vector& q_root,
                           const std::vector<Matrix>& per_root_marginals);

/// sum_b KL(Dir(A(:, b)) || Dir(A0(:, b))) over every dimension, conditional tables only.
double dirichlet_kl(const DirichletCounts& posterior, const DirichletPrior& prior);

double elbo(const VariationalState& state, const Matrix& data, const DirichletPrior& prior);

/// State with the given counts, beta~ and q_r from those counts, and q_root
/// (uniform when empty).
VariationalState make_state(const Matrix& data, const DirichletPrior& prior, const DirichletCounts& counts,
                            const Vector& q_root = {});

struct VbOptions {
    int max_rounds = 200;
    double tol = 1e-8;
    double slack = 1e-10;
};

struct VbTrace {
    VariationalState state;
    std::vector<double> elbo;  // entry 0 is the initial state
    bool converged = false;
};

/// Round-robin q_c, beta~, q_r, q_root. Throws NumericalFault if the bound
/// ever decreases by more than `slack`.
VbTrace vb_fit(const Matrix& data, const DirichletPrior& prior, const VbOptions& options = {},
               const std::optional<VariationalState>& start = std::nullopt);

/// Exact ln p(X) by enumerating every out-tree with closed-form Dirichlet
/// integrals. T <= 6.
double exact_log_evidence(const Matrix& data, const DirichletPrior& prior);

Document checkpoint_document(const VbTrace& trace, const DirichletPrior& prior);
/// Restores (prior, state, trace). The state is rebuilt from the saved
/// counts and q_root.
struct Checkpoint {
    DirichletPrior prior;
    DirichletCounts counts;
    Vector q_root;
    std::vector<double> elbo;
};
Checkpoint checkpoint_from_document(const Document& doc);

}  // namespace outtree::vb
