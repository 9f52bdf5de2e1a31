#pragma once

// Partition functions over rooted out-trees (directed matrix-tree theorem).
//
// Weight convention: entry (u, v) of a weight matrix is the weight of the
// edge v -> u, i.e. child u attached to parent v. The out-Laplacian is
// Q = diag(row sums) - beta, and the cofactor of Q at r (row r and column r
// deleted) is the total weight of out-trees rooted at r.
//
// All determinants are evaluated in the log domain. Partition values come
// from an elimination that only adds nonnegative terms, so they keep full
// relative accuracy even when the Laplacian is close to singular. Inverses
// (for gradients and rank-1 edits) come from an LU factorization of the
// augmented Laplacian with its rows equilibrated.

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace outtree::treemath {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// T x T nonnegative edge weights with a structurally zero diagonal.
/// Held in the log domain; -inf marks a zero weight.
class WeightMatrix {
public:
    /// From linear weights. Rejects T < 2, negative or non-finite entries and
    /// a nonzero diagonal.
    static WeightMatrix from_weights(const Matrix& beta);
    /// From log weights. The diagonal is ignored and forced to -inf; +inf and
    /// NaN entries are rejected.
    static WeightMatrix from_log(Matrix log_beta);

    std::size_t size() const noexcept { return static_cast<std::size_t>(log_.rows()); }
    const Matrix& log_weights() const noexcept { return log_; }
    double log_weight(std::size_t child, std::size_t parent) const {
        return log_(static_cast<Eigen::Index>(child), static_cast<Eigen::Index>(parent));
    }
    /// Largest finite off-diagonal log weight (0 when every weight is zero).
    double shift() const noexcept { return shift_; }
    /// exp(log_weights - shift): entries in [0, 1].
    Matrix scaled() const;
    /// exp(log_weights). May underflow for raw densities; prefer scaled().
    Matrix weights() const;

private:
    explicit WeightMatrix(Matrix log_beta);
    Matrix log_;
    double shift_ = 0.0;
};

/// Root weights p(X_r), held in the log domain.
class RootWeights {
public:
    static RootWeights from_weights(const Vector& values);
    static RootWeights from_log(Vector log_values);

    std::size_t size() const noexcept { return static_cast<std::size_t>(log_.size()); }
    const Vector& log_values() const noexcept { return log_; }
    /// ln sum_r p(X_r).
    double log_total() const noexcept { return log_total_; }
    /// p(X_r) / sum_r p(X_r).
    Vector normalized() const;

private:
    explicit RootWeights(Vector log_values);
    Vector log_;
    double log_total_ = 0.0;
};

struct OutLaplacian {
    Matrix Q;
};

/// Rooted out-tree over node indices. `parent[root]` is empty.
struct OutTree {
    std::size_t root = 0;
    std::vector<std::optional<std::size_t>> parent;

    std::size_t size() const noexcept { return parent.size(); }
    /// Throws DataError unless exactly one parentless node (the root) exists
    /// and every node reaches it through parent links.
    void validate() const;
    /// Nodes ordered so that every parent precedes its children.
    std::vector<std::size_t> topological_order() const;
    bool operator==(const OutTree&) const = default;
};

struct LogPartition {
    double log_Z = 0.0;
    std::optional<Vector> per_root_log_Zr;
};

struct EdgeMarginals {
    /// W(u, v): posterior probability that edge v -> u is in the tree.
    Matrix W;
    /// P_r for every root when requested; empty otherwise.
    std::vector<Matrix> per_root;
};

/// Per-root posterior edge marginals and log cofactor for one fixed root.
struct RootedMarginals {
    double log_Zr = 0.0;
    Matrix P;
};

/// Q = diag(beta 1) - beta in linear weights.
OutLaplacian build_out_laplacian(const WeightMatrix& beta);

/// ln Z_r for every root; -inf where no out-tree rooted at r has positive weight.
Vector log_partition_per_root(const WeightMatrix& beta);

/// ln Z = ln sum_r p(X_r) Z_r, all cofactors from one O(T^3) elimination.
/// Throws ZeroPartition when no out-tree has positive weight.
LogPartition log_partition(const WeightMatrix& beta, const RootWeights& roots,
                           bool with_per_root = false);

/// ln Z together with its derivatives, all from one inverse of the augmented
/// Laplacian. `edge(u, v)` = d ln Z / d ln beta(u, v) (the edge marginal W)
/// and `root(r)` = d ln Z / d ln p(X_r) (the root posterior).
struct PartitionGradient {
    double log_Z = 0.0;
    Matrix edge;
    Vector root;
};
PartitionGradient partition_gradient(const WeightMatrix& beta, const RootWeights& roots);

/// Exhaustive enumeration of every rooted out-tree. T <= 7.
struct Enumeration {
    LogPartition partition;
    std::vector<OutTree> trees;          // filled when keep_trees
    std::vector<double> tree_log_weights;  // ln(p(X_r) * prod of edge weights)
};
Enumeration brute_force_log_partition(const WeightMatrix& beta, const RootWeights& roots,
                                      bool keep_trees = false);

/// p(X_r) Z_r / Z.
Vector root_posterior(const WeightMatrix& beta, const RootWeights& roots);

EdgeMarginals edge_marginals(const WeightMatrix& beta, const RootWeights& roots,
                             bool want_per_root = false);

/// P_r(u, v) = beta(u, v) d ln Z_r / d beta(u, v). Zero matrix and -inf when Z_r = 0.
RootedMarginals rooted_marginals(const WeightMatrix& beta, std::size_t root);

/// Entropy of the posterior over out-trees rooted at `root`.
double tree_entropy(const WeightMatrix& beta, std::size_t root);

/// Roots from which every node is reachable along positive-weight edges,
/// i.e. exactly the roots with Z_r > 0.
std::vector<bool> spanning_roots(const WeightMatrix& beta);

/// Factored augmented Laplacian with its inverse, updated in place by
/// single-entry weight edits (matrix determinant lemma + Sherman-Morrison).
///
/// Single writer. Refactorizes from scratch once `2T` edits have accumulated.
class LogdetSession {
public:
    struct Edit {
        std::size_t child;
        std::size_t parent;
        double log_beta;  // new log weight of edge parent -> child
    };

    LogdetSession(const WeightMatrix& beta, const RootWeights& roots);

    std::size_t size() const noexcept { return static_cast<std::size_t>(log_beta_.rows()); }
    /// ln det of the (unscaled) augmented Laplacian.
    double log_det() const noexcept { return log_det_; }
    /// ln Z = ln sum_r p(X_r) + log_det().
    double log_partition() const noexcept { return log_total_ + log_det_; }
    double log_weight(std::size_t child, std::size_t parent) const {
        return log_beta_(static_cast<Eigen::Index>(child), static_cast<Eigen::Index>(parent));
    }
    std::size_t edits_since_factorization() const noexcept { return edits_; }
    std::size_t refactor_threshold() const noexcept { return 2 * size(); }

    /// Applies the edits in order. On CapacitanceFault the session is left
    /// exactly as before the call; use `assign` to force the edit. When the
    /// factorization has lost accuracy the edits are assigned and refactorized.
    void apply(std::span<const Edit> edits);
    /// Sets the weights and refactorizes from scratch.
    void assign(std::span<const Edit> edits);
    void refactorize();

    /// First-order change of ln Z for the edits, from the maintained inverse.
    double linearized_delta(std::span<const Edit> edits) const;

    WeightMatrix weights() const { return WeightMatrix::from_log(log_beta_); }

private:
    Matrix log_beta_;
    Vector log_p_;     // normalized root log weights
    double log_total_ = 0.0;
    double global_shift_ = 0.0;
    Vector row_shift_; // log divisor of each Laplacian row
    Matrix scaled_;    // row-equilibrated augmented Laplacian
    Matrix inverse_;
    double log_det_ = 0.0;
    std::size_t edits_ = 0;
    bool well_conditioned_ = true;
};

/// Debug dump: header `# outtree-matrix T=<n>` then tab-separated rows in
/// shortest round-trip decimal.
void write_matrix_tsv(std::ostream& os, const Matrix& m);
Matrix read_matrix_tsv(std::istream& is);

}  // namespace outtree::treemath
