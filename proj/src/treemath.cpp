#include "outtree/treemath.hpp"

#include "outtree/errors.hpp"
#include "outtree/format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

namespace outtree::treemath {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Index = Eigen::Index;

Index ix(std::size_t i) { return static_cast<Index>(i); }

double logsumexp(const double* first, std::size_t n, std::size_t stride = 1) {
    double hi = kNegInf;
    for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, first[i * stride]);
    if (hi == kNegInf) return kNegInf;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::exp(first[i * stride] - hi);
    return hi + std::log(acc);
}

double logsumexp(const Vector& v) { return logsumexp(v.data(), static_cast<std::size_t>(v.size())); }

/// ln of every row sum of the weight matrix (the Laplacian diagonal).
Vector row_log_sums(const Matrix& log_beta) {
    const Index n = log_beta.rows();
    Vector out(n);
    for (Index u = 0; u < n; ++u) {
        double hi = kNegInf;
        for (Index v = 0; v < n; ++v) hi = std::max(hi, log_beta(u, v));
        if (hi == kNegInf) {
            out(u) = kNegInf;
            continue;
        }
        double acc = 0.0;
        for (Index v = 0; v < n; ++v) acc += std::exp(log_beta(u, v) - hi);
        out(u) = hi + std::log(acc);
    }
    return out;
}

struct LogDet {
    double log_abs = kNegInf;
    int sign = 0;
};

LogDet log_determinant(const Eigen::PartialPivLU<Matrix>& lu) {
    const Matrix& f = lu.matrixLU();
    LogDet out;
    int sign = static_cast<int>(lu.permutationP().determinant());
    double acc = 0.0;
    for (Index i = 0; i < f.rows(); ++i) {
        const double d = f(i, i);
        if (d == 0.0 || !std::isfinite(d)) return out;
        if (d < 0.0) sign = -sign;
        acc += std::log(std::abs(d));
    }
    out.log_abs = acc;
    out.sign = sign;
    return out;
}

/// Maps node index to its position in the cofactor with `root` removed.
inline Index reduced(std::size_t node, std::size_t root) {
    return ix(node < root ? node : node - 1);
}

/// Row-equilibrated cofactor [Q]_r; `shift` receives the summed log row divisors.
Matrix build_cofactor(const Matrix& log_beta, const Vector& row_lse, std::size_t root,
                      double& shift) {
    const std::size_t n = static_cast<std::size_t>(log_beta.rows());
    Matrix S = Matrix::Zero(ix(n - 1), ix(n - 1));
    shift = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
        if (u == root) continue;
        const double m = row_lse(ix(u));
        shift += m;
        const Index iu = reduced(u, root);
        double diag = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            if (v == u) continue;
            const double w = std::exp(log_beta(ix(u), ix(v)) - m);
            diag += w;
            if (v != root) S(iu, reduced(v, root)) = -w;
        }
        S(iu, iu) = diag;
    }
    return S;
}

struct Augmented {
    Matrix S;
    double global_shift = 0.0;  // subtracted from every log weight
    Vector row_shift;           // log divisor of each Laplacian row (size T)
    double log_det_offset = 0.0;  // ln det(unscaled) - ln det(S)
};

/// Global log shift for the weights before the augmented matrix is formed.
///
/// The determinant is linear in the rank-1 root border, so when the border is
/// negligible next to the Laplacian block the factorization cannot resolve
/// it. The shift puts max_u (p_u / rowsum_u) * max_r p_r at one.
double balancing_shift(const Vector& row_lse, const Vector& log_p, double fallback) {
    double best = kNegInf;
    double top_p = kNegInf;
    for (Index u = 0; u < log_p.size(); ++u) {
        top_p = std::max(top_p, log_p(u));
        if (std::isfinite(row_lse(u)) && std::isfinite(log_p(u))) best = std::max(best, log_p(u) - row_lse(u));
    }
    if (best == kNegInf) return fallback;
    return -best - top_p;
}

Augmented build_augmented(const Matrix& log_beta, const Vector& log_p, const double* shift = nullptr) {
    const Index n = log_beta.rows();
    const Vector row_lse = row_log_sums(log_beta);
    Augmented a;
    if (shift) {
        a.global_shift = *shift;
    } else {
        double top = kNegInf;
        for (Index u = 0; u < n; ++u) top = std::max(top, row_lse(u));
        a.global_shift = balancing_shift(row_lse, log_p, std::isfinite(top) ? top : 0.0);
    }
    const double s = a.global_shift;
    a.S = Matrix::Zero(n + 1, n + 1);
    a.row_shift.resize(n);
    a.log_det_offset = static_cast<double>(n - 1) * s;
    a.S(0, 0) = 1.0;
    for (Index r = 0; r < n; ++r) a.S(0, r + 1) = std::exp(log_p(r));
    for (Index u = 0; u < n; ++u) {
        const double m = std::max(row_lse(u) - s, log_p(u));
        a.row_shift(u) = m;
        a.log_det_offset += m;
        a.S(u + 1, 0) = -std::exp(log_p(u) - m);
        double diag = 0.0;
        for (Index v = 0; v < n; ++v) {
            if (v == u) continue;
            const double w = std::exp(log_beta(u, v) - s - m);
            diag += w;
            a.S(u + 1, v + 1) = -w;
        }
        a.S(u + 1, u + 1) = diag;
    }
    return a;
}

Vector normalized_log(const RootWeights& roots) {
    return roots.log_values().array() - roots.log_total();
}

void check_sizes(const WeightMatrix& beta, const RootWeights& roots) {
    if (beta.size() != roots.size())
        throw DataError("weight matrix is " + std::to_string(beta.size()) + "x" +
                        std::to_string(beta.size()) + " but there are " +
                        std::to_string(roots.size()) + " root weights");
}

void require_positive_partition(const WeightMatrix& beta, const RootWeights& roots) {
    const auto spanning = spanning_roots(beta);
    for (std::size_t r = 0; r < spanning.size(); ++r)
        if (spanning[r] && roots.log_values()(ix(r)) > kNegInf) return;
    throw ZeroPartition("no out-tree has positive weight");
}

/// Cofactor log determinant; NumericalFault on a negative sign.
double cofactor_log_det(const Matrix& log_beta, const Vector& row_lse, std::size_t root,
                        Eigen::PartialPivLU<Matrix>* keep = nullptr) {
    double shift = 0.0;
    Matrix S = build_cofactor(log_beta, row_lse, root, shift);
    if (S.rows() == 0) return 0.0;
    Eigen::PartialPivLU<Matrix> lu(S);
    const LogDet d = log_determinant(lu);
    if (d.sign == 0) return kNegInf;
    if (d.sign < 0)
        throw NumericalFault("negative cofactor determinant at root " + std::to_string(root));
    if (keep) *keep = std::move(lu);
    return d.log_abs + shift;
}


// Cofactors by Kron reduction of the Laplacian (the Grassmann-Taksar-Heyman
// scheme). Nodes T-1 .. 1 are eliminated onto node 0; every pivot is the sum
// of the eliminated node's remaining out-weights and every update adds a
// nonnegative term, so no step cancels. The pivots multiply to the cofactor
// at 0 and back substitution gives the ratios Z_r / Z_0. Rows are first
// divided by their largest weight; that scaling is undone at the end.
//
// Returns nothing when a pivot vanishes (some cofactor is zero or the
// linear pass underflowed).
std::optional<Vector> gth_linear(const Matrix& log_beta, const Vector& log_scale) {
    const Index n = log_beta.rows();
    Matrix R(n, n);
    for (Index u = 0; u < n; ++u)
        for (Index v = 0; v < n; ++v) R(u, v) = u == v ? 0.0 : std::exp(log_beta(u, v) - log_scale(u));
    Vector log_piv(n);
    log_piv(0) = 0.0;
    for (Index k = n - 1; k >= 1; --k) {
        const double S = R.row(k).head(k).sum();
        if (!(S > 0.0) || !std::isfinite(S)) return std::nullopt;
        log_piv(k) = std::log(S);
        R.col(k).head(k) /= S;
        R.topLeftCorner(k, k).noalias() += R.col(k).head(k) * R.row(k).head(k);
        R.topLeftCorner(k, k).diagonal().setZero();
    }
    // R(i, j) for i < j now holds the reduced weight i -> j divided by pivot j.
    Vector log_pi(n);
    log_pi(0) = 0.0;
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (Index j = 1; j < n; ++j) {
        for (Index i = 0; i < j; ++i) terms[static_cast<std::size_t>(i)] = log_pi(i) + std::log(R(i, j));
        log_pi(j) = logsumexp(terms.data(), static_cast<std::size_t>(j));
        if (!std::isfinite(log_pi(j))) return std::nullopt;
    }
    return log_pi.array() + log_piv.sum();
}

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Same scheme with every weight held as a logarithm; slower, but exact
// where the linear pass underflows.
std::optional<Vector> gth_log(const Matrix& log_beta, const Vector& log_scale) {
    const Index n = log_beta.rows();
    Matrix L(n, n);
    for (Index u = 0; u < n; ++u)
        for (Index v = 0; v < n; ++v) L(u, v) = u == v ? kNegInf : log_beta(u, v) - log_scale(u);
    Vector log_piv(n);
    log_piv(0) = 0.0;
    for (Index k = n - 1; k >= 1; --k) {
        const double S = logsumexp(L.row(k).head(k).eval());
        if (S == kNegInf || !std::isfinite(S)) return std::nullopt;
        log_piv(k) = S;
        for (Index i = 0; i < k; ++i) L(i, k) -= S;
        for (Index i = 0; i < k; ++i) {
            if (L(i, k) == kNegInf) continue;
            for (Index j = 0; j < k; ++j)
                if (j != i) L(i, j) = log_add(L(i, j), L(i, k) + L(k, j));
        }
    }
    Vector log_pi(n);
    log_pi(0) = 0.0;
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (Index j = 1; j < n; ++j) {
        for (Index i = 0; i < j; ++i) terms[static_cast<std::size_t>(i)] = log_pi(i) + L(i, j);
        log_pi(j) = logsumexp(terms.data(), static_cast<std::size_t>(j));
    }
    return log_pi.array() + log_piv.sum();
}

// ln Z_r for every root; -inf where Z_r = 0. The per-root LU path is only
// used when some cofactor vanishes.
Vector log_cofactors(const Matrix& log_beta) {
    const Index n = log_beta.rows();
    if (n == 1) return Vector::Zero(1);
    Vector log_scale(n);
    for (Index u = 0; u < n; ++u) {
        double hi = kNegInf;
        for (Index v = 0; v < n; ++v)
            if (v != u) hi = std::max(hi, log_beta(u, v));
        log_scale(u) = hi;
    }
    if (log_scale.allFinite()) {
        std::optional<Vector> z = gth_linear(log_beta, log_scale);
        if (!z) z = gth_log(log_beta, log_scale);
        if (z) return z->array() + (log_scale.sum() - log_scale.array());
    }
    const Vector row_lse = row_log_sums(log_beta);
    const auto spanning = spanning_roots(WeightMatrix::from_log(log_beta));
    Vector out(n);
    for (Index r = 0; r < n; ++r)
        out(r) = spanning[static_cast<std::size_t>(r)] ? cofactor_log_det(log_beta, row_lse, static_cast<std::size_t>(r)) : kNegInf;
    return out;
}

}  // namespace

// ---------------------------------------------------------------- WeightMatrix

WeightMatrix::WeightMatrix(Matrix log_beta) : log_(std::move(log_beta)) {
    const Index n = log_.rows();
    shift_ = kNegInf;
    for (Index u = 0; u < n; ++u) {
        log_(u, u) = kNegInf;
        for (Index v = 0; v < n; ++v) {
            const double x = log_(u, v);
            if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
                throw DataError("log weight (" + std::to_string(u) + "," + std::to_string(v) +
                                ") is not finite");
            shift_ = std::max(shift_, x);
        }
    }
    if (shift_ == kNegInf) shift_ = 0.0;
}

WeightMatrix WeightMatrix::from_weights(const Matrix& beta) {
    if (beta.rows() != beta.cols()) throw DataError("weight matrix must be square");
    if (beta.rows() < 2) throw DataError("weight matrix needs T >= 2");
    Matrix log_beta(beta.rows(), beta.cols());
    for (Index u = 0; u < beta.rows(); ++u)
        for (Index v = 0; v < beta.cols(); ++v) {
            const double x = beta(u, v);
            if (!std::isfinite(x) || x < 0.0)
                throw DataError("weight (" + std::to_string(u) + "," + std::to_string(v) +
                                ") must be finite and nonnegative");
            if (u == v && x != 0.0) throw DataError("weight matrix diagonal must be zero");
            log_beta(u, v) = x > 0.0 ? std::log(x) : kNegInf;
        }
    return WeightMatrix(std::move(log_beta));
}

WeightMatrix WeightMatrix::from_log(Matrix log_beta) {
    if (log_beta.rows() != log_beta.cols()) throw DataError("weight matrix must be square");
    if (log_beta.rows() < 2) throw DataError("weight matrix needs T >= 2");
    return WeightMatrix(std::move(log_beta));
}

Matrix WeightMatrix::scaled() const { return (log_.array() - shift_).exp().matrix(); }

Matrix WeightMatrix::weights() const { return log_.array().exp().matrix(); }

// ----------------------------------------------------------------- RootWeights

RootWeights::RootWeights(Vector log_values) : log_(std::move(log_values)) {
    for (Index i = 0; i < log_.size(); ++i)
        if (std::isnan(log_(i)) || log_(i) == std::numeric_limits<double>::infinity())
            throw DataError("root log weight " + std::to_string(i) + " is not finite");
    log_total_ = logsumexp(log_);
    if (log_total_ == kNegInf) throw DataError("root weights need a positive entry");
}

RootWeights RootWeights::from_weights(const Vector& values) {
    Vector logs(values.size());
    for (Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values(i)) || values(i) < 0.0)
            throw DataError("root weights must be finite and nonnegative");
        logs(i) = values(i) > 0.0 ? std::log(values(i)) : kNegInf;
    }
    return RootWeights(std::move(logs));
}

RootWeights RootWeights::from_log(Vector log_values) { return RootWeights(std::move(log_values)); }

Vector RootWeights::normalized() const { return (log_.array() - log_total_).exp().matrix(); }

// --------------------------------------------------------------------- OutTree

void OutTree::validate() const {
    const std::size_t n = parent.size();
    if (n == 0) throw DataError("out-tree has no nodes");
    if (root >= n) throw DataError("out-tree root out of range");
    std::size_t parentless = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (!parent[t]) {
            ++parentless;
            if (t != root) throw DataError("node " + std::to_string(t) + " has no parent but is not the root");
        } else if (*parent[t] >= n || *parent[t] == t) {
            throw DataError("node " + std::to_string(t) + " has an invalid parent");
        }
    }
    if (parentless != 1) throw DataError("out-tree must have exactly one root");
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t cur = t;
        std::size_t steps = 0;
        while (parent[cur]) {
            cur = *parent[cur];
            if (++steps > n) throw DataError("out-tree contains a cycle through node " + std::to_string(t));
        }
    }
}

std::vector<std::size_t> OutTree::topological_order() const {
    const std::size_t n = parent.size();
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t t = 0; t < n; ++t)
        if (parent[t]) children[*parent[t]].push_back(t);
    std::vector<std::size_t> order{root};
    order.reserve(n);
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t c : children[order[i]]) order.push_back(c);
    return order;
}

// ------------------------------------------------------------------ operations

OutLaplacian build_out_laplacian(const WeightMatrix& beta) {
    const Matrix b = beta.weights();
    OutLaplacian out;
    out.Q = -b;
    for (Index u = 0; u < b.rows(); ++u) out.Q(u, u) = b.row(u).sum();
    return out;
}

std::vector<bool> spanning_roots(const WeightMatrix& beta) {
    const std::size_t n = beta.size();
    const Matrix& L = beta.log_weights();
    // edge parent -> child exists iff L(child, parent) > -inf
    auto has_edge = [&](std::size_t from, std::size_t to) { return L(ix(to), ix(from)) > kNegInf; };

    // The last DFS tree started in a full traversal contains a "mother" vertex
    // candidate: if any node reaches everything, that candidate does.
    std::vector<bool> seen(n, false);
    std::size_t candidate = 0;
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        candidate = s;
        stack.assign(1, s);
        seen[s] = true;
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            for (std::size_t y = 0; y < n; ++y)
                if (!seen[y] && has_edge(x, y)) {
                    seen[y] = true;
                    stack.push_back(y);
                }
        }
    }
    auto reach = [&](bool forward) {
        std::vector<bool> mark(n, false);
        mark[candidate] = true;
        std::vector<std::size_t> q{candidate};
        for (std::size_t i = 0; i < q.size(); ++i)
            for (std::size_t y = 0; y < n; ++y)
                if (!mark[y] && (forward ? has_edge(q[i], y) : has_edge(y, q[i]))) {
                    mark[y] = true;
                    q.push_back(y);
                }
        return mark;
    };
    const auto fwd = reach(true);
    if (std::find(fwd.begin(), fwd.end(), false) != fwd.end()) return std::vector<bool>(n, false);
    return reach(false);
}

Vector log_partition_per_root(const WeightMatrix& beta) { return log_cofactors(beta.log_weights()); }

LogPartition log_partition(const WeightMatrix& beta, const RootWeights& roots, bool with_per_root) {
    check_sizes(beta, roots);
    require_positive_partition(beta, roots);
    const Vector log_Zr = log_cofactors(beta.log_weights());
    LogPartition out;
    out.log_Z = logsumexp((roots.log_values() + log_Zr).eval());
    if (!std::isfinite(out.log_Z)) throw NumericalFault("log partition is not finite");
    if (with_per_root) out.per_root_log_Zr = log_Zr;
    return out;
}

PartitionGradient partition_gradient(const WeightMatrix& beta, const RootWeights& roots) {
    check_sizes(beta, roots);
    const auto spanning = spanning_roots(beta);
    bool any = false;
    for (std::size_t r = 0; r < spanning.size(); ++r)
        any = any || (spanning[r] && roots.log_values()(ix(r)) > kNegInf);
    if (!any) throw ZeroPartition("no out-tree has positive weight");

    const Index n = ix(beta.size());
    const Vector log_p = normalized_log(roots);
    const Augmented a = build_augmented(beta.log_weights(), log_p);
    Eigen::PartialPivLU<Matrix> lu(a.S);
    const Matrix M = lu.inverse();
    if (!M.allFinite()) throw NumericalFault("augmented Laplacian is singular to working precision");

    PartitionGradient g;
    g.log_Z = logsumexp((roots.log_values() + log_cofactors(beta.log_weights())).eval());
    if (!std::isfinite(g.log_Z)) throw NumericalFault("log partition is not finite");
    g.edge = Matrix::Zero(n, n);
    for (Index u = 0; u < n; ++u)
        for (Index v = 0; v < n; ++v) {
            if (u == v) continue;
            const double w = -a.S(u + 1, v + 1);
            if (w == 0.0) continue;
            g.edge(u, v) = std::clamp(w * (M(u + 1, u + 1) - M(v + 1, u + 1)), 0.0, 1.0);
        }
    // p_r * d ln det / d p_r, through both border entries of the augmented matrix
    Vector pg(n);
    for (Index r = 0; r < n; ++r) pg(r) = a.S(0, r + 1) * M(r + 1, 0) + a.S(r + 1, 0) * M(0, r + 1);
    const double mean = pg.sum();
    g.root.resize(n);
    for (Index r = 0; r < n; ++r) {
        const double p = std::exp(log_p(r));
        g.root(r) = spanning[static_cast<std::size_t>(r)] ? std::max(0.0, p + pg(r) - p * mean) : 0.0;
    }
    const double total = g.root.sum();
    if (total > 0.0) g.root /= total;
    return g;
}

Enumeration brute_force_log_partition(const WeightMatrix& beta, const RootWeights& roots, bool keep_trees) {
    check_sizes(beta, roots);
    const std::size_t n = beta.size();
    if (n > 7) throw ConfigError("brute-force enumeration is limited to T <= 7");
    const Matrix& L = beta.log_weights();
    Enumeration out;
    Vector per_root = Vector::Constant(ix(n), kNegInf);
    std::vector<double> terms;

    std::vector<std::size_t> choice(n, 0);   // index into the n-1 candidate parents
    std::vector<std::size_t> parent(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> root_terms;
        std::fill(choice.begin(), choice.end(), 0);
        for (;;) {
            for (std::size_t u = 0; u < n; ++u)
                if (u != r) parent[u] = choice[u] < u ? choice[u] : choice[u] + 1;
            bool acyclic = true;
            for (std::size_t t = 0; t < n && acyclic; ++t) {
                std::size_t cur = t;
                std::size_t steps = 0;
                while (cur != r) {
                    cur = parent[cur];
                    if (++steps > n) {
                        acyclic = false;
                        break;
                    }
                }
            }
            if (acyclic) {
                double lw = 0.0;
                for (std::size_t u = 0; u < n; ++u)
                    if (u != r) lw += L(ix(u), ix(parent[u]));
                root_terms.push_back(lw);
                if (keep_trees) {
                    OutTree tree;
                    tree.root = r;
                    tree.parent.resize(n);
                    for (std::size_t u = 0; u < n; ++u)
                        if (u != r) tree.parent[u] = parent[u];
                    out.trees.push_back(std::move(tree));
                    out.tree_log_weights.push_back(roots.log_values()(ix(r)) + lw);
                }
            }
            // odometer over non-root nodes
            std::size_t k = 0;
            for (; k < n; ++k) {
                if (k == r) continue;
                if (++choice[k] < n - 1) break;
                choice[k] = 0;
            }
            if (k == n) break;
        }
        per_root(ix(r)) = logsumexp(root_terms.data(), root_terms.size());
        terms.push_back(roots.log_values()(ix(r)) + per_root(ix(r)));
    }
    out.partition.log_Z = logsumexp(terms.data(), terms.size());
    out.partition.per_root_log_Zr = per_root;
    return out;
}

Vector root_posterior(const WeightMatrix& beta, const RootWeights& roots) {
    return partition_gradient(beta, roots).root;
}

RootedMarginals rooted_marginals(const WeightMatrix& beta, std::size_t root) {
    const std::size_t n = beta.size();
    if (root >= n) throw DataError("root index out of range");
    RootedMarginals out;
    out.P = Matrix::Zero(ix(n), ix(n));
    if (!spanning_roots(beta)[root]) {
        out.log_Zr = kNegInf;
        return out;
    }
    const Matrix& L = beta.log_weights();
    const Vector row_lse = row_log_sums(L);
    Eigen::PartialPivLU<Matrix> lu;
    out.log_Zr = cofactor_log_det(L, row_lse, root, &lu);
    if (n == 1) return out;
    const Matrix Minv = lu.inverse();
    for (std::size_t u = 0; u < n; ++u) {
        if (u == root) continue;
        const Index iu = reduced(u, root);
        for (std::size_t v = 0; v < n; ++v) {
            if (v == u) continue;
            const double w = std::exp(L(ix(u), ix(v)) - row_lse(ix(u)));
            if (w == 0.0) continue;
            double sens = Minv(iu, iu);
            if (v != root) sens -= Minv(reduced(v, root), iu);
            out.P(ix(u), ix(v)) = std::clamp(w * sens, 0.0, 1.0);
        }
    }
    return out;
}

EdgeMarginals edge_marginals(const WeightMatrix& beta, const RootWeights& roots, bool want_per_root) {
    check_sizes(beta, roots);
    EdgeMarginals out;
    if (!want_per_root) {
        out.W = partition_gradient(beta, roots).edge;
        return out;
    }
    require_positive_partition(beta, roots);
    const std::size_t n = beta.size();
    Vector log_post(ix(n));
    out.per_root.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        RootedMarginals rm = rooted_marginals(beta, r);
        log_post(ix(r)) = roots.log_values()(ix(r)) + rm.log_Zr;
        out.per_root.push_back(std::move(rm.P));
    }
    const double total = logsumexp(log_post);
    out.W = Matrix::Zero(ix(n), ix(n));
    for (std::size_t r = 0; r < n; ++r) {
        const double q = std::exp(log_post(ix(r)) - total);
        if (q > 0.0) out.W += q * out.per_root[r];
    }
    return out;
}

double tree_entropy(const WeightMatrix& beta, std::size_t root) {
    const RootedMarginals rm = rooted_marginals(beta, root);
    if (rm.log_Zr == kNegInf) throw ZeroPartition("no out-tree rooted at " + std::to_string(root) + " has positive weight");
    const Matrix& L = beta.log_weights();
    double expected = 0.0;
    for (Index u = 0; u < L.rows(); ++u)
        for (Index v = 0; v < L.cols(); ++v)
            if (rm.P(u, v) > 0.0) expected += rm.P(u, v) * L(u, v);
    return rm.log_Zr - expected;
}

// --------------------------------------------------------------- LogdetSession

LogdetSession::LogdetSession(const WeightMatrix& beta, const RootWeights& roots)
    : log_beta_(beta.log_weights()), log_p_(normalized_log(roots)), log_total_(roots.log_total()) {
    check_sizes(beta, roots);
    refactorize();
}

void LogdetSession::refactorize() {
    require_positive_partition(WeightMatrix::from_log(log_beta_), RootWeights::from_log(log_p_));
    const double exact = logsumexp((log_p_ + log_cofactors(log_beta_)).eval());
    if (!std::isfinite(exact)) throw NumericalFault("log partition is not finite");
    Augmented a = build_augmented(log_beta_, log_p_);
    Eigen::PartialPivLU<Matrix> lu(a.S);
    const LogDet d = log_determinant(lu);
    inverse_ = lu.inverse();
    // Rank-1 updates are trusted only while the factorization reproduces
    // the cancellation-free value.
    well_conditioned_ = d.sign > 0 && inverse_.allFinite() && std::abs(d.log_abs + a.log_det_offset - exact) < 1e-9;
    scaled_ = std::move(a.S);
    global_shift_ = a.global_shift;
    row_shift_ = std::move(a.row_shift);
    log_det_ = exact;
    edits_ = 0;
}

void LogdetSession::apply(std::span<const Edit> edits) {
    if (edits.empty()) return;
    const std::size_t n = size();
    for (const Edit& e : edits)
        if (e.child >= n || e.parent >= n || e.child == e.parent || std::isnan(e.log_beta) ||
            e.log_beta == std::numeric_limits<double>::infinity())
            throw DataError("invalid weight edit");

    if (!well_conditioned_) {
        assign(edits);
        return;
    }
    Matrix saved_log = log_beta_;
    Matrix saved_scaled = scaled_;
    Matrix saved_inverse = inverse_;
    const double saved_det = log_det_;
    const std::size_t saved_edits = edits_;
    bool warn = false;

    Vector col(ix(n + 1));
    Vector row(ix(n + 1));
    for (const Edit& e : edits) {
        const Index a = ix(e.child) + 1;
        const Index b = ix(e.parent) + 1;
        const double m = global_shift_ + row_shift_(a - 1);
        const double delta = std::exp(e.log_beta - m) - std::exp(log_beta_(a - 1, b - 1) - m);
        log_beta_(a - 1, b - 1) = e.log_beta;
        ++edits_;
        if (delta == 0.0) continue;
        const double cap = 1.0 + delta * (inverse_(a, a) - inverse_(b, a));
        if (!(cap > 0.0) || !std::isfinite(cap)) {
            log_beta_ = std::move(saved_log);
            scaled_ = std::move(saved_scaled);
            inverse_ = std::move(saved_inverse);
            log_det_ = saved_det;
            edits_ = saved_edits;
            throw CapacitanceFault("rank-1 edit crosses a singularity; recompute from scratch");
        }
        if (cap < 1e-6) warn = true;
        log_det_ += std::log(cap);
        col = inverse_.col(a);
        row = inverse_.row(a) - inverse_.row(b);
        inverse_.noalias() -= (delta / cap) * col * row.transpose();
        scaled_(a, a) += delta;
        scaled_(a, b) -= delta;
    }
    if (warn || edits_ >= refactor_threshold()) refactorize();
}

void LogdetSession::assign(std::span<const Edit> edits) {
    const std::size_t n = size();
    for (const Edit& e : edits) {
        if (e.child >= n || e.parent >= n || e.child == e.parent) throw DataError("invalid weight edit");
        log_beta_(ix(e.child), ix(e.parent)) = e.log_beta;
    }
    refactorize();
}

double LogdetSession::linearized_delta(std::span<const Edit> edits) const {
    double total = 0.0;
    for (const Edit& e : edits) {
        const Index a = ix(e.child) + 1;
        const Index b = ix(e.parent) + 1;
        const double m = global_shift_ + row_shift_(a - 1);
        const double delta = std::exp(e.log_beta - m) - std::exp(log_beta_(a - 1, b - 1) - m);
        total += delta * (inverse_(a, a) - inverse_(b, a));
    }
    return total;
}

// ------------------------------------------------------------------- debug I/O

void write_matrix_tsv(std::ostream& os, const Matrix& m) {
    os << "# outtree-matrix T=" << m.rows() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) os << '\t';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

Matrix read_matrix_tsv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# outtree-matrix T=", 0) != 0)
        throw DataError("missing '# outtree-matrix T=<n>' header");
    const long n = std::stol(line.substr(19));
    if (n < 0) throw DataError("negative matrix size");
    Matrix m(n, n);
    for (long i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw DataError("matrix dump truncated at row " + std::to_string(i));
        std::stringstream row(line);
        std::string cell;
        long j = 0;
        while (std::getline(row, cell, '\t')) {
            if (j >= n) throw DataError("too many columns in row " + std::to_string(i));
            m(i, j++) = parse_double(cell);
        }
        if (j != n) throw DataError("too few columns in row " + std::to_string(i));
    }
    return m;
}

}  // namespace outtree::treemath
