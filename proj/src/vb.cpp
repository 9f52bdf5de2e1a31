#include "outtree/vb.hpp"

#include "outtree/errors.hpp"
#include "outtree/format.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>

#include <cmath>
#include <string>

namespace outtree::vb {

namespace {

using Index = Eigen::Index;

Index ix(std::size_t i) { return static_cast<Index>(i); }

double log_sum_exp(const Vector& v) {
    const double hi = v.maxCoeff();
    if (!std::isfinite(hi)) return hi;
    return hi + std::log((v.array() - hi).exp().sum());
}

double log_beta_fn(const Vector& a) {
    double s = 0.0;
    for (Index i = 0; i < a.size(); ++i) s += std::lgamma(a(i));
    return s - std::lgamma(a.sum());
}

// ln Gamma(b) - ln Gamma(a) + (a - b) psi(a) >= 0, by its Taylor series in
// a - b when the step is small against a.
double lgamma_bregman(double a, double b) {
    using boost::math::digamma;
    const double delta = a - b;
    if (delta == 0.0) return 0.0;
    if (std::abs(delta) > 0.01 * a) return std::lgamma(b) - std::lgamma(a) + delta * digamma(a);
    double sum = 0.0, power = delta, factorial = 1.0;
    for (int k = 2; k <= 9; ++k) {
        power *= -delta;
        factorial *= k;
        sum += power / factorial * boost::math::polygamma(k - 1, a);
    }
    return -sum;
}

double dirichlet_kl_one(const Vector& a, const Vector& b) {
    double kl = -lgamma_bregman(a.sum(), b.sum());
    for (Index i = 0; i < a.size(); ++i) kl += lgamma_bregman(a(i), b(i));
    return kl;
}

void check_match(const DirichletCounts& a, const DirichletCounts& b) {
    if (a.alphabet() != b.alphabet()) throw DataError("count tables have different alphabets");
}

Matrix mix(const Vector& q_root, const std::vector<Matrix>& P) {
    if (P.empty() || static_cast<std::size_t>(q_root.size()) != P.size())
        throw DataError("q_root and per-root marginals disagree in size");
    Matrix W = Matrix::Zero(P[0].rows(), P[0].cols());
    for (std::size_t r = 0; r < P.size(); ++r) W += q_root(ix(r)) * P[r];
    return W;
}

void check_monotone(double before, double after, double slack, const char* step) {
    if (after < before - slack)
        throw NumericalFault(std::string("variational bound decreased in the ") + step + " update by " +
                             format_double(before - after));
}

}  // namespace

std::vector<int> DirichletCounts::alphabet() const {
    std::vector<int> out;
    for (const auto& r : root) out.push_back(static_cast<int>(r.size()));
    return out;
}

void DirichletCounts::validate() const {
    if (root.empty()) throw DataError("Dirichlet counts need at least one dimension");
    if (conditional.size() != root.size()) throw DataError("root and conditional count tables disagree in number");
    for (std::size_t d = 0; d < root.size(); ++d) {
        const Index K = root[d].size();
        if (K < 2) throw DataError("dimension " + std::to_string(d) + " needs at least two categories");
        if (conditional[d].rows() != K || conditional[d].cols() != K)
            throw DataError("conditional counts of dimension " + std::to_string(d) + " must be " + std::to_string(K) + "x" +
                            std::to_string(K));
        if (!root[d].allFinite() || (root[d].array() <= 0.0).any() || !conditional[d].allFinite() ||
            (conditional[d].array() <= 0.0).any())
            throw DataError("Dirichlet counts of dimension " + std::to_string(d) + " must be finite and positive");
    }
}

DirichletCounts DirichletCounts::symmetric(const std::vector<int>& alphabet, double c) {
    DirichletCounts out;
    for (int K : alphabet) {
        out.root.push_back(Vector::Constant(K, c));
        out.conditional.push_back(Matrix::Constant(K, K, c));
    }
    out.validate();
    return out;
}

std::vector<std::vector<int>> categories(const Matrix& data, const std::vector<int>& alphabet) {
    if (static_cast<std::size_t>(data.cols()) != alphabet.size())
        throw DataError("data has " + std::to_string(data.cols()) + " columns, alphabet has " + std::to_string(alphabet.size()));
    std::vector<std::vector<int>> out(static_cast<std::size_t>(data.rows()), std::vector<int>(alphabet.size()));
    for (Index t = 0; t < data.rows(); ++t)
        for (std::size_t d = 0; d < alphabet.size(); ++d) {
            const double x = data(t, ix(d));
            if (!(x >= 0.0) || x != std::floor(x) || x >= alphabet[d])
                throw DataError("row " + std::to_string(t) + ", column " + std::to_string(d) + ": value " + format_double(x) +
                                " is not a category in [0, " + std::to_string(alphabet[d]) + ")");
            out[static_cast<std::size_t>(t)][d] = static_cast<int>(x);
        }
    return out;
}

ExpectedLogWeights expected_log_weights(const Matrix& data, const DirichletCounts& counts) {
    using boost::math::digamma;
    counts.validate();
    const auto X = categories(data, counts.alphabet());
    const Index T = data.rows();
    if (T < 2) throw DataError("expected log weights need T >= 2");
    std::vector<Matrix> elog(counts.dim());
    std::vector<Vector> elog_root(counts.dim());
    for (std::size_t d = 0; d < counts.dim(); ++d) {
        const Matrix& A = counts.conditional[d];
        elog[d].resize(A.rows(), A.cols());
        for (Index b = 0; b < A.cols(); ++b) {
            const double psi0 = digamma(A.col(b).sum());
            for (Index a = 0; a < A.rows(); ++a) elog[d](a, b) = digamma(A(a, b)) - psi0;
        }
        const Vector& r = counts.root[d];
        const double psi0 = digamma(r.sum());
        elog_root[d] = r.unaryExpr([&](double c) { return digamma(c) - psi0; });
    }
    Matrix L = Matrix::Zero(T, T);
    Vector root = Vector::Zero(T);
    for (Index u = 0; u < T; ++u) {
        const auto& xu = X[static_cast<std::size_t>(u)];
        for (std::size_t d = 0; d < counts.dim(); ++d) root(u) += elog_root[d](xu[d]);
        for (Index v = 0; v < T; ++v) {
            if (u == v) continue;
            const auto& xv = X[static_cast<std::size_t>(v)];
            for (std::size_t d = 0; d < counts.dim(); ++d) L(u, v) += elog[d](xu[d], xv[d]);
        }
    }
    return {treemath::WeightMatrix::from_log(std::move(L)), root};
}

Vector log_root_evidence(const Matrix& data, const DirichletPrior& prior) {
    prior.validate();
    const auto X = categories(data, prior.alphabet());
    Vector out = Vector::Zero(data.rows());
    for (Index t = 0; t < data.rows(); ++t)
        for (std::size_t d = 0; d < prior.dim(); ++d)
            out(t) += std::log(prior.root[d](X[static_cast<std::size_t>(t)][d]) / prior.root[d].sum());
    return out;
}

RootedPosteriors rooted_posteriors(const treemath::WeightMatrix& beta_tilde) {
    const std::size_t T = beta_tilde.size();
    RootedPosteriors out;
    out.P.reserve(T);
    out.entropy.resize(ix(T));
    out.log_Zr.resize(ix(T));
    for (std::size_t r = 0; r < T; ++r) {
        auto m = treemath::rooted_marginals(beta_tilde, r);
        if (!std::isfinite(m.log_Zr)) throw NumericalFault("per-root partition vanished at root " + std::to_string(r));
        out.log_Zr(ix(r)) = m.log_Zr;
        out.P.push_back(std::move(m.P));
        out.entropy(ix(r)) = treemath::tree_entropy(beta_tilde, r);
    }
    return out;
}

RootUpdate update_q_root(const treemath::WeightMatrix& beta_tilde, const RootedPosteriors& rooted,
                         const Vector& log_root_evidence) {
    const Index T = ix(beta_tilde.size());
    if (log_root_evidence.size() != T || rooted.log_Zr.size() != T) throw DataError("root update sizes disagree");
    const Matrix& L = beta_tilde.log_weights();
    RootUpdate out;
    out.literal.resize(T);
    out.simplified = log_root_evidence + rooted.log_Zr;
    for (Index r = 0; r < T; ++r) {
        double expected = 0.0;
        const Matrix& P = rooted.P[static_cast<std::size_t>(r)];
        for (Index u = 0; u < T; ++u)
            for (Index v = 0; v < T; ++v)
                if (u != v && P(u, v) != 0.0) expected += P(u, v) * L(u, v);
        out.literal(r) = rooted.entropy(r) + log_root_evidence(r) + expected;
    }
    const double lse = log_sum_exp(out.simplified);
    if (!std::isfinite(lse)) throw ZeroPartition("every per-root partition is zero");
    out.q_root = (out.simplified.array() - lse).exp();
    return out;
}

DirichletCounts update_q_c(const Matrix& data, const DirichletPrior& prior, const Vector& q_root,
                           const std::vector<Matrix>& per_root_marginals) {
    prior.validate();
    const auto X = categories(data, prior.alphabet());
    const Matrix W = mix(q_root, per_root_marginals);
    const Index T = data.rows();
    if (W.rows() != T) throw DataError("marginals do not match the data rows");
    DirichletCounts out = prior;
    for (Index u = 0; u < T; ++u) {
        const auto& xu = X[static_cast<std::size_t>(u)];
        for (std::size_t d = 0; d < prior.dim(); ++d) out.root[d](xu[d]) += q_root(u);
        for (Index v = 0; v < T; ++v) {
            if (u == v || W(u, v) == 0.0) continue;
            const auto& xv = X[static_cast<std::size_t>(v)];
            for (std::size_t d = 0; d < prior.dim(); ++d) out.conditional[d](xu[d], xv[d]) += W(u, v);
        }
    }
    return out;
}

double dirichlet_kl(const DirichletCounts& posterior, const DirichletPrior& prior) {
    check_match(posterior, prior);
    double kl = 0.0;
    for (std::size_t d = 0; d < prior.dim(); ++d)
        for (Index b = 0; b < prior.conditional[d].cols(); ++b)
            kl += dirichlet_kl_one(posterior.conditional[d].col(b), prior.conditional[d].col(b));
    return kl;
}

double elbo(const VariationalState& state, const Matrix& data, const DirichletPrior& prior) {
    const Index T = data.rows();
    const Vector lm = log_root_evidence(data, prior);
    const Matrix& L = state.log_beta_tilde;
    double total = 0.0;
    for (Index r = 0; r < T; ++r) {
        const double q = state.q_root(r);
        if (q == 0.0) continue;
        const Matrix& P = state.rooted.P[static_cast<std::size_t>(r)];
        double expected = 0.0;
        for (Index u = 0; u < T; ++u)
            for (Index v = 0; v < T; ++v)
                if (u != v && P(u, v) != 0.0) expected += P(u, v) * L(u, v);
        total += q * (lm(r) + expected + state.rooted.entropy(r) - std::log(q));
    }
    total -= dirichlet_kl(state.counts, prior);
    total -= static_cast<double>(T - 1) * std::log(static_cast<double>(T));
    if (!std::isfinite(total)) throw NumericalFault("variational bound is not finite");
    return total;
}

VariationalState make_state(const Matrix& data, const DirichletPrior& prior, const DirichletCounts& counts,
                            const Vector& q_root) {
    prior.validate();
    check_match(counts, prior);
    const Index T = data.rows();
    VariationalState s;
    s.counts = counts;
    const auto e = expected_log_weights(data, counts);
    s.log_beta_tilde = e.beta.log_weights();
    s.rooted = rooted_posteriors(e.beta);
    if (q_root.size() == 0) {
        s.q_root = Vector::Constant(T, 1.0 / static_cast<double>(T));
    } else {
        if (q_root.size() != T || (q_root.array() < 0.0).any() || std::abs(q_root.sum() - 1.0) > 1e-10)
            throw DataError("q_root must be a probability vector of length T");
        s.q_root = q_root;
    }
    s.W = mix(s.q_root, s.rooted.P);
    s.elbo = elbo(s, data, prior);
    return s;
}

VbTrace vb_fit(const Matrix& data, const DirichletPrior& prior, const VbOptions& options,
               const std::optional<VariationalState>& start) {
    if (data.rows() < 2) throw DataError("variational fit needs T >= 2");
    if (options.max_rounds < 0) throw ConfigError("max_rounds must be >= 0");
    if (!(options.tol >= 0.0) || !(options.slack >= 0.0)) throw ConfigError("tol and slack must be >= 0");
    const Vector lm = log_root_evidence(data, prior);
    VbTrace trace;
    trace.state = start ? *start : make_state(data, prior, prior);
    VariationalState& s = trace.state;
    s.elbo = elbo(s, data, prior);
    trace.elbo.push_back(s.elbo);
    for (int round = 0; round < options.max_rounds; ++round) {
        const double before = s.elbo;
        s.counts = update_q_c(data, prior, s.q_root, s.rooted.P);
        const auto e = expected_log_weights(data, s.counts);
        s.log_beta_tilde = e.beta.log_weights();
        double now = elbo(s, data, prior);
        check_monotone(before, now, options.slack, "q_c");
        double prev = now;
        s.rooted = rooted_posteriors(e.beta);
        now = elbo(s, data, prior);
        check_monotone(prev, now, options.slack, "q_r");
        prev = now;
        s.q_root = update_q_root(e.beta, s.rooted, lm).q_root;
        s.W = mix(s.q_root, s.rooted.P);
        now = elbo(s, data, prior);
        check_monotone(prev, now, options.slack, "q_root");
        s.elbo = now;
        trace.elbo.push_back(now);
        if (now - before < options.tol) {
            trace.converged = true;
            break;
        }
    }
    return trace;
}

double exact_log_evidence(const Matrix& data, const DirichletPrior& prior) {
    prior.validate();
    const auto X = categories(data, prior.alphabet());
    const std::size_t T = static_cast<std::size_t>(data.rows());
    if (T < 1 || T > 6) throw ConfigError("exact evidence needs 1 <= T <= 6");
    const Vector lm = log_root_evidence(data, prior);
    if (T == 1) return lm(0);
    const Matrix unit = Matrix::Ones(ix(T), ix(T)) - Matrix::Identity(ix(T), ix(T));
    const auto all = treemath::brute_force_log_partition(treemath::WeightMatrix::from_weights(unit),
                                                         treemath::RootWeights::from_weights(Vector::Ones(ix(T))), true);
    double prior_norm = 0.0;
    for (std::size_t d = 0; d < prior.dim(); ++d)
        for (Index b = 0; b < prior.conditional[d].cols(); ++b) prior_norm += log_beta_fn(prior.conditional[d].col(b));
    Vector terms(ix(all.trees.size()));
    for (std::size_t k = 0; k < all.trees.size(); ++k) {
        const auto& tree = all.trees[k];
        std::vector<Matrix> A = prior.conditional;
        for (std::size_t u = 0; u < T; ++u)
            if (tree.parent[u])
                for (std::size_t d = 0; d < prior.dim(); ++d) A[d](X[u][d], X[*tree.parent[u]][d]) += 1.0;
        double post = 0.0;
        for (std::size_t d = 0; d < prior.dim(); ++d)
            for (Index b = 0; b < A[d].cols(); ++b) post += log_beta_fn(A[d].col(b));
        terms(ix(k)) = lm(ix(tree.root)) + post - prior_norm;
    }
    return log_sum_exp(terms) - static_cast<double>(T - 1) * std::log(static_cast<double>(T));
}

Document checkpoint_document(const VbTrace& trace, const DirichletPrior& prior) {
    Document doc("outtree-vb/1");
    std::vector<std::string> alpha;
    for (int K : prior.alphabet()) alpha.push_back(std::to_string(K));
    doc.add("alphabet", alpha);
    for (std::size_t d = 0; d < prior.dim(); ++d) {
        doc.add("prior_root", vector_tokens(prior.root[d]));
        doc.add("prior_conditional", matrix_tokens(prior.conditional[d]));
    }
    for (std::size_t d = 0; d < prior.dim(); ++d) {
        doc.add("root_counts", vector_tokens(trace.state.counts.root[d]));
        doc.add("conditional_counts", matrix_tokens(trace.state.counts.conditional[d]));
    }
    doc.add("q_root", vector_tokens(trace.state.q_root));
    doc.add("elbo", vector_tokens(Eigen::Map<const Vector>(trace.elbo.data(), ix(trace.elbo.size()))));
    doc.add("converged", trace.converged ? "1" : "0");
    return doc;
}

Checkpoint checkpoint_from_document(const Document& doc) {
    Checkpoint c;
    const auto& alpha = doc.get("alphabet");
    const auto pr = doc.get_all("prior_root");
    const auto pc = doc.get_all("prior_conditional");
    const auto rc = doc.get_all("root_counts");
    const auto cc = doc.get_all("conditional_counts");
    if (pr.size() != alpha.size() || pc.size() != alpha.size() || rc.size() != alpha.size() || cc.size() != alpha.size())
        throw DataError("checkpoint count tables do not match the alphabet");
    for (std::size_t d = 0; d < alpha.size(); ++d) {
        c.prior.root.push_back(vector_from_tokens(*pr[d], "prior_root"));
        c.prior.conditional.push_back(matrix_from_tokens(*pc[d], "prior_conditional"));
        c.counts.root.push_back(vector_from_tokens(*rc[d], "root_counts"));
        c.counts.conditional.push_back(matrix_from_tokens(*cc[d], "conditional_counts"));
        if (static_cast<std::size_t>(c.prior.root.back().size()) != parse_count(alpha[d]))
            throw DataError("checkpoint prior does not match the alphabet");
    }
    c.prior.validate();
    c.counts.validate();
    check_match(c.counts, c.prior);
    c.q_root = vector_from_tokens(doc.get("q_root"), "q_root");
    const Vector e = vector_from_tokens(doc.get("elbo"), "elbo");
    c.elbo.assign(e.data(), e.data() + e.size());
    return c;
}

}  // namespace outtree::vb
