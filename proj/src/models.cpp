#include "outtree/models.hpp"

#include "outtree/errors.hpp"
#include "outtree/format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace outtree::models {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2 pi)
constexpr double kBandwidthStep = 1e-5;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void require_dim(ConstVec x, std::size_t d, const char* what) {
    if (static_cast<std::size_t>(x.size()) != d)
        throw DataError(std::string(what) + ": expected dimension " + std::to_string(d) + ", got " +
                        std::to_string(x.size()));
    if (!x.allFinite()) throw DataError(std::string(what) + ": non-finite input");
}

/// Lower Cholesky factor; ConfigError unless symmetric positive definite.
Matrix cholesky(const Matrix& S, const char* what) {
    if (S.rows() != S.cols()) throw ConfigError(std::string(what) + " must be square");
    if (!S.allFinite()) throw ConfigError(std::string(what) + " has non-finite entries");
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw ConfigError(std::string(what) + " is not symmetric");
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) throw ConfigError(std::string(what) + " is not positive definite");
    Matrix L = llt.matrixL();
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        if (!(L(i, i) > 0.0)) throw ConfigError(std::string(what) + " is not positive definite");
    return L;
}

double log_det_chol(const Matrix& L) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
    return s;
}

std::size_t packed_size(std::size_t d) { return d * (d + 1) / 2; }

void pack_chol(const Matrix& L, Vector& out, std::size_t& k) {
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) out(idx(k++)) = i == j ? std::log(L(i, i)) : L(i, j);
}

Matrix unpack_chol(const Vector& theta, std::size_t d, std::size_t& k) {
    Matrix L = Matrix::Zero(idx(d), idx(d));
    for (Eigen::Index i = 0; i < idx(d); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double t = theta(idx(k++));
            L(i, j) = i == j ? std::exp(t) : t;
        }
    return L;
}

/// Adds weight * (w z^T - diag(1/L)) chain-ruled into the packed factor at `k`.
void add_chol_grad(const Matrix& L, const Vector& w, const Vector& z, double weight, GradOut grad, std::size_t k) {
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double g = i == j ? L(i, i) * w(i) * z(i) - 1.0 : w(i) * z(j);
            grad(idx(k++)) += weight * g;
        }
}

/// Same, from an accumulated sum G = sum_k weight_k w_k z_k^T and total weight.
void add_chol_grad_sum(const Matrix& L, const Matrix& G, double total, GradOut grad, std::size_t k) {
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double g = i == j ? L(i, i) * G(i, i) - total : G(i, j);
            grad(idx(k++)) += g;
        }
}

struct GaussEval {
    Vector z;  // L^-1 r
    Vector w;  // Sigma^-1 r
    double log_density;
};

GaussEval gauss_eval(const Matrix& L, const Vector& r, double log_norm) {
    GaussEval e;
    e.z = L.triangularView<Eigen::Lower>().solve(r);
    e.w = L.transpose().triangularView<Eigen::Upper>().solve(e.z);
    e.log_density = -0.5 * e.z.squaredNorm() - log_norm;
    return e;
}


Matrix without_diagonal(const Matrix& m) {
    Matrix out = m;
    out.diagonal().setZero();
    return out;
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::tabular: return "tabular";
        case Family::kernel: return "kernel";
    }
    return "unknown";
}

Family parse_family(const std::string& name) {
    if (name == "gaussian") return Family::gaussian;
    if (name == "tabular") return Family::tabular;
    if (name == "kernel") return Family::kernel;
    throw ConfigError("unknown model family '" + name + "' (expected gaussian, tabular or kernel)");
}

std::pair<Vector, Matrix> sample_moments(const Matrix& data) {
    if (data.rows() < 1) throw DataError("no samples");
    const Vector mean = data.colwise().mean().transpose();
    const Matrix centered = data.rowwise() - mean.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows());
    return {mean, 0.5 * (cov + cov.transpose())};
}

// --------------------------------------------------------------- base class

Matrix MutationModel::log_conditional_matrix(const Matrix& data) const {
    const Eigen::Index T = data.rows();
    Matrix out(T, T);
    for (Eigen::Index u = 0; u < T; ++u)
        for (Eigen::Index v = 0; v < T; ++v)
            out(u, v) = u == v ? -INFINITY
                               : log_conditional(data.row(u).transpose(), data.row(v).transpose());
    return out;
}

Vector MutationModel::log_marginal_vector(const Matrix& data) const {
    Vector out(data.rows());
    for (Eigen::Index r = 0; r < data.rows(); ++r) out(r) = log_marginal(data.row(r).transpose());
    return out;
}

void MutationModel::add_weighted_gradient(const Matrix& data, const Matrix& edge, const Vector& root,
                                          GradOut grad) const {
    const Eigen::Index T = data.rows();
    for (Eigen::Index u = 0; u < T; ++u)
        for (Eigen::Index v = 0; v < T; ++v)
            if (u != v && edge(u, v) != 0.0)
                add_grad_log_conditional(data.row(u).transpose(), data.row(v).transpose(), edge(u, v), grad);
    for (Eigen::Index r = 0; r < T; ++r)
        if (root(r) != 0.0) add_grad_log_marginal(data.row(r).transpose(), root(r), grad);
}

void MutationModel::validate_data(const Matrix& data) const {
    if (static_cast<std::size_t>(data.cols()) != dim())
        throw DataError("data has " + std::to_string(data.cols()) + " columns, model expects " +
                        std::to_string(dim()));
    if (!data.allFinite()) throw DataError("data contains non-finite values");
}

// ----------------------------------------------------------------- Gaussian

GaussianModel::GaussianModel(const GaussianParams& p) {
    const Eigen::Index D = p.mu_c.size();
    if (D < 1) throw ConfigError("Gaussian model needs D >= 1");
    if (p.mu_pi.size() != D || p.Sigma_c_given_pi.rows() != D || p.Sigma_c_given_pi.cols() != D ||
        p.Sigma_cc.rows() != D || p.Sigma_pipi.rows() != D)
        throw ConfigError("Gaussian parameter shapes disagree");
    if (!p.mu_c.allFinite() || !p.mu_pi.allFinite() || !p.Sigma_c_given_pi.allFinite())
        throw ConfigError("Gaussian parameters must be finite");
    mu_c_ = p.mu_c;
    mu_pi_ = p.mu_pi;
    regression_ = p.Sigma_c_given_pi;
    chol_cc_ = cholesky(p.Sigma_cc, "Sigma_cc");
    chol_pipi_ = cholesky(p.Sigma_pipi, "Sigma_pipi");
    finish();
}

GaussianModel GaussianModel::from_cholesky(Vector mu_c, Vector mu_pi, Matrix regression, Matrix chol_cc,
                                           Matrix chol_pipi) {
    const Eigen::Index D = mu_c.size();
    if (D < 1 || mu_pi.size() != D || regression.rows() != D || regression.cols() != D ||
        chol_cc.rows() != D || chol_cc.cols() != D || chol_pipi.rows() != D || chol_pipi.cols() != D)
        throw ConfigError("Gaussian parameter shapes disagree");
    GaussianModel m;
    m.mu_c_ = std::move(mu_c);
    m.mu_pi_ = std::move(mu_pi);
    m.regression_ = std::move(regression);
    m.chol_cc_ = chol_cc.triangularView<Eigen::Lower>();
    m.chol_pipi_ = chol_pipi.triangularView<Eigen::Lower>();
    for (Eigen::Index i = 0; i < D; ++i)
        if (!(m.chol_cc_(i, i) > 0.0) || !(m.chol_pipi_(i, i) > 0.0) || !std::isfinite(m.chol_cc_(i, i)) ||
            !std::isfinite(m.chol_pipi_(i, i)))
            throw ConfigError("Cholesky factors need a positive finite diagonal");
    if (!m.mu_c_.allFinite() || !m.mu_pi_.allFinite() || !m.regression_.allFinite() || !m.chol_cc_.allFinite() ||
        !m.chol_pipi_.allFinite())
        throw ConfigError("Gaussian parameters must be finite");
    m.finish();
    return m;
}

void GaussianModel::finish() {
    const double half_d = 0.5 * static_cast<double>(mu_c_.size());
    log_norm_cc_ = half_d * kLog2Pi + log_det_chol(chol_cc_);
    log_norm_pipi_ = half_d * kLog2Pi + log_det_chol(chol_pipi_);
}

GaussianParams GaussianModel::params() const {
    return {mu_c_, mu_pi_, regression_, chol_cc_ * chol_cc_.transpose(), chol_pipi_ * chol_pipi_.transpose()};
}

double GaussianModel::log_marginal(ConstVec x) const {
    require_dim(x, dim(), "log_marginal");
    const Vector r = x - mu_pi_;
    const Vector z = chol_pipi_.triangularView<Eigen::Lower>().solve(r);
    return -0.5 * z.squaredNorm() - log_norm_pipi_;
}

double GaussianModel::log_conditional(ConstVec child, ConstVec parent) const {
    require_dim(child, dim(), "log_conditional");
    require_dim(parent, dim(), "log_conditional");
    const Vector r = child - regression_ * parent - mu_c_;
    const Vector z = chol_cc_.triangularView<Eigen::Lower>().solve(r);
    return -0.5 * z.squaredNorm() - log_norm_cc_;
}

std::size_t GaussianModel::num_params() const noexcept {
    const std::size_t d = dim();
    return 2 * d + d * d + 2 * packed_size(d);
}

// layout: mu_c | mu_pi | regression (row-major) | chol_cc packed | chol_pipi packed
Vector GaussianModel::param_vector() const {
    const std::size_t d = dim();
    Vector theta(idx(num_params()));
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i) theta(idx(k++)) = mu_c_(idx(i));
    for (std::size_t i = 0; i < d; ++i) theta(idx(k++)) = mu_pi_(idx(i));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) theta(idx(k++)) = regression_(idx(i), idx(j));
    pack_chol(chol_cc_, theta, k);
    pack_chol(chol_pipi_, theta, k);
    return theta;
}

std::unique_ptr<MutationModel> GaussianModel::with_params(const Vector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != num_params())
        throw ConfigError("parameter vector length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(num_params()));
    if (!theta.allFinite()) throw NumericalFault("non-finite Gaussian parameter vector");
    const std::size_t d = dim();
    std::size_t k = 0;
    Vector mu_c(idx(d)), mu_pi(idx(d));
    Matrix A(idx(d), idx(d));
    for (std::size_t i = 0; i < d; ++i) mu_c(idx(i)) = theta(idx(k++));
    for (std::size_t i = 0; i < d; ++i) mu_pi(idx(i)) = theta(idx(k++));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) A(idx(i), idx(j)) = theta(idx(k++));
    Matrix Lc = unpack_chol(theta, d, k);
    Matrix Lp = unpack_chol(theta, d, k);
    return std::make_unique<GaussianModel>(
        from_cholesky(std::move(mu_c), std::move(mu_pi), std::move(A), std::move(Lc), std::move(Lp)));
}

void GaussianModel::add_grad_log_marginal(ConstVec x, double weight, GradOut grad) const {
    require_dim(x, dim(), "add_grad_log_marginal");
    const std::size_t d = dim();
    const GaussEval e = gauss_eval(chol_pipi_, x - mu_pi_, log_norm_pipi_);
    grad.segment(idx(d), idx(d)) += weight * e.w;
    add_chol_grad(chol_pipi_, e.w, e.z, weight, grad, 2 * d + d * d + packed_size(d));
}

void GaussianModel::add_grad_log_conditional(ConstVec child, ConstVec parent, double weight, GradOut grad) const {
    require_dim(child, dim(), "add_grad_log_conditional");
    require_dim(parent, dim(), "add_grad_log_conditional");
    const std::size_t d = dim();
    const GaussEval e = gauss_eval(chol_cc_, child - regression_ * parent - mu_c_, log_norm_cc_);
    grad.segment(0, idx(d)) += weight * e.w;
    std::size_t k = 2 * d;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) grad(idx(k++)) += weight * e.w(idx(i)) * parent(idx(j));
    add_chol_grad(chol_cc_, e.w, e.z, weight, grad, k);
}

Vector GaussianModel::sample_marginal(Rng& rng) const {
    Vector n(mu_pi_.size());
    for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = rng.normal();
    return mu_pi_ + chol_pipi_ * n;
}

Vector GaussianModel::sample_conditional(ConstVec parent, Rng& rng) const {
    require_dim(parent, dim(), "sample_conditional");
    Vector n(mu_c_.size());
    for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = rng.normal();
    return regression_ * parent + mu_c_ + chol_cc_ * n;
}

Matrix GaussianModel::log_conditional_matrix(const Matrix& data) const {
    validate_data(data);
    const Eigen::Index T = data.rows();
    // z_uv = L^-1 (x_u - mu_c) - L^-1 A x_v
    const Matrix Y = chol_cc_.triangularView<Eigen::Lower>().solve((data.rowwise() - mu_c_.transpose()).transpose());
    const Matrix P = chol_cc_.triangularView<Eigen::Lower>().solve(regression_ * data.transpose());
    Matrix out(T, T);
    for (Eigen::Index v = 0; v < T; ++v)
        for (Eigen::Index u = 0; u < T; ++u)
            out(u, v) = u == v ? -INFINITY : -0.5 * (Y.col(u) - P.col(v)).squaredNorm() - log_norm_cc_;
    return out;
}

void GaussianModel::add_weighted_gradient(const Matrix& data, const Matrix& edge, const Vector& root,
                                          GradOut grad) const {
    validate_data(data);
    const std::size_t d = dim();
    const Matrix E = without_diagonal(edge);
    const auto Lc = chol_cc_.triangularView<Eigen::Lower>();
    const auto LcT = chol_cc_.transpose().triangularView<Eigen::Upper>();
    // Columns: Y_u = L^-1 (x_u - mu_c), P_v = L^-1 A x_v, a = L^-T Y, b = L^-T P.
    const Matrix Y = Lc.solve((data.rowwise() - mu_c_.transpose()).transpose());
    const Matrix P = Lc.solve(regression_ * data.transpose());
    const Matrix a = LcT.solve(Y);
    const Matrix b = LcT.solve(P);
    const Vector rs = E.rowwise().sum();
    const Vector cs = E.colwise().sum().transpose();
    const double total = E.sum();

    // sum E_uv w_uv with w_uv = a_u - b_v
    grad.segment(0, idx(d)) += a * rs - b * cs;
    // sum E_uv w_uv x_v^T
    const Matrix GA = a * E * data - b * cs.asDiagonal() * data;
    std::size_t k = 2 * d;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) grad(idx(k++)) += GA(idx(i), idx(j));
    // sum E_uv w_uv z_uv^T with z_uv = Y_u - P_v
    const Matrix G = a * rs.asDiagonal() * Y.transpose() - a * E * P.transpose() -
                     b * E.transpose() * Y.transpose() + b * cs.asDiagonal() * P.transpose();
    add_chol_grad_sum(chol_cc_, G, total, grad, k);

    for (Eigen::Index r = 0; r < data.rows(); ++r)
        if (root(r) != 0.0) add_grad_log_marginal(data.row(r).transpose(), root(r), grad);
}

GaussianModel GaussianModel::with_conditional_scale(double factor) const {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ConfigError("conditional scale must be positive");
    return from_cholesky(mu_c_, mu_pi_, regression_, chol_cc_ * std::sqrt(factor), chol_pipi_);
}

void GaussianModel::describe(Document& doc) const {
    doc.add("mu_c", vector_tokens(mu_c_));
    doc.add("mu_pi", vector_tokens(mu_pi_));
    doc.add("regression", matrix_tokens(regression_));
    doc.add("chol_cc", matrix_tokens(chol_cc_));
    doc.add("chol_pipi", matrix_tokens(chol_pipi_));
}

GaussianModel gaussian_init_iid(const Matrix& data, const IidInitOptions& options) {
    if (data.rows() < 2) throw DataError("iid initialisation needs at least 2 samples");
    if (data.cols() < 1) throw DataError("data has no columns");
    if (!data.allFinite()) throw DataError("data contains non-finite values");
    if (!(options.ridge_scale >= 0.0)) throw ConfigError("ridge scale must be >= 0");
    auto [mean, cov] = sample_moments(data);
    const double D = static_cast<double>(data.cols());
    if (options.ridge_scale > 0.0) {
        const double tr = cov.trace();
        const double eps = tr > 0.0 ? options.ridge_scale * tr / D : options.ridge_scale;
        cov.diagonal().array() += eps;
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0))
        throw DataError("sample covariance is singular; enable the ridge");
    GaussianParams p{mean, mean, Matrix::Zero(data.cols(), data.cols()), cov, cov};
    return GaussianModel(p);
}

// ------------------------------------------------------------------ Tabular

int category(double x, int k) {
    if (!std::isfinite(x) || x != std::floor(x) || x < 0.0 || x >= static_cast<double>(k))
        throw DataError("value " + format_double(x) + " is not a category in [0, " + std::to_string(k) + ")");
    return static_cast<int>(x);
}

TabularModel::TabularModel(TabularParams params) : params_(std::move(params)) {
    if (params_.root.empty()) throw ConfigError("tabular model needs at least one dimension");
    if (params_.conditional.size() != params_.root.size())
        throw ConfigError("tabular model: root and conditional tables disagree in dimension count");
    for (std::size_t d = 0; d < params_.root.size(); ++d) {
        const Vector& m = params_.root[d];
        const Matrix& C = params_.conditional[d];
        const Eigen::Index K = m.size();
        if (K < 2) throw ConfigError("alphabet sizes must be >= 2");
        if (C.rows() != K || C.cols() != K)
            throw ConfigError("conditional table " + std::to_string(d) + " must be K x K");
        if (!m.allFinite() || !C.allFinite() || m.minCoeff() < 0.0 || C.minCoeff() < 0.0)
            throw ConfigError("probability tables must hold finite nonnegative entries");
        if (std::abs(m.sum() - 1.0) > 1e-9) throw ConfigError("root table " + std::to_string(d) + " does not sum to 1");
        for (Eigen::Index b = 0; b < K; ++b)
            if (std::abs(C.col(b).sum() - 1.0) > 1e-9)
                throw ConfigError("conditional column " + std::to_string(b) + " of dimension " + std::to_string(d) +
                                  " does not sum to 1");
    }
    finish();
}

void TabularModel::finish() {
    log_root_.clear();
    log_cond_.clear();
    offset_.clear();
    num_params_ = 0;
    for (std::size_t d = 0; d < params_.root.size(); ++d) {
        log_root_.push_back(params_.root[d].array().log().matrix());
        log_cond_.push_back(params_.conditional[d].array().log().matrix());
        offset_.push_back(num_params_);
        const std::size_t K = static_cast<std::size_t>(params_.root[d].size());
        num_params_ += (K + 1) * (K - 1);
    }
}

std::vector<int> TabularModel::alphabet() const {
    std::vector<int> out;
    for (const auto& m : params_.root) out.push_back(static_cast<int>(m.size()));
    return out;
}

double TabularModel::log_marginal(ConstVec x) const {
    require_dim(x, dim(), "log_marginal");
    double s = 0.0;
    for (std::size_t d = 0; d < dim(); ++d) {
        const int a = category(x(idx(d)), static_cast<int>(log_root_[d].size()));
        s += log_root_[d](a);
    }
    return s;
}

double TabularModel::log_conditional(ConstVec child, ConstVec parent) const {
    require_dim(child, dim(), "log_conditional");
    require_dim(parent, dim(), "log_conditional");
    double s = 0.0;
    for (std::size_t d = 0; d < dim(); ++d) {
        const int K = static_cast<int>(log_root_[d].size());
        s += log_cond_[d](category(child(idx(d)), K), category(parent(idx(d)), K));
    }
    return s;
}

// layout per dimension: root logits (K-1), then the logits of column 0..K-1
// (K-1 each); the last category is the reference with logit 0.
Vector TabularModel::param_vector() const {
    Vector theta(idx(num_params_));
    for (std::size_t d = 0; d < dim(); ++d) {
        const Eigen::Index K = params_.root[d].size();
        std::size_t k = offset_[d];
        const auto put = [&](const Vector& logp) {
            if (!std::isfinite(logp(K - 1)) || !logp.allFinite())
                throw NumericalFault("zero table entry has no log-odds representation");
            for (Eigen::Index a = 0; a + 1 < K; ++a) theta(idx(k++)) = logp(a) - logp(K - 1);
        };
        put(log_root_[d]);
        for (Eigen::Index b = 0; b < K; ++b) put(log_cond_[d].col(b));
    }
    return theta;
}

namespace {

Vector softmax_with_reference(const Vector& theta, std::size_t k, Eigen::Index K) {
    Vector logits(K);
    for (Eigen::Index a = 0; a + 1 < K; ++a) logits(a) = theta(idx(k + static_cast<std::size_t>(a)));
    logits(K - 1) = 0.0;
    const double hi = logits.maxCoeff();
    Vector e = (logits.array() - hi).exp().matrix();
    return e / e.sum();
}

}  // namespace

TabularModel TabularModel::from_vector(const std::vector<int>& alphabet, const Vector& theta) {
    if (!theta.allFinite()) throw NumericalFault("non-finite tabular parameter vector");
    TabularParams p;
    std::size_t k = 0;
    for (int Kd : alphabet) {
        if (Kd < 2) throw ConfigError("alphabet sizes must be >= 2");
        const Eigen::Index K = Kd;
        const std::size_t need = static_cast<std::size_t>((K + 1) * (K - 1));
        if (k + need > static_cast<std::size_t>(theta.size())) throw ConfigError("tabular parameter vector too short");
        p.root.push_back(softmax_with_reference(theta, k, K));
        k += static_cast<std::size_t>(K - 1);
        Matrix C(K, K);
        for (Eigen::Index b = 0; b < K; ++b) {
            C.col(b) = softmax_with_reference(theta, k, K);
            k += static_cast<std::size_t>(K - 1);
        }
        p.conditional.push_back(std::move(C));
    }
    if (k != static_cast<std::size_t>(theta.size())) throw ConfigError("tabular parameter vector too long");
    return TabularModel(std::move(p));
}

std::unique_ptr<MutationModel> TabularModel::with_params(const Vector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != num_params_)
        throw ConfigError("parameter vector length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(num_params_));
    return std::make_unique<TabularModel>(from_vector(alphabet(), theta));
}

void TabularModel::add_grad_log_marginal(ConstVec x, double weight, GradOut grad) const {
    require_dim(x, dim(), "add_grad_log_marginal");
    for (std::size_t d = 0; d < dim(); ++d) {
        const Eigen::Index K = params_.root[d].size();
        const int a = category(x(idx(d)), static_cast<int>(K));
        const std::size_t k = offset_[d];
        for (Eigen::Index j = 0; j + 1 < K; ++j)
            grad(idx(k + static_cast<std::size_t>(j))) += weight * ((j == a ? 1.0 : 0.0) - params_.root[d](j));
    }
}

void TabularModel::add_grad_log_conditional(ConstVec child, ConstVec parent, double weight, GradOut grad) const {
    require_dim(child, dim(), "add_grad_log_conditional");
    require_dim(parent, dim(), "add_grad_log_conditional");
    for (std::size_t d = 0; d < dim(); ++d) {
        const Eigen::Index K = params_.root[d].size();
        const int a = category(child(idx(d)), static_cast<int>(K));
        const int b = category(parent(idx(d)), static_cast<int>(K));
        const std::size_t k = offset_[d] + static_cast<std::size_t>((K - 1) * (1 + b));
        for (Eigen::Index j = 0; j + 1 < K; ++j)
            grad(idx(k + static_cast<std::size_t>(j))) +=
                weight * ((j == a ? 1.0 : 0.0) - params_.conditional[d](j, b));
    }
}

Vector TabularModel::sample_marginal(Rng& rng) const {
    Vector x(idx(dim()));
    for (std::size_t d = 0; d < dim(); ++d) {
        const Vector& m = params_.root[d];
        x(idx(d)) = static_cast<double>(rng.categorical(std::span<const double>(m.data(), static_cast<std::size_t>(m.size()))));
    }
    return x;
}

Vector TabularModel::sample_conditional(ConstVec parent, Rng& rng) const {
    require_dim(parent, dim(), "sample_conditional");
    Vector x(idx(dim()));
    for (std::size_t d = 0; d < dim(); ++d) {
        const Eigen::Index K = params_.root[d].size();
        const int b = category(parent(idx(d)), static_cast<int>(K));
        const Vector col = params_.conditional[d].col(b);
        x(idx(d)) = static_cast<double>(rng.categorical(std::span<const double>(col.data(), static_cast<std::size_t>(K))));
    }
    return x;
}

void TabularModel::validate_data(const Matrix& data) const {
    MutationModel::validate_data(data);
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (std::size_t d = 0; d < dim(); ++d) {
            try {
                category(data(r, idx(d)), static_cast<int>(params_.root[d].size()));
            } catch (const DataError& e) {
                throw DataError("row " + std::to_string(r) + ", column " + std::to_string(d) + ": " + e.what());
            }
        }
}

void TabularModel::describe(Document& doc) const {
    std::vector<std::string> alpha;
    for (int k : alphabet()) alpha.push_back(std::to_string(k));
    doc.add("alphabet", alpha);
    for (std::size_t d = 0; d < dim(); ++d) {
        doc.add("root_table", vector_tokens(params_.root[d]));
        doc.add("conditional_table", matrix_tokens(params_.conditional[d]));
    }
}

TabularModel tabular_init_iid(const Matrix& data, const std::vector<int>& alphabet, double smoothing) {
    if (data.rows() < 1) throw DataError("no samples");
    if (static_cast<std::size_t>(data.cols()) != alphabet.size())
        throw DataError("data has " + std::to_string(data.cols()) + " columns, alphabet lists " +
                        std::to_string(alphabet.size()));
    if (!(smoothing > 0.0)) throw ConfigError("tabular smoothing must be positive");
    TabularParams p;
    for (std::size_t d = 0; d < alphabet.size(); ++d) {
        if (alphabet[d] < 2) throw ConfigError("alphabet sizes must be >= 2");
        Vector counts = Vector::Constant(alphabet[d], smoothing);
        for (Eigen::Index r = 0; r < data.rows(); ++r) counts(category(data(r, idx(d)), alphabet[d])) += 1.0;
        const Vector m = counts / counts.sum();
        p.root.push_back(m);
        p.conditional.push_back(m.replicate(1, alphabet[d]));
    }
    return TabularModel(std::move(p));
}

// ------------------------------------------------------------------- Kernel

double Kernel::operator()(ConstVec x, ConstVec y) const {
    if (kind == KernelKind::linear) return x.dot(y);
    return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

KernelModel::KernelModel(KernelConditionalParams params) : p_(std::move(params)) {
    chol_root_ = cholesky(p_.root_cov, "root covariance");
    finish();
}

KernelModel::KernelModel(KernelConditionalParams params, Matrix chol_root) : p_(std::move(params)) {
    chol_root_ = chol_root.triangularView<Eigen::Lower>();
    if (chol_root_.rows() != p_.mu.size() || chol_root_.cols() != p_.mu.size())
        throw ConfigError("root Cholesky factor shape disagrees with D");
    for (Eigen::Index i = 0; i < chol_root_.rows(); ++i)
        if (!(chol_root_(i, i) > 0.0) || !std::isfinite(chol_root_(i, i)))
            throw ConfigError("root Cholesky factor needs a positive finite diagonal");
    p_.root_cov = chol_root_ * chol_root_.transpose();
    finish();
}

void KernelModel::finish() {
    const Eigen::Index D = p_.mu.size();
    if (D < 1) throw ConfigError("kernel model needs D >= 1");
    if (p_.anchors.rows() < 1) throw ConfigError("kernel model needs at least one anchor");
    if (p_.anchors.cols() != D || p_.alpha.cols() != D || p_.sigma.size() != D || p_.root_mean.size() != D)
        throw ConfigError("kernel parameter shapes disagree");
    if (p_.alpha.rows() != p_.anchors.rows()) throw ConfigError("anchor count must match alpha rows");
    if (!p_.sigma.allFinite() || p_.sigma.minCoeff() <= 0.0) throw ConfigError("kernel sigma must be positive");
    if (!p_.alpha.allFinite() || !p_.mu.allFinite() || !p_.anchors.allFinite() || !p_.root_mean.allFinite())
        throw ConfigError("kernel parameters must be finite");
    if (p_.kernel.kind == KernelKind::rbf && !(p_.kernel.bandwidth > 0.0 && std::isfinite(p_.kernel.bandwidth)))
        throw ConfigError("RBF bandwidth must be positive");
    if (!(p_.l2_penalty >= 0.0)) throw ConfigError("kernel penalty must be >= 0");
    log_norm_root_ = 0.5 * static_cast<double>(D) * kLog2Pi + log_det_chol(chol_root_);
}

double KernelModel::log_marginal(ConstVec x) const {
    require_dim(x, dim(), "log_marginal");
    const Vector z = chol_root_.triangularView<Eigen::Lower>().solve(x - p_.root_mean);
    return -0.5 * z.squaredNorm() - log_norm_root_;
}

Vector KernelModel::conditional_mean(ConstVec parent) const {
    require_dim(parent, dim(), "conditional_mean");
    Vector k(p_.anchors.rows());
    for (Eigen::Index t = 0; t < k.size(); ++t) k(t) = p_.kernel(parent, p_.anchors.row(t).transpose());
    return p_.alpha.transpose() * k + p_.mu;
}

double KernelModel::log_conditional_with(const Kernel& kern, ConstVec child, ConstVec parent) const {
    Vector k(p_.anchors.rows());
    for (Eigen::Index t = 0; t < k.size(); ++t) k(t) = kern(parent, p_.anchors.row(t).transpose());
    const Vector mean = p_.alpha.transpose() * k + p_.mu;
    double s = 0.0;
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
        const double r = (child(d) - mean(d)) / p_.sigma(d);
        s += -0.5 * r * r - std::log(p_.sigma(d)) - 0.5 * kLog2Pi;
    }
    return s;
}

double KernelModel::log_conditional(ConstVec child, ConstVec parent) const {
    require_dim(child, dim(), "log_conditional");
    require_dim(parent, dim(), "log_conditional");
    return log_conditional_with(p_.kernel, child, parent);
}

std::size_t KernelModel::num_params() const noexcept {
    const std::size_t d = dim();
    const std::size_t n = static_cast<std::size_t>(p_.alpha.rows());
    return n * d + 3 * d + packed_size(d) + (p_.kernel.kind == KernelKind::rbf ? 1 : 0);
}

// layout: alpha (row-major) | mu | log sigma | root mean | root chol packed | log bandwidth (RBF)
Vector KernelModel::param_vector() const {
    Vector theta(idx(num_params()));
    std::size_t k = 0;
    for (Eigen::Index t = 0; t < p_.alpha.rows(); ++t)
        for (Eigen::Index d = 0; d < p_.alpha.cols(); ++d) theta(idx(k++)) = p_.alpha(t, d);
    for (Eigen::Index d = 0; d < p_.mu.size(); ++d) theta(idx(k++)) = p_.mu(d);
    for (Eigen::Index d = 0; d < p_.mu.size(); ++d) theta(idx(k++)) = std::log(p_.sigma(d));
    for (Eigen::Index d = 0; d < p_.mu.size(); ++d) theta(idx(k++)) = p_.root_mean(d);
    pack_chol(chol_root_, theta, k);
    if (p_.kernel.kind == KernelKind::rbf) theta(idx(k++)) = std::log(p_.kernel.bandwidth);
    return theta;
}

std::unique_ptr<MutationModel> KernelModel::with_params(const Vector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != num_params())
        throw ConfigError("parameter vector length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(num_params()));
    if (!theta.allFinite()) throw NumericalFault("non-finite kernel parameter vector");
    KernelConditionalParams q = p_;
    std::size_t k = 0;
    for (Eigen::Index t = 0; t < q.alpha.rows(); ++t)
        for (Eigen::Index d = 0; d < q.alpha.cols(); ++d) q.alpha(t, d) = theta(idx(k++));
    for (Eigen::Index d = 0; d < q.mu.size(); ++d) q.mu(d) = theta(idx(k++));
    for (Eigen::Index d = 0; d < q.mu.size(); ++d) q.sigma(d) = std::exp(theta(idx(k++)));
    for (Eigen::Index d = 0; d < q.mu.size(); ++d) q.root_mean(d) = theta(idx(k++));
    Matrix L = unpack_chol(theta, dim(), k);
    if (q.kernel.kind == KernelKind::rbf) q.kernel.bandwidth = std::exp(theta(idx(k++)));
    return std::make_unique<KernelModel>(std::move(q), std::move(L));
}

void KernelModel::add_grad_log_marginal(ConstVec x, double weight, GradOut grad) const {
    require_dim(x, dim(), "add_grad_log_marginal");
    const std::size_t d = dim();
    const std::size_t k = static_cast<std::size_t>(p_.alpha.rows()) * d + 2 * d;
    const GaussEval e = gauss_eval(chol_root_, x - p_.root_mean, log_norm_root_);
    grad.segment(idx(k), idx(d)) += weight * e.w;
    add_chol_grad(chol_root_, e.w, e.z, weight, grad, k + d);
}

void KernelModel::add_grad_log_conditional(ConstVec child, ConstVec parent, double weight, GradOut grad) const {
    require_dim(child, dim(), "add_grad_log_conditional");
    require_dim(parent, dim(), "add_grad_log_conditional");
    const Eigen::Index D = p_.mu.size(), N = p_.alpha.rows();
    Vector kv(N);
    for (Eigen::Index t = 0; t < N; ++t) kv(t) = p_.kernel(parent, p_.anchors.row(t).transpose());
    const Vector mean = p_.alpha.transpose() * kv + p_.mu;
    const Vector s2 = p_.sigma.array().square().matrix();
    const Vector score = ((child - mean).array() / s2.array()).matrix();  // d/d mean
    std::size_t k = 0;
    for (Eigen::Index t = 0; t < N; ++t)
        for (Eigen::Index d = 0; d < D; ++d) grad(idx(k++)) += weight * kv(t) * score(d);
    for (Eigen::Index d = 0; d < D; ++d) grad(idx(k++)) += weight * score(d);
    for (Eigen::Index d = 0; d < D; ++d) {
        const double r = child(d) - mean(d);
        grad(idx(k++)) += weight * (r * r / s2(d) - 1.0);
    }
    if (p_.kernel.kind == KernelKind::rbf) {
        const std::size_t last = num_params() - 1;
        Kernel up = p_.kernel, down = p_.kernel;
        up.bandwidth *= std::exp(kBandwidthStep);
        down.bandwidth *= std::exp(-kBandwidthStep);
        const double fd =
            (log_conditional_with(up, child, parent) - log_conditional_with(down, child, parent)) / (2.0 * kBandwidthStep);
        grad(idx(last)) += weight * fd;
    }
}

Vector KernelModel::sample_marginal(Rng& rng) const {
    Vector n(p_.mu.size());
    for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = rng.normal();
    return p_.root_mean + chol_root_ * n;
}

Vector KernelModel::sample_conditional(ConstVec parent, Rng& rng) const {
    Vector x = conditional_mean(parent);
    for (Eigen::Index d = 0; d < x.size(); ++d) x(d) += p_.sigma(d) * rng.normal();
    return x;
}

namespace {

Matrix kernel_gram(const Kernel& kern, const Matrix& data, const Matrix& anchors) {
    Matrix K(data.rows(), anchors.rows());
    for (Eigen::Index v = 0; v < data.rows(); ++v)
        for (Eigen::Index t = 0; t < anchors.rows(); ++t)
            K(v, t) = kern(data.row(v).transpose(), anchors.row(t).transpose());
    return K;
}

}  // namespace

Matrix KernelModel::log_conditional_matrix(const Matrix& data) const {
    validate_data(data);
    return log_conditional_matrix_with(p_.kernel, data);
}

Matrix KernelModel::log_conditional_matrix_with(const Kernel& kern, const Matrix& data) const {
    const Eigen::Index T = data.rows(), D = data.cols();
    const Matrix means = (kernel_gram(kern, data, p_.anchors) * p_.alpha).rowwise() + p_.mu.transpose();
    double norm = 0.5 * static_cast<double>(D) * kLog2Pi;
    for (Eigen::Index d = 0; d < D; ++d) norm += std::log(p_.sigma(d));
    const Vector inv = p_.sigma.cwiseInverse();
    Matrix out(T, T);
    for (Eigen::Index v = 0; v < T; ++v)
        for (Eigen::Index u = 0; u < T; ++u) {
            if (u == v) {
                out(u, v) = -INFINITY;
                continue;
            }
            double q = 0.0;
            for (Eigen::Index d = 0; d < D; ++d) {
                const double r = (data(u, d) - means(v, d)) * inv(d);
                q += r * r;
            }
            out(u, v) = -0.5 * q - norm;
        }
    return out;
}

void KernelModel::add_weighted_gradient(const Matrix& data, const Matrix& edge, const Vector& root,
                                        GradOut grad) const {
    validate_data(data);
    const Eigen::Index T = data.rows(), D = data.cols(), N = p_.alpha.rows();
    const Matrix E = without_diagonal(edge);
    const Matrix gram = kernel_gram(p_.kernel, data, p_.anchors);
    const Matrix means = (gram * p_.alpha).rowwise() + p_.mu.transpose();
    const Vector s2 = p_.sigma.array().square().matrix();
    // R(v, d) = sum_u E(u, v) (x_ud - mean_vd) / sigma_d^2
    Matrix R = Matrix::Zero(T, D);
    Vector sq = Vector::Zero(D);
    for (Eigen::Index v = 0; v < T; ++v)
        for (Eigen::Index u = 0; u < T; ++u) {
            const double e = E(u, v);
            if (e == 0.0) continue;
            for (Eigen::Index d = 0; d < D; ++d) {
                const double r = data(u, d) - means(v, d);
                R(v, d) += e * r / s2(d);
                sq(d) += e * r * r / s2(d);
            }
        }
    const Matrix GA = gram.transpose() * R;
    std::size_t k = 0;
    for (Eigen::Index t = 0; t < N; ++t)
        for (Eigen::Index d = 0; d < D; ++d) grad(idx(k++)) += GA(t, d);
    const Vector gm = R.colwise().sum().transpose();
    const double total = E.sum();
    for (Eigen::Index d = 0; d < D; ++d) grad(idx(k++)) += gm(d);
    for (Eigen::Index d = 0; d < D; ++d) grad(idx(k++)) += sq(d) - total;
    if (p_.kernel.kind == KernelKind::rbf) {
        Kernel up = p_.kernel, down = p_.kernel;
        up.bandwidth *= std::exp(kBandwidthStep);
        down.bandwidth *= std::exp(-kBandwidthStep);
        const double hi = E.cwiseProduct(without_diagonal(log_conditional_matrix_with(up, data))).sum();
        const double lo = E.cwiseProduct(without_diagonal(log_conditional_matrix_with(down, data))).sum();
        grad(idx(num_params() - 1)) += (hi - lo) / (2.0 * kBandwidthStep);
    }
    for (Eigen::Index r = 0; r < T; ++r)
        if (root(r) != 0.0) add_grad_log_marginal(data.row(r).transpose(), root(r), grad);
}

double KernelModel::penalty() const { return p_.l2_penalty * p_.alpha.squaredNorm(); }

void KernelModel::add_grad_penalty(GradOut grad) const {
    std::size_t k = 0;
    for (Eigen::Index t = 0; t < p_.alpha.rows(); ++t)
        for (Eigen::Index d = 0; d < p_.alpha.cols(); ++d) grad(idx(k++)) += 2.0 * p_.l2_penalty * p_.alpha(t, d);
}

void KernelModel::describe(Document& doc) const {
    if (p_.kernel.kind == KernelKind::rbf)
        doc.add("kernel", {"rbf", format_hex(p_.kernel.bandwidth)});
    else
        doc.add("kernel", "linear");
    doc.add("lambda", format_hex(p_.l2_penalty));
    doc.add("anchors", matrix_tokens(p_.anchors));
    doc.add("alpha", matrix_tokens(p_.alpha));
    doc.add("mu", vector_tokens(p_.mu));
    doc.add("sigma", vector_tokens(p_.sigma));
    doc.add("root_mean", vector_tokens(p_.root_mean));
    doc.add("chol_root", matrix_tokens(chol_root_));
}

KernelModel kernel_init_iid(const Matrix& data, Kernel kernel, double l2_penalty) {
    if (data.rows() < 2) throw DataError("iid initialisation needs at least 2 samples");
    if (!data.allFinite()) throw DataError("data contains non-finite values");
    if (kernel.kind == KernelKind::rbf && !(kernel.bandwidth > 0.0)) {
        std::vector<double> dist;
        dist.reserve(static_cast<std::size_t>(data.rows() * (data.rows() - 1) / 2));
        for (Eigen::Index i = 0; i < data.rows(); ++i)
            for (Eigen::Index j = i + 1; j < data.rows(); ++j) dist.push_back((data.row(i) - data.row(j)).norm());
        auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
        std::nth_element(dist.begin(), mid, dist.end());
        kernel.bandwidth = *mid > 0.0 ? *mid : 1.0;
    }
    auto [mean, cov] = sample_moments(data);
    const double D = static_cast<double>(data.cols());
    const double tr = cov.trace();
    cov.diagonal().array() += tr > 0.0 ? 1e-6 * tr / D : 1e-6;
    KernelConditionalParams p;
    p.kernel = kernel;
    p.alpha = Matrix::Zero(data.rows(), data.cols());
    p.mu = mean;
    p.sigma = cov.diagonal().cwiseSqrt();
    p.anchors = data;
    p.root_mean = mean;
    p.root_cov = cov;
    p.l2_penalty = l2_penalty;
    return KernelModel(std::move(p));
}

// ---------------------------------------------------------------- utilities

std::pair<treemath::WeightMatrix, treemath::RootWeights> build_beta(const Matrix& data, const MutationModel& model) {
    model.validate_data(data);
    if (data.rows() < 2) throw DataError("need at least 2 samples");
    Matrix lb = model.log_conditional_matrix(data);
    for (Eigen::Index u = 0; u < lb.rows(); ++u)
        for (Eigen::Index v = 0; v < lb.cols(); ++v)
            if (u != v && !std::isfinite(lb(u, v)))
                throw DataError("non-finite log conditional for child " + std::to_string(u) + ", parent " +
                                std::to_string(v) + ": " + format_double(lb(u, v)));
    Vector lp = model.log_marginal_vector(data);
    for (Eigen::Index r = 0; r < lp.size(); ++r)
        if (!std::isfinite(lp(r)))
            throw DataError("non-finite log marginal for sample " + std::to_string(r) + ": " + format_double(lp(r)));
    return {treemath::WeightMatrix::from_log(std::move(lb)), treemath::RootWeights::from_log(std::move(lp))};
}

LogWeightGradients grad_log_weights(const Matrix& data, const MutationModel& model) {
    model.validate_data(data);
    const Eigen::Index T = data.rows();
    const std::size_t P = model.num_params();
    LogWeightGradients out;
    out.edge.assign(P, Matrix::Zero(T, T));
    out.root = Matrix::Zero(idx(P), T);
    Vector g(idx(P));
    for (Eigen::Index u = 0; u < T; ++u)
        for (Eigen::Index v = 0; v < T; ++v) {
            if (u == v) continue;
            g.setZero();
            model.add_grad_log_conditional(data.row(u).transpose(), data.row(v).transpose(), 1.0, g);
            for (std::size_t i = 0; i < P; ++i) out.edge[i](u, v) = g(idx(i));
        }
    for (Eigen::Index r = 0; r < T; ++r) {
        g.setZero();
        model.add_grad_log_marginal(data.row(r).transpose(), 1.0, g);
        out.root.col(r) = g;
    }
    return out;
}

Document model_document(const MutationModel& model) {
    Document doc("outtree-model/1");
    doc.add("family", family_name(model.family()));
    doc.add("dim", std::to_string(model.dim()));
    model.describe(doc);
    return doc;
}

std::unique_ptr<MutationModel> model_from_document(const Document& doc) {
    const Family fam = parse_family(doc.get_one("family"));
    const std::size_t D = parse_count(doc.get_one("dim"));
    const auto vec = [&](const char* key) { return vector_from_tokens(doc.get(key), key); };
    const auto mat = [&](const char* key) { return matrix_from_tokens(doc.get(key), key); };
    std::unique_ptr<MutationModel> out;
    try {
        switch (fam) {
            case Family::gaussian:
                out = std::make_unique<GaussianModel>(GaussianModel::from_cholesky(
                    vec("mu_c"), vec("mu_pi"), mat("regression"), mat("chol_cc"), mat("chol_pipi")));
                break;
            case Family::tabular: {
                const auto& alpha = doc.get("alphabet");
                const auto roots = doc.get_all("root_table");
                const auto conds = doc.get_all("conditional_table");
                if (roots.size() != alpha.size() || conds.size() != alpha.size())
                    throw DataError("tabular model needs one root and one conditional table per dimension");
                TabularParams p;
                for (std::size_t d = 0; d < alpha.size(); ++d) {
                    p.root.push_back(vector_from_tokens(*roots[d], "root_table"));
                    p.conditional.push_back(matrix_from_tokens(*conds[d], "conditional_table"));
                    if (p.root.back().size() != static_cast<Eigen::Index>(parse_count(alpha[d])))
                        throw DataError("root table size disagrees with the alphabet");
                }
                out = std::make_unique<TabularModel>(std::move(p));
                break;
            }
            case Family::kernel: {
                KernelConditionalParams p;
                const auto& k = doc.get("kernel");
                if (k.empty()) throw DataError("empty kernel descriptor");
                if (k[0] == "rbf") {
                    if (k.size() != 2) throw DataError("rbf kernel needs a bandwidth");
                    p.kernel = {KernelKind::rbf, parse_double(k[1])};
                } else if (k[0] == "linear") {
                    p.kernel = {KernelKind::linear, 1.0};
                } else {
                    throw DataError("unknown kernel '" + k[0] + "'");
                }
                p.l2_penalty = parse_double(doc.get_one("lambda"));
                p.anchors = mat("anchors");
                p.alpha = mat("alpha");
                p.mu = vec("mu");
                p.sigma = vec("sigma");
                p.root_mean = vec("root_mean");
                out = std::make_unique<KernelModel>(std::move(p), mat("chol_root"));
                break;
            }
        }
    } catch (const ConfigError& e) {
        throw DataError(std::string("invalid model document: ") + e.what());
    }
    if (out->dim() != D) throw DataError("model document dim disagrees with its parameters");
    return out;
}

void save_model(std::ostream& os, const MutationModel& model) {
    model_document(model).write(os);
    if (!os) throw DataError("failed to write model");
}

std::unique_ptr<MutationModel> load_model(std::istream& is) {
    return model_from_document(Document::read(is, "outtree-model/1"));
}

}  // namespace outtree::models
