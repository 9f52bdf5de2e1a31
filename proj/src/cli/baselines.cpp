#include "outtree/cli/baselines.hpp"

#include "outtree/errors.hpp"
#include "outtree/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace outtree::cli {

namespace {

using Index = Eigen::Index;

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Vector& v) {
    const double hi = v.maxCoeff();
    if (!std::isfinite(hi)) return hi;
    return hi + std::log((v.array() - hi).exp().sum());
}

void check_rows(const Matrix& X, const char* what) {
    if (X.rows() == 0) throw DataError(std::string(what) + " is empty");
    if (!X.allFinite()) throw DataError(std::string(what) + " has non-finite values");
}

struct Component {
    Eigen::LLT<Matrix> llt;
    double log_norm = 0.0;
};

Component factor(const Matrix& cov) {
    Component c;
    c.llt.compute(cov);
    if (c.llt.info() != Eigen::Success) throw NumericalFault("mixture covariance is not positive definite");
    const Matrix L = c.llt.matrixL();
    c.log_norm = -0.5 * static_cast<double>(cov.rows()) * kLog2Pi - L.diagonal().array().log().sum();
    return c;
}

// T x k matrix of ln w_k + ln N(x_t | mu_k, Sigma_k).
Matrix joint_log(const Gmm& g, const Matrix& X) {
    const Index k = static_cast<Index>(g.components());
    Matrix out(X.rows(), k);
    for (Index j = 0; j < k; ++j) {
        const auto c = factor(g.covs[static_cast<std::size_t>(j)]);
        const Matrix centred = (X.rowwise() - g.means[static_cast<std::size_t>(j)].transpose()).transpose();
        const Matrix z = c.llt.matrixL().solve(centred);
        out.col(j) = (std::log(g.weights(j)) + c.log_norm - 0.5 * z.colwise().squaredNorm().array()).matrix().transpose();
    }
    return out;
}

double ridge_lambda(const Matrix& X, double ridge_scale) {
    const auto [mean, cov] = models::sample_moments(X);
    const double scale = cov.trace() / static_cast<double>(X.cols());
    return ridge_scale * (scale > 0.0 ? scale : 1.0);
}

double penalty(const Gmm& g, double lambda) {
    if (lambda == 0.0) return 0.0;
    double p = 0.0;
    for (const auto& S : g.covs) p += 0.5 * lambda * S.inverse().trace();
    return p;
}

// k-means++: first centre uniform, then proportional to squared distance.
std::vector<Vector> seed_centres(const Matrix& X, int k, Rng& rng) {
    std::vector<Vector> centres{X.row(static_cast<Index>(rng.index(static_cast<std::size_t>(X.rows())))).transpose()};
    std::vector<double> d2(static_cast<std::size_t>(X.rows()));
    while (static_cast<int>(centres.size()) < k) {
        for (Index t = 0; t < X.rows(); ++t) {
            double best = INFINITY;
            for (const auto& c : centres) best = std::min(best, (X.row(t).transpose() - c).squaredNorm());
            d2[static_cast<std::size_t>(t)] = best;
        }
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        const std::size_t pick = total > 0.0 ? rng.categorical(d2) : rng.index(d2.size());
        centres.push_back(X.row(static_cast<Index>(pick)).transpose());
    }
    return centres;
}

Gmm m_step(const Matrix& X, const Matrix& resp, double lambda) {
    const Index k = resp.cols();
    const Index D = X.cols();
    Gmm g;
    const Vector Nk = resp.colwise().sum().transpose();
    g.weights = Nk / static_cast<double>(X.rows());
    for (Index j = 0; j < k; ++j) {
        const Vector mu = X.transpose() * resp.col(j) / Nk(j);
        const Matrix centred = X.rowwise() - mu.transpose();
        Matrix S = centred.transpose() * resp.col(j).asDiagonal() * centred;
        S += lambda * Matrix::Identity(D, D);
        g.means.push_back(mu);
        g.covs.push_back(S / Nk(j));
    }
    return g;
}

}  // namespace

double parzen_log_likelihood(const Matrix& train, const Matrix& points, double sigma) {
    check_rows(train, "Parzen training set");
    if (points.cols() != train.cols()) throw DataError("Parzen points and training set differ in dimension");
    if (!(sigma > 0.0)) throw ConfigError("Parzen bandwidth must be positive");
    const double D = static_cast<double>(train.cols());
    const double norm = -std::log(static_cast<double>(train.rows())) - 0.5 * D * (kLog2Pi + 2.0 * std::log(sigma));
    const Vector train_sq = train.rowwise().squaredNorm();
    double total = 0.0;
    for (Index i = 0; i < points.rows(); ++i) {
        const Vector x = points.row(i).transpose();
        const Vector d2 = (train_sq.array() - 2.0 * (train * x).array() + x.squaredNorm()).max(0.0);
        total += log_sum_exp(-d2 / (2.0 * sigma * sigma)) + norm;
    }
    return total;
}

std::vector<double> default_bandwidth_grid(const Matrix& train) {
    check_rows(train, "Parzen training set");
    const auto [mean, cov] = models::sample_moments(train);
    double scale = std::sqrt(cov.trace() / static_cast<double>(train.cols()));
    if (!(scale > 0.0)) scale = 1.0;
    std::vector<double> grid;
    const int n = 25;
    for (int i = 0; i < n; ++i) grid.push_back(scale * std::pow(10.0, -3.0 + std::log10(3000.0) * i / (n - 1)));
    return grid;
}

ParzenResult baseline_parzen(const Matrix& train, const Matrix& validation, const Matrix& test, std::vector<double> grid) {
    check_rows(validation, "Parzen validation set");
    if (grid.empty()) grid = default_bandwidth_grid(train);
    ParzenResult r;
    r.grid = grid;
    r.validation = -INFINITY;
    for (double s : grid) {
        const double v = parzen_log_likelihood(train, validation, s);
        r.validation_curve.push_back(v);
        if (v > r.validation) {
            r.validation = v;
            r.sigma = s;
        }
    }
    r.test = test.rows() ? parzen_log_likelihood(train, test, r.sigma) : 0.0;
    return r;
}

double gmm_log_likelihood(const Gmm& model, const Matrix& X) {
    const Matrix J = joint_log(model, X);
    double total = 0.0;
    for (Index t = 0; t < J.rows(); ++t) total += log_sum_exp(J.row(t).transpose());
    return total;
}

GmmFit fit_gmm(const Matrix& X, int k, Rng& rng, const GmmOptions& options) {
    check_rows(X, "mixture data");
    if (k < 1) throw ConfigError("mixture needs k >= 1");
    if (X.rows() < k) throw DataError("fewer rows than mixture components");
    const double lambda = ridge_lambda(X, options.ridge_scale);
    const Index T = X.rows();
    const double min_mass = 1e-6 * static_cast<double>(T) + 1e-12;

    // Hard assignment to the nearest seed for the first M-step.
    const auto centres = seed_centres(X, k, rng);
    Matrix resp = Matrix::Zero(T, k);
    for (Index t = 0; t < T; ++t) {
        Index best = 0;
        double bd = INFINITY;
        for (Index j = 0; j < k; ++j) {
            const double d = (X.row(t).transpose() - centres[static_cast<std::size_t>(j)]).squaredNorm();
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        resp(t, best) = 1.0;
    }

    GmmFit fit;
    auto reseed = [&](Matrix& r) {
        const Vector mass = r.colwise().sum().transpose();
        bool changed = false;
        for (Index j = 0; j < k; ++j) {
            if (mass(j) >= min_mass) continue;
            // The row farthest from every populated component takes this one.
            std::vector<Vector> populated;
            for (Index c = 0; c < k; ++c)
                if (mass(c) >= min_mass) populated.push_back(X.transpose() * r.col(c) / mass(c));
            Index far = 0;
            double worst = -1.0;
            for (Index t = 0; t < T; ++t) {
                double nearest = INFINITY;
                for (const auto& mu : populated) nearest = std::min(nearest, (X.row(t).transpose() - mu).squaredNorm());
                if (nearest > worst) {
                    worst = nearest;
                    far = t;
                }
            }
            r.row(far).setZero();
            r(far, j) = 1.0;
            ++fit.reseeds;
            changed = true;
        }
        return changed;
    };
    reseed(resp);
    Gmm g = m_step(X, resp, lambda);
    double prev = -INFINITY;
    for (int it = 0; it < options.max_iters; ++it) {
        const Matrix J = joint_log(g, X);
        double ll = 0.0;
        for (Index t = 0; t < T; ++t) {
            const double lse = log_sum_exp(J.row(t).transpose());
            ll += lse;
            resp.row(t) = (J.row(t).array() - lse).exp();
        }
        const double objective = ll - penalty(g, lambda);
        fit.trace.push_back(objective);
        if (objective - prev < options.tol * std::max(1.0, std::abs(objective))) {
            fit.converged = true;
            break;
        }
        prev = objective;
        if (reseed(resp)) prev = -INFINITY;
        g = m_step(X, resp, lambda);
    }
    fit.model = std::move(g);
    return fit;
}

GmmFit fit_gmm_restarts(const Matrix& X, int k, int restarts, const Rng& rng, const GmmOptions& options) {
    if (restarts < 1) throw ConfigError("restarts must be >= 1");
    GmmFit best;
    double best_obj = -INFINITY;
    for (int r = 0; r < restarts; ++r) {
        Rng sub = rng.substream(static_cast<std::uint64_t>(r));
        auto fit = fit_gmm(X, k, sub, options);
        if (fit.trace.back() > best_obj) {
            best_obj = fit.trace.back();
            best = std::move(fit);
        }
    }
    return best;
}

GmmResult baseline_gmm(const Matrix& train, const Matrix& validation, const Matrix& test, int k_max, int restarts,
                       const Rng& rng, const GmmOptions& options) {
    if (k_max < 1) throw ConfigError("mixture needs k >= 1");
    GmmResult out;
    double best = -INFINITY;
    for (int k = 1; k <= k_max; ++k) {
        const auto fit = fit_gmm_restarts(train, k, restarts, rng.substream(static_cast<std::uint64_t>(k)), options);
        GmmScore s;
        s.k = k;
        s.train = gmm_log_likelihood(fit.model, train);
        s.validation = validation.rows() ? gmm_log_likelihood(fit.model, validation) : 0.0;
        s.test = test.rows() ? gmm_log_likelihood(fit.model, test) : 0.0;
        if (s.validation > best) {
            best = s.validation;
            out.selected = out.per_k.size();
        }
        out.per_k.push_back(s);
    }
    return out;
}

}  // namespace outtree::cli
