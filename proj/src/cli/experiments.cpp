#include "outtree/cli/experiments.hpp"

#include "outtree/cli/baselines.hpp"
#include "outtree/cli/config.hpp"
#include "outtree/errors.hpp"
#include "outtree/likelihood.hpp"
#include "outtree/sampler.hpp"
#include "outtree/semisup.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace outtree::cli {

namespace {

using Index = Eigen::Index;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

void SpiralSpec::validate() const {
    if (T < 10) throw ConfigError("spiral needs T >= 10");
    if (!(noise >= 0.0)) throw ConfigError("spiral noise must be nonnegative");
    if (!(turns > 0.0)) throw ConfigError("spiral turns must be positive");
}

Vector spiral_point(double s) {
    Vector p(3);
    p << s * std::cos(s), s * std::sin(s), s;
    return p;
}

Matrix gen_spiral(const SpiralSpec& spec, const Rng& rng) {
    spec.validate();
    Rng r = rng;
    Matrix X(static_cast<Index>(spec.T), 3);
    for (Index t = 0; t < X.rows(); ++t) {
        const double s = spec.turns * kTwoPi * r.uniform();
        X.row(t) = spiral_point(s).transpose();
        for (Index d = 0; d < 3; ++d) X(t, d) += spec.noise * r.normal();
    }
    return X;
}

double distance_to_spiral(const Vector& x, double turns) {
    if (x.size() != 3) throw DataError("spiral points are 3-dimensional");
    const double hi = turns * kTwoPi;
    auto d2 = [&](double s) { return (x - spiral_point(s)).squaredNorm(); };
    const int n = std::max(200, static_cast<int>(400 * turns));
    double best_s = 0.0, best = d2(0.0);
    for (int i = 1; i <= n; ++i) {
        const double s = hi * i / n;
        if (const double v = d2(s); v < best) {
            best = v;
            best_s = s;
        }
    }
    // Golden-section refinement in the bracketing cell.
    double a = std::max(0.0, best_s - hi / n), b = std::min(hi, best_s + hi / n);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (d2(c) < d2(d))
            b = d;
        else
            a = c;
    }
    return std::sqrt(std::min(best, d2(0.5 * (a + b))));
}

Matrix pca_project(const Matrix& X, int k) {
    if (k < 1 || k > X.cols()) throw ConfigError("PCA dimension must lie in [1, D]");
    if (X.rows() < 2) throw DataError("PCA needs at least two rows");
    const Matrix C = X.rowwise() - X.colwise().mean();
    const Matrix S = C.transpose() * C / static_cast<double>(X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    if (es.info() != Eigen::Success) throw NumericalFault("PCA eigendecomposition failed");
    Matrix V = es.eigenvectors().rightCols(k).rowwise().reverse();
    for (Index j = 0; j < k; ++j) {
        Index at = 0;
        V.col(j).cwiseAbs().maxCoeff(&at);
        if (V(at, j) < 0.0) V.col(j) *= -1.0;
    }
    return C * V;
}

models::GaussianModel walk_model(const Matrix& data, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("walk step must be positive");
    auto p = models::gaussian_init_iid(data).params();
    const Index D = data.cols();
    p.mu_c = Vector::Zero(D);
    p.Sigma_c_given_pi = Matrix::Identity(D, D);
    p.Sigma_cc = sigma * sigma * Matrix::Identity(D, D);
    return models::GaussianModel(p);
}

WalkFit fit_walk(const Matrix& data) {
    if (data.rows() < 2) throw DataError("walk fit needs T >= 2");
    const auto [mean, cov] = models::sample_moments(data);
    double scale = std::sqrt(cov.trace() / static_cast<double>(data.cols()));
    if (!(scale > 0.0)) scale = 1.0;
    auto score = [&](double log_sigma) -> double {
        try {
            return likelihood::tdid_log_likelihood(data, walk_model(data, std::exp(log_sigma)));
        } catch (const NumericalFault&) {
            return -INFINITY;
        }
    };
    const double lo = std::log(1e-3 * scale), hi = std::log(3.0 * scale);
    const int n = 24;
    std::vector<double> grid(n + 1), val(n + 1);
    for (int i = 0; i <= n; ++i) {
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / n;
        val[static_cast<std::size_t>(i)] = score(grid[static_cast<std::size_t>(i)]);
    }
    const auto best = static_cast<std::size_t>(std::max_element(val.begin(), val.end()) - val.begin());
    if (!std::isfinite(val[best])) throw NumericalFault("walk likelihood is not finite for any step size");
    double a = grid[best == 0 ? 0 : best - 1], b = grid[std::min<std::size_t>(best + 1, n)];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = score(c), fd = score(d);
    for (int it = 0; it < 30; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = score(d);
        }
    }
    double log_sigma = grid[best], value = val[best];
    if (fc > value) {
        log_sigma = c;
        value = fc;
    }
    if (fd > value) {
        log_sigma = d;
        value = fd;
    }
    return {walk_model(data, std::exp(log_sigma)), std::exp(log_sigma), value};
}

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    const double n = static_cast<double>(xs.size());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return s;
}

SpiralReport spiral_experiment(const SpiralOptions& options) {
    const Rng root(options.seed);
    SpiralReport report;
    report.data = options.data.size() ? options.data : gen_spiral(options.spec, root.substream(0));
    const auto T = static_cast<std::size_t>(report.data.rows());
    std::vector<double> tdid, gmm1, gmm_best, parzen;
    for (int k = 0; k < options.folds; ++k) {
        const Split split = fold_split(T, options.folds, k, root.substream(1));
        const Matrix train = take_rows(report.data, split.train);
        const Matrix val = take_rows(report.data, split.validation);
        const Matrix test = take_rows(report.data, split.test);
        SpiralFold f;
        f.fold = k;
        f.n_train = split.train.size();
        f.n_validation = split.validation.size();
        f.n_test = split.test.size();

        auto walk = fit_walk(train);
        f.walk_sigma = walk.sigma;
        std::unique_ptr<models::MutationModel> model = walk.model.clone();
        if (options.fit_iters > 0) {
            likelihood::FitOptions fo;
            fo.max_iters = options.fit_iters;
            fo.validation = val;
            fo.patience = 3;
            model = likelihood::fit_ml(train, walk.model, fo).model;
        }
        f.tdid = likelihood::test_log_likelihood(train, test, *model).log_score;

        const auto gmm = baseline_gmm(train, val, test, options.gmm_k_max, options.restarts,
                                      root.substream(2 + static_cast<std::uint64_t>(k)));
        f.gmm1 = gmm.per_k.front().test;
        f.gmm_best = gmm.per_k[gmm.selected].test;
        f.gmm_best_k = gmm.per_k[gmm.selected].k;
        const auto pz = baseline_parzen(train, val, test, options.bandwidth_grid);
        f.parzen = pz.test;
        f.parzen_sigma = pz.sigma;

        tdid.push_back(f.tdid);
        gmm1.push_back(f.gmm1);
        gmm_best.push_back(f.gmm_best);
        parzen.push_back(f.parzen);
        report.folds.push_back(f);
    }
    report.tdid = summarize(tdid);
    report.gmm1 = summarize(gmm1);
    report.gmm_best = summarize(gmm_best);
    report.parzen = summarize(parzen);
    return report;
}

SemisupTask semisup_task(const SemisupOptions& o, std::uint64_t seed) {
    if (o.T < 2) throw ConfigError("semi-supervised task needs T >= 2");
    if (o.D < 1) throw ConfigError("semi-supervised task needs D >= 1");
    if (!(o.fraction > 0.0 && o.fraction < 1.0)) throw ConfigError("labeled fraction must lie in (0, 1)");
    const Index D = o.D;
    const models::GaussianModel gen(models::GaussianParams{Vector::Zero(D), Vector::Zero(D), Matrix::Identity(D, D),
                                                           o.step * o.step * Matrix::Identity(D, D),
                                                           Matrix::Identity(D, D)});
    const Rng rng(seed);
    const auto draw = sampler::sample_dataset(gen, o.T, rng);
    Rng lr = rng.substream(1u << 20);
    SemisupTask task;
    task.X = o.pca > 0 ? pca_project(draw.data, o.pca) : draw.data;
    task.truth = semisup::sample_labels(draw.tree, semisup::LabelModel{o.alpha_true, o.K}, lr);
    std::vector<std::size_t> perm(o.T);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = o.T; i > 1; --i) std::swap(perm[i - 1], perm[lr.index(i)]);
    const auto n_obs = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(o.fraction * static_cast<double>(o.T))));
    task.observed.assign(o.T, semisup::kMissing);
    for (std::size_t k = 0; k < n_obs; ++k) task.observed[perm[k]] = task.truth[perm[k]];
    return task;
}

SemisupRun semisup_experiment(const SemisupOptions& o, std::uint64_t seed) {
    const auto task = semisup_task(o, seed);
    SemisupRun run;
    run.seed = seed;
    run.labeled = static_cast<std::size_t>(
        std::count_if(task.observed.begin(), task.observed.end(), [](int y) { return y != semisup::kMissing; }));
    const auto walk = fit_walk(task.X);
    run.walk_sigma = walk.sigma;
    semisup::InferenceOptions io;
    io.restarts = o.restarts;
    io.seed = seed;
    run.alpha = semisup::cross_validate_alpha(task.X, task.observed, walk.model, o.K, o.alpha_grid, o.cv_folds, io).alpha;
    const auto res = semisup::greedy_label_inference(task.X, task.observed, walk.model,
                                                     semisup::LabelModel{run.alpha, o.K}, io);
    const auto base = semisup::majority_baseline(task.observed, o.K);
    double hit_tree = 0.0, hit_base = 0.0, n = 0.0;
    for (std::size_t t = 0; t < o.T; ++t)
        if (task.observed[t] == semisup::kMissing) {
            hit_tree += res.labels[t] == task.truth[t];
            hit_base += base[t] == task.truth[t];
            n += 1.0;
        }
    run.accuracy_tree = hit_tree / n;
    run.accuracy_majority = hit_base / n;
    return run;
}

}  // namespace outtree::cli
