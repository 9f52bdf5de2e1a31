#include "doctest.h"
#include "test_util.hpp"

#include "outtree/errors.hpp"
#include "outtree/likelihood.hpp"
#include "outtree/sampler.hpp"
#include "outtree/semisup.hpp"

#include <cmath>

using namespace outtree;
using namespace outtree::semisup;
using models::GaussianModel;
using models::GaussianParams;

namespace {

GaussianModel walk_model(int D, double step, double spread) {
    const Eigen::Index d = D;
    return GaussianModel(GaussianParams{Vector::Zero(d), Vector::Zero(d), Matrix::Identity(d, d),
                                        step * step * Matrix::Identity(d, d), spread * spread * Matrix::Identity(d, d)});
}

Matrix gauss_rows(std::size_t T, int D, Rng& rng) {
    Matrix X(static_cast<Eigen::Index>(T), D);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < D; ++j) X(i, j) = rng.normal();
    return X;
}

std::vector<int> random_labels(std::size_t T, int K, Rng& rng) {
    std::vector<int> y(T);
    for (auto& v : y) v = static_cast<int>(rng.index(static_cast<std::size_t>(K)));
    return y;
}

InferenceState random_state(std::size_t T, int K, double alpha, Rng& rng) {
    const Matrix X = gauss_rows(T, 2, rng);
    auto [beta, roots] = models::build_beta(X, walk_model(2, 0.7, 1.5));
    return InferenceState(beta.log_weights(), roots.log_values(), random_labels(T, K, rng), LabelModel{alpha, K});
}

struct Task {
    Matrix X;
    std::vector<int> truth;
    std::vector<int> observed;
};

constexpr int kTaskDim = 30;

Task tree_task(std::size_t T, double alpha, double fraction, const Rng& rng) {
    const GaussianModel m = walk_model(kTaskDim, 0.3, 1.0);
    const auto draw = sampler::sample_dataset(m, T, rng);
    Rng lr = rng.substream(1u << 20);
    Task task{draw.data, sample_labels(draw.tree, LabelModel{alpha, 2}, lr), {}};
    task.observed.assign(T, kMissing);
    const auto perm = testing::random_permutation(T, lr);
    const auto n_obs = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(T)));
    for (std::size_t k = 0; k < n_obs; ++k) task.observed[perm[k]] = task.truth[perm[k]];
    return task;
}

double accuracy(const std::vector<int>& pred, const Task& task) {
    double hit = 0.0, n = 0.0;
    for (std::size_t t = 0; t < pred.size(); ++t)
        if (task.observed[t] == kMissing) {
            hit += pred[t] == task.truth[t];
            n += 1.0;
        }
    return hit / n;
}

// Best completion by exhaustive enumeration of the missing labels.
std::pair<std::vector<int>, double> best_completion(const Matrix& X, const std::vector<int>& y,
                                                    const models::MutationModel& m, const LabelModel& lm) {
    std::vector<std::size_t> free;
    for (std::size_t t = 0; t < y.size(); ++t)
        if (y[t] == kMissing) free.push_back(t);
    std::size_t combos = 1;
    for (std::size_t k = 0; k < free.size(); ++k) combos *= static_cast<std::size_t>(lm.K);
    std::vector<int> best;
    double best_Z = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < combos; ++c) {
        std::vector<int> full = y;
        std::size_t code = c;
        for (std::size_t t : free) {
            full[t] = static_cast<int>(code % static_cast<std::size_t>(lm.K));
            code /= static_cast<std::size_t>(lm.K);
        }
        auto [beta, roots] = build_joint_beta(X, full, m, lm);
        const double lz = treemath::log_partition(beta, roots).log_Z;
        if (lz > best_Z) {
            best_Z = lz;
            best = full;
        }
    }
    return {best, best_Z};
}

}  // namespace

TEST_CASE("joint weights") {
    Rng rng(101);
    const GaussianModel m = walk_model(2, 0.8, 1.2);
    SUBCASE("product of the two factors") {
        const Matrix X = gauss_rows(4, 2, rng);
        const std::vector<int> y{0, 1, 1, 2};
        const LabelModel lm{0.7, 3};
        auto [beta, roots] = build_joint_beta(X, y, m, lm);
        for (Eigen::Index u = 0; u < 4; ++u) {
            const Vector xu = X.row(u).transpose();
            CHECK(std::abs(roots.log_values()(u) - (m.log_marginal(xu) + std::log(1.0 / 3.0))) < 1e-12);
            for (Eigen::Index v = 0; v < 4; ++v) {
                if (u == v) continue;
                const double lab = y[static_cast<std::size_t>(u)] == y[static_cast<std::size_t>(v)] ? std::log(0.7) : std::log(0.15);
                const double expect = m.log_conditional(xu, X.row(v).transpose()) + lab;
                CHECK(std::abs(beta.log_weights()(u, v) - expect) < 1e-12);
            }
        }
    }
    SUBCASE("stickiness ratio") {
        const Matrix X = gauss_rows(3, 2, rng);
        const std::vector<int> y{0, 0, 1};
        auto [joint, jr] = build_joint_beta(X, y, m, LabelModel{0.9, 2});
        auto [plain, pr] = models::build_beta(X, m);
        const Matrix label = joint.log_weights() - plain.log_weights();
        CHECK(std::abs(std::exp(label(1, 0) - label(2, 0)) - 9.0) < 1e-12);
    }
    SUBCASE("uninformative stickiness leaves the posterior alone") {
        const Matrix X = gauss_rows(6, 2, rng);
        const auto y = random_labels(6, 3, rng);
        auto [joint, jr] = build_joint_beta(X, y, m, LabelModel{1.0 / 3.0, 3});
        auto [plain, pr] = models::build_beta(X, m);
        CHECK((treemath::root_posterior(joint, jr) - treemath::root_posterior(plain, pr)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((treemath::edge_marginals(joint, jr).W - treemath::edge_marginals(plain, pr).W).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("errors") {
        const Matrix X = gauss_rows(3, 2, rng);
        CHECK_THROWS_AS(build_joint_beta(X, {0, kMissing, 1}, m, LabelModel{0.9, 2}), DataError);
        CHECK_THROWS_AS(build_joint_beta(X, {0, 2, 1}, m, LabelModel{0.9, 2}), DataError);
        CHECK_THROWS_AS(build_joint_beta(X, {0, 1, 1}, m, LabelModel{1.0, 2}), ConfigError);
        CHECK_THROWS_AS(validate_labels({kMissing, kMissing}, 2, 2), DataError);
        CHECK_THROWS_AS(validate_labels({0, 1}, 2, 3), DataError);
    }
}

TEST_CASE("flip deltas") {
    Rng rng(102);
    SUBCASE("guard against a no-op flip") {
        auto s = random_state(5, 2, 0.8, rng);
        CHECK_THROWS_AS(s.flip_delta(0, s.labels()[0]), ConfigError);
        CHECK_THROWS_AS(s.flip_delta(9, 0), DataError);
    }
    SUBCASE("flip and flip back negate") {
        auto s = random_state(8, 3, 0.85, rng);
        for (std::size_t i = 0; i < 8; ++i) {
            const int old = s.labels()[i];
            const int nl = (old + 1) % 3;
            const double fwd = s.flip_delta(i, nl);
            s.commit(i, nl);
            const double back = s.flip_delta(i, old);
            CHECK(std::abs(fwd + back) < 1e-9);
            s.commit(i, old);
        }
    }
    SUBCASE("T=15, K=3 matches recomputation") {
        auto s = random_state(15, 3, 0.75, rng);
        const double before = s.recompute();
        for (std::size_t i = 0; i < 15; ++i)
            for (int c = 0; c < 3; ++c) {
                if (c == s.labels()[i]) continue;
                InferenceState copy = s;
                const double d = s.flip_delta(i, c);
                copy.commit(i, c);
                CHECK(std::abs(d - (copy.recompute() - before)) < 1e-8);
            }
    }
    SUBCASE("100 committed flips on T=20 stay exact") {
        auto s = random_state(20, 2, 0.9, rng);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const std::size_t i = rng.index(20);
            const int nl = 1 - s.labels()[i];
            const double before = s.recompute();
            const double d = s.flip_delta(i, nl);
            s.commit(i, nl);
            const double after = s.recompute();
            worst = std::max({worst, std::abs(d - (after - before)), std::abs(s.log_partition() - after)});
        }
        CHECK(worst < 1e-8);
    }
    SUBCASE("linearized screen is a first-order estimate") {
        // Base weights strongly dominate the label factor: the screen is then close.
        auto s = random_state(10, 3, 0.34, rng);
        const double exact = s.flip_delta(3, (s.labels()[3] + 1) % 3);
        const double lin = s.linearized_delta(3, (s.labels()[3] + 1) % 3);
        CHECK(std::abs(exact - lin) < 0.05);
    }
}

TEST_CASE("greedy inference") {
    Rng rng(103);
    const GaussianModel m = walk_model(2, 0.6, 2.0);
    SUBCASE("fully observed input is returned unchanged") {
        const Matrix X = gauss_rows(6, 2, rng);
        const auto y = random_labels(6, 2, rng);
        const auto res = greedy_label_inference(X, y, m, LabelModel{0.9, 2});
        CHECK(res.labels == y);
        CHECK(res.sweeps == 0);
        auto [beta, roots] = build_joint_beta(X, y, m, LabelModel{0.9, 2});
        CHECK(std::abs(res.log_partition - treemath::log_partition(beta, roots).log_Z) < 1e-12);
    }
    SUBCASE("T=3 single missing label is the better completion") {
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix X = gauss_rows(3, 2, rng);
            std::vector<int> y = random_labels(3, 2, rng);
            y[rng.index(3)] = kMissing;
            const LabelModel lm{0.9, 2};
            const auto res = greedy_label_inference(X, y, m, lm, {.seed = static_cast<std::uint64_t>(trial)});
            const auto [best, best_Z] = best_completion(X, y, m, lm);
            CHECK(res.labels == best);
            CHECK(std::abs(res.log_partition - best_Z) < 1e-8);
        }
    }
    SUBCASE("observed labels never move and ln Z never drops") {
        const Matrix X = gauss_rows(25, 2, rng);
        std::vector<int> y = random_labels(25, 3, rng);
        for (std::size_t t = 0; t < 25; t += 2) y[t] = kMissing;
        const LabelModel lm{0.8, 3};
        auto [beta, roots] = models::build_beta(X, m);
        std::vector<int> init = y;
        for (auto& v : init)
            if (v == kMissing) v = 0;
        InferenceState s(beta.log_weights(), roots.log_values(), init, lm);
        double last = s.log_partition();
        for (int sweep = 0; sweep < 3; ++sweep)
            for (std::size_t t = 0; t < 25; t += 2)
                for (int c = 0; c < 3; ++c) {
                    if (c == s.labels()[t]) continue;
                    const double d = s.flip_delta(t, c);
                    if (d > 1e-9) {
                        s.commit(t, c);
                        CHECK(s.log_partition() >= last);
                        CHECK(std::abs(s.log_partition() - s.recompute()) < 1e-8);
                        last = s.log_partition();
                    }
                }
        const auto res = greedy_label_inference(X, y, m, lm, {.restarts = 3, .seed = 5});
        for (std::size_t t = 0; t < 25; ++t)
            if (y[t] != kMissing) CHECK(res.labels[t] == y[t]);
        CHECK(res.log_partition >= last - 5.0);
    }
    SUBCASE("uninformative stickiness commits nothing") {
        const Matrix X = gauss_rows(12, 2, rng);
        std::vector<int> y = random_labels(12, 2, rng);
        for (std::size_t t = 0; t < 12; t += 3) y[t] = kMissing;
        const auto res = greedy_label_inference(X, y, m, LabelModel{0.5, 2}, {.restarts = 2, .seed = 9});
        CHECK(res.flips == 0);
        CHECK(res.sweeps == 1);
    }
    SUBCASE("restarts find the exhaustive optimum") {
        int hits = 0;
        const int instances = 40;
        for (int trial = 0; trial < instances; ++trial) {
            const Matrix X = gauss_rows(9, 2, rng);
            std::vector<int> y = random_labels(9, 2, rng);
            const auto perm = testing::random_permutation(9, rng);
            for (std::size_t k = 0; k < 6; ++k) y[perm[k]] = kMissing;
            const LabelModel lm{0.85, 2};
            const auto res = greedy_label_inference(X, y, m, lm, {.restarts = 10, .seed = static_cast<std::uint64_t>(trial)});
            const auto [best, best_Z] = best_completion(X, y, m, lm);
            hits += std::abs(res.log_partition - best_Z) < 1e-9;
        }
        CHECK(hits >= static_cast<int>(0.95 * instances));
    }
    SUBCASE("final deltas are exact and nonpositive at a local optimum") {
        const Matrix X = gauss_rows(10, 2, rng);
        std::vector<int> y = random_labels(10, 3, rng);
        y[2] = y[5] = y[7] = kMissing;
        const LabelModel lm{0.8, 3};
        const auto res = greedy_label_inference(X, y, m, lm, {.seed = 3, .final_deltas = true});
        REQUIRE(res.deltas.rows() == 10);
        for (std::size_t t : {2u, 5u, 7u})
            for (int c = 0; c < 3; ++c) {
                if (c == res.labels[t]) {
                    CHECK(res.deltas(static_cast<Eigen::Index>(t), c) == 0.0);
                    continue;
                }
                std::vector<int> alt = res.labels;
                alt[t] = c;
                auto [b1, r1] = build_joint_beta(X, alt, m, lm);
                const double d = treemath::log_partition(b1, r1).log_Z - res.log_partition;
                CHECK(std::abs(res.deltas(static_cast<Eigen::Index>(t), c) - d) < 1e-8);
                CHECK(d <= 1e-9);
            }
    }
    SUBCASE("option errors") {
        const Matrix X = gauss_rows(4, 2, rng);
        const std::vector<int> y{0, kMissing, 1, kMissing};
        CHECK_THROWS_AS(greedy_label_inference(X, y, m, LabelModel{0.9, 2}, {.restarts = 0}), ConfigError);
        CHECK_THROWS_AS(greedy_label_inference(X, {kMissing, kMissing, kMissing, kMissing}, m, LabelModel{0.9, 2}), DataError);
        const models::TabularModel tab = models::tabular_init_iid(Matrix::Zero(4, 1), {2}, 0.5);
        CHECK_THROWS_AS(greedy_label_inference(Matrix::Zero(4, 1), y, tab, LabelModel{0.9, 2}, {.conditional_scale = 2.0}),
                        ConfigError);
    }
}

TEST_CASE("joint alternation refits the model") {
    Rng rng(104);
    const Task task = tree_task(20, 0.9, 0.5, Rng(7));
    const GaussianModel m0 = models::gaussian_init_iid(task.X);
    InferenceOptions o;
    o.seed = 1;
    o.joint_rounds = 1;
    o.joint_fit.max_iters = 20;
    const auto res = greedy_label_inference(task.X, task.observed, m0, LabelModel{0.9, 2}, o);
    REQUIRE(res.model);
    const auto off = label_offset(res.labels, LabelModel{0.9, 2});
    CHECK(likelihood::tdid_log_likelihood(task.X, *res.model, &off) > likelihood::tdid_log_likelihood(task.X, m0, &off));
}

TEST_CASE("tree-mutated labels beat the majority baseline on average") {
    double ours = 0.0, base = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Task task = tree_task(60, 0.9, 0.3, Rng(1000 + seed));
        const auto res = greedy_label_inference(task.X, task.observed, walk_model(kTaskDim, 0.3, 1.0), LabelModel{0.9, 2},
                                                {.restarts = 3, .seed = seed});
        ours += accuracy(res.labels, task);
        base += accuracy(majority_baseline(task.observed, 2), task);
    }
    CHECK(ours > base + 0.3);
}

TEST_CASE("alpha cross-validation") {
    const GaussianModel m = walk_model(kTaskDim, 0.3, 1.0);
    SUBCASE("single value and empty grid") {
        const Task task = tree_task(12, 0.9, 0.5, Rng(5));
        CHECK(cross_validate_alpha(task.X, task.observed, m, 2, {0.8}, 3).alpha == 0.8);
        CHECK_THROWS_AS(cross_validate_alpha(task.X, task.observed, m, 2, {}, 3), ConfigError);
        CHECK_THROWS_AS(cross_validate_alpha(task.X, task.observed, m, 2, {0.8, 0.9}, 1), ConfigError);
    }
    SUBCASE("selection rule") {
        const std::vector<double> grid{0.95, 0.6, 0.8, 0.4};
        CHECK(select_alpha(grid, {0.7, 0.7, 0.7, 0.7}, {-0.3, -0.3, -0.3, -0.3}) == 3);
        CHECK(select_alpha({0.95, 0.6, 0.8}, {0.7, 0.7, 0.7}, {-0.3, -0.3, -0.3}) == 1);
        CHECK(select_alpha(grid, {0.7, 0.7, 0.7, 0.7}, {-0.3, -0.3, -0.2, -0.3}) == 2);
        CHECK(select_alpha(grid, {0.8, 0.7, 0.7, 0.7}, {-0.9, -0.3, -0.2, -0.3}) == 0);
        CHECK(select_alpha({0.6, 0.4}, {0.5, 0.5}, {-1.0, -1.0}) == 1);
        CHECK_THROWS_AS(select_alpha({}, {}, {}), ConfigError);
    }
    SUBCASE("uniform observed labels favour the stickiest alpha") {
        Task task = tree_task(12, 0.9, 0.5, Rng(6));
        for (auto& y : task.observed)
            if (y != kMissing) y = 1;
        const auto sel = cross_validate_alpha(task.X, task.observed, m, 2, {0.95, 0.6, 0.8}, 3);
        CHECK(sel.accuracy[0] == 1.0);
        CHECK(sel.accuracy[1] == 1.0);
        CHECK(sel.log_score[0] > sel.log_score[2]);
        CHECK(sel.log_score[2] > sel.log_score[1]);
        CHECK(sel.alpha == 0.95);
    }
    SUBCASE("sticky labels select a sticky alpha") {
        int sticky = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const Task task = tree_task(40, 0.95, 0.5, Rng(2000 + seed));
            const auto sel = cross_validate_alpha(task.X, task.observed, m, 2, {0.55, 0.7, 0.85, 0.95}, 4, {.seed = seed});
            CAPTURE(seed);
            CAPTURE(sel.alpha);
            sticky += sel.alpha >= 0.7;
        }
        CHECK(sticky >= 8);
    }
}
