#include "outtree/errors.hpp"
#include "outtree/treemath.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace outtree;
using namespace outtree::treemath;
using outtree::testing::rel_err;

namespace {

Matrix unit_beta(std::size_t n) {
    Matrix b = Matrix::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    b.diagonal().setZero();
    return b;
}

Vector ones(std::size_t n) { return Vector::Ones(static_cast<Eigen::Index>(n)); }

}  // namespace

TEST_CASE("out-Laplacian uses row sums on the diagonal") {
    SUBCASE("T=2 unit weights") {
        const auto Q = build_out_laplacian(WeightMatrix::from_weights(unit_beta(2))).Q;
        CHECK(Q(0, 0) == 1.0);
        CHECK(Q(0, 1) == -1.0);
        CHECK(Q(1, 0) == -1.0);
        CHECK(Q(1, 1) == 1.0);
    }
    SUBCASE("T=3 unit weights") {
        const auto Q = build_out_laplacian(WeightMatrix::from_weights(unit_beta(3))).Q;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(Q(i, j) == (i == j ? 2.0 : -1.0));
    }
    SUBCASE("T=4 random rows sum to zero") {
        Rng rng(11);
        const auto Q = build_out_laplacian(WeightMatrix::from_weights(testing::random_beta(4, rng))).Q;
        for (int u = 0; u < 4; ++u) {
            CHECK(std::abs(Q.row(u).sum()) <= 1e-15);
            for (int v = 0; v < 4; ++v)
                if (u != v) CHECK(Q(u, v) <= 0.0);
        }
    }
    CHECK_THROWS_AS(WeightMatrix::from_weights(Matrix::Zero(1, 1)), DataError);
}

TEST_CASE("weight matrix validation") {
    Matrix b = unit_beta(3);
    b(0, 1) = -0.5;
    CHECK_THROWS_AS(WeightMatrix::from_weights(b), DataError);
    b = unit_beta(3);
    b(1, 1) = 0.3;
    CHECK_THROWS_AS(WeightMatrix::from_weights(b), DataError);
    Matrix lb = Matrix::Zero(3, 3);
    lb(0, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(WeightMatrix::from_log(lb), DataError);
    CHECK_THROWS_AS(RootWeights::from_weights(Vector::Zero(3)), DataError);
}

TEST_CASE("per-root log partition") {
    SUBCASE("T=3 unit weights count 3 trees per root") {
        const Vector lz = log_partition_per_root(WeightMatrix::from_weights(unit_beta(3)));
        for (int r = 0; r < 3; ++r) CHECK(lz(r) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    }
    SUBCASE("T=2 unit weights") {
        const Vector lz = log_partition_per_root(WeightMatrix::from_weights(unit_beta(2)));
        CHECK(std::abs(lz(0)) < 1e-15);
        CHECK(std::abs(lz(1)) < 1e-15);
    }
    SUBCASE("T=5 random matches enumeration") {
        Rng rng(5);
        for (int rep = 0; rep < 5; ++rep) {
            const auto beta = WeightMatrix::from_weights(testing::random_beta(5, rng));
            const auto roots = RootWeights::from_weights(testing::random_roots(5, rng));
            const Vector lz = log_partition_per_root(beta);
            const Vector oracle = *brute_force_log_partition(beta, roots).partition.per_root_log_Zr;
            for (int r = 0; r < 5; ++r) CHECK(rel_err(std::exp(lz(r)), std::exp(oracle(r))) < 1e-9);
        }
    }
    SUBCASE("disconnected support gives -inf") {
        // node 2 can only be a parent; it is the only possible root
        Matrix b = unit_beta(3);
        b(2, 0) = 0.0;
        b(2, 1) = 0.0;
        const Vector lz = log_partition_per_root(WeightMatrix::from_weights(b));
        CHECK(lz(0) == -INFINITY);
        CHECK(lz(1) == -INFINITY);
        CHECK(std::isfinite(lz(2)));
    }
}

TEST_CASE("log partition through the augmented Laplacian") {
    SUBCASE("T=3 unit weights: 9 out-trees") {
        const auto lp = log_partition(WeightMatrix::from_weights(unit_beta(3)), RootWeights::from_weights(ones(3)));
        CHECK(std::exp(lp.log_Z) == doctest::Approx(9.0).epsilon(1e-12));
    }
    SUBCASE("T=2 unit weights: 2 out-trees") {
        const auto lp = log_partition(WeightMatrix::from_weights(unit_beta(2)), RootWeights::from_weights(ones(2)));
        CHECK(std::exp(lp.log_Z) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("T=5 random against enumeration") {
        Rng rng(7);
        const auto beta = WeightMatrix::from_weights(testing::random_beta(5, rng));
        const auto roots = RootWeights::from_weights(testing::random_roots(5, rng));
        const auto lp = log_partition(beta, roots, true);
        const auto bf = brute_force_log_partition(beta, roots);
        CHECK(rel_err(std::exp(lp.log_Z), std::exp(bf.partition.log_Z)) < 1e-9);
        REQUIRE(lp.per_root_log_Zr);
        std::vector<double> terms;
        for (int r = 0; r < 5; ++r) terms.push_back(roots.log_values()(r) + (*lp.per_root_log_Zr)(r));
        CHECK(rel_err(testing::log_sum_exp(terms), lp.log_Z) < 1e-9);
    }
    SUBCASE("no positive out-tree is an explicit error") {
        Matrix b = Matrix::Zero(3, 3);
        b(0, 1) = 1.0;  // node 2 isolated
        CHECK_THROWS_AS(log_partition(WeightMatrix::from_weights(b), RootWeights::from_weights(ones(3))),
                        ZeroPartition);
        // spanning root exists but carries zero root weight
        Matrix c = Matrix::Zero(2, 2);
        c(0, 1) = 1.0;
        Vector p(2);
        p << 1.0, 0.0;
        CHECK_THROWS_AS(log_partition(WeightMatrix::from_weights(c), RootWeights::from_weights(p)), ZeroPartition);
    }
    SUBCASE("huge log-weight ranges stay finite") {
        Rng rng(3);
        Matrix lb = testing::random_beta(6, rng).array().log().matrix();
        lb.row(2).array() -= 4000.0;  // node 2 is a terrible child
        lb.col(4).array() += 3000.0;  // node 4 is a superb parent
        lb.diagonal().setConstant(-INFINITY);
        const auto beta = WeightMatrix::from_log(lb);
        Vector lr = Vector::Zero(6);
        lr(1) = -2500.0;
        const auto roots = RootWeights::from_log(lr);
        const auto lp = log_partition(beta, roots, true);
        CHECK(std::isfinite(lp.log_Z));
        const auto bf = brute_force_log_partition(beta, roots);
        CHECK(std::abs(lp.log_Z - bf.partition.log_Z) < 1e-9 * std::abs(bf.partition.log_Z));
    }
}

TEST_CASE("brute-force enumeration") {
    SUBCASE("T=3 has 9 out-trees") {
        const auto bf = brute_force_log_partition(WeightMatrix::from_weights(unit_beta(3)),
                                                  RootWeights::from_weights(ones(3)), true);
        CHECK(bf.trees.size() == 9);
        for (const auto& t : bf.trees) CHECK_NOTHROW(t.validate());
        // X1 <- X2 <- X3 is an out-tree rooted at X3
        OutTree chain;
        chain.root = 2;
        chain.parent = {1, 2, std::nullopt};
        CHECK(std::find(bf.trees.begin(), bf.trees.end(), chain) != bf.trees.end());
    }
    SUBCASE("T=4 unit counts 64") {
        const auto bf = brute_force_log_partition(WeightMatrix::from_weights(unit_beta(4)),
                                                  RootWeights::from_weights(ones(4)));
        CHECK(std::exp(bf.partition.log_Z) == doctest::Approx(64.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(brute_force_log_partition(WeightMatrix::from_weights(unit_beta(8)),
                                              RootWeights::from_weights(ones(8))),
                    ConfigError);
}

TEST_CASE("root posterior") {
    SUBCASE("symmetric weights, uniform roots") {
        Rng rng(2);
        Matrix b = testing::random_beta(5, rng);
        b = (0.5 * (b + b.transpose())).eval();
        const Vector post = root_posterior(WeightMatrix::from_weights(b), RootWeights::from_weights(ones(5)));
        for (int r = 0; r < 5; ++r) CHECK(post(r) == doctest::Approx(0.2).epsilon(1e-10));
    }
    SUBCASE("T=2 with a single usable edge") {
        Matrix b = Matrix::Zero(2, 2);
        b(0, 1) = 0.7;  // edge 2 -> 1
        const Vector post = root_posterior(WeightMatrix::from_weights(b), RootWeights::from_weights(ones(2)));
        CHECK(post(0) == 0.0);
        CHECK(post(1) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("T=4 random against enumeration grouped by root") {
        Rng rng(9);
        const auto beta = WeightMatrix::from_weights(testing::random_beta(4, rng));
        const auto roots = RootWeights::from_weights(testing::random_roots(4, rng));
        const auto bf = brute_force_log_partition(beta, roots, true);
        Vector oracle = Vector::Zero(4);
        for (std::size_t i = 0; i < bf.trees.size(); ++i)
            oracle(static_cast<Eigen::Index>(bf.trees[i].root)) +=
                std::exp(bf.tree_log_weights[i] - bf.partition.log_Z);
        const Vector post = root_posterior(beta, roots);
        CHECK(std::abs(post.sum() - 1.0) < 1e-10);
        for (int r = 0; r < 4; ++r) CHECK(std::abs(post(r) - oracle(r)) < 1e-10);
    }
}

TEST_CASE("edge marginals") {
    SUBCASE("T=2 unit") {
        const auto em = edge_marginals(WeightMatrix::from_weights(unit_beta(2)), RootWeights::from_weights(ones(2)));
        CHECK(em.W(0, 0) == 0.0);
        CHECK(em.W(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(em.W(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("T=5 random against enumeration frequencies, both routes") {
        Rng rng(21);
        const auto beta = WeightMatrix::from_weights(testing::random_beta(5, rng));
        const auto roots = RootWeights::from_weights(testing::random_roots(5, rng));
        const auto bf = brute_force_log_partition(beta, roots, true);
        Matrix oracle = Matrix::Zero(5, 5);
        for (std::size_t i = 0; i < bf.trees.size(); ++i) {
            const double w = std::exp(bf.tree_log_weights[i] - bf.partition.log_Z);
            for (std::size_t u = 0; u < 5; ++u)
                if (bf.trees[i].parent[u])
                    oracle(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(*bf.trees[i].parent[u])) += w;
        }
        const auto fast = edge_marginals(beta, roots, false);
        const auto slow = edge_marginals(beta, roots, true);
        CHECK((fast.W - oracle).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((slow.W - oracle).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(std::abs(fast.W.sum() - 4.0) < 1e-8);
        REQUIRE(slow.per_root.size() == 5);
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t u = 0; u < 5; ++u) {
                const double s = slow.per_root[r].row(static_cast<Eigen::Index>(u)).sum();
                CHECK(std::abs(s - (u == r ? 0.0 : 1.0)) < 1e-8);
            }
    }
}

TEST_CASE("tree entropy") {
    SUBCASE("T=3 unit is uniform over 3 trees") {
        CHECK(tree_entropy(WeightMatrix::from_weights(unit_beta(3)), 1) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    }
    SUBCASE("single supported tree has zero entropy") {
        Matrix b = Matrix::Zero(4, 4);
        b(0, 3) = 0.3;  // 3 -> 0
        b(1, 0) = 0.9;  // 0 -> 1
        b(2, 0) = 0.2;  // 0 -> 2
        CHECK(std::abs(tree_entropy(WeightMatrix::from_weights(b), 3)) < 1e-12);
    }
    SUBCASE("T=4 random against enumeration") {
        Rng rng(4);
        const auto beta = WeightMatrix::from_weights(testing::random_beta(4, rng));
        const auto roots = RootWeights::from_weights(ones(4));
        const auto bf = brute_force_log_partition(beta, roots, true);
        for (std::size_t r = 0; r < 4; ++r) {
            const double lzr = (*bf.partition.per_root_log_Zr)(static_cast<Eigen::Index>(r));
            double h = 0.0;
            for (std::size_t i = 0; i < bf.trees.size(); ++i) {
                if (bf.trees[i].root != r) continue;
                const double lq = bf.tree_log_weights[i] - lzr;
                h -= std::exp(lq) * lq;
            }
            const double got = tree_entropy(beta, r);
            CHECK(std::abs(got - h) < 1e-8);
            CHECK(got >= -1e-8);
        }
    }
}

TEST_CASE("incremental log-determinant edits") {
    Rng rng(77);
    const std::size_t n = 20;
    const auto beta = WeightMatrix::from_weights(testing::random_beta(n, rng));
    const auto roots = RootWeights::from_weights(testing::random_roots(n, rng));

    SUBCASE("empty edit list is a bitwise no-op") {
        LogdetSession s(beta, roots);
        const double before = s.log_det();
        s.apply({});
        CHECK(s.log_det() == before);
    }
    SUBCASE("edit then its reversal") {
        LogdetSession s(beta, roots);
        const double before = s.log_partition();
        const double old = s.log_weight(3, 7);
        const LogdetSession::Edit fwd{3, 7, std::log(5.0)};
        const LogdetSession::Edit back{3, 7, old};
        s.apply(std::span(&fwd, 1));
        CHECK(std::abs(s.log_partition() - before) > 1e-6);
        s.apply(std::span(&back, 1));
        CHECK(std::abs(s.log_partition() - before) < 1e-10);
    }
    SUBCASE("batch of T-1 random edits matches recomputation") {
        LogdetSession s(beta, roots);
        std::vector<LogdetSession::Edit> edits;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            std::size_t u = rng.index(n), v = rng.index(n);
            if (u == v) v = (v + 1) % n;
            edits.push_back({u, v, std::log(0.01 + rng.uniform())});
        }
        s.apply(edits);
        const double fresh = log_partition(s.weights(), roots).log_Z;
        CHECK(std::abs(s.log_partition() - fresh) < 1e-8);
        CHECK(s.edits_since_factorization() == n - 1);
        // crossing 2T cumulative edits triggers refactorization
        s.apply(edits);
        s.apply(edits);
        CHECK(s.edits_since_factorization() < s.refactor_threshold());
        CHECK(std::abs(s.log_partition() - log_partition(s.weights(), roots).log_Z) < 1e-8);
    }
    SUBCASE("linearized delta approximates small edits") {
        LogdetSession s(beta, roots);
        const LogdetSession::Edit e{4, 9, s.log_weight(4, 9) + 1e-6};
        const double lin = s.linearized_delta(std::span(&e, 1));
        LogdetSession t = s;
        t.apply(std::span(&e, 1));
        CHECK(std::abs((t.log_partition() - s.log_partition()) - lin) < 1e-10);
    }
    SUBCASE("edit that removes every out-tree is rejected and leaves state intact") {
        Matrix b = Matrix::Zero(2, 2);
        b(0, 1) = 1.0;
        LogdetSession s(WeightMatrix::from_weights(b), RootWeights::from_weights(ones(2)));
        const double before = s.log_det();
        const LogdetSession::Edit kill{0, 1, -INFINITY};
        CHECK_THROWS_AS(s.apply(std::span(&kill, 1)), CapacitanceFault);
        CHECK(s.log_det() == before);
        CHECK(s.log_weight(0, 1) == 0.0);
    }
}

TEST_CASE("invariants on random instances") {
    Rng rng(1234);
    SUBCASE("determinant equals enumeration, T <= 5") {
        for (std::size_t n = 2; n <= 5; ++n)
            for (int rep = 0; rep < 20; ++rep) {
                const auto beta = WeightMatrix::from_weights(testing::random_beta(n, rng, 0.0, 1.0));
                const auto roots = RootWeights::from_weights(testing::random_roots(n, rng));
                const double det = log_partition(beta, roots).log_Z;
                const double bf = brute_force_log_partition(beta, roots).partition.log_Z;
                CHECK(rel_err(std::exp(det), std::exp(bf)) < 1e-9);
            }
    }
    SUBCASE("scaling covariance") {
        const std::size_t n = 6;
        const Matrix b = testing::random_beta(n, rng);
        const auto roots = RootWeights::from_weights(testing::random_roots(n, rng));
        const auto base = WeightMatrix::from_weights(b);
        for (double s : {-700.0, -3.0, 2.5, 900.0}) {
            Matrix lb = base.log_weights().array() + s;
            const auto shifted = WeightMatrix::from_log(lb);
            const Vector a = log_partition_per_root(base);
            const Vector c = log_partition_per_root(shifted);
            for (Eigen::Index r = 0; r < a.size(); ++r)
                CHECK(std::abs(c(r) - a(r) - static_cast<double>(n - 1) * s) < 1e-9 * std::max(1.0, std::abs(c(r))));
            CHECK((root_posterior(shifted, roots) - root_posterior(base, roots)).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((edge_marginals(shifted, roots).W - edge_marginals(base, roots).W).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
    SUBCASE("permutation equivariance") {
        const std::size_t n = 7;
        const Matrix b = testing::random_beta(n, rng);
        const Vector p = testing::random_roots(n, rng);
        const auto beta = WeightMatrix::from_weights(b);
        const auto roots = RootWeights::from_weights(p);
        const auto perm = testing::random_permutation(n, rng);
        const auto pbeta = WeightMatrix::from_weights(testing::permute(b, perm));
        const auto proots = RootWeights::from_weights(testing::permute(p, perm));
        CHECK(std::abs(log_partition(beta, roots).log_Z - log_partition(pbeta, proots).log_Z) < 1e-10);
        const Vector lz = log_partition_per_root(beta);
        const Vector plz = log_partition_per_root(pbeta);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(plz(static_cast<Eigen::Index>(perm[i])) - lz(static_cast<Eigen::Index>(i))) < 1e-10);
    }
    SUBCASE("symmetric weights collapse every cofactor") {
        Matrix b = testing::random_beta(6, rng);
        b = (b + b.transpose()).eval();
        const Vector lz = log_partition_per_root(WeightMatrix::from_weights(b));
        for (Eigen::Index r = 1; r < lz.size(); ++r) CHECK(std::abs(lz(r) - lz(0)) < 1e-9);
    }
}

TEST_CASE("matrix dump round-trips") {
    Rng rng(8);
    Matrix m = testing::random_beta(4, rng).array().log().matrix();
    std::stringstream ss;
    write_matrix_tsv(ss, m);
    CHECK(ss.str().rfind("# outtree-matrix T=4\n", 0) == 0);
    const Matrix back = read_matrix_tsv(ss);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(back(i, j) == m(i, j));
}

TEST_CASE("nearly singular Laplacians keep full accuracy") {
    Rng rng(77);
    // Two tight pairs joined by an edge far below double precision relative
    // to the in-pair weights; every log partition is dominated by that edge.
    for (double gap : {40.0, 300.0, 900.0}) {
        CAPTURE(gap);
        Matrix L = Matrix::Constant(5, 5, -2.0 * gap);
        L(0, 1) = L(1, 0) = 0.0;
        L(2, 3) = L(3, 2) = 0.1;
        L(4, 2) = -0.5;
        L(2, 0) = -gap;
        L(0, 4) = -gap - 3.0;
        for (Eigen::Index u = 0; u < 5; ++u)
            for (Eigen::Index v = 0; v < 5; ++v)
                if (u != v) L(u, v) += 0.01 * rng.uniform();
        const auto beta = WeightMatrix::from_log(L);
        Vector lp(5);
        for (Eigen::Index r = 0; r < 5; ++r) lp(r) = -gap * rng.uniform();
        const auto roots = RootWeights::from_log(lp);
        const auto bf = brute_force_log_partition(beta, roots);
        const auto lz = log_partition(beta, roots, true);
        CHECK(std::abs(lz.log_Z - bf.partition.log_Z) < 1e-9 * std::max(1.0, std::abs(bf.partition.log_Z)));
        const Vector per = *lz.per_root_log_Zr;
        const Vector ref = *bf.partition.per_root_log_Zr;
        CHECK((per - ref).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
        LogdetSession s(beta, roots);
        CHECK(std::abs(s.log_partition() - bf.partition.log_Z) < 1e-9 * std::max(1.0, std::abs(bf.partition.log_Z)));
        const LogdetSession::Edit e{1, 0, -1.0};
        s.apply(std::span(&e, 1));
        Matrix L2 = L;
        L2(1, 0) = -1.0;
        const auto bf2 = brute_force_log_partition(WeightMatrix::from_log(L2), roots);
        CHECK(std::abs(s.log_partition() - bf2.partition.log_Z) < 1e-9 * std::max(1.0, std::abs(bf2.partition.log_Z)));
    }
}
