#include "doctest.h"
#include "test_util.hpp"

#include "outtree/cli/baselines.hpp"
#include "outtree/cli/commands.hpp"
#include "outtree/cli/config.hpp"
#include "outtree/cli/experiments.hpp"
#include "outtree/cli/io.hpp"
#include "outtree/cli/plotdata.hpp"
#include "outtree/errors.hpp"
#include "outtree/format.hpp"
#include "outtree/likelihood.hpp"
#include "outtree/models.hpp"
#include "outtree/sampler.hpp"
#include "outtree/semisup.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace outtree;
using namespace outtree::cli;

namespace fs = std::filesystem;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Dataset parse(const std::string& text, const CsvSchema& schema = {}) {
    std::istringstream is(text);
    return read_csv(is, schema, "toy.csv");
}

std::string error_of(const std::string& text, const CsvSchema& schema = {}) {
    try {
        parse(text, schema);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("outtree_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

RunConfig config_for(const std::string& subcommand, std::initializer_list<std::pair<const char*, std::string>> kv) {
    RunConfig c;
    c.subcommand = subcommand;
    for (const auto& [k, v] : kv) c.set(k, v);
    return c;
}

int run(const RunConfig& c, std::string* out = nullptr, std::string* err = nullptr) {
    std::ostringstream o, e;
    const int code = run_command(c, o, e);
    if (out) *out = o.str();
    if (err) *err = e.str();
    return code;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) out.push_back(cell);
    return out;
}

Matrix two_clusters(std::size_t T, Rng& rng) {
    Matrix X(static_cast<Eigen::Index>(T), 2);
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
        const double c = rng.uniform() < 0.5 ? -5.0 : 5.0;
        X(t, 0) = c + rng.normal();
        X(t, 1) = rng.normal();
    }
    return X;
}

}  // namespace

// ----------------------------------------------------------------------- CSV

TEST_CASE("csv: two numeric rows give a 2 x 2 dataset") {
    const auto d = parse("a,b\n1,2\n3.5,-4\n");
    CHECK(d.size() == 2);
    CHECK(d.X.cols() == 2);
    CHECK(d.columns == std::vector<std::string>{"a", "b"});
    CHECK(d.X(1, 0) == 3.5);
    CHECK(d.X(1, 1) == -4.0);
    CHECK_FALSE(d.has_labels());
}

TEST_CASE("csv: empty label cells are missing") {
    CsvSchema s;
    s.label_column = "y";
    const auto d = parse("a,y\n1,0\n2,\n3,1\n", s);
    CHECK(d.labels == std::vector<int>{0, semisup::kMissing, 1});
    CHECK(d.X.cols() == 1);
}

TEST_CASE("csv: export then ingest reproduces every value exactly") {
    Rng rng(3);
    Matrix X(20, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = std::exp(10.0 * rng.normal()) * (rng.uniform() - 0.5);
    auto d = make_dataset(X);
    d.label_column = "label";
    for (int t = 0; t < 20; ++t) d.labels.push_back(t % 3 == 0 ? semisup::kMissing : t % 2);
    std::stringstream ss;
    write_csv(ss, d);
    CsvSchema s;
    s.label_column = "label";
    const auto back = read_csv(ss, s);
    CHECK(back.X == X);
    CHECK(back.labels == d.labels);
    CHECK(back.columns == d.columns);
}

TEST_CASE("csv: errors carry line and column") {
    CHECK(error_of("a,b\n1,2\n3\n").find("toy.csv:3") != std::string::npos);
    const auto bad = error_of("a,b\n1,2\n3,x\n");
    CHECK(bad.find("toy.csv:3") != std::string::npos);
    CHECK(bad.find("column 'b'") != std::string::npos);
    CHECK(error_of("a,b\n1,\n").find("column 'b'") != std::string::npos);
    CsvSchema s;
    s.alphabet = {2, 3};
    const auto cat = error_of("a,b\n0,2\n1,3\n", s);
    CHECK(cat.find("toy.csv:3") != std::string::npos);
    CHECK(cat.find("unknown category") != std::string::npos);
    CHECK(error_of("").find("header") != std::string::npos);
}

TEST_CASE("csv: header of a file") {
    TempDir dir;
    std::ofstream(dir / "h.csv") << "x,\"y z\",label\n1,2,3\n";
    CHECK(csv_header(dir / "h.csv") == std::vector<std::string>{"x", "y z", "label"});
}

TEST_CASE("table: write and read round trip, comments skipped") {
    Table t;
    t.header = {"a", "b"};
    t.add({"1", "x"});
    t.add({"2", "y"});
    std::stringstream ss;
    ss << "# note\n";
    t.write(ss);
    const auto back = Table::read(ss);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
    CHECK_THROWS_AS(back.column("c"), DataError);
    CHECK_THROWS_AS(t.add({"3"}), DataError);
}

// -------------------------------------------------------------------- config

TEST_CASE("config: file values, flag overrides and validation") {
    RunConfig c;
    std::istringstream is("# comment\nseed = 7\nsplits = 0.6, 0.2, 0.2\nalpha-grid = 0.7,0.9\nmax-iters = 12\n");
    c.load(is);
    CHECK(c.seed == 7u);
    CHECK(c.splits == std::array<double, 3>{0.6, 0.2, 0.2});
    CHECK(c.alpha_grid == std::vector<double>{0.7, 0.9});
    CHECK(c.max_iters == 12);
    c.set("max-iters", "30");
    CHECK(c.max_iters == 30);
    CHECK_NOTHROW(c.validate());

    c.set("splits", "0.5,0.2,0.2");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.set("splits", "0.8,0.3,-0.1");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(c.set("splits", "0.5,0.5"), ConfigError);
    CHECK_THROWS_AS(c.set("nonsense", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("seed", "-1"), ConfigError);
    CHECK_THROWS_AS(c.set("max-iters", "ten"), ConfigError);
    CHECK_THROWS_AS(c.set("model-family", "cubic"), ConfigError);

    std::istringstream bad("seed 3\n");
    try {
        RunConfig d;
        d.load(bad, "run.cfg");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("run.cfg:1") != std::string::npos);
    }
}

TEST_CASE("config: defaults, seed requirement and hash") {
    RunConfig c;
    CHECK(c.splits == std::array<double, 3>{0.8, 0.1, 0.1});
    CHECK(c.restarts == 10);
    c.subcommand = "sample";
    CHECK_THROWS_AS(c.require_seed(), ConfigError);
    const auto h = c.hash();
    CHECK(h.size() == 16);
    CHECK(c.hash() == h);
    c.set("seed", "1");
    CHECK(c.hash() != h);
    CHECK(c.canonical().size() == config_keys().size() + 1);
}

// -------------------------------------------------------------------- splits

TEST_CASE("splits: disjoint and exhaustive") {
    for (std::size_t T : {10u, 37u, 600u}) {
        const auto s = make_split(T, {0.8, 0.1, 0.1}, Rng(T));
        std::set<std::size_t> all;
        for (const auto* part : {&s.train, &s.validation, &s.test}) {
            CHECK_FALSE(part->empty());
            all.insert(part->begin(), part->end());
        }
        CHECK(all.size() == T);
        CHECK(s.train.size() + s.validation.size() + s.test.size() == T);
        CHECK(s.train.size() == static_cast<std::size_t>(std::llround(0.8 * T)));

        std::vector<int> tested(T, 0);
        for (int k = 0; k < 10; ++k) {
            const auto f = fold_split(T, 10, k, Rng(1));
            std::set<std::size_t> u;
            for (const auto* part : {&f.train, &f.validation, &f.test}) u.insert(part->begin(), part->end());
            CHECK(u.size() == T);
            CHECK(f.train.size() + f.validation.size() + f.test.size() == T);
            for (auto i : f.test) ++tested[i];
        }
        for (int n : tested) CHECK(n == 1);
    }
    CHECK_THROWS_AS(make_split(5, {0.8, 0.1, 0.1}, Rng(0)), ConfigError);
    CHECK_THROWS_AS(fold_split(10, 2, 0, Rng(0)), ConfigError);
}

// -------------------------------------------------------------------- Parzen

TEST_CASE("parzen: one training point is one Gaussian bump") {
    Matrix train(1, 2);
    train << 0.5, -1.0;
    Matrix pts(3, 2);
    pts << 0, 0, 1, 1, -2, 3;
    const double s = 0.7;
    double expect = 0.0;
    for (int i = 0; i < 3; ++i)
        expect += -kLog2Pi - 2.0 * std::log(s) - (pts.row(i) - train.row(0)).squaredNorm() / (2 * s * s);
    CHECK(parzen_log_likelihood(train, pts, s) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("parzen: large bandwidth approaches one wide Gaussian") {
    Rng rng(5);
    Matrix train(30, 3), pts(10, 3);
    for (Eigen::Index i = 0; i < train.size(); ++i) train(i) = rng.normal();
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = rng.normal();
    const double s = 1e4;
    const Vector mu = train.colwise().mean().transpose();
    double wide = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        wide += -1.5 * kLog2Pi - 3.0 * std::log(s) - (pts.row(i).transpose() - mu).squaredNorm() / (2 * s * s);
    CHECK(std::abs(parzen_log_likelihood(train, pts, s) - wide) < 1e-6);

    // Well past the data scale the score only falls.
    double prev = parzen_log_likelihood(train, pts, 4.0);
    for (double b : {8.0, 16.0, 64.0, 256.0, 1024.0}) {
        const double v = parzen_log_likelihood(train, pts, b);
        CHECK(v < prev);
        prev = v;
    }
    const auto r = baseline_parzen(train, pts, pts);
    CHECK(r.grid.size() == 25);
    CHECK(r.validation_curve.size() == 25);
    CHECK(r.validation == doctest::Approx(*std::max_element(r.validation_curve.begin(), r.validation_curve.end())));
    CHECK_THROWS_AS(parzen_log_likelihood(train, pts, 0.0), ConfigError);
}

// ----------------------------------------------------------------------- GMM

TEST_CASE("gmm: k = 1 is the Gaussian maximum likelihood fit in one step") {
    Rng rng(11);
    Matrix X(200, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = 2.0 * rng.normal() + 1.0;
    Rng r(0);
    GmmOptions o;
    o.ridge_scale = 0.0;
    const auto fit = fit_gmm(X, 1, r, o);
    CHECK(fit.converged);
    CHECK(fit.trace.size() == 2);
    CHECK(fit.trace[1] == doctest::Approx(fit.trace[0]).epsilon(1e-12));
    const auto [mean, cov] = models::sample_moments(X);
    CHECK((fit.model.means[0] - mean).norm() < 1e-12);
    CHECK((fit.model.covs[0] - cov).norm() < 1e-10);
    CHECK(fit.model.weights(0) == doctest::Approx(1.0));
    const auto g = models::gaussian_init_iid(X, {0.0});
    CHECK(gmm_log_likelihood(fit.model, X) == doctest::Approx(likelihood::iid_log_likelihood(X, g)).epsilon(1e-12));
}

TEST_CASE("gmm: EM objective never decreases") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix X = gen_spiral(SpiralSpec{150, 0.3, 2.0}, Rng(seed));
        for (int k : {2, 3, 5}) {
            Rng r(seed + 100);
            const auto fit = fit_gmm(X, k, r);
            for (std::size_t i = 1; i < fit.trace.size(); ++i)
                CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-8 * std::abs(fit.trace[i - 1]));
        }
    }
}

TEST_CASE("gmm: two separated clusters select k = 2") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Matrix train = two_clusters(200, rng), val = two_clusters(100, rng), test = two_clusters(50, rng);
        const auto res = baseline_gmm(train, val, test, 5, 3, Rng(seed));
        hits += res.per_k[res.selected].k == 2;
        CHECK(res.per_k.size() == 5);
    }
    CHECK(hits >= 9);
}

TEST_CASE("gmm: collapsed components are reseeded") {
    Matrix X(6, 1);
    X << 0, 0, 0, 0, 0, 10;
    Rng r(1);
    const auto fit = fit_gmm(X, 3, r);
    CHECK(fit.model.components() == 3);
    for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(std::isfinite(fit.trace[i]));
    CHECK_THROWS_AS(fit_gmm(X, 7, r), DataError);
}

// -------------------------------------------------------------------- spiral

TEST_CASE("spiral: noise 0 lies on the curve; default size 600") {
    const SpiralSpec spec{600, 0.0, 2.0};
    const Matrix X = gen_spiral(spec, Rng(1));
    CHECK(X.rows() == 600);
    CHECK(X.cols() == 3);
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
        const double s = X(t, 2);
        CHECK(s >= 0.0);
        CHECK(s <= 4.0 * std::numbers::pi);
        CHECK((X.row(t).transpose() - spiral_point(s)).norm() < 1e-12);
    }
    CHECK(SpiralSpec{}.T == 600);
    CHECK_THROWS_AS(gen_spiral(SpiralSpec{5, 0.1, 2.0}, Rng(0)), ConfigError);
    CHECK_THROWS_AS(gen_spiral(SpiralSpec{50, -0.1, 2.0}, Rng(0)), ConfigError);
}

TEST_CASE("spiral: doubling the noise doubles the mean distance to the curve") {
    auto mean_distance = [](double noise) {
        const Matrix X = gen_spiral(SpiralSpec{3000, noise, 2.0}, Rng(42));
        double s = 0.0;
        for (Eigen::Index t = 0; t < X.rows(); ++t) s += distance_to_spiral(X.row(t).transpose(), 2.0);
        return s / static_cast<double>(X.rows());
    };
    const double a = mean_distance(0.05), b = mean_distance(0.1);
    CHECK(b / a == doctest::Approx(2.0).epsilon(0.05));
    // Distance to a curve in 3D is the norm of the 2D normal-plane noise.
    CHECK(a == doctest::Approx(0.05 * std::sqrt(std::numbers::pi / 2.0)).epsilon(0.05));
}

// ----------------------------------------------------------------------- PCA

TEST_CASE("pca: axes follow decreasing variance and decorrelate") {
    Rng rng(2);
    Matrix X(500, 4);
    const double scale[] = {0.5, 3.0, 1.0, 0.1};
    for (Eigen::Index t = 0; t < X.rows(); ++t)
        for (int d = 0; d < 4; ++d) X(t, d) = scale[d] * rng.normal() + d;
    const Matrix P = pca_project(X, 3);
    CHECK(P.cols() == 3);
    const Matrix C = P.transpose() * P / 499.0;
    CHECK(C(0, 0) > C(1, 1));
    CHECK(C(1, 1) > C(2, 2));
    CHECK(std::abs(C(0, 1)) < 1e-10);
    CHECK(std::abs(C(0, 2)) < 1e-10);
    CHECK(std::abs(C(1, 2)) < 1e-10);
    CHECK(std::abs(P.colwise().mean().maxCoeff()) < 1e-12);
    const Matrix full = pca_project(X, 4);
    const Matrix centred = X.rowwise() - X.colwise().mean();
    CHECK(full.squaredNorm() == doctest::Approx(centred.squaredNorm()).epsilon(1e-12));
    CHECK_THROWS_AS(pca_project(X, 5), ConfigError);
}

// ------------------------------------------------------------------ plotdata

TEST_CASE("plotdata: scatter3d has one row per node and a parent column") {
    Rng rng(4);
    const auto g = models::gaussian_init_iid(gen_spiral(SpiralSpec{50, 0.2, 2.0}, Rng(0)));
    const auto draw = sampler::sample_dataset(g, 25, Rng(9));
    const Table t = scatter3d(draw.data, &draw.tree);
    CHECK(t.header == std::vector<std::string>{"x", "y", "z", "parent"});
    CHECK(t.rows.size() == 25);
    int roots = 0;
    for (std::size_t i = 0; i < 25; ++i) {
        if (t.rows[i][3] == "root") {
            ++roots;
            CHECK(i == draw.tree.root);
        } else {
            CHECK(std::stoul(t.rows[i][3]) == *draw.tree.parent[i]);
        }
        CHECK(parse_double(t.rows[i][0]) == draw.data(static_cast<Eigen::Index>(i), 0));
    }
    CHECK(roots == 1);
    Matrix wide(25, 5);
    for (Eigen::Index i = 0; i < wide.size(); ++i) wide(i) = rng.normal();
    CHECK(scatter3d(wide).rows.size() == 25);
    CHECK_THROWS_AS(scatter3d(Matrix::Zero(4, 2)), DataError);
}

TEST_CASE("plotdata: error-vs-labels aggregates seeds per fraction") {
    Table runs;
    runs.header = {"fraction", "seed", "labeled", "accuracy_tree", "accuracy_majority"};
    runs.add({"0.5", "0", "10", "0.9", "0.6"});
    runs.add({"0.1", "0", "2", "0.7", "0.5"});
    runs.add({"0.5", "1", "10", "0.8", "0.7"});
    const Table t = error_vs_labels(runs);
    CHECK(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "0.1");
    CHECK(t.rows[1][2] == "2");
    CHECK(parse_double(t.rows[1][3]) == doctest::Approx(0.15));
    CHECK(parse_double(t.rows[1][4]) == doctest::Approx(0.05));
    CHECK(parse_double(t.rows[1][5]) == doctest::Approx(0.35));
}

TEST_CASE("plotdata: elbo-trace and unknown kinds") {
    const Table t = elbo_trace({-5.0, -4.0, -3.5});
    CHECK(t.header == std::vector<std::string>{"round", "elbo"});
    CHECK(t.rows.size() == 3);
    CHECK(t.rows[2] == std::vector<std::string>{"2", "-3.5"});
    CHECK_THROWS_AS(parse_plot_kind("histogram"), ConfigError);
    CHECK_THROWS_AS(emit_plotdata("unused", "histogram"), ConfigError);
}

// ------------------------------------------------------------------ commands

TEST_CASE("commands: eval at the iid point returns the iid sum") {
    TempDir dir;
    std::ofstream(dir / "toy.csv") << "a,b\n0,1\n1,1\n2,0\n0,0\n1,1\n";
    Matrix X(5, 2);
    X << 0, 1, 1, 1, 2, 0, 0, 0, 1, 1;
    const auto m = models::tabular_init_iid(X, {3, 2});
    {
        std::ofstream os(dir / "m.txt");
        models::save_model(os, m);
    }
    std::string out;
    REQUIRE(run(config_for("eval", {{"model", dir / "m.txt"}, {"train", dir / "toy.csv"}, {"test", dir / "toy.csv"}}),
                &out) == 0);
    const auto cells = split_tabs(out.substr(0, out.find('\n')));
    REQUIRE(cells.size() == 9);
    CHECK(std::count(out.begin(), out.end(), '\n') == 1);
    CHECK(parse_double(cells[0]) == doctest::Approx(likelihood::iid_log_likelihood(X, m)).epsilon(1e-12));
    CHECK(parse_double(cells[1]) == doctest::Approx(parse_double(cells[0])).epsilon(1e-12));
}

TEST_CASE("commands: fit and eval on a spiral beat the single Gaussian") {
    TempDir dir;
    REQUIRE(run(config_for("gen-spiral", {{"seed", "3"}, {"samples", "200"}, {"output", dir / "s.csv"}})) == 0);
    REQUIRE(run(config_for("gen-spiral", {{"seed", "4"}, {"samples", "40"}, {"output", dir / "t.csv"}})) == 0);
    REQUIRE(run(config_for("fit", {{"input", dir / "s.csv"}, {"output", dir / "m.txt"}, {"max-iters", "2"}})) == 0);
    CHECK(fs::exists(dir / "m.txt.log"));
    std::string out;
    REQUIRE(run(config_for("eval", {{"model", dir / "m.txt"}, {"train", dir / "s.csv"}, {"test", dir / "t.csv"}}),
                &out) == 0);
    const double tdid = parse_double(split_tabs(out)[0]);
    const Matrix train = ingest_csv(dir / "s.csv").X, test = ingest_csv(dir / "t.csv").X;
    const double gauss = likelihood::iid_log_likelihood(test, models::gaussian_init_iid(train));
    CHECK(tdid > gauss);
}

TEST_CASE("commands: sample is deterministic and writes an edge list") {
    TempDir dir;
    const auto g = models::gaussian_init_iid(gen_spiral(SpiralSpec{50, 0.2, 2.0}, Rng(0)));
    {
        std::ofstream os(dir / "m.txt");
        models::save_model(os, g);
    }
    for (const char* name : {"a.csv", "b.csv"})
        REQUIRE(run(config_for("sample", {{"model", dir / "m.txt"}, {"samples", "30"}, {"seed", "8"},
                                          {"output", dir / name}})) == 0);
    CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
    CHECK(read_text(dir / "a.csv.edges") == read_text(dir / "b.csv.edges"));
    std::istringstream es(read_text(dir / "a.csv.edges"));
    const auto tree = sampler::read_edge_list(es);
    CHECK(tree.size() == 30);
    CHECK(ingest_csv(dir / "a.csv").size() == 30);
}

TEST_CASE("commands: semisup fills only the missing labels") {
    TempDir dir;
    std::ofstream(dir / "l.csv") << "a,b,label\n0,1,0\n1,1,\n0,0,1\n1,0,\n0,1,0\n1,1,1\n";
    REQUIRE(run(config_for("semisup", {{"input", dir / "l.csv"}, {"model-family", "tabular"}, {"seed", "1"},
                                       {"folds", "2"}, {"output", dir / "o.csv"}})) == 0);
    CsvSchema s;
    s.label_column = "label";
    const auto in = ingest_csv(dir / "l.csv", s), out = ingest_csv(dir / "o.csv", s);
    CHECK(out.X == in.X);
    for (std::size_t t = 0; t < in.size(); ++t) {
        if (in.labels[t] != semisup::kMissing) CHECK(out.labels[t] == in.labels[t]);
        CHECK((out.labels[t] == 0 || out.labels[t] == 1));
    }
}

TEST_CASE("commands: vb trace is monotone and resumes") {
    TempDir dir;
    std::ofstream(dir / "v.csv") << "a,b\n0,1\n1,1\n0,0\n1,0\n0,1\n1,1\n0,1\n";
    REQUIRE(run(config_for("vb", {{"input", dir / "v.csv"}, {"output", dir / "c.txt"}, {"max-iters", "5"}})) == 0);
    REQUIRE(run(config_for("vb", {{"input", dir / "v.csv"}, {"output", dir / "d.txt"}, {"max-iters", "5"},
                                  {"resume", dir / "c.txt"}})) == 0);
    const Table t = emit_plotdata(dir / "d.txt", "elbo-trace");
    REQUIRE(t.rows.size() >= 2);
    for (std::size_t i = 1; i < t.rows.size(); ++i)
        CHECK(parse_double(t.rows[i][1]) >= parse_double(t.rows[i - 1][1]) - 1e-10);
    CHECK(fs::exists(dir / "d.txt.elbo.tsv"));
}

TEST_CASE("commands: errors map to exit codes with a JSON record") {
    TempDir dir;
    std::string err;
    CHECK(run(config_for("fit", {{"output", dir / "x"}}), nullptr, &err) == 2);
    CHECK(err.find("\"kind\":\"config\"") != std::string::npos);
    CHECK(run(config_for("fit", {{"input", dir / "missing.csv"}, {"output", dir / "x"}}), nullptr, &err) == 3);
    CHECK(err.find("\"exit_code\":3") != std::string::npos);
    CHECK(run(config_for("gen-spiral", {{"output", dir / "x"}}), nullptr, &err) == 2);
    CHECK(err.find("needs --seed") != std::string::npos);
    CHECK(run(config_for("nope", {}), nullptr, &err) == 2);
    std::ofstream(dir / "r.csv") << "a,b\n1,2\n3\n";
    CHECK(run(config_for("fit", {{"input", dir / "r.csv"}, {"output", dir / "x"}}), nullptr, &err) == 3);
    CHECK(err.find("r.csv:3") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "x"));
    CHECK(error_record("fit", "numerical", 4, "say \"hi\"") ==
          R"({"status":"error","subcommand":"fit","kind":"numerical","exit_code":4,"message":"say \"hi\""})");
}

TEST_CASE("commands: harness tables carry seed and config hash") {
    TempDir dir;
    const auto c = config_for("spiral", {{"seed", "0"}, {"samples", "60"}, {"folds", "3"}, {"restarts", "1"},
                                         {"output", dir / "f.tsv"}});
    REQUIRE(run(c) == 0);
    std::istringstream is(read_text(dir / "f.tsv"));
    const Table t = Table::read(is);
    CHECK(t.rows.size() == 3);
    for (const auto& row : t.rows) {
        CHECK(row[t.column("seed")] == "0");
        CHECK(row[t.column("config")] == c.hash());
    }
    CHECK(read_text(dir / "f.tsv").find("# config " + c.hash()) != std::string::npos);
}
