// Python bindings for the out-tree core.

#include "outtree/cli/baselines.hpp"
#include "outtree/cli/experiments.hpp"
#include "outtree/errors.hpp"
#include "outtree/likelihood.hpp"
#include "outtree/models.hpp"
#include "outtree/sampler.hpp"
#include "outtree/semisup.hpp"
#include "outtree/treemath.hpp"
#include "outtree/vb.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

namespace py = pybind11;
using namespace outtree;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Model = models::MutationModel;
using ModelPtr = std::shared_ptr<Model>;

namespace {

ModelPtr share(std::unique_ptr<Model> m) { return ModelPtr(std::move(m)); }

std::pair<treemath::WeightMatrix, treemath::RootWeights> weights(const Matrix& beta, const Vector& roots, bool log) {
    if (log) return {treemath::WeightMatrix::from_log(beta), treemath::RootWeights::from_log(roots)};
    return {treemath::WeightMatrix::from_weights(beta), treemath::RootWeights::from_weights(roots)};
}

std::vector<long> parents(const treemath::OutTree& t) {
    std::vector<long> out;
    for (const auto& p : t.parent) out.push_back(p ? static_cast<long>(*p) : -1L);
    return out;
}

}  // namespace

PYBIND11_MODULE(outtree, m) {
    m.doc() = "Latent out-tree density estimation";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<DataError>(m, "DataError", error.ptr());
    py::register_exception<NumericalFault>(m, "NumericalFault", error.ptr());

    // ---------------------------------------------------------------- trees
    m.def(
        "log_partition",
        [](const Matrix& beta, const Vector& roots, bool per_root, bool log) -> py::object {
            const auto [b, r] = weights(beta, roots, log);
            const auto lp = treemath::log_partition(b, r, per_root);
            if (!per_root) return py::float_(lp.log_Z);
            return py::make_tuple(lp.log_Z, *lp.per_root_log_Zr);
        },
        py::arg("beta"), py::arg("roots"), py::arg("per_root") = false, py::arg("log") = false,
        "ln sum_r p_r Z_r for edge weights beta[child, parent] and root weights p.");
    m.def(
        "brute_force_log_partition",
        [](const Matrix& beta, const Vector& roots, bool log) {
            const auto [b, r] = weights(beta, roots, log);
            const auto e = treemath::brute_force_log_partition(b, r);
            return py::make_tuple(e.partition.log_Z, *e.partition.per_root_log_Zr);
        },
        py::arg("beta"), py::arg("roots"), py::arg("log") = false, "Exhaustive enumeration (T <= 7).");
    m.def(
        "edge_marginals",
        [](const Matrix& beta, const Vector& roots, bool log) {
            const auto [b, r] = weights(beta, roots, log);
            return treemath::edge_marginals(b, r).W;
        },
        py::arg("beta"), py::arg("roots"), py::arg("log") = false);
    m.def(
        "root_posterior",
        [](const Matrix& beta, const Vector& roots, bool log) {
            const auto [b, r] = weights(beta, roots, log);
            return treemath::root_posterior(b, r);
        },
        py::arg("beta"), py::arg("roots"), py::arg("log") = false);

    // --------------------------------------------------------------- models
    py::class_<Model, ModelPtr>(m, "Model")
        .def_property_readonly("family", [](const Model& x) { return models::family_name(x.family()); })
        .def_property_readonly("dim", &Model::dim)
        .def_property_readonly("num_params", &Model::num_params)
        .def("params", &Model::param_vector)
        .def("with_params", [](const Model& x, const Vector& theta) { return share(x.with_params(theta)); })
        .def("log_marginal", [](const Model& x, const Vector& v) { return x.log_marginal(v); })
        .def("log_conditional", [](const Model& x, const Vector& c, const Vector& p) { return x.log_conditional(c, p); })
        .def("dumps",
             [](const Model& x) {
                 std::ostringstream os;
                 models::save_model(os, x);
                 return os.str();
             })
        .def_static("loads", [](const std::string& text) {
            std::istringstream is(text);
            return share(models::load_model(is));
        });

    m.def(
        "gaussian_iid", [](const Matrix& X) { return share(models::gaussian_init_iid(X).clone()); }, py::arg("X"),
        "Gaussian at the iid point: the tree likelihood equals the iid likelihood.");
    m.def(
        "tabular_iid",
        [](const Matrix& X, const std::vector<int>& alphabet, double smoothing) {
            return share(models::tabular_init_iid(X, alphabet, smoothing).clone());
        },
        py::arg("X"), py::arg("alphabet"), py::arg("smoothing") = 0.5);
    m.def(
        "kernel_iid",
        [](const Matrix& X, double bandwidth) {
            return share(models::kernel_init_iid(X, models::Kernel{models::KernelKind::rbf, bandwidth}).clone());
        },
        py::arg("X"), py::arg("bandwidth") = 0.0);
    m.def(
        "fit_walk",
        [](const Matrix& X) {
            const auto w = cli::fit_walk(X);
            return py::make_tuple(share(w.model.clone()), w.sigma, w.log_likelihood);
        },
        py::arg("X"), "Isotropic random walk with the step size maximizing the tree likelihood.");

    // ----------------------------------------------------------- likelihood
    m.def(
        "tdid", [](const Matrix& X, const Model& model) { return likelihood::tdid_log_likelihood(X, model); },
        py::arg("X"), py::arg("model"));
    m.def(
        "iid", [](const Matrix& X, const Model& model) { return likelihood::iid_log_likelihood(X, model); },
        py::arg("X"), py::arg("model"));
    m.def(
        "grad_tdid",
        [](const Matrix& X, const Model& model) {
            auto g = likelihood::grad_tdid(X, model);
            return py::make_tuple(g.value, g.grad);
        },
        py::arg("X"), py::arg("model"));
    m.def(
        "test_log_likelihood",
        [](const Matrix& train, const Matrix& test, const Model& model) {
            return likelihood::test_log_likelihood(train, test, model).log_score;
        },
        py::arg("train"), py::arg("test"), py::arg("model"));
    m.def(
        "fit",
        [](const Matrix& X, const Model& model, int max_iters, double grad_tol) {
            likelihood::FitOptions o;
            o.max_iters = max_iters;
            o.grad_tol = grad_tol;
            auto r = likelihood::fit_ml(X, model, o);
            std::vector<double> trace;
            for (const auto& it : r.trace) trace.push_back(it.objective);
            return py::make_tuple(share(std::move(r.model)), r.initial, trace,
                                  likelihood::stop_reason_name(r.reason));
        },
        py::arg("X"), py::arg("model"), py::arg("max_iters") = 500, py::arg("grad_tol") = 1e-5,
        "Gradient ascent on the tree likelihood; returns (model, initial, objective trace, stop reason).");

    // -------------------------------------------------------------- sampler
    m.def(
        "sample",
        [](const Model& model, std::size_t T, std::uint64_t seed) {
            const auto draw = sampler::sample_dataset(model, T, Rng(seed));
            return py::make_tuple(draw.data, parents(draw.tree));
        },
        py::arg("model"), py::arg("T"), py::arg("seed"), "Returns (X, parent) with parent -1 at the root.");

    // -------------------------------------------------------------- semisup
    m.def(
        "semisup",
        [](const Matrix& X, const std::vector<int>& labels, const Model& model, double alpha, int K, int restarts,
           std::uint64_t seed) {
            semisup::InferenceOptions o;
            o.restarts = restarts;
            o.seed = seed;
            const auto r = semisup::greedy_label_inference(X, labels, model, semisup::LabelModel{alpha, K}, o);
            return py::make_tuple(r.labels, r.log_partition);
        },
        py::arg("X"), py::arg("labels"), py::arg("model"), py::arg("alpha"), py::arg("K") = 2,
        py::arg("restarts") = 1, py::arg("seed") = 0, "Greedy completion of labels; -1 marks a missing label.");
    m.def(
        "cross_validate_alpha",
        [](const Matrix& X, const std::vector<int>& labels, const Model& model, int K, const std::vector<double>& grid,
           int folds, std::uint64_t seed) {
            semisup::InferenceOptions o;
            o.seed = seed;
            return semisup::cross_validate_alpha(X, labels, model, K, grid, folds, o).alpha;
        },
        py::arg("X"), py::arg("labels"), py::arg("model"), py::arg("K"), py::arg("grid"), py::arg("folds") = 4,
        py::arg("seed") = 0);
    m.def("majority_baseline", &semisup::majority_baseline, py::arg("labels"), py::arg("K"));

    // ------------------------------------------------------------------- vb
    m.def(
        "vb",
        [](const Matrix& X, const std::vector<int>& alphabet, double prior_count, int max_rounds, double tol) {
            vb::VbOptions o;
            o.max_rounds = max_rounds;
            o.tol = tol;
            const auto t = vb::vb_fit(X, vb::DirichletCounts::symmetric(alphabet, prior_count), o);
            py::dict out;
            out["elbo"] = t.elbo;
            out["q_root"] = t.state.q_root;
            out["W"] = t.state.W;
            out["converged"] = t.converged;
            return out;
        },
        py::arg("X"), py::arg("alphabet"), py::arg("prior_count") = 1.0, py::arg("max_rounds") = 200,
        py::arg("tol") = 1e-8, "Variational Bayes for tabular data under symmetric Dirichlet priors.");
    m.def(
        "exact_log_evidence",
        [](const Matrix& X, const std::vector<int>& alphabet, double prior_count) {
            return vb::exact_log_evidence(X, vb::DirichletCounts::symmetric(alphabet, prior_count));
        },
        py::arg("X"), py::arg("alphabet"), py::arg("prior_count") = 1.0);

    // ------------------------------------------------------------ baselines
    m.def(
        "gen_spiral",
        [](std::size_t T, double noise, double turns, std::uint64_t seed) {
            return cli::gen_spiral(cli::SpiralSpec{T, noise, turns}, Rng(seed));
        },
        py::arg("T") = 600, py::arg("noise") = 0.2, py::arg("turns") = 2.0, py::arg("seed") = 0);
    m.def("parzen", &cli::parzen_log_likelihood, py::arg("train"), py::arg("points"), py::arg("sigma"));
    m.def(
        "gmm",
        [](const Matrix& X, int k, int restarts, std::uint64_t seed) {
            const auto fit = cli::fit_gmm_restarts(X, k, restarts, Rng(seed));
            return py::make_tuple(fit.model.weights, fit.model.means, fit.model.covs, fit.trace);
        },
        py::arg("X"), py::arg("k"), py::arg("restarts") = 10, py::arg("seed") = 0,
        "EM mixture; returns (weights, means, covariances, objective trace).");
}
