#include "outtree/likelihood.hpp"

#include "outtree/errors.hpp"
#include "outtree/format.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace outtree::likelihood {
namespace {

double tree_count_log(Eigen::Index T) {
    return static_cast<double>(T - 1) * std::log(static_cast<double>(T));
}

std::pair<treemath::WeightMatrix, treemath::RootWeights> weights(const Matrix& data, const MutationModel& model,
                                                                 const LogWeightOffset* offset) {
    if (data.rows() < 2) throw DataError("the tree likelihood needs at least 2 samples");
    auto [beta, roots] = models::build_beta(data, model);
    if (!offset) return {std::move(beta), std::move(roots)};
    Matrix lb = beta.log_weights();
    Vector lp = roots.log_values();
    if (offset->edge.size() > 0) {
        if (offset->edge.rows() != lb.rows() || offset->edge.cols() != lb.cols())
            throw ConfigError("edge offset shape disagrees with the data");
        lb += offset->edge;
    }
    if (offset->root.size() > 0) {
        if (offset->root.size() != lp.size()) throw ConfigError("root offset length disagrees with the data");
        lp += offset->root;
    }
    return {treemath::WeightMatrix::from_log(std::move(lb)), treemath::RootWeights::from_log(std::move(lp))};
}

double objective(const Matrix& data, const MutationModel& model, const LogWeightOffset* offset) {
    return tdid_log_likelihood(data, model, offset) - model.penalty();
}

}  // namespace

double tdid_log_likelihood(const Matrix& data, const MutationModel& model, const LogWeightOffset* offset) {
    auto [beta, roots] = weights(data, model, offset);
    return treemath::log_partition(beta, roots).log_Z - tree_count_log(data.rows());
}

double iid_log_likelihood(const Matrix& data, const MutationModel& model) {
    model.validate_data(data);
    return model.log_marginal_vector(data).sum();
}

Gradient grad_tdid(const Matrix& data, const MutationModel& model, const LogWeightOffset* offset) {
    auto [beta, roots] = weights(data, model, offset);
    const treemath::PartitionGradient pg = treemath::partition_gradient(beta, roots);
    Gradient out;
    out.value = pg.log_Z - tree_count_log(data.rows());
    out.grad = Vector::Zero(static_cast<Eigen::Index>(model.num_params()));
    model.add_weighted_gradient(data, pg.edge, pg.root, out.grad);
    return out;
}

std::string stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::grad_tol: return "grad_tol";
        case StopReason::max_iters: return "max_iters";
        case StopReason::line_search: return "line_search";
        case StopReason::early_stop: return "early_stop";
    }
    return "unknown";
}

FitReport fit_ml(const Matrix& data, const MutationModel& model0, const FitOptions& options) {
    if (options.max_iters < 0) throw ConfigError("max_iters must be >= 0");
    if (!(options.grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
    if (!(options.armijo > 0.0 && options.armijo < 1.0)) throw ConfigError("Armijo constant must lie in (0, 1)");
    if (!(options.min_step > 0.0 && options.min_step <= 1.0)) throw ConfigError("min_step must lie in (0, 1]");
    const bool early = options.validation.rows() > 0;
    if (early && options.patience < 1) throw ConfigError("patience must be >= 1");

    std::unique_ptr<MutationModel> model = model0.clone();
    Gradient g = grad_tdid(data, *model, options.offset);
    Vector grad = g.grad;
    {
        Vector pen = Vector::Zero(grad.size());
        model->add_grad_penalty(pen);
        grad -= pen;
    }
    double f = g.value - model->penalty();

    FitReport report;
    report.initial = f;
    std::unique_ptr<MutationModel> best;
    double best_val = -INFINITY;
    int since_best = 0;
    if (early) {
        best_val = test_log_likelihood(data, options.validation, *model).log_score;
        best = model->clone();
    }

    double last_step = 0.5;
    report.reason = StopReason::max_iters;
    for (int it = 0;; ++it) {
        const double sup = grad.cwiseAbs().maxCoeff();
        if (sup < options.grad_tol) {
            report.reason = StopReason::grad_tol;
            break;
        }
        if (it >= options.max_iters) {
            report.reason = StopReason::max_iters;
            break;
        }
        const Vector theta = model->param_vector();
        const double slope = grad.squaredNorm();
        double step = std::min(1.0, 2.0 * last_step);
        std::unique_ptr<MutationModel> next;
        double f_next = -INFINITY;
        while (step >= options.min_step) {
            try {
                auto trial = model->with_params(theta + step * grad);
                const double ft = objective(data, *trial, options.offset);
                if (std::isfinite(ft) && ft >= f + options.armijo * step * slope && ft > f) {
                    next = std::move(trial);
                    f_next = ft;
                    break;
                }
            } catch (const NumericalFault&) {
            } catch (const ConfigError&) {
            } catch (const DataError&) {
            }
            step *= 0.5;
        }
        if (!next) {
            report.reason = StopReason::line_search;
            break;
        }
        last_step = step;
        model = std::move(next);
        g = grad_tdid(data, *model, options.offset);
        Vector pen = Vector::Zero(g.grad.size());
        model->add_grad_penalty(pen);
        grad = g.grad - pen;
        f = f_next;
        FitIteration rec{it + 1, f, step, grad.cwiseAbs().maxCoeff(), std::nullopt};
        if (early) {
            const double v = test_log_likelihood(data, options.validation, *model).log_score;
            rec.validation = v;
            if (v > best_val) {
                best_val = v;
                best = model->clone();
                since_best = 0;
            } else if (++since_best >= options.patience) {
                report.trace.push_back(rec);
                report.reason = StopReason::early_stop;
                break;
            }
        }
        report.trace.push_back(rec);
    }
    if (early && best) model = std::move(best);
    report.final = objective(data, *model, options.offset);
    report.model = std::move(model);
    return report;
}

void write_fit_log(std::ostream& os, const FitReport& report) {
    os << "# initial " << format_double(report.initial) << "\n";
    os << "iteration\tobjective\tstep\tgrad_norm\tvalidation\n";
    for (const auto& r : report.trace)
        os << r.iteration << '\t' << format_double(r.objective) << '\t' << format_double(r.step) << '\t'
           << format_double(r.grad_norm) << '\t' << (r.validation ? format_double(*r.validation) : "") << '\n';
    os << "# final " << format_double(report.final) << " reason " << stop_reason_name(report.reason) << "\n";
}

TestScore test_log_likelihood(const Matrix& train, const Matrix& test, const MutationModel& model) {
    if (train.rows() < 1) throw DataError("train set is empty");
    if (test.cols() != train.cols()) throw DataError("train and test column counts differ");
    const Eigen::Index T = train.rows(), U = test.rows();
    if (T + U < 2) throw DataError("train and test together need at least 2 samples");
    Matrix all(T + U, train.cols());
    all.topRows(T) = train;
    all.bottomRows(U) = test;
    TestScore s;
    {
        auto [beta, roots] = weights(all, model, nullptr);
        s.log_Z_union = treemath::log_partition(beta, roots).log_Z;
    }
    if (T == 1) {
        model.validate_data(train);
        s.log_Z_train = model.log_marginal(train.row(0).transpose());
    } else {
        auto [beta, roots] = weights(train, model, nullptr);
        s.log_Z_train = treemath::log_partition(beta, roots).log_Z;
    }
    s.correction = tree_count_log(T) - tree_count_log(T + U);
    s.log_score = s.log_Z_union - s.log_Z_train + s.correction;
    return s;
}

}  // namespace outtree::likelihood
