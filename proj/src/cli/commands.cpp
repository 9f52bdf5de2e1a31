#include "outtree/cli/commands.hpp"

#include "outtree/cli/baselines.hpp"
#include "outtree/cli/experiments.hpp"
#include "outtree/cli/io.hpp"
#include "outtree/cli/plotdata.hpp"
#include "outtree/format.hpp"
#include "outtree/likelihood.hpp"
#include "outtree/sampler.hpp"
#include "outtree/semisup.hpp"
#include "outtree/vb.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

namespace outtree::cli {

namespace {

using Index = Eigen::Index;

const std::string& require_path(const std::string& value, const std::string& key) {
    if (value.empty()) throw ConfigError("--" + key + " is required");
    return value;
}

std::string seed_text(const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : "-"; }

void stamp(std::ostream& os, const RunConfig& c) {
    os << "# seed " << seed_text(c) << "\n# config " << c.hash() << '\n';
}

void write_table(const std::string& path, const Table& t, const RunConfig& c, std::ostream& out) {
    if (path.empty()) {
        t.write(out);
        return;
    }
    write_atomic(path, [&](std::ostream& os) {
        stamp(os, c);
        t.write(os);
    });
}

bool has_column(const std::vector<std::string>& header, const std::string& name) {
    return !name.empty() && std::find(header.begin(), header.end(), name) != header.end();
}

// Attributes of `path`; the label column, when present, is set aside.
Dataset load_attributes(const RunConfig& c, const std::string& path, bool tabular) {
    CsvSchema schema;
    schema.missing = c.missing;
    if (has_column(csv_header(path), c.label_column)) schema.label_column = c.label_column;
    if (tabular) schema.alphabet = c.alphabet;
    return ingest_csv(path, schema);
}

std::vector<int> infer_alphabet(const RunConfig& c, const Matrix& X) {
    if (!c.alphabet.empty()) return c.alphabet;
    std::vector<int> alphabet;
    for (Index d = 0; d < X.cols(); ++d) {
        const double hi = X.col(d).maxCoeff();
        if (X.col(d).minCoeff() < 0.0 || (X.col(d).array() != X.col(d).array().floor()).any())
            throw DataError("tabular column " + std::to_string(d) + " holds non-category values");
        alphabet.push_back(std::max(2, static_cast<int>(hi) + 1));
    }
    return alphabet;
}

std::unique_ptr<models::MutationModel> initial_model(const RunConfig& c, const Matrix& X) {
    switch (c.family) {
        case models::Family::gaussian:
            if (c.init == "walk") return fit_walk(X).model.clone();
            return models::gaussian_init_iid(X).clone();
        case models::Family::tabular:
            return models::tabular_init_iid(X, infer_alphabet(c, X)).clone();
        case models::Family::kernel:
            return models::kernel_init_iid(X, models::Kernel{models::KernelKind::rbf, 0.0}).clone();
    }
    throw ConfigError("unknown model family");
}

std::unique_ptr<models::MutationModel> read_model(const std::string& path) {
    std::istringstream is(read_text(path));
    return models::load_model(is);
}

bool is_tabular_model(const RunConfig& c) {
    if (!c.model.empty()) return read_model(c.model)->family() == models::Family::tabular;
    return c.family == models::Family::tabular;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"fit",    "eval",         "sample",        "semisup", "vb",
                                                "gen-spiral", "spiral", "semisup-bench", "plotdata"};
    return names;
}

void cmd_fit(const RunConfig& c, std::ostream& out) {
    const auto& output = require_path(c.output, "output");
    const auto data = load_attributes(c, require_path(c.input, "input"), c.family == models::Family::tabular);
    const auto model0 = initial_model(c, data.X);
    likelihood::FitOptions fo;
    fo.max_iters = c.max_iters;
    fo.grad_tol = c.grad_tol;
    const auto report = likelihood::fit_ml(data.X, *model0, fo);
    write_atomic(output, [&](std::ostream& os) { models::save_model(os, *report.model); });
    write_atomic(output + ".log", [&](std::ostream& os) {
        stamp(os, c);
        likelihood::write_fit_log(os, report);
    });
    out << "fit\t" << format_double(report.initial) << '\t' << format_double(report.final) << '\t'
        << report.trace.size() << '\t' << likelihood::stop_reason_name(report.reason) << '\n';
}

void cmd_eval(const RunConfig& c, std::ostream& out) {
    const auto model = read_model(require_path(c.model, "model"));
    const bool tabular = model->family() == models::Family::tabular;
    Matrix train, test;
    if (!c.test.empty()) {
        test = load_attributes(c, c.test, tabular).X;
        train = load_attributes(c, c.train.empty() ? require_path(c.input, "train") : c.train, tabular).X;
    } else {
        const Matrix X = load_attributes(c, require_path(c.input, "input"), tabular).X;
        const Split split = make_split(static_cast<std::size_t>(X.rows()), c.splits, Rng(c.require_seed()));
        train = take_rows(X, split.train);
        test = take_rows(X, split.test);
    }
    const auto score = likelihood::test_log_likelihood(train, test, *model);
    const double iid = likelihood::iid_log_likelihood(test, *model);
    std::ostringstream line;
    line << format_double(score.log_score) << '\t' << format_double(iid) << '\t' << format_double(score.log_Z_union)
         << '\t' << format_double(score.log_Z_train) << '\t' << format_double(score.correction) << '\t'
         << train.rows() << '\t' << test.rows() << '\t' << seed_text(c) << '\t' << c.hash() << '\n';
    if (c.output.empty())
        out << line.str();
    else
        write_atomic(c.output, [&](std::ostream& os) { os << line.str(); });
}

void cmd_sample(const RunConfig& c, std::ostream& out) {
    const auto& output = require_path(c.output, "output");
    const auto model = read_model(require_path(c.model, "model"));
    const auto draw = sampler::sample_dataset(*model, c.samples, Rng(c.require_seed()));
    export_csv(output, make_dataset(draw.data));
    const std::string edges = c.edges.empty() ? output + ".edges" : c.edges;
    write_atomic(edges, [&](std::ostream& os) { sampler::write_edge_list(os, draw.tree); });
    out << "sample\t" << draw.data.rows() << "\troot\t" << draw.tree.root << '\t' << seed_text(c) << '\t' << c.hash()
        << '\n';
}

void cmd_semisup(const RunConfig& c, std::ostream& out) {
    const auto& output = require_path(c.output, "output");
    const auto& input = require_path(c.input, "input");
    const std::uint64_t seed = c.require_seed();
    const bool tabular = is_tabular_model(c);
    CsvSchema schema;
    schema.label_column = c.label_column;
    schema.missing = c.missing;
    if (tabular) schema.alphabet = c.alphabet;
    auto data = ingest_csv(input, schema);
    int K = c.classes;
    if (K == 0) K = std::max(2, *std::max_element(data.labels.begin(), data.labels.end()) + 1);
    semisup::validate_labels(data.labels, K, data.size());
    const auto model = c.model.empty() ? initial_model(c, data.X) : read_model(c.model);

    semisup::InferenceOptions io;
    io.restarts = c.restarts;
    io.seed = seed;
    double alpha = c.alpha_grid.empty() ? 0.9 : c.alpha_grid.front();
    if (c.alpha_grid.size() > 1) {
        const auto observed = static_cast<int>(
            std::count_if(data.labels.begin(), data.labels.end(), [](int y) { return y != semisup::kMissing; }));
        const int folds = std::min(c.folds, observed);
        if (folds < 2) throw DataError("alpha cross-validation needs at least two observed labels");
        alpha = semisup::cross_validate_alpha(data.X, data.labels, *model, K, c.alpha_grid, folds, io).alpha;
    }
    const auto res = semisup::greedy_label_inference(data.X, data.labels, *model, semisup::LabelModel{alpha, K}, io);
    data.labels = res.labels;
    export_csv(output, data, c.missing);
    out << "semisup\talpha\t" << format_double(alpha) << "\tlog_partition\t" << format_double(res.log_partition)
        << '\t' << seed_text(c) << '\t' << c.hash() << '\n';
}

void cmd_vb(const RunConfig& c, std::ostream& out) {
    const auto& output = require_path(c.output, "output");
    const auto data = load_attributes(c, require_path(c.input, "input"), true);
    vb::VbOptions vo;
    vo.max_rounds = c.max_iters;
    vo.tol = c.tol;
    vb::DirichletPrior prior = vb::DirichletCounts::symmetric(infer_alphabet(c, data.X), c.prior_count);
    std::optional<vb::VariationalState> start;
    std::vector<double> history;
    if (!c.resume.empty()) {
        std::istringstream is(read_text(c.resume));
        const auto ck = vb::checkpoint_from_document(Document::read(is, "outtree-vb/1"));
        prior = ck.prior;
        start = vb::make_state(data.X, prior, ck.counts, ck.q_root);
        history = ck.elbo;
    }
    auto trace = vb::vb_fit(data.X, prior, vo, start);
    if (!history.empty()) {
        history.insert(history.end(), trace.elbo.begin() + 1, trace.elbo.end());
        trace.elbo = history;
    }
    write_atomic(output, [&](std::ostream& os) { vb::checkpoint_document(trace, prior).write(os); });
    write_table(output + ".elbo.tsv", elbo_trace(trace.elbo), c, out);
    out << "vb\telbo\t" << format_double(trace.elbo.back()) << "\trounds\t" << trace.elbo.size() - 1
        << "\tconverged\t" << (trace.converged ? 1 : 0) << '\t' << c.hash() << '\n';
}

void cmd_gen_spiral(const RunConfig& c, std::ostream& out) {
    const auto& output = require_path(c.output, "output");
    const SpiralSpec spec{c.samples, c.noise, c.turns};
    const Matrix X = gen_spiral(spec, Rng(c.require_seed()));
    export_csv(output, make_dataset(X, {"x", "y", "z"}));
    out << "gen-spiral\t" << X.rows() << '\t' << seed_text(c) << '\t' << c.hash() << '\n';
}

void cmd_spiral(const RunConfig& c, std::ostream& out) {
    SpiralOptions o;
    o.spec = SpiralSpec{c.samples, c.noise, c.turns};
    o.spec.validate();
    if (!c.input.empty()) o.data = load_attributes(c, c.input, false).X;
    o.folds = c.folds;
    o.fit_iters = c.fit_iters;
    o.bandwidth_grid = c.bandwidth_grid;
    o.restarts = c.restarts;
    o.seed = c.require_seed();
    const auto report = spiral_experiment(o);
    Table t;
    t.header = {"fold",  "n_train", "n_validation", "n_test",     "walk_sigma",   "tdid", "gmm1",
                "gmm_best", "gmm_best_k", "parzen", "parzen_sigma", "seed", "config"};
    for (const auto& f : report.folds)
        t.add({std::to_string(f.fold), std::to_string(f.n_train), std::to_string(f.n_validation),
               std::to_string(f.n_test), format_double(f.walk_sigma), format_double(f.tdid), format_double(f.gmm1),
               format_double(f.gmm_best), std::to_string(f.gmm_best_k), format_double(f.parzen),
               format_double(f.parzen_sigma), seed_text(c), c.hash()});
    write_table(c.output, t, c, out);
    const std::pair<const char*, Summary> rows[] = {
        {"tdid", report.tdid}, {"gmm1", report.gmm1}, {"gmm_best", report.gmm_best}, {"parzen", report.parzen}};
    for (const auto& [name, s] : rows)
        out << name << '\t' << format_double(s.mean) << '\t' << format_double(s.se) << '\n';
}

void cmd_semisup_bench(const RunConfig& c, std::ostream& out) {
    const std::uint64_t base = c.require_seed();
    Table t;
    t.header = {"fraction", "seed", "labeled", "alpha", "walk_sigma", "accuracy_tree", "accuracy_majority", "config"};
    for (double fraction : c.fractions) {
        SemisupOptions o;
        o.fraction = fraction;
        o.alpha_grid = c.alpha_grid;
        o.restarts = c.restarts;
        o.pca = c.pca;
        int wins = 0;
        for (int k = 0; k < c.seeds; ++k) {
            const auto run = semisup_experiment(o, base + static_cast<std::uint64_t>(k));
            wins += run.tree_wins();
            t.add({format_double(fraction), std::to_string(run.seed), std::to_string(run.labeled),
                   format_double(run.alpha), format_double(run.walk_sigma), format_double(run.accuracy_tree),
                   format_double(run.accuracy_majority), c.hash()});
        }
        out << "fraction\t" << format_double(fraction) << "\twins\t" << wins << '\t' << c.seeds << '\n';
    }
    write_table(c.output, t, c, out);
}

void cmd_plotdata(const RunConfig& c, std::ostream& out) {
    if (c.kind.empty()) throw ConfigError("--kind is required");
    const Table t = emit_plotdata(require_path(c.input, "input"), c.kind, c.edges);
    write_table(c.output, t, c, out);
}

std::string error_record(const std::string& subcommand, const std::string& kind, int exit_code,
                         const std::string& message) {
    const nlohmann::ordered_json j{{"status", "error"},
                                   {"subcommand", subcommand},
                                   {"kind", kind},
                                   {"exit_code", exit_code},
                                   {"message", message}};
    return j.dump();
}

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
    using Handler = void (*)(const RunConfig&, std::ostream&);
    static const std::map<std::string, Handler> table{
        {"fit", cmd_fit},         {"eval", cmd_eval},         {"sample", cmd_sample},
        {"semisup", cmd_semisup}, {"vb", cmd_vb},             {"gen-spiral", cmd_gen_spiral},
        {"spiral", cmd_spiral},   {"semisup-bench", cmd_semisup_bench}, {"plotdata", cmd_plotdata}};
    try {
        const auto it = table.find(config.subcommand);
        if (it == table.end()) throw ConfigError("unknown subcommand '" + config.subcommand + "'");
        config.validate();
        it->second(config, out);
        return 0;
    } catch (const Error& e) {
        err << error_record(config.subcommand, e.kind(), e.exit_code(), e.what()) << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        err << error_record(config.subcommand, "internal", 1, e.what()) << '\n';
        return 1;
    }
}

}  // namespace outtree::cli
