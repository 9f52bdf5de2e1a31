#include "outtree/cli/plotdata.hpp"

#include "outtree/cli/experiments.hpp"
#include "outtree/document.hpp"
#include "outtree/errors.hpp"
#include "outtree/format.hpp"
#include "outtree/sampler.hpp"
#include "outtree/vb.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace outtree::cli {

PlotKind parse_plot_kind(const std::string& name) {
    if (name == "scatter3d") return PlotKind::scatter3d;
    if (name == "error-vs-labels") return PlotKind::error_vs_labels;
    if (name == "elbo-trace") return PlotKind::elbo_trace;
    throw ConfigError("unknown plot kind '" + name + "' (scatter3d, error-vs-labels, elbo-trace)");
}

Table scatter3d(const Matrix& X, const treemath::OutTree* tree) {
    if (X.cols() < 3) throw DataError("scatter3d needs at least 3 attributes");
    if (tree && tree->size() != static_cast<std::size_t>(X.rows()))
        throw DataError("edge list and data differ in size");
    const Matrix P = X.cols() == 3 ? X : pca_project(X, 3);
    Table t;
    t.header = {"x", "y", "z", "parent"};
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        std::string parent = "-";
        if (tree) {
            const auto& p = tree->parent[static_cast<std::size_t>(i)];
            parent = p ? std::to_string(*p) : "root";
        }
        t.add({format_double(P(i, 0)), format_double(P(i, 1)), format_double(P(i, 2)), parent});
    }
    return t;
}

Table error_vs_labels(const Table& runs) {
    const std::size_t f = runs.column("fraction"), n = runs.column("labeled");
    const std::size_t at = runs.column("accuracy_tree"), am = runs.column("accuracy_majority");
    struct Group {
        std::vector<double> labeled, tree, majority;
    };
    std::map<double, Group> groups;
    for (const auto& row : runs.rows) {
        auto& g = groups[parse_double(row[f])];
        g.labeled.push_back(parse_double(row[n]));
        g.tree.push_back(1.0 - parse_double(row[at]));
        g.majority.push_back(1.0 - parse_double(row[am]));
    }
    Table t;
    t.header = {"fraction", "labeled", "seeds", "error_tree", "error_tree_se", "error_majority", "error_majority_se"};
    for (const auto& [fraction, g] : groups) {
        const auto tree = summarize(g.tree), majority = summarize(g.majority);
        t.add({format_double(fraction), format_double(summarize(g.labeled).mean), std::to_string(g.tree.size()),
               format_double(tree.mean), format_double(tree.se), format_double(majority.mean),
               format_double(majority.se)});
    }
    return t;
}

Table elbo_trace(const std::vector<double>& elbo) {
    Table t;
    t.header = {"round", "elbo"};
    for (std::size_t i = 0; i < elbo.size(); ++i) t.add({std::to_string(i), format_double(elbo[i])});
    return t;
}

Table emit_plotdata(const std::string& artifact, const std::string& kind, const std::string& edges) {
    const PlotKind k = parse_plot_kind(kind);
    switch (k) {
        case PlotKind::scatter3d: {
            const auto data = ingest_csv(artifact);
            if (edges.empty()) return scatter3d(data.X);
            std::istringstream is(read_text(edges));
            const auto tree = sampler::read_edge_list(is);
            return scatter3d(data.X, &tree);
        }
        case PlotKind::error_vs_labels: {
            std::istringstream is(read_text(artifact));
            return error_vs_labels(Table::read(is, artifact));
        }
        case PlotKind::elbo_trace: {
            std::istringstream is(read_text(artifact));
            if (is.str().rfind("schema ", 0) == 0)
                return elbo_trace(vb::checkpoint_from_document(Document::read(is, "outtree-vb/1")).elbo);
            const Table t = Table::read(is, artifact);
            const std::size_t c = t.column("elbo");
            std::vector<double> elbo;
            for (const auto& row : t.rows) elbo.push_back(parse_double(row[c]));
            return elbo_trace(elbo);
        }
    }
    throw ConfigError("unknown plot kind '" + kind + "'");
}

}  // namespace outtree::cli
