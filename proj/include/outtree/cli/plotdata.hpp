#pragma once

// Plot-ready headered TSV built from run artifacts.

#include "outtree/cli/io.hpp"
#include "outtree/treemath.hpp"

#include <string>
#include <vector>

namespace outtree::cli {

enum class PlotKind { scatter3d, error_vs_labels, elbo_trace };

/// scatter3d | error-vs-labels | elbo-trace; ConfigError otherwise.
PlotKind parse_plot_kind(const std::string& name);

/// Columns x, y, z, parent. Wider data is projected on its top three
/// principal axes. Without a tree the parent column reads `-`; the root
/// reads `root`.
Table scatter3d(const Matrix& X, const treemath::OutTree* tree = nullptr);

/// One row per labeled fraction of a semi-supervised harness table: mean
/// error rates of both methods with their standard errors over seeds.
Table error_vs_labels(const Table& runs);

/// Columns round, elbo.
Table elbo_trace(const std::vector<double>& elbo);

/// Reads `artifact` for `kind`: a data CSV (plus an optional edge list) for
/// scatter3d, a harness table for error-vs-labels, and a VB checkpoint or
/// ELBO table for elbo-trace.
Table emit_plotdata(const std::string& artifact, const std::string& kind, const std::string& edges = "");

}  // namespace outtree::cli
