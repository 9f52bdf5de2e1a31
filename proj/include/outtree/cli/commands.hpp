#pragma once

// Subcommands of the outtree tool. Each reads its inputs from a RunConfig,
// writes artifacts atomically and prints a short summary on `out`.

#include "outtree/cli/config.hpp"
#include "outtree/errors.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace outtree::cli {

/// Names accepted by run_command, in help order.
const std::vector<std::string>& subcommands();

/// Fits a model to `input`; writes the model document to `output` and the
/// fit log next to it (`output`.log).
void cmd_fit(const RunConfig& config, std::ostream& out);

/// Scores `test` given `train` (or a seeded split of `input`) under `model`.
/// Writes one TSV record: test log-likelihood, iid test log-likelihood,
/// ln Z(train + test), ln Z(train), correction, train rows, test rows,
/// seed, config hash.
void cmd_eval(const RunConfig& config, std::ostream& out);

/// Draws `samples` rows from `model`; writes the CSV to `output` and the
/// edge list to `edges` (default `output`.edges).
void cmd_sample(const RunConfig& config, std::ostream& out);

/// Infers the missing labels of `input`; writes the completed CSV.
void cmd_semisup(const RunConfig& config, std::ostream& out);

/// Variational fit of a tabular dataset; writes the checkpoint to `output`
/// and the ELBO trace to `output`.elbo.tsv. `resume` continues a checkpoint.
void cmd_vb(const RunConfig& config, std::ostream& out);

void cmd_gen_spiral(const RunConfig& config, std::ostream& out);

/// Fold table of the spiral density comparison.
void cmd_spiral(const RunConfig& config, std::ostream& out);

/// Per-seed table of the semi-supervised comparison, for every labeled fraction.
void cmd_semisup_bench(const RunConfig& config, std::ostream& out);

void cmd_plotdata(const RunConfig& config, std::ostream& out);

/// One-line JSON error record.
std::string error_record(const std::string& subcommand, const std::string& kind, int exit_code,
                         const std::string& message);

/// Dispatches on config.subcommand. Errors are reported as a JSON record on
/// `err`; the return value is the exit status (0, 2 config, 3 data,
/// 4 numerical, 1 other).
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace outtree::cli
