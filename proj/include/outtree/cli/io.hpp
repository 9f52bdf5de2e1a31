#pragma once

// Dataset CSV ingestion and export, atomic artifact writes, headered TSV.

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace outtree::cli {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct CsvSchema {
    /// Attribute columns in output order; empty means every non-label column.
    std::vector<std::string> attributes;
    /// Optional integer label column; cells equal to `missing` are unlabeled.
    std::string label_column;
    std::string missing = "";
    /// Per-attribute category counts for tabular data; empty for real values.
    std::vector<int> alphabet;
};

struct Dataset {
    std::vector<std::string> columns;  // attribute names
    Matrix X;
    std::string label_column;  // empty when the data carry no labels
    std::vector<int> labels;   // semisup::kMissing where unlabeled

    std::size_t size() const noexcept { return static_cast<std::size_t>(X.rows()); }
    bool has_labels() const noexcept { return !label_column.empty(); }
};

/// Reads a headered CSV. DataError with line and column on ragged rows,
/// non-numeric or missing attribute cells, bad labels and unknown categories.
Dataset read_csv(std::istream& is, const CsvSchema& schema = {}, const std::string& source = "<stream>");
Dataset ingest_csv(const std::string& path, const CsvSchema& schema = {});

/// Column names from the header row of a CSV file.
std::vector<std::string> csv_header(const std::string& path);

/// Shortest round-trip decimals; unlabeled cells are written as `missing`.
void write_csv(std::ostream& os, const Dataset& data, const std::string& missing = "");
void export_csv(const std::string& path, const Dataset& data, const std::string& missing = "");

Dataset make_dataset(const Matrix& X, std::vector<std::string> columns = {});

/// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& body);

/// Reads a whole text file; DataError if it cannot be opened.
std::string read_text(const std::string& path);

/// Headered tab-separated table of strings.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
    /// Column index by name; DataError if absent.
    std::size_t column(const std::string& name) const;
    void write(std::ostream& os) const;
    static Table read(std::istream& is, const std::string& source = "<stream>");
};

}  // namespace outtree::cli
