#include "outtree/cli/io.hpp"

#include "outtree/errors.hpp"
#include "outtree/format.hpp"
#include "outtree/semisup.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace outtree::cli {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Comma-separated fields with double-quoted cells ("" escapes a quote).
std::vector<std::string> split_csv(const std::string& line, const std::string& where) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (quoted) throw DataError(where + ": unterminated quote");
    out.push_back(trim(cell));
    return out;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) out.push_back(cell);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

}  // namespace

Dataset read_csv(std::istream& is, const CsvSchema& schema, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() {
        while (std::getline(is, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!trim(line).empty()) return true;
        }
        return false;
    };
    if (!next()) throw DataError(source + ": missing header row");
    const auto header = split_csv(line, source + ":" + std::to_string(lineno));
    auto find = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(source + ": no column named '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };

    std::optional<std::size_t> label_at;
    if (!schema.label_column.empty()) label_at = find(schema.label_column);
    std::vector<std::size_t> attr_at;
    if (schema.attributes.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (!label_at || c != *label_at) attr_at.push_back(c);
    } else {
        for (const auto& name : schema.attributes) attr_at.push_back(find(name));
    }
    if (attr_at.empty()) throw DataError(source + ": no attribute columns");
    if (!schema.alphabet.empty() && schema.alphabet.size() != attr_at.size())
        throw DataError(source + ": alphabet has " + std::to_string(schema.alphabet.size()) + " entries for " +
                        std::to_string(attr_at.size()) + " attributes");

    Dataset out;
    for (std::size_t c : attr_at) out.columns.push_back(header[c]);
    out.label_column = schema.label_column;
    std::vector<std::vector<double>> rows;
    while (next()) {
        const std::string where = source + ":" + std::to_string(lineno);
        const auto cells = split_csv(line, where);
        if (cells.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(cells.size()));
        std::vector<double> row;
        for (std::size_t i = 0; i < attr_at.size(); ++i) {
            const std::string& cell = cells[attr_at[i]];
            const std::string at = where + ", column '" + header[attr_at[i]] + "'";
            if (cell.empty() || cell == schema.missing) throw DataError(at + ": missing attribute value");
            double x = 0.0;
            try {
                x = parse_double(cell);
            } catch (const DataError&) {
                throw DataError(at + ": '" + cell + "' is not a number");
            }
            if (!std::isfinite(x)) throw DataError(at + ": non-finite value");
            if (!schema.alphabet.empty() && (x != std::floor(x) || x < 0.0 || x >= schema.alphabet[i]))
                throw DataError(at + ": unknown category '" + cell + "' (expected 0.." + std::to_string(schema.alphabet[i] - 1) +
                                ")");
            row.push_back(x);
        }
        if (label_at) {
            const std::string& cell = cells[*label_at];
            if (cell == schema.missing || cell.empty()) {
                out.labels.push_back(semisup::kMissing);
            } else {
                double y = 0.0;
                try {
                    y = parse_double(cell);
                } catch (const DataError&) {
                    y = -1.0;
                }
                if (y != std::floor(y) || y < 0.0 || y > 1e6)
                    throw DataError(where + ", column '" + header[*label_at] + "': label '" + cell +
                                    "' is not a nonnegative integer");
                out.labels.push_back(static_cast<int>(y));
            }
        }
        rows.push_back(std::move(row));
    }
    out.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(attr_at.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t d = 0; d < attr_at.size(); ++d)
            out.X(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = rows[t][d];
    return out;
}

Dataset ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    return read_csv(is, schema, path);
}

std::vector<std::string> csv_header(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) return split_csv(line, path + ":header");
    }
    throw DataError(path + ": missing header row");
}

void write_csv(std::ostream& os, const Dataset& data, const std::string& missing) {
    std::vector<std::string> header = data.columns;
    if (header.empty())
        for (Eigen::Index d = 0; d < data.X.cols(); ++d) header.push_back("x" + std::to_string(d));
    if (data.has_labels()) header.push_back(data.label_column);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << quote(header[i]);
    os << '\n';
    for (Eigen::Index t = 0; t < data.X.rows(); ++t) {
        for (Eigen::Index d = 0; d < data.X.cols(); ++d) os << (d ? "," : "") << format_double(data.X(t, d));
        if (data.has_labels()) {
            const int y = data.labels.at(static_cast<std::size_t>(t));
            os << ',' << (y == semisup::kMissing ? missing : std::to_string(y));
        }
        os << '\n';
    }
}

void export_csv(const std::string& path, const Dataset& data, const std::string& missing) {
    write_atomic(path, [&](std::ostream& os) { write_csv(os, data, missing); });
}

Dataset make_dataset(const Matrix& X, std::vector<std::string> columns) {
    Dataset out;
    out.X = X;
    if (columns.empty())
        for (Eigen::Index d = 0; d < X.cols(); ++d) columns.push_back("x" + std::to_string(d));
    if (static_cast<Eigen::Index>(columns.size()) != X.cols()) throw DataError("column names do not match the data");
    out.columns = std::move(columns);
    return out;
}

void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& body) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path() && !fs::exists(target.parent_path()))
        throw ConfigError("output directory '" + target.parent_path().string() + "' does not exist");
    const fs::path tmp = target.string() + ".tmp" + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("cannot write '" + tmp.string() + "'");
        try {
            body(os);
        } catch (...) {
            os.close();
            fs::remove(tmp);
            throw;
        }
        os.flush();
        if (!os) {
            fs::remove(tmp);
            throw ConfigError("write to '" + tmp.string() + "' failed");
        }
    }
    fs::rename(tmp, target);
}

std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void Table::add(std::vector<std::string> row) {
    if (row.size() != header.size())
        throw DataError("table row has " + std::to_string(row.size()) + " cells for " + std::to_string(header.size()) +
                        " columns");
    rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("table has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

void Table::write(std::ostream& os) const {
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "\t" : "") << cells[i];
        os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
}

Table Table::read(std::istream& is, const std::string& source) {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_tabs(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw DataError(source + ": empty table");
    return t;
}

}  // namespace outtree::cli
