#include "outtree/document.hpp"

#include "outtree/errors.hpp"
#include "outtree/format.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace outtree {

void Document::add(std::string key, std::vector<std::string> tokens) {
    if (key.empty() || key.find_first_of(" \t\n") != std::string::npos)
        throw ConfigError("invalid document key '" + key + "'");
    entries_.emplace_back(std::move(key), std::move(tokens));
}

bool Document::has(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return true;
    return false;
}

const std::vector<std::string>& Document::get(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw DataError("document has no '" + std::string(key) + "' entry");
}

std::vector<const std::vector<std::string>*> Document::get_all(std::string_view key) const {
    std::vector<const std::vector<std::string>*> out;
    for (const auto& [k, v] : entries_)
        if (k == key) out.push_back(&v);
    return out;
}

const std::string& Document::get_one(std::string_view key) const {
    const auto& v = get(key);
    if (v.size() != 1) throw DataError("document entry '" + std::string(key) + "' must hold one value");
    return v.front();
}

void Document::write(std::ostream& os) const {
    os << "schema " << schema_ << '\n';
    for (const auto& [k, v] : entries_) {
        os << k;
        for (const auto& t : v) os << ' ' << t;
        os << '\n';
    }
    os << "end\n";
}

Document Document::read(std::istream& is, std::string_view expected_schema) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() != '#') break;
    }
    std::istringstream head(line);
    std::string key, schema;
    head >> key >> schema;
    if (key != "schema") throw DataError("document must start with a 'schema' line");
    if (schema != expected_schema)
        throw DataError("expected schema " + std::string(expected_schema) + ", found '" + schema + "'");
    Document doc(schema);
    bool ended = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ls(line);
        ls >> key;
        if (key == "end") {
            ended = true;
            break;
        }
        std::vector<std::string> tokens;
        for (std::string t; ls >> t;) tokens.push_back(t);
        doc.entries_.emplace_back(key, std::move(tokens));
    }
    if (!ended) throw DataError("document truncated: no 'end' line (read " + std::to_string(lineno) + " lines)");
    return doc;
}

/// Shape-prefixed matrix: rows cols then values in row-major order.
std::vector<std::string> matrix_tokens(const Eigen::MatrixXd& m) {
    std::vector<std::string> out{std::to_string(m.rows()), std::to_string(m.cols())};
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(format_hex(m(i, j)));
    return out;
}

std::vector<std::string> vector_tokens(const Eigen::VectorXd& v) {
    std::vector<std::string> out{std::to_string(v.size())};
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(format_hex(v(i)));
    return out;
}

std::size_t parse_count(const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        throw DataError("expected a count, found '" + s + "'");
    }
    if (pos != s.size()) throw DataError("expected a count, found '" + s + "'");
    return static_cast<std::size_t>(v);
}

Eigen::MatrixXd matrix_from_tokens(const std::vector<std::string>& t, const std::string& key) {
    if (t.size() < 2) throw DataError("entry '" + key + "' lacks a shape");
    const std::size_t r = parse_count(t[0]), c = parse_count(t[1]);
    if (t.size() != 2 + r * c) throw DataError("entry '" + key + "' has the wrong number of values");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(t[2 + i * c + j]);
    return m;
}

Eigen::VectorXd vector_from_tokens(const std::vector<std::string>& t, const std::string& key) {
    if (t.empty()) throw DataError("entry '" + key + "' lacks a length");
    const std::size_t n = parse_count(t[0]);
    if (t.size() != 1 + n) throw DataError("entry '" + key + "' has the wrong number of values");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = parse_double(t[1 + i]);
    return v;
}

}  // namespace outtree
