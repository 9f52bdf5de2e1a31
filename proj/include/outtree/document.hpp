#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace outtree {

/// Line-oriented key/value document shared by model files and checkpoints.
///
///   schema outtree-model/1
///   key token token ...
///   end
///
/// Keys keep their insertion order; a key may repeat (e.g. trace lines).
class Document {
public:
    using Entry = std::pair<std::string, std::vector<std::string>>;

    explicit Document(std::string schema = "outtree-model/1") : schema_(std::move(schema)) {}

    const std::string& schema() const noexcept { return schema_; }
    void add(std::string key, std::vector<std::string> tokens);
    void add(std::string key, std::string token) { add(std::move(key), std::vector<std::string>{std::move(token)}); }

    bool has(std::string_view key) const;
    /// First entry with the key; DataError if absent.
    const std::vector<std::string>& get(std::string_view key) const;
    std::vector<const std::vector<std::string>*> get_all(std::string_view key) const;
    const std::string& get_one(std::string_view key) const;

    const std::vector<Entry>& entries() const noexcept { return entries_; }

    void write(std::ostream& os) const;
    /// Reads up to and including the `end` line. DataError on a schema mismatch.
    static Document read(std::istream& is, std::string_view expected_schema = "outtree-model/1");

private:
    std::string schema_;
    std::vector<Entry> entries_;
};

/// `rows cols v...` with values in exact hex, row-major.
std::vector<std::string> matrix_tokens(const Eigen::MatrixXd& m);
/// `n v...` with values in exact hex.
std::vector<std::string> vector_tokens(const Eigen::VectorXd& v);
std::size_t parse_count(const std::string& s);
/// Inverses of the above; DataError names `key` on malformed input.
Eigen::MatrixXd matrix_from_tokens(const std::vector<std::string>& t, const std::string& key);
Eigen::VectorXd vector_from_tokens(const std::vector<std::string>& t, const std::string& key);

}  // namespace outtree
