#pragma once

// Run configuration shared by every subcommand. Values come from a flat
// `key = value` file and are overridden by flags of the same name.

#include "outtree/models.hpp"
#include "outtree/rng.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace outtree::cli {

struct RunConfig {
    std::string subcommand;
    std::string input;
    std::string output;
    std::string model;  // model document to read
    std::string train;  // explicit train / test files override the split
    std::string test;
    models::Family family = models::Family::gaussian;
    std::string init = "walk";  // gaussian starting point: walk | iid
    std::optional<std::uint64_t> seed;
    std::array<double, 3> splits{0.8, 0.1, 0.1};
    int max_iters = 500;
    double grad_tol = 1e-5;
    int restarts = 10;
    std::vector<double> alpha_grid{0.6, 0.7, 0.8, 0.9, 0.95};
    std::vector<double> bandwidth_grid;  // empty: automatic log-spaced grid
    std::string label_column = "label";
    std::string missing = "";
    int classes = 0;             // 0: one more than the largest observed label
    std::vector<int> alphabet;   // tabular categories; empty: inferred
    std::size_t samples = 600;   // T for sample / spiral generation
    double noise = 0.2;
    double turns = 2.0;
    int folds = 10;
    double prior_count = 1.0;
    double tol = 1e-8;
    int seeds = 10;
    std::vector<double> fractions{0.3};
    int fit_iters = 0;
    int pca = 0;
    std::string edges;
    std::string resume;
    std::string kind;

    /// Assigns one key. ConfigError on unknown keys and unparsable values.
    void set(const std::string& key, const std::string& value);
    /// Reads `key = value` lines; '#' starts a comment.
    void load(std::istream& is, const std::string& source = "<config>");
    void load_file(const std::string& path);

    /// Split fractions positive and summing to 1, grids in range.
    void validate() const;
    /// ConfigError unless a seed was given.
    std::uint64_t require_seed() const;

    /// Every key with its canonical value, sorted by key.
    std::map<std::string, std::string> canonical() const;
    /// 16 hex digits of FNV-1a over the canonical form.
    std::string hash() const;
};

/// All keys `set` accepts.
const std::vector<std::string>& config_keys();

struct Split {
    std::vector<std::size_t> train, validation, test;
};

/// Random split with round(f * T) train and validation rows; the rest is test.
Split make_split(std::size_t T, const std::array<double, 3>& fractions, const Rng& rng);

/// Fold k of a shuffled K-fold rotation: block k is test, block k+1 is
/// validation, the rest is train.
Split fold_split(std::size_t T, int folds, int k, const Rng& rng);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows);

}  // namespace outtree::cli
