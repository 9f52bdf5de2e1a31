#include "outtree/cli/config.hpp"

#include "outtree/errors.hpp"
#include "outtree/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace outtree::cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        const double x = parse_double(trim(v));
        if (!std::isfinite(x)) throw DataError("");
        return x;
    } catch (const DataError&) {
        throw ConfigError(key + ": '" + v + "' is not a finite number");
    }
}

long long to_int(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (t.empty() || used != t.size()) throw ConfigError(key + ": '" + v + "' is not an integer");
    return x;
}

int to_count(const std::string& key, const std::string& v, long long lo) {
    const long long x = to_int(key, v);
    if (x < lo || x > 1000000000) throw ConfigError(key + " must be >= " + std::to_string(lo));
    return static_cast<int>(x);
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_same_v<T, double>)
            out += format_double(xs[i]);
        else
            out += std::to_string(xs[i]);
    }
    return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "alpha-grid", "alphabet",  "bandwidth-grid", "classes", "edges",      "fit-iters",   "folds",  "fractions",
        "grad-tol",   "init",      "input",          "kind",    "label-column", "max-iters", "missing", "model",
        "model-family", "noise",   "output",         "pca",     "prior-count", "restarts",   "resume", "samples",
        "seed",       "seeds",     "splits",         "test",    "tol",        "train",       "turns"};
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "input") input = value;
    else if (key == "output") output = value;
    else if (key == "model") model = value;
    else if (key == "train") train = value;
    else if (key == "test") test = value;
    else if (key == "model-family") {
        try {
            family = models::parse_family(trim(value));
        } catch (const Error&) {
            throw ConfigError("model-family must be gaussian, tabular or kernel, not '" + value + "'");
        }
    } else if (key == "init") {
        if (value != "walk" && value != "iid") throw ConfigError("init must be walk or iid");
        init = value;
    } else if (key == "seed") {
        const long long s = to_int(key, value);
        if (s < 0) throw ConfigError("seed must be nonnegative");
        seed = static_cast<std::uint64_t>(s);
    } else if (key == "splits") {
        const auto v = to_doubles(key, value);
        if (v.size() != 3) throw ConfigError("splits needs three fractions train,validation,test");
        splits = {v[0], v[1], v[2]};
    } else if (key == "max-iters") max_iters = to_count(key, value, 0);
    else if (key == "grad-tol") grad_tol = to_double(key, value);
    else if (key == "restarts") restarts = to_count(key, value, 1);
    else if (key == "alpha-grid") alpha_grid = to_doubles(key, value);
    else if (key == "bandwidth-grid") bandwidth_grid = to_doubles(key, value);
    else if (key == "label-column") label_column = value;
    else if (key == "missing") missing = value;
    else if (key == "classes") classes = to_count(key, value, 0);
    else if (key == "alphabet") {
        alphabet.clear();
        for (const auto& item : split_list(value)) alphabet.push_back(to_count(key, item, 2));
    } else if (key == "samples") samples = static_cast<std::size_t>(to_count(key, value, 1));
    else if (key == "noise") noise = to_double(key, value);
    else if (key == "turns") turns = to_double(key, value);
    else if (key == "folds") folds = to_count(key, value, 2);
    else if (key == "prior-count") prior_count = to_double(key, value);
    else if (key == "tol") tol = to_double(key, value);
    else if (key == "seeds") seeds = to_count(key, value, 1);
    else if (key == "fractions") fractions = to_doubles(key, value);
    else if (key == "fit-iters") fit_iters = to_count(key, value, 0);
    else if (key == "pca") pca = to_count(key, value, 0);
    else if (key == "edges") edges = value;
    else if (key == "resume") resume = value;
    else if (key == "kind") kind = value;
    else throw ConfigError("unknown configuration key '" + key + "'");
}

void RunConfig::load(std::istream& is, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        try {
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    load(is, path);
}

void RunConfig::validate() const {
    for (double f : splits)
        if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    if (std::abs(splits[0] + splits[1] + splits[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    for (double a : alpha_grid)
        if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha-grid values must lie in (0, 1)");
    for (double b : bandwidth_grid)
        if (!(b > 0.0)) throw ConfigError("bandwidth-grid values must be positive");
    for (double f : fractions)
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("fractions must lie in (0, 1)");
    if (!(grad_tol > 0.0)) throw ConfigError("grad-tol must be positive");
    if (!(tol >= 0.0)) throw ConfigError("tol must be nonnegative");
    if (!(noise >= 0.0)) throw ConfigError("noise must be nonnegative");
    if (!(turns > 0.0)) throw ConfigError("turns must be positive");
    if (!(prior_count > 0.0)) throw ConfigError("prior-count must be positive");
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed) throw ConfigError(subcommand + " is stochastic and needs --seed");
    return *seed;
}

std::map<std::string, std::string> RunConfig::canonical() const {
    return {{"subcommand", subcommand},
            {"input", input},
            {"output", output},
            {"model", model},
            {"train", train},
            {"test", test},
            {"model-family", models::family_name(family)},
            {"init", init},
            {"seed", seed ? std::to_string(*seed) : ""},
            {"splits", join(std::vector<double>(splits.begin(), splits.end()))},
            {"max-iters", std::to_string(max_iters)},
            {"grad-tol", format_double(grad_tol)},
            {"restarts", std::to_string(restarts)},
            {"alpha-grid", join(alpha_grid)},
            {"bandwidth-grid", join(bandwidth_grid)},
            {"label-column", label_column},
            {"missing", missing},
            {"classes", std::to_string(classes)},
            {"alphabet", join(alphabet)},
            {"samples", std::to_string(samples)},
            {"noise", format_double(noise)},
            {"turns", format_double(turns)},
            {"folds", std::to_string(folds)},
            {"prior-count", format_double(prior_count)},
            {"tol", format_double(tol)},
            {"seeds", std::to_string(seeds)},
            {"fractions", join(fractions)},
            {"fit-iters", std::to_string(fit_iters)},
            {"pca", std::to_string(pca)},
            {"edges", edges},
            {"resume", resume},
            {"kind", kind}};
}

std::string RunConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : canonical()) {
        for (unsigned char c : k + "=" + v + "\n") {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t T, const Rng& rng) {
    Rng r = rng;
    std::vector<std::size_t> perm(T);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = T; i > 1; --i) std::swap(perm[i - 1], perm[r.index(i)]);
    return perm;
}

}  // namespace

Split make_split(std::size_t T, const std::array<double, 3>& fractions, const Rng& rng) {
    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(T)));
    const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(T)));
    if (n_train < 1 || n_val < 1 || n_train + n_val >= T)
        throw ConfigError("splits leave an empty part for " + std::to_string(T) + " rows");
    const auto perm = shuffled(T, rng);
    Split s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                        perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    for (auto* part : {&s.train, &s.validation, &s.test}) std::sort(part->begin(), part->end());
    return s;
}

Split fold_split(std::size_t T, int folds, int k, const Rng& rng) {
    if (folds < 3) throw ConfigError("fold rotation needs at least 3 folds");
    if (k < 0 || k >= folds) throw ConfigError("fold index out of range");
    if (T < static_cast<std::size_t>(folds)) throw ConfigError("more folds than rows");
    const auto perm = shuffled(T, rng);
    const auto F = static_cast<std::size_t>(folds);
    Split s;
    for (std::size_t i = 0; i < T; ++i) {
        const std::size_t block = i * F / T;
        if (block == static_cast<std::size_t>(k))
            s.test.push_back(perm[i]);
        else if (block == (static_cast<std::size_t>(k) + 1) % F)
            s.validation.push_back(perm[i]);
        else
            s.train.push_back(perm[i]);
    }
    for (auto* part : {&s.train, &s.validation, &s.test}) std::sort(part->begin(), part->end());
    return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= static_cast<std::size_t>(X.rows())) throw DataError("row index out of range");
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

}  // namespace outtree::cli
