#include "outtree/sampler.hpp"

#include "outtree/errors.hpp"

#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>

namespace outtree::sampler {

std::vector<std::pair<std::size_t, std::size_t>> pruefer_decode(const std::vector<std::size_t>& seq) {
    const std::size_t n = seq.size() + 2;
    std::vector<std::size_t> degree(n, 1);
    for (std::size_t s : seq) {
        if (s >= n) throw DataError("Pruefer entry " + std::to_string(s) + " out of range");
        ++degree[s];
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> leaves;
    for (std::size_t i = 0; i < n; ++i)
        if (degree[i] == 1) leaves.push(i);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(n - 1);
    for (std::size_t s : seq) {
        const std::size_t leaf = leaves.top();
        leaves.pop();
        edges.emplace_back(leaf, s);
        if (--degree[s] == 1) leaves.push(s);
    }
    const std::size_t a = leaves.top();
    leaves.pop();
    const std::size_t b = leaves.top();
    edges.emplace_back(a, b);
    return edges;
}

OutTree sample_uniform_out_tree(std::size_t T, Rng& rng) {
    if (T < 1) throw ConfigError("cannot sample a tree on 0 nodes");
    OutTree tree;
    tree.parent.assign(T, std::nullopt);
    if (T == 1) return tree;
    std::vector<std::size_t> seq(T - 2);
    for (auto& s : seq) s = rng.index(T);
    tree.root = rng.index(T);
    std::vector<std::vector<std::size_t>> adj(T);
    for (auto [a, b] : pruefer_decode(seq)) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<bool> seen(T, false);
    std::vector<std::size_t> stack{tree.root};
    seen[tree.root] = true;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v : adj[u])
            if (!seen[v]) {
                seen[v] = true;
                tree.parent[v] = u;
                stack.push_back(v);
            }
    }
    return tree;
}

Matrix sample_given_tree(const models::MutationModel& model, const OutTree& tree, const Rng& rng) {
    tree.validate();
    const std::size_t T = tree.size();
    Matrix X(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(model.dim()));
    for (std::size_t t : tree.topological_order()) {
        Rng node = rng.substream(t + 1);
        const auto row = static_cast<Eigen::Index>(t);
        if (!tree.parent[t]) {
            X.row(row) = model.sample_marginal(node).transpose();
        } else {
            const Eigen::VectorXd par = X.row(static_cast<Eigen::Index>(*tree.parent[t])).transpose();
            X.row(row) = model.sample_conditional(par, node).transpose();
        }
    }
    return X;
}

SampleDraw sample_dataset(const models::MutationModel& model, std::size_t T, const Rng& rng) {
    Rng tree_rng = rng.substream(0);
    SampleDraw d;
    d.tree = sample_uniform_out_tree(T, tree_rng);
    d.data = sample_given_tree(model, d.tree, rng);
    d.seed = rng.seed();
    return d;
}

void write_edge_list(std::ostream& os, const OutTree& tree) {
    os << "child,parent\n";
    for (std::size_t t = 0; t < tree.size(); ++t) {
        os << t << ',';
        if (tree.parent[t])
            os << *tree.parent[t];
        else
            os << "root";
        os << '\n';
    }
}

OutTree read_edge_list(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty edge list");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "child,parent") throw DataError("edge list must start with a 'child,parent' header");
    std::vector<std::pair<std::size_t, std::optional<std::size_t>>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError("edge list line " + std::to_string(lineno) + ": missing comma");
        try {
            std::size_t pos = 0;
            const std::string c = line.substr(0, comma), p = line.substr(comma + 1);
            const std::size_t child = std::stoul(c, &pos);
            if (pos != c.size()) throw std::invalid_argument(c);
            if (p == "root") {
                rows.emplace_back(child, std::nullopt);
            } else {
                const std::size_t parent = std::stoul(p, &pos);
                if (pos != p.size()) throw std::invalid_argument(p);
                rows.emplace_back(child, parent);
            }
        } catch (const std::logic_error&) {
            throw DataError("edge list line " + std::to_string(lineno) + ": malformed entry");
        }
    }
    OutTree tree;
    tree.parent.assign(rows.size(), std::nullopt);
    std::vector<bool> seen(rows.size(), false);
    for (auto [c, p] : rows) {
        if (c >= rows.size() || seen[c]) throw DataError("edge list child indices must be 0..T-1, each once");
        seen[c] = true;
        tree.parent[c] = p;
        if (!p) tree.root = c;
    }
    tree.validate();
    return tree;
}

}  // namespace outtree::sampler
