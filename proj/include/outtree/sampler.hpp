#pragma once

// Forward sampling of the generative model: a uniform rooted out-tree, then
// the root from the marginal and every other node from the conditional
// given its parent.
//
// Streams: the tree uses rng.substream(0); node t draws its attributes from
// rng.substream(t + 1), so a node's value depends only on the seed, its
// index and its parent's value.

#include "outtree/models.hpp"
#include "outtree/rng.hpp"
#include "outtree/treemath.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace outtree::sampler {

using Matrix = Eigen::MatrixXd;
using treemath::OutTree;

struct SampleDraw {
    OutTree tree;
    Matrix data;
    std::uint64_t seed = 0;
};

/// Decodes a Pruefer sequence (length T-2, entries in [0, T)) into the
/// undirected tree's edge list.
std::vector<std::pair<std::size_t, std::size_t>> pruefer_decode(const std::vector<std::size_t>& seq);

/// Uniform over all T^(T-1) rooted out-trees: uniform Pruefer sequence,
/// uniform root, edges oriented away from the root. T >= 1.
OutTree sample_uniform_out_tree(std::size_t T, Rng& rng);

/// Ancestral sampling along a fixed tree.
Matrix sample_given_tree(const models::MutationModel& model, const OutTree& tree, const Rng& rng);

SampleDraw sample_dataset(const models::MutationModel& model, std::size_t T, const Rng& rng);

/// `child,parent` rows; the root's parent column reads `root`.
void write_edge_list(std::ostream& os, const OutTree& tree);
OutTree read_edge_list(std::istream& is);

}  // namespace outtree::sampler
