#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace nestmax {

using LeafId = std::string;

struct TreeLeaf {
  LeafId id;
  double tau = 0.0;  // kernel bandwidth of the leaf variable
};

// User-facing nested form, mirroring the JSON schema:
//   internal node  {"alpha": a, "children": [...]}
//   leaf           {"leaf": "NAME", "tau": t}
// The root object is the alpha_0 node.
struct TreeSpec {
  double alpha = 0.0;
  std::vector<std::variant<TreeSpec, TreeLeaf>> children;
};

TreeSpec tree_spec_from_json(const nlohmann::json& j);
nlohmann::json tree_spec_to_json(const TreeSpec& spec);

class DependenceTree;

// The tree's canonical spec with substituted parameters (alphas per
// internal node, taus per leaf, both in canonical order).
TreeSpec assign_parameters(const DependenceTree& tree,
                           std::span<const double> alphas,
                           std::span<const double> taus);

// All invariant violations (empty when the spec is valid).
std::vector<std::string> validate_tree(const TreeSpec& spec);

struct PathProduct {
  LeafId leaf;
  double product;  // product of alphas on the root -> leaf path
};

// Validated, flattened dependence tree.
//
// Internal nodes and leaves are stored in a canonical order: the children
// of every node are sorted by the smallest leaf id in their subtree.  The
// canonical order fixes parameter labels, MCMC update order and RNG stream
// keys, so re-ordering children in the input changes nothing and permuting
// leaf labels permutes the outputs correspondingly.
class DependenceTree {
 public:
  // Throws std::invalid_argument listing every violation.
  static DependenceTree build(const TreeSpec& spec);

  int node_count() const { return static_cast<int>(node_alpha_.size()); }
  int leaf_count() const { return static_cast<int>(leaves_.size()); }

  double node_alpha(int v) const { return node_alpha_[v]; }
  int node_parent(int v) const { return node_parent_[v]; }  // -1 for root
  // "alpha_0" for the root, then path labels: "alpha_1", "alpha_1;2", ...
  const std::string& node_label(int v) const { return node_label_[v]; }
  // Smallest leaf id under the node; keys the node's RNG streams.
  const std::string& node_key(int v) const { return node_key_[v]; }
  // Internal-node children of v (leaf children are in node_leaf_children).
  const std::vector<int>& node_children(int v) const {
    return node_children_[v];
  }
  // Leaf children attached directly to v.
  const std::vector<int>& node_leaf_children(int v) const {
    return node_leaf_children_[v];
  }

  const std::vector<TreeLeaf>& leaves() const { return leaves_; }
  int leaf_index(const LeafId& id) const;  // throws std::out_of_range
  int leaf_parent(int leaf) const { return leaf_parent_[leaf]; }
  // Internal nodes on the root -> leaf path, root first.
  const std::vector<int>& leaf_path(int leaf) const {
    return leaf_path_[leaf];
  }
  // Leaves under node v, in canonical order.
  const std::vector<int>& node_leaves(int v) const { return node_leaves_[v]; }

  double path_product(int leaf) const { return path_product_[leaf]; }
  PathProduct path_product(const LeafId& leaf) const;

  // Product of alphas from the root down to (and including) the most
  // recent common ancestor; the full path product when a == b.
  double mrca_product(const LeafId& a, const LeafId& b) const;
  double mrca_product(int leaf_a, int leaf_b) const;
  int mrca(int leaf_a, int leaf_b) const;

  // Exponent of node v's amplitude in the composed amplitude of `leaf`:
  // 1 / (product of alphas strictly below v on the path).  v must lie on
  // the leaf's path.
  double amplitude_exponent(int v, int leaf) const;

  const TreeSpec& spec() const { return spec_; }

 private:
  DependenceTree() = default;

  TreeSpec spec_;  // canonical-order copy of the input
  std::vector<double> node_alpha_;
  std::vector<int> node_parent_;
  std::vector<std::string> node_label_;
  std::vector<std::string> node_key_;
  std::vector<std::vector<int>> node_children_;
  std::vector<std::vector<int>> node_leaf_children_;
  std::vector<std::vector<int>> node_leaves_;
  std::vector<TreeLeaf> leaves_;
  std::vector<int> leaf_parent_;
  std::vector<std::vector<int>> leaf_path_;
  std::vector<double> path_product_;
};

}  // namespace nestmax
