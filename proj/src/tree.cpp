#include "nestmax/tree.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nestmax {

namespace {

void require_keys(const nlohmann::json& j,
                  std::initializer_list<const char*> keys,
                  const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) known = true;
    if (!known)
      throw std::invalid_argument(std::string("tree: unknown key \"") +
                                  it.key() + "\" in " + what);
  }
}

std::variant<TreeSpec, TreeLeaf> child_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw std::invalid_argument("tree: node must be a JSON object");
  if (j.contains("leaf")) {
    require_keys(j, {"leaf", "tau"}, "leaf node");
    if (!j.contains("tau"))
      throw std::invalid_argument("tree: leaf node missing \"tau\"");
    TreeLeaf leaf;
    leaf.id = j.at("leaf").get<std::string>();
    leaf.tau = j.at("tau").get<double>();
    return leaf;
  }
  return tree_spec_from_json(j);
}

// Smallest leaf id in the subtree; used as the canonical sort key.
std::string subtree_key(const std::variant<TreeSpec, TreeLeaf>& child) {
  if (const auto* leaf = std::get_if<TreeLeaf>(&child)) return leaf->id;
  const auto& node = std::get<TreeSpec>(child);
  std::string best;
  bool first = true;
  for (const auto& c : node.children) {
    std::string k = subtree_key(c);
    if (first || k < best) best = std::move(k);
    first = false;
  }
  return best;
}

void canonicalize(TreeSpec& node) {
  for (auto& c : node.children)
    if (auto* sub = std::get_if<TreeSpec>(&c)) canonicalize(*sub);
  std::stable_sort(node.children.begin(), node.children.end(),
                   [](const auto& a, const auto& b) {
                     return subtree_key(a) < subtree_key(b);
                   });
}

void collect_violations(const TreeSpec& node, const std::string& where,
                        std::set<std::string>& seen_leaves,
                        std::vector<std::string>& out) {
  if (!(node.alpha > 0.0) || !(node.alpha <= 1.0) ||
      !std::isfinite(node.alpha)) {
    std::ostringstream os;
    os << where << ": alpha out of (0,1] (got " << node.alpha << ")";
    out.push_back(os.str());
  }
  if (node.children.empty())
    out.push_back(where + ": internal node has no children");
  int idx = 0;
  for (const auto& c : node.children) {
    ++idx;
    const std::string child_where = where + ".child" + std::to_string(idx);
    if (const auto* leaf = std::get_if<TreeLeaf>(&c)) {
      if (leaf->id.empty())
        out.push_back(child_where + ": leaf id must be non-empty");
      if (!seen_leaves.insert(leaf->id).second)
        out.push_back(child_where + ": duplicate leaf id \"" + leaf->id +
                      "\"");
      if (!(leaf->tau > 0.0) || !std::isfinite(leaf->tau))
        out.push_back(child_where + ": leaf bandwidth tau must be positive");
    } else {
      collect_violations(std::get<TreeSpec>(c), child_where, seen_leaves, out);
    }
  }
}

}  // namespace

TreeSpec tree_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw std::invalid_argument("tree: node must be a JSON object");
  require_keys(j, {"alpha", "children"}, "internal node");
  if (!j.contains("alpha") || !j.contains("children"))
    throw std::invalid_argument(
        "tree: internal node needs \"alpha\" and \"children\"");
  TreeSpec spec;
  spec.alpha = j.at("alpha").get<double>();
  for (const auto& c : j.at("children")) spec.children.push_back(child_from_json(c));
  return spec;
}

nlohmann::json tree_spec_to_json(const TreeSpec& spec) {
  nlohmann::json j;
  j["alpha"] = spec.alpha;
  j["children"] = nlohmann::json::array();
  for (const auto& c : spec.children) {
    if (const auto* leaf = std::get_if<TreeLeaf>(&c))
      j["children"].push_back({{"leaf", leaf->id}, {"tau", leaf->tau}});
    else
      j["children"].push_back(tree_spec_to_json(std::get<TreeSpec>(c)));
  }
  return j;
}

std::vector<std::string> validate_tree(const TreeSpec& spec) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  collect_violations(spec, "root", seen, out);
  if (seen.empty()) out.push_back("tree: must contain at least one leaf");
  return out;
}

DependenceTree DependenceTree::build(const TreeSpec& raw) {
  const std::vector<std::string> violations = validate_tree(raw);
  if (!violations.empty()) {
    std::string msg = "invalid dependence tree:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw std::invalid_argument(msg);
  }

  DependenceTree t;
  t.spec_ = raw;
  canonicalize(t.spec_);

  // Depth-first flatten in canonical order.
  struct Builder {
    DependenceTree& t;
    void walk(const TreeSpec& node, int parent, const std::string& label) {
      const int v = static_cast<int>(t.node_alpha_.size());
      t.node_alpha_.push_back(node.alpha);
      t.node_parent_.push_back(parent);
      t.node_label_.push_back("alpha_" + label);
      t.node_key_.push_back(subtree_key(node));
      t.node_children_.emplace_back();
      t.node_leaf_children_.emplace_back();
      t.node_leaves_.emplace_back();
      if (parent >= 0) t.node_children_[parent].push_back(v);
      int child_no = 0;
      for (const auto& c : node.children) {
        ++child_no;
        const std::string child_label =
            (parent < 0 ? std::to_string(child_no)
                        : label + ";" + std::to_string(child_no));
        if (const auto* leaf = std::get_if<TreeLeaf>(&c)) {
          const int li = static_cast<int>(t.leaves_.size());
          t.leaves_.push_back(*leaf);
          t.leaf_parent_.push_back(v);
          t.node_leaf_children_[v].push_back(li);
        } else {
          walk(std::get<TreeSpec>(c), v, child_label);
        }
      }
    }
  };
  Builder{t}.walk(t.spec_, -1, "0");

  // Leaf paths, path products and per-node leaf lists.
  const int n_leaves = static_cast<int>(t.leaves_.size());
  t.leaf_path_.resize(n_leaves);
  t.path_product_.resize(n_leaves);
  for (int li = 0; li < n_leaves; ++li) {
    std::vector<int> path;
    for (int v = t.leaf_parent_[li]; v >= 0; v = t.node_parent_[v])
      path.push_back(v);
    std::reverse(path.begin(), path.end());
    double prod = 1.0;
    for (int v : path) {
      prod *= t.node_alpha_[v];
      t.node_leaves_[v].push_back(li);
    }
    t.leaf_path_[li] = std::move(path);
    t.path_product_[li] = prod;
  }
  return t;
}

int DependenceTree::leaf_index(const LeafId& id) const {
  for (int i = 0; i < leaf_count(); ++i)
    if (leaves_[i].id == id) return i;
  throw std::out_of_range("tree: unknown leaf \"" + id + "\"");
}

PathProduct DependenceTree::path_product(const LeafId& leaf) const {
  return {leaf, path_product_[leaf_index(leaf)]};
}

int DependenceTree::mrca(int leaf_a, int leaf_b) const {
  const auto& pa = leaf_path_[leaf_a];
  const auto& pb = leaf_path_[leaf_b];
  int anc = 0;  // paths always share the root
  for (std::size_t i = 0; i < pa.size() && i < pb.size(); ++i) {
    if (pa[i] != pb[i]) break;
    anc = pa[i];
  }
  return anc;
}

double DependenceTree::mrca_product(int leaf_a, int leaf_b) const {
  if (leaf_a == leaf_b) return path_product_[leaf_a];
  const auto& pa = leaf_path_[leaf_a];
  const auto& pb = leaf_path_[leaf_b];
  double prod = 1.0;
  for (std::size_t i = 0; i < pa.size() && i < pb.size(); ++i) {
    if (pa[i] != pb[i]) break;
    prod *= node_alpha_[pa[i]];
  }
  return prod;
}

double DependenceTree::mrca_product(const LeafId& a, const LeafId& b) const {
  return mrca_product(leaf_index(a), leaf_index(b));
}

TreeSpec assign_parameters(const DependenceTree& tree,
                           std::span<const double> alphas,
                           std::span<const double> taus) {
  if (static_cast<int>(alphas.size()) != tree.node_count() ||
      static_cast<int>(taus.size()) != tree.leaf_count())
    throw std::invalid_argument(
        "assign_parameters: parameter counts do not match the tree");
  TreeSpec spec = tree.spec();
  struct Assign {
    std::span<const double> alphas, taus;
    int node = 0, leaf = 0;
    void walk(TreeSpec& s) {
      s.alpha = alphas[node++];
      for (auto& c : s.children) {
        if (auto* lf = std::get_if<TreeLeaf>(&c))
          lf->tau = taus[leaf++];
        else
          walk(std::get<TreeSpec>(c));
      }
    }
  };
  Assign a{alphas, taus, 0, 0};
  a.walk(spec);
  return spec;
}

double DependenceTree::amplitude_exponent(int v, int leaf) const {
  const auto& path = leaf_path_[leaf];
  double below = 1.0;
  bool found = false;
  for (int u : path) {
    if (found) below *= node_alpha_[u];
    if (u == v) found = true;
  }
  if (!found)
    throw std::out_of_range("tree: node is not on the leaf's path");
  return 1.0 / below;
}

}  // namespace nestmax
