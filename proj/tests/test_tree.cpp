#include <algorithm>

#include "doctest.h"
#include "nestmax/tree.hpp"
#include "testutil.hpp"

using namespace nestmax;

TEST_CASE("four-leaf three-layer tree validates and flattens") {
  const TreeSpec spec = testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.1);
  CHECK(validate_tree(spec).empty());
  const DependenceTree tree = DependenceTree::build(spec);
  CHECK(tree.node_count() == 7);  // root + 2 clusters + 4 variable nodes
  CHECK(tree.leaf_count() == 4);
  CHECK(tree.node_label(0) == "alpha_0");
}

TEST_CASE("violations are all reported") {
  TreeSpec bad = testutil::three_layer_4leaf(0.9, 1.2, 0.4, 0.1);
  std::get<TreeSpec>(bad.children[1]).children.clear();
  const auto v = validate_tree(bad);
  bool saw_alpha = false, saw_children = false;
  for (const auto& msg : v) {
    if (msg.find("alpha out of (0,1]") != std::string::npos) saw_alpha = true;
    if (msg.find("no children") != std::string::npos) saw_children = true;
  }
  CHECK(saw_alpha);
  CHECK(saw_children);
  CHECK_THROWS_AS(DependenceTree::build(bad), std::invalid_argument);
}

TEST_CASE("single leaf under the root is a valid degenerate tree") {
  TreeSpec spec;
  spec.alpha = 0.6;
  spec.children.push_back(TreeLeaf{"only", 1.0});
  CHECK(validate_tree(spec).empty());
  const DependenceTree tree = DependenceTree::build(spec);
  CHECK(tree.leaf_count() == 1);
  CHECK(tree.path_product(0) == doctest::Approx(0.6));
}

TEST_CASE("path products") {
  const DependenceTree fig3 =
      DependenceTree::build(testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.1));
  CHECK(fig3.path_product("V1").product == doctest::Approx(0.252));

  const DependenceTree ones =
      DependenceTree::build(testutil::three_layer_4leaf(1.0, 1.0, 1.0, 0.5));
  CHECK(ones.path_product("V3").product == doctest::Approx(1.0));

  const double alphas[] = {0.5};
  const double taus[] = {1.0};
  const std::string names[] = {"X"};
  const DependenceTree two =
      DependenceTree::build(testutil::two_layer(0.5, alphas, taus, names));
  CHECK(two.path_product("X").product == doctest::Approx(0.25));

  CHECK_THROWS_AS(fig3.path_product("nope"), std::out_of_range);
}

TEST_CASE("mrca products distinguish the three dependence cases") {
  const DependenceTree fig3 =
      DependenceTree::build(testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.1));
  CHECK(fig3.mrca_product("V1", "V2") == doctest::Approx(0.63));   // same cluster
  CHECK(fig3.mrca_product("V1", "V3") == doctest::Approx(0.9));    // across
  CHECK(fig3.mrca_product("V1", "V1") == doctest::Approx(0.252));  // itself

  // Partial products dominate full products, and mrca is symmetric.
  for (const auto& a : {"V1", "V2", "V3", "V4"})
    for (const auto& b : {"V1", "V2", "V3", "V4"}) {
      CHECK(fig3.mrca_product(a, b) >=
            fig3.path_product(a).product - 1e-15);
      CHECK(fig3.mrca_product(a, b) == fig3.mrca_product(b, a));
    }
  // Leaves sharing a deeper ancestor are at least as dependent.
  CHECK(fig3.mrca_product("V1", "V2") <= fig3.mrca_product("V1", "V3"));
}

TEST_CASE("child order does not change the flattened tree") {
  TreeSpec spec = testutil::three_layer_4leaf(0.8, 0.6, 0.5, 0.2);
  TreeSpec swapped = spec;
  std::swap(swapped.children[0], swapped.children[1]);
  const DependenceTree a = DependenceTree::build(spec);
  const DependenceTree b = DependenceTree::build(swapped);
  REQUIRE(a.leaf_count() == b.leaf_count());
  for (int i = 0; i < a.leaf_count(); ++i) {
    CHECK(a.leaves()[i].id == b.leaves()[i].id);
    CHECK(a.path_product(i) == b.path_product(i));
  }
  for (int v = 0; v < a.node_count(); ++v)
    CHECK(a.node_label(v) == b.node_label(v));
}

TEST_CASE("JSON schema round trip and unknown keys") {
  const TreeSpec spec = testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.1);
  const nlohmann::json j = tree_spec_to_json(spec);
  const TreeSpec back = tree_spec_from_json(j);
  CHECK(tree_spec_to_json(back) == j);

  nlohmann::json bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(tree_spec_from_json(bad), std::invalid_argument);

  nlohmann::json bad_leaf = nlohmann::json::parse(
      R"({"alpha":0.5,"children":[{"leaf":"A","tau":1.0,"bogus":2}]})");
  CHECK_THROWS_AS(tree_spec_from_json(bad_leaf), std::invalid_argument);
}

TEST_CASE("duplicate leaf ids are rejected") {
  TreeSpec spec;
  spec.alpha = 0.5;
  spec.children.push_back(TreeLeaf{"A", 1.0});
  spec.children.push_back(TreeLeaf{"A", 2.0});
  const auto v = validate_tree(spec);
  CHECK(std::any_of(v.begin(), v.end(), [](const std::string& s) {
    return s.find("duplicate leaf id") != std::string::npos;
  }));
}

TEST_CASE("amplitude exponents compose the reciprocal alphas") {
  const DependenceTree fig3 =
      DependenceTree::build(testutil::three_layer_4leaf(0.9, 0.7, 0.4, 0.1));
  const int leaf = fig3.leaf_index("V1");
  const auto& path = fig3.leaf_path(leaf);
  REQUIRE(path.size() == 3);
  CHECK(fig3.amplitude_exponent(path[2], leaf) == doctest::Approx(1.0));
  CHECK(fig3.amplitude_exponent(path[1], leaf) == doctest::Approx(1.0 / 0.4));
  CHECK(fig3.amplitude_exponent(path[0], leaf) ==
        doctest::Approx(1.0 / (0.4 * 0.7)));
}
