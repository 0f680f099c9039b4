#include "hrshift/hypothesis_tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "hrshift/error.hpp"
#include "hrshift/stats.hpp"

namespace hrshift {

std::string_view level_name(TreeLevel l) {
  switch (l) {
    case TreeLevel::root: return "root";
    case TreeLevel::roi: return "roi";
    case TreeLevel::condition: return "condition";
    case TreeLevel::change_point: return "change_point";
    case TreeLevel::shape_parameter: return "shape_parameter";
  }
  return "root";
}

TreeLevel level_from_name(std::string_view name) {
  for (auto l : {TreeLevel::root, TreeLevel::roi, TreeLevel::condition, TreeLevel::change_point,
                 TreeLevel::shape_parameter})
    if (level_name(l) == name) return l;
  throw ArgumentError("unknown tree level '" + std::string(name) + "'");
}

HypothesisTree::HypothesisTree(std::string root_label) {
  HypothesisNode root;
  root.label = std::move(root_label);
  nodes_.push_back(std::move(root));
}

std::size_t HypothesisTree::add_child(std::size_t parent, std::string label, TreeLevel level) {
  if (parent >= nodes_.size()) throw ArgumentError("parent node does not exist");
  HypothesisNode n;
  n.label = std::move(label);
  n.level = level;
  n.parent = parent;
  nodes_.push_back(std::move(n));
  nodes_[parent].children.push_back(nodes_.size() - 1);
  return nodes_.size() - 1;
}

std::size_t HypothesisTree::add_leaf(std::size_t parent, std::string label, TreeLevel level, double p,
                                     std::optional<bool> true_null) {
  const std::size_t i = add_child(parent, std::move(label), level);
  nodes_[i].p = p;
  nodes_[i].true_null = true_null;
  return i;
}

std::vector<std::size_t> HypothesisTree::leaves() const { return leaves_under(0); }

std::vector<std::size_t> HypothesisTree::leaves_under(std::size_t i) const {
  std::vector<std::size_t> out;
  std::function<void(std::size_t)> walk = [&](std::size_t k) {
    if (nodes_[k].children.empty()) out.push_back(k);
    for (auto c : nodes_[k].children) walk(c);
  };
  walk(i);
  return out;
}

std::string HypothesisTree::path(std::size_t i) const {
  std::vector<std::string> parts;
  for (std::size_t k = i; k != 0; k = nodes_.at(k).parent) parts.push_back(nodes_[k].label);
  std::string out;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) out += (out.empty() ? "" : "/") + *it;
  return out.empty() ? nodes_[0].label : out;
}

double simes(std::span<const double> p) {
  if (p.empty()) throw ArgumentError("Simes combination needs at least one p-value");
  std::vector<double> s(p.begin(), p.end());
  for (double v : s)
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("p-value outside [0, 1]");
  std::sort(s.begin(), s.end());
  const double m = static_cast<double>(s.size());
  double best = 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) best = std::min(best, m * s[i] / static_cast<double>(i + 1));
  return best;
}

void HypothesisTree::derive_pvalues() {
  std::function<double(std::size_t)> visit = [&](std::size_t k) {
    auto& n = nodes_[k];
    if (n.children.empty()) return n.p;
    std::vector<double> ps;
    for (auto c : n.children) ps.push_back(visit(c));
    return nodes_[k].p = simes(ps);
  };
  visit(0);
}

void HypothesisTree::clear_decisions() {
  for (auto& n : nodes_) {
    n.rejected = false;
    n.tested = false;
    n.critical = std::numeric_limits<double>::quiet_NaN();
  }
}

void HypothesisTree::validate() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (i > 0 && (n.parent >= i || std::find(nodes_[n.parent].children.begin(), nodes_[n.parent].children.end(), i) ==
                                       nodes_[n.parent].children.end()))
      throw ArgumentError("malformed tree: inconsistent parent link at node " + std::to_string(i));
    for (auto c : n.children)
      if (c >= nodes_.size() || nodes_[c].parent != i) throw ArgumentError("malformed tree: bad child link");
    if (!(n.p >= 0.0 && n.p <= 1.0)) throw ArgumentError("node '" + n.label + "' lacks a valid p-value");
  }
}

void inheritance_reject(HypothesisTree& tree, double alpha, InheritanceWeights scheme) {
  if (!(alpha > 0 && alpha < 1)) throw ArgumentError("alpha must lie in (0, 1)");
  tree.validate();
  tree.clear_decisions();
  const std::size_t n = tree.size();
  // Each leaf starts with a share of the unit budget.
  std::vector<double> weight(n, 0.0);
  if (scheme == InheritanceWeights::leaf_count) {
    const auto leaves = tree.leaves();
    for (auto l : leaves) weight[l] = 1.0 / static_cast<double>(leaves.size());
  } else {
    std::function<void(std::size_t, double)> spread = [&](std::size_t k, double w) {
      const auto& ch = tree.node(k).children;
      if (ch.empty()) {
        weight[k] = w;
        return;
      }
      for (auto c : ch) spread(c, w / static_cast<double>(ch.size()));
    };
    spread(0, 1.0);
  }
  auto budget = [&](std::size_t k) {
    double s = 0.0;
    for (auto l : tree.leaves_under(k)) s += weight[l];
    return s;
  };
  auto has_open_leaf = [&](std::size_t k) {
    for (auto l : tree.leaves_under(k))
      if (!tree.node(l).rejected) return true;
    return false;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      auto& node = tree.node(k);
      if (node.rejected) continue;
      if (k != 0 && !tree.node(node.parent).rejected) continue;
      node.tested = true;
      node.critical = alpha * budget(k);
      if (!(node.p <= node.critical)) continue;
      node.rejected = true;
      changed = true;
      if (!tree.is_leaf(k)) continue;
      // Pass the leaf's weight to the nearest ancestor that still has open leaves.
      const double w = weight[k];
      weight[k] = 0.0;
      if (k == 0) break;
      std::size_t a = node.parent;
      while (!has_open_leaf(a) && a != 0) a = tree.node(a).parent;
      if (!has_open_leaf(a)) continue;
      std::vector<std::size_t> open;
      double total = 0.0;
      for (auto l : tree.leaves_under(a))
        if (!tree.node(l).rejected) {
          open.push_back(l);
          total += weight[l];
        }
      for (auto l : open)
        weight[l] += total > 0 ? w * weight[l] / total : w / static_cast<double>(open.size());
    }
  }
}

void tree_selective_fdr(HypothesisTree& tree, double q) {
  if (!(q > 0 && q < 1)) throw ArgumentError("q must lie in (0, 1)");
  tree.validate();
  tree.clear_decisions();
  std::function<void(std::size_t, double)> family = [&](std::size_t parent, double level) {
    const auto& ch = tree.node(parent).children;
    if (ch.empty()) return;
    std::vector<double> p;
    for (auto c : ch) p.push_back(tree.node(c).p);
    const BhResult bh = benjamini_hochberg(p, level);
    const double m = static_cast<double>(ch.size());
    const double used = bh.rejections > 0 ? bh.threshold : level / m;
    const double child_level = level * static_cast<double>(bh.rejections) / m;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      auto& node = tree.node(ch[i]);
      node.tested = true;
      node.critical = used;
      node.rejected = bh.rejected[i];
    }
    for (std::size_t i = 0; i < ch.size(); ++i)
      if (bh.rejected[i]) family(ch[i], child_level);
  };
  if (tree.is_leaf(0)) {
    auto& root = tree.node(0);
    root.tested = true;
    root.critical = q;
    root.rejected = root.p <= q;
    return;
  }
  family(0, q);
}

nlohmann::json to_json(const HypothesisTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes()) {
    nlohmann::json j{{"label", n.label},       {"level", level_name(n.level)}, {"p", n.p},
                     {"critical", n.critical}, {"rejected", n.rejected},       {"tested", n.tested},
                     {"children", n.children}};
    if (n.true_null) j["true_null"] = *n.true_null;
    nodes.push_back(std::move(j));
  }
  return nlohmann::json{{"nodes", nodes}};
}

HypothesisTree tree_from_json(const nlohmann::json& j) {
  try {
    const auto& nodes = j.at("nodes");
    if (!nodes.is_array() || nodes.empty()) throw DataError("tree JSON needs a non-empty 'nodes' array");
    HypothesisTree t(nodes[0].at("label").get<std::string>());
    // Every child index exceeds its parent's, so re-adding nodes in index
    // order reproduces the original numbering.
    std::vector<long> parent(nodes.size(), -1);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (const auto& c : nodes[i].value("children", std::vector<std::size_t>{})) {
        if (c >= nodes.size() || c <= i || parent[c] >= 0) throw DataError("tree JSON has an invalid child index");
        parent[c] = static_cast<long>(i);
      }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& nj = nodes[i];
      if (i > 0) {
        if (parent[i] < 0) throw DataError("tree JSON has a node without a parent");
        t.add_child(static_cast<std::size_t>(parent[i]), nj.at("label").get<std::string>(), TreeLevel::root);
      }
      auto& node = t.node(i);
      if (nj.contains("p") && nj["p"].is_number()) node.p = nj["p"].get<double>();
      if (nj.contains("true_null")) node.true_null = nj["true_null"].get<bool>();
      node.level = level_from_name(nj.value("level", std::string("root")));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed tree JSON: ") + e.what());
  }
}

}  // namespace hrshift
