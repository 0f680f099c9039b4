#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hrshift {

enum class TreeLevel { root, roi, condition, change_point, shape_parameter };
std::string_view level_name(TreeLevel l);
TreeLevel level_from_name(std::string_view name);

struct HypothesisNode {
  std::string label;
  TreeLevel level = TreeLevel::root;
  double p = std::numeric_limits<double>::quiet_NaN();
  double critical = std::numeric_limits<double>::quiet_NaN();
  bool rejected = false;
  bool tested = false;
  std::optional<bool> true_null;  // known truth, for simulation bookkeeping
  std::size_t parent = 0;
  std::vector<std::size_t> children;
};

/// Rooted tree of hypotheses; node 0 is the root. Leaf p-values are
/// supplied, internal p-values derived with derive_pvalues().
class HypothesisTree {
 public:
  explicit HypothesisTree(std::string root_label = "global");

  std::size_t add_child(std::size_t parent, std::string label, TreeLevel level);
  std::size_t add_leaf(std::size_t parent, std::string label, TreeLevel level, double p,
                       std::optional<bool> true_null = std::nullopt);

  std::size_t size() const { return nodes_.size(); }
  HypothesisNode& node(std::size_t i) { return nodes_.at(i); }
  const HypothesisNode& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<HypothesisNode>& nodes() const { return nodes_; }
  bool is_leaf(std::size_t i) const { return nodes_.at(i).children.empty(); }
  std::vector<std::size_t> leaves() const;
  std::vector<std::size_t> leaves_under(std::size_t i) const;
  /// Slash-separated labels from the root's child down to node i.
  std::string path(std::size_t i) const;

  /// Simes combination of children, bottom-up.
  void derive_pvalues();
  void clear_decisions();
  /// Throws unless every leaf has a p-value in [0, 1] and links are consistent.
  void validate() const;

 private:
  std::vector<HypothesisNode> nodes_;
};

/// Simes combination min_i m p_(i) / i.
double simes(std::span<const double> p);

enum class InheritanceWeights { equal, leaf_count };

/// FWER-controlling inheritance procedure; annotates critical values and
/// rejections in place.
void inheritance_reject(HypothesisTree& tree, double alpha, InheritanceWeights weights = InheritanceWeights::equal);
/// Hierarchical selective-FDR procedure: BH within each family, a rejected
/// node's children tested at q R_F / |F|.
void tree_selective_fdr(HypothesisTree& tree, double q);

nlohmann::json to_json(const HypothesisTree& tree);
HypothesisTree tree_from_json(const nlohmann::json& j);

}  // namespace hrshift
