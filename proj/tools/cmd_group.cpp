// Group-level and bookkeeping commands: group-test, mt-adjust, blc.
#include <cmath>
#include <map>
#include <memory>

#include "common.hpp"
#include "hrshift/error.hpp"
#include "hrshift/group_test.hpp"
#include "hrshift/hypothesis_tree.hpp"
#include "hrshift/io.hpp"
#include "hrshift/learning.hpp"

namespace cli {
namespace {

using namespace hrshift;

struct GroupArgs {
  std::string input, out;
  std::vector<std::string> statistics{"kh", "wald"};
};

void run_group(const GroupArgs& a) {
  const CsvTable t = read_csv(a.input, true);
  const std::size_t ce = t.column("estimate"), cv = t.column("variance");
  GroupSample g{Eigen::VectorXd(static_cast<Eigen::Index>(t.rows.size())),
                Eigen::VectorXd(static_cast<Eigen::Index>(t.rows.size()))};
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    g.estimates[static_cast<Eigen::Index>(i)] = parse_double(t.rows[i].at(ce));
    g.within_var[static_cast<Eigen::Index>(i)] = parse_double(t.rows[i].at(cv));
  }
  const RemlFit f = reml_fit(g);
  nlohmann::json j{{"subjects", t.rows.size()},
                   {"eta", f.eta},
                   {"tau2", f.tau2},
                   {"var_eta", f.var_eta},
                   {"boundary", f.boundary},
                   {"tests", nlohmann::json::object()}};
  for (const auto& s : a.statistics) {
    const GroupTestResult r = group_test(g, statistic_from_name(s));
    j["tests"][s] = {{"statistic", r.statistic}, {"scale", r.scale}, {"df", r.df},
                     {"p_value", r.p_value}, {"degenerate", r.degenerate}};
  }
  emit_json(a.out, j);
}

struct MtArgs {
  std::string tree, out, procedure = "sfdr", weights = "equal";
  double alpha = 0.05;
};

void run_mt(const MtArgs& a) {
  HypothesisTree t = tree_from_json(read_json(a.tree));
  t.validate();
  t.derive_pvalues();
  if (a.procedure == "sfdr") tree_selective_fdr(t, a.alpha);
  else inheritance_reject(t, a.alpha, a.weights == "equal" ? InheritanceWeights::equal : InheritanceWeights::leaf_count);
  emit_json(a.out, to_json(t));
}

struct BlcArgs {
  std::string input, out, criteria;
  std::size_t block = 5, window = 12, min_target = 3, min_prior = 9;
};

long trial_number(const std::string& cell) {
  const double v = parse_double(cell);
  if (v != std::floor(v)) throw DataError("trial numbers must be integers, got '" + cell + "'");
  return static_cast<long>(v);
}

bool flag(const std::string& cell) {
  if (cell == "1") return true;
  if (cell == "0") return false;
  throw DataError("expected 0 or 1, got '" + cell + "'");
}

void run_blc(const BlcArgs& a) {
  const CsvTable t = read_csv(a.input, true);
  const std::size_t cs = t.column("subject"), ct = t.column("trial"), cg = t.column("target"),
                    cp = t.column("positive");
  // Trials are ordered by their number within each subject; subjects keep
  // lexicographic order.
  std::map<std::string, std::map<long, std::pair<bool, bool>>> by;
  for (const auto& r : t.rows) {
    const long trial = trial_number(r.at(ct));
    if (!by[r.at(cs)].emplace(trial, std::make_pair(flag(r.at(cg)), flag(r.at(cp)))).second)
      throw DataError("duplicate trial " + r.at(ct) + " for subject " + r.at(cs));
  }
  const LearningRule rule{a.window, a.min_target, a.min_prior};
  std::vector<TrialSequence> seqs;
  CsvTable crit{{"subject", "criterion_trial"}, {}};
  for (const auto& [id, trials] : by) {
    TrialSequence s;
    for (const auto& [n, v] : trials) {
      s.target.push_back(v.first);
      s.positive.push_back(v.second);
    }
    const auto c = learning_criterion(s, rule);
    crit.rows.push_back({id, c ? std::to_string(*c) : "NA"});
    seqs.push_back(std::move(s));
  }
  const LearningCurve curve = backward_learning_curve(seqs, a.block, rule);
  CsvTable out{{"block", "accuracy", "subjects"}, {}};
  for (std::size_t i = 0; i < curve.block.size(); ++i)
    out.rows.push_back({std::to_string(curve.block[i]), format_double(curve.accuracy[i]), std::to_string(curve.subjects[i])});
  write_csv(a.out, out);
  if (!a.criteria.empty()) write_csv(a.criteria, crit);
}

}  // namespace

void register_group_commands(CLI::App& app) {
  {
    auto a = std::make_shared<GroupArgs>();
    auto* c = app.add_subcommand("group-test", "REML random-effects test of a zero group mean");
    c->add_option("--input", a->input, "CSV with columns estimate,variance")->required()->check(CLI::ExistingFile);
    c->add_option("--statistic", a->statistics, "kh and/or wald")->check(CLI::IsMember({"kh", "wald"}));
    c->add_option("--out", a->out, "output JSON (default stdout)");
    c->callback([a] { run_group(*a); });
  }
  {
    auto a = std::make_shared<MtArgs>();
    auto* c = app.add_subcommand("mt-adjust", "hierarchical multiple-testing adjustment of a hypothesis tree");
    c->add_option("--tree", a->tree, "tree JSON with leaf p-values")->required()->check(CLI::ExistingFile);
    c->add_option("--procedure", a->procedure, "sfdr or inheritance")
        ->capture_default_str()
        ->check(CLI::IsMember({"sfdr", "inheritance"}));
    c->add_option("--weights", a->weights, "inheritance weights: equal or leaf_count")
        ->capture_default_str()
        ->check(CLI::IsMember({"equal", "leaf_count"}));
    c->add_option("--alpha", a->alpha, "FWER or sFDR level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    c->add_option("--out", a->out, "output JSON (default stdout)");
    c->callback([a] { run_mt(*a); });
  }
  {
    auto a = std::make_shared<BlcArgs>();
    auto* c = app.add_subcommand("blc", "learning criterion and backward learning curve");
    c->add_option("--input", a->input, "CSV with columns subject,trial,target,positive")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--out", a->out, "curve CSV (block,accuracy,subjects)")->required();
    c->add_option("--criteria", a->criteria, "optional per-subject criterion CSV");
    c->add_option("--block", a->block, "trials per block")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--window", a->window, "consecutive positive trials required")->capture_default_str();
    c->add_option("--min-target", a->min_target, "target trials required in the window")->capture_default_str();
    c->add_option("--min-prior", a->min_prior, "positive trials required before the window")->capture_default_str();
    c->callback([a] { run_blc(*a); });
  }
}

}  // namespace cli
