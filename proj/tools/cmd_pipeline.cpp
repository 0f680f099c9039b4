// End-to-end pipelines: simulation studies, or the procedures applied to
// subject directories on disk.
#include <iostream>
#include <memory>

#include "common.hpp"
#include "hrshift/error.hpp"
#include "hrshift/io.hpp"
#include "hrshift/procedures.hpp"

namespace cli {
namespace {

using namespace hrshift;

struct PipelineArgs {
  std::string config, out, data;
};

std::vector<StatisticKind> statistics(const StudyConfig& c) {
  std::vector<StatisticKind> out;
  for (const auto& s : c.statistics) out.push_back(statistic_from_name(s));
  return out;
}

// Either <data>/<subject>/ (one ROI) or <data>/<roi>/<subject>/.
std::vector<std::pair<std::string, std::vector<std::filesystem::path>>> roi_layout(const std::filesystem::path& data) {
  std::vector<std::pair<std::string, std::vector<std::filesystem::path>>> rois;
  auto direct = subject_dirs(data);
  if (!direct.empty()) {
    rois.emplace_back("roi", std::move(direct));
    return rois;
  }
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(data))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    auto subjects = subject_dirs(d);
    if (!subjects.empty()) rois.emplace_back(d.filename().string(), std::move(subjects));
  }
  if (rois.empty()) throw DataError("no subject directories (with bold.csv) under " + data.string());
  return rois;
}

void known_from_data(const StudyConfig& c, const PipelineArgs& a) {
  if (c.analysis_noise == "known") throw ConfigError("the known change point pipeline estimates the noise model");
  std::vector<Procedure1Roi> rois;
  for (const auto& [label, dirs] : roi_layout(a.data)) {
    Procedure1Roi roi;
    roi.label = label;
    for (const auto& d : dirs) {
      const SubjectRecord s = read_subject(d);
      if (s.tr != c.tr) throw DataError(d.string() + ": TR differs from the config");
      roi.subjects.push_back({s.id, s.y, s.onsets, read_change_points(d / "change_points.json"), s.confounds});
    }
    rois.push_back(std::move(roi));
  }
  Procedure1Options o;
  o.basis = c.make_basis();
  o.tr = c.tr;
  o.noise = c.analysis_noise == "white" ? NoiseChoice{NoiseSpec::white()} : NoiseChoice{EstimateNoise{1}};
  o.mc_iterations = c.mc_iterations;
  o.alpha = c.alpha;
  o.procedure = c.procedure == "sfdr" ? MtProcedure::selective_fdr : MtProcedure::inheritance;
  o.weights = c.weights == "equal" ? InheritanceWeights::equal : InheritanceWeights::leaf_count;
  o.statistics = statistics(c);
  const Procedure1Result r = run_procedure1(rois, o, c.seed);

  const std::filesystem::path out(a.out);
  std::filesystem::create_directories(out);
  CsvTable tests{{"roi", "condition", "change", "parameter", "subjects", "statistic", "estimate", "tau2", "test_statistic",
                  "df", "p_value", "rejected"},
                 {}};
  for (const auto& [kind, tree] : r.trees) {
    const auto& leaves = r.leaf_nodes.at(kind);
    for (std::size_t i = 0; i < r.tests.size(); ++i) {
      const auto& t = r.tests[i];
      const auto& g = t.results.at(kind);
      tests.rows.push_back({t.roi, t.condition, std::to_string(t.change), std::string(shape_name(t.param)),
                            std::to_string(t.subjects_used), std::string(statistic_name(kind)), format_double(g.fit.eta),
                            format_double(g.fit.tau2), format_double(g.statistic), format_double(g.df),
                            format_double(g.p_value), tree.node(leaves[i]).rejected ? "1" : "0"});
    }
    write_json(out / ("tree_" + std::string(statistic_name(kind)) + ".json"), to_json(tree));
  }
  write_csv(out / "tests.csv", tests);
  std::cerr << "wrote " << tests.rows.size() << " test rows to " << (out / "tests.csv").string() << '\n';
}

void unknown_from_data(const StudyConfig& c, const PipelineArgs& a) {
  const bool known = c.analysis_noise == "known";
  if (c.posi.variance_known && !known) throw ConfigError("known-variance posi needs analysis_noise 'known'");
  std::vector<Procedure2Subject> subjects;
  for (const auto& d : subject_dirs(a.data)) {
    const SubjectRecord s = read_subject(d);
    if (s.tr != c.tr) throw DataError(d.string() + ": TR differs from the config");
    CandidateSet cands;
    if (std::filesystem::exists(d / "candidates.json")) {
      cands = candidate_list(candidates_from_json(read_json(d / "candidates.json")).configurations, s.onsets);
    } else {
      std::map<std::string, std::size_t> counts;
      for (const auto& o : s.onsets) counts[o.condition()] = c.change_points;
      cands = enumerate_candidates(s.onsets, counts, {c.margin, c.spacing, 10000});
    }
    Procedure2Subject p{s.id, s.y, s.onsets, cands, s.confounds, std::nullopt};
    if (known) p.noise = noise_from_json(read_json(d / "noise.json"));
    subjects.push_back(std::move(p));
  }
  if (subjects.empty()) throw DataError("no subject directories (with bold.csv) under " + a.data);

  Procedure2Options o;
  o.basis = c.make_basis();
  o.tr = c.tr;
  o.variance_known = c.posi.variance_known;
  o.focus = {subjects.front().onsets.front().condition(), 1};
  o.posi.D = c.posi.D;
  o.posi.DE = c.posi.DE;
  o.posi.step_factor = c.posi.step_factor;
  o.posi.grid_divisions = c.posi.grid_divisions;
  o.posi.width_factor = c.posi.width_factor;
  o.posi.max_rounds = c.posi.max_rounds;
  const Procedure2Result r = run_procedure2(subjects, o, c.seed, statistics(c));

  const std::filesystem::path out(a.out);
  std::filesystem::create_directories(out);
  CsvTable subj{{"subject", "selected", "theta_ols", "naive_variance", "posi_variance", "median", "mean", "failed"}, {}};
  for (const auto& s : r.subjects)
    subj.rows.push_back({s.id, std::to_string(s.selected), format_double(s.theta_ols), format_double(s.naive_variance),
                         format_double(s.posi_variance), format_double(s.median), format_double(s.mean),
                         s.failed ? "1" : "0"});
  CsvTable tests{{"approach", "statistic", "eta", "tau2", "test_statistic", "df", "p_value"}, {}};
  for (const auto& [ap, by] : r.tests)
    for (const auto& [k, g] : by)
      tests.rows.push_back({approach_name(ap), std::string(statistic_name(k)), format_double(g.fit.eta),
                            format_double(g.fit.tau2), format_double(g.statistic), format_double(g.df),
                            format_double(g.p_value)});
  write_csv(out / "subjects.csv", subj);
  write_csv(out / "tests.csv", tests);
  write_json(out / "summary.json", {{"subjects", r.subjects.size()}, {"failures", r.failures}, {"config", to_json(c)}});
  std::cerr << r.subjects.size() - r.failures << " of " << r.subjects.size() << " subjects analysed\n";
}

void run_pipeline(const PipelineArgs& a, Scenario expected) {
  const StudyConfig c = load_config(a.config);
  if (c.scenario != expected) throw ConfigError("config scenario does not match this pipeline");
  if (!a.data.empty()) {
    validate(c);
    if (expected == Scenario::known_cp) known_from_data(c, a);
    else unknown_from_data(c, a);
    return;
  }
  std::vector<std::filesystem::path> files;
  if (expected == Scenario::known_cp) {
    files = write_study(a.out, run_known_cp_study(c));
  } else {
    const auto r = run_unknown_cp_study(c);
    files = write_study(a.out, r);
    std::cerr << "posi failures: " << r.total_failures << " of " << r.total_subjects << " subjects\n";
  }
  for (const auto& f : files) std::cerr << "wrote " << f.string() << '\n';
}

void add_pipeline(CLI::App& app, const char* name, const char* help, Scenario s) {
  auto a = std::make_shared<PipelineArgs>();
  auto* c = app.add_subcommand(name, help);
  c->add_option("--config", a->config, "study config JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--out", a->out, "output directory")->required();
  c->add_option("--data", a->data, "analyse subject directories instead of running the simulation study")
      ->check(CLI::ExistingDirectory);
  c->callback([a, s] { run_pipeline(*a, s); });
}

}  // namespace

void register_pipeline_commands(CLI::App& app) {
  add_pipeline(app, "pipeline-known", "pre-specified change points: simulation study or analysis of --data",
               Scenario::known_cp);
  add_pipeline(app, "pipeline-unknown", "selected change points with post-selection inference", Scenario::unknown_cp);
}

}  // namespace cli
