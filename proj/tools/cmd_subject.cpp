// Subject-level commands: simulate, fit-subject, select-cp, posi.
#include <iostream>
#include <memory>

#include "common.hpp"
#include "hrshift/error.hpp"
#include "hrshift/io.hpp"
#include "hrshift/procedures.hpp"
#include "hrshift/rng.hpp"
#include "hrshift/simulate.hpp"
#include "hrshift/subject_fit.hpp"

namespace cli {
namespace {

using namespace hrshift;

SubjectRecord to_record(const SimulatedSubject& s, double tr) {
  SubjectRecord r;
  r.id = s.id;
  r.y = s.y;
  r.tr = tr;
  r.onsets = s.onsets;
  return r;
}

struct SimulateArgs {
  std::string config, out;
  std::size_t setting = 0, replicate = 0;
};

void run_simulate(const SimulateArgs& a) {
  const StudyConfig c = load_config(a.config);
  const BasisSet basis = c.make_basis();
  const std::filesystem::path out(a.out);
  std::filesystem::create_directories(out);
  nlohmann::json manifest{{"config", to_json(c)}, {"subjects", nlohmann::json::array()}};
  std::vector<SimulatedSubject> subjects;

  if (c.scenario == Scenario::known_cp) {
    // Settings are numbered as in the study: SNR, then effects, then misspecification.
    const std::size_t M = c.misspecification.size(), E = c.effects.size();
    if (a.setting >= c.snr.size() * E * M) throw ConfigError("--setting is out of range for this config");
    const std::size_t s = a.setting / (E * M), e = (a.setting / M) % E, m = a.setting % M;
    const std::uint64_t seed = derive_seed(c.seed, {stream_id("rep"), s, e, a.replicate});
    for (std::size_t i = 0; i < c.subjects; ++i)
      subjects.push_back(simulate_known_cp(c, basis, c.snr[s], c.effects[e], c.misspecification[m], seed, i));
    manifest["setting"] = {{"snr", c.snr[s]}, {"effects", c.effects[e]}, {"misspecified", bool(c.misspecification[m])}};
  } else {
    if (a.setting >= c.effects.size()) throw ConfigError("--setting is out of range for this config");
    const auto design = unknown_cp_design(c, c.seed);
    const std::uint64_t seed = derive_seed(c.seed, {stream_id("pool"), a.setting});
    for (std::size_t i = 0; i < c.pool; ++i)
      subjects.push_back(simulate_unknown_cp(c, basis, design, c.effects[a.setting][0], seed, i));
    manifest["setting"] = {{"eta", c.effects[a.setting][0]}};
  }

  for (const auto& s : subjects) {
    const auto dir = out / s.id;
    write_subject(dir, to_record(s, c.tr));
    write_json(dir / "change_points.json", change_points_to_json(s.reported));
    write_json(dir / "truth.json", nlohmann::json{{"change_points", change_points_to_json(s.truth)},
                                                  {"effects", s.effects},
                                                  {"baseline", s.baseline},
                                                  {"clean_mean", s.clean_mean}});
    write_json(dir / "noise.json", noise_to_json(s.noise));
    if (s.candidates.size() > 0) {
      write_json(dir / "candidates.json", candidates_to_json(s.candidates));
      manifest["subjects"].push_back({{"id", s.id}, {"true_candidate", s.true_candidate}});
    } else {
      manifest["subjects"].push_back({{"id", s.id}});
    }
  }
  write_json(out / "manifest.json", manifest);
  std::cerr << "wrote " << subjects.size() << " subjects to " << out.string() << '\n';
}

struct FitArgs {
  std::string subject, change_points, out;
  BasisOptions basis;
  NoiseOptions noise;
  std::size_t mc = 1000;
  std::uint64_t seed = 0;
  bool no_intercept = false;
};

void run_fit(const FitArgs& a) {
  const SubjectRecord s = read_subject(a.subject);
  std::filesystem::path cp_path = a.change_points;
  if (cp_path.empty() && std::filesystem::exists(std::filesystem::path(a.subject) / "change_points.json"))
    cp_path = std::filesystem::path(a.subject) / "change_points.json";
  const ChangePointSet cps = cp_path.empty() ? ChangePointSet{} : read_change_points(cp_path);
  const BasisSet basis = a.basis.make();
  const DesignMatrix d = build_design(s.onsets, basis, cps, s.confounds, ModelKind::segmented,
                                     DesignOptions{s.tr, !a.no_intercept, true});
  const auto known = a.noise.known();
  const NoiseChoice choice = known ? NoiseChoice{*known}
                                   : NoiseChoice{EstimateNoise{a.noise.kind == "ar1" ? 1 : 0}};
  const SubjectGLMFit fit = fit_gls(s.y, d, choice);

  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t j = 0; j < fit.columns.size(); ++j) {
    const auto& t = fit.columns[j];
    const auto jj = static_cast<Eigen::Index>(j);
    nlohmann::json c{{"beta", fit.beta[jj]}, {"se", std::sqrt(fit.cov(jj, jj))}};
    if (t.role == ColumnTag::Role::response) c.update({{"condition", t.condition}, {"segment", t.segment}, {"basis", t.basis}});
    else if (t.role == ColumnTag::Role::intercept) c["role"] = "intercept";
    else c.update({{"role", "confound"}, {"index", t.confound}});
    cols.push_back(std::move(c));
  }
  nlohmann::json shapes = nlohmann::json::array();
  for (std::size_t k = 0; k < s.onsets.size(); ++k) {
    const std::string cond = s.onsets[k].condition();
    const int segments = static_cast<int>(cps.count(cond)) + 1;
    for (int seg = 0; seg < segments; ++seg) {
      Rng rng = make_rng(a.seed, {stream_id("mc"), k, static_cast<std::size_t>(seg)});
      const ShapeParams p = mc_shape_variance(fit, basis, cond, seg, a.mc, rng);
      nlohmann::json e{{"condition", cond}, {"segment", seg}};
      for (auto q : kShapeParams) {
        const std::string name(shape_name(q));
        if (p.is_valid(q)) e[name] = {{"value", p[q]}, {"variance", p.var(q)}, {"excluded_draws", p.excluded[static_cast<std::size_t>(q)]}};
        else e[name] = nullptr;
      }
      shapes.push_back(std::move(e));
    }
  }
  emit_json(a.out, {{"subject", s.id},
                    {"noise", noise_to_json(fit.noise)},
                    {"sigma2", fit.sigma2},
                    {"loglik", fit.loglik},
                    {"dof", fit.dof},
                    {"columns", cols},
                    {"shape_parameters", shapes}});
}

struct SelectArgs {
  std::string subject, candidates, noise_file, out;
  BasisOptions basis;
  NoiseOptions noise;
  bool no_intercept = false;
};

std::filesystem::path default_file(const std::string& given, const std::string& subject, const char* name) {
  if (!given.empty()) return given;
  return std::filesystem::path(subject) / name;
}

// Known noise from --sigma2, else from a noise file when requested, else a
// reference AR(1) estimate from the stationary fit.
NoiseSpec analysis_noise(const SelectArgs& a, const SubjectRecord& s, AnalysisContext& ctx) {
  if (auto k = a.noise.known()) return *k;
  if (!a.noise_file.empty()) return noise_from_json(read_json(a.noise_file));
  return reference_noise(s.y, ctx, a.noise.kind == "ar1" ? 1 : 0);
}

void run_select(const SelectArgs& a) {
  const SubjectRecord s = read_subject(a.subject);
  const CandidateSet cands =
      candidate_list(candidates_from_json(read_json(default_file(a.candidates, a.subject, "candidates.json"))).configurations,
                     s.onsets);
  AnalysisContext ctx{s.onsets, a.basis.make(), s.confounds, DesignOptions{s.tr, !a.no_intercept, true}, NoiseSpec::white()};
  ctx.noise = analysis_noise(a, s, ctx);
  const CandidateModels models(cands, ctx);
  const SelectionResult r = select_model(s.y, models);
  emit_json(a.out, {{"subject", s.id},
                    {"selected", r.selected},
                    {"change_points", change_points_to_json(cands.configurations[r.selected])},
                    {"logliks", r.logliks},
                    {"noise", noise_to_json(ctx.noise)}});
}

struct PosiArgs {
  SelectArgs select;
  std::string condition;
  int change = 1;
  std::size_t D = 500, DE = 100;
  std::uint64_t seed = 0;
  bool unknown_variance = false;
};

void run_posi_cmd(const PosiArgs& a) {
  const auto& sa = a.select;
  const SubjectRecord s = read_subject(sa.subject);
  Procedure2Subject subj{s.id, s.y, s.onsets,
                         candidate_list(candidates_from_json(read_json(default_file(sa.candidates, sa.subject,
                                                                                    "candidates.json")))
                                            .configurations,
                                        s.onsets),
                         s.confounds, std::nullopt};
  Procedure2Options o;
  o.basis = sa.basis.make();
  o.tr = s.tr;
  o.intercept = !sa.no_intercept;
  o.variance_known = !a.unknown_variance;
  o.focus = {a.condition.empty() ? s.onsets.front().condition() : a.condition, a.change};
  o.posi.D = a.D;
  o.posi.DE = a.DE;
  if (o.variance_known) {
    if (auto k = sa.noise.known()) subj.noise = *k;
    else if (!sa.noise_file.empty()) subj.noise = noise_from_json(read_json(sa.noise_file));
    else throw ArgumentError("known-variance posi needs --sigma2 or --noise-file (or use --unknown-variance)");
  }
  const SubjectPosiOutcome r = analyze_posi_subject(subj, o, a.seed);
  nlohmann::json j{{"subject", r.id},
                   {"selected", r.selected},
                   {"change_points", change_points_to_json(r.chosen)},
                   {"theta_ols", r.theta_ols},
                   {"naive_variance", r.naive_variance},
                   {"failed", r.failed}};
  if (!r.failed) {
    j.update({{"posi_variance", r.posi_variance}, {"median", r.median}, {"mean", r.mean}});
    j["detail"] = to_json(r.detail);
  }
  emit_json(sa.out, j);
  if (r.failed) throw PosiFailure(r.id + ": " + r.failure_reason);
}

}  // namespace

void register_subject_commands(CLI::App& app) {
  {
    auto a = std::make_shared<SimulateArgs>();
    auto* c = app.add_subcommand("simulate", "simulate subjects of one study setting into subject directories");
    c->add_option("--config", a->config, "study config JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out", a->out, "output directory")->required();
    c->add_option("--setting", a->setting,
                  "known-cp: index over (snr, effects, misspecification); unknown-cp: effect index")
        ->capture_default_str();
    c->add_option("--replicate", a->replicate, "known-cp replicate number")->capture_default_str();
    c->callback([a] { run_simulate(*a); });
  }
  {
    auto a = std::make_shared<FitArgs>();
    auto* c = app.add_subcommand("fit-subject", "GLS fit with change points, shape parameters and MC variances");
    c->add_option("--subject", a->subject, "subject directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--change-points", a->change_points, "change point JSON (default: <subject>/change_points.json)");
    c->add_option("--mc", a->mc, "Monte-Carlo draws per curve")->capture_default_str();
    c->add_option("--seed", a->seed, "master seed")->required();
    c->add_flag("--no-intercept", a->no_intercept, "omit the intercept column");
    c->add_option("--out", a->out, "output JSON (default stdout)");
    a->basis.add(*c);
    a->noise.add(*c);
    c->callback([a] { run_fit(*a); });
  }
  {
    auto a = std::make_shared<SelectArgs>();
    auto* c = app.add_subcommand("select-cp", "select the maximum-likelihood change point configuration");
    c->add_option("--subject", a->subject, "subject directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--candidates", a->candidates, "candidate JSON (default: <subject>/candidates.json)");
    c->add_option("--noise-file", a->noise_file, "known noise model JSON");
    c->add_flag("--no-intercept", a->no_intercept, "omit the intercept column");
    c->add_option("--out", a->out, "output JSON (default stdout)");
    a->basis.kind = "canonical";
    a->basis.dt = 0.1;
    a->basis.add(*c);
    a->noise.add(*c);
    c->callback([a] { run_select(*a); });
  }
  {
    auto a = std::make_shared<PosiArgs>();
    auto* c = app.add_subcommand("posi", "selection followed by the post-selection confidence distribution");
    auto& sa = a->select;
    c->add_option("--subject", sa.subject, "subject directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--candidates", sa.candidates, "candidate JSON (default: <subject>/candidates.json)");
    c->add_option("--noise-file", sa.noise_file, "known noise model JSON");
    c->add_flag("--no-intercept", sa.no_intercept, "omit the intercept column");
    c->add_option("--condition", a->condition, "condition of the focus coefficient (default: first)");
    c->add_option("--change", a->change, "change index of the focus coefficient")->capture_default_str();
    c->add_option("--D", a->D, "accepted draws per grid point")->capture_default_str();
    c->add_option("--DE", a->DE, "attempts per bounds-search point")->capture_default_str();
    c->add_option("--seed", a->seed, "master seed")->required();
    c->add_flag("--unknown-variance", a->unknown_variance, "plug in the estimated variance");
    c->add_option("--out", sa.out, "output JSON (default stdout)");
    sa.basis.kind = "canonical";
    sa.basis.dt = 0.1;
    sa.basis.add(*c);
    sa.noise.add(*c);
    c->callback([a] { run_posi_cmd(*a); });
  }
}

}  // namespace cli
