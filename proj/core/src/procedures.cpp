#include "hrshift/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hrshift/error.hpp"
#include "hrshift/parallel.hpp"
#include "hrshift/simulate.hpp"
#include "hrshift/stats.hpp"

namespace hrshift {
namespace {

using ShapeTable = std::map<std::pair<std::string, int>, ShapeParams>;

ShapeTable subject_shapes(const Procedure1Subject& s, const Procedure1Options& o, std::uint64_t seed, std::size_t roi,
                          std::size_t index) {
  const DesignMatrix d = build_design(s.onsets, o.basis, s.change_points, s.confounds, ModelKind::segmented,
                                      DesignOptions{o.tr, o.intercept, true});
  const SubjectGLMFit fit = fit_gls(s.y, d, o.noise);
  ShapeTable out;
  for (std::size_t k = 0; k < s.onsets.size(); ++k) {
    const std::string& cond = s.onsets[k].condition();
    const auto C = static_cast<int>(s.change_points.count(cond));
    for (int c = 0; c <= C; ++c) {
      Rng rng = make_rng(seed, {stream_id("mc"), roi, index, k, static_cast<std::uint64_t>(c)});
      out[{cond, c}] = mc_shape_variance(fit, o.basis, cond, c, o.mc_iterations, rng);
    }
  }
  return out;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

Procedure1Result run_procedure1(const std::vector<Procedure1Roi>& rois, const Procedure1Options& o, std::uint64_t seed,
                                const std::map<std::pair<std::string, ShapeParam>, bool>& truth) {
  if (rois.empty()) throw ArgumentError("procedure needs at least one ROI");
  if (o.statistics.empty()) throw ArgumentError("procedure needs at least one test statistic");
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    if (rois[r].subjects.size() < 2) throw ArgumentError("group-level analysis needs at least two subjects");
    const auto& ref = rois[r].subjects.front();
    for (std::size_t i = 0; i < rois[r].subjects.size(); ++i) {
      const auto& s = rois[r].subjects[i];
      if (s.onsets.size() != ref.onsets.size()) throw ArgumentError("subjects differ in their conditions");
      for (std::size_t k = 0; k < s.onsets.size(); ++k)
        if (s.onsets[k].condition() != ref.onsets[k].condition() ||
            s.change_points.count(s.onsets[k].condition()) != ref.change_points.count(ref.onsets[k].condition()))
          throw ArgumentError("subjects differ in conditions or change point counts");
      jobs.emplace_back(r, i);
    }
  }

  std::vector<ShapeTable> shapes(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto [r, i] = jobs[j];
    const auto& s = rois[r].subjects[i];
    try {
      shapes[j] = subject_shapes(s, o, seed, r, i);
    } catch (const DataError& e) {
      throw DataError("ROI '" + rois[r].label + "', subject '" + s.id + "': " + e.what());
    }
  });

  Procedure1Result res;
  std::size_t offset = 0;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const auto& ref = rois[r].subjects.front();
    const std::size_t n = rois[r].subjects.size();
    for (const auto& u : ref.onsets) {
      const auto C = static_cast<int>(ref.change_points.count(u.condition()));
      for (int c = 1; c <= C; ++c) {
        for (auto q : kShapeParams) {
          const auto qi = static_cast<std::size_t>(q);
          std::vector<double> b, vb, a, va;
          for (std::size_t i = 0; i < n; ++i) {
            const auto& t = shapes[offset + i];
            const auto& before = t.at({u.condition(), c - 1});
            const auto& after = t.at({u.condition(), c});
            if (!before.valid[qi] || !after.valid[qi] || !std::isfinite(before.variance[qi]) ||
                !std::isfinite(after.variance[qi]))
              continue;
            b.push_back(before.value[qi]);
            vb.push_back(before.variance[qi]);
            a.push_back(after.value[qi]);
            va.push_back(after.variance[qi]);
          }
          ShapeChangeTest test{rois[r].label, u.condition(), c, q, b.size(), {}};
          auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); };
          for (auto kind : o.statistics) {
            GroupTestResult g;
            g.kind = kind;
            if (b.size() >= 2)
              g = paired_group_test(GroupSample{vec(b), vec(vb)}, GroupSample{vec(a), vec(va)}, kind);
            test.results[kind] = g;
          }
          res.tests.push_back(std::move(test));
        }
      }
    }
    offset += n;
  }

  for (auto kind : o.statistics) {
    const bool single = rois.size() == 1;
    HypothesisTree tree(single ? rois.front().label : "global");
    if (single) tree.node(0).level = TreeLevel::roi;
    std::map<std::string, std::size_t> roi_node, cond_node, cp_node;
    auto& leaves = res.leaf_nodes[kind];
    for (const auto& t : res.tests) {
      std::size_t rn = 0;
      if (!single) {
        if (!roi_node.count(t.roi)) roi_node[t.roi] = tree.add_child(0, t.roi, TreeLevel::roi);
        rn = roi_node[t.roi];
      }
      const std::string ck = t.roi + "/" + t.condition;
      if (!cond_node.count(ck)) cond_node[ck] = tree.add_child(rn, t.condition, TreeLevel::condition);
      const std::string pk = ck + "/" + std::to_string(t.change);
      if (!cp_node.count(pk))
        cp_node[pk] = tree.add_child(cond_node[ck], "cp" + std::to_string(t.change), TreeLevel::change_point);
      std::optional<bool> null;
      if (auto it = truth.find({t.condition, t.param}); it != truth.end()) null = it->second;
      leaves.push_back(tree.add_leaf(cp_node[pk], std::string(shape_name(t.param)), TreeLevel::shape_parameter,
                                     t.results.at(kind).p_value, null));
    }
    tree.derive_pvalues();
    if (o.procedure == MtProcedure::selective_fdr)
      tree_selective_fdr(tree, o.alpha);
    else
      inheritance_reject(tree, o.alpha, o.weights);
    res.trees.emplace(kind, std::move(tree));
  }
  return res;
}

double false_discovery_proportion(const HypothesisTree& tree) {
  std::size_t v = 0, r = 0;
  for (auto l : tree.leaves()) {
    const auto& n = tree.node(l);
    if (!n.rejected) continue;
    ++r;
    if (n.true_null.value_or(false)) ++v;
  }
  return static_cast<double>(v) / static_cast<double>(std::max<std::size_t>(r, 1));
}

std::string approach_name(Approach a) {
  switch (a) {
    case Approach::naive: return "naive";
    case Approach::posi_05: return "posi_05";
    case Approach::posi_e: return "posi_E";
    case Approach::posi_ols: return "posi_OLS";
  }
  return "naive";
}

std::pair<double, double> SubjectPosiOutcome::estimate(Approach a) const {
  switch (a) {
    case Approach::naive: return {theta_ols, naive_variance};
    case Approach::posi_05: return {median, posi_variance};
    case Approach::posi_e: return {mean, posi_variance};
    case Approach::posi_ols: return {theta_ols, posi_variance};
  }
  return {theta_ols, naive_variance};
}

SubjectPosiOutcome analyze_posi_subject(const Procedure2Subject& s, const Procedure2Options& o, std::uint64_t seed) {
  SubjectPosiOutcome out;
  out.id = s.id;
  AnalysisContext ctx{s.onsets, o.basis, s.confounds, DesignOptions{o.tr, o.intercept, true}, NoiseSpec::white()};
  if (o.variance_known) {
    if (!s.noise || !s.noise->known) throw ArgumentError("known-variance analysis needs the subject's noise model");
    ctx.noise = *s.noise;
  } else {
    ctx.noise = reference_noise(s.y, ctx, 1);
  }
  try {
    const CandidateModels models(s.candidates, ctx);
    const SelectionResult sel = select_model(s.y, models);
    out.selected = sel.selected;
    out.chosen = s.candidates.configurations[sel.selected];
    const PosiProblem problem = make_posi_problem(s.y, models, sel.selected, o.focus, o.variance_known);
    out.theta_ols = problem.theta_ols;
    out.naive_variance = problem.se_naive * problem.se_naive;
    out.detail = run_posi(problem, o.posi, seed);
    out.failed = out.detail.failed;
    out.failure_reason = out.detail.failure_reason;
    out.posi_variance = out.detail.variance;
    out.median = out.detail.cd.median;
    out.mean = out.detail.cd.mean;
  } catch (const DataError& e) {
    out.failed = true;
    out.failure_reason = e.what();
  }
  return out;
}

std::map<Approach, std::map<StatisticKind, GroupTestResult>> group_tests_procedure2(
    const std::vector<const SubjectPosiOutcome*>& subjects, const std::vector<StatisticKind>& statistics) {
  std::map<Approach, std::map<StatisticKind, GroupTestResult>> out;
  const auto n = static_cast<Eigen::Index>(subjects.size());
  for (auto a : kApproaches) {
    GroupSample g{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [est, var] = subjects[static_cast<std::size_t>(i)]->estimate(a);
      g.estimates[i] = est;
      g.within_var[i] = var;
    }
    for (auto k : statistics) out[a][k] = group_test(g, k);
  }
  return out;
}

Procedure2Result run_procedure2(const std::vector<Procedure2Subject>& subjects, const Procedure2Options& o,
                                std::uint64_t seed, const std::vector<StatisticKind>& statistics) {
  if (subjects.size() < 2) throw ArgumentError("group-level analysis needs at least two subjects");
  Procedure2Result r;
  r.subjects.resize(subjects.size());
  parallel_for(subjects.size(), [&](std::size_t i) {
    r.subjects[i] = analyze_posi_subject(subjects[i], o, derive_seed(seed, {stream_id("posi-subject"), i}));
  });
  std::vector<const SubjectPosiOutcome*> ok;
  for (const auto& s : r.subjects) {
    if (s.failed) ++r.failures;
    else ok.push_back(&s);
  }
  if (ok.empty()) throw PosiFailure("post-selection inference failed for every subject");
  if (ok.size() < 2) throw DataError("fewer than two subjects with successful post-selection inference");
  r.tests = group_tests_procedure2(ok, statistics);
  return r;
}

namespace {

std::vector<StatisticKind> parse_statistics(const StudyConfig& c) {
  std::vector<StatisticKind> out;
  for (const auto& s : c.statistics) out.push_back(statistic_from_name(s));
  return out;
}

}  // namespace

KnownStudyResult run_known_cp_study(const StudyConfig& c) {
  if (c.scenario != Scenario::known_cp) throw ConfigError("configuration is not a known-cp study");
  validate(c);
  if (c.analysis_noise == "known") throw ConfigError("known-cp study supports analysis_noise white or ar1");
  const BasisSet basis = c.make_basis();
  const auto stats = parse_statistics(c);

  struct Setting {
    std::size_t snr, effect, misspec;
  };
  std::vector<Setting> settings;
  for (std::size_t s = 0; s < c.snr.size(); ++s)
    for (std::size_t e = 0; e < c.effects.size(); ++e)
      for (std::size_t m = 0; m < c.misspecification.size(); ++m) settings.push_back({s, e, m});

  struct RepOutcome {
    bool failed = false;
    std::map<StatisticKind, double> fdp;
    std::map<StatisticKind, std::vector<bool>> rejected;
    std::vector<std::pair<std::string, ShapeParam>> labels;
  };
  const std::size_t B = c.repetitions;
  std::vector<RepOutcome> reps(settings.size() * B);

  Procedure1Options opt;
  opt.basis = basis;
  opt.tr = c.tr;
  opt.noise = c.analysis_noise == "white" ? NoiseChoice{NoiseSpec::white()} : NoiseChoice{EstimateNoise{1}};
  opt.mc_iterations = c.mc_iterations;
  opt.alpha = c.alpha;
  opt.procedure = c.procedure == "sfdr" ? MtProcedure::selective_fdr : MtProcedure::inheritance;
  opt.weights = c.weights == "equal" ? InheritanceWeights::equal : InheritanceWeights::leaf_count;
  opt.statistics = stats;

  parallel_for(reps.size(), [&](std::size_t j) {
    const Setting& st = settings[j / B];
    const std::size_t b = j % B;
    const auto& means = c.effects[st.effect];
    const std::uint64_t rep_seed = derive_seed(c.seed, {stream_id("rep"), st.snr, st.effect, b});
    std::map<std::pair<std::string, ShapeParam>, bool> truth;
    for (std::size_t k = 0; k < c.conditions; ++k)
      for (auto q : kShapeParams) {
        const bool changes = means[k] != 0.0 && (q == ShapeParam::pm || q == ShapeParam::na || q == ShapeParam::auc);
        truth[{"c" + std::to_string(k + 1), q}] = !changes;
      }
    RepOutcome& out = reps[j];
    try {
      Procedure1Roi roi;
      for (std::size_t i = 0; i < c.subjects; ++i) {
        const SimulatedSubject s =
            simulate_known_cp(c, basis, c.snr[st.snr], means, c.misspecification[st.misspec], rep_seed, i);
        roi.subjects.push_back({s.id, s.y, s.onsets, s.reported, Eigen::MatrixXd()});
      }
      const Procedure1Result r = run_procedure1({roi}, opt, derive_seed(rep_seed, {stream_id("procedure")}), truth);
      for (auto k : stats) {
        const auto& tree = r.trees.at(k);
        out.fdp[k] = false_discovery_proportion(tree);
        for (auto leaf : r.leaf_nodes.at(k)) out.rejected[k].push_back(tree.node(leaf).rejected);
      }
      for (const auto& t : r.tests) out.labels.emplace_back(t.condition, t.param);
    } catch (const DataError&) {
      out.failed = true;
    }
  });

  KnownStudyResult res;
  res.fdp.header = {"snr", "e", "psi", "statistic", "avg_fdp", "repetitions", "failures"};
  for (std::size_t k = 0; k < c.conditions; ++k) res.fdp.header.insert(res.fdp.header.begin() + 1 + static_cast<long>(k), "e" + std::to_string(k + 1));
  res.fdp.header.erase(std::find(res.fdp.header.begin(), res.fdp.header.end(), "e"));
  res.rates.header = {"snr"};
  for (std::size_t k = 0; k < c.conditions; ++k) res.rates.header.push_back("e" + std::to_string(k + 1));
  for (const char* h : {"psi", "statistic", "condition", "parameter", "rejection_rate"}) res.rates.header.push_back(h);

  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t si = 0; si < settings.size(); ++si) {
    const Setting& st = settings[si];
    std::vector<std::string> key{format_double(c.snr[st.snr])};
    for (double e : c.effects[st.effect]) key.push_back(format_double(e));
    key.push_back(c.misspecification[st.misspec] ? "misspecified" : "correct");
    std::size_t failures = 0;
    const std::vector<std::pair<std::string, ShapeParam>>* labels = nullptr;
    for (std::size_t b = 0; b < B; ++b) {
      const auto& rep = reps[si * B + b];
      if (rep.failed) ++failures;
      else if (!labels) labels = &rep.labels;
    }
    const std::size_t used = B - failures;
    for (auto k : stats) {
      double fdp = 0.0;
      std::vector<double> rate(labels ? labels->size() : 0, 0.0);
      for (std::size_t b = 0; b < B; ++b) {
        const auto& rep = reps[si * B + b];
        if (rep.failed) continue;
        fdp += rep.fdp.at(k);
        for (std::size_t l = 0; l < rate.size(); ++l) rate[l] += rep.rejected.at(k)[l] ? 1.0 : 0.0;
      }
      const double denom = static_cast<double>(std::max<std::size_t>(used, 1));
      auto row = key;
      row.push_back(std::string(statistic_name(k)));
      row.push_back(format_double(fdp / denom));
      row.push_back(std::to_string(used));
      row.push_back(std::to_string(failures));
      res.fdp.rows.push_back(row);
      nlohmann::json jr{{"snr", c.snr[st.snr]},          {"effects", c.effects[st.effect]},
                        {"psi", key[key.size() - 1]},     {"statistic", statistic_name(k)},
                        {"avg_fdp", fdp / denom},         {"repetitions", used},
                        {"failures", failures}};
      for (std::size_t l = 0; l < rate.size(); ++l) {
        auto rr = key;
        rr.push_back(std::string(statistic_name(k)));
        rr.push_back((*labels)[l].first);
        rr.push_back(std::string(shape_name((*labels)[l].second)));
        rr.push_back(format_double(rate[l] / denom));
        res.rates.rows.push_back(rr);
        jr["rejection_rates"][(*labels)[l].first][std::string(shape_name((*labels)[l].second))] = rate[l] / denom;
      }
      rows.push_back(std::move(jr));
    }
  }
  res.summary = {{"config", to_json(c)}, {"rows", rows}};
  return res;
}

UnknownStudyResult run_unknown_cp_study(const StudyConfig& c) {
  if (c.scenario != Scenario::unknown_cp) throw ConfigError("configuration is not an unknown-cp study");
  validate(c);
  const BasisSet basis = c.make_basis();
  const auto stats = parse_statistics(c);
  const auto design = unknown_cp_design(c, c.seed);
  const bool known = c.analysis_noise == "known";
  if (c.posi.variance_known && !known) throw ConfigError("known-variance posi needs analysis_noise 'known'");

  Procedure2Options opt;
  opt.basis = basis;
  opt.tr = c.tr;
  opt.variance_known = c.posi.variance_known;
  opt.focus = FocusSpec{design.front().condition(), 1};
  opt.posi.D = c.posi.D;
  opt.posi.DE = c.posi.DE;
  opt.posi.step_factor = c.posi.step_factor;
  opt.posi.grid_divisions = c.posi.grid_divisions;
  opt.posi.width_factor = c.posi.width_factor;
  opt.posi.max_rounds = c.posi.max_rounds;

  const std::size_t N = c.pool, E = c.effects.size();
  std::vector<SimulatedSubject> sims(N * E);
  std::vector<SubjectPosiOutcome> outcomes(N * E);
  parallel_for(N * E, [&](std::size_t j) {
    const std::size_t e = j / N, i = j % N;
    sims[j] = simulate_unknown_cp(c, basis, design, c.effects[e][0], derive_seed(c.seed, {stream_id("pool"), e}), i);
    Procedure2Subject s{sims[j].id, sims[j].y, sims[j].onsets, sims[j].candidates, Eigen::MatrixXd(), std::nullopt};
    if (known) s.noise = sims[j].noise;
    outcomes[j] = analyze_posi_subject(s, opt, derive_seed(c.seed, {stream_id("posi"), e, i}));
  });

  UnknownStudyResult res;
  res.rates.header = {"eta", "approach", "statistic", "rejection_rate", "repetitions"};
  res.subjects.header = {"eta",          "subject", "true_candidate", "selected", "theta_ols", "naive_variance",
                         "posi_variance", "median", "mean",           "failed",   "reason"};
  nlohmann::json per_eta = nlohmann::json::array();
  for (std::size_t e = 0; e < E; ++e) {
    const std::string eta = format_double(c.effects[e][0]);
    std::vector<const SubjectPosiOutcome*> ok;
    double naive = 0, posi = 0;
    std::size_t correct = 0, failures = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& o = outcomes[e * N + i];
      const auto& s = sims[e * N + i];
      res.subjects.rows.push_back({eta, s.id, std::to_string(s.true_candidate), std::to_string(o.selected),
                                   format_double(o.theta_ols), format_double(o.naive_variance),
                                   format_double(o.posi_variance), format_double(o.median), format_double(o.mean),
                                   o.failed ? "1" : "0", csv_safe(o.failure_reason)});
      if (o.selected == s.true_candidate) ++correct;
      if (o.failed) {
        ++failures;
        continue;
      }
      ok.push_back(&o);
      naive += o.naive_variance;
      posi += o.posi_variance;
    }
    res.total_failures += failures;
    res.total_subjects += N;
    if (ok.size() < c.subjects) throw DataError("too few successful subjects to resample at eta " + eta);

    std::map<std::pair<Approach, StatisticKind>, std::size_t> rejections;
    for (std::size_t b = 0; b < c.repetitions; ++b) {
      Rng rng = make_rng(c.seed, {stream_id("resample"), e, b});
      std::vector<std::size_t> idx(ok.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      // Partial Fisher-Yates: first n entries form the sample.
      for (std::size_t i = 0; i < c.subjects; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      std::vector<const SubjectPosiOutcome*> sample;
      for (std::size_t i = 0; i < c.subjects; ++i) sample.push_back(ok[idx[i]]);
      const auto tests = group_tests_procedure2(sample, stats);
      for (const auto& [a, by] : tests)
        for (const auto& [k, t] : by)
          if (t.p_value <= c.alpha) ++rejections[{a, k}];
    }
    nlohmann::json rates;
    for (auto a : kApproaches)
      for (auto k : stats) {
        const double rate = static_cast<double>(rejections[{a, k}]) / static_cast<double>(c.repetitions);
        res.rates.rows.push_back({eta, approach_name(a), std::string(statistic_name(k)), format_double(rate),
                                  std::to_string(c.repetitions)});
        rates[approach_name(a)][std::string(statistic_name(k))] = rate;
      }
    const double nok = static_cast<double>(ok.size());
    per_eta.push_back({{"eta", c.effects[e][0]},
                       {"pool", N},
                       {"failures", failures},
                       {"failure_rate", static_cast<double>(failures) / static_cast<double>(N)},
                       {"selection_accuracy", static_cast<double>(correct) / static_cast<double>(N)},
                       {"mean_naive_variance", naive / nok},
                       {"mean_posi_variance", posi / nok},
                       {"rejection_rates", rates}});
  }
  res.summary = {{"config", to_json(c)}, {"settings", per_eta}};
  return res;
}

std::vector<std::filesystem::path> write_study(const std::filesystem::path& dir, const KnownStudyResult& r) {
  std::filesystem::create_directories(dir);
  const std::vector<std::filesystem::path> out{dir / "fdp.csv", dir / "rates.csv", dir / "summary.json"};
  write_csv(out[0], r.fdp);
  write_csv(out[1], r.rates);
  write_json(out[2], r.summary);
  return out;
}

std::vector<std::filesystem::path> write_study(const std::filesystem::path& dir, const UnknownStudyResult& r) {
  std::filesystem::create_directories(dir);
  const std::vector<std::filesystem::path> out{dir / "rates.csv", dir / "subjects.csv", dir / "summary.json"};
  write_csv(out[0], r.rates);
  write_csv(out[1], r.subjects);
  write_json(out[2], r.summary);
  return out;
}

}  // namespace hrshift
