#include <benchmark/benchmark.h>

#include "hrshift/config.hpp"
#include "hrshift/group_test.hpp"
#include "hrshift/posi.hpp"
#include "hrshift/simulate.hpp"
#include "hrshift/subject_fit.hpp"

using namespace hrshift;

namespace {

SimulatedSubject known_subject() {
  const StudyConfig c = default_config(Scenario::known_cp);
  return simulate_known_cp(c, c.make_basis(), 2.0, {0.0, 2.0}, false, 1, 0);
}

void BM_SegmentedGlsFit(benchmark::State& state) {
  const StudyConfig c = default_config(Scenario::known_cp);
  const BasisSet basis = c.make_basis();
  const SimulatedSubject s = known_subject();
  const DesignMatrix d = build_design(s.onsets, basis, s.truth, {}, ModelKind::segmented, {c.tr, true, true});
  for (auto _ : state) benchmark::DoNotOptimize(fit_gls(s.y, d, EstimateNoise{1}));
}
BENCHMARK(BM_SegmentedGlsFit)->Unit(benchmark::kMillisecond);

void BM_McShapeVariance(benchmark::State& state) {
  const StudyConfig c = default_config(Scenario::known_cp);
  const BasisSet basis = c.make_basis();
  const SimulatedSubject s = known_subject();
  const DesignMatrix d = build_design(s.onsets, basis, s.truth, {}, ModelKind::segmented, {c.tr, true, true});
  const SubjectGLMFit fit = fit_gls(s.y, d, EstimateNoise{1});
  Rng rng(5);
  for (auto _ : state)
    benchmark::DoNotOptimize(mc_shape_variance(fit, basis, "c1", 0, static_cast<std::size_t>(state.range(0)), rng));
}
BENCHMARK(BM_McShapeVariance)->Arg(1000)->Unit(benchmark::kMillisecond);

struct PosiFixture {
  PosiFixture() {
    StudyConfig c = default_config(Scenario::unknown_cp);
    basis = c.make_basis();
    const auto design = unknown_cp_design(c, 1);
    const SimulatedSubject s = simulate_unknown_cp(c, basis, design, 0.5, 2, 0);
    const AnalysisContext ctx{s.onsets, basis, Eigen::MatrixXd(), DesignOptions{c.tr, true, true}, s.noise};
    models = std::make_unique<CandidateModels>(s.candidates, ctx);
    const std::size_t sel = select_model(s.y, *models).selected;
    problem = std::make_unique<PosiProblem>(make_posi_problem(s.y, *models, sel, FocusSpec{"c1", 1}, true));
  }
  BasisSet basis;
  std::unique_ptr<CandidateModels> models;
  std::unique_ptr<PosiProblem> problem;
};

void BM_ConditionalSampler(benchmark::State& state) {
  static const PosiFixture f;
  Rng rng(9);
  for (auto _ : state)
    benchmark::DoNotOptimize(conditional_sampler(*f.problem, f.problem->theta_ols,
                                                 static_cast<std::size_t>(state.range(0)), rng));
}
BENCHMARK(BM_ConditionalSampler)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_RunPosi(benchmark::State& state) {
  static const PosiFixture f;
  PosiRunOptions o;
  o.D = 200;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_posi(*f.problem, o, ++seed));
}
BENCHMARK(BM_RunPosi)->Unit(benchmark::kMillisecond);

void BM_RemlKnappHartung(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  GroupSample g{Eigen::VectorXd::LinSpaced(n, -1.0, 2.0), Eigen::VectorXd::LinSpaced(n, 0.1, 0.5)};
  for (auto _ : state) benchmark::DoNotOptimize(group_test(g, StatisticKind::knapp_hartung));
}
BENCHMARK(BM_RemlKnappHartung)->Arg(30)->Arg(500);

}  // namespace
BENCHMARK_MAIN();
