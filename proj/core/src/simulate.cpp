#include "hrshift/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hrshift/error.hpp"

namespace hrshift {
namespace {

std::string condition_name(std::size_t k) { return "c" + std::to_string(k + 1); }

Eigen::VectorXd draw_noise(const NoiseSpec& noise, Eigen::Index T, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd g(T);
  for (Eigen::Index t = 0; t < T; ++t) g[t] = normal(rng);
  return Whitener(noise, T).unapply(std::sqrt(noise.sigma2) * g);
}

NoiseSpec generating_noise(const StudyConfig& c, double clean_mean, double snr) {
  if (!(clean_mean > 0)) throw DataError("mean clean signal must be positive to set the noise level");
  const double s2 = clean_mean / snr;
  return c.noise == "ar1" ? NoiseSpec::ar1(c.rho, s2, true) : NoiseSpec::white(s2, true);
}

}  // namespace

std::vector<OnsetSeries> random_onsets(std::size_t scans, std::size_t conditions, std::size_t stimuli,
                                       const std::vector<int>& iti, Rng& rng) {
  const std::size_t n = conditions * stimuli;
  if (n == 0 || iti.empty()) throw ArgumentError("onset generation needs stimuli and an iti set");
  const int min_gap = *std::min_element(iti.begin(), iti.end());
  if ((n - 1) * static_cast<std::size_t>(min_gap) + 1 > scans)
    throw DataError("infeasible design: onsets do not fit in the scan window");
  std::uniform_int_distribution<std::size_t> pick(0, iti.size() - 1);
  std::vector<std::size_t> gaps(n - 1);
  std::size_t span = 0;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100000) throw DataError("infeasible design: could not place onsets with the iti constraint");
    span = 0;
    for (auto& g : gaps) span += g = static_cast<std::size_t>(iti[pick(rng)]);
    if (span + 1 <= scans) break;
  }
  std::uniform_int_distribution<std::size_t> start_dist(1, scans - span);
  std::vector<std::size_t> onset(n);
  onset[0] = start_dist(rng);
  for (std::size_t i = 1; i < n; ++i) onset[i] = onset[i - 1] + gaps[i - 1];

  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i % conditions;
  std::shuffle(label.begin(), label.end(), rng);
  std::vector<std::vector<std::size_t>> per(conditions);
  for (std::size_t i = 0; i < n; ++i) per[label[i]].push_back(onset[i]);
  std::vector<OnsetSeries> out;
  for (std::size_t k = 0; k < conditions; ++k) out.push_back(OnsetSeries::from_onsets(condition_name(k), scans, per[k]));
  return out;
}

SimulatedSubject simulate_known_cp(const StudyConfig& c, const BasisSet& basis, double snr,
                                   const std::vector<double>& effect_means, bool misspecified, std::uint64_t seed,
                                   std::size_t subject) {
  if (effect_means.size() != c.conditions) throw ArgumentError("need one effect mean per condition");
  if (static_cast<Eigen::Index>(c.beta_before.size()) != basis.count())
    throw ConfigError("beta_before needs one weight per basis function");
  Rng rng = make_rng(seed, {stream_id("known-cp"), subject});
  SimulatedSubject s;
  s.id = "sub-" + std::to_string(subject + 1);
  s.onsets = random_onsets(c.scans, c.conditions, c.stimuli, c.iti, rng);

  const std::size_t m = c.min_segment_onsets;
  const std::size_t C = c.change_points;
  std::normal_distribution<double> normal;
  for (std::size_t k = 0; k < c.conditions; ++k) {
    const auto o = s.onsets[k].onsets();
    // Ordinals (0-based) with at least m onsets in every segment.
    std::vector<std::size_t> ord;
    std::size_t lo = m;
    for (std::size_t j = 0; j < C; ++j) {
      const std::size_t hi = o.size() - (C - j) * m;
      if (lo > hi) throw DataError("infeasible design: too few onsets for the segment constraint");
      ord.push_back(std::uniform_int_distribution<std::size_t>(lo, hi)(rng));
      lo = ord.back() + m;
    }
    for (auto j : ord) s.truth.points[condition_name(k)].push_back(o[j]);
    s.effects.push_back(effect_means[k] + std::sqrt(c.effect_variance) * normal(rng));
  }

  // Reported change points come from a separate stream so the data are
  // identical between correct and misspecified analyses.
  s.reported = s.truth;
  if (misspecified) {
    Rng mrng = make_rng(seed, {stream_id("misspecify"), subject});
    std::uniform_real_distribution<double> off(-c.misspecification_bound, c.misspecification_bound);
    for (std::size_t k = 0; k < c.conditions; ++k) {
      const auto o = s.onsets[k].onsets();
      auto& pts = s.reported.points[condition_name(k)];
      for (auto& p : pts) {
        const auto j = static_cast<long>(std::find(o.begin(), o.end(), p) - o.begin());
        const long shifted = std::clamp(j + std::lround(off(mrng)), 1L, static_cast<long>(o.size()) - 1);
        p = o[static_cast<std::size_t>(shifted)];
      }
      std::sort(pts.begin(), pts.end());
      pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    }
  }

  DesignOptions opt{c.tr, false, false};
  const DesignMatrix d = build_design(s.onsets, basis, s.truth, Eigen::MatrixXd(), ModelKind::segmented, opt);
  Eigen::VectorXd beta(d.X.cols());
  for (std::size_t j = 0; j < d.columns.size(); ++j) {
    const auto& tag = d.columns[j];
    const std::size_t k = static_cast<std::size_t>(std::stoul(tag.condition.substr(1))) - 1;
    const double w = c.beta_before[static_cast<std::size_t>(tag.basis)];
    // After a change every coefficient scales by (b1 + e) / b1.
    const double scale = tag.segment == 0 ? 1.0 : (c.beta_before[0] + s.effects[k]) / c.beta_before[0];
    beta[static_cast<Eigen::Index>(j)] = w * scale;
  }
  const Eigen::VectorXd clean = d.X * beta;
  s.clean_mean = clean.mean();
  s.noise = generating_noise(c, s.clean_mean, snr);
  Rng nrng = make_rng(seed, {stream_id("noise"), subject});
  s.y = clean + draw_noise(s.noise, clean.size(), nrng);
  return s;
}

std::vector<OnsetSeries> unknown_cp_design(const StudyConfig& c, std::uint64_t seed) {
  Rng rng = make_rng(seed, {stream_id("design")});
  return random_onsets(c.scans, c.conditions, c.stimuli, c.iti, rng);
}

SimulatedSubject simulate_unknown_cp(const StudyConfig& c, const BasisSet& basis, const std::vector<OnsetSeries>& onsets,
                                     double eta, std::uint64_t seed, std::size_t subject) {
  if (onsets.size() != 1) throw ArgumentError("unknown-cp simulation uses a single condition");
  if (basis.count() != 1) throw ArgumentError("unknown-cp simulation needs a single basis function");
  Rng rng = make_rng(seed, {stream_id("unknown-cp"), subject});
  SimulatedSubject s;
  s.id = "sub-" + std::to_string(subject + 1);
  s.onsets = onsets;
  const std::string cond = onsets[0].condition();
  const auto o = onsets[0].onsets();
  if (o.size() < 2 * c.margin + 1) throw DataError("infeasible candidate constraints: too few onsets");
  const std::size_t lo = c.margin, hi = o.size() - c.margin - 1;
  const std::size_t avail = hi - lo + 1;
  if (c.candidates > 1 && (c.candidates - 1) * c.spacing + 1 > avail)
    throw DataError("infeasible candidate constraints: spacing leaves no room");

  std::uniform_int_distribution<std::size_t> pick(lo, hi);
  const std::size_t truth = pick(rng);
  std::vector<std::size_t> chosen{truth};
  for (int attempt = 0; chosen.size() < c.candidates; ++attempt) {
    if (attempt == 100000) throw DataError("infeasible candidate constraints: could not place decoys");
    const std::size_t j = pick(rng);
    bool ok = true;
    for (auto q : chosen) ok = ok && (j > q ? j - q : q - j) >= c.spacing;
    if (ok) chosen.push_back(j);
  }
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    ChangePointSet cps;
    cps.points[cond] = {o[chosen[i]]};
    s.candidates.configurations.push_back(cps);
    if (chosen[i] == truth) s.true_candidate = i;
  }
  s.truth.points[cond] = {o[truth]};
  s.reported = s.truth;

  std::normal_distribution<double> normal;
  s.effects = {eta + std::sqrt(c.effect_variance) * normal(rng)};
  s.baseline = c.baseline_mean + std::sqrt(c.baseline_variance) * normal(rng);
  DesignOptions opt{c.tr, false, false};
  const DesignMatrix d = build_design(onsets, basis, s.truth, Eigen::MatrixXd(), ModelKind::cumulative, opt);
  const Eigen::VectorXd clean = s.baseline + (c.beta_before[0] * d.X.col(0) + s.effects[0] * d.X.col(1)).array();
  s.clean_mean = clean.mean();
  s.noise = generating_noise(c, s.clean_mean, c.snr.front());
  Rng nrng = make_rng(seed, {stream_id("noise"), subject});
  s.y = clean + draw_noise(s.noise, clean.size(), nrng);
  return s;
}

}  // namespace hrshift
