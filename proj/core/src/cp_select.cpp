#include "hrshift/cp_select.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "hrshift/error.hpp"
#include "hrshift/subject_fit.hpp"

namespace hrshift {
namespace {

// Increasing index tuples of length c from [0, n) with gaps >= spacing.
void combos(std::size_t n, std::size_t c, std::size_t spacing, std::size_t cap, std::vector<std::size_t>& cur,
            std::vector<std::vector<std::size_t>>& out) {
  if (cur.size() == c) {
    out.push_back(cur);
    if (out.size() > cap) throw DataError("candidate enumeration exceeds the configuration cap; supply an explicit list");
    return;
  }
  const std::size_t start = cur.empty() ? 0 : cur.back() + spacing;
  for (std::size_t j = start; j < n; ++j) {
    cur.push_back(j);
    combos(n, c, spacing, cap, cur, out);
    cur.pop_back();
  }
}

}  // namespace

CandidateSet enumerate_candidates(const std::vector<OnsetSeries>& onsets,
                                  const std::map<std::string, std::size_t>& counts,
                                  const CandidateConstraints& k) {
  if (k.spacing < 1) throw ArgumentError("change point spacing must be at least 1");
  for (const auto& [cond, c] : counts) {
    if (std::none_of(onsets.begin(), onsets.end(), [&](const auto& u) { return u.condition() == cond; }))
      throw ArgumentError("change point count given for unknown condition '" + cond + "'");
  }
  std::vector<CandidateSet> per_condition;
  for (const auto& u : onsets) {
    auto it = counts.find(u.condition());
    const std::size_t c = it == counts.end() ? 0 : it->second;
    const auto o = u.onsets();
    CandidateSet cs;
    if (c == 0) {
      cs.configurations.emplace_back();
    } else if (o.size() > 2 * k.margin) {
      std::vector<std::vector<std::size_t>> idx;
      std::vector<std::size_t> cur;
      combos(o.size() - 2 * k.margin, c, k.spacing, k.max_configurations, cur, idx);
      for (const auto& tuple : idx) {
        ChangePointSet s;
        for (auto j : tuple) s.points[u.condition()].push_back(o[j + k.margin]);
        cs.configurations.push_back(std::move(s));
      }
    }
    if (cs.configurations.empty())
      throw DataError("constraints admit no change point configuration for condition '" + u.condition() + "'");
    per_condition.push_back(std::move(cs));
  }
  CandidateSet out;
  out.configurations.emplace_back();
  for (const auto& cs : per_condition) {
    if (out.size() * cs.size() > k.max_configurations)
      throw DataError("candidate enumeration exceeds the configuration cap; supply an explicit list");
    std::vector<ChangePointSet> next;
    for (const auto& a : out.configurations) {
      for (const auto& b : cs.configurations) {
        ChangePointSet m = a;
        for (const auto& [cond, p] : b.points) m.points[cond] = p;
        next.push_back(std::move(m));
      }
    }
    out.configurations = std::move(next);
  }
  return out;
}

CandidateSet candidate_list(std::vector<ChangePointSet> configurations, const std::vector<OnsetSeries>& onsets) {
  if (configurations.empty()) throw ArgumentError("candidate list is empty");
  std::map<std::string, std::set<std::size_t>> on;
  for (const auto& u : onsets) {
    auto o = u.onsets();
    on[u.condition()].insert(o.begin(), o.end());
  }
  for (std::size_t i = 0; i < configurations.size(); ++i) {
    auto& c = configurations[i];
    for (auto it = c.points.begin(); it != c.points.end();) {
      if (!on.count(it->first)) throw ArgumentError("candidate refers to unknown condition '" + it->first + "'");
      for (std::size_t j = 0; j < it->second.size(); ++j) {
        if (!on[it->first].count(it->second[j])) throw ArgumentError("candidate change point is not an onset");
        if (j > 0 && it->second[j] <= it->second[j - 1])
          throw ArgumentError("candidate change points must be strictly increasing");
      }
      it = it->second.empty() ? c.points.erase(it) : std::next(it);
    }
    for (std::size_t j = 0; j < i; ++j)
      if (configurations[j] == c) throw ArgumentError("duplicate candidate configuration");
  }
  return CandidateSet{std::move(configurations)};
}

CandidateModels::CandidateModels(const CandidateSet& candidates, const AnalysisContext& ctx)
    : candidates_(candidates),
      noise_(ctx.noise),
      whitener_(ctx.noise, ctx.onsets.empty() ? 0 : static_cast<Eigen::Index>(ctx.onsets.front().length())) {
  if (candidates.configurations.empty()) throw ArgumentError("candidate set is empty");
  if (noise_.known && !(noise_.sigma2 > 0)) throw ArgumentError("known noise variance must be positive");
  for (const auto& c : candidates.configurations) {
    designs_.push_back(build_design(ctx.onsets, ctx.basis, c, ctx.confounds, ModelKind::cumulative, ctx.design));
    whitened_.push_back(whitener_.apply_matrix(designs_.back().X));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(whitened_.back());
    q_.push_back(qr.householderQ() * Eigen::MatrixXd::Identity(whitened_.back().rows(), whitened_.back().cols()));
  }
}

double CandidateModels::loglik_whitened(std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& z, double zz) const {
  const double rss = std::max(0.0, zz - (q_.at(i).transpose() * z).squaredNorm());
  return gls_loglik(rss, z.size(), whitener_.log_det(), noise_);
}

std::vector<double> CandidateModels::logliks_whitened(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  const double zz = z.squaredNorm();
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = loglik_whitened(i, z, zz);
  return out;
}

std::vector<double> CandidateModels::logliks(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return logliks_whitened(whitener_.apply(y));
}

double model_loglik(const Eigen::Ref<const Eigen::VectorXd>& y, const ChangePointSet& candidate,
                    const AnalysisContext& context) {
  CandidateModels m(CandidateSet{{candidate}}, context);
  return m.logliks(y).front();
}

SelectionResult select_model(const Eigen::Ref<const Eigen::VectorXd>& y, const CandidateModels& models) {
  SelectionResult r;
  r.logliks = models.logliks(y);
  r.selected = static_cast<std::size_t>(std::max_element(r.logliks.begin(), r.logliks.end()) - r.logliks.begin());
  for (std::size_t i = 0; i < r.logliks.size(); ++i) {
    if (i != r.selected && r.logliks[i] == r.logliks[r.selected]) {
      std::ostringstream msg;
      msg << "exact likelihood tie between candidates " << r.selected << " and " << i
          << " (duplicated or equivalent configurations?)";
      throw DataError(msg.str());
    }
  }
  return r;
}

SelectionResult select_model(const Eigen::Ref<const Eigen::VectorXd>& y, const CandidateSet& candidates,
                             const AnalysisContext& context) {
  return select_model(y, CandidateModels(candidates, context));
}

NoiseSpec reference_noise(const Eigen::Ref<const Eigen::VectorXd>& y, const AnalysisContext& context, int order) {
  const DesignMatrix d =
      build_design(context.onsets, context.basis, ChangePointSet{}, context.confounds, ModelKind::stationary, context.design);
  const SubjectGLMFit ols = fit_gls(y, d, NoiseSpec::white());
  NoiseSpec s = estimate_ar(ols.residuals, order);
  s.known = false;
  return s;
}

}  // namespace hrshift
