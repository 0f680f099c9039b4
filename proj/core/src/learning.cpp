#include "hrshift/learning.hpp"

#include <map>

#include "hrshift/error.hpp"

namespace hrshift {

std::optional<std::size_t> learning_criterion(const TrialSequence& s, const LearningRule& rule) {
  if (s.target.size() != s.positive.size()) throw ArgumentError("target and feedback sequences differ in length");
  if (rule.window == 0) throw ArgumentError("learning window must be positive");
  const std::size_t n = s.positive.size();
  std::size_t prior = 0;  // positives strictly before the window start
  for (std::size_t i = 0; i + rule.window <= n; ++i) {
    bool all = true;
    std::size_t targets = 0;
    for (std::size_t j = i; j < i + rule.window; ++j) {
      if (!s.positive[j]) {
        all = false;
        break;
      }
      if (s.target[j]) ++targets;
    }
    if (all && targets >= rule.min_target && prior >= rule.min_prior_positive) return i + 1;
    if (s.positive[i]) ++prior;
  }
  return std::nullopt;
}

LearningCurve backward_learning_curve(const std::vector<TrialSequence>& subjects, std::size_t block_size,
                                      const LearningRule& rule) {
  if (block_size == 0) throw ArgumentError("block size must be positive");
  std::map<long, std::pair<double, std::size_t>> acc;
  LearningCurve out;
  for (const auto& s : subjects) {
    const auto crit = learning_criterion(s, rule);
    if (!crit) continue;
    ++out.learners;
    const auto anchor = static_cast<long>((*crit - 1) / block_size);
    const std::size_t n = s.positive.size();
    for (std::size_t start = 0; start < n; start += block_size) {
      const std::size_t end = std::min(n, start + block_size);
      double pos = 0;
      for (std::size_t j = start; j < end; ++j) pos += s.positive[j] ? 1.0 : 0.0;
      auto& slot = acc[static_cast<long>(start / block_size) - anchor];
      slot.first += pos / static_cast<double>(end - start);
      ++slot.second;
    }
  }
  for (const auto& [b, v] : acc) {
    out.block.push_back(b);
    out.accuracy.push_back(v.first / static_cast<double>(v.second));
    out.subjects.push_back(v.second);
  }
  return out;
}

}  // namespace hrshift
