#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace hrshift {

/// One subject's trial sequence. `target[i]` marks trials whose answer is
/// the target response, `positive[i]` trials that received positive feedback.
struct TrialSequence {
  std::vector<bool> target;
  std::vector<bool> positive;
};

struct LearningRule {
  std::size_t window = 12;
  std::size_t min_target = 3;
  std::size_t min_prior_positive = 9;
};

/// 1-based trial index where learning is first established, if ever.
std::optional<std::size_t> learning_criterion(const TrialSequence& s, const LearningRule& rule = {});

struct LearningCurve {
  std::vector<long> block;       // block offset relative to the learning block
  std::vector<double> accuracy;  // mean fraction of positive feedback
  std::vector<std::size_t> subjects;
  std::size_t learners = 0;
};

/// Backward learning curve: accuracy in blocks of `block_size` trials aligned
/// on each learner's criterion trial and averaged over learners.
LearningCurve backward_learning_curve(const std::vector<TrialSequence>& subjects, std::size_t block_size = 5,
                                      const LearningRule& rule = {});

}  // namespace hrshift
