#include "obstinate/attribution.hpp"

#include <algorithm>
#include <numeric>

namespace obstinate {

std::vector<Index> rank_rows(const Eigen::VectorXd& per_word, const std::vector<Index>& rows) {
  std::vector<Index> ranking = rows;
  std::stable_sort(ranking.begin(), ranking.end(), [&per_word](Index a, Index b) {
    if (per_word(a) != per_word(b)) return per_word(a) > per_word(b);
    return a < b;
  });
  return ranking;
}

ImportanceVector integrated_gradients(const Checkpoint& ckpt, const Vocabulary& vocab,
                                      const EncodedInput& input, int steps) {
  const auto base = baseline_encoding(input, vocab);
  const int predicted = forward(ckpt, input).predicted_label;
  const GradientTarget target = LogitOf{predicted};

  auto attributions = integrated_gradients<double>(
      input.onehot, base.onehot, steps, [&](const Eigen::MatrixXd& point) {
        return input_gradient(ckpt, point, input.segments, target);
      });

  ImportanceVector iv;
  iv.per_word = attributions.rowwise().sum();
  iv.ranking = rank_rows(iv.per_word, input.attackable);
  iv.steps_used = steps;
  iv.target_scalar = "logit[" + std::to_string(predicted) + "]";
  return iv;
}

std::vector<Index> select_targets(const ImportanceVector& iv, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > iv.ranking.size())
    throw Error(Errc::KTooLarge, "k=" + std::to_string(k) + " with " +
                                     std::to_string(iv.ranking.size()) + " attackable words");
  return {iv.ranking.begin(), iv.ranking.begin() + k};
}

}  // namespace obstinate
