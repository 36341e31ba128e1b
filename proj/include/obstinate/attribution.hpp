#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obstinate/model.hpp"
#include "obstinate/text.hpp"

namespace obstinate {

struct ImportanceVector {
  Eigen::VectorXd per_word;      // one signed score per input row
  std::vector<Index> ranking;    // attackable rows, descending score
  int steps_used = 0;
  std::string target_scalar;
};

/// Midpoint-rule integrated gradients of a scalar function along the straight
/// path from `baseline` to `input`. `gradient(point)` must return dF/dpoint with
/// the shape of `input`. Returns the per-coordinate attributions.
template <typename Scalar, typename GradientFn>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> integrated_gradients(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& input,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& baseline, int steps,
    GradientFn&& gradient) {
  if (steps < 1) throw Error(Errc::InvalidConfig, "integrated gradients needs steps >= 1");
  if (input.rows() != baseline.rows() || input.cols() != baseline.cols())
    throw Error(Errc::ShapeMismatch, "input and baseline differ in shape");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> delta = input - baseline;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> total =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(input.rows(), input.cols());
  for (int k = 1; k <= steps; ++k) {
    const Scalar alpha = (Scalar(k) - Scalar(0.5)) / Scalar(steps);
    total += gradient(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(baseline + alpha * delta));
  }
  return delta.cwiseProduct(total) / Scalar(steps);
}

/// Orders `rows` by descending score, ties to the lower row.
std::vector<Index> rank_rows(const Eigen::VectorXd& per_word, const std::vector<Index>& rows);

/// Word importance against the original predicted-class logit, REF baseline.
ImportanceVector integrated_gradients(const Checkpoint& ckpt, const Vocabulary& vocab,
                                      const EncodedInput& input, int steps = 50);

/// First k entries of the ranking.
std::vector<Index> select_targets(const ImportanceVector& iv, int k);

}  // namespace obstinate
