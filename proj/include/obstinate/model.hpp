#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "obstinate/error.hpp"
#include "obstinate/text.hpp"

namespace obstinate {

/// Embedding + one hidden tanh layer over mean-pooled segments.
///
/// The pooled feature is always 2*d wide: [mean(first), mean(second)], with a
/// single-segment input duplicating its mean. Hence `hidden_weights` is 2d x h.
template <typename Scalar>
struct BasicCheckpoint {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static constexpr std::uint32_t kFormatVersion = 1;

  Matrix embedding;       // n_words x d
  Matrix hidden_weights;  // 2d x h
  Vector hidden_bias;     // h
  Matrix out_weights;     // h x c
  Vector out_bias;        // c
  std::vector<std::string> label_names;
  std::uint64_t vocab_fingerprint = 0;
  std::uint32_t format_version = kFormatVersion;

  Index n_words() const noexcept { return embedding.rows(); }
  Index dim() const noexcept { return embedding.cols(); }
  Index hidden() const noexcept { return hidden_bias.size(); }
  Index classes() const noexcept { return out_bias.size(); }
};

/// Bit-exact equality of every field.
bool identical(const BasicCheckpoint<double>& a, const BasicCheckpoint<double>& b);

using Checkpoint = BasicCheckpoint<double>;

template <typename Scalar>
struct ForwardResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> probabilities;
  int predicted_label = 0;
};

/// Scalar differentiated by `input_gradient`.
struct LossVsReference {
  Eigen::VectorXd reference_probs;
};
struct LogitOf {
  int label = 0;
};
using GradientTarget = std::variant<LossVsReference, LogitOf>;

/// Intermediate values of the classifier head, kept for the backward pass.
template <typename Scalar>
struct HeadActivations {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pooled;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hidden;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits;
};

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

/// Lowest index among maximal entries.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& v) {
  Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

inline void check_segments(const SegmentBounds& segments, Index rows) {
  if (segments.empty() || segments.size() > 2)
    throw Error(Errc::ShapeMismatch, "expected one or two segments");
  for (const auto& s : segments) {
    if (s.begin < 0 || s.end > rows || s.length() <= 0)
      throw Error(Errc::ShapeMismatch, "segment outside the input rows");
  }
}

/// Mean of each segment's body rows, concatenated to width 2d.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> pool_segments(
    const Eigen::MatrixBase<Derived>& row_embeddings, const SegmentBounds& segments) {
  using Scalar = typename Derived::Scalar;
  const Index d = row_embeddings.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pooled(2 * d);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& seg = segments[std::min(s, segments.size() - 1)];
    pooled.segment(static_cast<Index>(s) * d, d) =
        row_embeddings.middleRows(seg.begin, seg.length()).colwise().mean().transpose();
  }
  return pooled;
}

template <typename Scalar, typename Derived>
HeadActivations<Scalar> head_forward(const BasicCheckpoint<Scalar>& ckpt,
                                     const Eigen::MatrixBase<Derived>& row_embeddings,
                                     const SegmentBounds& segments) {
  check_segments(segments, row_embeddings.rows());
  HeadActivations<Scalar> act;
  act.pooled = pool_segments(row_embeddings, segments);
  act.hidden =
      (ckpt.hidden_weights.transpose() * act.pooled + ckpt.hidden_bias).array().tanh().matrix();
  act.logits = ckpt.out_weights.transpose() * act.hidden + ckpt.out_bias;
  return act;
}

/// Gradient with respect to each row embedding (n x d) given d(scalar)/d(logits).
/// Rows outside every segment receive zero.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> head_backward(
    const BasicCheckpoint<Scalar>& ckpt, const HeadActivations<Scalar>& act,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& dlogits, const SegmentBounds& segments,
    Index rows) {
  const Index d = ckpt.dim();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dhidden = ckpt.out_weights * dlogits;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dpre =
      dhidden.array() * (Scalar(1) - act.hidden.array().square());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dpooled = ckpt.hidden_weights * dpre;

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> drows =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(rows, d);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& seg = segments[std::min(s, segments.size() - 1)];
    const auto share = dpooled.segment(static_cast<Index>(s) * d, d).transpose() /
                       static_cast<Scalar>(seg.length());
    drows.middleRows(seg.begin, seg.length()).rowwise() += share;
  }
  return drows;
}

template <typename Scalar>
ForwardResult<Scalar> make_result(Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits) {
  ForwardResult<Scalar> r;
  r.probabilities = softmax(logits);
  r.predicted_label = argmax(logits);
  r.logits = std::move(logits);
  return r;
}

/// Classifier on a real-valued n x n_words input; one-hot rows are the special case.
template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const BasicCheckpoint<Scalar>& ckpt,
                              const Eigen::MatrixBase<Derived>& input,
                              const SegmentBounds& segments) {
  if (input.cols() != ckpt.n_words())
    throw Error(Errc::ShapeMismatch, "input columns != n_words");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rows = input * ckpt.embedding;
  return make_result<Scalar>(head_forward(ckpt, rows, segments).logits);
}

/// Forward on a discrete token sequence via table lookup.
template <typename Scalar>
ForwardResult<Scalar> forward_ids(const BasicCheckpoint<Scalar>& ckpt,
                                  const std::vector<TokenId>& ids,
                                  const SegmentBounds& segments) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rows(static_cast<Index>(ids.size()),
                                                             ckpt.dim());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= ckpt.n_words()) throw Error(Errc::IdOutOfRange, "token id");
    rows.row(static_cast<Index>(r)) = ckpt.embedding.row(ids[r]);
  }
  return make_result<Scalar>(head_forward(ckpt, rows, segments).logits);
}

inline ForwardResult<double> forward(const Checkpoint& ckpt, const EncodedInput& e) {
  return forward_ids(ckpt, e.ids, e.segments);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dlogits_for(const GradientTarget& target,
                                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& logits) {
  if (const auto* loss = std::get_if<LossVsReference>(&target)) {
    if (loss->reference_probs.size() != logits.size())
      throw Error(Errc::ShapeMismatch, "reference probabilities size != classes");
    return softmax(logits) - loss->reference_probs.template cast<Scalar>();
  }
  const auto label = std::get<LogitOf>(target).label;
  if (label < 0 || label >= logits.size()) throw Error(Errc::LabelOutOfRange, "logit index");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(logits.size());
  g(label) = Scalar(1);
  return g;
}

/// Value of the target scalar: soft cross-entropy H(ref, softmax(logits)) or a raw logit.
template <typename Scalar>
Scalar target_value(const GradientTarget& target, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& logits) {
  if (const auto* loss = std::get_if<LossVsReference>(&target)) {
    const Scalar m = logits.maxCoeff();
    const Scalar lse = m + std::log((logits.array() - m).exp().sum());
    return -(loss->reference_probs.template cast<Scalar>().array() * (logits.array() - lse)).sum();
  }
  return logits(std::get<LogitOf>(target).label);
}

/// Exact d(target)/d(input), an n x n_words matrix.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> input_gradient(
    const BasicCheckpoint<Scalar>& ckpt, const Eigen::MatrixBase<Derived>& input,
    const SegmentBounds& segments, const GradientTarget& target) {
  if (input.cols() != ckpt.n_words())
    throw Error(Errc::ShapeMismatch, "input columns != n_words");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rows = input * ckpt.embedding;
  auto act = head_forward(ckpt, rows, segments);
  auto drows = head_backward(ckpt, act, dlogits_for<Scalar>(target, act.logits), segments,
                             input.rows());
  return drows * ckpt.embedding.transpose();
}

/// Mean embedding over a token sequence; zero for an empty one.
Eigen::VectorXd mean_embedding(const Checkpoint& ckpt, const std::vector<TokenId>& ids);

struct TrainOptions {
  Index dim = 32;
  Index hidden = 64;
  int epochs = 30;
  double learning_rate = 0.1;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int classes = 0;  // 0: one more than the largest label, at least 2
  Slot slot = Slot::First;
};

struct TrainResult {
  Checkpoint checkpoint;
  double train_accuracy = 0.0;
};

/// Mini-batch SGD on softmax cross-entropy. The REF row stays zero throughout.
TrainResult train(const std::vector<Example>& corpus, const Vocabulary& vocab,
                  const TrainOptions& options);

double accuracy(const Checkpoint& ckpt, const Vocabulary& vocab,
                const std::vector<Example>& corpus);

/// "OBF1" container; see the README for the byte layout.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
/// Also checks the fingerprint against `vocab`.
Checkpoint load_checkpoint(const std::string& path, const Vocabulary& vocab);

/// FNV-1a of the serialized bytes; printed by the CLI as a checkpoint hash.
std::uint64_t checkpoint_hash(const Checkpoint& ckpt);

}  // namespace obstinate
