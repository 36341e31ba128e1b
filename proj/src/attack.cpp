#include "obstinate/attack.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>

namespace obstinate {

void AttackConfig::validate() const {
  if (!(eta > 0)) throw Error(Errc::InvalidConfig, "eta must be > 0");
  if (max_steps < 1) throw Error(Errc::InvalidConfig, "max_steps must be >= 1");
  if (restarts < 1) throw Error(Errc::InvalidConfig, "restarts must be >= 1");
  if (!(clip_lo < clip_hi)) throw Error(Errc::InvalidConfig, "clip_lo must be < clip_hi");
  if (!(init_scale >= 0)) throw Error(Errc::InvalidConfig, "init_scale must be >= 0");
}

Eigen::MatrixXd NoiseState::dense(Index n) const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, z.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) full.row(rows[i]) = z.row(static_cast<Index>(i));
  return full;
}

void clamp_noise(NoiseState& noise, double lo, double hi) {
  noise.z = noise.z.cwiseMax(lo).cwiseMin(hi);
}

void sign_step(NoiseState& noise, const Eigen::MatrixXd& grad, double eta) {
  if (grad.rows() != noise.z.rows() || grad.cols() != noise.z.cols())
    throw Error(Errc::ShapeMismatch, "gradient shape != noise shape");
  noise.z -= eta * grad.array().sign().matrix();
}

std::vector<Index> slot_positions(const EncodedInput& input, const std::vector<Index>& rows) {
  const auto& seg = input.target_segment();
  std::vector<Index> out;
  for (auto r : rows) out.push_back(r - seg.begin);
  return out;
}

EncodedInput with_target_slot(const Vocabulary& vocab, const EncodedInput& input,
                              const std::vector<TokenId>& slot_ids) {
  auto slice = [&input](const Segment& s) {
    return std::vector<TokenId>(input.ids.begin() + s.begin, input.ids.begin() + s.end);
  };
  const bool paired = input.segments.size() > 1;
  // Round-trip through text so the candidate is exactly what a user would feed back in.
  auto retokenize = [&vocab](const std::vector<TokenId>& ids) {
    std::vector<TokenId> out;
    for (const auto& t : tokenize(decode(vocab, ids))) out.push_back(vocab.id_of(t));
    return out;
  };
  std::vector<TokenId> first = slice(input.segments[0]);
  std::vector<TokenId> second = paired ? slice(input.segments[1]) : std::vector<TokenId>{};
  if (input.target_slot == Slot::Second && paired) second = retokenize(slot_ids);
  else first = retokenize(slot_ids);
  return encode_ids(vocab, std::move(first), std::move(second), paired, input.target_slot);
}

namespace {

void check_targets(const EncodedInput& input, const std::vector<Index>& targets) {
  if (targets.empty()) throw Error(Errc::InvalidTargets, "no targets");
  std::set<Index> seen;
  for (auto t : targets) {
    if (!seen.insert(t).second) throw Error(Errc::InvalidTargets, "duplicate target row");
    if (std::find(input.attackable.begin(), input.attackable.end(), t) == input.attackable.end())
      throw Error(Errc::InvalidTargets, "row " + std::to_string(t) + " is not attackable");
  }
}

}  // namespace

AttackOutcome attack_once(const Checkpoint& ckpt, const Vocabulary& vocab, const EncodedInput& input,
                          const std::vector<Index>& targets, const AttackConfig& cfg,
                          std::uint64_t restart_seed) {
  cfg.validate();
  check_targets(input, targets);
  if (input.onehot.cols() != ckpt.n_words()) throw Error(Errc::ShapeMismatch, "vocabulary size");

  const auto original = forward(ckpt, input);
  const int label = original.predicted_label;
  const GradientTarget loss_target = LossVsReference{original.probabilities};
  const Index t = static_cast<Index>(targets.size());
  const Index V = ckpt.n_words();

  Eigen::MatrixXd base_rows(input.rows(), ckpt.dim());
  for (Index r = 0; r < input.rows(); ++r)
    base_rows.row(r) = ckpt.embedding.row(input.ids[std::size_t(r)]);

  std::vector<TokenId> original_ids;
  for (auto r : targets) original_ids.push_back(input.ids[std::size_t(r)]);

  NoiseState noise;
  noise.rows = targets;
  noise.z.resize(t, V);
  std::mt19937_64 rng(restart_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < t; ++i)
    for (Index v = 0; v < V; ++v) noise.z(i, v) = cfg.init_scale * normal(rng);

  // Row embeddings of (onehot + z) on the target rows.
  auto perturbed_rows = [&](const Eigen::MatrixXd& z) {
    Eigen::MatrixXd rows = base_rows;
    Eigen::MatrixXd shift = z * ckpt.embedding;
    for (Index i = 0; i < t; ++i) rows.row(targets[std::size_t(i)]) += shift.row(i);
    return rows;
  };
  auto noisy_argmax = [&](const Eigen::MatrixXd& z) {
    std::vector<TokenId> ids(static_cast<std::size_t>(t));
    for (Index i = 0; i < t; ++i) {
      Eigen::RowVectorXd row = z.row(i);
      row(original_ids[std::size_t(i)]) += 1.0;
      // Reserved ids never appear in a candidate sentence.
      row.head(Vocabulary::kRef + 1).setConstant(-std::numeric_limits<double>::infinity());
      Index best = 0;
      row.maxCoeff(&best);
      ids[std::size_t(i)] = static_cast<TokenId>(best);
    }
    return ids;
  };

  AttackOutcome out;
  out.target_rows = targets;
  out.original_ids = original_ids;
  for (int step = 0; step < cfg.max_steps; ++step) {
    clamp_noise(noise, cfg.clip_lo, cfg.clip_hi);
    const auto rows = perturbed_rows(noise.z);
    const auto act = head_forward(ckpt, rows, input.segments);
    out.final_loss = target_value(loss_target, act.logits);
    if (cfg.trace) out.loss_trace.push_back(out.final_loss);

    const auto drows =
        head_backward(ckpt, act, dlogits_for<double>(loss_target, act.logits), input.segments,
                      input.rows());
    Eigen::MatrixXd grad(t, V);
    for (Index i = 0; i < t; ++i)
      grad.row(i) = ckpt.embedding * drows.row(targets[std::size_t(i)]).transpose();
    sign_step(noise, grad, cfg.eta);
    clamp_noise(noise, cfg.clip_lo, cfg.clip_hi);
    noise.step = step + 1;

    const auto check = head_forward(ckpt, perturbed_rows(noise.z), input.segments);
    const auto ids = noisy_argmax(noise.z);
    bool all_moved = true;
    for (Index i = 0; i < t; ++i) all_moved &= ids[std::size_t(i)] != original_ids[std::size_t(i)];
    if (argmax(check.logits) == label && all_moved) {
      noise.converged = true;
      break;
    }
  }

  out.steps_taken = noise.step;
  out.early_exit = noise.converged;
  out.candidate_ids = noisy_argmax(noise.z);

  auto slot_ids = input.target_ids();
  const auto& seg = input.target_segment();
  out.original_sentence = decode(vocab, slot_ids);
  for (Index i = 0; i < t; ++i)
    slot_ids[std::size_t(targets[std::size_t(i)] - seg.begin)] = out.candidate_ids[std::size_t(i)];
  out.candidate_sentence = decode(vocab, slot_ids);

  const auto reencoded = with_target_slot(vocab, input, slot_ids);
  const auto re_ids = reencoded.target_ids(), in_ids = input.target_ids();
  out.changed = re_ids.size() == in_ids.size() &&
                std::all_of(targets.begin(), targets.end(), [&](Index r) {
                  const auto p = std::size_t(r - seg.begin);
                  return re_ids[p] != in_ids[p];
                });
  out.agreed = forward(ckpt, reencoded).predicted_label == label;
  return out;
}

RestartSearch run_restarts(int restarts, const std::function<AttackOutcome(int)>& attempt,
                           const CandidateFilter& filter) {
  RestartSearch search;
  for (int r = 0; r < restarts; ++r) {
    RestartRecord rec{attempt(r), std::nullopt, false};
    rec.outcome.restart_index = r;
    if (rec.outcome.agreed && rec.outcome.changed) {
      rec.filter = filter(rec.outcome);
      rec.success = rec.filter->accepted;
    }
    search.records.push_back(std::move(rec));
    if (search.records.back().success) {
      search.accepted = search.records.size() - 1;
      break;
    }
  }
  return search;
}

RestartSearch attack_with_restarts(const Checkpoint& ckpt, const Vocabulary& vocab,
                                   const EncodedInput& input, const std::vector<Index>& targets,
                                   const AttackConfig& cfg, const CandidateFilter& filter) {
  cfg.validate();
  return run_restarts(
      cfg.restarts,
      [&](int r) {
        return attack_once(ckpt, vocab, input, targets, cfg, cfg.seed + static_cast<std::uint64_t>(r));
      },
      filter);
}

std::vector<std::string> antonym_attack(const Vocabulary& vocab, const EncodedInput& input,
                                        const std::vector<Index>& targets, const Lexicon& antonyms) {
  check_targets(input, targets);
  const auto& seg = input.target_segment();
  std::vector<std::string> words;
  for (auto id : input.target_ids()) words.push_back(vocab.token(id));

  // Per target position: the single-token antonyms available there.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> options;
  for (auto row : targets) {
    const auto pos = static_cast<std::size_t>(row - seg.begin);
    const auto* set = antonyms.find(words[pos]);
    if (set == nullptr) continue;
    std::vector<std::string> choices;
    for (const auto& a : *set)
      if (tokenize(a).size() == 1) choices.push_back(a);
    if (!choices.empty()) options.emplace_back(pos, std::move(choices));
  }
  if (options.empty()) return {};

  std::vector<std::string> out;
  std::vector<std::size_t> pick(options.size(), 0);
  while (out.size() < kMaxAntonymCandidates) {
    auto sentence = words;
    for (std::size_t i = 0; i < options.size(); ++i)
      sentence[options[i].first] = options[i].second[pick[i]];
    std::string joined;
    for (const auto& w : sentence) joined += (joined.empty() ? "" : " ") + w;
    out.push_back(std::move(joined));

    // Odometer increment, last target fastest.
    std::size_t i = options.size();
    while (i > 0) {
      --i;
      if (++pick[i] < options[i].second.size()) break;
      pick[i] = 0;
      if (i == 0) return out;
    }
  }
  return out;
}

}  // namespace obstinate
