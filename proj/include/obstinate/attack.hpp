#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obstinate/filter.hpp"
#include "obstinate/model.hpp"
#include "obstinate/text.hpp"

namespace obstinate {

struct AttackConfig {
  double eta = 0.1;
  int max_steps = 1000;
  int restarts = 10;
  std::uint64_t seed = 0;
  double clip_lo = -1.0;
  double clip_hi = 1.0;
  double init_scale = 1.0;  // std-dev of the Gaussian noise initialisation
  bool trace = false;       // keep the per-step loss

  void validate() const;
};

/// Noise on the target rows only; row i of `z` belongs to input row `rows[i]`.
struct NoiseState {
  Eigen::MatrixXd z;
  std::vector<Index> rows;
  int step = 0;
  bool converged = false;

  /// The full n x n_words noise matrix, zero outside the target rows.
  Eigen::MatrixXd dense(Index n) const;
};

void clamp_noise(NoiseState& noise, double lo, double hi);

/// z <- z - eta * sign(grad), where `grad` has the shape of `noise.z`.
void sign_step(NoiseState& noise, const Eigen::MatrixXd& grad, double eta);

struct AttackOutcome {
  std::string original_sentence;   // target slot, normalised
  std::string candidate_sentence;  // target slot after substitution
  std::vector<Index> target_rows;
  std::vector<TokenId> original_ids;   // per target row
  std::vector<TokenId> candidate_ids;  // per target row
  bool agreed = false;    // clean forward on the re-encoded candidate keeps the label
  bool changed = false;   // every target word was replaced
  bool early_exit = false;
  int steps_taken = 0;
  int restart_index = 0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;
};

/// One seeded run of the sign-gradient noise search on `targets`.
AttackOutcome attack_once(const Checkpoint& ckpt, const Vocabulary& vocab, const EncodedInput& input,
                          const std::vector<Index>& targets, const AttackConfig& cfg,
                          std::uint64_t restart_seed);

/// Rebuilds the full input with the target slot replaced by `slot_ids`.
EncodedInput with_target_slot(const Vocabulary& vocab, const EncodedInput& input,
                              const std::vector<TokenId>& slot_ids);

/// Target rows as positions within the target slot body.
std::vector<Index> slot_positions(const EncodedInput& input, const std::vector<Index>& rows);

using CandidateFilter = std::function<FilterDecision(const AttackOutcome&)>;

struct RestartRecord {
  AttackOutcome outcome;
  std::optional<FilterDecision> filter;  // only for agreed, changed candidates
  bool success = false;
};

struct RestartSearch {
  std::optional<std::size_t> accepted;
  std::vector<RestartRecord> records;

  const AttackOutcome* accepted_outcome() const {
    return accepted ? &records[*accepted].outcome : nullptr;
  }
};

/// Runs attempts 0..restarts-1 in order and stops at the first one that agreed,
/// changed the sentence and passed `filter`.
RestartSearch run_restarts(int restarts, const std::function<AttackOutcome(int)>& attempt,
                           const CandidateFilter& filter);

/// Restart r uses seed cfg.seed + r.
RestartSearch attack_with_restarts(const Checkpoint& ckpt, const Vocabulary& vocab,
                                   const EncodedInput& input, const std::vector<Index>& targets,
                                   const AttackConfig& cfg, const CandidateFilter& filter);

/// Candidates swapping target words for lexicon antonyms, at most kMaxAntonymCandidates.
/// Each candidate is the target slot rendered as space-joined tokens.
inline constexpr std::size_t kMaxAntonymCandidates = 32;
std::vector<std::string> antonym_attack(const Vocabulary& vocab, const EncodedInput& input,
                                        const std::vector<Index>& targets, const Lexicon& antonyms);

}  // namespace obstinate
