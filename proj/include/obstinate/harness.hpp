#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "obstinate/attack.hpp"
#include "obstinate/attribution.hpp"
#include "obstinate/filter.hpp"
#include "obstinate/model.hpp"
#include "obstinate/text.hpp"

namespace obstinate {

struct EvalConfig {
  AttackConfig attack;
  int k_words = 1;
  int ig_steps = 50;
  std::size_t limit = 200;
  Slot target_slot = Slot::First;
  int workers = 1;
  std::string provenance = "desk";
};

struct RestartSummary {
  int restart = 0;
  std::string candidate;
  bool agreed = false;
  bool changed = false;
  bool early_exit = false;
  int steps = 0;
  double final_loss = 0.0;
  /// not_agreed | unchanged | synonym_set | oracle_similar | accepted
  std::string filter_reason;
  std::optional<double> oracle_score;
  bool success = false;
  std::vector<double> loss_trace;
};

struct SampleResult {
  std::size_t sample_id = 0;
  std::string original;
  int original_prediction = 0;
  std::vector<Index> target_indices;  // input rows, most important first
  std::vector<std::string> target_words;
  std::vector<RestartSummary> restarts;
  std::optional<std::string> accepted_candidate;
  std::vector<std::string> substituted_words;  // aligned with target_words when accepted
  int success_indicator = 0;
  bool skipped = false;  // fewer attackable words than k
  std::string error;
  // Antonym baseline, filled by compare_baseline.
  int antonym_candidates = 0;
  int antonym_success = 0;
};

struct KRate {
  int k = 0;
  std::size_t n_evaluated = 0;
  std::size_t n_skipped = 0;
  std::size_t n_success = 0;
  double success_rate = 0.0;
};

struct SubstitutionCount {
  std::string original;
  std::string substitution;
  long count = 0;
};

struct SuccessReport {
  int k_words = 0;
  std::string provenance;
  std::size_t n_samples = 0;  // evaluated, excluding skipped
  std::size_t n_skipped = 0;
  std::size_t n_success = 0;
  double success_rate = 0.0;
  std::vector<KRate> per_k;
  std::vector<SubstitutionCount> substitution_frequency;
  std::uint64_t total_steps = 0;
  std::uint64_t total_restarts = 0;
  std::vector<SampleResult> samples;
};

using SampleEvaluator = std::function<SampleResult(std::size_t index)>;

/// Runs `evaluate` over indices [0, count) on `workers` threads and reduces the
/// results in index order.
std::vector<SampleResult> evaluate_all(std::size_t count, int workers,
                                       const SampleEvaluator& evaluate);

/// acc = sum_i I(sum_j I(success_ij) > 0) / n over the non-skipped samples.
SuccessReport aggregate(std::vector<SampleResult> samples, int k_words, std::string provenance);

/// IG targets, restarts, filtering. When `antonyms` is given the antonym
/// baseline runs on the same targets.
SampleResult evaluate_sample(const Checkpoint& ckpt, const Vocabulary& vocab, const Example& ex,
                             std::size_t sample_id, const EvalConfig& cfg, const Lexicon& synonyms,
                             const SimilarityOracle& oracle, const Lexicon* antonyms = nullptr);

SuccessReport evaluate_dataset(const Checkpoint& ckpt, const Vocabulary& vocab,
                               const std::vector<Example>& corpus, const EvalConfig& cfg,
                               const Lexicon& synonyms, const SimilarityOracle& oracle);

struct BaselineComparison {
  SuccessReport gradient;
  std::size_t antonym_success = 0;
  double antonym_rate = 0.0;
  double delta = 0.0;  // gradient rate - antonym rate
};

BaselineComparison compare_baseline(const Checkpoint& ckpt, const Vocabulary& vocab,
                                    const std::vector<Example>& corpus, const EvalConfig& cfg,
                                    const Lexicon& synonyms, const Lexicon& antonyms,
                                    const SimilarityOracle& oracle);

/// One report per k in [k_min, k_max].
std::vector<SuccessReport> sweep(const Checkpoint& ckpt, const Vocabulary& vocab,
                                 const std::vector<Example>& corpus, const EvalConfig& cfg,
                                 int k_min, int k_max, const Lexicon& synonyms,
                                 const SimilarityOracle& oracle);

struct SubstitutionPair {
  std::string original_word;
  std::string substitution_word;
  std::string provenance;
};

/// `original<TAB>substitution<TAB>provenance` per line.
std::vector<SubstitutionPair> read_pairs(const std::string& path);

struct TransferCount {
  SubstitutionPair pair;
  std::size_t success_num = 0;
  std::size_t total = 0;
};

/// total: sentences (first `limit`) whose target slot contains the original word.
/// success_num: those whose prediction survives replacing every occurrence.
std::vector<TransferCount> transfer_audit(const std::vector<SubstitutionPair>& pairs,
                                          const Checkpoint& ckpt, const Vocabulary& vocab,
                                          const std::vector<Example>& corpus, std::size_t limit,
                                          Slot slot = Slot::First);

struct FrequencyGroup {
  std::string original;
  std::vector<std::pair<std::string, long>> substitutions;
};

/// Per original (most important) word, its top_n substitutions by count.
std::vector<FrequencyGroup> frequency_report(const std::vector<SampleResult>& results, int top_n);

enum class ReportFormat { Csv, Json };

nlohmann::json report_to_json(const SuccessReport& report);
SuccessReport report_from_json(const nlohmann::json& j);
nlohmann::json sample_to_json(const SampleResult& s);

std::string report_to_csv(const SuccessReport& report);
void export_report(const SuccessReport& report, const std::string& path, ReportFormat format);
SuccessReport load_report(const std::string& path);

/// k,success_rate,n_evaluated,n_skipped
std::string sweep_summary_csv(const std::vector<SuccessReport>& reports);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace obstinate
