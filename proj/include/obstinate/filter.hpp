#pragma once

#include <chrono>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "obstinate/model.hpp"
#include "obstinate/text.hpp"

namespace obstinate {

/// word -> related words. Used for both synonyms (reflexive) and antonyms.
struct Lexicon {
  std::map<std::string, std::set<std::string>> entries;
  std::string source_tag;

  /// nullptr when the word has no entry.
  const std::set<std::string>* find(const std::string& word) const;
};

/// Lines of `word<TAB>w1,w2,...`. Blank lines and lines starting with '#' are skipped.
Lexicon parse_lexicon(std::istream& in, std::string source_tag, bool reflexive);
Lexicon load_synonym_lexicon(const std::string& path);
Lexicon load_antonym_lexicon(const std::string& path);

/// True iff at every target position the candidate word is a synonym of the
/// original word (a word is always its own synonym). Other positions are ignored.
bool sentence_synonym_set_member(const std::vector<std::string>& original,
                                 const std::vector<std::string>& candidate,
                                 const Lexicon& synonyms, const std::vector<Index>& positions);

enum class OracleMode { Builtin, Remote };
enum class OracleKind { BuiltinCosine, Remote };

const char* oracle_kind_name(OracleKind kind) noexcept;

struct OracleConfig {
  OracleMode mode = OracleMode::Builtin;
  std::string endpoint;  // http://host:port/path
  double threshold = 0.90;
  std::chrono::milliseconds timeout{5000};
  bool allow_fallback = true;
  int max_in_flight = 4;
};

struct OracleVerdict {
  bool similar = false;
  double score = 0.0;
  OracleKind kind = OracleKind::BuiltinCosine;
  bool fell_back = false;
  std::string raw;  // response body for remote verdicts
};

/// Prompt sent to a remote similarity service.
std::string similarity_prompt(const std::string& a, const std::string& b);

/// Judges whether two sentences mean the same thing. The builtin judge is the
/// cosine of the checkpoint's mean token embeddings; the remote judge POSTs
/// {"prompt","sentence_a","sentence_b"} and expects {"similar": bool, "raw": string}.
class SimilarityOracle {
 public:
  SimilarityOracle(const Checkpoint& ckpt, const Vocabulary& vocab, OracleConfig config);
  ~SimilarityOracle();
  SimilarityOracle(const SimilarityOracle&) = delete;
  SimilarityOracle& operator=(const SimilarityOracle&) = delete;

  OracleVerdict judge(const std::string& a, const std::string& b) const;
  double cosine(const std::string& a, const std::string& b) const;
  const OracleConfig& config() const noexcept { return config_; }

 private:
  OracleVerdict builtin(const std::string& a, const std::string& b) const;
  std::optional<OracleVerdict> remote(const std::string& a, const std::string& b) const;

  const Checkpoint& ckpt_;
  const Vocabulary& vocab_;
  OracleConfig config_;
  struct Gate;
  std::unique_ptr<Gate> gate_;
};

enum class RejectReason { None, SynonymSet, OracleSimilar };

const char* reject_reason_name(RejectReason reason) noexcept;

struct FilterDecision {
  bool accepted = false;
  RejectReason reason = RejectReason::None;
  std::optional<OracleVerdict> verdict;
};

/// Accepts iff the candidate leaves the synonym set and the oracle calls the
/// pair dissimilar. `positions` index the tokenized sentences.
FilterDecision filter_candidate(const std::string& original, const std::string& candidate,
                                const Lexicon& synonyms, const SimilarityOracle& oracle,
                                const std::vector<Index>& positions);

}  // namespace obstinate
