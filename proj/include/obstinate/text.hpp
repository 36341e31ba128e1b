#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace obstinate {

using Index = Eigen::Index;
using TokenId = std::int32_t;

/// Lowercases and splits on whitespace; every ASCII punctuation character becomes
/// its own token. Special surface forms such as "<cls>" survive as one token.
std::vector<std::string> tokenize(std::string_view sentence);

/// Closed token inventory. Specials occupy the first five ids in a fixed order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kRef = 4;
  static constexpr std::array<std::string_view, 5> kSpecialForms = {"<pad>", "<unk>", "<cls>",
                                                                    "<sep>", "<ref>"};

  /// Builds from an explicit token list (specials first, as written by `save`).
  explicit Vocabulary(std::vector<std::string> tokens);

  Index size() const noexcept { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const;

  /// Unknown tokens map to kUnk.
  TokenId id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  static bool is_special(TokenId id) noexcept { return id >= 0 && id <= kRef; }

  /// FNV-1a over the newline-joined token list.
  std::uint64_t fingerprint() const noexcept;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_of_;
};

Vocabulary build_vocabulary(const std::vector<std::string>& corpus, int min_count);

enum class Slot { First, Second };

/// Body rows of one sentence slot, half-open [begin, end).
struct Segment {
  Index begin = 0;
  Index end = 0;
  Index length() const noexcept { return end - begin; }
  bool contains(Index row) const noexcept { return row >= begin && row < end; }
};

using SegmentBounds = std::vector<Segment>;

struct EncodedInput {
  Eigen::MatrixXd onehot;
  std::vector<TokenId> ids;
  SegmentBounds segments;
  std::vector<Index> attackable;
  Slot target_slot = Slot::First;

  Index rows() const noexcept { return static_cast<Index>(ids.size()); }
  const Segment& target_segment() const {
    return segments[target_slot == Slot::Second && segments.size() > 1 ? 1 : 0];
  }
  /// Token ids of the target slot body.
  std::vector<TokenId> target_ids() const;
};

/// Layout [CLS, first, SEP] or [CLS, first, SEP, SEP, second, SEP].
EncodedInput encode(const Vocabulary& vocab, std::string_view first,
                    const std::optional<std::string>& second = std::nullopt,
                    Slot target_slot = Slot::First);

/// Same as `encode`, from already-resolved ids.
EncodedInput encode_ids(const Vocabulary& vocab, std::vector<TokenId> first,
                        std::vector<TokenId> second, bool paired, Slot target_slot);

std::string decode(const Vocabulary& vocab, const std::vector<TokenId>& ids);

/// Replaces every body row with REF; specials and layout are kept.
EncodedInput baseline_encoding(const EncodedInput& input, const Vocabulary& vocab);

/// Row-wise argmax, ties to the lowest column.
std::vector<TokenId> argmax_rows(const Eigen::MatrixXd& rows);

struct Example {
  int label = 0;
  std::string first;
  std::optional<std::string> second;
};

/// `label<TAB>sentence` or `label<TAB>sentence1<TAB>sentence2`, one per line.
std::vector<Example> read_corpus(const std::string& path);

/// Every sentence of the corpus, both slots, for vocabulary building.
std::vector<std::string> corpus_sentences(const std::vector<Example>& corpus);

}  // namespace obstinate
