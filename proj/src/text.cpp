#include "obstinate/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "obstinate/error.hpp"

namespace obstinate {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

// Matches a special surface form starting at `pos`, returning its length or 0.
std::size_t special_at(std::string_view lowered, std::size_t pos) {
  for (auto form : Vocabulary::kSpecialForms) {
    if (lowered.substr(pos, form.size()) == form) return form.size();
  }
  return 0;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view sentence) {
  std::string lowered(sentence);
  for (auto& c : lowered) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }

  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < lowered.size();) {
    auto c = static_cast<unsigned char>(lowered[i]);
    if (is_space(c)) {
      flush();
      ++i;
    } else if (auto len = special_at(lowered, i); len > 0) {
      flush();
      out.emplace_back(lowered.substr(i, len));
      i += len;
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, lowered[i]);
      ++i;
    } else {
      word.push_back(lowered[i]);
      ++i;
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kSpecialForms.size())
    throw Error(Errc::CorruptFile, "vocabulary is missing special tokens");
  for (std::size_t i = 0; i < kSpecialForms.size(); ++i) {
    if (tokens_[i] != kSpecialForms[i])
      throw Error(Errc::CorruptFile, "special token out of place: " + tokens_[i]);
  }
  index_of_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_of_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw Error(Errc::CorruptFile, "duplicate token: " + tokens_[i]);
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size()) throw Error(Errc::IdOutOfRange, std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = index_of_.find(std::string(token));
  return it == index_of_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_of_.count(std::string(token)) != 0;
}

std::uint64_t Vocabulary::fingerprint() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : tokens_) {
    for (char c : t) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus, int min_count) {
  if (min_count < 1) throw Error(Errc::InvalidConfig, "min_count must be >= 1");
  std::map<std::string, long> counts;
  bool any = false;
  for (const auto& sentence : corpus) {
    for (auto& t : tokenize(sentence)) {
      any = true;
      bool special = std::find(Vocabulary::kSpecialForms.begin(), Vocabulary::kSpecialForms.end(),
                               t) != Vocabulary::kSpecialForms.end();
      if (!special) ++counts[t];
    }
  }
  if (!any) throw Error(Errc::EmptyCorpus, "corpus has no tokens");

  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens(Vocabulary::kSpecialForms.begin(),
                                  Vocabulary::kSpecialForms.end());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

std::vector<TokenId> EncodedInput::target_ids() const {
  const auto& seg = target_segment();
  return {ids.begin() + seg.begin, ids.begin() + seg.end};
}

EncodedInput encode_ids(const Vocabulary& vocab, std::vector<TokenId> first,
                        std::vector<TokenId> second, bool paired, Slot target_slot) {
  if (first.empty() || (paired && second.empty()))
    throw Error(Errc::EmptySentence, "sentence tokenizes to zero tokens");
  if (!paired && target_slot == Slot::Second)
    throw Error(Errc::InvalidConfig, "second slot targeted on an unpaired input");

  EncodedInput e;
  e.target_slot = target_slot;
  e.ids.push_back(Vocabulary::kCls);
  Segment a{1, 1 + static_cast<Index>(first.size())};
  e.ids.insert(e.ids.end(), first.begin(), first.end());
  e.ids.push_back(Vocabulary::kSep);
  e.segments.push_back(a);
  if (paired) {
    e.ids.push_back(Vocabulary::kSep);
    Segment b{a.end + 2, a.end + 2 + static_cast<Index>(second.size())};
    e.ids.insert(e.ids.end(), second.begin(), second.end());
    e.ids.push_back(Vocabulary::kSep);
    e.segments.push_back(b);
  }

  e.onehot = Eigen::MatrixXd::Zero(e.rows(), vocab.size());
  for (Index r = 0; r < e.rows(); ++r) {
    auto id = e.ids[static_cast<std::size_t>(r)];
    if (id < 0 || id >= vocab.size()) throw Error(Errc::IdOutOfRange, std::to_string(id));
    e.onehot(r, id) = 1.0;
  }
  const auto& seg = e.target_segment();
  for (Index r = seg.begin; r < seg.end; ++r) {
    if (!Vocabulary::is_special(e.ids[static_cast<std::size_t>(r)])) e.attackable.push_back(r);
  }
  return e;
}

EncodedInput encode(const Vocabulary& vocab, std::string_view first,
                    const std::optional<std::string>& second, Slot target_slot) {
  auto to_ids = [&vocab](std::string_view s) {
    std::vector<TokenId> ids;
    for (const auto& t : tokenize(s)) ids.push_back(vocab.id_of(t));
    return ids;
  };
  return encode_ids(vocab, to_ids(first), second ? to_ids(*second) : std::vector<TokenId>{},
                    second.has_value(), target_slot);
}

std::string decode(const Vocabulary& vocab, const std::vector<TokenId>& ids) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

EncodedInput baseline_encoding(const EncodedInput& input, const Vocabulary& vocab) {
  EncodedInput b = input;
  for (const auto& seg : b.segments) {
    for (Index r = seg.begin; r < seg.end; ++r) {
      b.ids[static_cast<std::size_t>(r)] = Vocabulary::kRef;
      b.onehot.row(r).setZero();
      b.onehot(r, Vocabulary::kRef) = 1.0;
    }
  }
  (void)vocab;
  return b;
}

std::vector<TokenId> argmax_rows(const Eigen::MatrixXd& rows) {
  std::vector<TokenId> out(static_cast<std::size_t>(rows.rows()));
  for (Index r = 0; r < rows.rows(); ++r) {
    Index best = 0;
    // maxCoeff returns the first maximal index, which is the lowest id.
    rows.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<TokenId>(best);
  }
  return out;
}

std::vector<Example> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read corpus " + path);
  std::vector<Example> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() < 2 || fields.size() > 3)
      throw Error(Errc::MalformedInput, path + ":" + std::to_string(lineno) + ": expected 2 or 3 fields");
    Example ex;
    try {
      std::size_t used = 0;
      ex.label = std::stoi(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Errc::MalformedInput, path + ":" + std::to_string(lineno) + ": bad label");
    }
    ex.first = fields[1];
    if (fields.size() == 3) ex.second = fields[2];
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::string> corpus_sentences(const std::vector<Example>& corpus) {
  std::vector<std::string> out;
  for (const auto& ex : corpus) {
    out.push_back(ex.first);
    if (ex.second) out.push_back(*ex.second);
  }
  return out;
}

}  // namespace obstinate
