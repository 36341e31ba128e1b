#include "obstinate/filter.hpp"

#include <fstream>
#include <semaphore>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace obstinate {

namespace {

std::string normalize_word(const std::string& raw) {
  auto toks = tokenize(raw);
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Lexicon load_lexicon(const std::string& path, bool reflexive) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read lexicon " + path);
  return parse_lexicon(in, path, reflexive);
}

}  // namespace

const std::set<std::string>* Lexicon::find(const std::string& word) const {
  auto it = entries.find(word);
  return it == entries.end() ? nullptr : &it->second;
}

Lexicon parse_lexicon(std::istream& in, std::string source_tag, bool reflexive) {
  Lexicon lex;
  lex.source_tag = std::move(source_tag);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(Errc::MalformedInput,
                  lex.source_tag + ":" + std::to_string(lineno) + ": missing tab");
    auto word = normalize_word(line.substr(0, tab));
    if (word.empty()) continue;
    auto& set = lex.entries[word];
    std::stringstream rest(line.substr(tab + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      auto w = normalize_word(item);
      if (!w.empty()) set.insert(w);
    }
    if (reflexive) set.insert(word);
    else set.erase(word);
  }
  return lex;
}

Lexicon load_synonym_lexicon(const std::string& path) { return load_lexicon(path, true); }
Lexicon load_antonym_lexicon(const std::string& path) { return load_lexicon(path, false); }

bool sentence_synonym_set_member(const std::vector<std::string>& original,
                                 const std::vector<std::string>& candidate,
                                 const Lexicon& synonyms, const std::vector<Index>& positions) {
  for (auto pos : positions) {
    const auto p = static_cast<std::size_t>(pos);
    if (p >= original.size() || p >= candidate.size()) return false;
    const auto& from = original[p];
    const auto& to = candidate[p];
    if (from == to) continue;
    const auto* set = synonyms.find(from);
    if (set == nullptr || set->count(to) == 0) return false;
  }
  return true;
}

const char* oracle_kind_name(OracleKind kind) noexcept {
  return kind == OracleKind::Remote ? "remote" : "builtin_cosine";
}

const char* reject_reason_name(RejectReason reason) noexcept {
  switch (reason) {
    case RejectReason::None: return "none";
    case RejectReason::SynonymSet: return "synonym_set";
    case RejectReason::OracleSimilar: return "oracle_similar";
  }
  return "unknown";
}

std::string similarity_prompt(const std::string& a, const std::string& b) {
  return "Are the following sentences semantically similar? " + a + ", " + b;
}

struct SimilarityOracle::Gate {
  explicit Gate(int n) : slots(n) {}
  std::counting_semaphore<1024> slots;
};

SimilarityOracle::SimilarityOracle(const Checkpoint& ckpt, const Vocabulary& vocab,
                                   OracleConfig config)
    : ckpt_(ckpt), vocab_(vocab), config_(std::move(config)) {
  if (!(config_.threshold >= 0.0 && config_.threshold <= 1.0))
    throw Error(Errc::InvalidConfig, "oracle threshold must be in [0,1]");
  if (config_.max_in_flight < 1 || config_.max_in_flight > 1024)
    throw Error(Errc::InvalidConfig, "oracle in-flight cap must be in [1,1024]");
  if (config_.mode == OracleMode::Remote && config_.endpoint.empty())
    throw Error(Errc::InvalidConfig, "remote oracle needs an endpoint");
  gate_ = std::make_unique<Gate>(config_.max_in_flight);
}

SimilarityOracle::~SimilarityOracle() = default;

double SimilarityOracle::cosine(const std::string& a, const std::string& b) const {
  auto ids = [this](const std::string& s) {
    std::vector<TokenId> out;
    for (const auto& t : tokenize(s)) out.push_back(vocab_.id_of(t));
    return out;
  };
  const auto ia = ids(a), ib = ids(b);
  if (ia == ib) return 1.0;
  const Eigen::VectorXd ea = mean_embedding(ckpt_, ia), eb = mean_embedding(ckpt_, ib);
  const double na = ea.norm(), nb = eb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(ea.dot(eb) / (na * nb), -1.0, 1.0);
}

OracleVerdict SimilarityOracle::builtin(const std::string& a, const std::string& b) const {
  OracleVerdict v;
  v.kind = OracleKind::BuiltinCosine;
  // Negative cosines report as 0 so the score stays in [0,1].
  v.score = std::max(0.0, cosine(a, b));
  v.similar = v.score >= config_.threshold;
  return v;
}

std::optional<OracleVerdict> SimilarityOracle::remote(const std::string& a,
                                                      const std::string& b) const {
  const auto& url = config_.endpoint;
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  const std::string base = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  nlohmann::json body = {{"prompt", similarity_prompt(a, b)}, {"sentence_a", a}, {"sentence_b", b}};

  gate_->slots.acquire();
  httplib::Result res{nullptr, httplib::Error::Unknown};
  {
    httplib::Client client(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    res = client.Post(path, body.dump(), "application/json");
  }
  gate_->slots.release();

  if (!res || res->status != 200) return std::nullopt;
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("similar") ||
      !parsed["similar"].is_boolean())
    return std::nullopt;

  OracleVerdict v;
  v.kind = OracleKind::Remote;
  v.similar = parsed["similar"].get<bool>();
  v.score = v.similar ? 1.0 : 0.0;
  v.raw = res->body;
  return v;
}

OracleVerdict SimilarityOracle::judge(const std::string& a, const std::string& b) const {
  if (config_.mode == OracleMode::Builtin) return builtin(a, b);
  if (auto v = remote(a, b)) return *v;
  if (!config_.allow_fallback)
    throw Error(Errc::RemoteUnreachable, "no usable answer from " + config_.endpoint);
  auto v = builtin(a, b);
  v.fell_back = true;
  return v;
}

FilterDecision filter_candidate(const std::string& original, const std::string& candidate,
                                const Lexicon& synonyms, const SimilarityOracle& oracle,
                                const std::vector<Index>& positions) {
  FilterDecision d;
  const auto a = tokenize(original), b = tokenize(candidate);
  if (a == b || sentence_synonym_set_member(a, b, synonyms, positions)) {
    d.reason = RejectReason::SynonymSet;
    return d;
  }
  d.verdict = oracle.judge(original, candidate);
  if (d.verdict->similar) {
    d.reason = RejectReason::OracleSimilar;
    return d;
  }
  d.accepted = true;
  return d;
}

}  // namespace obstinate
