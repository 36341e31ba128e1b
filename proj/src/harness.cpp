#include "obstinate/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace obstinate {

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

RestartSummary summarize(const RestartRecord& rec) {
  RestartSummary s;
  const auto& o = rec.outcome;
  s.restart = o.restart_index;
  s.candidate = o.candidate_sentence;
  s.agreed = o.agreed;
  s.changed = o.changed;
  s.early_exit = o.early_exit;
  s.steps = o.steps_taken;
  s.final_loss = o.final_loss;
  s.loss_trace = o.loss_trace;
  s.success = rec.success;
  if (!o.agreed) s.filter_reason = "not_agreed";
  else if (!o.changed) s.filter_reason = "unchanged";
  else if (rec.filter && rec.filter->accepted) s.filter_reason = "accepted";
  else if (rec.filter) s.filter_reason = reject_reason_name(rec.filter->reason);
  if (rec.filter && rec.filter->verdict) s.oracle_score = rec.filter->verdict->score;
  return s;
}

void run_antonym_baseline(const Checkpoint& ckpt, const Vocabulary& vocab, const EncodedInput& e,
                          const std::vector<Index>& targets, const std::vector<Index>& positions,
                          const Lexicon& synonyms, const Lexicon& antonyms,
                          const SimilarityOracle& oracle, SampleResult& s) {
  const auto original = decode(vocab, e.target_ids());
  const auto candidates = antonym_attack(vocab, e, targets, antonyms);
  s.antonym_candidates = static_cast<int>(candidates.size());
  for (const auto& cand : candidates) {
    std::vector<TokenId> ids;
    for (const auto& t : tokenize(cand)) ids.push_back(vocab.id_of(t));
    const auto reencoded = with_target_slot(vocab, e, ids);
    if (forward(ckpt, reencoded).predicted_label != s.original_prediction) continue;
    if (tokenize(cand) == tokenize(original)) continue;
    if (filter_candidate(original, cand, synonyms, oracle, positions).accepted) {
      s.antonym_success = 1;
      return;
    }
  }
}

}  // namespace

std::vector<SampleResult> evaluate_all(std::size_t count, int workers,
                                       const SampleEvaluator& evaluate) {
  std::vector<SampleResult> results(count);
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  if (n_threads == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) results[i] = evaluate(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(n_threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(n_threads, count); ++w) {
      pool.emplace_back([&, w] {
        try {
          for (auto i = next++; i < count; i = next++) results[i] = evaluate(i);
        } catch (...) {
          failures[w] = std::current_exception();
          next = count;
        }
      });
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return results;
}

SuccessReport aggregate(std::vector<SampleResult> samples, int k_words, std::string provenance) {
  SuccessReport r;
  r.k_words = k_words;
  r.provenance = std::move(provenance);
  std::map<std::pair<std::string, std::string>, long> freq;
  for (auto& s : samples) {
    r.total_restarts += s.restarts.size();
    for (const auto& rs : s.restarts) r.total_steps += static_cast<std::uint64_t>(rs.steps);
    if (s.skipped) {
      ++r.n_skipped;
      s.success_indicator = 0;
      continue;
    }
    ++r.n_samples;
    const bool any = std::any_of(s.restarts.begin(), s.restarts.end(),
                                 [](const RestartSummary& rs) { return rs.success; });
    s.success_indicator = any ? 1 : 0;
    r.n_success += static_cast<std::size_t>(s.success_indicator);
    if (any && !s.target_words.empty() && !s.substituted_words.empty())
      ++freq[{s.target_words.front(), s.substituted_words.front()}];
  }
  r.success_rate = r.n_samples == 0 ? 0.0
                                    : static_cast<double>(r.n_success) /
                                          static_cast<double>(r.n_samples);
  if (r.n_samples + r.n_skipped > 0)
    r.per_k.push_back({k_words, r.n_samples, r.n_skipped, r.n_success, r.success_rate});
  for (auto& [key, count] : freq) r.substitution_frequency.push_back({key.first, key.second, count});
  std::stable_sort(r.substitution_frequency.begin(), r.substitution_frequency.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  r.samples = std::move(samples);
  return r;
}

SampleResult evaluate_sample(const Checkpoint& ckpt, const Vocabulary& vocab, const Example& ex,
                             std::size_t sample_id, const EvalConfig& cfg, const Lexicon& synonyms,
                             const SimilarityOracle& oracle, const Lexicon* antonyms) {
  SampleResult s;
  s.sample_id = sample_id;
  try {
    const auto e = encode(vocab, ex.first, ex.second, cfg.target_slot);
    s.original = decode(vocab, e.target_ids());
    s.original_prediction = forward(ckpt, e).predicted_label;
    if (e.attackable.size() < static_cast<std::size_t>(cfg.k_words)) {
      s.skipped = true;
      return s;
    }
    const auto iv = integrated_gradients(ckpt, vocab, e, cfg.ig_steps);
    s.target_indices = select_targets(iv, cfg.k_words);
    for (auto r : s.target_indices) s.target_words.push_back(vocab.token(e.ids[std::size_t(r)]));
    const auto positions = slot_positions(e, s.target_indices);

    const auto search = attack_with_restarts(
        ckpt, vocab, e, s.target_indices, cfg.attack, [&](const AttackOutcome& o) {
          return filter_candidate(o.original_sentence, o.candidate_sentence, synonyms, oracle,
                                  positions);
        });
    for (const auto& rec : search.records) s.restarts.push_back(summarize(rec));
    if (const auto* won = search.accepted_outcome()) {
      s.accepted_candidate = won->candidate_sentence;
      for (auto id : won->candidate_ids) s.substituted_words.push_back(vocab.token(id));
      s.success_indicator = 1;
    }
    if (antonyms != nullptr)
      run_antonym_baseline(ckpt, vocab, e, s.target_indices, positions, synonyms, *antonyms,
                           oracle, s);
  } catch (const Error& err) {
    if (err.code() == Errc::RemoteUnreachable) throw;
    s.error = err.what();
    s.success_indicator = 0;
  }
  return s;
}

SuccessReport evaluate_dataset(const Checkpoint& ckpt, const Vocabulary& vocab,
                               const std::vector<Example>& corpus, const EvalConfig& cfg,
                               const Lexicon& synonyms, const SimilarityOracle& oracle) {
  if (cfg.k_words < 1) throw Error(Errc::InvalidConfig, "k_words must be >= 1");
  cfg.attack.validate();
  const auto n = std::min(cfg.limit, corpus.size());
  auto results = evaluate_all(n, cfg.workers, [&](std::size_t i) {
    return evaluate_sample(ckpt, vocab, corpus[i], i, cfg, synonyms, oracle);
  });
  return aggregate(std::move(results), cfg.k_words, cfg.provenance);
}

BaselineComparison compare_baseline(const Checkpoint& ckpt, const Vocabulary& vocab,
                                    const std::vector<Example>& corpus, const EvalConfig& cfg,
                                    const Lexicon& synonyms, const Lexicon& antonyms,
                                    const SimilarityOracle& oracle) {
  if (cfg.k_words < 1) throw Error(Errc::InvalidConfig, "k_words must be >= 1");
  cfg.attack.validate();
  const auto n = std::min(cfg.limit, corpus.size());
  auto results = evaluate_all(n, cfg.workers, [&](std::size_t i) {
    return evaluate_sample(ckpt, vocab, corpus[i], i, cfg, synonyms, oracle, &antonyms);
  });
  BaselineComparison cmp;
  cmp.gradient = aggregate(std::move(results), cfg.k_words, cfg.provenance);
  for (const auto& s : cmp.gradient.samples)
    if (!s.skipped) cmp.antonym_success += static_cast<std::size_t>(s.antonym_success);
  cmp.antonym_rate = cmp.gradient.n_samples == 0
                         ? 0.0
                         : static_cast<double>(cmp.antonym_success) /
                               static_cast<double>(cmp.gradient.n_samples);
  cmp.delta = cmp.gradient.success_rate - cmp.antonym_rate;
  return cmp;
}

std::vector<SuccessReport> sweep(const Checkpoint& ckpt, const Vocabulary& vocab,
                                 const std::vector<Example>& corpus, const EvalConfig& cfg,
                                 int k_min, int k_max, const Lexicon& synonyms,
                                 const SimilarityOracle& oracle) {
  if (k_min < 1 || k_max < k_min) throw Error(Errc::InvalidConfig, "need 1 <= k_min <= k_max");
  std::vector<SuccessReport> out;
  for (int k = k_min; k <= k_max; ++k) {
    auto c = cfg;
    c.k_words = k;
    out.push_back(evaluate_dataset(ckpt, vocab, corpus, c, synonyms, oracle));
  }
  return out;
}

std::vector<SubstitutionPair> read_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read pairs file " + path);
  std::vector<SubstitutionPair> out;
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
    auto bad = [&](const std::string& why) {
      return Error(Errc::MalformedInput, "MalformedPairsLine " + path + ":" +
                                             std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 3) throw bad("expected 3 tab-separated fields");
    SubstitutionPair p{join(tokenize(fields[0])), join(tokenize(fields[1])), fields[2]};
    if (p.original_word.empty() || p.substitution_word.empty()) throw bad("empty word");
    out.push_back(std::move(p));
  }
  if (out.empty()) throw Error(Errc::MalformedInput, "no substitution pairs in " + path);
  return out;
}

std::vector<TransferCount> transfer_audit(const std::vector<SubstitutionPair>& pairs,
                                          const Checkpoint& ckpt, const Vocabulary& vocab,
                                          const std::vector<Example>& corpus, std::size_t limit,
                                          Slot slot) {
  if (pairs.empty()) throw Error(Errc::InvalidConfig, "no pairs to audit");
  const auto n = std::min(limit, corpus.size());
  std::vector<TransferCount> out;
  for (const auto& pair : pairs) {
    TransferCount tc{pair, 0, 0};
    const auto replacement = tokenize(pair.substitution_word);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ex = corpus[i];
      const bool second = slot == Slot::Second && ex.second.has_value();
      const auto tokens = tokenize(second ? *ex.second : ex.first);
      if (std::find(tokens.begin(), tokens.end(), pair.original_word) == tokens.end()) continue;
      ++tc.total;
      std::vector<std::string> swapped;
      for (const auto& t : tokens) {
        if (t == pair.original_word) swapped.insert(swapped.end(), replacement.begin(), replacement.end());
        else swapped.push_back(t);
      }
      const auto before = encode(vocab, ex.first, ex.second, slot);
      const auto after = second ? encode(vocab, ex.first, join(swapped), slot)
                                : encode(vocab, join(swapped), ex.second, slot);
      if (forward(ckpt, before).predicted_label == forward(ckpt, after).predicted_label)
        ++tc.success_num;
    }
    out.push_back(std::move(tc));
  }
  return out;
}

std::vector<FrequencyGroup> frequency_report(const std::vector<SampleResult>& results, int top_n) {
  if (top_n < 1) throw Error(Errc::InvalidConfig, "top_n must be >= 1");
  std::map<std::string, std::map<std::string, long>> counts;
  for (const auto& s : results) {
    if (!s.accepted_candidate || s.target_words.empty() || s.substituted_words.empty()) continue;
    ++counts[s.target_words.front()][s.substituted_words.front()];
  }
  std::vector<std::pair<long, FrequencyGroup>> groups;
  for (auto& [word, subs] : counts) {
    FrequencyGroup g{word, {subs.begin(), subs.end()}};
    std::stable_sort(g.substitutions.begin(), g.substitutions.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    long total = 0;
    for (const auto& [_, c] : g.substitutions) total += c;
    if (g.substitutions.size() > static_cast<std::size_t>(top_n))
      g.substitutions.resize(static_cast<std::size_t>(top_n));
    groups.emplace_back(total, std::move(g));
  }
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<FrequencyGroup> out;
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

nlohmann::json sample_to_json(const SampleResult& s) {
  nlohmann::json restarts = nlohmann::json::array();
  for (const auto& r : s.restarts) {
    nlohmann::json jr = {{"restart", r.restart},       {"candidate", r.candidate},
                         {"agreed", r.agreed},         {"changed", r.changed},
                         {"early_exit", r.early_exit}, {"steps", r.steps},
                         {"final_loss", r.final_loss}, {"filter_reason", r.filter_reason},
                         {"success", r.success}};
    jr["oracle_score"] = r.oracle_score ? nlohmann::json(*r.oracle_score) : nlohmann::json(nullptr);
    if (!r.loss_trace.empty()) jr["loss_trace"] = r.loss_trace;
    restarts.push_back(std::move(jr));
  }
  nlohmann::json j = {{"sample_id", s.sample_id},
                      {"original", s.original},
                      {"original_prediction", s.original_prediction},
                      {"target_indices", s.target_indices},
                      {"target_words", s.target_words},
                      {"restarts", std::move(restarts)},
                      {"substituted_words", s.substituted_words},
                      {"success_indicator", s.success_indicator},
                      {"skipped", s.skipped},
                      {"error", s.error},
                      {"antonym_candidates", s.antonym_candidates},
                      {"antonym_success", s.antonym_success}};
  j["accepted_candidate"] =
      s.accepted_candidate ? nlohmann::json(*s.accepted_candidate) : nlohmann::json(nullptr);
  return j;
}

namespace {

SampleResult sample_from_json(const nlohmann::json& j) {
  SampleResult s;
  s.sample_id = j.at("sample_id").get<std::size_t>();
  s.original = j.at("original").get<std::string>();
  s.original_prediction = j.at("original_prediction").get<int>();
  s.target_indices = j.at("target_indices").get<std::vector<Index>>();
  s.target_words = j.at("target_words").get<std::vector<std::string>>();
  for (const auto& jr : j.at("restarts")) {
    RestartSummary r;
    r.restart = jr.at("restart").get<int>();
    r.candidate = jr.at("candidate").get<std::string>();
    r.agreed = jr.at("agreed").get<bool>();
    r.changed = jr.at("changed").get<bool>();
    r.early_exit = jr.at("early_exit").get<bool>();
    r.steps = jr.at("steps").get<int>();
    r.final_loss = jr.at("final_loss").get<double>();
    r.filter_reason = jr.at("filter_reason").get<std::string>();
    if (!jr.at("oracle_score").is_null()) r.oracle_score = jr.at("oracle_score").get<double>();
    r.success = jr.at("success").get<bool>();
    if (jr.contains("loss_trace")) r.loss_trace = jr.at("loss_trace").get<std::vector<double>>();
    s.restarts.push_back(std::move(r));
  }
  if (!j.at("accepted_candidate").is_null())
    s.accepted_candidate = j.at("accepted_candidate").get<std::string>();
  s.substituted_words = j.at("substituted_words").get<std::vector<std::string>>();
  s.success_indicator = j.at("success_indicator").get<int>();
  s.skipped = j.at("skipped").get<bool>();
  s.error = j.at("error").get<std::string>();
  s.antonym_candidates = j.at("antonym_candidates").get<int>();
  s.antonym_success = j.at("antonym_success").get<int>();
  return s;
}

}  // namespace

nlohmann::json report_to_json(const SuccessReport& r) {
  nlohmann::json per_k = nlohmann::json::array();
  for (const auto& k : r.per_k)
    per_k.push_back({{"k", k.k},
                     {"n_evaluated", k.n_evaluated},
                     {"n_skipped", k.n_skipped},
                     {"n_success", k.n_success},
                     {"success_rate", k.success_rate}});
  nlohmann::json freq = nlohmann::json::array();
  for (const auto& f : r.substitution_frequency)
    freq.push_back({{"original", f.original}, {"substitution", f.substitution}, {"count", f.count}});
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples) samples.push_back(sample_to_json(s));
  return {{"k_words", r.k_words},
          {"provenance", r.provenance},
          {"n_samples", r.n_samples},
          {"n_skipped", r.n_skipped},
          {"n_success", r.n_success},
          {"success_rate", r.success_rate},
          {"per_k", std::move(per_k)},
          {"substitution_frequency", std::move(freq)},
          {"runtime", {{"total_steps", r.total_steps}, {"total_restarts", r.total_restarts}}},
          {"samples", std::move(samples)}};
}

SuccessReport report_from_json(const nlohmann::json& j) {
  try {
    SuccessReport r;
    r.k_words = j.at("k_words").get<int>();
    r.provenance = j.at("provenance").get<std::string>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.n_skipped = j.at("n_skipped").get<std::size_t>();
    r.n_success = j.at("n_success").get<std::size_t>();
    r.success_rate = j.at("success_rate").get<double>();
    for (const auto& k : j.at("per_k"))
      r.per_k.push_back({k.at("k").get<int>(), k.at("n_evaluated").get<std::size_t>(),
                         k.at("n_skipped").get<std::size_t>(), k.at("n_success").get<std::size_t>(),
                         k.at("success_rate").get<double>()});
    for (const auto& f : j.at("substitution_frequency"))
      r.substitution_frequency.push_back({f.at("original").get<std::string>(),
                                          f.at("substitution").get<std::string>(),
                                          f.at("count").get<long>()});
    r.total_steps = j.at("runtime").at("total_steps").get<std::uint64_t>();
    r.total_restarts = j.at("runtime").at("total_restarts").get<std::uint64_t>();
    for (const auto& s : j.at("samples")) r.samples.push_back(sample_from_json(s));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedInput, std::string("report json: ") + e.what());
  }
}

std::string report_to_csv(const SuccessReport& r) {
  std::string out = "k,n_evaluated,n_skipped,n_success,success_rate\n";
  for (const auto& k : r.per_k)
    out += std::to_string(k.k) + "," + std::to_string(k.n_evaluated) + "," +
           std::to_string(k.n_skipped) + "," + std::to_string(k.n_success) + "," +
           fixed4(k.success_rate) + "\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
  out << contents;
  if (!out) throw Error(Errc::IoFailure, "write failed: " + path);
}

void export_report(const SuccessReport& report, const std::string& path, ReportFormat format) {
  write_text_file(path, format == ReportFormat::Csv ? report_to_csv(report)
                                                    : report_to_json(report).dump(2) + "\n");
}

SuccessReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::MalformedInput, path + " is not valid JSON");
  return report_from_json(j);
}

std::string sweep_summary_csv(const std::vector<SuccessReport>& reports) {
  std::string out = "k,success_rate,n_evaluated,n_skipped\n";
  for (const auto& r : reports)
    out += std::to_string(r.k_words) + "," + fixed4(r.success_rate) + "," +
           std::to_string(r.n_samples) + "," + std::to_string(r.n_skipped) + "\n";
  return out;
}

}  // namespace obstinate
