#include <doctest.h>

#include <fstream>
#include <random>

#include "desk.hpp"
#include "obstinate/harness.hpp"

using namespace obstinate;
using obstinate::testing::desk;
using obstinate::testing::TempDir;
using obstinate::testing::TinyModel;
using obstinate::testing::tiny_corpus;

namespace {

SampleResult crafted(std::size_t id, std::vector<bool> successes, bool skipped = false) {
  SampleResult s;
  s.sample_id = id;
  s.skipped = skipped;
  s.target_words = {"w" + std::to_string(id)};
  for (std::size_t r = 0; r < successes.size(); ++r) {
    RestartSummary rs;
    rs.restart = int(r);
    rs.success = successes[r];
    rs.steps = 10;
    s.restarts.push_back(rs);
    if (successes[r] && !s.accepted_candidate) {
      s.accepted_candidate = "cand";
      s.substituted_words = {"s" + std::to_string(id)};
    }
  }
  return s;
}

// sum_i I(sum_j I(success_ij) > 0) / n, written out without the library.
double brute_force(const std::vector<std::vector<bool>>& grid) {
  int hits = 0;
  for (const auto& row : grid) {
    int inner = 0;
    for (bool b : row) inner += b ? 1 : 0;
    hits += inner > 0 ? 1 : 0;
  }
  return double(hits) / double(grid.size());
}

}  // namespace

TEST_CASE("metric matches brute force on a crafted restart grid") {
  const std::vector<std::vector<bool>> grid = {
      {false, false, false, false, false, false, false, false, false, false},
      {false, false, true, false, false, false, false, false, false, false},
      {true, false, false, false, false, false, false, false, false, true},
      {false, false, false, false, false, false, false, false, false, false},
  };
  std::vector<SampleResult> samples;
  for (std::size_t i = 0; i < grid.size(); ++i) samples.push_back(crafted(i, grid[i]));
  const auto r = aggregate(samples, 1, "fixture");
  CHECK(r.success_rate == brute_force(grid));
  CHECK(r.success_rate == 0.5);
  CHECK(r.n_success == 2);
  CHECK(r.total_restarts == 40);
  CHECK(r.total_steps == 400);
  CHECK(r.samples[1].success_indicator == 1);
  CHECK(r.samples[3].success_indicator == 0);
}

TEST_CASE("metric on random grids") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.08);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<bool>> grid(1 + trial % 9, std::vector<bool>(10));
    std::vector<SampleResult> samples;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::vector<bool> row(10);
      for (auto&& b : row) b = coin(rng);
      grid[i] = std::vector<bool>(row.begin(), row.end());
      samples.push_back(crafted(i, grid[i]));
    }
    CHECK(aggregate(samples, 1, "x").success_rate == brute_force(grid));
  }
}

TEST_CASE("all successes give rate 1 and skipped samples are excluded") {
  std::vector<SampleResult> s = {crafted(0, {true}), crafted(1, {false, true}), crafted(2, {}, true)};
  auto r = aggregate(s, 2, "x");
  CHECK(r.success_rate == 1.0);
  CHECK(r.n_samples == 2);
  CHECK(r.n_skipped == 1);
  REQUIRE(r.per_k.size() == 1);
  CHECK(r.per_k[0].k == 2);

  auto empty = aggregate({}, 1, "x");
  CHECK(empty.success_rate == 0.0);
  CHECK(report_to_csv(empty) == "k,n_evaluated,n_skipped,n_success,success_rate\n");
}

TEST_CASE("evaluate_dataset agrees with its stored restart indicators") {
  const auto& d = desk();
  SimilarityOracle oracle(d.trained.checkpoint, d.vocab, {});
  EvalConfig cfg;
  cfg.limit = 4;
  cfg.attack.max_steps = 150;
  const auto r = evaluate_dataset(d.trained.checkpoint, d.vocab, d.corpus, cfg, d.synonyms, oracle);
  std::vector<std::vector<bool>> grid;
  for (const auto& s : r.samples) {
    std::vector<bool> row;
    for (const auto& rs : s.restarts) {
      const bool recomputed = rs.agreed && rs.changed && rs.filter_reason == "accepted";
      CHECK(recomputed == rs.success);
      row.push_back(recomputed);
    }
    grid.push_back(row);
  }
  CHECK(r.success_rate == brute_force(grid));

  auto parallel = cfg;
  parallel.workers = 3;
  const auto r3 = evaluate_dataset(d.trained.checkpoint, d.vocab, d.corpus, parallel, d.synonyms, oracle);
  CHECK(report_to_json(r3) == report_to_json(r));
}

TEST_CASE("empty antonym lexicon leaves the full margin to the gradient attack") {
  const auto& d = desk();
  SimilarityOracle oracle(d.trained.checkpoint, d.vocab, {});
  EvalConfig cfg;
  cfg.limit = 5;
  cfg.attack.max_steps = 150;
  cfg.attack.restarts = 3;
  const Lexicon none;
  const auto cmp =
      compare_baseline(d.trained.checkpoint, d.vocab, d.corpus, cfg, d.synonyms, none, oracle);
  CHECK(cmp.antonym_rate == 0.0);
  CHECK(cmp.delta == cmp.gradient.success_rate);
}

TEST_CASE("samples shorter than k are skipped") {
  const auto& d = desk();
  SimilarityOracle oracle(d.trained.checkpoint, d.vocab, {});
  EvalConfig cfg;
  cfg.k_words = 3;
  cfg.attack.restarts = 1;
  cfg.attack.max_steps = 5;
  const Example ex{1, "great .", std::nullopt};
  const auto s = evaluate_sample(d.trained.checkpoint, d.vocab, ex, 0, cfg, d.synonyms, oracle);
  CHECK(s.skipped);
  CHECK(s.restarts.empty());
}

TEST_CASE("transfer audit on a hand-computed fixture") {
  TinyModel m;
  const auto corpus = tiny_corpus();
  // Predictions: "good film" -> 1, "bad film" -> 0, "good good bad" -> 1.
  CHECK(forward(m.ckpt, encode(m.vocab, "good film")).predicted_label == 1);
  CHECK(forward(m.ckpt, encode(m.vocab, "bad film")).predicted_label == 0);
  CHECK(forward(m.ckpt, encode(m.vocab, "good good bad")).predicted_label == 1);

  const std::vector<SubstitutionPair> pairs = {
      {"good", "great", "t"}, {"good", "awful", "t"}, {"bad", "good", "t"},
      {"yoga", "burg", "t"},  {"film", "film", "t"},  {"good", "great", "t"},
  };
  const auto counts = transfer_audit(pairs, m.ckpt, m.vocab, corpus, 100);
  REQUIRE(counts.size() == 6);
  auto pair_of = [](const TransferCount& c) { return std::make_pair(c.success_num, c.total); };
  using P = std::pair<std::size_t, std::size_t>;
  CHECK(pair_of(counts[0]) == P{2, 2});
  CHECK(pair_of(counts[1]) == P{0, 2});  // every occurrence replaced: "awful awful bad" -> 0
  CHECK(pair_of(counts[2]) == P{1, 2});
  CHECK(pair_of(counts[3]) == P{0, 0});
  CHECK(pair_of(counts[4]) == P{2, 2});
  CHECK(pair_of(counts[5]) == pair_of(counts[0]));

  const auto limited = transfer_audit(pairs, m.ckpt, m.vocab, corpus, 1);
  CHECK(pair_of(limited[0]) == P{1, 1});
}

TEST_CASE("identity pairs always transfer on the desk model") {
  const auto& d = desk();
  const auto counts = transfer_audit({{"plot", "plot", "id"}, {"the", "the", "id"}},
                                     d.trained.checkpoint, d.vocab, d.corpus, 200);
  for (const auto& c : counts) {
    CHECK(c.total > 0);
    CHECK(c.success_num == c.total);
  }
}

TEST_CASE("frequency report groups by original word") {
  auto s = crafted(0, {true});
  s.target_words = {"yoga"};
  s.substituted_words = {"burg"};
  auto one = frequency_report({s}, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].original == "yoga");
  CHECK(one[0].substitutions == std::vector<std::pair<std::string, long>>{{"burg", 1}});

  std::vector<SampleResult> many;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"good", "bad"}, {"good", "bad"}, {"good", "evil"}, {"film", "plot"}, {"good", "awful"},
      {"film", "plot"}, {"dull", "fun"}, {"good", "bad"}, {"film", "cast"}, {"dull", "lively"}};
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto r = crafted(i, {true});
    r.target_words = {subs[i].first};
    r.substituted_words = {subs[i].second};
    many.push_back(r);
  }
  many.push_back(crafted(99, {false}));
  const auto groups = frequency_report(many, 2);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].original == "good");
  CHECK(groups[0].substitutions == std::vector<std::pair<std::string, long>>{{"bad", 3}, {"awful", 1}});
  CHECK(groups[1].original == "film");
  CHECK(groups[2].original == "dull");
  CHECK(groups[2].substitutions == std::vector<std::pair<std::string, long>>{{"fun", 1}, {"lively", 1}});

  long total = 0;
  for (const auto& g : frequency_report(many, 100))
    for (const auto& [_, c] : g.substitutions) total += c;
  CHECK(total == 10);

  const auto report = aggregate(many, 1, "x");
  long freq_total = 0;
  for (const auto& f : report.substitution_frequency) freq_total += f.count;
  CHECK(freq_total == long(report.n_success));
  CHECK(report.substitution_frequency[0].original == "good");
  CHECK(report.substitution_frequency[0].count == 3);
}

TEST_CASE("report serialisation") {
  auto r = aggregate({crafted(0, {false, true}), crafted(1, {false})}, 1, "desk");
  r.samples[0].restarts[1].oracle_score = 0.123456789012345;
  r.samples[0].restarts[0].loss_trace = {0.1, 1.0 / 3.0};
  const auto j = report_to_json(r);
  const auto back = report_from_json(j);
  CHECK(report_to_json(back) == j);
  CHECK(back.success_rate == r.success_rate);
  CHECK(*back.samples[0].restarts[1].oracle_score == 0.123456789012345);

  CHECK(report_to_csv(r) == "k,n_evaluated,n_skipped,n_success,success_rate\n1,2,0,1,0.5000\n");
  CHECK(sweep_summary_csv({r}) == "k,success_rate,n_evaluated,n_skipped\n1,0.5000,2,0\n");

  TempDir dir;
  export_report(r, dir.file("r.json"), ReportFormat::Json);
  CHECK(report_to_json(load_report(dir.file("r.json"))) == j);
  write_text_file(dir.file("bad.json"), "{");
  CHECK_THROWS_AS(load_report(dir.file("bad.json")), Error);
  CHECK_THROWS_AS(load_report(dir.file("missing.json")), Error);
  CHECK_THROWS_AS(report_from_json(nlohmann::json::object()), Error);
}

TEST_CASE("pairs file parsing") {
  TempDir dir;
  write_text_file(dir.file("ok.tsv"), "yoga\tburg\tsnli\n\nGreat\tterrible\tsst\n");
  const auto p = read_pairs(dir.file("ok.tsv"));
  REQUIRE(p.size() == 2);
  CHECK(p[1].original_word == "great");
  CHECK(p[1].provenance == "sst");

  write_text_file(dir.file("empty.tsv"), "");
  CHECK_THROWS_AS(read_pairs(dir.file("empty.tsv")), Error);
  write_text_file(dir.file("bad.tsv"), "yoga\tburg\tsnli\nonly-one-field\n");
  try {
    read_pairs(dir.file("bad.tsv"));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedInput);
    CHECK(std::string(e.what()).find("bad.tsv:2") != std::string::npos);
  }
  CHECK_THROWS_AS(read_pairs(dir.file("nope.tsv")), Error);
}

TEST_CASE("worker pool preserves order and propagates errors") {
  auto results = evaluate_all(50, 4, [](std::size_t i) {
    SampleResult s;
    s.sample_id = i * 2;
    return s;
  });
  for (std::size_t i = 0; i < results.size(); ++i) CHECK(results[i].sample_id == i * 2);
  CHECK_THROWS_AS(evaluate_all(10, 3,
                               [](std::size_t i) -> SampleResult {
                                 if (i == 7) throw Error(Errc::RemoteUnreachable, "x");
                                 return {};
                               }),
                  Error);
}
