#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "desk.hpp"
#include "obstinate/text.hpp"

using namespace obstinate;
using obstinate::testing::data_path;

namespace {

std::vector<std::string> first_lines(std::size_t n) {
  auto corpus = read_corpus(data_path("sentiment.tsv"));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n && i < corpus.size(); ++i) out.push_back(corpus[i].first);
  return out;
}

void check_onehot(const EncodedInput& e) {
  for (Index r = 0; r < e.onehot.rows(); ++r) {
    CHECK(e.onehot.row(r).sum() == 1.0);
    CHECK(e.onehot(r, e.ids[std::size_t(r)]) == 1.0);
  }
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("The Film, wasn't GREAT!") ==
        std::vector<std::string>{"the", "film", ",", "wasn", "'", "t", "great", "!"});
  CHECK(tokenize("  a \t b\n") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("<cls> a <sep>") == std::vector<std::string>{"<cls>", "a", "<sep>"});
  CHECK(tokenize("").empty());
}

TEST_CASE("build_vocabulary orders specials then frequency then lexicographic") {
  auto v = build_vocabulary({"a b a"}, 1);
  REQUIRE(v.size() == 7);
  for (TokenId i = 0; i < 5; ++i) CHECK(v.token(i) == std::string(Vocabulary::kSpecialForms[std::size_t(i)]));
  CHECK(v.id_of("a") == 5);
  CHECK(v.id_of("b") == 6);

  auto tie = build_vocabulary({"z y x"}, 1);
  CHECK(tie.token(5) == "x");
  CHECK(tie.token(7) == "z");
}

TEST_CASE("min_count threshold sends rare tokens to UNK") {
  auto v = build_vocabulary({"a b a"}, 2);
  CHECK(v.size() == 6);
  CHECK(v.id_of("b") == Vocabulary::kUnk);
  auto e = encode(v, "a b");
  CHECK(e.ids == std::vector<TokenId>{Vocabulary::kCls, 5, Vocabulary::kUnk, Vocabulary::kSep});
}

TEST_CASE("vocabulary size on the bundled corpus matches an independent token count") {
  // Frozen from a separate counting script over the first 200 lines.
  const auto lines = first_lines(200);
  CHECK(build_vocabulary(lines, 1).size() == 99);
  CHECK(build_vocabulary(lines, 5).size() == 91);
  CHECK(build_vocabulary(lines, 10).size() == 71);
  CHECK(build_vocabulary(lines, 20).size() == 33);
  auto v = build_vocabulary(lines, 1);
  CHECK(v.token(5) == "the");
  CHECK(v.token(6) == ".");
  CHECK(v.token(7) == "felt");
}

TEST_CASE("build_vocabulary errors") {
  CHECK_THROWS_AS(build_vocabulary({"   ", ""}, 1), Error);
  try {
    build_vocabulary({}, 1);
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyCorpus);
  }
}

TEST_CASE("vocabulary invariants hold and duplicate tokens are rejected") {
  auto v = build_vocabulary(first_lines(600), 1);
  for (TokenId i = 0; i < v.size(); ++i) CHECK(v.id_of(v.token(i)) == i);
  auto tokens = v.tokens();
  tokens.push_back("the");
  CHECK_THROWS_AS(Vocabulary{tokens}, Error);
}

TEST_CASE("encode single sentence layout") {
  auto v = build_vocabulary({"a b"}, 1);
  auto e = encode(v, "a b");
  REQUIRE(e.rows() == 4);
  CHECK(e.ids[0] == Vocabulary::kCls);
  CHECK(e.ids[3] == Vocabulary::kSep);
  CHECK(e.attackable == std::vector<Index>{1, 2});
  CHECK(e.segments.size() == 1);
  CHECK(e.segments[0].begin == 1);
  CHECK(e.segments[0].end == 3);
  check_onehot(e);
}

TEST_CASE("encode paired layout targets only the chosen slot") {
  auto v = build_vocabulary({"a b"}, 1);
  auto e = encode(v, "a", std::string("b"), Slot::Second);
  CHECK(e.ids == std::vector<TokenId>{Vocabulary::kCls, v.id_of("a"), Vocabulary::kSep,
                                      Vocabulary::kSep, v.id_of("b"), Vocabulary::kSep});
  CHECK(e.attackable == std::vector<Index>{4});
  auto f = encode(v, "a", std::string("b"), Slot::First);
  CHECK(f.attackable == std::vector<Index>{1});
  check_onehot(e);
}

TEST_CASE("encode maps unseen words to UNK and keeps them out of the attack set") {
  auto v = build_vocabulary({"a b"}, 1);
  auto e = encode(v, "a zzz");
  CHECK(e.onehot(2, Vocabulary::kUnk) == 1.0);
  CHECK(e.attackable == std::vector<Index>{1});
}

TEST_CASE("encode rejects empty slots") {
  auto v = build_vocabulary({"a b"}, 1);
  auto code_of = [&](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoFailure;
  };
  CHECK(code_of([&] { encode(v, "  "); }) == Errc::EmptySentence);
  CHECK(code_of([&] { encode(v, "a", std::string("")); }) == Errc::EmptySentence);
}

TEST_CASE("decode renders specials by surface form") {
  auto v = build_vocabulary({"a b"}, 1);
  CHECK(decode(v, encode(v, "a b").ids) == "<cls> a b <sep>");
  CHECK(decode(v, {v.id_of("a"), v.id_of("b")}) == "a b");
  CHECK_THROWS_AS(decode(v, {static_cast<TokenId>(v.size())}), Error);
}

TEST_CASE("argmax decode reproduces 100 random corpus lines") {
  const auto lines = first_lines(600);
  auto v = build_vocabulary(lines, 1);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, lines.size() - 1);
  for (int i = 0; i < 100; ++i) {
    const auto& line = lines[pick(rng)];
    auto e = encode(v, line);
    auto ids = argmax_rows(e.onehot);
    CHECK(ids == e.ids);
    std::string expected;
    for (const auto& t : tokenize(line)) expected += (expected.empty() ? "" : " ") + t;
    CHECK(decode(v, e.target_ids()) == expected);
    CHECK(decode(v, ids) == "<cls> " + expected + " <sep>");
  }
}

TEST_CASE("baseline replaces bodies with REF and is idempotent") {
  auto v = build_vocabulary({"a b"}, 1);
  auto e = encode(v, "a b");
  auto b = baseline_encoding(e, v);
  CHECK(b.ids == std::vector<TokenId>{Vocabulary::kCls, Vocabulary::kRef, Vocabulary::kRef,
                                      Vocabulary::kSep});
  CHECK(b.segments[0].begin == e.segments[0].begin);
  CHECK(b.segments[0].end == e.segments[0].end);
  check_onehot(b);

  auto p = baseline_encoding(encode(v, "a b", std::string("b a")), v);
  CHECK(p.ids == std::vector<TokenId>{Vocabulary::kCls, Vocabulary::kRef, Vocabulary::kRef,
                                      Vocabulary::kSep, Vocabulary::kSep, Vocabulary::kRef,
                                      Vocabulary::kRef, Vocabulary::kSep});
  auto bb = baseline_encoding(b, v);
  CHECK(bb.ids == b.ids);
  CHECK(bb.onehot == b.onehot);
}

TEST_CASE("special surface forms survive a decode/encode round trip") {
  auto v = build_vocabulary({"a b"}, 1);
  auto e = encode(v, "a <cls> <unk> b");
  CHECK(e.ids[2] == Vocabulary::kCls);
  CHECK(e.ids[3] == Vocabulary::kUnk);
  CHECK(e.attackable == std::vector<Index>{1, 4});
}

TEST_CASE("vocabulary save/load keeps the fingerprint") {
  obstinate::testing::TempDir dir;
  auto v = build_vocabulary(first_lines(50), 1);
  v.save(dir.file("v.txt"));
  auto w = Vocabulary::load(dir.file("v.txt"));
  CHECK(w.tokens() == v.tokens());
  CHECK(w.fingerprint() == v.fingerprint());
  CHECK(build_vocabulary({"x"}, 1).fingerprint() != v.fingerprint());
}

TEST_CASE("read_corpus parses single and paired lines") {
  obstinate::testing::TempDir dir;
  {
    std::ofstream f(dir.file("c.tsv"));
    f << "1\tgood film\n0\ta\tb\n\n";
  }
  auto c = read_corpus(dir.file("c.tsv"));
  REQUIRE(c.size() == 2);
  CHECK(c[0].label == 1);
  CHECK(!c[0].second);
  CHECK(*c[1].second == "b");
  {
    std::ofstream f(dir.file("bad.tsv"));
    f << "x\tgood\n";
  }
  CHECK_THROWS_AS(read_corpus(dir.file("bad.tsv")), Error);
}
