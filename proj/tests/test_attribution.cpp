#include <doctest.h>

#include <algorithm>
#include <random>

#include "desk.hpp"
#include "obstinate/attribution.hpp"

using namespace obstinate;
using obstinate::testing::desk;

namespace {

double completeness_gap(const Checkpoint& ck, const Vocabulary& v, const EncodedInput& e, int m,
                        double* scale = nullptr) {
  const auto iv = integrated_gradients(ck, v, e, m);
  const int label = forward(ck, e).predicted_label;
  const auto base = baseline_encoding(e, v);
  const double diff = forward(ck, e).logits(label) - forward(ck, base).logits(label);
  if (scale != nullptr) *scale = std::max(1.0, std::abs(diff));
  return std::abs(iv.per_word.sum() - diff);
}

ImportanceVector scores(std::vector<double> values, std::vector<Index> rows) {
  ImportanceVector iv;
  iv.per_word = Eigen::Map<Eigen::VectorXd>(values.data(), Index(values.size()));
  iv.ranking = rank_rows(iv.per_word, rows);
  return iv;
}

}  // namespace

TEST_CASE("integrated gradients of a linear function are exact for any step count") {
  Eigen::MatrixXd w(2, 3);
  w << 0.5, -1.25, 3.0, 0.0, 2.5, -0.75;
  Eigen::MatrixXd x(2, 3), base(2, 3);
  x << 1, 0, 0, 0, 1, 0;
  base << 0, 0, 1, 0, 0, 1;
  for (int m : {1, 3, 7, 50}) {
    auto ig = integrated_gradients<double>(x, base, m, [&](const Eigen::MatrixXd&) { return w; });
    CHECK(ig == Eigen::MatrixXd((x - base).cwiseProduct(w)));
  }
}

TEST_CASE("integrated gradients vanish when input equals baseline") {
  const auto& d = desk();
  auto e = encode(d.vocab, "the film was superb .");
  auto b = baseline_encoding(e, d.vocab);
  auto iv = integrated_gradients(d.trained.checkpoint, d.vocab, b, 20);
  CHECK(iv.per_word.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("completeness holds on the desk model and improves with steps") {
  const auto& d = desk();
  const auto& ck = d.trained.checkpoint;
  for (std::size_t i : {0u, 5u, 17u}) {
    const auto e = encode(d.vocab, d.corpus[i].first);
    double scale = 1.0;
    const double gap500 = completeness_gap(ck, d.vocab, e, 500, &scale);
    CHECK(gap500 <= 1e-3 * scale);
    CHECK(gap500 <= completeness_gap(ck, d.vocab, e, 10) + 1e-12);
  }
}

TEST_CASE("importance vector ranks the attackable rows only") {
  const auto& d = desk();
  const auto e = encode(d.vocab, "the movie is great", std::string("the plot was dull"), Slot::Second);
  const auto iv = integrated_gradients(d.trained.checkpoint, d.vocab, e, 30);
  CHECK(iv.per_word.size() == e.rows());
  CHECK(iv.per_word.allFinite());
  auto sorted = iv.ranking;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == e.attackable);
  CHECK(iv.steps_used == 30);
  for (std::size_t i = 1; i < iv.ranking.size(); ++i)
    CHECK(iv.per_word(iv.ranking[i - 1]) >= iv.per_word(iv.ranking[i]));
}

TEST_CASE("select_targets uses signed scores") {
  const auto iv = scores({0.0, 0.5, -2.0, 0.9, 0.0}, {1, 2, 3});
  CHECK(select_targets(iv, 1) == std::vector<Index>{3});
  CHECK(select_targets(iv, 2) == std::vector<Index>{3, 1});
  CHECK(select_targets(iv, 3) == std::vector<Index>{3, 1, 2});
  try {
    select_targets(iv, 4);
    FAIL("expected KTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::KTooLarge);
  }
  CHECK_THROWS_AS(select_targets(iv, 0), Error);
}

TEST_CASE("ties go to the lower row") {
  const auto iv = scores({0.0, 1.0, 1.0, 1.0}, {3, 1, 2});
  CHECK(iv.ranking == std::vector<Index>{1, 2, 3});
}

TEST_CASE("ranking is scale free and selections are prefixes") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> pos(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(12);
    for (auto& x : v) x = n(rng);
    std::vector<Index> rows = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto iv = scores(v, rows);
    const double c = pos(rng);
    for (auto& x : v) x *= c;
    CHECK(scores(v, rows).ranking == iv.ranking);
    for (int k = 1; k < 10; ++k) {
      auto a = select_targets(iv, k), b = select_targets(iv, k + 1);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
  }
}
