#include "distance.hpp"

#include <cmath>
#include <optional>
#include <random>

#include "doctest.h"
#include "error.hpp"
#include "support.hpp"
#include "text.hpp"

using namespace aepo;

namespace {

double cos_d(std::vector<float> u, std::vector<float> v) { return cosine_distance(u, v); }

struct NgramFixture {
  const char* a;
  const char* b;
  int max_n;
  double expected;
};

// Values from tests/oracles/ngram_oracle.py.
const NgramFixture kNgramFixtures[] = {
    {"a b c d", "a b c e", 1, 0.25},
    {"a b c d", "a b c e", 4, 0.3419629935237538},
    {"the cat sat on the mat", "the cat sat on a mat", 4, 0.36105689575372757},
    {"the cat sat on the mat", "the cat", 2, 0.8646647167633873},
    {"one two three four five", "five four three two one", 4, 0.6406958880369158},
    {"x y z", "x y z w v", 3, 0.486582880967408},
    {"a a a a", "a", 1, 0.950212931632136},
    {"Hello world", "hello world", 2, 0.5},
    {"tab\tseparated　words here", "tab separated words there", 4, 0.3419629935237538},
    {"sun rises in the east and sets in the west", "the sun sets in the west", 4, 0.6566572792380285},
};

}  // namespace

TEST_CASE("cosine distance examples") {
  CHECK(cos_d({1, 0}, {1, 0}) == 0.0);
  CHECK(cos_d({1, 0}, {0, 1}) == 1.0);
  CHECK(cos_d({1, 0}, {-1, 0}) == 1.0);
  CHECK(cos_d({3, 4}, {4, 3}) == doctest::Approx(1.0 - 24.0 / 25.0).epsilon(1e-12));
}

TEST_CASE("cosine distance rejects zero norm and dimension mismatch") {
  CHECK_THROWS_AS(cos_d({0, 0}, {1, 0}), Error);
  CHECK_THROWS_AS(cos_d({1, 0, 0}, {1, 0}), Error);
}

TEST_CASE("cosine distance of positive multiples is exactly zero") {
  std::mt19937_64 rng(7);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<float> u(16);
    for (auto& x : u) x = g(rng);
    std::vector<float> v = u;
    const float c = scale(rng);
    for (auto& x : v) x *= c;
    CHECK(cosine_distance(u, v) == 0.0);
    CHECK(cosine_distance(u, v) == cosine_distance(v, u));
  }
}

TEST_CASE("tokenizer splits on Unicode whitespace only") {
  const auto toks = tokenize("  a b c\td　e​f  ");
  REQUIRE(toks.size() == 5);
  CHECK(toks[0] == "a");
  CHECK(toks[4] == "e​f");  // zero-width space is not whitespace
  CHECK(tokenize("").empty());
  CHECK(tokenize(" \n\t ").empty());
  CHECK(tokenize("Café CAFÉ").size() == 2);
}

TEST_CASE("ngram distance examples") {
  CHECK(ngram_overlap_distance("a b c", "a b c") == 0.0);
  CHECK(ngram_overlap_distance("x y z", "p q r", 2) == 1.0);
  CHECK(ngram_overlap_distance("a b c d", "a b c e", 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(ngram_overlap_distance("", "") == 0.0);
  CHECK(ngram_overlap_distance("", "a") == 1.0);
  CHECK(ngram_overlap_distance("a", "") == 1.0);
  CHECK_THROWS_AS(ngram_overlap_distance("a", "b", 0), Error);
}

TEST_CASE("ngram distance matches the frozen oracle fixtures") {
  for (const auto& f : kNgramFixtures) {
    CAPTURE(f.a);
    CAPTURE(f.b);
    CHECK(ngram_overlap_distance(f.a, f.b, f.max_n) == doctest::Approx(f.expected).epsilon(1e-12));
  }
}

TEST_CASE("ngram distance is symmetric and bounded on random texts") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"a", "b", "c", "d", "the", "cat", "été"};
  std::uniform_int_distribution<size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<int> len(0, 9);
  auto sample = [&] {
    std::string s;
    for (int i = len(rng); i > 0; --i) s += words[pick(rng)] + " ";
    return s;
  };
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = sample();
    const auto b = sample();
    const int n = 1 + trial % 4;
    const double d = ngram_overlap_distance(a, b, n);
    CHECK(d == ngram_overlap_distance(b, a, n));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(ngram_overlap_distance(a, a, n) == 0.0);
  }
}

TEST_CASE("directed score is not symmetric but the distance is") {
  const double ab = ngram_overlap_score("the cat", "the cat sat on the mat", 2);
  const double ba = ngram_overlap_score("the cat sat on the mat", "the cat", 2);
  CHECK(ab != ba);
  CHECK(ngram_overlap_distance("the cat", "the cat sat on the mat", 2) == doctest::Approx(1.0 - std::min(ab, ba)));
}

TEST_CASE("build_distance_matrix from embeddings and texts") {
  CandidatePool pool{{"p", "q"}, {"x", "y", "z"}};
  EmbeddingSet set{"p", {{1, 0}, {0, 1}, {1, 0}}};
  const auto m = build_distance_matrix(pool, DistanceKind::kCosine, &set);
  CHECK(m.entries() == std::vector<double>{0, 1, 0, 1, 0, 1, 0, 1, 0});

  CandidatePool same{{"s", "q"}, {"hello there", "hello there"}};
  const auto z = build_distance_matrix(same, DistanceKind::kNgram, nullptr);
  CHECK(z.entries() == std::vector<double>{0, 0, 0, 0});

  CHECK_THROWS_AS(build_distance_matrix(pool, DistanceKind::kCosine, nullptr), Error);
  CHECK_THROWS_AS(build_distance_matrix(pool, DistanceKind::kNgram, &set), Error);
}

TEST_CASE("ngram matrix equals element-wise distances") {
  CandidatePool pool{{"p", "q"}, {kNgramFixtures[2].a, kNgramFixtures[2].b, "the", "", "mat the cat"}};
  const auto m = build_distance_matrix(pool, DistanceKind::kNgram, nullptr, 3);
  for (size_t i = 0; i < pool.size(); ++i) {
    for (size_t j = 0; j < pool.size(); ++j) {
      CHECK(m(i, j) == (i == j ? 0.0 : ngram_overlap_distance(pool.responses[i], pool.responses[j], 3)));
    }
  }
}

TEST_CASE("element function evaluated once per unordered pair") {
  std::map<std::pair<size_t, size_t>, int> calls;
  build_distance_matrix(5, [&](size_t i, size_t j) {
    ++calls[{i, j}];
    return 0.5;
  });
  CHECK(calls.size() == 10);
  for (const auto& [ij, count] : calls) {
    CHECK(ij.first < ij.second);
    CHECK(count == 1);
  }
}

TEST_CASE("from_dense enforces the matrix invariants") {
  CHECK_NOTHROW(DistanceMatrix::from_dense(2, {0, 0.3, 0.3, 0}));
  auto code = [](size_t n, std::vector<double> e) {
    try {
      DistanceMatrix::from_dense(n, std::move(e));
    } catch (const Error& err) {
      return err.code();
    }
    return ErrorCode::kIo;
  };
  CHECK(code(2, {0, 0.3, 0.4, 0}) == ErrorCode::kInvariant);     // asymmetric
  CHECK(code(2, {0.1, 0.3, 0.3, 0}) == ErrorCode::kInvariant);   // diagonal
  CHECK(code(2, {0, 1.5, 1.5, 0}) == ErrorCode::kInvariant);     // range
  CHECK(code(2, {0, NAN, NAN, 0}) == ErrorCode::kInvariant);     // not a number
  CHECK(code(2, {0, 0.3, 0.3}) == ErrorCode::kInvalidArgument);  // size
}

TEST_CASE("a faulty asymmetric element function is caught") {
  // The builder mirrors each pair, so the asymmetric function is applied
  // through from_dense exactly as an element-wise materialisation would.
  const auto faulty = [](size_t i, size_t j) { return i < j ? 0.2 : 0.7; };
  std::vector<double> e(9, 0.0);
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j)
      if (i != j) e[i * 3 + j] = faulty(i, j);
  CHECK_THROWS_AS(DistanceMatrix::from_dense(3, e), Error);
  CHECK_THROWS_AS(build_distance_matrix(2, [](size_t, size_t) { return 2.0; }), Error);
}

TEST_CASE("random matrices satisfy the invariants") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  for (int trial = 0; trial < 50; ++trial) {
    CandidatePool pool{{"p", "q"}, std::vector<std::string>(6, "r")};
    EmbeddingSet set{"p", std::vector<std::vector<float>>(6, std::vector<float>(8))};
    for (auto& v : set.vectors)
      for (auto& x : v) x = g(rng);
    const auto m = build_distance_matrix(pool, DistanceKind::kCosine, &set);
    for (size_t i = 0; i < 6; ++i) {
      CHECK(m(i, i) == 0.0);
      for (size_t j = 0; j < 6; ++j) {
        CHECK(m(i, j) == m(j, i));
        CHECK(m(i, j) >= 0.0);
        CHECK(m(i, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("metric violations") {
  const auto bad = DistanceMatrix::from_dense(3, {0, 0.1, 0.9, 0.1, 0, 0.1, 0.9, 0.1, 0});
  const auto v = metric_violations(bad);
  CHECK(std::find(v.begin(), v.end(), TriangleViolation{0, 1, 2}) != v.end());

  CHECK(metric_violations(DistanceMatrix::from_dense(1, {0})).empty());

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = DistanceMatrix::from_dense(7, testing::euclidean_dense(7, rng));
    CHECK(metric_violations(m, 1e-12).empty());
  }
}
