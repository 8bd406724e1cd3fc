#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "snd/rng.hpp"

using namespace snd;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams are independent of draw interleaving") {
  Rng base(7);
  Rng s1 = base.derive(1);
  Rng s2 = base.derive(2);
  const auto a1 = s1.next_u64();
  const auto a2 = s2.next_u64();

  Rng base2(7);
  Rng t2 = base2.derive(2);
  Rng t1 = base2.derive(1);
  REQUIRE(t1.next_u64() == a1);
  REQUIRE(t2.next_u64() == a2);
}

TEST_CASE("uniform_int covers its range uniformly") {
  Rng rng(3);
  std::map<int, int> counts;
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) counts[static_cast<int>(rng.uniform_int(5, 20))]++;
  REQUIRE(counts.size() == 16);
  for (auto [v, c] : counts) {
    REQUIRE(v >= 5);
    REQUIRE(v <= 20);
    REQUIRE(std::abs(c - draws / 16.0) < 5.0 * std::sqrt(draws / 16.0));
  }
}

TEST_CASE("uniform stays in [0,1)") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("sampling without replacement is unbiased and sorted") {
  Rng rng(5);
  std::vector<int> freq(10, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto s = sample_without_replacement(10, 3, rng);
    REQUIRE(s.size() == 3);
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    std::set<int> uniq(s.begin(), s.end());
    REQUIRE(uniq.size() == 3);
    for (int v : s) freq[static_cast<std::size_t>(v)]++;
  }
  for (int v = 0; v < 10; ++v)
    REQUIRE(std::abs(freq[static_cast<std::size_t>(v)] / double(draws) - 0.3) < 0.02);
}
