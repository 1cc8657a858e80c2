// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "caplab/fact_space.hpp"

using namespace caplab;

TEST_CASE("fact space rejects an empty universe") {
  CHECK_THROWS_AS(FactSpace(0), std::invalid_argument);
  CHECK(FactSpace(63).exact_mode());
  CHECK_FALSE(FactSpace(64).exact_mode());
}

TEST_CASE("subset construction and membership") {
  const FactSpace space(10);
  auto s = FactSubset::from_indices(space, {1, 4, 7});
  CHECK(s.size() == 3);
  CHECK(s.contains(4));
  CHECK_FALSE(s.contains(5));
  CHECK(s.indices() == std::vector<uint32_t>{1, 4, 7});
  CHECK_THROWS_AS(s.add(10), std::out_of_range);

  // add is idempotent
  s.add(4);
  CHECK(s.size() == 3);
}

TEST_CASE("subset relations match the set definitions") {
  const FactSpace space(6);
  const auto a = FactSubset::from_indices(space, {1, 2});
  const auto b = FactSubset::from_indices(space, {0, 1, 2, 3});
  auto rel = subset_relations(a, b);
  CHECK(rel.is_subset);
  CHECK(rel.intersection_size == 2);

  const auto empty = FactSubset(space);
  rel = subset_relations(empty, empty);
  CHECK(rel.is_subset);  // empty set is subset of everything
  CHECK(rel.intersection_size == 0);

  const auto c = FactSubset::from_indices(space, {0, 4});
  const auto d = FactSubset::from_indices(space, {1, 2, 3});
  rel = subset_relations(c, d);
  CHECK_FALSE(rel.is_subset);
  CHECK(rel.intersection_size == 0);
}

TEST_CASE("subset relations reject mismatched spaces") {
  const auto a = FactSubset(FactSpace(5));
  const auto b = FactSubset(FactSpace(6));
  CHECK_THROWS_AS(subset_relations(a, b), DomainMismatchError);
}

TEST_CASE("sparse representation mirrors the dense one") {
  const FactSpace big(100);  // beyond the bit-pattern limit
  auto a = FactSubset::from_indices(big, {3, 64, 99});
  auto b = FactSubset::from_indices(big, {3, 64});
  CHECK(a.size() == 3);
  CHECK(a.contains(99));
  CHECK(b.is_subset_of(a));
  CHECK_FALSE(a.is_subset_of(b));
  CHECK(a.intersection_size(b) == 2);
  CHECK(a.set_difference(b).indices() == std::vector<uint32_t>{99});
  CHECK(a.set_union(b).size() == 3);
  CHECK(FactSubset::full(big).size() == 100);
  CHECK_THROWS_AS(a.mask(), std::domain_error);
}

TEST_CASE("sample_subset respects cardinality bounds") {
  const FactSpace space(5);
  Rng rng(11);
  CHECK(sample_subset(space, 0, rng).empty());
  CHECK(sample_subset(space, 5, rng) == FactSubset::full(space));
  CHECK_THROWS_AS(sample_subset(space, 6, rng), std::invalid_argument);
}

TEST_CASE("sample_subset is uniform over 2-subsets of 4 slots") {
  const FactSpace space(4);
  Rng rng(7);
  const int draws = 60000;
  std::map<uint64_t, int> counts;
  for (int i = 0; i < draws; ++i) {
    counts[sample_subset(space, 2, rng).mask()] += 1;
  }
  CHECK(counts.size() == 6);
  for (const auto& [mask, count] : counts) {
    const double freq = static_cast<double>(count) / draws;
    CHECK(std::abs(freq - 1.0 / 6.0) < 0.01);
  }
}

TEST_CASE("sample_subset uniformity within 4 standard errors (N=6, k=2)") {
  const FactSpace space(6);
  Rng rng(123);
  const int draws = 100000;
  std::map<uint64_t, int> counts;
  for (int i = 0; i < draws; ++i) {
    counts[sample_subset(space, 2, rng).mask()] += 1;
  }
  const double p = 1.0 / 15.0;
  const double se = std::sqrt(p * (1.0 - p) / draws);
  CHECK(counts.size() == 15);
  for (const auto& [mask, count] : counts) {
    const double freq = static_cast<double>(count) / draws;
    CHECK(std::abs(freq - p) < 4.0 * se);
  }
}

TEST_CASE("identical seeds give identical draw sequences") {
  const FactSpace space(40);
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 200; ++i) {
    CHECK(sample_subset(space, 7, a) == sample_subset(space, 7, b));
  }
}

TEST_CASE("derived worker streams differ from the master stream") {
  Rng master(5);
  Rng w0 = master.derive(0);
  Rng w1 = master.derive(1);
  CHECK(w0.next_u64() != w1.next_u64());
}

TEST_CASE("enumeration yields every k-subset exactly once") {
  const FactSpace space(4);
  SubsetEnumerator en(space, 2);
  CHECK(en.total() == 6);
  std::set<uint64_t> seen;
  FactSubset s{space};
  uint64_t prev = 0;
  bool first = true;
  while (en.next(s)) {
    CHECK(s.size() == 2);
    if (!first) {
      CHECK(s.mask() > prev);  // ascending bit-pattern order
    }
    first = false;
    prev = s.mask();
    seen.insert(s.mask());
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("enumerating k=0 yields exactly the empty subset") {
  const FactSpace space(3);
  SubsetEnumerator en(space, 0);
  FactSubset s{space};
  int count = 0;
  while (en.next(s)) {
    CHECK(s.empty());
    ++count;
  }
  CHECK(count == 1);
}

TEST_CASE("enumeration count equals binomial for all N <= 12") {
  for (uint32_t n = 1; n <= 12; ++n) {
    const FactSpace space(n);
    for (uint32_t k = 0; k <= n; ++k) {
      uint64_t count = 0;
      std::set<uint64_t> distinct;
      for_each_subset(space, k, [&](const FactSubset& s) {
        ++count;
        distinct.insert(s.mask());
      });
      CHECK(count == binomial(n, k));
      CHECK(distinct.size() == count);
    }
  }
}

TEST_CASE("enumeration cap is enforced and appears in the error") {
  const FactSpace space(30);
  try {
    SubsetEnumerator en(space, 15, 1000);
    FAIL("expected EnumerationTooLargeError");
  } catch (const EnumerationTooLargeError& e) {
    CHECK(std::string(e.what()).find("1000") != std::string::npos);
  }
}

TEST_CASE("caption facts require disjoint correct and error slots") {
  const FactSpace space(8);
  const auto correct = FactSubset::from_indices(space, {0, 1});
  const auto errors = FactSubset::from_indices(space, {1, 2});
  CHECK_THROWS_AS(CaptionFacts(correct, errors), std::invalid_argument);
}

TEST_CASE("witness invariants") {
  const FactSpace space(8);
  const auto slots = FactSubset::from_indices(space, {0, 1, 2});
  const auto bad_taint = FactSubset::from_indices(space, {5});
  CHECK_THROWS_AS(Witness(slots, bad_taint, WitnessMode::override_all),
                  std::invalid_argument);
  const auto taint = FactSubset::from_indices(space, {1});
  CHECK_THROWS_AS(Witness(slots, taint, WitnessMode::ideal),
                  std::invalid_argument);
  const Witness w(slots, taint, WitnessMode::override_all);
  CHECK(w.clean().indices() == std::vector<uint32_t>{0, 2});
  CHECK(w.size() == 3);
}
