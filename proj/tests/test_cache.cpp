#include <doctest.h>

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfdc/cache.hpp"
#include "oracles.hpp"

using namespace dfdc;

namespace {

std::vector<std::string> keys_of(const CacheState& c) {
  std::vector<std::string> out;
  for (const auto& e : c.entries()) out.push_back(e.key);
  std::sort(out.begin(), out.end());
  return out;
}

// Fills `c` with the given keys at rounds 1, 2, ...
std::uint64_t fill(CacheState& c, const std::vector<std::string>& keys) {
  std::uint64_t t = 0;
  for (const auto& k : keys) {
    ++t;
    if (access(c, k, t) == AccessResult::miss) {
      insert_with_eviction(c, k, std::nullopt, t);
    }
  }
  return t;
}

std::vector<std::string> random_trace(std::mt19937_64& g, std::size_t alphabet, std::size_t len) {
  std::vector<std::string> t(len);
  for (auto& k : t) k = "k" + std::to_string(g() % alphabet);
  return t;
}

// Replays `trace` through CacheState, evicting with `expert`, and returns the
// victim keys.
std::vector<std::string> library_evictions(const std::vector<std::string>& trace, std::size_t cap,
                                           Expert expert) {
  CacheState c(cap);
  std::vector<std::string> out;
  std::uint64_t t = 0;
  for (const auto& key : trace) {
    ++t;
    if (c.access(key, t) == AccessResult::hit) continue;
    if (c.full()) {
      const std::size_t slot = advise(c, expert);
      out.push_back(c.entry(slot).key);
      c.insert_into_slot(key, slot, t);
    } else {
      c.insert_with_eviction(key, std::nullopt, t);
    }
    REQUIRE(c.size() <= cap);
  }
  return out;
}

EvictionRecord rec(const std::string& key, double lru = 1.0, double lfu = 0.0) {
  EvictionRecord r;
  r.key = key;
  r.expert_match = {lru, lfu};
  return r;
}

}  // namespace

TEST_SUITE("cache_policies") {

TEST_CASE("access: hit refreshes recency") {
  CacheState c(2);
  fill(c, {"A", "B"});
  CHECK(access(c, "A", 3) == AccessResult::hit);
  CHECK(c.entry(*c.slot_of("A")).recency == 3);
  CHECK(c.entry(*c.slot_of("A")).frequency == 2);
  CHECK(lru_advise(c) == *c.slot_of("B"));
}

TEST_CASE("access: miss leaves the cache unchanged") {
  CacheState c(2);
  fill(c, {"A", "B"});
  const auto before = keys_of(c);
  CHECK(access(c, "C", 3) == AccessResult::miss);
  CHECK(keys_of(c) == before);
  CHECK(c.entry(*c.slot_of("A")).recency == 1);
}

TEST_CASE("access: empty cache misses") {
  CacheState c(3);
  CHECK(access(c, "A", 1) == AccessResult::miss);
  CHECK(c.size() == 0);
}

TEST_CASE("access: rounds must increase") {
  CacheState c(2);
  fill(c, {"A", "B"});
  CHECK_THROWS_AS(access(c, "A", 2), std::invalid_argument);
}

TEST_CASE("insert_with_eviction examples") {
  CacheState c(2);
  fill(c, {"A", "B"});
  const std::size_t b_slot = *c.slot_of("B");
  CHECK(insert_with_eviction(c, "C", "B", 3) == b_slot);
  CHECK(keys_of(c) == std::vector<std::string>{"A", "C"});

  CacheState d(2);
  fill(d, {"A"});
  insert_with_eviction(d, "B", std::nullopt, 2);
  CHECK(keys_of(d) == std::vector<std::string>{"A", "B"});
}

TEST_CASE("insert_with_eviction errors") {
  CacheState c(2);
  fill(c, {"A", "B"});
  CHECK_THROWS_AS(insert_with_eviction(c, "C", "Z", 3), std::invalid_argument);
  CHECK_THROWS_AS(insert_with_eviction(c, "C", std::nullopt, 4), std::invalid_argument);
  CHECK_THROWS_AS(insert_with_eviction(c, "A", "B", 5), std::invalid_argument);
  CHECK_THROWS(c.insert_into_slot("C", 7, 6));
  CHECK(keys_of(c) == std::vector<std::string>{"A", "B"});
  CHECK_THROWS_AS(CacheState(0), std::invalid_argument);
}

TEST_CASE("re-inserted key starts with frequency 1") {
  CacheState c(2);
  fill(c, {"A", "A", "A", "B"});
  insert_with_eviction(c, "C", "A", 5);
  insert_with_eviction(c, "A", "B", 6);
  CHECK(c.entry(*c.slot_of("A")).frequency == 1);
}

TEST_CASE("lru_advise examples") {
  CacheState a(2);
  fill(a, {"A", "B", "A"});
  CHECK(a.entry(lru_advise(a)).key == "B");

  CacheState b(2);
  fill(b, {"A", "B"});
  CHECK(b.entry(lru_advise(b)).key == "A");
}

TEST_CASE("lfu_advise examples") {
  CacheState a(2);
  fill(a, {"A", "A", "B"});
  CHECK(a.entry(lfu_advise(a)).key == "B");

  CacheState b(2);
  fill(b, {"A", "B"});
  CHECK(b.entry(lfu_advise(b)).key == "A");
}

TEST_CASE("advice needs a full cache") {
  CacheState c(3);
  fill(c, {"A", "B"});
  CHECK_THROWS_AS(lru_advise(c), std::logic_error);
  CHECK_THROWS_AS(lfu_advise(c), std::logic_error);
}

TEST_CASE("property: eviction sequences match linear-scan references") {
  std::mt19937_64 g(31);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t cap = 1 + g() % 8;
    const auto trace = random_trace(g, 2 + g() % 24, 300);
    CHECK(library_evictions(trace, cap, Expert::lru) == oracle::eviction_sequence(trace, cap, false));
    CHECK(library_evictions(trace, cap, Expert::lfu) == oracle::eviction_sequence(trace, cap, true));
  }
}

TEST_CASE("property: advice always names a resident key") {
  std::mt19937_64 g(37);
  CacheState c(4);
  std::uint64_t t = 0;
  for (const auto& key : random_trace(g, 12, 2000)) {
    ++t;
    if (c.access(key, t) == AccessResult::hit) continue;
    if (!c.full()) {
      c.insert_with_eviction(key, std::nullopt, t);
      continue;
    }
    for (Expert e : {Expert::lru, Expert::lfu}) {
      const std::size_t s = advise(c, e);
      REQUIRE(s < c.size());
      CHECK(c.contains(c.entry(s).key));
    }
    c.insert_into_slot(key, advise(c, (t % 2) ? Expert::lru : Expert::lfu), t);
    CHECK(c.size() == 4);
  }
}

TEST_CASE("history: FIFO bound") {
  EvictionHistory h(2);
  h.record(rec("A"));
  h.record(rec("B"));
  h.record(rec("C"));
  CHECK(h.keys() == std::vector<std::string>{"C", "B"});
  CHECK_FALSE(h.query("A"));
}

TEST_CASE("history: re-recording replaces and moves to the front") {
  EvictionHistory h(3);
  h.record(rec("A"));
  h.record(rec("A", 0.0, 1.0));
  CHECK(h.size() == 1);
  CHECK(h.keys() == std::vector<std::string>{"A"});
  CHECK(h.query("A")->record.expert_match == std::vector<double>{0.0, 1.0});
}

TEST_CASE("history: query positions") {
  EvictionHistory h(5);
  CHECK(h.empty());
  h.record(rec("A"));
  CHECK(h.keys() == std::vector<std::string>{"A"});
  h.record(rec("B"));
  h.record(rec("C"));
  CHECK(history_query(h, "A")->delay == 3);
  CHECK(history_query(h, "C")->delay == 1);
  CHECK_FALSE(history_query(h, "D"));
}

TEST_CASE("history: take consumes the record") {
  EvictionHistory h(4);
  h.record(rec("A"));
  h.record(rec("B"));
  const auto m = h.take("A");
  REQUIRE(m);
  CHECK(m->delay == 2);
  CHECK_FALSE(h.query("A"));
  CHECK(h.query("B")->delay == 1);
  CHECK_FALSE(h.take("A"));
  CHECK_THROWS_AS(EvictionHistory(0), std::invalid_argument);
}

TEST_CASE("property: record then query gives d = 1 with the stored match") {
  std::mt19937_64 g(41);
  EvictionHistory h(6);
  for (int i = 0; i < 500; ++i) {
    const std::string k = "k" + std::to_string(g() % 15);
    const double m = static_cast<double>(g() % 2);
    history_record(h, rec(k, m, 1.0 - m));
    const auto q = history_query(h, k);
    REQUIRE(q);
    CHECK(q->delay == 1);
    CHECK(q->record.expert_match == std::vector<double>{m, 1.0 - m});
  }
}

TEST_CASE("property: history matches a naive list") {
  std::mt19937_64 g(43);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t cap = 1 + g() % 10;
    EvictionHistory h(cap);
    oracle::NaiveHistory ref(cap);
    for (int i = 0; i < 3000; ++i) {
      const std::string k = "k" + std::to_string(g() % 25);
      switch (g() % 3) {
        case 0:
          h.record(rec(k));
          ref.record(k);
          break;
        case 1: {
          const auto m = h.take(k);
          const auto d = ref.position(k);
          CHECK(m.has_value() == d.has_value());
          if (m && d) CHECK(m->delay == *d);
          ref.erase(k);
          break;
        }
        default: {
          const auto m = h.query(k);
          const auto d = ref.position(k);
          CHECK(m.has_value() == d.has_value());
          if (m && d) {
            CHECK(m->delay == *d);
            CHECK(m->delay >= 1);
            CHECK(m->delay <= cap);
          }
        }
      }
      CHECK(h.size() <= cap);
    }
    CHECK(h.keys() == ref.keys());
  }
}

}  // TEST_SUITE
