#pragma once

// Fixed-capacity page cache, the LRU/LFU victim advisors and the bounded
// eviction history that turns later misses into delayed feedback.
//
// Resident pages live in numbered slots [0, capacity). A slot index is the
// action in the bandit view: "evict slot j". The page that replaces a victim
// takes over the victim's slot.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dfdc {

enum class AccessResult { hit, miss };

struct CacheEntry {
  std::string key;
  std::uint64_t recency = 0;    // round of the last access
  std::uint64_t frequency = 0;  // accesses since insertion
};

class CacheState {
 public:
  explicit CacheState(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size(); }
  bool full() const { return slots_.size() == capacity_; }
  bool contains(std::string_view key) const;
  std::optional<std::size_t> slot_of(std::string_view key) const;

  std::span<const CacheEntry> entries() const { return slots_; }
  const CacheEntry& entry(std::size_t slot) const { return slots_.at(slot); }

  // Hit: refreshes recency to `round` and bumps the frequency. Miss: no
  // change. Rounds must strictly increase across state-changing calls.
  AccessResult access(std::string_view key, std::uint64_t round);

  // Inserts `key` with frequency 1. When the cache is full `victim` must name
  // a resident key; it is removed and `key` takes its slot. Returns the slot.
  // Throws std::invalid_argument if the key is already resident or the victim
  // is missing or not resident while full.
  std::size_t insert_with_eviction(std::string_view key,
                                   std::optional<std::string_view> victim,
                                   std::uint64_t round);

  // Same, with the victim given by slot.
  std::size_t insert_into_slot(std::string_view key, std::size_t victim_slot,
                               std::uint64_t round);

  // Slot holding the least recently used page.
  std::size_t least_recent_slot() const;
  // Slot holding the least frequently used page; ties go to the least recent.
  std::size_t least_frequent_slot() const;

 private:
  void check_round(std::uint64_t round);
  void unlink(std::size_t slot);
  void link(std::size_t slot);

  std::size_t capacity_;
  std::vector<CacheEntry> slots_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<std::pair<std::uint64_t, std::size_t>> by_recency_;
  std::set<std::tuple<std::uint64_t, std::uint64_t, std::size_t>> by_frequency_;
  std::uint64_t last_round_ = 0;
  bool touched_ = false;
};

AccessResult access(CacheState& cache, std::string_view key, std::uint64_t round);
std::size_t insert_with_eviction(CacheState& cache, std::string_view key,
                                 std::optional<std::string_view> victim,
                                 std::uint64_t round);

// Victim slot recommended by each expert. Both throw std::logic_error when the
// cache is not full, where the only valid advice is "no action".
std::size_t lru_advise(const CacheState& cache);
std::size_t lfu_advise(const CacheState& cache);

enum class Expert : std::size_t { lru = 0, lfu = 1 };
inline constexpr std::size_t kNumCacheExperts = 2;

std::size_t advise(const CacheState& cache, Expert expert);
std::string_view to_string(Expert e);

struct EvictionRecord {
  std::string key;
  std::uint64_t round_evicted = 0;
  // xi_i value each expert placed on the evicted victim.
  std::vector<double> expert_match;
  // Slot that was evicted and the probability it was chosen with.
  std::size_t action = 0;
  double prob = 1.0;
};

struct HistoryMatch {
  std::uint64_t delay;  // 1-based position from the newest record
  EvictionRecord record;
};

/// Bounded FIFO of evictions, newest first, at most one record per key.
class EvictionHistory {
 public:
  explicit EvictionHistory(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return by_key_.size(); }
  bool empty() const { return by_key_.empty(); }

  // Puts `rec` at the front. An existing record for the same key is replaced;
  // the oldest record is dropped when the bound would be exceeded.
  void record(EvictionRecord rec);

  std::optional<HistoryMatch> query(std::string_view key) const;

  // query() followed by removal of the matched record.
  std::optional<HistoryMatch> take(std::string_view key);

  bool erase(std::string_view key);

  // Keys from newest to oldest.
  std::vector<std::string> keys() const;

 private:
  struct Slot {
    std::uint64_t seq;
    EvictionRecord rec;
  };

  std::uint64_t position_of(std::uint64_t seq) const;
  void fenwick_add(std::uint64_t seq, int delta);
  std::int64_t fenwick_prefix(std::uint64_t seq) const;  // live seqs <= seq
  void compact();

  std::size_t capacity_;
  std::unordered_map<std::string, Slot> by_key_;
  std::map<std::uint64_t, std::string> by_seq_;
  // Fenwick tree counting live records per sequence number.
  std::vector<std::int64_t> tree_;
  std::uint64_t next_seq_ = 0;
};

inline void history_record(EvictionHistory& hist, EvictionRecord rec) {
  hist.record(std::move(rec));
}
inline std::optional<HistoryMatch> history_query(const EvictionHistory& hist,
                                                 std::string_view key) {
  return hist.query(key);
}

}  // namespace dfdc
