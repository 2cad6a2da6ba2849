#include "dfdc/cache.hpp"

#include <algorithm>
#include <stdexcept>

namespace dfdc {

CacheState::CacheState(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("cache capacity must be >= 1");
  slots_.reserve(capacity);
  index_.reserve(capacity * 2);
}

bool CacheState::contains(std::string_view key) const {
  return index_.find(std::string(key)) != index_.end();
}

std::optional<std::size_t> CacheState::slot_of(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void CacheState::check_round(std::uint64_t round) {
  if (touched_ && round <= last_round_) {
    throw std::invalid_argument("cache rounds must strictly increase");
  }
  touched_ = true;
  last_round_ = round;
}

void CacheState::unlink(std::size_t slot) {
  const CacheEntry& e = slots_[slot];
  by_recency_.erase({e.recency, slot});
  by_frequency_.erase({e.frequency, e.recency, slot});
}

void CacheState::link(std::size_t slot) {
  const CacheEntry& e = slots_[slot];
  by_recency_.emplace(e.recency, slot);
  by_frequency_.emplace(e.frequency, e.recency, slot);
}

AccessResult CacheState::access(std::string_view key, std::uint64_t round) {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return AccessResult::miss;
  check_round(round);
  const std::size_t slot = it->second;
  unlink(slot);
  slots_[slot].recency = round;
  ++slots_[slot].frequency;
  link(slot);
  return AccessResult::hit;
}

std::size_t CacheState::insert_with_eviction(std::string_view key,
                                             std::optional<std::string_view> victim,
                                             std::uint64_t round) {
  if (!full()) {
    if (contains(key)) throw std::invalid_argument("key already resident");
    check_round(round);
    const std::size_t slot = slots_.size();
    slots_.push_back({std::string(key), round, 1});
    index_.emplace(std::string(key), slot);
    link(slot);
    return slot;
  }
  if (!victim) throw std::invalid_argument("cache is full and no victim given");
  auto v = slot_of(*victim);
  if (!v) {
    throw std::invalid_argument("victim '" + std::string(*victim) + "' is not resident");
  }
  return insert_into_slot(key, *v, round);
}

std::size_t CacheState::insert_into_slot(std::string_view key, std::size_t victim_slot,
                                         std::uint64_t round) {
  if (!full()) return insert_with_eviction(key, std::nullopt, round);
  if (victim_slot >= slots_.size()) throw std::invalid_argument("victim slot out of range");
  if (contains(key)) throw std::invalid_argument("key already resident");
  check_round(round);
  unlink(victim_slot);
  index_.erase(slots_[victim_slot].key);
  slots_[victim_slot] = {std::string(key), round, 1};
  index_.emplace(std::string(key), victim_slot);
  link(victim_slot);
  return victim_slot;
}

std::size_t CacheState::least_recent_slot() const {
  if (by_recency_.empty()) throw std::logic_error("cache is empty");
  return by_recency_.begin()->second;
}

std::size_t CacheState::least_frequent_slot() const {
  if (by_frequency_.empty()) throw std::logic_error("cache is empty");
  return std::get<2>(*by_frequency_.begin());
}

AccessResult access(CacheState& cache, std::string_view key, std::uint64_t round) {
  return cache.access(key, round);
}

std::size_t insert_with_eviction(CacheState& cache, std::string_view key,
                                 std::optional<std::string_view> victim,
                                 std::uint64_t round) {
  return cache.insert_with_eviction(key, victim, round);
}

std::size_t lru_advise(const CacheState& cache) {
  if (!cache.full()) throw std::logic_error("no eviction needed: cache not full");
  return cache.least_recent_slot();
}

std::size_t lfu_advise(const CacheState& cache) {
  if (!cache.full()) throw std::logic_error("no eviction needed: cache not full");
  return cache.least_frequent_slot();
}

std::size_t advise(const CacheState& cache, Expert expert) {
  return expert == Expert::lru ? lru_advise(cache) : lfu_advise(cache);
}

std::string_view to_string(Expert e) { return e == Expert::lru ? "lru" : "lfu"; }

// EvictionHistory

EvictionHistory::EvictionHistory(std::size_t capacity)
    : capacity_(capacity), tree_(2 * capacity + 16, 0) {
  if (capacity == 0) throw std::invalid_argument("history capacity must be >= 1");
}

void EvictionHistory::fenwick_add(std::uint64_t seq, int delta) {
  for (std::size_t i = static_cast<std::size_t>(seq) + 1; i <= tree_.size();
       i += i & (~i + 1)) {
    tree_[i - 1] += delta;
  }
}

std::int64_t EvictionHistory::fenwick_prefix(std::uint64_t seq) const {
  std::int64_t sum = 0;
  for (std::size_t i = static_cast<std::size_t>(seq) + 1; i > 0; i -= i & (~i + 1)) {
    sum += tree_[i - 1];
  }
  return sum;
}

std::uint64_t EvictionHistory::position_of(std::uint64_t seq) const {
  // Records newer than or equal to seq; the newest has position 1.
  const auto live = static_cast<std::int64_t>(by_key_.size());
  const std::int64_t older = seq == 0 ? 0 : fenwick_prefix(seq - 1);
  return static_cast<std::uint64_t>(live - older);
}

void EvictionHistory::compact() {
  std::fill(tree_.begin(), tree_.end(), 0);
  std::map<std::uint64_t, std::string> renumbered;
  next_seq_ = 0;
  for (auto& [seq, key] : by_seq_) {
    const std::uint64_t fresh = next_seq_++;
    by_key_.at(key).seq = fresh;
    renumbered.emplace(fresh, std::move(key));
    fenwick_add(fresh, 1);
  }
  by_seq_ = std::move(renumbered);
}

void EvictionHistory::record(EvictionRecord rec) {
  erase(rec.key);
  while (by_key_.size() >= capacity_) {
    auto oldest = by_seq_.begin();
    erase(std::string(oldest->second));
  }
  if (next_seq_ >= tree_.size()) compact();
  const std::uint64_t seq = next_seq_++;
  fenwick_add(seq, 1);
  by_seq_.emplace(seq, rec.key);
  std::string key = rec.key;
  by_key_.emplace(std::move(key), Slot{seq, std::move(rec)});
}

std::optional<HistoryMatch> EvictionHistory::query(std::string_view key) const {
  auto it = by_key_.find(std::string(key));
  if (it == by_key_.end()) return std::nullopt;
  return HistoryMatch{position_of(it->second.seq), it->second.rec};
}

std::optional<HistoryMatch> EvictionHistory::take(std::string_view key) {
  auto m = query(key);
  if (m) erase(key);
  return m;
}

bool EvictionHistory::erase(std::string_view key) {
  auto it = by_key_.find(std::string(key));
  if (it == by_key_.end()) return false;
  const std::uint64_t seq = it->second.seq;
  fenwick_add(seq, -1);
  by_seq_.erase(seq);
  by_key_.erase(it);
  return true;
}

std::vector<std::string> EvictionHistory::keys() const {
  std::vector<std::string> out;
  out.reserve(by_seq_.size());
  for (auto it = by_seq_.rbegin(); it != by_seq_.rend(); ++it) out.push_back(it->second);
  return out;
}

}  // namespace dfdc
