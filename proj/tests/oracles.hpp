#pragma once

// Brute-force reference implementations. Deliberately naive: linear scans,
// std::list, direct formula evaluation. Nothing here calls into the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

// p_j = (1 - eta) sum_i w_i xi_ij / sum_i w_i + eta / K
inline std::vector<double> mix(const std::vector<double>& w,
                               const std::vector<std::vector<double>>& advice, double eta) {
  const std::size_t k = advice.front().size();
  double total = 0.0;
  for (double x : w) total += x;
  std::vector<double> p(k, eta / static_cast<double>(k));
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * advice[i][j];
    p[j] += (1.0 - eta) * s / total;
  }
  return p;
}

inline double eta_opt(double k, double n, double t) {
  return std::min(1.0, std::sqrt(k * std::log(n) / (2.0 * t)));
}

// Page cache with linear-scan victim selection.
class NaiveCache {
 public:
  struct Page {
    std::string key;
    std::uint64_t last = 0;
    std::uint64_t freq = 0;
  };

  explicit NaiveCache(std::size_t cap) : cap_(cap) {}

  bool full() const { return pages_.size() == cap_; }
  const std::vector<Page>& pages() const { return pages_; }

  bool access(const std::string& key, std::uint64_t t) {
    for (auto& p : pages_) {
      if (p.key == key) {
        p.last = t;
        ++p.freq;
        return true;
      }
    }
    return false;
  }

  std::string lru_victim() const {
    const Page* best = &pages_.front();
    for (const auto& p : pages_) {
      if (p.last < best->last) best = &p;
    }
    return best->key;
  }

  std::string lfu_victim() const {
    const Page* best = &pages_.front();
    for (const auto& p : pages_) {
      if (p.freq < best->freq || (p.freq == best->freq && p.last < best->last)) best = &p;
    }
    return best->key;
  }

  void replace(const std::string& victim, const std::string& key, std::uint64_t t) {
    for (auto& p : pages_) {
      if (p.key == victim) {
        p = Page{key, t, 1};
        return;
      }
    }
  }

  void insert(const std::string& key, std::uint64_t t) { pages_.push_back(Page{key, t, 1}); }

 private:
  std::size_t cap_;
  std::vector<Page> pages_;
};

// Victims chosen by a standalone LRU (lfu = false) or LFU cache.
inline std::vector<std::string> eviction_sequence(const std::vector<std::string>& trace,
                                                  std::size_t cap, bool lfu) {
  NaiveCache c(cap);
  std::vector<std::string> out;
  std::uint64_t t = 0;
  for (const auto& key : trace) {
    ++t;
    if (c.access(key, t)) continue;
    if (c.full()) {
      const std::string v = lfu ? c.lfu_victim() : c.lru_victim();
      out.push_back(v);
      c.replace(v, key, t);
    } else {
      c.insert(key, t);
    }
  }
  return out;
}

inline std::uint64_t misses(const std::vector<std::string>& trace, std::size_t cap, bool lfu) {
  NaiveCache c(cap);
  std::uint64_t m = 0;
  std::uint64_t t = 0;
  for (const auto& key : trace) {
    ++t;
    if (c.access(key, t)) continue;
    ++m;
    if (c.full()) {
      c.replace(lfu ? c.lfu_victim() : c.lru_victim(), key, t);
    } else {
      c.insert(key, t);
    }
  }
  return m;
}

// FIFO history, newest at the front.
class NaiveHistory {
 public:
  explicit NaiveHistory(std::size_t cap) : cap_(cap) {}

  void record(const std::string& key) {
    keys_.remove(key);
    keys_.push_front(key);
    while (keys_.size() > cap_) keys_.pop_back();
  }

  std::optional<std::uint64_t> position(const std::string& key) const {
    std::uint64_t d = 1;
    for (const auto& k : keys_) {
      if (k == key) return d;
      ++d;
    }
    return std::nullopt;
  }

  void erase(const std::string& key) { keys_.remove(key); }

  std::vector<std::string> keys() const { return {keys_.begin(), keys_.end()}; }

 private:
  std::size_t cap_;
  std::list<std::string> keys_;
};

}  // namespace oracle
