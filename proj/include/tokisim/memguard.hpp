#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tokisim/model.hpp"

namespace tokisim {

/// Per-core memory-access budget regulation with periodic replenishment,
/// predictive donation and a global reclaim pool.  Cores that exhaust their
/// budget draw chunks from the pool; when the pool is empty they are
/// throttled until the next regulation period.
class Regulator {
 public:
  struct PeriodStats {
    std::uint64_t period_index = 0;
    std::vector<std::uint64_t> used;            // accesses per core this period
    std::vector<Cycles> throttle_cycles;        // per core this period
  };

  struct Grants {
    std::vector<std::uint64_t> grant;
    std::vector<std::uint64_t> donated;
    std::uint64_t pool = 0;
  };

  explicit Regulator(RegulatorConfig cfg, std::uint32_t n_cores)
      : cfg_(std::move(cfg)),
        q_(n_cores, 0),
        grant_(n_cores, 0),
        used_this_(n_cores, 0),
        chunks_drawn_(n_cores, 0),
        throttled_(n_cores, false),
        throttle_cycles_(n_cores, 0) {
    cfg_.budgets.resize(n_cores, 0);
    cfg_.chunk_size.resize(n_cores, 1);
  }

  const RegulatorConfig& config() const { return cfg_; }
  bool regulated(std::uint32_t core) const { return cfg_.budgets[core] > 0; }
  bool throttled(std::uint32_t core) const { return throttled_[core]; }
  std::uint64_t remaining(std::uint32_t core) const { return q_[core]; }
  std::uint64_t pool() const { return pool_; }
  std::uint64_t initial_pool() const { return initial_pool_; }
  std::uint64_t period_index() const { return period_index_; }
  std::uint64_t used_this_period(std::uint32_t core) const { return used_this_[core]; }
  std::uint64_t chunks_drawn(std::uint32_t core) const { return chunks_drawn_[core]; }
  std::uint64_t last_grant(std::uint32_t core) const { return grant_[core]; }

  /// Starts a new regulation period: predict each core's demand from last
  /// period's usage (first period: the full budget), grant min(Q, max(pred,
  /// chunk)), donate the rest to the reclaim pool, clear throttles, rotate
  /// usage counters.  Unused pool from the previous period expires.
  Grants begin_period() {
    const std::size_t n = q_.size();
    Grants g;
    g.grant.resize(n, 0);
    g.donated.resize(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (cfg_.budgets[i] == 0) continue;
      std::uint64_t predict = first_period_ ? cfg_.budgets[i] : used_this_[i];
      std::uint64_t grant =
          std::min(cfg_.budgets[i], std::max(predict, cfg_.chunk_size[i]));
      g.grant[i] = grant;
      g.donated[i] = cfg_.budgets[i] - grant;
      g.pool += g.donated[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      used_this_[i] = 0;
      chunks_drawn_[i] = 0;
      q_[i] = g.grant[i];
      throttled_[i] = false;
      throttle_cycles_[i] = 0;
    }
    grant_ = g.grant;
    pool_ = g.pool;
    initial_pool_ = g.pool;
    first_period_ = false;
    ++period_index_;
    return g;
  }

  enum class Charge { Ok, Depleted };

  /// Charges one access against the core's remaining budget.  Depleted means
  /// this charge consumed the last unit; the access itself still issues.
  Charge charge_access(std::uint32_t core) {
    if (throttled_[core]) throw std::logic_error("charge_access on throttled core");
    if (q_[core] == 0) throw std::logic_error("charge_access with empty budget");
    --q_[core];
    ++used_this_[core];
    return q_[core] == 0 ? Charge::Depleted : Charge::Ok;
  }

  struct ChunkGrant {
    bool throttle = false;
    std::uint64_t refill = 0;
  };

  /// Draws a chunk from the reclaim pool, or throttles the core until the
  /// next period boundary if the pool is empty.
  ChunkGrant request_chunk(std::uint32_t core) {
    if (q_[core] != 0) throw std::logic_error("request_chunk with budget remaining");
    ChunkGrant g;
    if (pool_ > 0) {
      g.refill = std::min(pool_, cfg_.chunk_size[core]);
      pool_ -= g.refill;
      q_[core] = g.refill;
      chunks_drawn_[core] += g.refill;
    } else {
      g.throttle = true;
      throttled_[core] = true;
    }
    return g;
  }

  void add_throttle_cycles(std::uint32_t core, Cycles c) { throttle_cycles_[core] += c; }

  /// Usage record for the period about to end; call just before begin_period.
  PeriodStats end_period_stats() const {
    PeriodStats s;
    s.period_index = period_index_;
    s.used = used_this_;
    s.throttle_cycles = throttle_cycles_;
    return s;
  }

 private:
  RegulatorConfig cfg_;
  std::vector<std::uint64_t> q_;
  std::vector<std::uint64_t> grant_;
  std::vector<std::uint64_t> used_this_;
  std::vector<std::uint64_t> chunks_drawn_;
  std::vector<bool> throttled_;
  std::vector<Cycles> throttle_cycles_;
  std::uint64_t pool_ = 0;
  std::uint64_t initial_pool_ = 0;
  std::uint64_t period_index_ = 0;  // incremented by begin_period; first period is 1
  bool first_period_ = true;
};

}  // namespace tokisim
