// Copyright 2026 The hammersim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// DRAM device model: geometry, address mapping, row-buffer timing, per-cell
// flip susceptibility, refresh windows and a TRR sampler.
//
// The flip model is epoch based. An epoch is one refresh window. At the end
// of a window every row at distance 1 from an activated row (distance 2 when
// enabled) sums the activations of its neighbours; if that sum reaches the
// hammer threshold and TRR did not refresh the row during the window, each
// profiled cell of the row flips with its own probability, provided the
// stored bit permits the cell's direction.

#ifndef HAMMERSIM_DRAM_HPP
#define HAMMERSIM_DRAM_HPP

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hammersim/rng.hpp"

namespace hammersim::dram {

struct Geometry {
  std::uint32_t banks = 8;
  std::uint32_t rows_per_bank = 16384;
  std::uint32_t row_size_bytes = 8192;
  std::uint32_t page_size_bytes = 4096;
  // 0 disables refresh entirely (test configurations only).
  double refresh_period_ms = 64.0;

  void validate() const;
  std::uint64_t capacity() const {
    return std::uint64_t{banks} * rows_per_bank * row_size_bytes;
  }
  std::uint64_t total_pages() const { return capacity() / page_size_bytes; }
  std::uint32_t pages_per_row() const { return row_size_bytes / page_size_bytes; }
  std::uint32_t bits_per_row() const { return row_size_bytes * 8; }
  bool refresh_enabled() const { return refresh_period_ms > 0.0; }
};

struct CellAddress {
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
  std::uint32_t bit = 0;  // within the row, LSB-first inside each byte

  auto operator<=>(const CellAddress&) const = default;
};

struct RowAddress {
  std::uint32_t bank = 0;
  std::uint32_t row = 0;

  auto operator<=>(const RowAddress&) const = default;
};

struct DramLocation {
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
  std::uint32_t offset = 0;  // byte offset in the row

  auto operator<=>(const DramLocation&) const = default;
};

enum class FlipDirection : std::uint8_t { kOneToZero, kZeroToOne };

const char* to_string(FlipDirection d);
FlipDirection parse_direction(const std::string& s);

// Physical address <-> (bank, row, offset). Mappings work at row granularity,
// so a page never straddles two rows.
class AddressMapping {
 public:
  virtual ~AddressMapping() = default;
  virtual DramLocation to_dram(std::uint64_t phys) const = 0;
  virtual std::uint64_t to_phys(const DramLocation& loc) const = 0;
};

// Row-major with banks interleaved: consecutive row-sized blocks of physical
// memory cycle through the banks, so block b lives in bank b % banks, row
// b / banks.
class InterleavedMapping final : public AddressMapping {
 public:
  explicit InterleavedMapping(const Geometry& g) : g_(g) {}
  DramLocation to_dram(std::uint64_t phys) const override;
  std::uint64_t to_phys(const DramLocation& loc) const override;

 private:
  Geometry g_;
};

struct TimingParams {
  std::uint32_t row_hit_cycles = 220;
  std::uint32_t row_miss_cycles = 250;  // bank precharged, no open row
  std::uint32_t row_conflict_cycles = 340;
  double access_ns = 46.0;
  double nop_ns = 0.25;
};

struct DisturbanceParams {
  std::uint64_t hammer_threshold = 1'000'000;
  bool distance2 = false;
  // Fraction of issued accesses that reach DRAM as activations when the
  // hammer loop is not fenced and the CPU reorders/merges accesses.
  double unfenced_efficiency = 0.5;
};

struct TrrConfig {
  bool enabled = false;
  std::uint32_t sampler_capacity = 4;
  std::uint64_t mac = 250'000;
};

// Snapshot of the TRR sampler for the current refresh window.
struct TrrState {
  bool enabled = false;
  std::uint32_t sampler_capacity = 0;
  std::uint64_t mac = 0;
  std::vector<std::pair<RowAddress, std::uint64_t>> tracked;
};

struct ProfileCell {
  std::uint32_t bit = 0;
  FlipDirection direction = FlipDirection::kOneToZero;
  double prob = 1.0;
};

// Ground-truth flip susceptibility. Cells not listed never flip.
class FlipProfile {
 public:
  void add(const CellAddress& cell, FlipDirection direction, double prob);
  std::span<const ProfileCell> cells_in_row(std::uint32_t bank, std::uint32_t row) const;
  const ProfileCell* find(const CellAddress& cell) const;
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [key, cells] : rows_) {
      for (const auto& c : cells) {
        fn(CellAddress{static_cast<std::uint32_t>(key >> 32),
                       static_cast<std::uint32_t>(key & 0xffffffffu), c.bit},
           c);
      }
    }
  }

  // One record per line: `bank row bit direction prob`. Lines starting with
  // '#' are comments.
  static FlipProfile load(std::istream& in);
  void store(std::ostream& out) const;

 private:
  std::map<std::uint64_t, std::vector<ProfileCell>> rows_;  // sorted by bit
  std::size_t count_ = 0;
};

struct ProfileGenParams {
  double cells_per_mib = 30.86;
  double reproducible_fraction = 0.15;
  double low_prob_min = 0.001;
  double low_prob_max = 0.05;
  double high_prob_min = 0.9;
  double high_prob_max = 1.0;
  double zero_to_one_fraction = 0.5;
};

// Rows [first_row, first_row + row_count) in every bank.
struct RowScope {
  std::uint32_t first_row = 0;
  std::uint32_t row_count = 0;  // 0 = through the last row
};

FlipProfile generate_profile(const Geometry& g, const ProfileGenParams& params, Rng& rng,
                             RowScope scope = {});

// Shipped DIMM models.
struct DimmPreset {
  std::string name;
  ProfileGenParams profile;
  DisturbanceParams disturbance;
  TrrConfig trr;
};

DimmPreset dimm_preset(const std::string& name);

struct HammerPattern {
  std::vector<RowAddress> aggressors;
  std::uint64_t accesses_per_round = 1'000'000;
  std::uint32_t rounds = 100;
  std::uint64_t inter_round_nops = 100'000;
  bool fenced = true;

  void validate(const Geometry& g) const;
};

struct FlipEvent {
  CellAddress cell;
  std::uint64_t phys_byte = 0;
  std::uint8_t before = 0;
  std::uint8_t after = 0;
  std::uint64_t window = 0;
  double time_ns = 0.0;
};

class Dram {
 public:
  Dram(Geometry g, std::shared_ptr<const FlipProfile> profile, DisturbanceParams disturbance,
       TrrConfig trr, std::uint64_t seed, TimingParams timing = {},
       std::shared_ptr<const AddressMapping> mapping = nullptr);

  const Geometry& geometry() const { return g_; }
  const AddressMapping& mapping() const { return *mapping_; }
  const TimingParams& timing() const { return timing_; }
  const DisturbanceParams& disturbance() const { return disturbance_; }
  const FlipProfile& profile() const { return *profile_; }
  const TrrConfig& trr() const { return trr_; }
  // Restarts the flip-draw stream; memory contents and counters are kept.
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

  DramLocation map_phys_to_dram(std::uint64_t phys) const;
  std::uint64_t dram_to_phys(const DramLocation& loc) const;
  RowAddress row_of_frame(std::uint64_t frame) const;
  // Frames of a row, in physical order.
  std::vector<std::uint64_t> frames_of_row(const RowAddress& row) const;

  // Single activation at simulated time `now_ns`. Returns the access latency.
  std::uint32_t activate(std::uint32_t bank, std::uint32_t row, double now_ns);
  std::uint32_t activate(std::uint32_t bank, std::uint32_t row) {
    return activate(bank, row, now_ns_);
  }
  // Closes every refresh window that ended at or before `now_ns`.
  void refresh_tick(double now_ns);

  // Runs a refresh-synchronised hammer loop: each round issues its
  // activations inside one refresh window and the window closes at the end
  // of the round. With refresh disabled activations keep accumulating and
  // the end of each round is still an evaluation point.
  std::vector<FlipEvent> hammer(const HammerPattern& pattern);

  std::vector<std::uint8_t> read_page(std::uint64_t frame) const;
  void write_page(std::uint64_t frame, std::span<const std::uint8_t> bytes);
  void fill_page(std::uint64_t frame, std::uint8_t value);
  void read(std::uint64_t phys, std::span<std::uint8_t> out) const;
  void write(std::uint64_t phys, std::span<const std::uint8_t> bytes);
  bool page_equals(std::uint64_t frame, std::uint8_t value) const;

  double now_ns() const { return now_ns_; }
  void advance(double ns) { now_ns_ += ns; }
  std::uint64_t window() const { return window_; }
  const std::vector<FlipEvent>& flip_log() const { return flip_log_; }
  TrrState trr_state() const;
  std::uint64_t activations(std::uint32_t bank, std::uint32_t row) const;

 private:
  using RowKey = std::uint64_t;
  static RowKey key(std::uint32_t bank, std::uint32_t row) {
    return (std::uint64_t{bank} << 32) | row;
  }

  void check_row(std::uint32_t bank, std::uint32_t row) const;
  void add_activations(RowKey row, std::uint64_t count);
  void trr_observe(RowKey row);
  // Evaluates flips for the current window and, when refresh is enabled,
  // resets per-window state.
  void close_window(std::vector<FlipEvent>* out);
  std::uint8_t* page_ptr(std::uint64_t frame);
  const std::uint8_t* page_ptr_or_null(std::uint64_t frame) const;

  Geometry g_;
  std::shared_ptr<const FlipProfile> profile_;
  DisturbanceParams disturbance_;
  TrrConfig trr_;
  TimingParams timing_;
  std::shared_ptr<const AddressMapping> mapping_;
  Rng rng_;

  std::vector<std::int64_t> open_row_;  // per bank, -1 = precharged
  std::unordered_map<RowKey, std::uint64_t> acts_;
  std::vector<std::pair<RowKey, std::uint64_t>> trr_tracked_;
  std::unordered_set<RowKey> trr_refreshed_;

  std::unordered_map<std::uint64_t, std::vector<std::uint8_t>> pages_;
  std::vector<FlipEvent> flip_log_;
  double now_ns_ = 0.0;
  double next_refresh_ns_ = 0.0;
  std::uint64_t window_ = 0;
};

}  // namespace hammersim::dram

#endif  // HAMMERSIM_DRAM_HPP
