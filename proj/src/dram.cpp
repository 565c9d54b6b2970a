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

#include "hammersim/dram.hpp"

#include <algorithm>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "hammersim/error.hpp"

namespace hammersim::dram {

void Geometry::validate() const {
  if (banks == 0) throw ConfigError("dram.banks", "must be > 0");
  if (rows_per_bank == 0) throw ConfigError("dram.rows_per_bank", "must be > 0");
  if (row_size_bytes == 0) throw ConfigError("dram.row_size_bytes", "must be > 0");
  if (page_size_bytes == 0) throw ConfigError("dram.page_size_bytes", "must be > 0");
  if (row_size_bytes % page_size_bytes != 0) {
    throw ConfigError("dram.row_size_bytes", "must be a multiple of page_size_bytes");
  }
  if (refresh_period_ms < 0.0) throw ConfigError("dram.refresh_period_ms", "must be >= 0");
}

const char* to_string(FlipDirection d) {
  return d == FlipDirection::kOneToZero ? "1to0" : "0to1";
}

FlipDirection parse_direction(const std::string& s) {
  if (s == "1to0") return FlipDirection::kOneToZero;
  if (s == "0to1") return FlipDirection::kZeroToOne;
  throw Error("unknown flip direction '" + s + "' (expected 1to0 or 0to1)");
}

DramLocation InterleavedMapping::to_dram(std::uint64_t phys) const {
  if (phys >= g_.capacity()) throw OutOfRange("physical address beyond DRAM capacity");
  const std::uint64_t block = phys / g_.row_size_bytes;
  return {static_cast<std::uint32_t>(block % g_.banks),
          static_cast<std::uint32_t>(block / g_.banks),
          static_cast<std::uint32_t>(phys % g_.row_size_bytes)};
}

std::uint64_t InterleavedMapping::to_phys(const DramLocation& loc) const {
  if (loc.bank >= g_.banks || loc.row >= g_.rows_per_bank || loc.offset >= g_.row_size_bytes) {
    throw OutOfRange("DRAM location outside geometry");
  }
  const std::uint64_t block = std::uint64_t{loc.row} * g_.banks + loc.bank;
  return block * g_.row_size_bytes + loc.offset;
}

// --- FlipProfile ---------------------------------------------------------

void FlipProfile::add(const CellAddress& cell, FlipDirection direction, double prob) {
  if (!(prob > 0.0 && prob <= 1.0)) throw Error("flip probability must be in (0, 1]");
  auto& cells = rows_[(std::uint64_t{cell.bank} << 32) | cell.row];
  auto it = std::lower_bound(cells.begin(), cells.end(), cell.bit,
                             [](const ProfileCell& c, std::uint32_t b) { return c.bit < b; });
  if (it != cells.end() && it->bit == cell.bit) {
    *it = ProfileCell{cell.bit, direction, prob};
    return;
  }
  cells.insert(it, ProfileCell{cell.bit, direction, prob});
  ++count_;
}

std::span<const ProfileCell> FlipProfile::cells_in_row(std::uint32_t bank,
                                                       std::uint32_t row) const {
  auto it = rows_.find((std::uint64_t{bank} << 32) | row);
  if (it == rows_.end()) return {};
  return it->second;
}

const ProfileCell* FlipProfile::find(const CellAddress& cell) const {
  auto cells = cells_in_row(cell.bank, cell.row);
  auto it = std::lower_bound(cells.begin(), cells.end(), cell.bit,
                             [](const ProfileCell& c, std::uint32_t b) { return c.bit < b; });
  if (it != cells.end() && it->bit == cell.bit) return &*it;
  return nullptr;
}

FlipProfile FlipProfile::load(std::istream& in) {
  FlipProfile p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    CellAddress c;
    std::string dir;
    double prob = 0.0;
    if (!(ls >> c.bank >> c.row >> c.bit >> dir >> prob)) {
      throw ParseError(lineno, 1, "expected `bank row bit direction prob`");
    }
    try {
      p.add(c, parse_direction(dir), prob);
    } catch (const Error& e) {
      throw ParseError(lineno, 1, e.what());
    }
  }
  return p;
}

void FlipProfile::store(std::ostream& out) const {
  out << "# bank row bit direction prob\n";
  for_each([&](const CellAddress& c, const ProfileCell& cell) {
    out << c.bank << ' ' << c.row << ' ' << c.bit << ' ' << to_string(cell.direction) << ' '
        << std::setprecision(17) << cell.prob << '\n';
  });
}

FlipProfile generate_profile(const Geometry& g, const ProfileGenParams& params, Rng& rng,
                             RowScope scope) {
  g.validate();
  const std::uint32_t first = std::min(scope.first_row, g.rows_per_bank);
  const std::uint32_t count =
      scope.row_count == 0 ? g.rows_per_bank - first
                           : std::min(scope.row_count, g.rows_per_bank - first);
  const double mib = static_cast<double>(g.banks) * count * g.row_size_bytes / (1024.0 * 1024.0);
  const auto n_cells = static_cast<std::uint64_t>(params.cells_per_mib * mib + 0.5);

  FlipProfile p;
  if (count == 0) return p;
  const std::uint64_t bits_total = std::uint64_t{g.banks} * count * g.bits_per_row();
  std::set<std::uint64_t> used;
  while (used.size() < std::min<std::uint64_t>(n_cells, bits_total)) {
    const std::uint64_t pos = rng.below(bits_total);
    const bool reproducible = rng.bernoulli(params.reproducible_fraction);
    const double prob = reproducible ? rng.uniform(params.high_prob_min, params.high_prob_max)
                                     : rng.uniform(params.low_prob_min, params.low_prob_max);
    const bool up = rng.bernoulli(params.zero_to_one_fraction);
    if (!used.insert(pos).second) continue;
    const std::uint64_t row_index = pos / g.bits_per_row();
    CellAddress c{static_cast<std::uint32_t>(row_index % g.banks),
                  first + static_cast<std::uint32_t>(row_index / g.banks),
                  static_cast<std::uint32_t>(pos % g.bits_per_row())};
    p.add(c, up ? FlipDirection::kZeroToOne : FlipDirection::kOneToZero,
          std::clamp(prob, 1e-12, 1.0));
  }
  return p;
}

DimmPreset dimm_preset(const std::string& name) {
  DimmPreset d;
  d.name = name;
  if (name == "ddr3-default") {
    // Sparse, bimodal reproducibility. A 64 MiB double-sided sweep repeated
    // 100 times observes ~1667 distinct flippy bits with this density.
    d.profile.cells_per_mib = 30.86;
    return d;
  }
  if (name == "ddr4-trr") {
    d.profile.cells_per_mib = 16384.0;
    d.trr = TrrConfig{true, 4, 250'000};
    return d;
  }
  if (name == "test-small") {
    d.profile.cells_per_mib = 1024.0;
    d.disturbance.hammer_threshold = 1'000;
    return d;
  }
  throw ConfigError("dram.dimm", "unknown DIMM preset '" + name + "'");
}

void HammerPattern::validate(const Geometry& g) const {
  if (aggressors.empty()) throw Error("hammer pattern has no aggressor rows");
  std::set<std::uint32_t> seen;
  for (const auto& a : aggressors) {
    if (a.bank != aggressors.front().bank) throw Error("aggressor rows span multiple banks");
    if (a.bank >= g.banks || a.row >= g.rows_per_bank) throw OutOfRange("aggressor row outside geometry");
    if (!seen.insert(a.row).second) throw Error("aggressor rows must be distinct");
  }
  if (rounds == 0) throw Error("hammer pattern needs at least one round");
}

// --- Dram ----------------------------------------------------------------

Dram::Dram(Geometry g, std::shared_ptr<const FlipProfile> profile, DisturbanceParams disturbance,
           TrrConfig trr, std::uint64_t seed, TimingParams timing,
           std::shared_ptr<const AddressMapping> mapping)
    : g_(g),
      profile_(profile ? std::move(profile) : std::make_shared<FlipProfile>()),
      disturbance_(disturbance),
      trr_(trr),
      timing_(timing),
      mapping_(mapping ? std::move(mapping) : std::make_shared<InterleavedMapping>(g)),
      rng_(seed),
      open_row_(g.banks, -1) {
  g_.validate();
  if (trr_.enabled && trr_.sampler_capacity == 0) {
    throw ConfigError("dram.trr_sampler_capacity", "must be > 0 when TRR is enabled");
  }
  next_refresh_ns_ = g_.refresh_period_ms * 1e6;
}

DramLocation Dram::map_phys_to_dram(std::uint64_t phys) const {
  if (phys >= g_.capacity()) throw OutOfRange("physical address beyond DRAM capacity");
  return mapping_->to_dram(phys);
}

std::uint64_t Dram::dram_to_phys(const DramLocation& loc) const { return mapping_->to_phys(loc); }

RowAddress Dram::row_of_frame(std::uint64_t frame) const {
  const auto loc = map_phys_to_dram(frame * g_.page_size_bytes);
  return {loc.bank, loc.row};
}

std::vector<std::uint64_t> Dram::frames_of_row(const RowAddress& row) const {
  std::vector<std::uint64_t> frames;
  for (std::uint32_t off = 0; off < g_.row_size_bytes; off += g_.page_size_bytes) {
    frames.push_back(mapping_->to_phys({row.bank, row.row, off}) / g_.page_size_bytes);
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

void Dram::check_row(std::uint32_t bank, std::uint32_t row) const {
  if (bank >= g_.banks || row >= g_.rows_per_bank) throw OutOfRange("row outside geometry");
}

std::uint32_t Dram::activate(std::uint32_t bank, std::uint32_t row, double now_ns) {
  check_row(bank, row);
  refresh_tick(now_ns);
  now_ns_ = std::max(now_ns_, now_ns) + timing_.access_ns;
  auto& open = open_row_[bank];
  if (open == static_cast<std::int64_t>(row)) return timing_.row_hit_cycles;
  const bool conflict = open >= 0;
  open = row;
  add_activations(key(bank, row), 1);
  return conflict ? timing_.row_conflict_cycles : timing_.row_miss_cycles;
}

void Dram::refresh_tick(double now_ns) {
  if (!g_.refresh_enabled()) return;
  const double period = g_.refresh_period_ms * 1e6;
  while (now_ns >= next_refresh_ns_) {
    close_window(nullptr);
    next_refresh_ns_ += period;
  }
}

void Dram::add_activations(RowKey row, std::uint64_t count) {
  acts_[row] += count;
  trr_observe(row);
}

void Dram::trr_observe(RowKey row) {
  if (!trr_.enabled) return;
  const std::uint64_t count = acts_[row];
  auto it = std::find_if(trr_tracked_.begin(), trr_tracked_.end(),
                         [&](const auto& e) { return e.first == row; });
  if (it != trr_tracked_.end()) {
    it->second = count;
  } else if (trr_tracked_.size() < trr_.sampler_capacity) {
    trr_tracked_.emplace_back(row, count);
    it = trr_tracked_.end() - 1;
  } else {
    // Frequency-based replacement: evict the least active entry only when
    // the newcomer is strictly more active.
    auto min_it = std::min_element(trr_tracked_.begin(), trr_tracked_.end(),
                                   [](const auto& a, const auto& b) { return a.second < b.second; });
    if (count <= min_it->second) return;
    *min_it = {row, count};
    it = min_it;
  }
  if (it->second >= trr_.mac) {
    const auto bank = static_cast<std::uint32_t>(it->first >> 32);
    const auto r = static_cast<std::int64_t>(it->first & 0xffffffffu);
    const int reach = disturbance_.distance2 ? 2 : 1;
    for (int d = -reach; d <= reach; ++d) {
      if (d == 0) continue;
      const std::int64_t v = r + d;
      if (v >= 0 && v < static_cast<std::int64_t>(g_.rows_per_bank)) {
        trr_refreshed_.insert(key(bank, static_cast<std::uint32_t>(v)));
      }
    }
  }
}

void Dram::close_window(std::vector<FlipEvent>* out) {
  // Victim candidates in a deterministic order.
  std::set<RowKey> candidates;
  const int reach = disturbance_.distance2 ? 2 : 1;
  for (const auto& [row, count] : acts_) {
    if (count == 0) continue;
    const auto bank = static_cast<std::uint32_t>(row >> 32);
    const auto r = static_cast<std::int64_t>(row & 0xffffffffu);
    for (int d = -reach; d <= reach; ++d) {
      const std::int64_t v = r + d;
      if (d != 0 && v >= 0 && v < static_cast<std::int64_t>(g_.rows_per_bank)) {
        candidates.insert(key(bank, static_cast<std::uint32_t>(v)));
      }
    }
  }
  auto acts_of = [&](std::uint32_t bank, std::int64_t r) -> std::uint64_t {
    if (r < 0 || r >= static_cast<std::int64_t>(g_.rows_per_bank)) return 0;
    auto it = acts_.find(key(bank, static_cast<std::uint32_t>(r)));
    return it == acts_.end() ? 0 : it->second;
  };
  for (RowKey victim : candidates) {
    const auto bank = static_cast<std::uint32_t>(victim >> 32);
    const auto row = static_cast<std::uint32_t>(victim & 0xffffffffu);
    const auto cells = profile_->cells_in_row(bank, row);
    if (cells.empty()) continue;
    std::uint64_t disturbance = acts_of(bank, std::int64_t{row} - 1) + acts_of(bank, std::int64_t{row} + 1);
    if (disturbance_.distance2) {
      disturbance += acts_of(bank, std::int64_t{row} - 2) + acts_of(bank, std::int64_t{row} + 2);
    }
    if (disturbance < disturbance_.hammer_threshold) continue;
    if (trr_refreshed_.count(victim) != 0) continue;
    for (const auto& cell : cells) {
      if (!rng_.bernoulli(cell.prob)) continue;
      const std::uint64_t phys = mapping_->to_phys({bank, row, cell.bit / 8});
      std::uint8_t* page = page_ptr(phys / g_.page_size_bytes);
      std::uint8_t& byte = page[phys % g_.page_size_bytes];
      const std::uint8_t mask = static_cast<std::uint8_t>(1u << (cell.bit % 8));
      const bool set = (byte & mask) != 0;
      if (cell.direction == FlipDirection::kOneToZero ? !set : set) continue;
      FlipEvent ev{CellAddress{bank, row, cell.bit}, phys, byte,
                   static_cast<std::uint8_t>(byte ^ mask), window_, now_ns_};
      byte ^= mask;
      flip_log_.push_back(ev);
      if (out != nullptr) out->push_back(ev);
    }
  }
  if (g_.refresh_enabled()) {
    acts_.clear();
    trr_tracked_.clear();
    trr_refreshed_.clear();
    ++window_;
  }
}

std::vector<FlipEvent> Dram::hammer(const HammerPattern& pattern) {
  pattern.validate(g_);
  std::vector<FlipEvent> events;
  const std::uint32_t bank = pattern.aggressors.front().bank;
  // A lone aggressor keeps its row open: only the first access activates.
  const bool single = pattern.aggressors.size() == 1;
  std::uint64_t per_row = single ? 1 : pattern.accesses_per_round;
  if (!pattern.fenced && !single) {
    per_row = static_cast<std::uint64_t>(static_cast<double>(per_row) *
                                         disturbance_.unfenced_efficiency);
  }
  const double round_ns =
      static_cast<double>(pattern.accesses_per_round) * pattern.aggressors.size() *
          timing_.access_ns +
      static_cast<double>(pattern.inter_round_nops) * timing_.nop_ns;
  const double period = g_.refresh_period_ms * 1e6;
  for (std::uint32_t round = 0; round < pattern.rounds; ++round) {
    for (const auto& a : pattern.aggressors) add_activations(key(bank, a.row), per_row);
    open_row_[bank] = pattern.aggressors.back().row;
    now_ns_ += round_ns;
    close_window(&events);
    if (g_.refresh_enabled()) next_refresh_ns_ = now_ns_ + period;
  }
  return events;
}

std::uint64_t Dram::activations(std::uint32_t bank, std::uint32_t row) const {
  auto it = acts_.find(key(bank, row));
  return it == acts_.end() ? 0 : it->second;
}

TrrState Dram::trr_state() const {
  TrrState s{trr_.enabled, trr_.sampler_capacity, trr_.mac, {}};
  for (const auto& [k, c] : trr_tracked_) {
    s.tracked.push_back({RowAddress{static_cast<std::uint32_t>(k >> 32),
                                    static_cast<std::uint32_t>(k & 0xffffffffu)},
                         c});
  }
  return s;
}

// --- memory contents -----------------------------------------------------

std::uint8_t* Dram::page_ptr(std::uint64_t frame) {
  auto& page = pages_[frame];
  if (page.empty()) page.assign(g_.page_size_bytes, 0);
  return page.data();
}

const std::uint8_t* Dram::page_ptr_or_null(std::uint64_t frame) const {
  auto it = pages_.find(frame);
  return it == pages_.end() ? nullptr : it->second.data();
}

std::vector<std::uint8_t> Dram::read_page(std::uint64_t frame) const {
  if (frame >= g_.total_pages()) throw OutOfRange("page frame beyond DRAM capacity");
  const auto* p = page_ptr_or_null(frame);
  if (p == nullptr) return std::vector<std::uint8_t>(g_.page_size_bytes, 0);
  return {p, p + g_.page_size_bytes};
}

void Dram::write_page(std::uint64_t frame, std::span<const std::uint8_t> bytes) {
  if (frame >= g_.total_pages()) throw OutOfRange("page frame beyond DRAM capacity");
  if (bytes.size() != g_.page_size_bytes) throw Error("write_page expects exactly one page");
  std::memcpy(page_ptr(frame), bytes.data(), bytes.size());
}

void Dram::fill_page(std::uint64_t frame, std::uint8_t value) {
  if (frame >= g_.total_pages()) throw OutOfRange("page frame beyond DRAM capacity");
  std::memset(page_ptr(frame), value, g_.page_size_bytes);
}

bool Dram::page_equals(std::uint64_t frame, std::uint8_t value) const {
  if (frame >= g_.total_pages()) throw OutOfRange("page frame beyond DRAM capacity");
  const auto* p = page_ptr_or_null(frame);
  if (p == nullptr) return value == 0;
  return std::all_of(p, p + g_.page_size_bytes, [&](std::uint8_t b) { return b == value; });
}

void Dram::read(std::uint64_t phys, std::span<std::uint8_t> out) const {
  if (phys + out.size() > g_.capacity()) throw OutOfRange("read beyond DRAM capacity");
  std::size_t done = 0;
  while (done < out.size()) {
    const std::uint64_t addr = phys + done;
    const std::uint64_t frame = addr / g_.page_size_bytes;
    const std::size_t off = addr % g_.page_size_bytes;
    const std::size_t n = std::min<std::size_t>(out.size() - done, g_.page_size_bytes - off);
    const auto* p = page_ptr_or_null(frame);
    if (p == nullptr) {
      std::memset(out.data() + done, 0, n);
    } else {
      std::memcpy(out.data() + done, p + off, n);
    }
    done += n;
  }
}

void Dram::write(std::uint64_t phys, std::span<const std::uint8_t> bytes) {
  if (phys + bytes.size() > g_.capacity()) throw OutOfRange("write beyond DRAM capacity");
  std::size_t done = 0;
  while (done < bytes.size()) {
    const std::uint64_t addr = phys + done;
    const std::uint64_t frame = addr / g_.page_size_bytes;
    const std::size_t off = addr % g_.page_size_bytes;
    const std::size_t n = std::min<std::size_t>(bytes.size() - done, g_.page_size_bytes - off);
    std::memcpy(page_ptr(frame) + off, bytes.data() + done, n);
    done += n;
  }
}

}  // namespace hammersim::dram
