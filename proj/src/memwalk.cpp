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

#include "hammersim/memwalk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include "hammersim/error.hpp"

namespace hammersim::memwalk {

void TimingTrace::write_csv(std::ostream& out) const {
  out << "index,latency\n";
  for (const auto& s : samples) out << s.index << ',' << s.latency << '\n';
}

TimingTrace spoiler_trace(std::span<const std::optional<std::uint64_t>> frames,
                          const SpoilerParams& params, Rng& rng) {
  TimingTrace trace;
  if (frames.empty()) return trace;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i]) throw Error("buffer page " + std::to_string(i) + " is not mapped");
  }

  std::vector<bool> peak(frames.size(), false);
  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= frames.size(); ++i) {
    const bool continues = i < frames.size() && *frames[i] == *frames[i - 1] + 1;
    if (continues) continue;
    if (i - run_start >= params.granularity_pages) {
      for (std::size_t j = run_start + 1; j < i; ++j) peak[j] = true;
    }
    run_start = i;
  }

  trace.samples.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool outlier = rng.bernoulli(params.outlier_rate);
    const double noise = params.noise_sd > 0.0 ? rng.normal(0.0, params.noise_sd) : 0.0;
    double lat = outlier ? params.outlier_latency
                         : params.base_latency + (peak[i] ? params.peak_height : 0u);
    lat = std::max(1.0, std::round(lat + noise));
    trace.samples.push_back({i, static_cast<std::uint32_t>(lat)});
  }
  return trace;
}

void DetectorConfig::validate() const {
  if (peak_threshold == 0) throw ConfigError("detector.peak_threshold", "must be > 0");
  if (outlier_cutoff <= peak_threshold) {
    throw ConfigError("detector.outlier_cutoff", "must exceed peak_threshold");
  }
}

std::vector<Region> detect_contiguous(const TimingTrace& trace, const DetectorConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> peaks;
  std::set<std::size_t> dropped;
  for (const auto& s : trace.samples) {
    if (s.latency > cfg.outlier_cutoff) {
      dropped.insert(s.index);
    } else if (s.latency > cfg.peak_threshold) {
      peaks.push_back(s.index);
    }
  }

  std::vector<Region> regions;
  auto emit = [&](std::size_t first, std::size_t last) {
    // A peak marks a page that continues its predecessor.
    const std::size_t start = first == 0 ? 0 : first - 1;
    const std::size_t length = last - start + 1;
    if (length >= cfg.min_region_pages) regions.push_back({start, length});
  };
  if (peaks.empty()) return regions;
  std::size_t first = peaks[0];
  for (std::size_t k = 1; k < peaks.size(); ++k) {
    const std::size_t gap = peaks[k] - peaks[k - 1];
    // Spacing may stretch by one sample, but only over a dropped outlier.
    const bool joined = gap == 1 || (gap == 2 && dropped.count(peaks[k] - 1) != 0);
    if (!joined) {
      emit(first, peaks[k - 1]);
      first = peaks[k];
    }
  }
  emit(first, peaks.back());
  return regions;
}

LatencyProbe dram_probe(dram::Dram& dram, double noise_sd, Rng& rng) {
  return [&dram, noise_sd, &rng](std::uint64_t a, std::uint64_t b) {
    const auto la = dram.map_phys_to_dram(a);
    const auto lb = dram.map_phys_to_dram(b);
    std::uint32_t lat = 0;
    for (int i = 0; i < 2; ++i) {
      dram.activate(la.bank, la.row);
      lat = dram.activate(lb.bank, lb.row);
    }
    if (noise_sd > 0.0) {
      lat = static_cast<std::uint32_t>(std::max(1.0, std::round(lat + rng.normal(0.0, noise_sd))));
    }
    return lat;
  };
}

std::vector<bool> detect_same_bank(std::uint64_t base, std::span<const std::uint64_t> candidates,
                                   const LatencyProbe& probe, const BankDetectorConfig& cfg) {
  std::vector<bool> same(candidates.size(), false);
  // A fast answer also covers base's own row; a second reference in another
  // row of the same bank tells the two apart.
  std::optional<std::uint64_t> other_row;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (probe(base, candidates[i]) > cfg.conflict_threshold) {
      same[i] = true;
      if (!other_row) other_row = candidates[i];
    }
  }
  if (other_row) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!same[i] && probe(*other_row, candidates[i]) > cfg.conflict_threshold) same[i] = true;
    }
  }
  return same;
}

std::vector<std::vector<std::size_t>> partition_by_bank(std::span<const std::uint64_t> addresses,
                                                        const LatencyProbe& probe,
                                                        const BankDetectorConfig& cfg) {
  struct Group {
    std::vector<std::size_t> members;
    std::size_t rep = 0;
    std::optional<std::size_t> rep2;  // same bank, different row than rep
  };
  std::vector<Group> groups;
  auto conflicts = [&](std::size_t a, std::size_t b) {
    return probe(addresses[a], addresses[b]) > cfg.conflict_threshold;
  };
  for (std::size_t i = 0; i < addresses.size(); ++i) {
    bool placed = false;
    for (auto& g : groups) {
      if (conflicts(g.rep, i)) {
        g.members.push_back(i);
        if (!g.rep2) g.rep2 = i;
        placed = true;
        break;
      }
      if (g.rep2 && conflicts(*g.rep2, i)) {
        g.members.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({{i}, i, std::nullopt});
  }

  // Groups seeded from the same row before any conflict was seen end up
  // split; merge any pair whose representatives conflict.
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size();) {
      bool same = conflicts(groups[a].rep, groups[b].rep);
      if (!same && groups[a].rep2) same = conflicts(*groups[a].rep2, groups[b].rep);
      if (!same && groups[b].rep2) same = conflicts(groups[a].rep, *groups[b].rep2);
      if (same) {
        auto& dst = groups[a];
        dst.members.insert(dst.members.end(), groups[b].members.begin(), groups[b].members.end());
        std::sort(dst.members.begin(), dst.members.end());
        if (!dst.rep2) dst.rep2 = groups[b].rep2 ? groups[b].rep2 : groups[b].rep;
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(b));
      } else {
        ++b;
      }
    }
  }

  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& g : groups) out.push_back(std::move(g.members));
  return out;
}

std::vector<RowRun> row_runs(const dram::Dram& dram, std::span<const std::uint64_t> region_frames) {
  const std::set<std::uint64_t> in_region(region_frames.begin(), region_frames.end());
  std::map<std::uint32_t, std::set<std::uint32_t>> rows_by_bank;
  for (std::uint64_t f : region_frames) {
    const auto r = dram.row_of_frame(f);
    rows_by_bank[r.bank].insert(r.row);
  }
  std::vector<RowRun> runs;
  for (const auto& [bank, rows] : rows_by_bank) {
    RowRun current;
    std::int64_t prev = -2;
    for (std::uint32_t row : rows) {
      const auto frames = dram.frames_of_row({bank, row});
      const bool whole = std::all_of(frames.begin(), frames.end(),
                                     [&](std::uint64_t f) { return in_region.count(f) != 0; });
      if (!whole) continue;
      if (static_cast<std::int64_t>(row) != prev + 1 && !current.rows.empty()) {
        runs.push_back(std::move(current));
        current = {};
      }
      current.rows.push_back({bank, row});
      prev = row;
    }
    if (!current.rows.empty()) runs.push_back(std::move(current));
  }
  return runs;
}

std::vector<HammerSet> assemble_hammer_sets(std::span<const RowRun> runs, std::uint32_t n_sided) {
  if (n_sided == 0) throw Error("n_sided must be > 0");
  const std::size_t full = 2 * std::size_t{n_sided} + 1;
  const std::size_t inner = 2 * std::size_t{n_sided} - 1;
  std::vector<HammerSet> sets;
  for (const auto& run : runs) {
    const auto& rows = run.rows;
    if (rows.size() >= full) {
      for (std::size_t base = 0; base + full <= rows.size(); base += full) {
        HammerSet s;
        for (std::size_t k = 0; k < full; ++k) {
          (k % 2 == 1 ? s.pattern.aggressors : s.victims).push_back(rows[base + k]);
        }
        sets.push_back(std::move(s));
      }
    } else if (rows.size() >= inner) {
      HammerSet s;
      for (std::size_t k = 0; k < inner; ++k) {
        (k % 2 == 0 ? s.pattern.aggressors : s.victims).push_back(rows[k]);
      }
      sets.push_back(std::move(s));
    }
  }
  if (sets.empty()) {
    throw Error("no region spans enough rows for a " + std::to_string(n_sided) +
                "-sided pattern");
  }
  return sets;
}

}  // namespace hammersim::memwalk
