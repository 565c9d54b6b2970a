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

// Timing side channels used to find hammerable memory without a pagemap:
// a store-to-load aliasing trace that exposes physical contiguity, and a
// row-buffer conflict probe that groups addresses by bank.
//
// Detectors only ever see latencies. The trace generator and the DRAM probe
// are the only places that look at physical addresses.

#ifndef HAMMERSIM_MEMWALK_HPP
#define HAMMERSIM_MEMWALK_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hammersim/dram.hpp"
#include "hammersim/rng.hpp"

namespace hammersim::memwalk {

struct TimingSample {
  std::size_t index = 0;
  std::uint32_t latency = 0;
};

struct TimingTrace {
  std::vector<TimingSample> samples;

  // `index,latency` with a header line.
  void write_csv(std::ostream& out) const;
};

struct SpoilerParams {
  std::uint32_t base_latency = 100;
  std::uint32_t peak_height = 50;
  double noise_sd = 0.0;
  double outlier_rate = 0.0;
  std::uint32_t outlier_latency = 650;
  // Pages of physical contiguity needed before aliasing peaks show up.
  // 256 pages = 1 MiB.
  std::uint64_t granularity_pages = 256;
};

// `frames[i]` is the physical frame behind buffer page i, or nullopt when
// the page is not mapped (an error).
TimingTrace spoiler_trace(std::span<const std::optional<std::uint64_t>> frames,
                          const SpoilerParams& params, Rng& rng);

struct DetectorConfig {
  std::uint32_t outlier_cutoff = 400;
  std::uint32_t peak_threshold = 125;
  std::uint64_t min_region_pages = 16;

  void validate() const;
};

struct Region {
  std::size_t start = 0;
  std::size_t length = 0;

  auto operator<=>(const Region&) const = default;
};

std::vector<Region> detect_contiguous(const TimingTrace& trace, const DetectorConfig& cfg);

// Latency of accessing `b` right after `a`, in cycles.
using LatencyProbe = std::function<std::uint32_t(std::uint64_t a, std::uint64_t b)>;

// Probe backed by the DRAM model: alternates a/b accesses a few times and
// reports the final access to b, plus Gaussian noise.
LatencyProbe dram_probe(dram::Dram& dram, double noise_sd, Rng& rng);

struct BankDetectorConfig {
  std::uint32_t conflict_threshold = 280;
};

// For each candidate: true iff it sits in the same bank as `base` (any row,
// including base's own row).
std::vector<bool> detect_same_bank(std::uint64_t base, std::span<const std::uint64_t> candidates,
                                   const LatencyProbe& probe, const BankDetectorConfig& cfg = {});

// Partitions addresses into bank-equivalence classes. Each group lists
// indices into `addresses`, in input order; groups are ordered by their
// first member.
std::vector<std::vector<std::size_t>> partition_by_bank(std::span<const std::uint64_t> addresses,
                                                        const LatencyProbe& probe,
                                                        const BankDetectorConfig& cfg = {});

// Consecutive rows of one bank.
struct RowRun {
  std::vector<dram::RowAddress> rows;
};

// Rows covered by a contiguous region, split per bank group. Rows are
// resolved through the DRAM address decoder; runs keep only rows whose
// pages are all inside the region.
std::vector<RowRun> row_runs(const dram::Dram& dram, std::span<const std::uint64_t> region_frames);

struct HammerSet {
  dram::HammerPattern pattern;
  std::vector<dram::RowAddress> victims;
};

// Interleaves aggressors and victims inside each run. A run with at least
// 2n+1 rows yields V A V ... A V tiles (n aggressors, n+1 victims); a run of
// 2n-1 or 2n rows yields a single A V A ... A tile. Throws when no run is
// large enough.
std::vector<HammerSet> assemble_hammer_sets(std::span<const RowRun> runs, std::uint32_t n_sided);

}  // namespace hammersim::memwalk

#endif  // HAMMERSIM_MEMWALK_HPP
