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

#include <map>
#include <optional>
#include <sstream>

#include "doctest.h"
#include "hammersim/error.hpp"
#include "hammersim/memwalk.hpp"

using namespace hammersim;
using namespace hammersim::memwalk;

namespace {

using Frames = std::vector<std::optional<std::uint64_t>>;

// Runs of physically consecutive frames at least `granularity` long.
std::vector<Region> planted_regions(const Frames& frames, std::uint64_t granularity) {
  std::vector<Region> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= frames.size(); ++i) {
    if (i < frames.size() && *frames[i] == *frames[i - 1] + 1) continue;
    if (i - start >= granularity) out.push_back({start, i - start});
    start = i;
  }
  return out;
}

void append_run(Frames& f, std::uint64_t first, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) f.push_back(first + i);
}

void append_scattered(Frames& f, std::uint64_t first, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) f.push_back(first + 3 * i);
}

dram::Geometry geometry() {
  dram::Geometry g;
  g.banks = 8;
  g.rows_per_bank = 256;
  g.refresh_period_ms = 0.0;
  return g;
}

}  // namespace

TEST_CASE("scattered layout gives a flat trace") {
  Frames f;
  append_scattered(f, 100, 200);
  Rng rng(1);
  SpoilerParams sp;
  sp.granularity_pages = 16;
  const auto t = spoiler_trace(f, sp, rng);
  for (const auto& s : t.samples) CHECK(s.latency == sp.base_latency);
  CHECK(detect_contiguous(t, {}).empty());
}

TEST_CASE("a planted run shows equidistant peaks") {
  Frames f;
  append_scattered(f, 5000, 30);
  append_run(f, 100, 64);
  append_scattered(f, 9000, 30);
  SpoilerParams sp;
  sp.granularity_pages = 64;
  Rng rng(1);
  const auto t = spoiler_trace(f, sp, rng);
  for (const auto& s : t.samples) {
    const bool inside = s.index > 30 && s.index < 94;
    CHECK(s.latency == sp.base_latency + (inside ? sp.peak_height : 0));
  }
  const auto regions = detect_contiguous(t, {});
  REQUIRE(regions.size() == 1);
  CHECK(regions[0] == Region{30, 64});
}

TEST_CASE("runs shorter than the granularity show nothing") {
  Frames f;
  append_run(f, 100, 200);
  append_scattered(f, 9000, 10);
  SpoilerParams sp;  // 1 MiB granularity
  Rng rng(1);
  CHECK(detect_contiguous(spoiler_trace(f, sp, rng), {}).empty());
}

TEST_CASE("boundaries survive 5-cycle noise") {
  SpoilerParams sp;
  sp.granularity_pages = 32;
  sp.noise_sd = 5.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng layout(seed);
    Frames f;
    append_scattered(f, 100000, 5 + layout.below(20));
    append_run(f, 1000, 40 + layout.below(80));
    append_scattered(f, 200000, 5 + layout.below(20));
    append_run(f, 5000, 40 + layout.below(80));
    Rng rng(seed);
    CHECK(detect_contiguous(spoiler_trace(f, sp, rng), {}) == planted_regions(f, 32));
  }
}

TEST_CASE("outliers are dropped without splitting a region") {
  TimingTrace t;
  for (std::size_t i = 0; i < 40; ++i) {
    std::uint32_t lat = i >= 10 && i < 30 ? 150 : 100;
    if (i == 20) lat = 700;
    t.samples.push_back({i, lat});
  }
  DetectorConfig cfg;
  cfg.min_region_pages = 8;
  const auto r = detect_contiguous(t, cfg);
  REQUIRE(r.size() == 1);
  CHECK(r[0] == Region{9, 21});

  // A gap without an outlier is a real break.
  t.samples[20].latency = 100;
  CHECK(detect_contiguous(t, cfg).size() == 2);
}

TEST_CASE("4% planted contiguity over 1024 pages") {
  SpoilerParams sp;
  sp.granularity_pages = 41;
  Frames f;
  append_scattered(f, 100000, 500);
  append_run(f, 7000, 41);
  append_scattered(f, 300000, 483);
  Rng rng(2);
  const auto r = detect_contiguous(spoiler_trace(f, sp, rng), {});
  REQUIRE(r.size() == 1);
  CHECK(r[0] == Region{500, 41});
}

TEST_CASE("unmapped buffer page is an error") {
  Frames f{1, 2, std::nullopt};
  SpoilerParams sp;
  Rng rng(1);
  CHECK_THROWS_AS(spoiler_trace(f, sp, rng), Error);
  DetectorConfig bad;
  bad.outlier_cutoff = 100;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("trace csv") {
  TimingTrace t;
  t.samples = {{0, 100}, {1, 150}};
  std::ostringstream out;
  t.write_csv(out);
  CHECK(out.str() == "index,latency\n0,100\n1,150\n");
}

TEST_CASE("bank partition matches the address decoder") {
  dram::Dram d(geometry(), nullptr, {}, {}, 1);
  Rng pick(4);
  std::vector<std::uint64_t> addrs;
  for (int i = 0; i < 100; ++i) addrs.push_back(pick.below(d.geometry().capacity()) & ~63ull);
  Rng noise(5);
  const auto groups = partition_by_bank(addrs, dram_probe(d, 0.0, noise));

  std::map<std::uint32_t, std::vector<std::size_t>> truth;
  for (std::size_t i = 0; i < addrs.size(); ++i) truth[d.map_phys_to_dram(addrs[i]).bank].push_back(i);
  std::vector<std::vector<std::size_t>> expected;
  for (auto& [bank, members] : truth) expected.push_back(members);
  std::sort(expected.begin(), expected.end());
  auto got = groups;
  std::sort(got.begin(), got.end());
  CHECK(got == expected);
}

TEST_CASE("same-bank detection includes the base row") {
  dram::Dram d(geometry(), nullptr, {}, {}, 1);
  const auto& m = d.mapping();
  const std::uint64_t base = m.to_phys({3, 10, 0});
  const std::vector<std::uint64_t> cands = {
      m.to_phys({3, 10, 4096}),  // same row
      m.to_phys({3, 11, 0}),     // same bank
      m.to_phys({2, 10, 0}),     // other bank
      m.to_phys({3, 200, 64}),
  };
  Rng noise(1);
  CHECK(detect_same_bank(base, cands, dram_probe(d, 0.0, noise)) ==
        std::vector<bool>{true, true, false, true});
}

TEST_CASE("row runs and hammer set assembly") {
  dram::Dram d(geometry(), nullptr, {}, {}, 1);
  // Rows 10..14 of every bank, plus half of row 15.
  std::vector<std::uint64_t> frames;
  for (std::uint32_t row = 10; row < 15; ++row) {
    for (std::uint32_t bank = 0; bank < 8; ++bank) {
      for (auto f : d.frames_of_row({bank, row})) frames.push_back(f);
    }
  }
  frames.push_back(d.frames_of_row({0, 15}).front());
  const auto runs = row_runs(d, frames);
  REQUIRE(runs.size() == 8);
  for (std::uint32_t b = 0; b < 8; ++b) {
    REQUIRE(runs[b].rows.size() == 5);
    for (std::uint32_t k = 0; k < 5; ++k) CHECK(runs[b].rows[k] == dram::RowAddress{b, 10 + k});
  }

  const auto two = assemble_hammer_sets(runs, 2);
  REQUIRE(two.size() == 8);
  CHECK(two[0].pattern.aggressors == std::vector<dram::RowAddress>{{0, 11}, {0, 13}});
  CHECK(two[0].victims == std::vector<dram::RowAddress>{{0, 10}, {0, 12}, {0, 14}});

  const auto three = assemble_hammer_sets(runs, 3);
  REQUIRE(three.size() == 8);
  CHECK(three[0].pattern.aggressors == std::vector<dram::RowAddress>{{0, 10}, {0, 12}, {0, 14}});
  CHECK(three[0].victims == std::vector<dram::RowAddress>{{0, 11}, {0, 13}});

  CHECK_THROWS_AS(assemble_hammer_sets(runs, 4), Error);
  CHECK_THROWS_AS(assemble_hammer_sets(runs, 0), Error);
}
