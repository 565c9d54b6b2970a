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

#include <memory>
#include <sstream>

#include "doctest.h"
#include "hammersim/dram.hpp"
#include "hammersim/error.hpp"

using namespace hammersim;
using namespace hammersim::dram;

namespace {

Geometry small_geometry() {
  Geometry g;
  g.banks = 4;
  g.rows_per_bank = 64;
  g.row_size_bytes = 8192;
  g.page_size_bytes = 4096;
  g.refresh_period_ms = 0.0;
  return g;
}

DisturbanceParams low_threshold() {
  DisturbanceParams d;
  d.hammer_threshold = 1000;
  return d;
}

// Bank index is an XOR of two row-block bit fields; rows are the high bits.
class XorMapping final : public AddressMapping {
 public:
  explicit XorMapping(Geometry g) : g_(g) {}
  DramLocation to_dram(std::uint64_t phys) const override {
    const std::uint64_t block = phys / g_.row_size_bytes;
    const std::uint64_t row = block / g_.banks;
    const std::uint64_t bank = (block ^ row) % g_.banks;
    return {static_cast<std::uint32_t>(bank), static_cast<std::uint32_t>(row),
            static_cast<std::uint32_t>(phys % g_.row_size_bytes)};
  }
  std::uint64_t to_phys(const DramLocation& loc) const override {
    const std::uint64_t low = (loc.bank ^ loc.row) % g_.banks;
    return (std::uint64_t{loc.row} * g_.banks + low) * g_.row_size_bytes + loc.offset;
  }

 private:
  Geometry g_;
};

}  // namespace

TEST_CASE("interleaved mapping matches the closed form") {
  const Geometry g = small_geometry();
  InterleavedMapping m(g);
  Rng rng(11);
  for (int i = 0; i < 5000; ++i) {
    const std::uint64_t phys = rng.below(g.capacity());
    const auto loc = m.to_dram(phys);
    CHECK(loc.bank == (phys / 8192) % 4);
    CHECK(loc.row == phys / 8192 / 4);
    CHECK(loc.offset == phys % 8192);
    CHECK(m.to_phys(loc) == phys);
  }
  CHECK_THROWS_AS(m.to_dram(g.capacity()), OutOfRange);
  CHECK_THROWS_AS(m.to_phys({4, 0, 0}), OutOfRange);
}

TEST_CASE("frames of a row map back to that row") {
  const Geometry g = small_geometry();
  Dram d(g, nullptr, {}, {}, 1);
  for (std::uint32_t row = 0; row < g.rows_per_bank; row += 7) {
    const auto frames = d.frames_of_row({2, row});
    REQUIRE(frames.size() == g.pages_per_row());
    for (auto f : frames) CHECK(d.row_of_frame(f) == RowAddress{2, row});
  }
}

TEST_CASE("custom mapping is used for flips and lookups") {
  const Geometry g = small_geometry();
  auto mapping = std::make_shared<XorMapping>(g);
  auto profile = std::make_shared<FlipProfile>();
  profile->add({1, 10, 3}, FlipDirection::kZeroToOne, 1.0);
  Dram d(g, profile, low_threshold(), {}, 1, {}, mapping);
  const std::uint64_t phys = mapping->to_phys({1, 10, 0});
  CHECK(d.map_phys_to_dram(phys) == DramLocation{1, 10, 0});
  CHECK(d.row_of_frame(phys / g.page_size_bytes) == RowAddress{1, 10});
  HammerPattern p;
  p.aggressors = {{1, 9}, {1, 11}};
  p.accesses_per_round = 600;
  p.rounds = 1;
  const auto flips = d.hammer(p);
  REQUIRE(flips.size() == 1);
  CHECK(flips[0].phys_byte == phys);
  std::uint8_t byte = 0;
  d.read(phys, {&byte, 1});
  CHECK(byte == 0x08);
}

TEST_CASE("row buffer timing") {
  Dram d(small_geometry(), nullptr, {}, {}, 1);
  const auto& t = d.timing();
  CHECK(d.activate(0, 5, 0) == t.row_miss_cycles);
  CHECK(d.activate(0, 5, 0) == t.row_hit_cycles);
  CHECK(d.activate(0, 6, 0) == t.row_conflict_cycles);
  CHECK(d.activate(1, 6, 0) == t.row_miss_cycles);
  CHECK(d.activations(0, 5) == 1);
  CHECK(d.activations(0, 6) == 1);
  CHECK_THROWS_AS(d.activate(4, 0, 0), OutOfRange);
  CHECK_THROWS_AS(d.activate(0, 64, 0), OutOfRange);
}

TEST_CASE("flip needs the threshold and the right stored value") {
  const Geometry g = small_geometry();
  auto profile = std::make_shared<FlipProfile>();
  profile->add({0, 20, 17}, FlipDirection::kOneToZero, 1.0);
  const std::uint64_t phys = InterleavedMapping(g).to_phys({0, 20, 17 / 8});

  SUBCASE("below threshold") {
    Dram d(g, profile, low_threshold(), {}, 1);
    d.fill_page(phys / g.page_size_bytes, 0xff);
    HammerPattern p;
    p.aggressors = {{0, 19}, {0, 21}};
    p.accesses_per_round = 499;
    p.rounds = 1;
    CHECK(d.hammer(p).empty());
  }
  SUBCASE("at threshold") {
    Dram d(g, profile, low_threshold(), {}, 1);
    d.fill_page(phys / g.page_size_bytes, 0xff);
    HammerPattern p;
    p.aggressors = {{0, 19}, {0, 21}};
    p.accesses_per_round = 500;
    p.rounds = 1;
    const auto flips = d.hammer(p);
    REQUIRE(flips.size() == 1);
    CHECK(flips[0].cell == CellAddress{0, 20, 17});
    CHECK(flips[0].before == 0xff);
    CHECK(flips[0].after == 0xfd);
    CHECK(d.flip_log().size() == 1);
  }
  SUBCASE("cell already holds the flipped value") {
    Dram d(g, profile, low_threshold(), {}, 1);
    HammerPattern p;
    p.aggressors = {{0, 19}, {0, 21}};
    p.accesses_per_round = 5000;
    p.rounds = 3;
    CHECK(d.hammer(p).empty());
  }
  SUBCASE("unfenced loops lose efficiency") {
    Dram d(g, profile, low_threshold(), {}, 1);
    d.fill_page(phys / g.page_size_bytes, 0xff);
    HammerPattern p;
    p.aggressors = {{0, 19}, {0, 21}};
    p.accesses_per_round = 500;
    p.rounds = 1;
    p.fenced = false;
    CHECK(d.hammer(p).empty());
  }
  SUBCASE("a lone aggressor keeps its row open") {
    Dram d(g, profile, low_threshold(), {}, 1);
    d.fill_page(phys / g.page_size_bytes, 0xff);
    HammerPattern p;
    p.aggressors = {{0, 19}};
    p.accesses_per_round = 1'000'000;
    p.rounds = 10;
    CHECK(d.hammer(p).empty());
    CHECK(d.activations(0, 19) == 10);
  }
}

TEST_CASE("refresh clears disturbance between windows") {
  Geometry g = small_geometry();
  g.refresh_period_ms = 64.0;
  auto profile = std::make_shared<FlipProfile>();
  profile->add({0, 20, 0}, FlipDirection::kZeroToOne, 1.0);
  Dram d(g, profile, low_threshold(), {}, 1);
  HammerPattern p;
  p.aggressors = {{0, 19}, {0, 21}};
  p.accesses_per_round = 400;
  p.rounds = 5;
  CHECK(d.hammer(p).empty());
  CHECK(d.window() == 5);

  Dram accumulating(small_geometry(), profile, low_threshold(), {}, 1);
  CHECK(accumulating.hammer(p).size() == 1);
}

TEST_CASE("distance-two disturbance") {
  const Geometry g = small_geometry();
  auto profile = std::make_shared<FlipProfile>();
  profile->add({0, 20, 0}, FlipDirection::kZeroToOne, 1.0);
  DisturbanceParams dp = low_threshold();
  HammerPattern p;
  p.aggressors = {{0, 18}, {0, 22}};
  p.accesses_per_round = 600;
  p.rounds = 1;
  Dram near_only(g, profile, dp, {}, 1);
  CHECK(near_only.hammer(p).empty());
  dp.distance2 = true;
  Dram far(g, profile, dp, {}, 1);
  CHECK(far.hammer(p).size() == 1);
}

TEST_CASE("TRR refreshes neighbours of tracked rows") {
  Geometry g = small_geometry();
  g.refresh_period_ms = 64.0;
  auto profile = std::make_shared<FlipProfile>();
  profile->add({0, 20, 0}, FlipDirection::kZeroToOne, 1.0);
  profile->add({0, 40, 0}, FlipDirection::kZeroToOne, 1.0);
  DisturbanceParams dp = low_threshold();
  const TrrConfig trr{true, 4, 2000};

  SUBCASE("double-sided is caught") {
    Dram d(g, profile, dp, trr, 1);
    HammerPattern p;
    p.aggressors = {{0, 19}, {0, 21}};
    p.accesses_per_round = 5000;
    p.rounds = 20;
    CHECK(d.hammer(p).empty());
  }
  SUBCASE("many-sided overflows the sampler") {
    Dram d(g, profile, dp, trr, 1);
    HammerPattern p;
    // Ten decoys fill the sampler before the pair around row 40 is touched.
    for (std::uint32_t r = 1; r <= 17; r += 2) p.aggressors.push_back({0, r});
    p.aggressors.push_back({0, 23});
    p.aggressors.push_back({0, 39});
    p.aggressors.push_back({0, 41});
    p.accesses_per_round = 5000;
    p.rounds = 1;
    const auto flips = d.hammer(p);
    REQUIRE(flips.size() == 1);
    CHECK(flips[0].cell.row == 40);
    CHECK(d.trr_state().tracked.size() <= 4);
  }
  CHECK_THROWS_AS(Dram(g, profile, dp, TrrConfig{true, 0, 10}, 1), ConfigError);
}

TEST_CASE("flips are deterministic per seed") {
  const Geometry g = small_geometry();
  auto profile = std::make_shared<FlipProfile>();
  for (std::uint32_t b = 0; b < 64; ++b) profile->add({0, 20, b}, FlipDirection::kZeroToOne, 0.5);
  HammerPattern p;
  p.aggressors = {{0, 19}, {0, 21}};
  p.accesses_per_round = 600;
  p.rounds = 1;
  auto bits = [&](std::uint64_t seed) {
    Dram d(g, profile, low_threshold(), {}, seed);
    std::vector<std::uint32_t> out;
    for (const auto& f : d.hammer(p)) out.push_back(f.cell.bit);
    return out;
  };
  CHECK(bits(3) == bits(3));
  CHECK(bits(3) != bits(4));
  const auto n = bits(3).size();
  CHECK(n > 16);
  CHECK(n < 48);
}

TEST_CASE("profile store and load round trip") {
  FlipProfile p;
  p.add({1, 2, 3}, FlipDirection::kOneToZero, 0.25);
  p.add({0, 7, 65535}, FlipDirection::kZeroToOne, 1.0);
  p.add({1, 2, 3}, FlipDirection::kZeroToOne, 0.5);  // replaces
  CHECK(p.size() == 2);
  std::stringstream ss;
  p.store(ss);
  const auto q = FlipProfile::load(ss);
  REQUIRE(q.size() == 2);
  const auto* c = q.find({1, 2, 3});
  REQUIRE(c != nullptr);
  CHECK(c->direction == FlipDirection::kZeroToOne);
  CHECK(c->prob == 0.5);
  CHECK(q.find({1, 2, 4}) == nullptr);
  CHECK_THROWS_AS(p.add({0, 0, 0}, FlipDirection::kZeroToOne, 0.0), Error);

  std::istringstream bad("# header\n0 1 2 1to0 0.5\n0 1 x 1to0 0.5\n");
  try {
    FlipProfile::load(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("generated profile density and mix") {
  Geometry g = small_geometry();
  g.rows_per_bank = 256;  // 8 MiB
  ProfileGenParams params;
  params.cells_per_mib = 1000.0;
  Rng rng(21);
  const auto p = generate_profile(g, params, rng);
  CHECK(p.size() == 8000);
  std::size_t up = 0, reproducible = 0;
  p.for_each([&](const CellAddress& c, const ProfileCell& cell) {
    CHECK(c.row < g.rows_per_bank);
    up += cell.direction == FlipDirection::kZeroToOne;
    reproducible += cell.prob >= params.high_prob_min;
  });
  CHECK(static_cast<double>(up) / 8000 == doctest::Approx(0.5).epsilon(0.06));
  CHECK(static_cast<double>(reproducible) / 8000 == doctest::Approx(0.15).epsilon(0.1));

  Rng rng2(21);
  const auto scoped = generate_profile(g, params, rng2, RowScope{100, 10});
  scoped.for_each([&](const CellAddress& c, const ProfileCell&) {
    CHECK(c.row >= 100);
    CHECK(c.row < 110);
  });
}

TEST_CASE("geometry and pattern validation") {
  Geometry g = small_geometry();
  g.row_size_bytes = 6000;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  CHECK_THROWS_AS(dimm_preset("ddr9"), ConfigError);
  HammerPattern p;
  CHECK_THROWS_AS(p.validate(small_geometry()), Error);
  p.aggressors = {{0, 1}, {1, 3}};
  CHECK_THROWS_AS(p.validate(small_geometry()), Error);
  p.aggressors = {{0, 1}, {0, 1}};
  CHECK_THROWS_AS(p.validate(small_geometry()), Error);
  p.aggressors = {{0, 1}, {0, 64}};
  CHECK_THROWS_AS(p.validate(small_geometry()), OutOfRange);
}

TEST_CASE("page contents") {
  const Geometry g = small_geometry();
  Dram d(g, nullptr, {}, {}, 1);
  CHECK(d.page_equals(3, 0));
  d.fill_page(3, 0xaa);
  CHECK(d.page_equals(3, 0xaa));
  std::vector<std::uint8_t> buf(10, 0x11);
  d.write(3 * 4096 + 4090, buf);  // spans two pages
  std::vector<std::uint8_t> back(10);
  d.read(3 * 4096 + 4090, back);
  CHECK(back == buf);
  CHECK_FALSE(d.page_equals(4, 0));
  CHECK_THROWS_AS(d.read_page(g.total_pages()), OutOfRange);
  CHECK_THROWS_AS(d.write_page(0, std::vector<std::uint8_t>(5)), Error);
}
