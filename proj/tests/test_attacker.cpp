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

#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "doctest.h"
#include "hammersim/attacker.hpp"
#include "hammersim/error.hpp"

using namespace hammersim;
using namespace hammersim::attacker;
using dram::FlipDirection;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

double oracle_p_fault(double n_avg, double n_flippy, double n_pages, double fraction) {
  if (n_flippy <= 0) return 0.0;
  const Big ratio = Big(n_avg) / Big(n_flippy);
  const Big q = Big(1) - ratio;
  return static_cast<double>((Big(1) - boost::multiprecision::pow(q, Big(n_pages) * Big(fraction))) * 100);
}

dram::Geometry small_geometry() {
  dram::Geometry g;
  g.banks = 8;
  g.rows_per_bank = 256;
  g.refresh_period_ms = 64.0;
  return g;
}

// One certain 0->1 cell at in-page byte `page_byte`, bit `bit`, in the
// first frame of bank 0 row 100.
struct Planted {
  dram::Dram mem;
  std::uint64_t frame;

  Planted(std::uint32_t page_byte, std::uint32_t bit, double prob = 1.0)
      : mem(make(page_byte, bit, prob)),
        frame(mem.dram_to_phys({0, 100, page_byte}) / osmodel::kPageSize) {}

  static dram::Dram make(std::uint32_t page_byte, std::uint32_t bit, double prob) {
    auto profile = std::make_shared<dram::FlipProfile>();
    profile->add({0, 100, page_byte * 8 + bit}, FlipDirection::kZeroToOne, prob);
    dram::DisturbanceParams d;
    d.hammer_threshold = 1000;
    return dram::Dram(small_geometry(), profile, d, {}, 1);
  }
};

std::vector<memwalk::RowRun> rows_around(std::uint32_t bank, std::uint32_t lo, std::uint32_t hi) {
  memwalk::RowRun run;
  for (std::uint32_t r = lo; r <= hi; ++r) run.rows.push_back({bank, r});
  return {run};
}

}  // namespace

TEST_CASE("fault probability matches a high-precision oracle") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double n_flippy = 1 + static_cast<double>(rng.below(100000));
    const double n_avg = rng.uniform() * n_flippy;
    const double n_pages = static_cast<double>(rng.below(1u << 24));
    const double got = p_fault_percent(n_avg, n_flippy, n_pages);
    const double want = oracle_p_fault(n_avg, n_flippy, n_pages, 0.001);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
  CHECK(p_fault_percent(0, 100, 1e6) == 0.0);
  CHECK(p_fault_percent(5, 0, 1e6) == 0.0);
  CHECK(p_fault_percent(100, 100, 1e6) == 100.0);
  CHECK(p_fault_percent(50, 100, 1e9) == doctest::Approx(100.0));
}

TEST_CASE("fault estimate counts bits per target slot") {
  FlipMap map;
  map.trials = 1;
  Rng rng(3);
  for (std::uint64_t f = 0; f < 50; ++f) {
    for (int k = 0; k < 5; ++k) {
      map.entries.push_back({f, static_cast<std::uint32_t>(rng.below(32768)), FlipDirection::kOneToZero, 1});
    }
  }
  for (std::uint32_t nibble : {0u, 4u, 12u}) {
    const auto est = estimate_fault_probability(map, 16384, 0.001, 4, nibble);
    // Independent route: walk the 256 slots and count bits inside each.
    std::uint64_t hits = 0;
    for (std::uint64_t slot = 0; slot < 256; ++slot) {
      const std::uint64_t lo = slot * 16 + nibble;
      for (const auto& e : map.entries) hits += e.bit / 8 >= lo && e.bit / 8 < lo + 4;
    }
    CHECK(est.n_flippy == 50);
    CHECK(est.n_avg == doctest::Approx(hits / 256.0));
    CHECK(est.p_fault == doctest::Approx(oracle_p_fault(hits / 256.0, 50, 16384, 0.001)));
  }
  CHECK_THROWS_AS(estimate_fault_probability(map, 1, 0.001, 4, 13), Error);
}

TEST_CASE("flip map text round trip") {
  FlipMap map;
  map.trials = 10;
  map.entries = {{3, 17, FlipDirection::kOneToZero, 9}, {3, 400, FlipDirection::kZeroToOne, 1},
                 {8, 0, FlipDirection::kZeroToOne, 10}};
  std::stringstream ss;
  map.store(ss);
  const auto back = FlipMap::load(ss);
  CHECK(back.trials == 10);
  REQUIRE(back.entries.size() == 3);
  CHECK(back.entries[1].bit == 400);
  CHECK(back.entries[1].direction == FlipDirection::kZeroToOne);
  CHECK(back.flippy_pages() == 2);

  std::istringstream too_many("# trials 2\n1 2 1to0 3\n");
  CHECK_THROWS_AS(FlipMap::load(too_many), ParseError);
  std::istringstream beyond("# trials 2\n1 40000 1to0 1\n");
  CHECK_THROWS_AS(FlipMap::load(beyond), ParseError);
}

TEST_CASE("offline profiling recovers planted cells") {
  auto profile = std::make_shared<dram::FlipProfile>();
  profile->add({0, 50, 100}, FlipDirection::kZeroToOne, 1.0);
  profile->add({0, 52, 7}, FlipDirection::kOneToZero, 1.0);
  profile->add({0, 53, 9}, FlipDirection::kOneToZero, 1e-9);
  dram::DisturbanceParams d;
  d.hammer_threshold = 1000;
  dram::Dram mem(small_geometry(), profile, d, {}, 1);
  ProfileOptions opts;
  opts.accesses_per_round = 1000;
  const auto runs = rows_around(0, 45, 60);
  const auto map = profile_offline(mem, runs, 3, 0.0, opts);
  REQUIRE(map.entries.size() == 2);
  const auto phys_a = mem.dram_to_phys({0, 50, 100 / 8});
  CHECK(map.entries[0].frame * 4096 + map.entries[0].byte() == phys_a);
  CHECK(map.entries[0].bit % 8 == 100 % 8);
  CHECK(map.entries[0].direction == FlipDirection::kZeroToOne);
  CHECK(map.entries[0].count == 3);
  CHECK(map.entries[1].direction == FlipDirection::kOneToZero);

  ProfileOptions one_way = opts;
  one_way.both_polarities = false;
  dram::Dram again(small_geometry(), profile, d, {}, 1);
  const auto ones = profile_offline(again, runs, 1, 0.0, one_way);
  REQUIRE(ones.entries.size() == 1);
  CHECK(ones.entries[0].direction == FlipDirection::kOneToZero);

  std::ostringstream heat;
  map.write_heatmap_csv(heat, mem);
  CHECK(heat.str().rfind("bank,row,bit,direction,count\n0,50,100,0to1,3\n", 0) == 0);

  ProfileOptions wide = opts;
  wide.n_sided = 11;
  CHECK_THROWS_AS(profile_offline(mem, runs, 1, 0.0, wide), Error);
}

TEST_CASE("useful flips respect direction, width and the check") {
  victims::SecurityVar ne0;
  ne0.check = {victims::CheckOp::kNotEquals, 0};
  CHECK(useful_flip(ne0, 16, 16 * 8 + 3, FlipDirection::kZeroToOne));
  CHECK(useful_flip(ne0, 16, 19 * 8 + 7, FlipDirection::kZeroToOne));
  CHECK_FALSE(useful_flip(ne0, 16, 20 * 8, FlipDirection::kZeroToOne));
  CHECK_FALSE(useful_flip(ne0, 16, 16 * 8, FlipDirection::kOneToZero));

  victims::SecurityVar eq1 = ne0;
  eq1.check = {victims::CheckOp::kEquals, 1};
  CHECK(useful_flip(eq1, 0, 0, FlipDirection::kZeroToOne));
  CHECK_FALSE(useful_flip(eq1, 0, 1, FlipDirection::kZeroToOne));
}

TEST_CASE("calibration at zero noise is a single spike") {
  Planted p(0xd08, 5);
  const auto prog = victims::preset("sudo");
  CalibrationOptions opts;
  opts.spawns = 30;
  opts.spawn = {false, 0.0, 3};
  const auto hist = calibrate_bait_count(p.mem, prog, opts, 9);
  CHECK(hist.spawns == 30);
  CHECK(hist.misses == 0);
  REQUIRE(hist.counts.size() == 1);
  CHECK(hist.mode() == prog.layout.filler_frames + 1);
  CHECK(hist.mode_rate() == 1.0);

  // Register targets are found through the sentinel.
  const auto reg = victims::preset("tls-client-register");
  const auto rh = calibrate_bait_count(p.mem, reg, opts, 9);
  CHECK(rh.misses == 0);
  CHECK(rh.mode_rate() == 1.0);
}

TEST_CASE("planted attack succeeds every time without noise") {
  const auto prog = victims::preset("sudo");
  // With ASLR off the target sits at a fixed page offset.
  const std::uint64_t base = osmodel::align_stack(osmodel::kStackTop - prog.layout.env_bytes, 0);
  const std::uint64_t offset = (base - victims::target_depth(prog)) % osmodel::kPageSize;
  Planted p(static_cast<std::uint32_t>(offset + 1), 2);

  ProfileOptions popts;
  popts.accesses_per_round = 1000;
  const auto runs = rows_around(0, 90, 110);
  dram::Dram sweep = p.mem;
  const auto map = profile_offline(sweep, runs, 1, 0.0, popts);
  REQUIRE(map.entries.size() == 1);

  PlanOptions opts;
  opts.accesses_per_round = 1000;
  opts.rounds = 1;
  opts.stop_in_interval = 1.0;
  const auto plan = plan_attack(map, prog, p.mem, prog.layout.filler_frames + 1, opts);
  CHECK(plan.flippy_frame == p.frame);
  CHECK(plan.target_bit == (offset + 1) * 8 + 2);
  CHECK(plan.coverage == 1);
  REQUIRE(plan.pattern.aggressors.size() == 2);
  CHECK(plan.pattern.aggressors[0] == dram::RowAddress{0, 99});
  CHECK(plan.pattern.aggressors[1] == dram::RowAddress{0, 101});

  AttackContext ctx{&p.mem, {false, 0.0, 3}, 5};
  const auto results = run_trials(ctx, plan, prog, 10);
  for (const auto& r : results) {
    CHECK(r.co_located);
    CHECK(r.outcome == victims::AuthOutcome::kSuccess);
    CHECK(r.flipped_bits == std::vector<std::uint32_t>{10});
    CHECK(r.stack_offset == offset);
  }

  SUBCASE("off-by-one bait count misses") {
    auto off = plan;
    off.bait_count += 1;
    for (const auto& r : run_trials(ctx, off, prog, 10)) {
      CHECK_FALSE(r.co_located);
      CHECK(r.outcome == victims::AuthOutcome::kFailure);
    }
  }
  SUBCASE("relaunch succeeds on the first attempt") {
    const auto r = relaunch_loop(ctx, plan, prog, 5, 0);
    CHECK(r.first_success == std::optional<std::uint32_t>{0});
    CHECK(r.attempts == 1);
    const auto model = relaunch_model(plan, prog, ctx.spawn, p.mem);
    CHECK(model.co_location == 1.0);
    CHECK(model.per_attempt == 1.0);
    CHECK(model.within(1) == 1.0);
  }
  SUBCASE("sigstop outside the interval fails") {
    auto late = plan;
    late.stop_in_interval = 0.0;
    for (const auto& r : run_trials(ctx, late, prog, 10)) {
      CHECK_FALSE(r.acted_in_interval);
      CHECK(r.outcome == victims::AuthOutcome::kFailure);
      CHECK(r.flipped_bits.empty());
    }
  }
}

TEST_CASE("parallel trials match serial trials") {
  const auto prog = victims::preset("sudo");
  Planted p(0x308, 1, 0.3);
  PlanOptions opts;
  opts.accesses_per_round = 1000;
  opts.rounds = 2;
  FlipMap map;
  map.trials = 1;
  map.entries = {{p.frame, 0x308 * 8 + 1, FlipDirection::kZeroToOne, 1}};
  const auto plan = plan_attack(map, prog, p.mem, prog.layout.filler_frames + 1, opts);
  AttackContext ctx{&p.mem, {true, 0.48, 3}, 77};
  const auto serial = run_trials(ctx, plan, prog, 40, 1);
  const auto parallel = run_trials(ctx, plan, prog, 40, 3);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].co_located == parallel[i].co_located);
    CHECK(serial[i].outcome == parallel[i].outcome);
    CHECK(serial[i].stack_offset == parallel[i].stack_offset);
    CHECK(serial[i].flipped_bits == parallel[i].flipped_bits);
  }
}

TEST_CASE("relaunch model against an exact count") {
  const auto prog = victims::preset("sudo");
  Planted p(0x308, 1);
  FlipMap map;
  map.trials = 1;
  map.entries = {{p.frame, 0x308 * 8 + 1, FlipDirection::kZeroToOne, 1}};
  PlanOptions opts;
  opts.accesses_per_round = 1000;
  opts.rounds = 1;
  opts.stop_in_interval = 1.0;
  const auto plan = plan_attack(map, prog, p.mem, prog.layout.filler_frames + 1, opts);
  const osmodel::SpawnOptions spawn{true, 0.0, 3};
  const auto model = relaunch_model(plan, prog, spawn, p.mem);

  // Enumerate the randomisation values directly.
  std::uint64_t co = 0, hit = 0;
  for (std::uint64_t r = 0; r < osmodel::kStackRandomRange; ++r) {
    const auto base = osmodel::align_stack(osmodel::kStackTop - prog.layout.env_bytes, r);
    const auto addr = base - victims::target_depth(prog);
    const auto pages_above = (osmodel::kStackTop - 1) / 4096 - addr / 4096;
    if (pages_above != 1) continue;
    ++co;
    const auto off = addr % 4096;
    hit += off <= 0x308 && 0x308 < off + 4;
  }
  CHECK(model.co_location == doctest::Approx(static_cast<double>(co) / 8192));
  CHECK(model.per_attempt == doctest::Approx(static_cast<double>(hit) / 8192));
  CHECK(model.within(0) == 0.0);
  CHECK(model.within(100) == doctest::Approx(1 - std::pow(1 - model.per_attempt, 100)));
}

TEST_CASE("minor faults narrow the offset") {
  const auto prog = victims::preset("sudo");
  Planted p(0, 0);
  osmodel::Os os(p.mem);
  Rng a(4), b(4);
  for (int i = 0; i < 40; ++i) {
    const int pid = os.spawn(prog.layout, {true, 0.0, 3}, a, b);
    const auto truth = victims::target_page_offset(prog, os.process(pid).stack_base);
    const auto cands = infer_offset_from_faults(os, pid, prog);
    CHECK(std::find(cands.begin(), cands.end(), truth) != cands.end());
    CHECK(cands.size() < 256);
    os.exit(pid);
  }
  const int fixed = os.spawn(prog.layout, {false, 0.0, 3}, a, b);
  CHECK(infer_offset_from_faults(os, fixed, prog).size() == 1);
}

TEST_CASE("remapping estimate is noisy") {
  Rng rng(1);
  double err = 0;
  for (int i = 0; i < 1000; ++i) err += std::abs(remap_bait_estimate(100, 8.0, rng) - 100);
  CHECK(err / 1000 > 4.0);
}
