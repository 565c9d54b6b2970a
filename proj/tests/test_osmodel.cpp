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

#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hammersim/error.hpp"
#include "hammersim/osmodel.hpp"

using namespace hammersim;
using namespace hammersim::osmodel;

namespace {

dram::Dram make_memory(std::uint32_t rows = 256) {
  dram::Geometry g;
  g.banks = 8;
  g.rows_per_bank = rows;
  g.refresh_period_ms = 0.0;
  return dram::Dram(g, nullptr, {}, {}, 1);
}

std::uint64_t rsp(const Process& p) { return p.regs[static_cast<std::size_t>(Reg::kRsp)]; }
std::uint64_t& reg(Process& p, Reg r) { return p.regs[static_cast<std::size_t>(r)]; }

}  // namespace

TEST_CASE("free list behaves like a reference stack") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    FreeStack fs(64);
    std::vector<std::uint64_t> ref;  // back = top
    for (int step = 0; step < 2000; ++step) {
      const auto op = rng.below(3);
      const std::uint64_t f = rng.below(64);
      const bool present = std::find(ref.begin(), ref.end(), f) != ref.end();
      if (op == 0) {
        if (present) {
          CHECK_THROWS_AS(fs.push(f), Error);
        } else {
          fs.push(f);
          ref.push_back(f);
        }
      } else if (op == 1) {
        if (ref.empty()) {
          CHECK_THROWS_AS(fs.pop(), OutOfMemory);
        } else {
          CHECK(fs.pop() == ref.back());
          ref.pop_back();
        }
      } else {
        CHECK(fs.take(f) == present);
        if (present) ref.erase(std::find(ref.begin(), ref.end(), f));
      }
      REQUIRE(fs.size() == ref.size());
    }
    CHECK(fs.frames() == std::vector<std::uint64_t>(ref.rbegin(), ref.rend()));
    for (std::uint64_t f = 0; f < 64; ++f) {
      CHECK(fs.contains(f) == (std::find(ref.begin(), ref.end(), f) != ref.end()));
    }
  }
  FreeStack fs(4);
  CHECK_THROWS_AS(fs.push(4), OutOfRange);
}

TEST_CASE("fresh OS hands out the lowest frames first") {
  auto mem = make_memory();
  Os os(mem);
  CHECK(os.alloc_frame() == 0);
  CHECK(os.alloc_frame() == 1);
  os.free_frame(0);
  CHECK(os.alloc_frame() == 0);
}

TEST_CASE("stack alignment") {
  CHECK(align_stack(0x7ffffffff000 - 0x200, 0) == 0x7fffffffee00);
  for (std::uint64_t r = 0; r < kStackRandomRange; r += 37) {
    const auto sp = align_stack(kStackTop - 0x1e8, r);
    CHECK(sp % 16 == 0);
    CHECK(sp <= kStackTop - 0x1e8 - r);
    CHECK(sp + 16 > kStackTop - 0x1e8 - r);
  }
  CHECK(AddrLayout::for_memory(64ull << 20).phys_bits == 26);
  CHECK(AddrLayout::for_memory(64ull << 20).frame_bits() == 14);
  CHECK_THROWS_AS(AddrLayout::for_memory(3 << 20), Error);
}

TEST_CASE("spawn layout and ASLR") {
  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  layout.filler_frames = 10;
  Rng a(1), b(2);
  const int pid = os.spawn(layout, {false, 0.0, 3}, a, b);
  const auto& p = os.process(pid);
  CHECK(p.filler_used == 10);
  CHECK(p.stack_base == align_stack(kStackTop - layout.env_bytes, 0));
  CHECK(rsp(p) == p.stack_base);
  CHECK(p.alloc_order.front() == 0);
  // Filler first, then the stack from the top page down.
  CHECK(os.translate(pid, kTextBase) == std::optional<std::uint64_t>{0});
  CHECK(os.translate(pid, kStackTop - 1) == std::optional<std::uint64_t>{10});
  CHECK_FALSE(os.translate(pid, 0x1000).has_value());

  std::set<std::uint64_t> offsets;
  for (int i = 0; i < 200; ++i) {
    const int q = os.spawn(layout, {true, 0.0, 3}, a, b);
    const auto base = os.process(q).stack_base;
    CHECK(base % 16 == 0);
    offsets.insert(base % kPageSize);
    os.exit(q);
  }
  CHECK(offsets.size() > 100);
}

TEST_CASE("exit recycles frames LIFO") {
  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  layout.filler_frames = 5;
  Rng a(1), b(1);
  const int pid = os.spawn(layout, {false, 0.0, 3}, a, b);
  const auto order = os.process(pid).alloc_order;
  os.exit(pid);
  CHECK(os.process(pid).state == ProcState::kExited);
  const auto top = os.free_list().frames();
  REQUIRE(top.size() >= order.size());
  CHECK(std::equal(order.rbegin(), order.rend(), top.begin()));
  os.exit(pid);  // idempotent
}

TEST_CASE("bait frames steer the stack onto a chosen frame") {
  auto mem = make_memory();
  Os os(mem);
  const std::uint64_t flippy = 777;
  const std::uint32_t bait = 12;
  REQUIRE(os.free_list().take(flippy));
  std::vector<std::uint64_t> baits;
  for (std::uint32_t i = 0; i < bait; ++i) baits.push_back(os.alloc_frame());
  os.free_frame(flippy);
  for (auto it = baits.rbegin(); it != baits.rend(); ++it) os.free_frame(*it);

  ProgramLayout layout;
  layout.filler_frames = bait;
  Rng a(1), b(1);
  const int pid = os.spawn(layout, {false, 0.0, 3}, a, b);
  CHECK(os.translate(pid, kStackTop - 1) == std::optional<std::uint64_t>{flippy});
}

TEST_CASE("placement noise perturbs filler consumption") {
  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  layout.filler_frames = 50;
  Rng a(3), b(3);
  int changed = 0;
  for (int i = 0; i < 1000; ++i) {
    const int pid = os.spawn(layout, {false, 0.5, 3}, a, b);
    const auto used = static_cast<int>(os.process(pid).filler_used);
    CHECK(std::abs(used - 50) <= 3);
    changed += used != 50;
    os.exit(pid);
  }
  CHECK(changed == doctest::Approx(500).epsilon(0.1));
}

TEST_CASE("processes are isolated and stacks start zeroed") {
  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  layout.filler_frames = 3;
  Rng a(1), b(1);
  const int p1 = os.spawn(layout, {true, 0.0, 3}, a, b);
  const std::uint64_t va = os.process(p1).stack_base - 64;
  os.write_value(p1, va, 0xdeadbeefcafef00d, 8);
  CHECK(os.read_value(p1, va, 8) == 0xdeadbeefcafef00d);
  CHECK(os.read_value(p1, va, 2) == 0xf00d);
  os.exit(p1);
  const int p2 = os.spawn(layout, {false, 0.0, 3}, a, b);
  const auto& q = os.process(p2);
  for (std::uint64_t v = q.stack_base - layout.stack_extent; v < q.stack_base; v += 8) {
    REQUIRE(os.read_value(p2, v, 8) == 0);
  }
  CHECK_THROWS_AS(os.read_value(p2, 0x10, 8), Error);
  CHECK_THROWS_AS(os.process(42), Error);
}

TEST_CASE("spawn rolls back when memory runs out") {
  auto mem = make_memory(1);  // 16 frames
  Os os(mem);
  ProgramLayout layout;
  layout.filler_frames = 14;
  Rng a(1), b(1);
  CHECK_THROWS_AS(os.spawn(layout, {false, 0.0, 3}, a, b), OutOfMemory);
  CHECK(os.free_list().size() == 16);
  CHECK(os.free_list().frames().front() == 0);
}

TEST_CASE("blocking window spills and reloads registers") {
  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  Rng a(1), b(1);
  const int pid = os.spawn(layout, {true, 0.0, 3}, a, b);
  auto& p = os.process(pid);
  reg(p, Reg::kRbx) = 1;
  reg(p, Reg::kR12) = 0x1234;
  os.open_window(pid, {Reg::kRbx, Reg::kR12}, 0x40);
  CHECK(p.state == ProcState::kBlocked);
  CHECK(os.read_value(pid, p.stack_base - 0x40, 8) == 1);
  CHECK(os.read_value(pid, p.stack_base - 0x38, 8) == 0x1234);
  CHECK_THROWS_AS(os.open_window(pid, {Reg::kRbx}, 0x40), Error);

  // A fault in the spill slot reaches the register.
  os.write_value(pid, p.stack_base - 0x40, 1 | (1u << 9), 8);
  os.close_window(pid);
  CHECK(p.state == ProcState::kRunning);
  CHECK(reg(p, Reg::kRbx) == 0x201);
  CHECK(reg(p, Reg::kR12) == 0x1234);
  CHECK_THROWS_AS(os.close_window(pid), Error);
}

TEST_CASE("handled signal saves registers in a signal frame") {
  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  layout.signal_handler = true;
  Rng a(1), b(1);
  const int pid = os.spawn(layout, {true, 0.0, 3}, a, b);
  auto& p = os.process(pid);
  for (std::size_t i = 0; i < kNumRegs; ++i) {
    if (static_cast<Reg>(i) != Reg::kRsp) p.regs[i] = 0x100 + i;
  }
  const auto saved = p.regs;
  os.deliver_signal(pid, Signal::kHandled);
  REQUIRE(p.handler_active);
  CHECK(p.sigframe < rsp(p) - kRedZone);
  const auto& order = sigframe_order();
  const auto rax_slot = static_cast<std::size_t>(
      std::find(order.begin(), order.end(), Reg::kRax) - order.begin());
  const std::uint64_t rax_addr = p.sigframe + kSigFrameGregs + 8 * rax_slot;
  CHECK(os.read_value(pid, rax_addr, 8) == 0x100);

  os.deliver_signal(pid, Signal::kStop);
  CHECK(p.state == ProcState::kStopped);
  os.write_value(pid, rax_addr, 0x101, 8);
  os.deliver_signal(pid, Signal::kCont);
  CHECK(p.state == ProcState::kRunning);
  CHECK_FALSE(p.handler_active);
  CHECK(reg(p, Reg::kRax) == 0x101);
  for (std::size_t i = 1; i < kNumRegs; ++i) CHECK(p.regs[i] == saved[i]);

  ProgramLayout plain;
  const int other = os.spawn(plain, {true, 0.0, 3}, a, b);
  os.deliver_signal(other, Signal::kHandled);
  CHECK_FALSE(os.process(other).handler_active);
}

TEST_CASE("minor faults follow the target offset class") {
  FaultModel fm;
  CHECK(fm.faults_for_offset(200) == fm.in_range_faults);
  CHECK(fm.faults_for_offset(800) == fm.in_range_faults);
  CHECK(fm.faults_for_offset(199) == fm.out_of_range_faults);
  CHECK(fm.faults_for_offset(801) == fm.out_of_range_faults);

  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  layout.target_depth = 0x100;
  Rng a(7), b(7);
  for (int i = 0; i < 50; ++i) {
    const int pid = os.spawn(layout, {true, 0.0, 3}, a, b);
    const auto& p = os.process(pid);
    CHECK(os.minor_fault_count(pid) == fm.faults_for_offset((p.stack_base - 0x100) % kPageSize));
    os.exit(pid);
  }
}

TEST_CASE("register names and stack dump") {
  for (std::size_t i = 0; i < kNumRegs; ++i) {
    CHECK(parse_reg(reg_name(static_cast<Reg>(i))) == static_cast<Reg>(i));
  }
  CHECK_THROWS_AS(parse_reg("eax"), Error);

  auto mem = make_memory();
  Os os(mem);
  ProgramLayout layout;
  layout.filler_frames = 2;
  Rng a(1), b(1);
  const int pid = os.spawn(layout, {false, 0.0, 3}, a, b);
  os.write_value(pid, kStackTop - 16, 0xab, 1);
  std::ostringstream out;
  os.mem_dump(pid, out);
  const std::string dump = out.str();
  const auto stack_pages = os.process(pid).page_table.size() - 2;
  CHECK(std::count(dump.begin(), dump.end(), '\n') == static_cast<long>(stack_pages * 256));
  CHECK(dump.find("7fffffffeff0: ab 00") != std::string::npos);
}
