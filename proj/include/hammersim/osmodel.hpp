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

// Operating system model: a LIFO page-frame free list, process address
// spaces backed by the DRAM model, stack randomisation, minor-fault
// accounting, signal delivery with register spills, and blocking windows.

#ifndef HAMMERSIM_OSMODEL_HPP
#define HAMMERSIM_OSMODEL_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hammersim/dram.hpp"
#include "hammersim/rng.hpp"

namespace hammersim::osmodel {

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint64_t kStackTop = 0x7ffffffff000;
inline constexpr std::uint64_t kTextBase = 0x400000;
// The kernel subtracts a random value below this from the initial stack
// pointer before 16-byte alignment.
inline constexpr std::uint64_t kStackRandomRange = 8192;
inline constexpr std::uint64_t kRedZone = 128;
inline constexpr std::uint64_t kSigFrameBytes = 1024;
// Offset of the saved general-purpose registers inside a signal frame.
inline constexpr std::uint64_t kSigFrameGregs = 40;

enum class Reg : std::uint8_t {
  kRax, kRbx, kRcx, kRdx, kRsi, kRdi, kRbp, kRsp,
  kR8, kR9, kR10, kR11, kR12, kR13, kR14, kR15,
};
inline constexpr std::size_t kNumRegs = 16;
using RegisterFile = std::array<std::uint64_t, kNumRegs>;

const char* reg_name(Reg r);
Reg parse_reg(const std::string& name);

// Order in which a signal frame stores the registers.
const std::array<Reg, kNumRegs>& sigframe_order();

// Physical address split into frame number and in-page offset.
struct AddrLayout {
  std::uint32_t phys_bits = 0;
  std::uint32_t page_bits = 12;

  std::uint32_t frame_bits() const { return phys_bits - page_bits; }
  static AddrLayout for_memory(std::uint64_t bytes, std::uint32_t page_bits = 12);
};

// Kernel stack-top randomisation: (sp - rand) & ~0xf.
constexpr std::uint64_t align_stack(std::uint64_t sp, std::uint64_t rand) {
  return (sp - rand) & ~std::uint64_t{0xf};
}

// LIFO list of free frames. Supports removing an arbitrary frame, which
// models an attacker (or the kernel) grabbing one specific page.
class FreeStack {
 public:
  explicit FreeStack(std::uint64_t total_frames = 0);

  void push(std::uint64_t frame);
  std::uint64_t pop();
  bool take(std::uint64_t frame);
  bool contains(std::uint64_t frame) const;
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::uint64_t capacity() const { return next_.size(); }
  // Frames from the top (next to be popped) downwards.
  std::vector<std::uint64_t> frames() const;

 private:
  static constexpr std::uint64_t kNone = ~std::uint64_t{0};
  std::vector<std::uint64_t> next_;  // towards the bottom
  std::vector<std::uint64_t> prev_;  // towards the top
  std::vector<bool> present_;
  std::uint64_t top_ = kNone;
  std::size_t size_ = 0;
};

// Two-class minor-fault side channel keyed on the target's page offset.
struct FaultModel {
  std::uint32_t offset_lo = 200;
  std::uint32_t offset_hi = 800;
  std::uint64_t in_range_faults = 275;
  std::uint64_t out_of_range_faults = 286;

  std::uint64_t faults_for_offset(std::uint64_t offset) const {
    return offset >= offset_lo && offset <= offset_hi ? in_range_faults : out_of_range_faults;
  }
};

// What the OS needs to know to lay a program out in memory.
struct ProgramLayout {
  std::string name;
  // Text/data/heap frames allocated before the stack.
  std::uint32_t filler_frames = 100;
  // argv/envp/auxv bytes above the initial stack pointer.
  std::uint64_t env_bytes = 0x200;
  // Stack bytes below the aligned stack pointer that get touched.
  std::uint64_t stack_extent = 0x3000;
  // Depth below the aligned stack pointer of the variable the fault model
  // keys on.
  std::uint64_t target_depth = 0;
  bool signal_handler = false;
  FaultModel faults;
};

struct SpawnOptions {
  bool aslr = true;
  double placement_noise = 0.0;
  // Perturbation magnitude is uniform in [1, max_perturbation], either sign.
  std::uint32_t max_perturbation = 3;
};

enum class ProcState { kRunning, kBlocked, kStopped, kExited };
enum class Signal { kHandled, kStop, kCont };

const char* to_string(ProcState s);

struct Process {
  int pid = 0;
  ProgramLayout layout;
  bool aslr = true;
  std::uint64_t aslr_rand = 0;
  std::uint64_t stack_base = 0;  // aligned initial stack pointer
  std::uint32_t filler_used = 0;
  std::map<std::uint64_t, std::uint64_t> page_table;  // virtual page -> frame
  std::vector<std::uint64_t> alloc_order;             // frames in allocation order
  RegisterFile regs{};
  std::uint64_t minor_faults = 0;
  ProcState state = ProcState::kRunning;

  bool handler_active = false;
  std::uint64_t sigframe = 0;
  bool window_open = false;
  std::vector<Reg> window_regs;
  std::uint64_t window_slot = 0;
  std::uint64_t window_opened_at = 0;  // DRAM window index
};

class Os {
 public:
  // All frames start free; the first pops return the lowest frames.
  explicit Os(dram::Dram& mem);

  // Points this OS (typically a copy) at another memory instance.
  void rebind(dram::Dram& mem) { mem_ = &mem; }
  dram::Dram& memory() { return *mem_; }
  const dram::Dram& memory() const { return *mem_; }

  FreeStack& free_list() { return free_; }
  const FreeStack& free_list() const { return free_; }
  std::uint64_t alloc_frame();
  void free_frame(std::uint64_t frame);

  int spawn(const ProgramLayout& layout, const SpawnOptions& opts, Rng& aslr_rng,
            Rng& placement_rng);
  Process& process(int pid);
  const Process& process(int pid) const;
  // Exits the process and returns its frames to the free list in
  // allocation order.
  void exit(int pid);

  // Translation is only meaningful in profiling mode; online attack code
  // must not call it.
  std::optional<std::uint64_t> translate(int pid, std::uint64_t vaddr) const;
  std::uint64_t phys_addr(int pid, std::uint64_t vaddr) const;

  void read_virt(int pid, std::uint64_t vaddr, std::span<std::uint8_t> out) const;
  void write_virt(int pid, std::uint64_t vaddr, std::span<const std::uint8_t> bytes);
  // Little-endian integer of `bytes` bytes (1..8).
  std::uint64_t read_value(int pid, std::uint64_t vaddr, std::size_t bytes) const;
  void write_value(int pid, std::uint64_t vaddr, std::uint64_t value, std::size_t bytes);

  std::uint64_t minor_fault_count(int pid) const { return process(pid).minor_faults; }

  void deliver_signal(int pid, Signal sig);
  // Pushes `regs` into stack slots starting `slot_depth` bytes below the
  // stack base and blocks the process.
  void open_window(int pid, std::vector<Reg> regs, std::uint64_t slot_depth);
  // Pops the pushed registers (from possibly modified memory) and resumes.
  void close_window(int pid);

  // Hex dump of every mapped stack page, 16 bytes per line.
  void mem_dump(int pid, std::ostream& out) const;

 private:
  std::uint64_t frame_of(const Process& p, std::uint64_t vaddr) const;

  dram::Dram* mem_;
  FreeStack free_;
  std::map<int, Process> procs_;
  int next_pid_ = 1000;
};

}  // namespace hammersim::osmodel

#endif  // HAMMERSIM_OSMODEL_HPP
