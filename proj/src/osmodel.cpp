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

#include "hammersim/osmodel.hpp"

#include <bit>
#include <cstdio>
#include <ostream>

#include "hammersim/error.hpp"

namespace hammersim::osmodel {

namespace {

constexpr std::array<const char*, kNumRegs> kRegNames = {
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp",
    "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15",
};

constexpr std::array<Reg, kNumRegs> kSigframeOrder = {
    Reg::kR8,  Reg::kR9,  Reg::kR10, Reg::kR11, Reg::kR12, Reg::kR13,
    Reg::kR14, Reg::kR15, Reg::kRdi, Reg::kRsi, Reg::kRbp, Reg::kRbx,
    Reg::kRdx, Reg::kRax, Reg::kRcx, Reg::kRsp,
};

}  // namespace

const char* reg_name(Reg r) { return kRegNames[static_cast<std::size_t>(r)]; }

Reg parse_reg(const std::string& name) {
  for (std::size_t i = 0; i < kNumRegs; ++i) {
    if (name == kRegNames[i]) return static_cast<Reg>(i);
  }
  throw Error("unknown register '" + name + "'");
}

const std::array<Reg, kNumRegs>& sigframe_order() { return kSigframeOrder; }

AddrLayout AddrLayout::for_memory(std::uint64_t bytes, std::uint32_t page_bits) {
  if (bytes == 0 || !std::has_single_bit(bytes)) {
    throw Error("memory size must be a power of two");
  }
  const auto bits = static_cast<std::uint32_t>(std::countr_zero(bytes));
  if (bits < page_bits) throw Error("memory smaller than one page");
  return {bits, page_bits};
}

const char* to_string(ProcState s) {
  switch (s) {
    case ProcState::kRunning: return "running";
    case ProcState::kBlocked: return "blocked";
    case ProcState::kStopped: return "stopped";
    case ProcState::kExited: return "exited";
  }
  return "?";
}

// --- FreeStack -----------------------------------------------------------

FreeStack::FreeStack(std::uint64_t total_frames)
    : next_(total_frames, kNone), prev_(total_frames, kNone), present_(total_frames, false) {}

void FreeStack::push(std::uint64_t frame) {
  if (frame >= next_.size()) throw OutOfRange("frame beyond physical memory");
  if (present_[frame]) throw Error("frame " + std::to_string(frame) + " is already free");
  present_[frame] = true;
  next_[frame] = top_;
  prev_[frame] = kNone;
  if (top_ != kNone) prev_[top_] = frame;
  top_ = frame;
  ++size_;
}

std::uint64_t FreeStack::pop() {
  if (top_ == kNone) throw OutOfMemory("no free page frames");
  const std::uint64_t f = top_;
  take(f);
  return f;
}

bool FreeStack::take(std::uint64_t frame) {
  if (frame >= next_.size() || !present_[frame]) return false;
  const std::uint64_t n = next_[frame];
  const std::uint64_t p = prev_[frame];
  if (p != kNone) next_[p] = n; else top_ = n;
  if (n != kNone) prev_[n] = p;
  present_[frame] = false;
  --size_;
  return true;
}

bool FreeStack::contains(std::uint64_t frame) const {
  return frame < present_.size() && present_[frame];
}

std::vector<std::uint64_t> FreeStack::frames() const {
  std::vector<std::uint64_t> out;
  out.reserve(size_);
  for (std::uint64_t f = top_; f != kNone; f = next_[f]) out.push_back(f);
  return out;
}

// --- Os ------------------------------------------------------------------

Os::Os(dram::Dram& mem) : mem_(&mem), free_(mem.geometry().total_pages()) {
  if (mem.geometry().page_size_bytes != kPageSize) {
    throw ConfigError("dram.page_size_bytes", "the OS model needs 4096-byte pages");
  }
  for (std::uint64_t f = free_.capacity(); f-- > 0;) free_.push(f);
}

std::uint64_t Os::alloc_frame() { return free_.pop(); }
void Os::free_frame(std::uint64_t frame) { free_.push(frame); }

int Os::spawn(const ProgramLayout& layout, const SpawnOptions& opts, Rng& aslr_rng,
              Rng& placement_rng) {
  // Draws happen unconditionally so the streams stay aligned across
  // configurations.
  const bool perturb = placement_rng.bernoulli(opts.placement_noise);
  const auto magnitude =
      static_cast<std::int64_t>(placement_rng.between(1, std::max<std::uint32_t>(1, opts.max_perturbation)));
  const bool negative = placement_rng.bernoulli(0.5);
  const std::uint64_t rand = aslr_rng.below(kStackRandomRange);

  Process p;
  p.pid = next_pid_++;
  p.layout = layout;
  p.aslr = opts.aslr;
  p.aslr_rand = opts.aslr ? rand : 0;
  std::int64_t filler = layout.filler_frames;
  if (perturb) filler += negative ? -magnitude : magnitude;
  p.filler_used = static_cast<std::uint32_t>(std::max<std::int64_t>(0, filler));

  auto map_page = [&](std::uint64_t vpage, bool zero) {
    const std::uint64_t f = free_.pop();
    p.page_table[vpage] = f;
    p.alloc_order.push_back(f);
    if (zero) mem_->fill_page(f, 0);
  };
  try {
    for (std::uint32_t i = 0; i < p.filler_used; ++i) map_page(kTextBase / kPageSize + i, false);
    p.stack_base = align_stack(kStackTop - layout.env_bytes, p.aslr_rand);
    const std::uint64_t low = p.stack_base - layout.stack_extent;
    // The stack grows down, so pages are first touched top to bottom.
    for (std::uint64_t vp = (kStackTop - 1) / kPageSize; vp >= low / kPageSize; --vp) {
      map_page(vp, true);
    }
  } catch (const OutOfMemory&) {
    for (auto it = p.alloc_order.rbegin(); it != p.alloc_order.rend(); ++it) free_.push(*it);
    throw;
  }

  p.regs[static_cast<std::size_t>(Reg::kRsp)] = p.stack_base;
  p.minor_faults =
      layout.faults.faults_for_offset((p.stack_base - layout.target_depth) % kPageSize);
  const int pid = p.pid;
  procs_.emplace(pid, std::move(p));
  return pid;
}

Process& Os::process(int pid) {
  auto it = procs_.find(pid);
  if (it == procs_.end()) throw Error("no such process " + std::to_string(pid));
  return it->second;
}

const Process& Os::process(int pid) const {
  auto it = procs_.find(pid);
  if (it == procs_.end()) throw Error("no such process " + std::to_string(pid));
  return it->second;
}

void Os::exit(int pid) {
  Process& p = process(pid);
  if (p.state == ProcState::kExited) return;
  for (std::uint64_t f : p.alloc_order) free_.push(f);
  p.page_table.clear();
  p.alloc_order.clear();
  p.state = ProcState::kExited;
}

std::uint64_t Os::frame_of(const Process& p, std::uint64_t vaddr) const {
  auto it = p.page_table.find(vaddr / kPageSize);
  if (it == p.page_table.end()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "unmapped address 0x%llx",
                  static_cast<unsigned long long>(vaddr));
    throw Error(buf);
  }
  return it->second;
}

std::optional<std::uint64_t> Os::translate(int pid, std::uint64_t vaddr) const {
  const Process& p = process(pid);
  auto it = p.page_table.find(vaddr / kPageSize);
  if (it == p.page_table.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Os::phys_addr(int pid, std::uint64_t vaddr) const {
  return frame_of(process(pid), vaddr) * kPageSize + vaddr % kPageSize;
}

void Os::read_virt(int pid, std::uint64_t vaddr, std::span<std::uint8_t> out) const {
  const Process& p = process(pid);
  std::size_t done = 0;
  while (done < out.size()) {
    const std::uint64_t va = vaddr + done;
    const std::size_t n = std::min<std::size_t>(out.size() - done, kPageSize - va % kPageSize);
    mem_->read(frame_of(p, va) * kPageSize + va % kPageSize, out.subspan(done, n));
    done += n;
  }
}

void Os::write_virt(int pid, std::uint64_t vaddr, std::span<const std::uint8_t> bytes) {
  const Process& p = process(pid);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const std::uint64_t va = vaddr + done;
    const std::size_t n = std::min<std::size_t>(bytes.size() - done, kPageSize - va % kPageSize);
    mem_->write(frame_of(p, va) * kPageSize + va % kPageSize, bytes.subspan(done, n));
    done += n;
  }
}

std::uint64_t Os::read_value(int pid, std::uint64_t vaddr, std::size_t bytes) const {
  if (bytes == 0 || bytes > 8) throw Error("value width must be 1..8 bytes");
  std::array<std::uint8_t, 8> buf{};
  read_virt(pid, vaddr, std::span(buf.data(), bytes));
  std::uint64_t v = 0;
  for (std::size_t i = bytes; i-- > 0;) v = (v << 8) | buf[i];
  return v;
}

void Os::write_value(int pid, std::uint64_t vaddr, std::uint64_t value, std::size_t bytes) {
  if (bytes == 0 || bytes > 8) throw Error("value width must be 1..8 bytes");
  std::array<std::uint8_t, 8> buf{};
  for (std::size_t i = 0; i < bytes; ++i) buf[i] = static_cast<std::uint8_t>(value >> (8 * i));
  write_virt(pid, vaddr, std::span<const std::uint8_t>(buf.data(), bytes));
}

void Os::deliver_signal(int pid, Signal sig) {
  Process& p = process(pid);
  if (p.state == ProcState::kExited) throw Error("signal sent to exited process");
  switch (sig) {
    case Signal::kHandled: {
      if (!p.layout.signal_handler || p.handler_active) return;
      // The kernel saves the interrupted context on the user stack below
      // the red zone before running the handler.
      const std::uint64_t sp = p.regs[static_cast<std::size_t>(Reg::kRsp)];
      p.sigframe = ((sp - kRedZone - kSigFrameBytes) & ~std::uint64_t{0xf}) - 8;
      const auto& order = sigframe_order();
      for (std::size_t i = 0; i < order.size(); ++i) {
        write_value(pid, p.sigframe + kSigFrameGregs + 8 * i,
                    p.regs[static_cast<std::size_t>(order[i])], 8);
      }
      p.handler_active = true;
      return;
    }
    case Signal::kStop:
      p.state = ProcState::kStopped;
      return;
    case Signal::kCont: {
      if (p.handler_active) {
        const auto& order = sigframe_order();
        for (std::size_t i = 0; i < order.size(); ++i) {
          p.regs[static_cast<std::size_t>(order[i])] =
              read_value(pid, p.sigframe + kSigFrameGregs + 8 * i, 8);
        }
        p.handler_active = false;
      }
      p.state = p.window_open ? ProcState::kBlocked : ProcState::kRunning;
      return;
    }
  }
}

void Os::open_window(int pid, std::vector<Reg> regs, std::uint64_t slot_depth) {
  Process& p = process(pid);
  if (p.state == ProcState::kExited) throw Error("window on exited process");
  if (p.window_open) throw Error("blocking window already open");
  p.window_slot = p.stack_base - slot_depth;
  for (std::size_t i = 0; i < regs.size(); ++i) {
    write_value(pid, p.window_slot + 8 * i, p.regs[static_cast<std::size_t>(regs[i])], 8);
  }
  p.window_regs = std::move(regs);
  p.window_open = true;
  p.window_opened_at = mem_->window();
  p.state = ProcState::kBlocked;
}

void Os::close_window(int pid) {
  Process& p = process(pid);
  if (!p.window_open) throw Error("no blocking window open");
  for (std::size_t i = 0; i < p.window_regs.size(); ++i) {
    p.regs[static_cast<std::size_t>(p.window_regs[i])] = read_value(pid, p.window_slot + 8 * i, 8);
  }
  p.window_open = false;
  p.window_regs.clear();
  if (p.state == ProcState::kBlocked) p.state = ProcState::kRunning;
}

void Os::mem_dump(int pid, std::ostream& out) const {
  const Process& p = process(pid);
  const std::uint64_t stack_low = kStackTop - 0x800000;
  std::array<std::uint8_t, kPageSize> page{};
  char line[128];
  for (const auto& [vpage, frame] : p.page_table) {
    const std::uint64_t va = vpage * kPageSize;
    if (va < stack_low) continue;
    mem_->read(frame * kPageSize, page);
    for (std::size_t off = 0; off < kPageSize; off += 16) {
      int n = std::snprintf(line, sizeof line, "%012llx:",
                            static_cast<unsigned long long>(va + off));
      for (std::size_t i = 0; i < 16; ++i) {
        n += std::snprintf(line + n, sizeof line - n, " %02x", page[off + i]);
      }
      out << line << '\n';
    }
  }
}

}  // namespace hammersim::osmodel
