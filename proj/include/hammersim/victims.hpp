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

// Victim programs as small state machines over their security variables.
//
// Every program runs the same lifecycle: init the variables, assign them
// according to the credential, wait (stop point or blocking window), check
// the target variable, exit. Where a variable lives (stack slot, register,
// register pushed during a window, register saved by a signal frame) stands
// in for what a compiler would have decided.

#ifndef HAMMERSIM_VICTIMS_HPP
#define HAMMERSIM_VICTIMS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hammersim/osmodel.hpp"

namespace hammersim::victims {

enum class Storage {
  kStack,
  kRegister,
  kWindowSpill,  // register pushed to the stack while a blocking window is open
  kSignalSpill,  // register saved in a signal frame while a handler runs
};

enum class CheckOp { kEquals, kNotEquals };

struct Check {
  CheckOp op = CheckOp::kNotEquals;
  std::uint64_t value = 0;

  bool satisfied(std::uint64_t v) const { return op == CheckOp::kEquals ? v == value : v != value; }
  std::string to_string() const;
  static Check parse(const std::string& text);
};

struct SecurityVar {
  std::string name;
  std::uint32_t width_bits = 32;
  Storage storage = Storage::kStack;
  osmodel::Reg reg = osmodel::Reg::kRax;
  // kStack: depth below the stack base. kWindowSpill: depth of the first
  // push slot. Unused otherwise.
  std::uint64_t depth = 0;
  std::uint64_t init_value = 0;
  Check check;
  std::uint64_t correct_value = 1;
  // nullopt: a wrong credential leaves the variable untouched.
  std::optional<std::uint64_t> wrong_value = 0;
  std::string success_meaning;

  std::uint64_t mask() const {
    return width_bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width_bits) - 1;
  }
  std::size_t bytes() const { return (width_bits + 7) / 8; }
  // Value held after the assign phase of a run with a wrong credential.
  std::uint64_t wrong_path_value() const { return wrong_value.value_or(init_value) & mask(); }
};

enum class SyncKind { kSigstop, kBlockingWindow };

const char* to_string(Storage s);
const char* to_string(SyncKind s);

struct GadgetProgram {
  std::string name;
  // The first variable is the attack target.
  std::vector<SecurityVar> variables;
  osmodel::ProgramLayout layout;
  // Stack depth of the innermost frame while the program waits.
  std::uint64_t frame_depth = 0x1000;
  bool blocking_window = false;
  SyncKind sync = SyncKind::kSigstop;
  // Collateral flips in this region crash the program when enabled.
  bool crash_modeling = false;
  std::uint64_t critical_depth = 0;
  std::uint64_t critical_bytes = 0;

  const SecurityVar& target() const { return variables.front(); }
  void validate() const;
};

// Depth below the stack base of the target's memory copy during the wait
// phase (stack slot, push slot or signal-frame slot).
std::uint64_t memory_depth(const GadgetProgram& prog, const SecurityVar& var);
std::uint64_t target_depth(const GadgetProgram& prog);
// In-page byte offset of the target for a given stack base.
inline std::uint64_t target_page_offset(const GadgetProgram& prog, std::uint64_t stack_base) {
  return (stack_base - target_depth(prog)) % osmodel::kPageSize;
}
// Offset modulo 16, fixed for a program regardless of randomisation.
std::uint32_t target_nibble(const GadgetProgram& prog);

enum class Phase { kAfterInit, kAfterAssign, kWait, kAfterCheck };
enum class AuthOutcome { kSuccess, kFailure, kCrash };

const char* to_string(Phase p);
const char* to_string(AuthOutcome o);

using PhaseHook = std::function<void(Phase, osmodel::Os&, int pid)>;

struct RunOptions {
  // Replaces the target's init value and suppresses its assignment, e.g. to
  // plant a sentinel during profiling.
  std::optional<std::uint64_t> sentinel;
};

// Runs the lifecycle on an already spawned process. The process is left
// alive; the caller decides when it exits.
AuthOutcome run(osmodel::Os& os, int pid, const GadgetProgram& prog, bool credential_correct,
                const PhaseHook& hook = {}, const RunOptions& opts = {});

// Shipped programs.
GadgetProgram preset(const std::string& name);
const std::vector<std::string>& preset_names();

// Declarative INI form.
GadgetProgram load_program(std::istream& in);
GadgetProgram load_program_file(const std::string& path);
void store_program(const GadgetProgram& prog, std::ostream& out);

}  // namespace hammersim::victims

#endif  // HAMMERSIM_VICTIMS_HPP
