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

// Attack pipeline: offline flip profiling, fault-probability estimate, bait
// calibration, online trials and the relaunch loop.

#ifndef HAMMERSIM_ATTACKER_HPP
#define HAMMERSIM_ATTACKER_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hammersim/dram.hpp"
#include "hammersim/memwalk.hpp"
#include "hammersim/osmodel.hpp"
#include "hammersim/victims.hpp"

namespace hammersim::attacker {

struct FlipMapEntry {
  std::uint64_t frame = 0;
  std::uint32_t bit = 0;  // within the page
  dram::FlipDirection direction = dram::FlipDirection::kOneToZero;
  std::uint32_t count = 0;

  std::uint32_t byte() const { return bit / 8; }
};

struct FlipMap {
  std::uint32_t trials = 0;
  std::vector<FlipMapEntry> entries;  // sorted by (frame, bit)

  std::size_t flippy_pages() const;
  // `# trials N` header, then `frame bit direction count` lines.
  void store(std::ostream& out) const;
  static FlipMap load(std::istream& in);
  // `bank,row,bit,direction,count`, bit counted within the DRAM row.
  void write_heatmap_csv(std::ostream& out, const dram::Dram& dram) const;
};

struct ProfileOptions {
  std::uint64_t accesses_per_round = 1'000'000;
  // Sweep with an all-ones and an all-zeros victim row so both flip
  // directions are observable.
  bool both_polarities = true;
  // Aggressor count per sweep step, laid out as in plan_attack.
  std::uint32_t n_sided = 2;
};

// Sweep over every row of each run that has room for the aggressors
// (double-sided by default), repeated
// `trials` times. Keeps cells observed in at least min_reproducibility of
// the trials (0 keeps every cell seen at least once).
FlipMap profile_offline(dram::Dram& dram, std::span<const memwalk::RowRun> runs,
                        std::uint32_t trials, double min_reproducibility,
                        const ProfileOptions& opts = {});

// Runs over every row of every bank.
std::vector<memwalk::RowRun> whole_memory_runs(const dram::Geometry& g);

struct FaultEstimate {
  double n_avg = 0.0;
  std::uint64_t n_flippy = 0;
  std::uint64_t n_pages = 0;
  double fraction = 0.001;
  double p_fault = 0.0;  // percent
};

// (1 - (1 - n_avg/n_flippy)^(n_pages*fraction)) * 100, 0 when n_flippy is 0.
double p_fault_percent(double n_avg, double n_flippy, double n_pages, double fraction = 0.001);

// n_avg counts, per 16-byte-aligned target slot (offset 16k + nibble), the
// flip-map bits landing inside a target of `target_bytes`, summed over all
// flippy pages and averaged over the 256 slots.
FaultEstimate estimate_fault_probability(const FlipMap& map, std::uint64_t n_pages,
                                         double fraction = 0.001, std::uint32_t target_bytes = 4,
                                         std::uint32_t nibble = 0);

struct BaitHistogram {
  std::map<std::uint32_t, std::uint32_t> counts;
  std::uint32_t spawns = 0;
  std::uint32_t misses = 0;

  std::uint32_t mode() const;
  double mode_rate() const;
};

struct CalibrationOptions {
  std::uint32_t release = 500;
  std::uint32_t spawns = 100;
  osmodel::SpawnOptions spawn;
  std::uint64_t sentinel = 0xDEADBEEF;
};

// Releases `release` frames, spawns the victim and finds the target's frame
// among them (pop order index = bait count). Register targets are located
// by planting a sentinel and scanning the stack while it is spilled.
BaitHistogram calibrate_bait_count(const dram::Dram& memory, const victims::GadgetProgram& prog,
                                   const CalibrationOptions& opts, std::uint64_t seed);

struct AttackPlan {
  std::uint64_t flippy_frame = 0;
  std::uint32_t target_bit = 0;  // in-page bit of the chosen flip
  dram::FlipDirection direction = dram::FlipDirection::kZeroToOne;
  std::uint32_t coverage = 0;  // target slots (of 256) hit by a useful flip
  std::uint32_t bait_count = 0;
  dram::HammerPattern pattern;
  victims::SyncKind sync = victims::SyncKind::kSigstop;
  // Chance that a SIGSTOP lands between assignment and check.
  double stop_in_interval = 0.5;
  std::uint32_t relaunch_budget = 256;
};

struct PlanOptions {
  std::uint32_t n_sided = 2;
  std::uint64_t accesses_per_round = 1'000'000;
  std::uint32_t rounds = 100;
  double stop_in_interval = 0.5;
  std::uint32_t relaunch_budget = 256;
};

// A flip at in-page bit `bit` helps when the target starts at `offset`.
bool useful_flip(const victims::SecurityVar& var, std::uint64_t offset, std::uint32_t bit,
                 dram::FlipDirection dir);

// Picks the flippy frame whose useful flips cover the most target slots and
// builds a pattern with the flippy row as the victim between the last two
// aggressors. Throws when no frame qualifies.
AttackPlan plan_attack(const FlipMap& map, const victims::GadgetProgram& prog,
                       const dram::Dram& dram, std::uint32_t bait_count, const PlanOptions& opts);

struct AttackContext {
  const dram::Dram* memory = nullptr;  // image every trial starts from
  osmodel::SpawnOptions spawn;
  std::uint64_t seed = 0;
};

struct TrialResult {
  std::uint32_t trial = 0;
  std::uint64_t seed = 0;
  bool co_located = false;
  bool acted_in_interval = false;
  // Target bits flipped by the attacker's hammering while the target was
  // memory resident.
  std::vector<std::uint32_t> flipped_bits;
  std::size_t total_flips = 0;
  victims::AuthOutcome outcome = victims::AuthOutcome::kFailure;
  double sim_time_ns = 0.0;
  std::uint64_t stack_offset = 0;  // in-page offset of the target
};

TrialResult execute_attack(const AttackContext& ctx, const AttackPlan& plan,
                           const victims::GadgetProgram& prog, std::uint32_t trial);

// Trials [0, n) fanned out over `jobs` threads; results in trial order.
std::vector<TrialResult> run_trials(const AttackContext& ctx, const AttackPlan& plan,
                                    const victims::GadgetProgram& prog, std::uint32_t n,
                                    unsigned jobs = 1);

struct RelaunchResult {
  std::optional<std::uint32_t> first_success;  // 0-based attempt index
  std::uint32_t attempts = 0;
  std::uint32_t co_located = 0;
  double sim_time_ns = 0.0;
};

// Repeats the attack against fresh victim instances with the same flippy
// frame and baits until one succeeds or the budget runs out.
RelaunchResult relaunch_loop(const AttackContext& ctx, const AttackPlan& plan,
                             const victims::GadgetProgram& prog, std::uint32_t budget,
                             std::uint64_t loop);

std::vector<RelaunchResult> run_relaunch_loops(const AttackContext& ctx, const AttackPlan& plan,
                                               const victims::GadgetProgram& prog,
                                               std::uint32_t budget, std::uint32_t loops,
                                               unsigned jobs = 1);

// Exact per-attempt success probability obtained by enumerating every stack
// randomisation value and placement perturbation against the ground-truth
// flip probabilities of the flippy frame.
struct RelaunchModel {
  double co_location = 0.0;
  double per_attempt = 0.0;

  double within(std::uint32_t budget) const;
};

RelaunchModel relaunch_model(const AttackPlan& plan, const victims::GadgetProgram& prog,
                             const osmodel::SpawnOptions& spawn, const dram::Dram& memory);

// Candidate target offsets consistent with an observed minor-fault count.
std::vector<std::uint64_t> infer_offset_from_faults(std::uint64_t faults,
                                                    const osmodel::FaultModel& model,
                                                    std::uint32_t nibble);
std::vector<std::uint64_t> infer_offset_from_faults(const osmodel::Os& os, int pid,
                                                    const victims::GadgetProgram& prog);

// Bait estimate from the page-remapping side channel; too noisy to steer an
// attack, kept for comparison.
double remap_bait_estimate(std::uint32_t true_bait_count, double noise_sd, Rng& rng);

}  // namespace hammersim::attacker

#endif  // HAMMERSIM_ATTACKER_HPP
