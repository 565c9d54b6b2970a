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

// Declarative scenario files and the pipeline that runs them.

#ifndef HAMMERSIM_SCENARIO_HPP
#define HAMMERSIM_SCENARIO_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "hammersim/attacker.hpp"
#include "hammersim/dram.hpp"
#include "hammersim/victims.hpp"

namespace hammersim::scenario {

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::uint32_t trials = 100;
  unsigned jobs = 1;

  // [dram]
  std::string dimm = "ddr3-default";
  dram::Geometry geometry;  // rows_per_bank derived from memory_mib
  std::uint64_t memory_mib = 64;
  std::optional<double> cells_per_mib;
  std::optional<std::uint64_t> hammer_threshold;
  std::optional<bool> trr_enabled;
  std::optional<std::uint32_t> trr_capacity;
  std::optional<std::uint64_t> trr_mac;
  std::string profile_file;  // ground-truth flip profile; generated when empty

  // [profile]
  std::uint32_t profile_trials = 1;
  double min_reproducibility = 0.0;
  double stealth_fraction = 0.001;

  // [victim]
  std::string victim_preset;
  std::string victim_file;

  // [spawn]
  osmodel::SpawnOptions spawn{true, 0.48, 3};

  // [attack]
  attacker::PlanOptions plan;
  std::uint32_t calibration_release = 500;
  std::uint32_t calibration_spawns = 100;
  std::optional<std::uint32_t> bait_count;  // skips calibration
  std::uint32_t relaunch_loops = 100;

  // [output]
  std::string out_dir = "out";

  std::string base_dir = ".";  // relative paths resolve against this
  std::string resolve(const std::string& path) const;
};

// Throws ConfigError naming the offending `section.key`.
ScenarioConfig parse_scenario(std::istream& in, const std::string& base_dir = ".");
ScenarioConfig load_scenario(const std::string& path);

dram::DimmPreset effective_dimm(const ScenarioConfig& cfg);
victims::GadgetProgram load_victim(const ScenarioConfig& cfg);
// Fresh memory image with the scenario's ground-truth profile.
dram::Dram build_memory(const ScenarioConfig& cfg);

struct ProfileRun {
  attacker::FlipMap map;
  double sim_time_ns = 0.0;
  std::unique_ptr<dram::Dram> swept;  // memory after the sweep
};

ProfileRun run_profile(const ScenarioConfig& cfg, const dram::Dram& image);

struct AttackSetup {
  std::unique_ptr<dram::Dram> image;
  victims::GadgetProgram program;
  ProfileRun profile;
  attacker::BaitHistogram calibration;
  attacker::AttackPlan plan;
  attacker::AttackContext context;
};

// Offline stages: build memory, profile, calibrate bait count, plan.
AttackSetup prepare_attack(const ScenarioConfig& cfg);

}  // namespace hammersim::scenario

#endif  // HAMMERSIM_SCENARIO_HPP
