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

#include "hammersim/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hammersim/error.hpp"

namespace hammersim::scenario {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> k = {
      {"scenario", {"name", "seed", "trials", "jobs"}},
      {"dram",
       {"dimm", "memory_mib", "banks", "row_bytes", "refresh_ms", "cells_per_mib",
        "hammer_threshold", "trr", "trr_capacity", "trr_mac", "profile_file"}},
      {"profile", {"trials", "min_reproducibility", "stealth_fraction"}},
      {"victim", {"preset", "file"}},
      {"spawn", {"aslr", "placement_noise", "max_perturbation"}},
      {"attack",
       {"n_sided", "accesses_per_round", "rounds", "stop_in_interval", "relaunch_budget",
        "relaunch_loops", "calibration_release", "calibration_spawns", "bait_count"}},
      {"output", {"dir"}},
  };
  return k;
}

class Section {
 public:
  Section(const pt::ptree* t, std::string name) : t_(t), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (t_ == nullptr) return std::nullopt;
    if (auto v = t_->get_optional<std::string>(key)) return *v;
    return std::nullopt;
  }
  std::string field(const std::string& key) const { return name_ + "." + key; }

  std::string str(const std::string& key, const std::string& def) const {
    return raw(key).value_or(def);
  }

  std::optional<std::uint64_t> u64(const std::string& key) const {
    auto s = raw(key);
    if (!s) return std::nullopt;
    try {
      std::size_t used = 0;
      if (!s->empty() && s->front() == '-') throw std::invalid_argument("negative");
      std::uint64_t v = std::stoull(*s, &used, 0);
      if (used != s->size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(field(key), "not an unsigned integer: '" + *s + "'");
    }
  }
  std::uint64_t u64(const std::string& key, std::uint64_t def) const {
    return u64(key).value_or(def);
  }
  std::uint32_t u32(const std::string& key, std::uint32_t def) const {
    std::uint64_t v = u64(key, def);
    if (v > 0xffffffffu) throw ConfigError(field(key), "value too large");
    return static_cast<std::uint32_t>(v);
  }

  std::optional<double> real(const std::string& key) const {
    auto s = raw(key);
    if (!s) return std::nullopt;
    try {
      std::size_t used = 0;
      double v = std::stod(*s, &used);
      if (used != s->size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(field(key), "not a number: '" + *s + "'");
    }
  }
  double real(const std::string& key, double def) const { return real(key).value_or(def); }

  double probability(const std::string& key, double def) const {
    double v = real(key, def);
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(field(key), "must be within [0, 1]");
    return v;
  }

  std::optional<bool> flag(const std::string& key) const {
    auto s = raw(key);
    if (!s) return std::nullopt;
    if (*s == "true" || *s == "yes" || *s == "1" || *s == "on") return true;
    if (*s == "false" || *s == "no" || *s == "0" || *s == "off") return false;
    throw ConfigError(field(key), "expected true or false");
  }

 private:
  const pt::ptree* t_;
  std::string name_;
};

Section section(const pt::ptree& tree, const std::string& name) {
  auto child = tree.get_child_optional(name);
  return Section(child ? &*child : nullptr, name);
}

}  // namespace

std::string ScenarioConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

ScenarioConfig parse_scenario(std::istream& in, const std::string& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), 1, e.message());
  }
  for (const auto& [name, sec] : tree) {
    auto it = known_keys().find(name);
    if (it == known_keys().end()) throw ConfigError(name, "unknown section");
    if (sec.empty() && !sec.data().empty()) throw ConfigError(name, "key outside any section");
    for (const auto& [key, value] : sec) {
      if (!it->second.count(key)) throw ConfigError(name + "." + key, "unknown key");
    }
  }

  ScenarioConfig c;
  c.base_dir = base_dir;

  const Section s = section(tree, "scenario");
  c.name = s.str("name", "");
  auto seed = s.u64("seed");
  if (!seed) throw ConfigError("scenario.seed", "missing; every scenario needs an explicit seed");
  c.seed = *seed;
  c.trials = s.u32("trials", c.trials);
  c.jobs = s.u32("jobs", c.jobs);
  if (c.jobs == 0) throw ConfigError("scenario.jobs", "must be at least 1");

  const Section d = section(tree, "dram");
  c.dimm = d.str("dimm", c.dimm);
  c.memory_mib = d.u64("memory_mib", c.memory_mib);
  c.geometry.banks = d.u32("banks", c.geometry.banks);
  c.geometry.row_size_bytes = d.u32("row_bytes", c.geometry.row_size_bytes);
  c.geometry.refresh_period_ms = d.real("refresh_ms", c.geometry.refresh_period_ms);
  if (c.geometry.banks == 0) throw ConfigError("dram.banks", "must be at least 1");
  if (c.geometry.row_size_bytes == 0 || c.geometry.row_size_bytes % c.geometry.page_size_bytes)
    throw ConfigError("dram.row_bytes", "must be a multiple of the 4096-byte page");
  const std::uint64_t block = std::uint64_t{c.geometry.banks} * c.geometry.row_size_bytes;
  const std::uint64_t bytes = c.memory_mib << 20;
  if (c.memory_mib == 0 || bytes % block)
    throw ConfigError("dram.memory_mib", "must be a positive multiple of banks * row_bytes");
  c.geometry.rows_per_bank = static_cast<std::uint32_t>(bytes / block);
  if (c.geometry.refresh_period_ms < 0.0) throw ConfigError("dram.refresh_ms", "must be >= 0");
  c.cells_per_mib = d.real("cells_per_mib");
  if (c.cells_per_mib && *c.cells_per_mib < 0.0)
    throw ConfigError("dram.cells_per_mib", "must be >= 0");
  c.hammer_threshold = d.u64("hammer_threshold");
  c.trr_enabled = d.flag("trr");
  if (auto v = d.u64("trr_capacity")) c.trr_capacity = static_cast<std::uint32_t>(*v);
  c.trr_mac = d.u64("trr_mac");
  c.profile_file = d.str("profile_file", "");
  try {
    dram::dimm_preset(c.dimm);
  } catch (const ConfigError&) {
    throw ConfigError("dram.dimm", "unknown DIMM preset '" + c.dimm + "'");
  }
  if (!c.profile_file.empty() && !std::filesystem::exists(c.resolve(c.profile_file)))
    throw ConfigError("dram.profile_file", "no such file '" + c.profile_file + "'");

  const Section p = section(tree, "profile");
  c.profile_trials = p.u32("trials", c.profile_trials);
  if (c.profile_trials == 0) throw ConfigError("profile.trials", "must be at least 1");
  c.min_reproducibility = p.probability("min_reproducibility", c.min_reproducibility);
  c.stealth_fraction = p.probability("stealth_fraction", c.stealth_fraction);

  const Section v = section(tree, "victim");
  c.victim_preset = v.str("preset", "");
  c.victim_file = v.str("file", "");
  if (c.victim_preset.empty() == c.victim_file.empty())
    throw ConfigError("victim", "set exactly one of preset or file");
  if (!c.victim_preset.empty()) {
    const auto& names = victims::preset_names();
    if (std::find(names.begin(), names.end(), c.victim_preset) == names.end())
      throw ConfigError("victim.preset", "unknown program '" + c.victim_preset + "'");
  }
  if (!c.victim_file.empty() && !std::filesystem::exists(c.resolve(c.victim_file)))
    throw ConfigError("victim.file", "no such file '" + c.victim_file + "'");

  const Section sp = section(tree, "spawn");
  c.spawn.aslr = sp.flag("aslr").value_or(c.spawn.aslr);
  c.spawn.placement_noise = sp.probability("placement_noise", c.spawn.placement_noise);
  c.spawn.max_perturbation = sp.u32("max_perturbation", c.spawn.max_perturbation);
  if (c.spawn.max_perturbation == 0)
    throw ConfigError("spawn.max_perturbation", "must be at least 1");

  const Section a = section(tree, "attack");
  c.plan.n_sided = a.u32("n_sided", c.plan.n_sided);
  if (c.plan.n_sided == 0) throw ConfigError("attack.n_sided", "must be at least 1");
  c.plan.accesses_per_round = a.u64("accesses_per_round", c.plan.accesses_per_round);
  c.plan.rounds = a.u32("rounds", c.plan.rounds);
  if (c.plan.rounds == 0) throw ConfigError("attack.rounds", "must be at least 1");
  c.plan.stop_in_interval = a.probability("stop_in_interval", c.plan.stop_in_interval);
  c.plan.relaunch_budget = a.u32("relaunch_budget", c.plan.relaunch_budget);
  c.relaunch_loops = a.u32("relaunch_loops", c.relaunch_loops);
  c.calibration_release = a.u32("calibration_release", c.calibration_release);
  c.calibration_spawns = a.u32("calibration_spawns", c.calibration_spawns);
  if (c.calibration_spawns == 0) throw ConfigError("attack.calibration_spawns", "must be at least 1");
  if (auto b = a.u64("bait_count")) c.bait_count = static_cast<std::uint32_t>(*b);

  c.out_dir = section(tree, "output").str("dir", c.out_dir);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario '" + path + "'");
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_scenario(in, dir.empty() ? "." : dir);
}

dram::DimmPreset effective_dimm(const ScenarioConfig& cfg) {
  dram::DimmPreset d = dram::dimm_preset(cfg.dimm);
  if (cfg.cells_per_mib) d.profile.cells_per_mib = *cfg.cells_per_mib;
  if (cfg.hammer_threshold) d.disturbance.hammer_threshold = *cfg.hammer_threshold;
  if (cfg.trr_enabled) d.trr.enabled = *cfg.trr_enabled;
  if (cfg.trr_capacity) d.trr.sampler_capacity = *cfg.trr_capacity;
  if (cfg.trr_mac) d.trr.mac = *cfg.trr_mac;
  return d;
}

victims::GadgetProgram load_victim(const ScenarioConfig& cfg) {
  if (!cfg.victim_preset.empty()) return victims::preset(cfg.victim_preset);
  return victims::load_program_file(cfg.resolve(cfg.victim_file));
}

dram::Dram build_memory(const ScenarioConfig& cfg) {
  const dram::DimmPreset d = effective_dimm(cfg);
  auto profile = std::make_shared<dram::FlipProfile>();
  if (!cfg.profile_file.empty()) {
    std::ifstream in(cfg.resolve(cfg.profile_file));
    if (!in) throw ConfigError("dram.profile_file", "cannot open '" + cfg.profile_file + "'");
    *profile = dram::FlipProfile::load(in);
  } else {
    Rng rng = Rng::stream(cfg.seed, "dram-profile");
    *profile = dram::generate_profile(cfg.geometry, d.profile, rng);
  }
  return dram::Dram(cfg.geometry, std::move(profile), d.disturbance, d.trr,
                    Rng::stream(cfg.seed, "dram").next());
}

ProfileRun run_profile(const ScenarioConfig& cfg, const dram::Dram& image) {
  ProfileRun r;
  r.swept = std::make_unique<dram::Dram>(image);
  const double start = r.swept->now_ns();
  const auto runs = attacker::whole_memory_runs(cfg.geometry);
  attacker::ProfileOptions opts;
  opts.accesses_per_round = cfg.plan.accesses_per_round;
  opts.n_sided = cfg.plan.n_sided;
  r.map = attacker::profile_offline(*r.swept, runs, cfg.profile_trials, cfg.min_reproducibility,
                                    opts);
  r.sim_time_ns = r.swept->now_ns() - start;
  return r;
}

AttackSetup prepare_attack(const ScenarioConfig& cfg) {
  AttackSetup s;
  s.image = std::make_unique<dram::Dram>(build_memory(cfg));
  s.program = load_victim(cfg);
  s.profile = run_profile(cfg, *s.image);

  std::uint32_t bait = 0;
  if (cfg.bait_count) {
    bait = *cfg.bait_count;
  } else {
    attacker::CalibrationOptions co;
    co.release = cfg.calibration_release;
    co.spawns = cfg.calibration_spawns;
    co.spawn = cfg.spawn;
    s.calibration = attacker::calibrate_bait_count(*s.image, s.program, co,
                                                   Rng::stream(cfg.seed, "calibration").next());
    if (s.calibration.counts.empty())
      throw Error("calibration never found the target among the released frames");
    bait = s.calibration.mode();
  }
  s.plan = attacker::plan_attack(s.profile.map, s.program, *s.image, bait, cfg.plan);
  s.context.memory = s.image.get();
  s.context.spawn = cfg.spawn;
  s.context.seed = cfg.seed;
  return s;
}

}  // namespace hammersim::scenario
