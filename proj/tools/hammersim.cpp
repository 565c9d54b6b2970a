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

// hammersim command-line driver.
//
// Exit codes: 0 ok, 1 error, 2 bad usage, 3 `scan` found an ANY_BIT check.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hammersim/attacker.hpp"
#include "hammersim/error.hpp"
#include "hammersim/gadgetscan.hpp"
#include "hammersim/report.hpp"
#include "hammersim/scenario.hpp"

namespace {

namespace fs = std::filesystem;
using namespace hammersim;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> trials;
  std::optional<unsigned> jobs;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool with_trials) {
  app->add_option("-c,--config", c.config, "Scenario file")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Override the scenario seed");
  if (with_trials) app->add_option("--trials", c.trials, "Override the trial count");
  app->add_option("--jobs", c.jobs, "Worker threads");
  app->add_option("--out", c.out, "Output directory (default: the scenario's output.dir)");
}

scenario::ScenarioConfig load(const Common& c) {
  auto cfg = scenario::load_scenario(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.trials = *c.trials;
  if (c.jobs) cfg.jobs = std::max(1u, *c.jobs);
  if (!c.out.empty()) cfg.out_dir = c.out;
  fs::create_directories(cfg.out_dir);
  return cfg;
}

std::ofstream open_out(const scenario::ScenarioConfig& cfg, const std::string& name) {
  std::ofstream out(fs::path(cfg.out_dir) / name);
  if (!out) throw Error("cannot write " + (fs::path(cfg.out_dir) / name).string());
  return out;
}

void print_plan(std::ostream& out, const attacker::AttackPlan& p, const dram::Dram& mem) {
  const auto row = mem.row_of_frame(p.flippy_frame);
  out << "flippy_frame " << p.flippy_frame << " (bank " << row.bank << " row " << row.row << ")\n"
      << "target_bit " << p.target_bit << ' ' << dram::to_string(p.direction) << '\n'
      << "coverage " << p.coverage << "/256\n"
      << "bait_count " << p.bait_count << '\n'
      << "aggressors";
  for (const auto& a : p.pattern.aggressors) out << ' ' << a.row;
  out << '\n' << "sync " << victims::to_string(p.sync) << '\n';
}

int cmd_profile(const Common& c) {
  auto cfg = load(c);
  const dram::Dram image = scenario::build_memory(cfg);
  const auto run = scenario::run_profile(cfg, image);
  {
    auto out = open_out(cfg, "flipmap.txt");
    run.map.store(out);
  }
  {
    auto out = open_out(cfg, "heatmap.csv");
    run.map.write_heatmap_csv(out, *run.swept);
  }
  const auto est = attacker::estimate_fault_probability(run.map, cfg.geometry.total_pages(),
                                                        cfg.stealth_fraction);
  std::size_t reproducible = 0;
  for (const auto& e : run.map.entries) reproducible += e.count * 20 <= run.map.trials ? 1 : 0;
  std::cout << "scenario " << cfg.name << '\n'
            << "unique_flippy_bits " << run.map.entries.size() << '\n'
            << "flippy_pages " << run.map.flippy_pages() << '\n'
            << "flipping_at_most_5pct " << reproducible << '\n'
            << "n_avg " << est.n_avg << '\n'
            << "p_fault_percent " << est.p_fault << '\n'
            << "profile_sim_time " << report::fmt_seconds(run.sim_time_ns * 1e-9) << '\n';
  return 0;
}

int cmd_calibrate(const Common& c) {
  auto cfg = load(c);
  const dram::Dram image = scenario::build_memory(cfg);
  const auto prog = scenario::load_victim(cfg);
  attacker::CalibrationOptions co;
  co.release = cfg.calibration_release;
  co.spawns = c.trials ? *c.trials : cfg.calibration_spawns;
  co.spawn = cfg.spawn;
  const auto hist = attacker::calibrate_bait_count(image, prog, co,
                                                   Rng::stream(cfg.seed, "calibration").next());
  auto out = open_out(cfg, "calibration.csv");
  out << "bait_count,spawns\n";
  for (const auto& [k, v] : hist.counts) out << k << ',' << v << '\n';
  std::cout << "scenario " << cfg.name << '\n'
            << "spawns " << hist.spawns << '\n'
            << "misses " << hist.misses << '\n'
            << "mode " << hist.mode() << '\n'
            << "mode_rate " << hist.mode_rate() << '\n';
  return 0;
}

int cmd_attack(const Common& c) {
  auto cfg = load(c);
  const auto setup = scenario::prepare_attack(cfg);
  const auto trials =
      attacker::run_trials(setup.context, setup.plan, setup.program, cfg.trials, cfg.jobs);
  {
    auto out = open_out(cfg, "trials.jsonl");
    report::write_trials(out, trials);
  }
  const auto sum = report::summarize(cfg.name, trials, setup.profile.sim_time_ns,
                                     setup.profile.map.flippy_pages());
  {
    auto out = open_out(cfg, "summary.csv");
    report::write_summary_header(out);
    report::write_summary_row(out, sum);
  }
  {
    auto out = open_out(cfg, "plan.txt");
    print_plan(out, setup.plan, *setup.image);
  }
  std::cout << "scenario " << cfg.name << '\n';
  print_plan(std::cout, setup.plan, *setup.image);
  std::cout << "trials " << sum.trials << '\n'
            << "co_located " << sum.co_located << '\n'
            << "successes " << sum.successes << '\n';
  return 0;
}

int cmd_relaunch(const Common& c) {
  auto cfg = load(c);
  const auto setup = scenario::prepare_attack(cfg);
  const std::uint32_t loops = c.trials ? *c.trials : cfg.relaunch_loops;
  const auto res = attacker::run_relaunch_loops(setup.context, setup.plan, setup.program,
                                                setup.plan.relaunch_budget, loops, cfg.jobs);
  {
    auto out = open_out(cfg, "relaunch.jsonl");
    report::write_relaunch(out, cfg.seed, res);
  }
  const auto sum = report::summarize(cfg.name, res, setup.profile.sim_time_ns,
                                     setup.profile.map.flippy_pages());
  {
    auto out = open_out(cfg, "summary.csv");
    report::write_summary_header(out);
    report::write_summary_row(out, sum);
  }
  const auto model = attacker::relaunch_model(setup.plan, setup.program, cfg.spawn, *setup.image);
  std::cout << "scenario " << cfg.name << '\n';
  print_plan(std::cout, setup.plan, *setup.image);
  std::cout << "loops " << loops << '\n'
            << "budget " << setup.plan.relaunch_budget << '\n'
            << "succeeded " << sum.successes << '\n'
            << "model_per_attempt " << model.per_attempt << '\n'
            << "model_within_budget " << model.within(setup.plan.relaunch_budget) << '\n';
  return 0;
}

int cmd_mem_dump(const Common& c, std::uint32_t trial) {
  auto cfg = load(c);
  dram::Dram mem = scenario::build_memory(cfg);
  const auto prog = scenario::load_victim(cfg);
  osmodel::Os os(mem);
  Rng aslr = Rng::stream(cfg.seed, "aslr", trial);
  Rng place = Rng::stream(cfg.seed, "placement", trial);
  const int pid = os.spawn(prog.layout, cfg.spawn, aslr, place);
  victims::run(os, pid, prog, false, [&](victims::Phase ph, osmodel::Os& o, int id) {
    if (ph == victims::Phase::kWait) o.mem_dump(id, std::cout);
  });
  return 0;
}

int cmd_scan(const std::vector<std::string>& files, bool json, bool advise, std::uint64_t seed) {
  std::vector<gadgetscan::GadgetReport> all;
  for (const auto& f : files) {
    const auto unit = gadgetscan::parse_file(f);
    auto r = gadgetscan::scan(unit);
    all.insert(all.end(), r.begin(), r.end());
  }
  Rng rng = Rng::stream(seed, "suggest");
  if (json) {
    std::cout << gadgetscan::to_json(all) << '\n';
  } else {
    for (const auto& r : all) {
      std::cout << gadgetscan::format_report(r) << '\n';
      if (advise) std::cout << "  advice: " << gadgetscan::suggest(r, rng).text << '\n';
    }
    std::cout << all.size() << " finding(s)\n";
  }
  for (const auto& r : all) {
    if (r.cls.hardness == gadgetscan::Hardness::kAnyBit) return 3;
  }
  return 0;
}

int cmd_fuzz(std::uint32_t width, const std::string& init, const std::string& check) {
  std::uint64_t v = 0;
  try {
    v = std::stoull(init, nullptr, 0);
  } catch (const std::exception&) {
    throw ConfigError("init", "not an integer: '" + init + "'");
  }
  const auto chk = victims::Check::parse(check);
  const auto f = gadgetscan::flip_fuzz(width, v, chk);
  const auto cls = gadgetscan::classify(width, v, chk);
  std::cout << "width " << width << '\n' << "check " << chk.to_string() << '\n' << "single_bit_flips";
  for (auto b : f.single_bit_flips) std::cout << ' ' << b;
  std::cout << '\n'
            << "exploitable " << cls.exploitable << '/' << width << '\n'
            << "min_flips " << (f.min_flips ? std::to_string(*f.min_flips) : "none") << '\n'
            << "hardness " << cls.label() << '\n';
  return 0;
}

int cmd_report(const std::vector<std::string>& files, const std::string& out_csv) {
  std::ofstream file;
  if (!out_csv.empty()) {
    file.open(out_csv);
    if (!file) throw Error("cannot write " + out_csv);
  }
  std::ostream& out = out_csv.empty() ? std::cout : file;
  report::write_summary_header(out);
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw Error("cannot open " + f);
    const std::string name = fs::path(f).parent_path().filename().string();
    report::write_summary_row(out, report::summarize_jsonl(in, name.empty() ? f : name));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rowhammer fault-injection simulator and gadget scanner"};
  app.require_subcommand(1);

  Common profile_c, calib_c, attack_c, relaunch_c, dump_c;
  auto* profile = app.add_subcommand("profile", "Offline flip profiling sweep");
  add_common(profile, profile_c, false);
  auto* calibrate = app.add_subcommand("calibrate", "Bait-count calibration histogram");
  add_common(calibrate, calib_c, true);
  auto* attack = app.add_subcommand("attack", "Run seeded attack trials");
  add_common(attack, attack_c, true);
  auto* relaunch = app.add_subcommand("relaunch", "Run relaunch loops (--trials = loops)");
  add_common(relaunch, relaunch_c, true);
  auto* dump = app.add_subcommand("mem-dump", "Hex dump of the victim stack while it waits");
  add_common(dump, dump_c, false);
  std::uint32_t dump_trial = 0;
  dump->add_option("--trial", dump_trial, "Trial whose randomisation to reuse");

  auto* scan = app.add_subcommand("scan", "Find flip-sensitive checks in C sources");
  std::vector<std::string> scan_files;
  bool scan_json = false;
  bool scan_advise = false;
  std::uint64_t scan_seed = 1;
  scan->add_option("files", scan_files, "Source files")->required()->check(CLI::ExistingFile);
  scan->add_flag("--json", scan_json, "JSON output");
  scan->add_flag("--suggest", scan_advise, "Print rewrite advice");
  scan->add_option("--seed", scan_seed, "Seed for generated pattern constants");

  auto* fuzz = app.add_subcommand("fuzz", "Enumerate single-bit flips of a check");
  std::uint32_t fuzz_width = 32;
  std::string fuzz_init = "0";
  std::string fuzz_check = "!= 0";
  fuzz->add_option("--width", fuzz_width, "Variable width in bits")->check(CLI::Range(1, 64));
  fuzz->add_option("--init", fuzz_init, "Value on the failing path");
  fuzz->add_option("--check", fuzz_check, "Success condition, e.g. \"== 1\"");

  auto* program = app.add_subcommand("program", "Print a shipped victim program as INI");
  std::string program_name;
  program->add_option("name", program_name, "Preset name")
      ->required()
      ->check(CLI::IsMember(victims::preset_names()));

  auto* rep = app.add_subcommand("report", "Summarise trials.jsonl files");
  std::vector<std::string> rep_files;
  std::string rep_out;
  rep->add_option("files", rep_files, "trials.jsonl files")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "CSV output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*profile) return cmd_profile(profile_c);
    if (*calibrate) return cmd_calibrate(calib_c);
    if (*attack) return cmd_attack(attack_c);
    if (*relaunch) return cmd_relaunch(relaunch_c);
    if (*dump) return cmd_mem_dump(dump_c, dump_trial);
    if (*scan) return cmd_scan(scan_files, scan_json, scan_advise, scan_seed);
    if (*fuzz) return cmd_fuzz(fuzz_width, fuzz_init, fuzz_check);
    if (*rep) return cmd_report(rep_files, rep_out);
    if (*program) {
      victims::store_program(victims::preset(program_name), std::cout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
