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

#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "hammersim/error.hpp"
#include "hammersim/report.hpp"
#include "hammersim/scenario.hpp"
#include "json.hpp"

using namespace hammersim;
using namespace hammersim::scenario;

namespace {

ScenarioConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

std::string field_of(const std::string& text) {
  try {
    from_text(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

const char* kMinimal = "[scenario]\nseed = 4\n[victim]\npreset = sudo\n";

}  // namespace

TEST_CASE("minimal scenario takes the defaults") {
  const auto c = from_text(kMinimal);
  CHECK(c.seed == 4);
  CHECK(c.trials == 100);
  CHECK(c.dimm == "ddr3-default");
  CHECK(c.memory_mib == 64);
  CHECK(c.geometry.capacity() == 64ull << 20);
  CHECK(c.spawn.aslr);
  CHECK(c.spawn.placement_noise == 0.48);
  CHECK(c.plan.n_sided == 2);
  CHECK_FALSE(c.bait_count.has_value());
}

TEST_CASE("config errors name the field") {
  CHECK(field_of("[scenario]\nname = x\n[victim]\npreset = sudo\n") == "scenario.seed");
  CHECK(field_of(std::string(kMinimal) + "[dram]\ndimm = ddr9\n") == "dram.dimm");
  CHECK(field_of(std::string(kMinimal) + "[dram]\nmemory_mib = 0\n") == "dram.memory_mib");
  CHECK(field_of(std::string(kMinimal) + "[dram]\ncolour = red\n") == "dram.colour");
  CHECK(field_of(std::string(kMinimal) + "[extras]\nx = 1\n") == "extras");
  CHECK(field_of(std::string(kMinimal) + "[spawn]\nplacement_noise = 1.5\n") == "spawn.placement_noise");
  CHECK(field_of(std::string(kMinimal) + "[spawn]\naslr = maybe\n") == "spawn.aslr");
  CHECK(field_of(std::string(kMinimal) + "[attack]\nn_sided = 0\n") == "attack.n_sided");
  CHECK(field_of(std::string(kMinimal) + "[attack]\nrounds = -3\n") == "attack.rounds");
  CHECK(field_of("[scenario]\nseed = 1\n") == "victim");
  CHECK(field_of("[scenario]\nseed = 1\n[victim]\npreset = sudo\nfile = x.ini\n") == "victim");
  CHECK(field_of("[scenario]\nseed = 1\n[victim]\npreset = apache\n") == "victim.preset");
  CHECK(field_of("[scenario]\nseed = 1\n[victim]\nfile = /nonexistent.ini\n") == "victim.file");
  CHECK(field_of("[scenario]\nseed = 1\njobs = 0\n[victim]\npreset = sudo\n") == "scenario.jobs");
  CHECK_THROWS_AS(from_text("[scenario\nseed = 1\n"), ParseError);
}

TEST_CASE("shipped scenarios load") {
  const std::filesystem::path dir = std::string(HAMMERSIM_DATA_DIR) + "/scenarios";
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    const auto c = load_scenario(entry.path().string());
    CHECK_FALSE(c.name.empty());
    CHECK_NOTHROW(load_victim(c));
    CHECK_NOTHROW(effective_dimm(c));
    ++n;
  }
  CHECK(n >= 8);
}

TEST_CASE("DIMM overrides apply") {
  const auto c = from_text(std::string(kMinimal) +
                           "[dram]\ndimm = ddr4-trr\ncells_per_mib = 5\ntrr_capacity = 9\n"
                           "trr_mac = 1234\nhammer_threshold = 77\n");
  const auto d = effective_dimm(c);
  CHECK(d.trr.enabled);
  CHECK(d.trr.sampler_capacity == 9);
  CHECK(d.trr.mac == 1234);
  CHECK(d.profile.cells_per_mib == 5);
  CHECK(d.disturbance.hammer_threshold == 77);
}

TEST_CASE("small scenario runs end to end") {
  const auto c = from_text(R"([scenario]
name = tiny
seed = 3
[dram]
dimm = test-small
memory_mib = 8
cells_per_mib = 8192
[victim]
preset = sudo
[spawn]
aslr = false
placement_noise = 0
[attack]
accesses_per_round = 1000
rounds = 2
stop_in_interval = 1
calibration_spawns = 10
)");
  const auto setup = prepare_attack(c);
  CHECK(setup.calibration.mode_rate() == 1.0);
  CHECK(setup.plan.bait_count == setup.calibration.mode());
  CHECK(setup.profile.map.flippy_pages() > 100);

  // Same seed, same memory image and plan.
  const auto again = prepare_attack(c);
  CHECK(again.plan.flippy_frame == setup.plan.flippy_frame);
  CHECK(again.plan.target_bit == setup.plan.target_bit);

  const auto trials = attacker::run_trials(setup.context, setup.plan, setup.program, 20);
  std::ostringstream log;
  report::write_trials(log, trials);
  std::istringstream in(log.str());
  const auto from_log = report::summarize_jsonl(in, "tiny");
  const auto direct = report::summarize("tiny", trials, 0.0, 0);
  CHECK(from_log.trials == 20);
  CHECK(from_log.successes == direct.successes);
  CHECK(from_log.co_located == direct.co_located);
  CHECK(direct.co_located == 20);

  std::string line;
  std::istringstream lines(log.str());
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["trial"] == n);
    CHECK(j["seed"] == 3);
    CHECK(j.contains("flipped_bits"));
    CHECK(j.contains("sim_time"));
    const std::string outcome = j["outcome"];
    CHECK((outcome == "SUCCESS" || outcome == "FAILURE" || outcome == "CRASH"));
    ++n;
  }
  CHECK(n == 20);
}

TEST_CASE("summary csv") {
  report::Summary s;
  s.scenario = "x";
  s.trials = 10;
  s.successes = 2;
  s.co_located = 3;
  s.correct_baiting = 3;
  s.total_sim_time_s = 1.5;
  s.online_sim_time_s = 0.25;
  s.flippy_pages = 7;
  std::ostringstream out;
  report::write_summary_header(out);
  report::write_summary_row(out, s);
  CHECK(out.str() ==
        "scenario,trials,successes,co_located,total_sim_time,online_sim_time,flippy_pages,"
        "correct_baiting\nx,10,2,3," + report::fmt_seconds(1.5) + "," + report::fmt_seconds(0.25) +
        ",7,3\n");

  std::istringstream bad("{\"trial\": 0\nnot json\n");
  CHECK_THROWS_AS(report::summarize_jsonl(bad, "x"), ParseError);
}
