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

#include "hammersim/report.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

#include "json.hpp"

#include "hammersim/error.hpp"

namespace hammersim::report {

using nlohmann::ordered_json;

std::string fmt_seconds(double s) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9f", s);
  return buf;
}

namespace {

// Keeps JSON numbers stable across platforms: fixed nine decimals.
ordered_json seconds(double ns) { return ordered_json::parse(fmt_seconds(ns * 1e-9)); }

}  // namespace

std::string trial_json(const attacker::TrialResult& t) {
  ordered_json j;
  j["trial"] = t.trial;
  j["seed"] = t.seed;
  j["co_located"] = t.co_located;
  j["flipped_bits"] = t.flipped_bits;
  j["outcome"] = victims::to_string(t.outcome);
  j["sim_time"] = seconds(t.sim_time_ns);
  j["in_interval"] = t.acted_in_interval;
  j["stack_offset"] = t.stack_offset;
  j["total_flips"] = t.total_flips;
  return j.dump();
}

void write_trials(std::ostream& out, std::span<const attacker::TrialResult> trials) {
  for (const auto& t : trials) out << trial_json(t) << '\n';
}

void write_relaunch(std::ostream& out, std::uint64_t seed,
                    std::span<const attacker::RelaunchResult> loops) {
  std::uint64_t i = 0;
  for (const auto& r : loops) {
    ordered_json j;
    j["loop"] = i++;
    j["seed"] = seed;
    j["attempts"] = r.attempts;
    j["co_located"] = r.co_located;
    j["first_success"] = r.first_success ? ordered_json(*r.first_success) : ordered_json(nullptr);
    j["sim_time"] = seconds(r.sim_time_ns);
    out << j.dump() << '\n';
  }
}

Summary summarize(const std::string& scenario, std::span<const attacker::TrialResult> trials,
                  double profile_sim_time_ns, std::uint64_t flippy_pages) {
  Summary s;
  s.scenario = scenario;
  s.trials = trials.size();
  double online = 0.0;
  for (const auto& t : trials) {
    if (t.outcome == victims::AuthOutcome::kSuccess) ++s.successes;
    if (t.co_located) ++s.co_located;
    online += t.sim_time_ns;
  }
  s.correct_baiting = s.co_located;
  s.online_sim_time_s = online * 1e-9;
  s.total_sim_time_s = (online + profile_sim_time_ns) * 1e-9;
  s.flippy_pages = flippy_pages;
  return s;
}

Summary summarize(const std::string& scenario, std::span<const attacker::RelaunchResult> loops,
                  double profile_sim_time_ns, std::uint64_t flippy_pages) {
  Summary s;
  s.scenario = scenario;
  double online = 0.0;
  for (const auto& r : loops) {
    s.trials += r.attempts;
    if (r.first_success) ++s.successes;
    s.co_located += r.co_located;
    online += r.sim_time_ns;
  }
  s.correct_baiting = s.co_located;
  s.online_sim_time_s = online * 1e-9;
  s.total_sim_time_s = (online + profile_sim_time_ns) * 1e-9;
  s.flippy_pages = flippy_pages;
  return s;
}

void write_summary_header(std::ostream& out) {
  out << "scenario,trials,successes,co_located,total_sim_time,online_sim_time,flippy_pages,"
         "correct_baiting\n";
}

void write_summary_row(std::ostream& out, const Summary& s) {
  out << s.scenario << ',' << s.trials << ',' << s.successes << ',' << s.co_located << ','
      << fmt_seconds(s.total_sim_time_s) << ',' << fmt_seconds(s.online_sim_time_s) << ','
      << s.flippy_pages << ',' << s.correct_baiting << '\n';
}

Summary summarize_jsonl(std::istream& in, const std::string& scenario) {
  Summary s;
  s.scenario = scenario;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
      ++s.trials;
      if (j.at("outcome").get<std::string>() == "SUCCESS") ++s.successes;
      if (j.at("co_located").get<bool>()) ++s.co_located;
      s.online_sim_time_s += j.at("sim_time").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, 1, e.what());
    }
  }
  s.correct_baiting = s.co_located;
  s.total_sim_time_s = s.online_sim_time_s;
  return s;
}

}  // namespace hammersim::report
