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

// Trial logs (JSON lines) and run summaries (CSV).

#ifndef HAMMERSIM_REPORT_HPP
#define HAMMERSIM_REPORT_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hammersim/attacker.hpp"

namespace hammersim::report {

// {"trial":..,"seed":..,"co_located":..,"flipped_bits":[..],"outcome":"..","sim_time":..}
// with sim_time in simulated seconds.
std::string trial_json(const attacker::TrialResult& t);
void write_trials(std::ostream& out, std::span<const attacker::TrialResult> trials);

// {"loop":..,"seed":..,"attempts":..,"co_located":..,"first_success":..|null,"sim_time":..}
void write_relaunch(std::ostream& out, std::uint64_t seed,
                    std::span<const attacker::RelaunchResult> loops);

struct Summary {
  std::string scenario;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  std::uint64_t co_located = 0;  // trials whose target landed on the flippy frame
  double total_sim_time_s = 0.0;   // profiling + online
  double online_sim_time_s = 0.0;
  std::uint64_t flippy_pages = 0;
  std::uint64_t correct_baiting = 0;  // same as co_located
};

Summary summarize(const std::string& scenario, std::span<const attacker::TrialResult> trials,
                  double profile_sim_time_ns, std::uint64_t flippy_pages);
Summary summarize(const std::string& scenario, std::span<const attacker::RelaunchResult> loops,
                  double profile_sim_time_ns, std::uint64_t flippy_pages);

void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const Summary& s);

// Re-aggregates a trials JSON-lines stream. Throws ParseError on a
// malformed line.
Summary summarize_jsonl(std::istream& in, const std::string& scenario);

// Fixed-precision formatting used in every output.
std::string fmt_seconds(double s);

}  // namespace hammersim::report

#endif  // HAMMERSIM_REPORT_HPP
