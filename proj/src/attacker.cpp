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

#include "hammersim/attacker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "hammersim/error.hpp"

namespace hammersim::attacker {

using dram::FlipDirection;
using osmodel::kPageSize;
using victims::SecurityVar;
using victims::Storage;

// --- FlipMap -------------------------------------------------------------

std::size_t FlipMap::flippy_pages() const {
  std::set<std::uint64_t> frames;
  for (const auto& e : entries) frames.insert(e.frame);
  return frames.size();
}

void FlipMap::store(std::ostream& out) const {
  out << "# trials " << trials << '\n';
  out << "# frame bit direction count\n";
  for (const auto& e : entries) {
    out << e.frame << ' ' << e.bit << ' ' << dram::to_string(e.direction) << ' ' << e.count << '\n';
  }
}

FlipMap FlipMap::load(std::istream& in) {
  FlipMap m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# trials ", 0) == 0) {
      m.trials = static_cast<std::uint32_t>(std::stoul(line.substr(9)));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    FlipMapEntry e;
    std::string dir;
    if (!(ls >> e.frame >> e.bit >> dir >> e.count)) {
      throw ParseError(lineno, 1, "expected `frame bit direction count`");
    }
    if (e.bit >= kPageSize * 8) throw ParseError(lineno, 1, "bit offset beyond page");
    e.direction = dram::parse_direction(dir);
    m.entries.push_back(e);
  }
  for (const auto& e : m.entries) {
    if (e.count > m.trials) throw ParseError(0, 0, "observed count exceeds trial count");
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.bit) < std::tie(b.frame, b.bit);
  });
  return m;
}

void FlipMap::write_heatmap_csv(std::ostream& out, const dram::Dram& dram) const {
  out << "bank,row,bit,direction,count\n";
  for (const auto& e : entries) {
    const auto loc = dram.map_phys_to_dram(e.frame * kPageSize + e.byte());
    out << loc.bank << ',' << loc.row << ',' << loc.offset * 8 + e.bit % 8 << ','
        << dram::to_string(e.direction) << ',' << e.count << '\n';
  }
}

// --- profiling -----------------------------------------------------------

std::vector<memwalk::RowRun> whole_memory_runs(const dram::Geometry& g) {
  std::vector<memwalk::RowRun> runs(g.banks);
  for (std::uint32_t b = 0; b < g.banks; ++b) {
    runs[b].rows.reserve(g.rows_per_bank);
    for (std::uint32_t r = 0; r < g.rows_per_bank; ++r) runs[b].rows.push_back({b, r});
  }
  return runs;
}

FlipMap profile_offline(dram::Dram& dram, std::span<const memwalk::RowRun> runs,
                        std::uint32_t trials, double min_reproducibility,
                        const ProfileOptions& opts) {
  if (trials == 0) throw Error("profiling needs at least one trial");
  if (opts.n_sided == 0) throw Error("n_sided must be > 0");
  // Victim i is hammered by rows i-(2n-3), ..., i-1 and i+1.
  const std::size_t below = opts.n_sided >= 2 ? 2 * std::size_t{opts.n_sided} - 3 : 0;
  if (std::none_of(runs.begin(), runs.end(),
                   [&](const auto& r) { return r.rows.size() >= below + 2; })) {
    throw Error("region too small for the hammer pattern");
  }
  const std::uint32_t page_bits = dram.geometry().page_size_bytes * 8;
  // key = (frame * page_bits + bit) * 2 + direction
  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  std::vector<std::uint8_t> page;
  std::vector<std::uint8_t> fills = {0xff};
  if (opts.both_polarities) fills.push_back(0x00);

  dram::HammerPattern pattern;
  pattern.accesses_per_round = opts.accesses_per_round;
  pattern.rounds = 1;
  for (std::uint32_t t = 0; t < trials; ++t) {
    for (const auto& run : runs) {
      for (std::size_t i = below; i + 1 < run.rows.size(); ++i) {
        pattern.aggressors.clear();
        for (std::size_t a = i - below; a < i; a += 2) pattern.aggressors.push_back(run.rows[a]);
        pattern.aggressors.push_back(run.rows[i + 1]);
        const auto frames = dram.frames_of_row(run.rows[i]);
        for (std::uint8_t fill : fills) {
          for (std::uint64_t f : frames) dram.fill_page(f, fill);
          dram.hammer(pattern);
          const auto dir = fill == 0xff ? FlipDirection::kOneToZero : FlipDirection::kZeroToOne;
          for (std::uint64_t f : frames) {
            if (dram.page_equals(f, fill)) continue;
            page = dram.read_page(f);
            for (std::uint32_t byte = 0; byte < page.size(); ++byte) {
              std::uint8_t diff = page[byte] ^ fill;
              while (diff != 0) {
                const int b = __builtin_ctz(diff);
                diff &= static_cast<std::uint8_t>(diff - 1);
                const std::uint64_t key =
                    (f * page_bits + byte * 8 + static_cast<std::uint32_t>(b)) * 2 +
                    static_cast<std::uint64_t>(dir);
                ++counts[key];
              }
            }
          }
        }
      }
    }
  }

  const auto need = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::ceil(min_reproducibility * trials - 1e-9)));
  FlipMap map;
  map.trials = trials;
  for (const auto& [key, count] : counts) {
    if (count < need) continue;
    const std::uint64_t cell = key / 2;
    map.entries.push_back({cell / page_bits, static_cast<std::uint32_t>(cell % page_bits),
                           static_cast<FlipDirection>(key % 2), count});
  }
  std::sort(map.entries.begin(), map.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.bit, a.direction) < std::tie(b.frame, b.bit, b.direction);
  });
  return map;
}

// --- fault estimate ------------------------------------------------------

double p_fault_percent(double n_avg, double n_flippy, double n_pages, double fraction) {
  if (!(n_flippy > 0.0)) return 0.0;
  const double ratio = std::clamp(n_avg / n_flippy, 0.0, 1.0);
  const double exponent = n_pages * fraction;
  if (ratio == 0.0 || exponent <= 0.0) return 0.0;
  if (ratio == 1.0) return 100.0;
  return -std::expm1(exponent * std::log1p(-ratio)) * 100.0;
}

FaultEstimate estimate_fault_probability(const FlipMap& map, std::uint64_t n_pages,
                                         double fraction, std::uint32_t target_bytes,
                                         std::uint32_t nibble) {
  if (target_bytes == 0 || nibble + target_bytes > 16) {
    throw Error("target must fit inside one 16-byte slot");
  }
  FaultEstimate est;
  est.n_pages = n_pages;
  est.fraction = fraction;
  est.n_flippy = map.flippy_pages();
  std::uint64_t hits = 0;
  for (const auto& e : map.entries) {
    const std::uint32_t b = e.byte();
    if (b >= nibble && (b - nibble) % 16 < target_bytes) ++hits;
  }
  est.n_avg = static_cast<double>(hits) / 256.0;
  est.p_fault = p_fault_percent(est.n_avg, static_cast<double>(est.n_flippy),
                                static_cast<double>(n_pages), fraction);
  return est;
}

// --- calibration ---------------------------------------------------------

std::uint32_t BaitHistogram::mode() const {
  std::uint32_t best = 0, best_count = 0;
  for (const auto& [idx, c] : counts) {
    if (c > best_count) {
      best = idx;
      best_count = c;
    }
  }
  return best;
}

double BaitHistogram::mode_rate() const {
  if (spawns == 0 || counts.empty()) return 0.0;
  return static_cast<double>(counts.at(mode())) / spawns;
}

namespace {

std::uint64_t target_vaddr(const osmodel::Process& p, const victims::GadgetProgram& prog) {
  return p.stack_base - victims::target_depth(prog);
}

std::optional<std::uint64_t> find_sentinel(const osmodel::Os& os, int pid, std::uint64_t value) {
  const auto& p = os.process(pid);
  std::vector<std::uint8_t> page(kPageSize);
  for (const auto& [vpage, frame] : p.page_table) {
    if (vpage * kPageSize < osmodel::kStackTop - 0x800000) continue;
    os.memory().read(frame * kPageSize, page);
    for (std::size_t off = 0; off + 8 <= kPageSize; off += 8) {
      std::uint64_t v = 0;
      for (std::size_t i = 8; i-- > 0;) v = (v << 8) | page[off + i];
      if (v == value) return frame;
    }
  }
  return std::nullopt;
}

}  // namespace

BaitHistogram calibrate_bait_count(const dram::Dram& memory, const victims::GadgetProgram& prog,
                                   const CalibrationOptions& opts, std::uint64_t seed) {
  dram::Dram mem = memory;
  osmodel::Os os(mem);
  BaitHistogram hist;
  const bool in_register = prog.target().storage != Storage::kStack;
  for (std::uint32_t s = 0; s < opts.spawns; ++s) {
    Rng aslr = Rng::stream(seed, "aslr", s);
    Rng place = Rng::stream(seed, "placement", s);
    std::vector<std::uint64_t> released(opts.release);
    for (auto& f : released) f = os.alloc_frame();
    for (std::uint64_t f : released) os.free_frame(f);

    const int pid = os.spawn(prog.layout, opts.spawn, aslr, place);
    std::optional<std::uint64_t> frame;
    if (!in_register) {
      frame = os.translate(pid, target_vaddr(os.process(pid), prog));
    } else {
      victims::RunOptions ro;
      ro.sentinel = opts.sentinel;
      const bool via_signal = prog.target().storage == Storage::kSignalSpill;
      victims::run(os, pid, prog, false,
                   [&](victims::Phase ph, osmodel::Os& o, int id) {
                     if (ph != victims::Phase::kWait) return;
                     if (via_signal) o.deliver_signal(id, osmodel::Signal::kHandled);
                     frame = find_sentinel(o, id, opts.sentinel);
                     if (via_signal) o.deliver_signal(id, osmodel::Signal::kCont);
                   },
                   ro);
    }
    ++hist.spawns;
    const auto it = frame ? std::find(released.begin(), released.end(), *frame) : released.end();
    if (it == released.end()) {
      ++hist.misses;
    } else {
      // Released frames come back in reverse release order.
      ++hist.counts[static_cast<std::uint32_t>(released.end() - it - 1)];
    }
    os.exit(pid);
  }
  return hist;
}

// --- planning ------------------------------------------------------------

bool useful_flip(const SecurityVar& var, std::uint64_t offset, std::uint32_t bit, FlipDirection dir) {
  const std::uint64_t byte = bit / 8;
  if (byte < offset || byte >= offset + var.bytes()) return false;
  const std::uint64_t j = (byte - offset) * 8 + bit % 8;
  if (j >= var.width_bits) return false;
  const std::uint64_t w = var.wrong_path_value();
  const bool set = ((w >> j) & 1) != 0;
  if (set != (dir == FlipDirection::kOneToZero)) return false;
  return var.check.satisfied(w ^ (std::uint64_t{1} << j));
}

namespace {

std::optional<std::vector<dram::RowAddress>> aggressors_around(const dram::Geometry& g,
                                                               dram::RowAddress victim,
                                                               std::uint32_t n_sided) {
  const std::int64_t r = victim.row;
  const std::int64_t lowest = n_sided >= 2 ? r - (2 * std::int64_t{n_sided} - 3) : r + 1;
  if (lowest < 0 || r + 1 >= static_cast<std::int64_t>(g.rows_per_bank)) return std::nullopt;
  std::vector<dram::RowAddress> rows;
  for (std::int64_t a = lowest; a < r; a += 2) {
    rows.push_back({victim.bank, static_cast<std::uint32_t>(a)});
  }
  rows.push_back({victim.bank, static_cast<std::uint32_t>(r + 1)});
  return rows;
}

}  // namespace

AttackPlan plan_attack(const FlipMap& map, const victims::GadgetProgram& prog,
                       const dram::Dram& dram, std::uint32_t bait_count, const PlanOptions& opts) {
  if (opts.n_sided == 0) throw Error("n_sided must be > 0");
  const auto& var = prog.target();
  const std::uint32_t nibble = victims::target_nibble(prog);

  struct Best {
    std::uint64_t frame = 0;
    std::uint32_t coverage = 0;
    std::uint64_t weight = 0;
    const FlipMapEntry* entry = nullptr;
  } best;
  for (std::size_t i = 0; i < map.entries.size();) {
    const std::uint64_t frame = map.entries[i].frame;
    std::set<std::uint32_t> slots;
    std::uint64_t weight = 0;
    const FlipMapEntry* top = nullptr;
    for (; i < map.entries.size() && map.entries[i].frame == frame; ++i) {
      const auto& e = map.entries[i];
      const std::uint32_t b = e.byte();
      if (b < nibble) continue;
      const std::uint64_t offset = b - (b - nibble) % 16;
      if (!useful_flip(var, offset, e.bit, e.direction)) continue;
      slots.insert(static_cast<std::uint32_t>(offset / 16));
      weight += e.count;
      if (top == nullptr || e.count > top->count) top = &e;
    }
    if (slots.empty()) continue;
    if (!aggressors_around(dram.geometry(), dram.row_of_frame(frame), opts.n_sided)) continue;
    const auto cov = static_cast<std::uint32_t>(slots.size());
    if (cov > best.coverage || (cov == best.coverage && weight > best.weight)) {
      best = {frame, cov, weight, top};
    }
  }
  if (best.entry == nullptr) throw Error("no flippy page can reach the target variable");

  AttackPlan plan;
  plan.flippy_frame = best.frame;
  plan.target_bit = best.entry->bit;
  plan.direction = best.entry->direction;
  plan.coverage = best.coverage;
  plan.bait_count = bait_count;
  plan.pattern.aggressors = *aggressors_around(dram.geometry(), dram.row_of_frame(best.frame), opts.n_sided);
  plan.pattern.accesses_per_round = opts.accesses_per_round;
  plan.pattern.rounds = opts.rounds;
  plan.sync = prog.sync;
  plan.stop_in_interval = opts.stop_in_interval;
  plan.relaunch_budget = opts.relaunch_budget;
  return plan;
}

// --- online phase --------------------------------------------------------

namespace {

// Frames the attacker keeps for itself: every row from one below the
// lowest aggressor to one above the highest, so no victim page except the
// baited one can sit in the blast zone.
std::vector<std::uint64_t> blast_zone_frames(const dram::Dram& mem, const AttackPlan& plan) {
  const auto& g = mem.geometry();
  const int reach = mem.disturbance().distance2 ? 2 : 1;
  std::int64_t lo = plan.pattern.aggressors.front().row;
  std::int64_t hi = lo;
  for (const auto& a : plan.pattern.aggressors) {
    lo = std::min<std::int64_t>(lo, a.row);
    hi = std::max<std::int64_t>(hi, a.row);
  }
  lo = std::max<std::int64_t>(0, lo - reach);
  hi = std::min<std::int64_t>(g.rows_per_bank - 1, hi + reach);
  std::vector<std::uint64_t> frames;
  const std::uint32_t bank = plan.pattern.aggressors.front().bank;
  for (std::int64_t r = lo; r <= hi; ++r) {
    for (std::uint64_t f : mem.frames_of_row({bank, static_cast<std::uint32_t>(r)})) frames.push_back(f);
  }
  return frames;
}

struct Setup {
  std::vector<std::uint64_t> baits;
};

Setup reserve(osmodel::Os& os, const AttackPlan& plan) {
  for (std::uint64_t f : blast_zone_frames(os.memory(), plan)) os.free_list().take(f);
  Setup s;
  s.baits.reserve(plan.bait_count);
  for (std::uint32_t i = 0; i < plan.bait_count; ++i) s.baits.push_back(os.alloc_frame());
  return s;
}

void release(osmodel::Os& os, const AttackPlan& plan, const Setup& s) {
  // Flippy page first, baits after it: the victim drains the baits before
  // it reaches the flippy page.
  os.free_frame(plan.flippy_frame);
  for (std::uint64_t f : s.baits) os.free_frame(f);
}

void reclaim(osmodel::Os& os, const AttackPlan& plan, const Setup& s) {
  os.free_list().take(plan.flippy_frame);
  for (std::uint64_t f : s.baits) os.free_list().take(f);
}

struct Attempt {
  victims::AuthOutcome outcome = victims::AuthOutcome::kFailure;
  bool co_located = false;
  bool in_interval = false;
  std::vector<std::uint32_t> flipped_bits;
  std::size_t total_flips = 0;
  std::uint64_t stack_offset = 0;
};

Attempt attempt(osmodel::Os& os, const AttackPlan& plan, const victims::GadgetProgram& prog,
                const osmodel::SpawnOptions& spawn, Rng& aslr, Rng& place, Rng& sync) {
  Attempt out;
  auto& mem = os.memory();
  const auto& var = prog.target();
  const int pid = os.spawn(prog.layout, spawn, aslr, place);
  const std::uint64_t vaddr = target_vaddr(os.process(pid), prog);
  out.stack_offset = vaddr % kPageSize;
  out.co_located = os.translate(pid, vaddr) == plan.flippy_frame;

  const double u = sync.uniform();
  const bool early = sync.bernoulli(0.5);
  victims::Phase act_at = victims::Phase::kWait;
  if (plan.sync == victims::SyncKind::kSigstop && u >= plan.stop_in_interval) {
    act_at = early ? victims::Phase::kAfterInit : victims::Phase::kAfterCheck;
  }
  out.in_interval = act_at == victims::Phase::kWait;

  auto hook = [&](victims::Phase ph, osmodel::Os& o, int id) {
    if (ph != act_at) return;
    const bool via_signal = var.storage == Storage::kSignalSpill;
    const bool stop = plan.sync == victims::SyncKind::kSigstop || via_signal;
    if (via_signal) o.deliver_signal(id, osmodel::Signal::kHandled);
    if (stop) o.deliver_signal(id, osmodel::Signal::kStop);

    const auto& p = o.process(id);
    bool resident = false;
    switch (var.storage) {
      case Storage::kStack: resident = true; break;
      case Storage::kWindowSpill: resident = p.window_open; break;
      case Storage::kSignalSpill: resident = p.handler_active; break;
      case Storage::kRegister: break;
    }
    const std::uint64_t phys = resident ? o.phys_addr(id, vaddr) : 0;
    const auto events = mem.hammer(plan.pattern);
    out.total_flips += events.size();
    if (resident && ph == victims::Phase::kWait) {
      for (const auto& e : events) {
        if (e.phys_byte < phys || e.phys_byte >= phys + var.bytes()) continue;
        const auto j = static_cast<std::uint32_t>((e.phys_byte - phys) * 8 + e.cell.bit % 8);
        if (j < var.width_bits) out.flipped_bits.push_back(j);
      }
    }
    if (stop) o.deliver_signal(id, osmodel::Signal::kCont);
  };
  out.outcome = victims::run(os, pid, prog, false, hook);
  os.exit(pid);
  std::sort(out.flipped_bits.begin(), out.flipped_bits.end());
  return out;
}

std::uint64_t dram_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return Rng::stream(seed, name, index).next();
}

template <typename Result, typename Fn>
std::vector<Result> fan_out(std::uint32_t n, unsigned jobs, Fn fn) {
  std::vector<Result> results(n);
  jobs = std::max(1u, std::min<unsigned>(jobs, n));
  if (jobs == 1) {
    for (std::uint32_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::uint32_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::uint32_t i; (i = next.fetch_add(1)) < n && !failed;) {
        try {
          results[i] = fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace

TrialResult execute_attack(const AttackContext& ctx, const AttackPlan& plan,
                           const victims::GadgetProgram& prog, std::uint32_t trial) {
  if (ctx.memory == nullptr) throw Error("attack context has no memory image");
  dram::Dram mem = *ctx.memory;
  mem.reseed(dram_seed(ctx.seed, "dram", trial));
  const double start = mem.now_ns();
  osmodel::Os os(mem);
  const Setup s = reserve(os, plan);
  release(os, plan, s);

  Rng aslr = Rng::stream(ctx.seed, "aslr", trial);
  Rng place = Rng::stream(ctx.seed, "placement", trial);
  Rng sync = Rng::stream(ctx.seed, "sync", trial);
  const Attempt a = attempt(os, plan, prog, ctx.spawn, aslr, place, sync);

  TrialResult r;
  r.trial = trial;
  r.seed = ctx.seed;
  r.co_located = a.co_located;
  r.acted_in_interval = a.in_interval;
  r.flipped_bits = a.flipped_bits;
  r.total_flips = a.total_flips;
  r.outcome = a.outcome;
  r.sim_time_ns = mem.now_ns() - start;
  r.stack_offset = a.stack_offset;
  return r;
}

std::vector<TrialResult> run_trials(const AttackContext& ctx, const AttackPlan& plan,
                                    const victims::GadgetProgram& prog, std::uint32_t n,
                                    unsigned jobs) {
  return fan_out<TrialResult>(n, jobs, [&](std::uint32_t i) {
    return execute_attack(ctx, plan, prog, i);
  });
}

RelaunchResult relaunch_loop(const AttackContext& ctx, const AttackPlan& plan,
                             const victims::GadgetProgram& prog, std::uint32_t budget,
                             std::uint64_t loop) {
  if (ctx.memory == nullptr) throw Error("attack context has no memory image");
  dram::Dram mem = *ctx.memory;
  mem.reseed(dram_seed(ctx.seed, "relaunch-dram", loop));
  const double start = mem.now_ns();
  osmodel::Os os(mem);
  const Setup s = reserve(os, plan);
  Rng aslr = Rng::stream(ctx.seed, "relaunch-aslr", loop);
  Rng place = Rng::stream(ctx.seed, "relaunch-placement", loop);
  Rng sync = Rng::stream(ctx.seed, "relaunch-sync", loop);

  RelaunchResult r;
  for (std::uint32_t i = 0; i < budget; ++i) {
    release(os, plan, s);
    const Attempt a = attempt(os, plan, prog, ctx.spawn, aslr, place, sync);
    ++r.attempts;
    if (a.co_located) ++r.co_located;
    reclaim(os, plan, s);
    if (a.outcome == victims::AuthOutcome::kSuccess) {
      r.first_success = i;
      break;
    }
  }
  r.sim_time_ns = mem.now_ns() - start;
  return r;
}

std::vector<RelaunchResult> run_relaunch_loops(const AttackContext& ctx, const AttackPlan& plan,
                                               const victims::GadgetProgram& prog,
                                               std::uint32_t budget, std::uint32_t loops,
                                               unsigned jobs) {
  return fan_out<RelaunchResult>(loops, jobs, [&](std::uint32_t i) {
    return relaunch_loop(ctx, plan, prog, budget, i);
  });
}

// --- closed form ---------------------------------------------------------

double RelaunchModel::within(std::uint32_t budget) const {
  if (per_attempt >= 1.0) return budget > 0 ? 1.0 : 0.0;
  return -std::expm1(budget * std::log1p(-per_attempt));
}

RelaunchModel relaunch_model(const AttackPlan& plan, const victims::GadgetProgram& prog,
                             const osmodel::SpawnOptions& spawn, const dram::Dram& memory) {
  const auto& var = prog.target();
  const auto& layout = prog.layout;
  const std::uint64_t depth = victims::target_depth(prog);

  // Ground-truth cells of the flippy frame, as in-page bits with their
  // chance of flipping at least once over the hammer rounds.
  struct Cell {
    std::uint32_t bit;
    FlipDirection dir;
    double p;
  };
  std::vector<Cell> cells;
  const auto row = memory.row_of_frame(plan.flippy_frame);
  for (const auto& c : memory.profile().cells_in_row(row.bank, row.row)) {
    const std::uint64_t phys = memory.dram_to_phys({row.bank, row.row, c.bit / 8});
    if (phys / kPageSize != plan.flippy_frame) continue;
    const double p =
        c.prob >= 1.0 ? 1.0 : -std::expm1(plan.pattern.rounds * std::log1p(-c.prob));
    cells.push_back({static_cast<std::uint32_t>((phys % kPageSize) * 8 + c.bit % 8), c.direction, p});
  }

  // Probability that the check passes with the target at `offset`.
  std::unordered_map<std::uint64_t, double> cache;
  auto success_at = [&](std::uint64_t offset) {
    auto it = cache.find(offset);
    if (it != cache.end()) return it->second;
    const std::uint64_t w = var.wrong_path_value();
    std::vector<std::pair<std::uint32_t, double>> live;  // variable bit, prob
    for (const auto& c : cells) {
      const std::uint64_t byte = c.bit / 8;
      if (byte < offset || byte >= offset + var.bytes()) continue;
      const std::uint64_t j = (byte - offset) * 8 + c.bit % 8;
      if (j >= var.width_bits) continue;
      const bool set = ((w >> j) & 1) != 0;
      if (set != (c.dir == FlipDirection::kOneToZero)) continue;
      live.emplace_back(static_cast<std::uint32_t>(j), c.p);
    }
    double total = 0.0;
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << live.size()); ++m) {
      double pr = 1.0;
      std::uint64_t v = w;
      for (std::size_t k = 0; k < live.size(); ++k) {
        if ((m >> k) & 1) {
          pr *= live[k].second;
          v ^= std::uint64_t{1} << live[k].first;
        } else {
          pr *= 1.0 - live[k].second;
        }
      }
      if (var.check.satisfied(v & var.mask())) total += pr;
    }
    cache.emplace(offset, total);
    return total;
  };

  std::vector<std::pair<std::int64_t, double>> perturbations = {{0, 1.0 - spawn.placement_noise}};
  const std::uint32_t mmax = std::max<std::uint32_t>(1, spawn.max_perturbation);
  for (std::uint32_t m = 1; m <= mmax; ++m) {
    const double p = spawn.placement_noise / (2.0 * mmax);
    perturbations.push_back({static_cast<std::int64_t>(m), p});
    perturbations.push_back({-static_cast<std::int64_t>(m), p});
  }
  const double sync = plan.sync == victims::SyncKind::kSigstop ? plan.stop_in_interval : 1.0;

  RelaunchModel model;
  const std::uint64_t rand_values = spawn.aslr ? osmodel::kStackRandomRange : 1;
  for (std::uint64_t rand = 0; rand < rand_values; ++rand) {
    const std::uint64_t base = osmodel::align_stack(osmodel::kStackTop - layout.env_bytes, rand);
    const std::uint64_t addr = base - depth;
    const std::uint64_t above = (osmodel::kStackTop - 1) / kPageSize - addr / kPageSize;
    double co = 0.0;
    for (const auto& [eps, p] : perturbations) {
      const std::int64_t filler = std::max<std::int64_t>(0, std::int64_t{layout.filler_frames} + eps);
      if (static_cast<std::uint64_t>(filler) + above == plan.bait_count) co += p;
    }
    if (co == 0.0) continue;
    model.co_location += co / rand_values;
    model.per_attempt += co / rand_values * sync * success_at(addr % kPageSize);
  }
  return model;
}

// --- side channels -------------------------------------------------------

std::vector<std::uint64_t> infer_offset_from_faults(std::uint64_t faults,
                                                    const osmodel::FaultModel& model,
                                                    std::uint32_t nibble) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t k = 0; k < kPageSize / 16; ++k) {
    const std::uint64_t off = 16 * k + nibble;
    const bool inside = off >= model.offset_lo && off <= model.offset_hi;
    if (faults == model.in_range_faults && !inside) continue;
    if (faults == model.out_of_range_faults && inside) continue;
    out.push_back(off);
  }
  return out;
}

std::vector<std::uint64_t> infer_offset_from_faults(const osmodel::Os& os, int pid,
                                                    const victims::GadgetProgram& prog) {
  const auto& p = os.process(pid);
  if (!p.aslr) return {victims::target_page_offset(prog, p.stack_base)};
  return infer_offset_from_faults(p.minor_faults, prog.layout.faults, victims::target_nibble(prog));
}

double remap_bait_estimate(std::uint32_t true_bait_count, double noise_sd, Rng& rng) {
  return true_bait_count + rng.normal(0.0, noise_sd);
}

}  // namespace hammersim::attacker
