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

#include "hammersim/victims.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hammersim/error.hpp"

namespace hammersim::victims {

using osmodel::Reg;

std::string Check::to_string() const {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s 0x%llx", op == CheckOp::kEquals ? "==" : "!=",
                static_cast<unsigned long long>(value));
  return buf;
}

Check Check::parse(const std::string& text) {
  std::istringstream in(text);
  std::string op, val;
  if (!(in >> op >> val)) throw Error("check must look like `== 1` or `!= 0`");
  Check c;
  if (op == "==") {
    c.op = CheckOp::kEquals;
  } else if (op == "!=") {
    c.op = CheckOp::kNotEquals;
  } else {
    throw Error("unknown comparison '" + op + "'");
  }
  try {
    c.value = std::stoull(val, nullptr, 0);
  } catch (const std::exception&) {
    throw Error("bad check value '" + val + "'");
  }
  return c;
}

const char* to_string(Storage s) {
  switch (s) {
    case Storage::kStack: return "stack";
    case Storage::kRegister: return "register";
    case Storage::kWindowSpill: return "window-spill";
    case Storage::kSignalSpill: return "signal-spill";
  }
  return "?";
}

const char* to_string(SyncKind s) {
  return s == SyncKind::kSigstop ? "sigstop" : "blocking-window";
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::kAfterInit: return "after-init";
    case Phase::kAfterAssign: return "after-assign";
    case Phase::kWait: return "wait";
    case Phase::kAfterCheck: return "after-check";
  }
  return "?";
}

const char* to_string(AuthOutcome o) {
  switch (o) {
    case AuthOutcome::kSuccess: return "SUCCESS";
    case AuthOutcome::kFailure: return "FAILURE";
    case AuthOutcome::kCrash: return "CRASH";
  }
  return "?";
}

namespace {

std::uint64_t align_up16(std::uint64_t v) { return (v + 15) & ~std::uint64_t{0xf}; }

std::size_t sigframe_index(Reg r) {
  const auto& order = osmodel::sigframe_order();
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), r) - order.begin());
}

std::vector<const SecurityVar*> window_vars(const GadgetProgram& prog) {
  std::vector<const SecurityVar*> out;
  for (const auto& v : prog.variables) {
    if (v.storage == Storage::kWindowSpill) out.push_back(&v);
  }
  return out;
}

std::uint64_t max_memory_extent(const GadgetProgram& prog) {
  std::uint64_t deepest = prog.frame_depth;
  for (const auto& v : prog.variables) {
    if (v.storage != Storage::kRegister) deepest = std::max(deepest, memory_depth(prog, v));
  }
  if (prog.layout.signal_handler) {
    deepest = std::max(deepest, align_up16(prog.frame_depth + osmodel::kRedZone +
                                           osmodel::kSigFrameBytes) + 8);
  }
  if (prog.crash_modeling) deepest = std::max(deepest, prog.critical_depth);
  return deepest;
}

// Fills in derived layout fields and validates.
GadgetProgram finish(GadgetProgram prog) {
  if (!prog.variables.empty()) prog.layout.target_depth = target_depth(prog);
  prog.layout.name = prog.name;
  prog.validate();
  return prog;
}

}  // namespace

std::uint64_t memory_depth(const GadgetProgram& prog, const SecurityVar& var) {
  switch (var.storage) {
    case Storage::kStack:
      return var.depth;
    case Storage::kWindowSpill: {
      const auto vars = window_vars(prog);
      const auto it = std::find(vars.begin(), vars.end(), &var);
      const std::uint64_t slot = static_cast<std::uint64_t>(it - vars.begin());
      return vars.front()->depth - 8 * slot;
    }
    case Storage::kSignalSpill:
      // Signal frame placed below the red zone of the waiting frame.
      return align_up16(prog.frame_depth + osmodel::kRedZone + osmodel::kSigFrameBytes) + 8 -
             osmodel::kSigFrameGregs - 8 * sigframe_index(var.reg);
    case Storage::kRegister:
      break;
  }
  throw Error("variable '" + var.name + "' never lives in memory");
}

std::uint64_t target_depth(const GadgetProgram& prog) {
  return memory_depth(prog, prog.target());
}

std::uint32_t target_nibble(const GadgetProgram& prog) {
  return static_cast<std::uint32_t>((0 - target_depth(prog)) & 0xf);
}

void GadgetProgram::validate() const {
  if (name.empty()) throw ConfigError("program.name", "must not be empty");
  if (variables.empty()) throw ConfigError("program.variables", "at least one variable needed");
  for (const auto& v : variables) {
    const std::string field = "var:" + v.name;
    if (v.width_bits == 0 || v.width_bits > 64) throw ConfigError(field + ".width", "must be 1..64");
    if ((v.check.value & ~v.mask()) != 0) throw ConfigError(field + ".check", "value wider than variable");
    if (v.storage != Storage::kStack && v.reg == Reg::kRsp) {
      throw ConfigError(field + ".register", "rsp cannot hold a variable");
    }
    if (v.storage == Storage::kStack && v.depth < v.bytes()) {
      throw ConfigError(field + ".depth", "stack slot must lie below the stack base");
    }
    if (v.storage == Storage::kWindowSpill && !blocking_window) {
      throw ConfigError(field + ".storage", "window spill needs program.blocking_window");
    }
    if (v.storage == Storage::kSignalSpill && !layout.signal_handler) {
      throw ConfigError(field + ".storage", "signal spill needs program.signal_handler");
    }
    if (v.storage != Storage::kRegister) {
      const std::uint64_t off = (0 - memory_depth(*this, v)) & 0xf;
      if (off + v.bytes() > 16) throw ConfigError(field + ".depth", "slot straddles a 16-byte line");
    }
    if (!v.check.satisfied(v.correct_value & v.mask())) {
      throw ConfigError(field + ".correct", "correct credential must pass the check");
    }
    if (v.check.satisfied(v.wrong_path_value())) {
      throw ConfigError(field + ".wrong", "wrong credential must fail the check");
    }
  }
  if (target().storage == Storage::kRegister) {
    throw ConfigError("program.variables", "the target must be memory resident at some point");
  }
  if (max_memory_extent(*this) > layout.stack_extent) {
    throw ConfigError("program.stack_extent", "too small for the declared variables");
  }
}

AuthOutcome run(osmodel::Os& os, int pid, const GadgetProgram& prog, bool credential_correct,
                const PhaseHook& hook, const RunOptions& opts) {
  auto& p = os.process(pid);
  const std::uint64_t base = p.stack_base;
  auto fire = [&](Phase ph) {
    if (hook) hook(ph, os, pid);
  };
  auto write_var = [&](const SecurityVar& v, std::uint64_t value) {
    value &= v.mask();
    if (v.storage == Storage::kStack) {
      os.write_value(pid, base - v.depth, value, v.bytes());
    } else {
      os.process(pid).regs[static_cast<std::size_t>(v.reg)] = value;
    }
  };
  auto read_var = [&](const SecurityVar& v) {
    const std::uint64_t raw = v.storage == Storage::kStack
                                  ? os.read_value(pid, base - v.depth, v.bytes())
                                  : os.process(pid).regs[static_cast<std::size_t>(v.reg)];
    return raw & v.mask();
  };

  const bool sentinel = opts.sentinel.has_value();
  for (const auto& v : prog.variables) {
    write_var(v, sentinel && &v == &prog.target() ? *opts.sentinel : v.init_value);
  }
  std::vector<std::uint8_t> critical;
  if (prog.crash_modeling && prog.critical_bytes > 0) {
    critical.assign(prog.critical_bytes, 0xcc);
    os.write_virt(pid, base - prog.critical_depth, critical);
  }
  fire(Phase::kAfterInit);

  for (const auto& v : prog.variables) {
    if (sentinel && &v == &prog.target()) continue;
    if (credential_correct) {
      write_var(v, v.correct_value);
    } else if (v.wrong_value) {
      write_var(v, *v.wrong_value);
    }
  }
  fire(Phase::kAfterAssign);

  os.process(pid).regs[static_cast<std::size_t>(Reg::kRsp)] = base - prog.frame_depth;
  if (prog.blocking_window) {
    std::vector<Reg> pushed;
    std::uint64_t slot = 0;
    for (const auto* v : window_vars(prog)) {
      if (pushed.empty()) slot = v->depth;
      pushed.push_back(v->reg);
    }
    os.open_window(pid, std::move(pushed), slot);
  }
  fire(Phase::kWait);
  if (os.process(pid).window_open) os.close_window(pid);
  os.process(pid).regs[static_cast<std::size_t>(Reg::kRsp)] = base;

  const bool passed = prog.target().check.satisfied(read_var(prog.target()));
  fire(Phase::kAfterCheck);

  if (!critical.empty()) {
    std::vector<std::uint8_t> now(critical.size());
    os.read_virt(pid, base - prog.critical_depth, now);
    if (now != critical) return AuthOutcome::kCrash;
  }
  return passed ? AuthOutcome::kSuccess : AuthOutcome::kFailure;
}

// --- presets -------------------------------------------------------------

namespace {

SecurityVar stack_var(std::string name, std::uint64_t depth, Check check) {
  SecurityVar v;
  v.name = std::move(name);
  v.depth = depth;
  v.check = check;
  return v;
}

GadgetProgram make(std::string name, std::uint32_t filler, SecurityVar target) {
  GadgetProgram p;
  p.name = std::move(name);
  p.layout.filler_frames = filler;
  p.layout.env_bytes = 0x240;
  p.layout.stack_extent = 0x3000;
  p.variables.push_back(std::move(target));
  return p;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "sudo",  "openssh-authenticated", "openssh-result",   "openssl-ret",
      "mysql", "bellcore-bnzero",       "tls-client-stack", "tls-client-register",
  };
  return names;
}

GadgetProgram preset(const std::string& name) {
  const Check ne0{CheckOp::kNotEquals, 0};
  const Check eq1{CheckOp::kEquals, 1};
  if (name == "sudo") {
    auto v = stack_var("matched", 0x10b8, ne0);
    v.success_meaning = "password accepted";
    auto p = make(name, 160, v);
    p.frame_depth = 0x1100;
    return finish(p);
  }
  if (name == "openssh-authenticated") {
    auto v = stack_var("authenticated", 0x21c4, eq1);
    v.success_meaning = "session authenticated";
    auto p = make(name, 220, v);
    p.frame_depth = 0x2200;
    return finish(p);
  }
  if (name == "openssh-result") {
    auto v = stack_var("result", 0x22f4, ne0);
    v.success_meaning = "password accepted";
    auto p = make(name, 220, v);
    p.frame_depth = 0x2300;
    return finish(p);
  }
  if (name == "openssl-ret") {
    auto v = stack_var("ret", 0x1238, ne0);
    v.success_meaning = "signature verified";
    auto p = make(name, 120, v);
    p.frame_depth = 0x1240;
    return finish(p);
  }
  if (name == "mysql") {
    auto v = stack_var("fast_auth_result.first", 0x19a7, eq1);
    v.width_bits = 1;
    v.success_meaning = "fast authentication accepted";
    auto p = make(name, 400, v);
    p.frame_depth = 0x19c0;
    return finish(p);
  }
  if (name == "bellcore-bnzero") {
    // The check's return value sits in rax; a handled signal saves it in a
    // signal frame on the user stack.
    SecurityVar v;
    v.name = "bn_is_zero_ret";
    v.storage = Storage::kSignalSpill;
    v.reg = Reg::kRax;
    v.check = ne0;
    v.success_meaning = "faulty signature released";
    auto p = make(name, 140, v);
    p.frame_depth = 0xe40;
    p.layout.signal_handler = true;
    return finish(p);
  }
  if (name == "tls-client-stack") {
    auto v = stack_var("pass", 0x134c, ne0);
    v.wrong_value.reset();
    v.success_meaning = "server treated as authenticated";
    auto p = make(name, 90, v);
    p.frame_depth = 0x1380;
    p.blocking_window = true;
    p.sync = SyncKind::kBlockingWindow;
    return finish(p);
  }
  if (name == "tls-client-register") {
    SecurityVar v;
    v.name = "pass";
    v.storage = Storage::kWindowSpill;
    v.reg = Reg::kRbx;
    v.depth = 0x1628;
    v.check = ne0;
    v.wrong_value.reset();
    v.success_meaning = "server treated as authenticated";
    auto p = make(name, 90, v);
    p.frame_depth = 0x1640;
    p.blocking_window = true;
    p.sync = SyncKind::kBlockingWindow;
    return finish(p);
  }
  throw ConfigError("victim.preset", "unknown preset '" + name + "'");
}

// --- declarative form ----------------------------------------------------

namespace {

namespace pt = boost::property_tree;

std::uint64_t parse_u64(const pt::ptree& t, const std::string& key, const std::string& field,
                        std::optional<std::uint64_t> def = std::nullopt) {
  auto s = t.get_optional<std::string>(key);
  if (!s) {
    if (def) return *def;
    throw ConfigError(field, "missing");
  }
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(*s, &used, 0);
    if (used != s->size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "not an unsigned integer: '" + *s + "'");
  }
}

bool parse_bool(const pt::ptree& t, const std::string& key, const std::string& field, bool def) {
  auto s = t.get_optional<std::string>(key);
  if (!s) return def;
  if (*s == "true" || *s == "1" || *s == "yes") return true;
  if (*s == "false" || *s == "0" || *s == "no") return false;
  throw ConfigError(field, "expected true/false");
}

Storage parse_storage(const std::string& s, const std::string& field) {
  for (Storage st : {Storage::kStack, Storage::kRegister, Storage::kWindowSpill, Storage::kSignalSpill}) {
    if (s == to_string(st)) return st;
  }
  throw ConfigError(field, "unknown storage '" + s + "'");
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

GadgetProgram load_program(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), 1, e.message());
  }
  auto prog_sec = tree.get_child_optional("program");
  if (!prog_sec) throw ConfigError("program", "missing [program] section");
  const auto& ps = *prog_sec;
  GadgetProgram p;
  p.name = ps.get<std::string>("name", "");
  p.layout.filler_frames = static_cast<std::uint32_t>(parse_u64(ps, "filler_frames", "program.filler_frames", 100));
  p.layout.env_bytes = parse_u64(ps, "env_bytes", "program.env_bytes", 0x240);
  p.layout.stack_extent = parse_u64(ps, "stack_extent", "program.stack_extent", 0x3000);
  p.layout.signal_handler = parse_bool(ps, "signal_handler", "program.signal_handler", false);
  p.layout.faults.offset_lo = static_cast<std::uint32_t>(parse_u64(ps, "fault_offset_lo", "program.fault_offset_lo", 200));
  p.layout.faults.offset_hi = static_cast<std::uint32_t>(parse_u64(ps, "fault_offset_hi", "program.fault_offset_hi", 800));
  p.layout.faults.in_range_faults = parse_u64(ps, "faults_in_range", "program.faults_in_range", 275);
  p.layout.faults.out_of_range_faults = parse_u64(ps, "faults_out_of_range", "program.faults_out_of_range", 286);
  p.frame_depth = parse_u64(ps, "frame_depth", "program.frame_depth", 0x1000);
  p.blocking_window = parse_bool(ps, "blocking_window", "program.blocking_window", false);
  const std::string sync = ps.get<std::string>("sync", p.blocking_window ? "blocking-window" : "sigstop");
  if (sync == "sigstop") {
    p.sync = SyncKind::kSigstop;
  } else if (sync == "blocking-window") {
    p.sync = SyncKind::kBlockingWindow;
  } else {
    throw ConfigError("program.sync", "expected sigstop or blocking-window");
  }
  p.crash_modeling = parse_bool(ps, "crash_modeling", "program.crash_modeling", false);
  p.critical_depth = parse_u64(ps, "critical_depth", "program.critical_depth", 0);
  p.critical_bytes = parse_u64(ps, "critical_bytes", "program.critical_bytes", 0);

  for (const auto& [section, vs] : tree) {
    if (section.rfind("var:", 0) != 0) continue;
    const std::string field = section;
    SecurityVar v;
    v.name = section.substr(4);
    v.width_bits = static_cast<std::uint32_t>(parse_u64(vs, "width", field + ".width", 32));
    v.storage = parse_storage(vs.get<std::string>("storage", "stack"), field + ".storage");
    if (auto r = vs.get_optional<std::string>("register")) {
      try {
        v.reg = osmodel::parse_reg(*r);
      } catch (const Error& e) {
        throw ConfigError(field + ".register", e.what());
      }
    } else if (v.storage != Storage::kStack) {
      throw ConfigError(field + ".register", "missing");
    }
    v.depth = parse_u64(vs, "depth", field + ".depth", 0);
    v.init_value = parse_u64(vs, "init", field + ".init", 0);
    try {
      v.check = Check::parse(vs.get<std::string>("check", "!= 0"));
    } catch (const Error& e) {
      throw ConfigError(field + ".check", e.what());
    }
    v.correct_value = parse_u64(vs, "correct", field + ".correct", 1);
    const std::string wrong = vs.get<std::string>("wrong", "0");
    if (wrong == "none") {
      v.wrong_value.reset();
    } else {
      v.wrong_value = parse_u64(vs, "wrong", field + ".wrong", 0);
    }
    v.success_meaning = vs.get<std::string>("success", "");
    p.variables.push_back(std::move(v));
  }
  return finish(std::move(p));
}

GadgetProgram load_program_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("victim.file", "cannot open '" + path + "'");
  return load_program(in);
}

void store_program(const GadgetProgram& prog, std::ostream& out) {
  const auto& l = prog.layout;
  out << "[program]\n"
      << "name = " << prog.name << '\n'
      << "filler_frames = " << l.filler_frames << '\n'
      << "env_bytes = " << hex(l.env_bytes) << '\n'
      << "stack_extent = " << hex(l.stack_extent) << '\n'
      << "frame_depth = " << hex(prog.frame_depth) << '\n'
      << "signal_handler = " << (l.signal_handler ? "true" : "false") << '\n'
      << "blocking_window = " << (prog.blocking_window ? "true" : "false") << '\n'
      << "sync = " << to_string(prog.sync) << '\n'
      << "fault_offset_lo = " << l.faults.offset_lo << '\n'
      << "fault_offset_hi = " << l.faults.offset_hi << '\n'
      << "faults_in_range = " << l.faults.in_range_faults << '\n'
      << "faults_out_of_range = " << l.faults.out_of_range_faults << '\n';
  if (prog.crash_modeling) {
    out << "crash_modeling = true\n"
        << "critical_depth = " << hex(prog.critical_depth) << '\n'
        << "critical_bytes = " << prog.critical_bytes << '\n';
  }
  for (const auto& v : prog.variables) {
    out << "\n[var:" << v.name << "]\n"
        << "width = " << v.width_bits << '\n'
        << "storage = " << to_string(v.storage) << '\n';
    if (v.storage != Storage::kStack) out << "register = " << osmodel::reg_name(v.reg) << '\n';
    if (v.storage == Storage::kStack || v.storage == Storage::kWindowSpill) {
      out << "depth = " << hex(v.depth) << '\n';
    }
    out << "init = " << hex(v.init_value) << '\n'
        << "check = " << v.check.to_string() << '\n'
        << "correct = " << hex(v.correct_value) << '\n'
        << "wrong = " << (v.wrong_value ? hex(*v.wrong_value) : std::string("none")) << '\n';
    if (!v.success_meaning.empty()) out << "success = " << v.success_meaning << '\n';
  }
}

}  // namespace hammersim::victims
