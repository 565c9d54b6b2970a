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

// Static detection of flip-sensitive security checks in a small C subset,
// plus exhaustive single-bit flip enumeration.
//
// Accepted subset: function definitions whose bodies hold declarations
// (optionally `register T x asm("reg")`), assignments, expression
// statements, `if`/`else`, `while`, `return`, `goto` and `...` elisions.
// Expressions are kept as token lists; only comparisons of a variable
// against an integer literal (and bare truth tests, including `x ? a : b`)
// count as checks.

#ifndef HAMMERSIM_GADGETSCAN_HPP
#define HAMMERSIM_GADGETSCAN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hammersim/rng.hpp"
#include "hammersim/victims.hpp"

namespace hammersim::gadgetscan {

struct Location {
  std::size_t line = 0;
  std::size_t column = 0;
};

struct Token {
  enum class Kind { kIdent, kNumber, kString, kPunct, kEnd };
  Kind kind = Kind::kEnd;
  std::string text;
  Location loc;
};

struct Stmt;

struct Decl {
  std::string type;
  std::string name;
  std::uint32_t width_bits = 32;
  bool is_register = false;
  std::string asm_register;
  bool has_init = false;
  std::vector<Token> init;
  Location loc;
};

struct Stmt {
  enum class Kind { kDecl, kAssign, kExpr, kIf, kWhile, kReturn, kBlock, kSkip };
  Kind kind = Kind::kSkip;
  Location loc;
  std::vector<Decl> decls;        // kDecl
  std::string target;             // kAssign: assigned lvalue
  std::vector<Token> expr;        // kAssign rhs, kExpr, kReturn, kIf/kWhile condition
  std::vector<Stmt> body;         // kBlock, kIf then, kWhile body
  std::vector<Stmt> else_body;    // kIf
  bool has_else = false;
};

struct Function {
  std::string name;
  Location loc;
  std::vector<Stmt> body;
};

struct SourceUnit {
  std::string path;
  std::vector<Function> functions;
};

// Throws ParseError with line and column.
SourceUnit parse(const std::string& source, const std::string& path = "<input>");
SourceUnit parse_file(const std::string& path);

struct FuzzResult {
  std::uint32_t width = 0;
  std::vector<std::uint32_t> single_bit_flips;  // bits whose flip passes the check
  // Fewest flipped bits that make the check pass; nullopt if no value of
  // this width can.
  std::optional<std::uint32_t> min_flips;
};

FuzzResult flip_fuzz(std::uint32_t width, std::uint64_t init, const victims::Check& check);

enum class Hardness { kAnyBit, kSingleBit, kExactPattern };

struct Classification {
  Hardness hardness = Hardness::kExactPattern;
  std::uint32_t exploitable = 0;  // single-bit flips that pass the check
  std::uint32_t width = 0;
  std::uint32_t min_flips = 0;
  std::uint32_t single_bit = 0;  // the bit, for kSingleBit
  bool satisfiable = true;

  // ANY_BIT, LSB_ONLY, SINGLE_BIT(k) or EXACT_PATTERN(n).
  std::string label() const;
};

Classification classify(std::uint32_t width, std::uint64_t init, const victims::Check& check);

struct GadgetReport {
  std::string file;
  std::string function;
  std::string variable;
  std::string type;
  std::string storage;  // "stack" or "register(<name>)"
  Location decl_loc;
  Location check_loc;
  std::uint64_t init_value = 0;
  // Condition under which the success path runs.
  victims::Check check;
  Classification cls;

  std::uint32_t width_bits() const { return cls.width; }
};

std::vector<GadgetReport> scan(const SourceUnit& unit);

struct Advice {
  bool rewrite = false;
  std::string text;
  std::optional<std::uint64_t> constant;
  std::uint32_t constant_popcount = 0;
  bool boolean_hint = false;
};

// Rewrite advice. Generated constants come from `rng`.
Advice suggest(const GadgetReport& report, Rng& rng);

// One line per report.
std::string format_report(const GadgetReport& r);
std::string to_json(const std::vector<GadgetReport>& reports, int indent = 2);

}  // namespace hammersim::gadgetscan

#endif  // HAMMERSIM_GADGETSCAN_HPP
