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

#ifndef HAMMERSIM_RNG_HPP
#define HAMMERSIM_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace hammersim {

// Seedable random stream. All randomness in the simulator flows from one
// scenario seed through named sub-streams, so adding draws to one consumer
// never shifts the values another consumer sees.
//
// The helpers below avoid std:: distributions on purpose: their output is
// implementation-defined, and scenario outputs must be byte-identical for a
// given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream keyed by (seed, name). Independent of any other stream's usage.
  static Rng stream(std::uint64_t seed, std::string_view name);
  // Stream keyed by (seed, name, index), e.g. one per trial.
  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index);

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hammersim

#endif  // HAMMERSIM_RNG_HPP
