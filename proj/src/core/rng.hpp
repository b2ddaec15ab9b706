/*
 *  Copyright 2026 The EIM Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace eim {

/// Counter-based generator: the i-th output is a keyed bijective mix of the
/// counter, so streams derived from distinct keys are independent and a
/// (seed, stream) pair fully determines the sequence.
///
/// Satisfies UniformRandomBitGenerator so it can drive <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + kWeyl * ++counter_); }

  /// Independent child stream; does not advance this generator.
  Rng derive(std::uint64_t stream) const { return Rng(key_, stream); }
  Rng derive(std::uint64_t a, std::uint64_t b) const { return derive(a).derive(b); }

  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double normal() { return normal_(*this); }

  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;
  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_;
};

// Named stream tags for reproducible experiment plumbing.
namespace stream {
inline constexpr std::uint64_t kModelSamples = 1;
inline constexpr std::uint64_t kRatioTraining = 2;
inline constexpr std::uint64_t kComponentSamples = 3;
inline constexpr std::uint64_t kCoefficientSamples = 4;
inline constexpr std::uint64_t kEvaluation = 5;
inline constexpr std::uint64_t kInitialization = 6;
inline constexpr std::uint64_t kGradient = 7;
inline constexpr std::uint64_t kTask = 8;
inline constexpr std::uint64_t kEm = 9;
}  // namespace stream

}  // namespace eim
