/*
 * Copyright (c) 2026, the procwatt authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "procwatt/errors.hpp"

namespace procwatt {

/// The fixed instruction-class space. The order is canonical and stable:
/// it defines histogram indices, model weight indices and file layouts.
enum class InstructionClass : std::uint8_t {
  kScalarArithmetic = 0,
  kScalarMemory = 1,
  kScalarLogic = 2,
  kVectorArithmetic = 3,
  kVectorMemory = 4,
  kVectorLogic = 5,
  kBranch = 6,
  kJump = 7,
};

inline constexpr std::size_t kNumClasses = 8;

inline constexpr std::array<InstructionClass, kNumClasses> kAllClasses = {
    InstructionClass::kScalarArithmetic, InstructionClass::kScalarMemory,
    InstructionClass::kScalarLogic,      InstructionClass::kVectorArithmetic,
    InstructionClass::kVectorMemory,     InstructionClass::kVectorLogic,
    InstructionClass::kBranch,           InstructionClass::kJump,
};

inline constexpr std::size_t class_index(InstructionClass c) {
  return static_cast<std::size_t>(c);
}

/// Canonical snake_case identifiers, used in rules files, model files
/// and reports.
std::string_view class_name(InstructionClass c);

/// Two-letter codes used in CSV column headers (h_sa ... h_jp).
std::string_view class_short_name(InstructionClass c);

/// Inverse of class_name(); nullopt for unrecognized names.
std::optional<InstructionClass> class_from_name(std::string_view name);

/// The execution device a model or trace refers to.
enum class DeviceKind : std::uint8_t { kCpu, kGpu };

std::string_view device_name(DeviceKind d);
std::optional<DeviceKind> device_from_name(std::string_view name);

/// Normalized probability distribution of executed instructions over
/// the 8 classes within a sampling window. Either the entries sum to 1
/// (within 1e-9) or the histogram is the all-zero idle histogram.
class InstructionHistogram {
 public:
  /// The all-zero histogram of a window with no classified instructions.
  InstructionHistogram() = default;

  static InstructionHistogram idle() { return {}; }

  /// Normalizes raw per-class counts. A zero total yields idle().
  static InstructionHistogram from_counts(
      const std::array<std::uint64_t, kNumClasses>& counts);

  /// Validates probabilities that are already (close to) normalized.
  /// A deviation of the sum from 1 within `tolerance` is renormalized;
  /// within 1e-9 the values are kept bit-for-bit; beyond `tolerance`
  /// a ValidationError is thrown. All entries must lie in [0, 1].
  static InstructionHistogram from_probabilities(
      const std::array<double, kNumClasses>& probs, double tolerance = 1e-9);

  double operator[](InstructionClass c) const {
    return probs_[class_index(c)];
  }
  const std::array<double, kNumClasses>& probs() const { return probs_; }

  bool is_idle() const;

  friend bool operator==(const InstructionHistogram&,
                         const InstructionHistogram&) = default;

 private:
  std::array<double, kNumClasses> probs_{};
};

/// One mnemonic-matching rule. `pattern` is compared case-insensitively;
/// a rule is a prefix match when `prefix` is set (written with a trailing
/// '*' in rules files) and an exact match otherwise.
struct ClassificationRule {
  std::string pattern;
  bool prefix = false;
  InstructionClass cls = InstructionClass::kScalarArithmetic;
  DeviceKind device = DeviceKind::kCpu;
};

/// Ordered rule list; matching is first-match-wins in list order.
class ClassificationRules {
 public:
  /// Built-in tables covering common x86-64 mnemonics (CPU) and
  /// PTX/SASS-style mnemonics (GPU).
  static const ClassificationRules& defaults();

  /// Loads rules from a `<pattern> <class> <device>` text stream.
  /// '#' starts a comment; a trailing '*' on the pattern makes it a
  /// prefix rule. Throws ValidationError with the line number on
  /// malformed input.
  static ClassificationRules from_stream(std::istream& in);
  static ClassificationRules from_file(const std::string& path);

  void add(ClassificationRule rule) { rules_.push_back(std::move(rule)); }
  const std::vector<ClassificationRule>& rules() const { return rules_; }

 private:
  std::vector<ClassificationRule> rules_;
};

/// Classifies a single operand-free mnemonic. Matching is
/// case-insensitive and first-match-wins over the rules for `device`.
/// Returns nullopt when no rule matches (an unknown instruction, which
/// is a value rather than an error).
std::optional<InstructionClass> classify_mnemonic(
    std::string_view mnemonic, DeviceKind device,
    const ClassificationRules& rules = ClassificationRules::defaults());

/// Raw per-class tally of a disassembly listing.
struct ListingCounts {
  std::array<std::uint64_t, kNumClasses> counts{};
  std::uint64_t unknown = 0;

  ListingCounts& operator+=(const ListingCounts& other);
};

/// Result of classifying a whole listing: the histogram is normalized
/// over classified instructions only; unknown mnemonics are excluded
/// from the probability mass and reported separately.
struct ListingHistogram {
  InstructionHistogram histogram;
  std::uint64_t unknown_count = 0;
};

/// Tallies instruction classes over a line-oriented disassembly listing.
/// The mnemonic is the first token after optional address, byte and
/// label columns; lines carrying no instruction (blanks, labels,
/// directives, raw byte continuations) are skipped silently, while
/// unclassifiable mnemonics count as unknown. Throws IoError if the
/// stream fails mid-read.
ListingCounts count_listing(
    std::istream& listing, DeviceKind device,
    const ClassificationRules& rules = ClassificationRules::defaults());

/// count_listing() followed by histogram normalization.
ListingHistogram parse_disassembly(
    std::istream& listing, DeviceKind device,
    const ClassificationRules& rules = ClassificationRules::defaults());

}  // namespace procwatt
