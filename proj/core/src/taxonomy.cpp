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

#include "procwatt/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace procwatt {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "scalar_arithmetic", "scalar_memory", "scalar_logic",
    "vector_arithmetic", "vector_memory", "vector_logic",
    "branch",            "jump",
};

constexpr std::array<std::string_view, kNumClasses> kClassShortNames = {
    "sa", "sm", "sl", "va", "vm", "vl", "br", "jp",
};

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

struct DefaultRule {
  const char* pattern;  // trailing '*' marks a prefix rule
  InstructionClass cls;
};

// Built-in x86-64 table. Order matters: packed/vector patterns must come
// before the bare scalar prefixes that would otherwise swallow them
// (e.g. addp* before add*), and the exact "jmp" entries before the j*
// conditional-branch prefix.
constexpr InstructionClass kSA = InstructionClass::kScalarArithmetic;
constexpr InstructionClass kSM = InstructionClass::kScalarMemory;
constexpr InstructionClass kSL = InstructionClass::kScalarLogic;
constexpr InstructionClass kVA = InstructionClass::kVectorArithmetic;
constexpr InstructionClass kVM = InstructionClass::kVectorMemory;
constexpr InstructionClass kVL = InstructionClass::kVectorLogic;
constexpr InstructionClass kBR = InstructionClass::kBranch;
constexpr InstructionClass kJP = InstructionClass::kJump;

constexpr DefaultRule kCpuDefaultRules[] = {
    // --- vector memory: packed loads/stores, gathers, broadcasts ---
    {"vmovap*", kVM},   {"vmovup*", kVM},    {"vmovdq*", kVM},
    {"vmovnt*", kVM},   {"vmovddup", kVM},   {"vmovshdup", kVM},
    {"vmovsldup", kVM}, {"vlddqu", kVM},     {"vgather*", kVM},
    {"vpgather*", kVM}, {"vscatter*", kVM},  {"vpscatter*", kVM},
    {"vbroadcast*", kVM}, {"vpbroadcast*", kVM}, {"vmaskmov*", kVM},
    {"vpmaskmov*", kVM}, {"vexpand*", kVM},  {"vpexpand*", kVM},
    {"vcompress*", kVM}, {"vpcompress*", kVM},
    {"movap*", kVM},    {"movup*", kVM},     {"movdq*", kVM},
    {"movnt*", kVM},    {"movddup", kVM},    {"movshdup", kVM},
    {"movsldup", kVM},  {"lddqu", kVM},      {"maskmovdqu", kVM},
    {"vmovq", kVM},     {"vmovd", kVM},      {"movhps", kVM},
    {"movlps", kVM},
    {"movhpd", kVM},    {"movlpd", kVM},     {"movhlps", kVM},
    {"movlhps", kVM},   {"vpmovzx*", kVM},   {"vpmovsx*", kVM},
    {"pmovzx*", kVM},   {"pmovsx*", kVM},

    // --- vector logic: bitwise, compares, shifts, shuffles, blends ---
    {"vpand*", kVL},    {"vpor*", kVL},      {"vpxor*", kVL},
    {"vptest", kVL},    {"vtestp*", kVL},    {"vpcmp*", kVL},
    {"vpsll*", kVL},    {"vpsrl*", kVL},     {"vpsra*", kVL},
    {"vprol*", kVL},    {"vpror*", kVL},     {"vpshuf*", kVL},
    {"vshuf*", kVL},    {"vperm*", kVL},     {"vpblend*", kVL},
    {"vblend*", kVL},   {"vpalign*", kVL},   {"vpack*", kVL},
    {"vpunpck*", kVL},  {"vunpck*", kVL},    {"vpternlog*", kVL},
    {"vandp*", kVL},    {"vandnp*", kVL},    {"vorp*", kVL},
    {"vxorp*", kVL},    {"vinsert*", kVL},   {"vextract*", kVL},
    {"vpextr*", kVL},   {"vpinsr*", kVL},    {"vpmovmsk*", kVL},
    {"vmovmsk*", kVL},  {"vpsign*", kVL},
    {"pand*", kVL},     {"por*", kVL},       {"pxor*", kVL},
    {"ptest", kVL},     {"pcmp*", kVL},      {"psll*", kVL},
    {"psrl*", kVL},     {"psra*", kVL},      {"pshuf*", kVL},
    {"pblend*", kVL},   {"palign*", kVL},    {"pack*", kVL},
    {"punpck*", kVL},   {"psign*", kVL},     {"andp*", kVL},
    {"andnp*", kVL},    {"orp*", kVL},       {"xorp*", kVL},
    {"cmpp*", kVL},     {"blendp*", kVL},    {"shufp*", kVL},
    {"unpck*", kVL},    {"insertps", kVL},   {"extractps", kVL},
    {"pextr*", kVL},    {"pinsr*", kVL},     {"pmovmsk*", kVL},
    {"movmsk*", kVL},

    // --- scalar SSE/AVX arithmetic (xxxss/xxxsd forms) ---
    {"vadds*", kSA},    {"vsubs*", kSA},     {"vmuls*", kSA},
    {"vdivs*", kSA},    {"vsqrts*", kSA},    {"vmins*", kSA},
    {"vmaxs*", kSA},    {"vrounds*", kSA},   {"vrcps*", kSA},
    {"vrsqrts*", kSA},  {"vcvts*", kSA},     {"vcmps*", kSL},
    {"vcomis*", kSL},   {"vucomis*", kSL},
    {"adds*", kSA},     {"subs*", kSA},      {"muls*", kSA},
    {"divs*", kSA},     {"sqrts*", kSA},     {"mins*", kSA},
    {"maxs*", kSA},     {"rounds*", kSA},    {"rcps*", kSA},
    {"rsqrts*", kSA},   {"cvts*", kSA},      {"cmps*", kSL},
    {"comis*", kSL},    {"ucomis*", kSL},

    // --- vector arithmetic: packed math, fused multiply-add, converts ---
    {"vfmadd*", kVA},   {"vfmsub*", kVA},    {"vfnmadd*", kVA},
    {"vfnmsub*", kVA},  {"vadd*", kVA},      {"vsub*", kVA},
    {"vmul*", kVA},     {"vdiv*", kVA},      {"vsqrt*", kVA},
    {"vrsqrt*", kVA},   {"vrcp*", kVA},      {"vmax*", kVA},
    {"vmin*", kVA},     {"vround*", kVA},    {"vdpp*", kVA},
    {"vhadd*", kVA},    {"vhsub*", kVA},     {"vpmadd*", kVA},
    {"vpmul*", kVA},    {"vpadd*", kVA},     {"vpsub*", kVA},
    {"vpavg*", kVA},    {"vpabs*", kVA},     {"vpsad*", kVA},
    {"vpdp*", kVA},     {"vpmax*", kVA},     {"vpmin*", kVA},
    {"vcvt*", kVA},     {"vscalef*", kVA},   {"vreduce*", kVA},
    {"vrange*", kVA},   {"vgetexp*", kVA},   {"vgetmant*", kVA},
    {"addp*", kVA},     {"subp*", kVA},      {"mulp*", kVA},
    {"divp*", kVA},     {"sqrtp*", kVA},     {"rsqrtp*", kVA},
    {"rcpp*", kVA},     {"maxp*", kVA},      {"minp*", kVA},
    {"roundp*", kVA},   {"dpp*", kVA},       {"haddp*", kVA},
    {"hsubp*", kVA},    {"pmadd*", kVA},     {"pmul*", kVA},
    {"padd*", kVA},     {"psub*", kVA},      {"pavg*", kVA},
    {"pabs*", kVA},     {"psad*", kVA},      {"pmax*", kVA},
    {"pmin*", kVA},     {"cvt*", kVA},

    // --- scalar memory: moves, stack, string and x87 load/store ---
    {"popcnt*", kSL},   {"leave*", kSM},
    {"mov*", kSM},      {"push*", kSM},      {"pop*", kSM},
    {"lods*", kSM},     {"stos*", kSM},      {"xchg*", kSM},
    {"xadd*", kSM},     {"cmpxchg*", kSM},   {"prefetch*", kSM},
    {"fld*", kSM},      {"fst*", kSM},       {"fild*", kSM},
    {"fist*", kSM},     {"fxch", kSM},

    // --- scalar logic: bitwise, shifts, tests, compares, flags ---
    {"and*", kSL},      {"or*", kSL},        {"xor*", kSL},
    {"not*", kSL},      {"shl*", kSL},       {"shr*", kSL},
    {"sar*", kSL},      {"sal*", kSL},       {"rol*", kSL},
    {"ror*", kSL},      {"rcl*", kSL},       {"rcr*", kSL},
    {"test*", kSL},     {"cmp*", kSL},       {"bt", kSL},
    {"bts*", kSL},      {"btr*", kSL},       {"btc*", kSL},
    {"bsf", kSL},       {"bsr", kSL},        {"fcom*", kSL},
    {"fucom*", kSL},    {"lzcnt", kSL},      {"tzcnt", kSL},
    {"set*", kSL},
    {"bzhi", kSL},      {"bextr", kSL},      {"blsi", kSL},
    {"blsmsk", kSL},    {"blsr", kSL},       {"pdep", kSL},
    {"pext", kSL},      {"shld*", kSL},      {"shrd*", kSL},

    // --- scalar arithmetic: integer ALU and x87 math ---
    {"add*", kSA},      {"sub*", kSA},       {"adc*", kSA},
    {"sbb*", kSA},      {"imul*", kSA},      {"mul*", kSA},
    {"idiv*", kSA},     {"div*", kSA},       {"inc*", kSA},
    {"dec*", kSA},      {"neg*", kSA},       {"lea*", kSA},
    {"cbw", kSA},       {"cwde", kSA},       {"cdqe", kSA},
    {"cwd", kSA},       {"cdq", kSA},        {"cqo", kSA},
    {"fadd*", kSA},     {"fsub*", kSA},      {"fmul*", kSA},
    {"fdiv*", kSA},     {"fsqrt", kSA},      {"fabs", kSA},
    {"fchs", kSA},      {"fprem*", kSA},     {"frndint", kSA},

    // --- control transfers ---
    {"jmp", kJP},       {"jmpq", kJP},       {"jmpl", kJP},
    {"j*", kBR},        {"loop*", kBR},      {"jrcxz", kBR},
    {"jecxz", kBR},     {"call*", kJP},      {"ret*", kJP},
    {"syscall", kJP},   {"sysret*", kJP},    {"sysenter", kJP},
    {"sysexit", kJP},   {"int", kJP},        {"int1", kJP},
    {"int3", kJP},      {"into", kJP},       {"iret*", kJP},
};

// Built-in GPU table covering PTX-style and SASS-style mnemonics.
// Tensor/matrix ops and SIMD-within-register halves map to the vector
// family; plain per-thread math maps to the scalar family.
constexpr DefaultRule kGpuDefaultRules[] = {
    // --- vector arithmetic: tensor-core / matrix ops, packed halves ---
    {"wmma*", kVA},     {"mma*", kVA},       {"hmma*", kVA},
    {"imma*", kVA},     {"dmma*", kVA},      {"bmma*", kVA},
    {"hadd2*", kVA},    {"hmul2*", kVA},     {"hfma2*", kVA},
    {"hsub2*", kVA},    {"idp*", kVA},       {"dp2a*", kVA},
    {"dp4a*", kVA},     {"vadd*", kVA},      {"vmad*", kVA},
    {"vabsdiff*", kVA},

    // --- vector memory: matrix loads/stores and async bulk copies ---
    {"ldmatrix*", kVM}, {"stmatrix*", kVM},  {"ldsm*", kVM},
    {"stsm*", kVM},     {"movm*", kVM},      {"cp.async*", kVM},
    {"cp.bulk*", kVM},  {"ldgsts*", kVM},

    // --- memory: loads, stores, atomics ---
    {"ld.*", kSM},      {"ldu.*", kSM},      {"st.*", kSM},
    {"ldg*", kSM},      {"ldl*", kSM},       {"lds*", kSM},
    {"ldc*", kSM},      {"stg*", kSM},       {"stl*", kSM},
    {"sts*", kSM},      {"atom*", kSM},      {"red.*", kSM},
    {"prefetch*", kSM}, {"mov*", kSM},       {"ld", kSM},
    {"st", kSM},

    // --- scalar logic: predicates, bitwise, shifts, selects ---
    {"setp*", kSL},     {"set.*", kSL},      {"selp*", kSL},
    {"slct*", kSL},     {"isetp*", kSL},     {"fsetp*", kSL},
    {"dsetp*", kSL},    {"hsetp*", kSL},     {"iset*", kSL},
    {"lop3*", kSL},     {"lop*", kSL},       {"plop3*", kSL},
    {"and*", kSL},      {"or*", kSL},        {"xor*", kSL},
    {"not*", kSL},      {"cnot*", kSL},      {"shl*", kSL},
    {"shr*", kSL},      {"shf*", kSL},       {"prmt*", kSL},
    {"sel*", kSL},      {"shfl*", kSL},      {"sgxt*", kSL},
    {"flo*", kSL},      {"popc*", kSL},      {"bfe*", kSL},
    {"bfi*", kSL},      {"brev*", kSL},      {"vote*", kSL},
    {"match*", kSL},    {"bmsk*", kSL},

    // --- scalar arithmetic: per-thread integer and float math ---
    {"ffma*", kSA},     {"fadd*", kSA},      {"fmul*", kSA},
    {"fchk*", kSA},     {"dadd*", kSA},      {"dmul*", kSA},
    {"dfma*", kSA},     {"iadd*", kSA},      {"imad*", kSA},
    {"imul*", kSA},     {"imnmx*", kSA},     {"fmnmx*", kSA},
    {"fma*", kSA},      {"mad*", kSA},       {"add*", kSA},
    {"sub*", kSA},      {"mul*", kSA},       {"div*", kSA},
    {"rem*", kSA},      {"neg*", kSA},       {"abs*", kSA},
    {"min*", kSA},      {"max*", kSA},       {"rcp*", kSA},
    {"sqrt*", kSA},     {"rsqrt*", kSA},     {"sin*", kSA},
    {"cos*", kSA},      {"lg2*", kSA},       {"ex2*", kSA},
    {"mufu*", kSA},     {"cvt*", kSA},       {"cvta*", kSA},
    {"f2i*", kSA},      {"i2f*", kSA},       {"f2f*", kSA},
    {"i2i*", kSA},      {"frnd*", kSA},      {"copysign*", kSA},
    {"testp*", kSL},

    // --- control transfers ---
    {"bra*", kBR},      {"brx*", kBR},       {"jmx*", kBR},
    {"bssy*", kBR},     {"jmp", kJP},        {"call*", kJP},
    {"cal", kJP},       {"ret*", kJP},       {"exit", kJP},
    {"jcal*", kJP},
};

ClassificationRules build_defaults() {
  ClassificationRules rules;
  for (const auto& r : kCpuDefaultRules) {
    std::string_view pat(r.pattern);
    bool prefix = !pat.empty() && pat.back() == '*';
    if (prefix) pat.remove_suffix(1);
    rules.add({std::string(pat), prefix, r.cls, DeviceKind::kCpu});
  }
  for (const auto& r : kGpuDefaultRules) {
    std::string_view pat(r.pattern);
    bool prefix = !pat.empty() && pat.back() == '*';
    if (prefix) pat.remove_suffix(1);
    rules.add({std::string(pat), prefix, r.cls, DeviceKind::kGpu});
  }
  return rules;
}

bool rule_matches(const ClassificationRule& rule, std::string_view mnemonic) {
  if (rule.prefix) {
    return mnemonic.size() >= rule.pattern.size() &&
           mnemonic.substr(0, rule.pattern.size()) == rule.pattern;
  }
  return mnemonic == rule.pattern;
}

// Instruction prefixes that precede the real mnemonic in x86 listings.
bool is_instruction_prefix(std::string_view token) {
  static constexpr std::string_view kPrefixes[] = {
      "lock", "rep", "repe", "repz", "repne", "repnz",
      "data16", "addr32", "bnd", "notrack", "cs", "ds", "es", "ss",
  };
  for (auto p : kPrefixes) {
    if (token == p) return true;
  }
  return false;
}

bool is_hex_token(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// Extracts the mnemonic from one statement, skipping address columns
// ("401000:"), label definitions ("main:"), raw encoding bytes ("48 89"),
// assembler directives (".text") and predicate guards ("@%p1").
// Encoding bytes are 2-digit hex tokens and bare addresses 8+ digits;
// the sizes in between are left alone so hex-looking mnemonics such as
// "add" or "fadd" survive. Empty result means no instruction.
std::string extract_mnemonic(std::string_view statement) {
  std::istringstream tokens{std::string(statement)};
  std::string token;
  while (tokens >> token) {
    if (token.back() == ':') continue;   // address or label
    if (token.front() == '.') continue;  // directive
    if (token.front() == '@') continue;  // PTX predicate guard
    if (token.front() == '<') continue;  // symbol annotation
    if (is_hex_token(token) && (token.size() == 2 || token.size() >= 8)) {
      continue;
    }
    std::string lowered = to_lower(token);
    if (is_instruction_prefix(lowered)) continue;
    return lowered;
  }
  return {};
}

}  // namespace

std::string_view class_name(InstructionClass c) {
  return kClassNames[class_index(c)];
}

std::string_view class_short_name(InstructionClass c) {
  return kClassShortNames[class_index(c)];
}

std::optional<InstructionClass> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return kAllClasses[i];
  }
  return std::nullopt;
}

std::string_view device_name(DeviceKind d) {
  return d == DeviceKind::kCpu ? "cpu" : "gpu";
}

std::optional<DeviceKind> device_from_name(std::string_view name) {
  if (name == "cpu") return DeviceKind::kCpu;
  if (name == "gpu") return DeviceKind::kGpu;
  return std::nullopt;
}

InstructionHistogram InstructionHistogram::from_counts(
    const std::array<std::uint64_t, kNumClasses>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  InstructionHistogram h;
  if (total == 0) return h;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    h.probs_[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return h;
}

InstructionHistogram InstructionHistogram::from_probabilities(
    const std::array<double, kNumClasses>& probs, double tolerance) {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw ValidationError("histogram entry outside [0, 1]");
    }
    sum += p;
  }
  InstructionHistogram h;
  if (sum == 0.0) return h;  // idle
  double err = std::abs(sum - 1.0);
  if (err <= 1e-9) {
    h.probs_ = probs;  // keep bits untouched
  } else if (err <= tolerance) {
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      h.probs_[i] = probs[i] / sum;
    }
  } else {
    throw ValidationError("histogram entries sum to " + std::to_string(sum) +
                          ", expected 1 within " + std::to_string(tolerance));
  }
  return h;
}

bool InstructionHistogram::is_idle() const {
  for (double p : probs_) {
    if (p != 0.0) return false;
  }
  return true;
}

const ClassificationRules& ClassificationRules::defaults() {
  static const ClassificationRules kDefaults = build_defaults();
  return kDefaults;
}

ClassificationRules ClassificationRules::from_stream(std::istream& in) {
  ClassificationRules rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    std::string pattern, cls_name, dev_name;
    if (!(fields >> pattern)) continue;  // blank line
    if (!(fields >> cls_name >> dev_name)) {
      throw ValidationError("rules line " + std::to_string(line_no) +
                            ": expected '<pattern> <class> <device>'");
    }
    std::string extra;
    if (fields >> extra) {
      throw ValidationError("rules line " + std::to_string(line_no) +
                            ": trailing field '" + extra + "'");
    }
    auto cls = class_from_name(cls_name);
    if (!cls) {
      throw ValidationError("rules line " + std::to_string(line_no) +
                            ": unknown class '" + cls_name + "'");
    }
    auto dev = device_from_name(dev_name);
    if (!dev) {
      throw ValidationError("rules line " + std::to_string(line_no) +
                            ": unknown device '" + dev_name + "'");
    }
    bool prefix = pattern.back() == '*';
    if (prefix) pattern.pop_back();
    if (pattern.empty()) {
      throw ValidationError("rules line " + std::to_string(line_no) +
                            ": empty pattern");
    }
    rules.add({to_lower(pattern), prefix, *cls, *dev});
  }
  return rules;
}

ClassificationRules ClassificationRules::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rules file: " + path);
  return from_stream(in);
}

std::optional<InstructionClass> classify_mnemonic(
    std::string_view mnemonic, DeviceKind device,
    const ClassificationRules& rules) {
  std::string lowered = to_lower(mnemonic);
  for (const auto& rule : rules.rules()) {
    if (rule.device != device) continue;
    if (rule_matches(rule, lowered)) return rule.cls;
  }
  return std::nullopt;
}

ListingCounts& ListingCounts::operator+=(const ListingCounts& other) {
  for (std::size_t i = 0; i < kNumClasses; ++i) counts[i] += other.counts[i];
  unknown += other.unknown;
  return *this;
}

ListingCounts count_listing(std::istream& listing, DeviceKind device,
                            const ClassificationRules& rules) {
  ListingCounts tally;
  std::string line;
  while (std::getline(listing, line)) {
    // '#' and '//' start comments; ';' separates statements (PTX style).
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    if (auto pos = line.find("//"); pos != std::string::npos) line.erase(pos);
    std::string_view rest(line);
    while (!rest.empty()) {
      auto semi = rest.find(';');
      std::string_view statement = rest.substr(0, semi);
      rest = semi == std::string_view::npos ? std::string_view{}
                                            : rest.substr(semi + 1);
      std::string mnemonic = extract_mnemonic(statement);
      if (mnemonic.empty()) continue;
      if (auto cls = classify_mnemonic(mnemonic, device, rules)) {
        ++tally.counts[class_index(*cls)];
      } else {
        ++tally.unknown;
      }
    }
  }
  if (listing.bad()) throw IoError("stream failure while reading listing");
  return tally;
}

ListingHistogram parse_disassembly(std::istream& listing, DeviceKind device,
                                   const ClassificationRules& rules) {
  ListingCounts tally = count_listing(listing, device, rules);
  return {InstructionHistogram::from_counts(tally.counts), tally.unknown};
}

}  // namespace procwatt
