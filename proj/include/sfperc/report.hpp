#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace sfperc {

enum class Verdict { kPass, kFail, kInconclusive };

const char* to_string(Verdict v);

struct StatReport {
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  std::uint64_t n_samples = 0;
  Verdict verdict = Verdict::kInconclusive;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  bool passed() const noexcept { return verdict == Verdict::kPass; }
  nlohmann::ordered_json to_json() const;
};

// Combines verdicts: any fail wins, then any inconclusive.
Verdict combine(Verdict a, Verdict b);

}  // namespace sfperc
