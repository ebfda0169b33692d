#include "sfperc/report.hpp"

namespace sfperc {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

nlohmann::ordered_json StatReport::to_json() const {
  nlohmann::ordered_json j;
  j["test"] = test;
  j["statistic"] = statistic;
  j["p_value"] = p_value;
  j["n_samples"] = n_samples;
  j["verdict"] = to_string(verdict);
  j["params"] = params;
  j["details"] = details;
  return j;
}

Verdict combine(Verdict a, Verdict b) {
  if (a == Verdict::kFail || b == Verdict::kFail) return Verdict::kFail;
  if (a == Verdict::kInconclusive || b == Verdict::kInconclusive) return Verdict::kInconclusive;
  return Verdict::kPass;
}

}  // namespace sfperc
