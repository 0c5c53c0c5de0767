#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "odx/eval_harness.hpp"
#include "odx/latent_search.hpp"
#include "odx/stat_gate.hpp"
#include "odx/toy_train.hpp"

namespace odx::report {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "odx 0.1.0";

Json attack_config(const AttackConfig& cfg);
// Keys absent from `j` keep their value in `base`; unknown keys are a
// ConfigurationError naming the key.
AttackConfig attack_config_from(const Json& j, AttackConfig base);

Json attack_result(const AttackResult& r);
Json test_report(const TestReport& r);
Json train_config(const TrainConfig& cfg);
Json train_log(std::span<const TrainLogEntry> log);
Json eval_row(const EvalRow& row);

// Pretty-printed with a trailing newline.
std::string dump(const Json& j);

}  // namespace odx::report
