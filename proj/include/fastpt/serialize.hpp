#pragma once

// JSON forms of the configuration and report types.

#include <json.hpp>

#include "fastpt/cost.hpp"
#include "fastpt/partial.hpp"
#include "fastpt/schedule.hpp"
#include "fastpt/tasks.hpp"
#include "fastpt/trainer.hpp"

namespace fastpt {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

Json to_json(const TaskSpec& t);
TaskSpec task_spec_from_json(const Json& j);

Json to_json(const Hyper& h);
Hyper hyper_from_json(const Json& j);

Json to_json(const PartialSpec& s);
PartialSpec partial_spec_from_json(const Json& j);

Json to_json(const Schedule& s);
Schedule schedule_from_json(const Json& j);

Json to_json(const ActivationProfile& p);
ActivationProfile activation_profile_from_json(const Json& j);

Json to_json(const SeqProfile& s);
Json to_json(const CostReport& r);

}  // namespace fastpt
