#pragma once

#include "hdk/bridge.hpp"
#include "hdk/core_types.hpp"
#include "hdk/data_pipeline.hpp"
#include "hdk/error.hpp"
#include "hdk/group.hpp"
#include "hdk/grpo.hpp"
#include "hdk/io.hpp"
#include "hdk/labeler.hpp"
#include "hdk/metrics.hpp"
#include "hdk/random.hpp"
#include "hdk/reward.hpp"
#include "hdk/session.hpp"
#include "hdk/tool_call.hpp"
#include "hdk/toy_trainer.hpp"
#include "hdk/transcript.hpp"
