#pragma once

#include "loom/agent_library.hpp"
#include "loom/chunking.hpp"
#include "loom/cluster.hpp"
#include "loom/config.hpp"
#include "loom/errors.hpp"
#include "loom/estimator.hpp"
#include "loom/lexicon.hpp"
#include "loom/optimizer.hpp"
#include "loom/planner.hpp"
#include "loom/runtime.hpp"
#include "loom/time.hpp"
#include "loom/workflow.hpp"
