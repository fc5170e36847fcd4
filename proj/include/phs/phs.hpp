#pragma once

#include "phs/acquisition.hpp"
#include "phs/engine.hpp"
#include "phs/experiment.hpp"
#include "phs/plan.hpp"
#include "phs/report.hpp"
#include "phs/space.hpp"
#include "phs/store.hpp"
#include "phs/surrogate.hpp"
#include "phs/targets.hpp"
