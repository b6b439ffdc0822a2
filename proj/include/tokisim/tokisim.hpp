#pragma once

#include "tokisim/config.hpp"
#include "tokisim/engine.hpp"
#include "tokisim/memguard.hpp"
#include "tokisim/metrics.hpp"
#include "tokisim/model.hpp"
#include "tokisim/sched.hpp"
#include "tokisim/trace.hpp"
#include "tokisim/workloads.hpp"
