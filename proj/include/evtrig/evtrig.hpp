#pragma once

#include "evtrig/errors.hpp"
#include "evtrig/parallel.hpp"
#include "evtrig/model.hpp"
#include "evtrig/policy.hpp"
#include "evtrig/kernel.hpp"
#include "evtrig/density_engine.hpp"
#include "evtrig/dp_solver.hpp"
#include "evtrig/codesign.hpp"
#include "evtrig/simulator.hpp"
#include "evtrig/oracle.hpp"
#include "evtrig/experiment.hpp"
