#pragma once

#include "timecoord/bezier.hpp"
#include "timecoord/controller.hpp"
#include "timecoord/coordmath.hpp"
#include "timecoord/engine.hpp"
#include "timecoord/rk4.hpp"
#include "timecoord/scenario_io.hpp"
#include "timecoord/topology.hpp"
#include "timecoord/vehicle.hpp"
