#pragma once
// Umbrella header for the full toolkit.

#include "pentrap/analysis.hpp"
#include "pentrap/constants.hpp"
#include "pentrap/energy.hpp"
#include "pentrap/equilibrium.hpp"
#include "pentrap/errors.hpp"
#include "pentrap/experiment.hpp"
#include "pentrap/forces.hpp"
#include "pentrap/guiding_center.hpp"
#include "pentrap/integrator.hpp"
#include "pentrap/laser_cooling.hpp"
#include "pentrap/mode_analysis.hpp"
#include "pentrap/potential.hpp"
#include "pentrap/schedule.hpp"
#include "pentrap/state.hpp"
#include "pentrap/thermal_sampling.hpp"
#include "pentrap/trajectory_io.hpp"
#include "pentrap/trap.hpp"
