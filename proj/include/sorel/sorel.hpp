#pragma once

#include "sorel/common.hpp"
#include "sorel/spectra.hpp"
#include "sorel/permutahedron.hpp"
#include "sorel/objective.hpp"
#include "sorel/rng.hpp"
#include "sorel/schedule.hpp"
#include "sorel/trace.hpp"
#include "sorel/solver.hpp"
#include "sorel/baselines.hpp"
#include "sorel/dataset.hpp"
#include "sorel/config.hpp"
#include "sorel/experiment.hpp"
#include "sorel/plot.hpp"
