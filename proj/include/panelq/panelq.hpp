#pragma once

// Panel-data quantile regression with grouped fixed effects: penalized
// estimation over a lambda path, information-criterion group selection,
// group-conditional refitting with sandwich inference, and a Monte Carlo
// harness for the simulation designs.

#include "panelq/csv.hpp"
#include "panelq/grouping.hpp"
#include "panelq/inference.hpp"
#include "panelq/montecarlo.hpp"
#include "panelq/panel.hpp"
#include "panelq/parallel.hpp"
#include "panelq/problems.hpp"
#include "panelq/report.hpp"
#include "panelq/rng.hpp"
#include "panelq/selection.hpp"
#include "panelq/solver.hpp"
#include "panelq/stats.hpp"
