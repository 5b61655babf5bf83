#ifndef EXITGRID_EXITGRID_HPP
#define EXITGRID_EXITGRID_HPP

// Umbrella header for the exit-time control library.

#include "exitgrid/arcs.hpp"
#include "exitgrid/benchmarks.hpp"
#include "exitgrid/config.hpp"
#include "exitgrid/expression.hpp"
#include "exitgrid/geometry.hpp"
#include "exitgrid/grid.hpp"
#include "exitgrid/hamiltonian.hpp"
#include "exitgrid/hypotheses.hpp"
#include "exitgrid/io.hpp"
#include "exitgrid/problem.hpp"
#include "exitgrid/regularity.hpp"
#include "exitgrid/solver.hpp"
#include "exitgrid/util.hpp"

#endif
