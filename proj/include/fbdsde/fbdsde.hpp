#pragma once

#include "fbdsde/errors.hpp"
#include "fbdsde/noise.hpp"
#include "fbdsde/lattice.hpp"
#include "fbdsde/calculus.hpp"
#include "fbdsde/control.hpp"
#include "fbdsde/fields.hpp"
#include "fbdsde/model.hpp"
#include "fbdsde/linear.hpp"
#include "fbdsde/sweep.hpp"
#include "fbdsde/solver.hpp"
#include "fbdsde/smp.hpp"
#include "fbdsde/game.hpp"
#include "fbdsde/spde.hpp"
