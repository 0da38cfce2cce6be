#pragma once

#include "frugal/core.hpp"
#include "frugal/data.hpp"
#include "frugal/clustering.hpp"
#include "frugal/display_solver.hpp"
#include "frugal/classifier.hpp"
#include "frugal/rl_controller.hpp"
#include "frugal/strategies.hpp"
#include "frugal/al_loop.hpp"
#include "frugal/serialize.hpp"
