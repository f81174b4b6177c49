#pragma once

#include "fwal/envs/carsim.hpp"
#include "fwal/envs/gridworld.hpp"
#include "fwal/expert.hpp"
#include "fwal/io/mdp_json.hpp"
#include "fwal/mdp.hpp"
#include "fwal/oracle.hpp"
#include "fwal/polytope.hpp"
#include "fwal/rng.hpp"
#include "fwal/simulator.hpp"
#include "fwal/solvers.hpp"
