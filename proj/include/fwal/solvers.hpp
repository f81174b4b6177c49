#pragma once

#include "fwal/solvers/ascg.hpp"
#include "fwal/solvers/cg.hpp"
#include "fwal/solvers/common.hpp"
#include "fwal/solvers/mwal.hpp"
#include "fwal/solvers/sfw.hpp"
