#pragma once

// Umbrella header: exact solutions of the value -> production-price
// transformation for N-branch economies, plus the scenario engine.

#include "valforme/constructions.hpp"
#include "valforme/dynamics.hpp"
#include "valforme/economy.hpp"
#include "valforme/errors.hpp"
#include "valforme/io.hpp"
#include "valforme/linalg.hpp"
#include "valforme/solver.hpp"
