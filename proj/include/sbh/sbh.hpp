#pragma once

#include "sbh/box.hpp"
#include "sbh/cross_validation.hpp"
#include "sbh/error.hpp"
#include "sbh/io.hpp"
#include "sbh/parallel.hpp"
#include "sbh/peeling.hpp"
#include "sbh/random.hpp"
#include "sbh/simulation.hpp"
#include "sbh/survival.hpp"
#include "sbh/survival_data.hpp"
