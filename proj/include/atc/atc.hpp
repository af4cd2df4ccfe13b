#pragma once
// Everything: labels and penalties, models, transfer clustering, adaptive
// penalty selection, closed-form rates, file formats and the simulator.

#include "atc/adapt.hpp"
#include "atc/core.hpp"
#include "atc/estimate.hpp"
#include "atc/io.hpp"
#include "atc/models.hpp"
#include "atc/neg_log_post_matrix.hpp"
#include "atc/parallel.hpp"
#include "atc/random.hpp"
#include "atc/sim.hpp"
#include "atc/tc.hpp"
#include "atc/theory.hpp"
