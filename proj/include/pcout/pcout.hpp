#pragma once

// Library umbrella: every detector, the simulation harness and report I/O.
#include "pcout/baselines.hpp"
#include "pcout/chi_square.hpp"
#include "pcout/data_matrix.hpp"
#include "pcout/error.hpp"
#include "pcout/evalsim.hpp"
#include "pcout/io.hpp"
#include "pcout/prcmpout.hpp"
#include "pcout/robust.hpp"
#include "pcout/spectral.hpp"
