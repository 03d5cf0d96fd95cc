// Umbrella header for the model, estimation and simulation components.
// io.hpp is separate because it needs nlohmann/json.
#pragma once

#include "fbmadt/adt_model.hpp"
#include "fbmadt/dataset.hpp"
#include "fbmadt/errors.hpp"
#include "fbmadt/evaluation.hpp"
#include "fbmadt/fgn_fbm.hpp"
#include "fbmadt/inference.hpp"
#include "fbmadt/optimize.hpp"
#include "fbmadt/random.hpp"
#include "fbmadt/reliability.hpp"
#include "fbmadt/simulator.hpp"
#include "fbmadt/svg.hpp"
#include "fbmadt/sweep.hpp"
