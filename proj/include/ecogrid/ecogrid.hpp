#pragma once

#include "ecogrid/case_io.hpp"
#include "ecogrid/contingency.hpp"
#include "ecogrid/design_opt.hpp"
#include "ecogrid/eco_metrics.hpp"
#include "ecogrid/error.hpp"
#include "ecogrid/grid_model.hpp"
#include "ecogrid/powerflow.hpp"
#include "ecogrid/report_json.hpp"
