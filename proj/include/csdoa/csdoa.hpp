#pragma once

#include "array_geometry.hpp"
#include "beamformers.hpp"
#include "config.hpp"
#include "evaluation.hpp"
#include "io.hpp"
#include "lasso_path.hpp"
#include "peaks.hpp"
#include "pipeline.hpp"
#include "sparse_solver.hpp"
#include "synthesis.hpp"
#include "timeseries.hpp"
