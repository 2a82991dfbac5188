#pragma once

#include "lmcf/types.hpp"
#include "lmcf/ambient.hpp"
#include "lmcf/lagrangian.hpp"
#include "lmcf/spectral.hpp"
#include "lmcf/variation.hpp"
#include "lmcf/flow.hpp"
#include "lmcf/calibration.hpp"
#include "lmcf/io.hpp"
#include "lmcf/scenario.hpp"
