#pragma once

#include "qflow/errors.hpp"
#include "qflow/grid.hpp"
#include "qflow/interp.hpp"
#include "qflow/model.hpp"
#include "qflow/kinematics.hpp"
#include "qflow/identities.hpp"
#include "qflow/lagrangian.hpp"
#include "qflow/reconstruction.hpp"
#include "qflow/reference.hpp"
#include "qflow/qtm.hpp"
#include "qflow/benchmarks.hpp"
#include "qflow/config.hpp"
#include "qflow/io.hpp"
#include "qflow/pipeline.hpp"
