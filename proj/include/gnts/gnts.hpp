#pragma once

#include "gnts/config.hpp"
#include "gnts/environment.hpp"
#include "gnts/error.hpp"
#include "gnts/experiment.hpp"
#include "gnts/gnn.hpp"
#include "gnts/graph.hpp"
#include "gnts/io.hpp"
#include "gnts/linalg.hpp"
#include "gnts/metrics.hpp"
#include "gnts/policy.hpp"
#include "gnts/random.hpp"
#include "gnts/tangent.hpp"
