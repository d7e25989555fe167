#pragma once

#include "egicp/error.hpp"
#include "egicp/lie.hpp"
#include "egicp/kdtree.hpp"
#include "egicp/gaussian_cloud.hpp"
#include "egicp/gicp.hpp"
#include "egicp/caratheodory.hpp"
#include "egicp/coreset.hpp"
#include "egicp/occupancy_grid.hpp"
#include "egicp/pose_graph.hpp"
#include "egicp/odometry.hpp"
#include "egicp/global_mapping.hpp"
#include "egicp/metrics.hpp"
#include "egicp/synth.hpp"
#include "egicp/bench.hpp"
#include "egicp/io.hpp"
#include "egicp/pipeline.hpp"
