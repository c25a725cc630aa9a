#pragma once

// Prediction-head pieces of the pose network at toy scale: phi scaling,
// anchor center offsets, iterative rotation refinement, NMS, weights I/O.

#include <posekit/head/anchors.hpp>
#include <posekit/head/feature_map.hpp>
#include <posekit/head/nms.hpp>
#include <posekit/head/refinement.hpp>
#include <posekit/head/scaling.hpp>
#include <posekit/head/weights_io.hpp>
