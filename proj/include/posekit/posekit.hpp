#pragma once

#include <posekit/augmentation.hpp>
#include <posekit/fit.hpp>
#include <posekit/formats.hpp>
#include <posekit/frame.hpp>
#include <posekit/geometry.hpp>
#include <posekit/headspec.hpp>
#include <posekit/image.hpp>
#include <posekit/metrics.hpp>
#include <posekit/synth.hpp>
#include <posekit/transform_loss.hpp>
