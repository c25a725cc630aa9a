#pragma once

#include <posekit/geometry.hpp>
#include <posekit/image.hpp>

#include <string>
#include <vector>

namespace posekit {

struct Annotation {
  std::string model_id;
  Pose pose;
};

/// An image with its camera and ground-truth object poses.
struct AnnotatedFrame {
  ImageBuffer image;
  CameraIntrinsics intrinsics;
  std::vector<Annotation> annotations;
};

}  // namespace posekit
