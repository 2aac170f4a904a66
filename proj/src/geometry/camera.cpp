#include "graspseq/geometry/camera.hpp"

#include "graspseq/errors.hpp"

namespace graspseq {

void Intrinsics::validate() const {
  if (!(fx > 0 && fy > 0)) throw ConfigError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) throw ConfigError("principal point must lie inside the image");
}

}  // namespace graspseq
