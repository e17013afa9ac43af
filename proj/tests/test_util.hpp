#pragma once

#include <cmath>

#include "file_util.hpp"
#include "mesh.hpp"

namespace testutil {

inline fiberpinn::Mat2 rotation(double a) {
  fiberpinn::Mat2 R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

}  // namespace testutil
