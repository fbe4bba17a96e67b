#pragma once

#include <memory>

#include "autores/reference.hpp"

namespace autores::test {

// (lambda, gamma) = (1, 0.1) used throughout.
inline const SystemParams& params() {
  static const SystemParams p(1.0, 0.1);
  return p;
}

inline std::shared_ptr<const ReferenceSolution> reference() {
  static const auto ref = std::make_shared<const ReferenceSolution>(reference_solution(params()));
  return ref;
}

}  // namespace autores::test
