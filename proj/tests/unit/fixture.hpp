#pragma once

#include "islock/experiments.hpp"

namespace islock::testing {

// Default codebook, corpus and model, built once per test binary.
inline const Stack& default_stack() {
  static const Stack s = build_stack(StackConfig{});
  return s;
}

}  // namespace islock::testing
