// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#include "softvq/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace softvq {

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(n, 1);
  if (const char* env = std::getenv("SOFTVQ_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (const std::exception&) {
      // Unparseable values are ignored.
    }
  }
  return n;
}

}  // namespace softvq
