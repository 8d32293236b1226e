#pragma once

#include "edgesched/money.hpp"

namespace edgesched {

using FunctionId = int;

struct FunctionType {
  FunctionId id = 0;
  double mem_mb = 0.0;     // u_n
  int duration_slots = 1;  // slots a single invocation keeps its container busy
  Money budget;            // b_n, default per-request budget

  bool operator==(const FunctionType&) const = default;
};

}  // namespace edgesched
