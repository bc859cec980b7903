/*
Copyright 2026 The hiercoll Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <string>

#include "hiercoll/composition.hpp"
#include "hiercoll/engine.hpp"

namespace hiercoll {

enum class CollectiveKind : uint8_t {
  scatter,
  broadcast,
  gather,
  reduce,
  all_to_all,
  all_gather,
  reduce_scatter,
  all_reduce,
};

/// single: the flat parallel composition. multi: two steps with one
/// fence. multi_alt: the alternative two-step all-reduce pairing
/// (reduce, then broadcast).
enum class Formulation : uint8_t { single, multi, multi_alt };

std::string to_string(CollectiveKind k);
CollectiveKind collective_from_string(const std::string& s);
std::string to_string(Formulation f);
Formulation formulation_from_string(const std::string& s);

bool is_rooted(CollectiveKind k);

struct CollectiveSpec {
  CollectiveKind kind = CollectiveKind::broadcast;
  Formulation formulation = Formulation::single;
  Rank root = 0;        // rooted collectives only
  int64_t count = 1;    // per-rank chunk d, elements
  ReduceOp op = ReduceOp::sum;
};

/// Buffer convention: "sendbuf" and "recvbuf", contiguous per-rank
/// chunks of `count` elements laid out rank-major (chunk j at offset
/// j*count). Rooted point-to-point style collectives (scatter,
/// gather) keep a p*count buffer on the side that addresses chunks
/// and a count-sized buffer on the other.
CollectiveProgram build(const CollectiveSpec& spec, int p);

/// Ground-truth final state per the standard semantics of each
/// collective, constructed directly (independent of the composition
/// and lowering paths).
SymbolicState reference_semantics(const CollectiveSpec& spec, int p);

}  // namespace hiercoll
