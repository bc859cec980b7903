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

#include <vector>

#include "hiercoll/factorize.hpp"

namespace hiercoll {

/// Overlapped schedule: each transfer of the base plan is replicated
/// onto `depth` channels, channel c operating on the c-th balanced
/// sub-chunk of the transfer's range, scheduled at slot = stage +
/// channel. Across a misaligned fence the schedule drains (the next
/// step's stages shift by depth-1) so cross-channel dependencies stay
/// safe; aligned fences overlap finely.
struct PipelinedPlan {
  StagedPlan base;  // transfers carry (channel, slot); stages pre-shifted
  int depth = 1;    // m
  int slots = 0;    // total schedule length

  std::string serialize() const;
  static PipelinedPlan deserialize(const std::string& text);
};

PipelinedPlan pipeline(const StagedPlan& plan, int depth);

/// p x p matrix of bytes in flight at `slot`; local copies land on
/// the diagonal. Slots at or past the end yield a zero matrix.
std::vector<std::vector<int64_t>> comm_matrix(const PipelinedPlan& plan,
                                              int slot);

}  // namespace hiercoll
