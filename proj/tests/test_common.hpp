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

#include "hiercoll/machine.hpp"

namespace hiercoll::test {

/// Machine with uniform per-level links: intra levels fast, NICs at
/// 25 GB/s each.
inline MachineDescriptor machine(std::vector<int> hierarchy, int g, int k,
                                 Binding binding = Binding::packed,
                                 double intra_bw = 100e9,
                                 double alpha = 1e-6) {
  MachineDescriptor m;
  m.hierarchy = std::move(hierarchy);
  for (size_t i = 0; i < m.hierarchy.size(); ++i)
    m.levels.push_back(LevelLink{alpha, intra_bw, "sim"});
  m.gpus_per_node = g;
  m.nics_per_node = k;
  m.nic_bandwidth = 25e9;
  m.binding = binding;
  return m;
}

}  // namespace hiercoll::test
