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
#include <vector>

#include "hiercoll/types.hpp"

namespace hiercoll {

enum class Binding : uint8_t { packed, round_robin, bijective };

std::string to_string(Binding b);
Binding binding_from_string(const std::string& s);

/// Link parameters for one hierarchy level. For levels at or above
/// the node boundary the effective capacity comes from the NICs
/// (nic_bandwidth per NIC); `bandwidth` models the per-GPU link of
/// intra-node levels. `transport` is a reporting label only.
struct LevelLink {
  double alpha = 0.0;      // latency, seconds
  double bandwidth = 0.0;  // bytes/second per link
  std::string transport;   // e.g. "MPI", "IPC"
};

/// Parameterized description of a hierarchical network.
///
/// `hierarchy` holds top-down integer factors whose product is the
/// world size p; contiguous rank blocks form the groups of each
/// level. The deepest factors whose product equals gpus_per_node
/// describe the structure inside one node; every shallower level
/// crosses nodes and its traffic goes through NICs.
struct MachineDescriptor {
  std::vector<int> hierarchy;
  std::vector<LevelLink> levels;  // one per hierarchy entry
  int gpus_per_node = 1;          // g
  int nics_per_node = 1;          // k
  double nic_bandwidth = 0.0;     // f, bytes/second per NIC
  Binding binding = Binding::packed;
  int element_size = 4;  // bytes per element (float default)

  int world_size() const;
  int num_levels() const { return (int)hierarchy.size(); }

  /// Group size at `depth` (0 = all ranks, num_levels() = singleton):
  /// p / (h1 * ... * h_depth).
  int group_size(int depth) const;
  int group_index(Rank rank, int depth) const;
  /// Half-open member range of rank's group at `depth`.
  std::pair<Rank, Rank> group_span(Rank rank, int depth) const;

  /// Shallowest depth at which a and b fall into different groups
  /// (1..num_levels()); num_levels() for a == b (local).
  int crossing_level(Rank a, Rank b) const;

  /// Depth whose groups are exactly the nodes (group size == g).
  int node_depth() const;
  int node_count() const { return world_size() / gpus_per_node; }
  int node_of(Rank r) const { return r / gpus_per_node; }
  Rank local_rank(Rank r) const { return r % gpus_per_node; }

  /// True if a transfer crossing `level` leaves a node (traffic
  /// routed through NICs).
  bool level_crosses_nodes(int level) const { return level <= node_depth(); }

  /// NIC id (within the node) serving `rank` under the binding
  /// scheme: packed floor(local/(g/k)), round_robin local mod k,
  /// bijective local.
  int nic_of(Rank rank) const;

  std::string serialize() const;
  static MachineDescriptor deserialize(const std::string& text);
  static MachineDescriptor load(const std::string& path);
};

/// All MachineDescriptor invariant checks, reported as values.
std::vector<Violation> validate_machine(const MachineDescriptor& m, int p);

/// Throwing convenience wrapper around validate_machine.
void require_valid_machine(const MachineDescriptor& m, int p);

struct GroupInfo {
  int id;
  std::vector<Rank> members;
};
GroupInfo group_of(Rank rank, int depth, const MachineDescriptor& m);

/// The striping / ring / pipelining knobs (stripe s, ring n,
/// pipeline depth m).
struct OptimizationConfig {
  int stripe = 1;
  int ring = 1;
  int pipeline = 1;
};

std::vector<Violation> validate_config(const OptimizationConfig& cfg,
                                       const MachineDescriptor& m);
void require_valid_config(const OptimizationConfig& cfg,
                          const MachineDescriptor& m);

}  // namespace hiercoll
