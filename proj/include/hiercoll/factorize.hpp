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

#include <map>
#include <string>
#include <vector>

#include "hiercoll/composition.hpp"
#include "hiercoll/machine.hpp"
#include "hiercoll/types.hpp"

namespace hiercoll {

/// One point-to-point chunk movement of the lowered plan. src == dst
/// marks a local copy (staging move on one rank). When `reduce` is
/// set the destination range is a live accumulator and the incoming
/// values fold into it with `op`; otherwise the transfer overwrites.
struct P2PTransfer {
  int id = -1;
  Rank src = 0, dst = 0;
  std::string src_buffer;
  int64_t src_offset = 0;
  std::string dst_buffer;
  int64_t dst_offset = 0;
  int64_t count = 0;
  bool reduce = false;
  ReduceOp op = ReduceOp::sum;
  int stage = 0;
  int level = 0;    // shallowest depth separating src and dst; L if local
  int stripe = 0;
  int channel = 0;  // assigned by the pipeline transform
  int slot = 0;     // stage + channel in the overlapped schedule
  int step = 0;     // source program step
  std::vector<int> deps;  // ids of predecessor transfers

  bool is_local() const { return src == dst; }
};

/// Stage index at which a new program step begins. `aligned` records
/// whether every dependency crossing this fence connects identical
/// ranges; the pipeline keeps fine-grain channel overlap across
/// aligned fences and drains otherwise.
struct FenceBoundary {
  int stage = 0;
  bool aligned = true;
};

/// DAG of point-to-point transfers produced by lowering a program
/// for a machine: striping, then ring, then tree.
struct StagedPlan {
  int world_size = 0;
  int element_size = 4;
  int stripe = 1;
  int ring = 1;
  int num_stages = 0;
  std::string source_program_id;
  std::map<std::string, BufferDecl> buffers;
  std::vector<FenceBoundary> fences;
  std::vector<P2PTransfer> transfers;

  int64_t total_bytes() const;

  std::string serialize() const;
  static StagedPlan deserialize(const std::string& text);
};

/// Rewrites every node-crossing primitive into an intra-node scatter
/// of s balanced sub-chunks onto the root node's lowest-ranked GPUs
/// (the root keeps chunk 0), an internal fence, and one branch
/// primitive per sub-chunk rooted at its stripe GPU. Reductions are
/// mirrored: branch reductions first, then an intra-node gather.
/// s == 1 is the identity.
CollectiveProgram stripe_transform(const CollectiveProgram& program,
                                   const MachineDescriptor& machine, int s);

/// Recursive multilevel lowering of a single primitive; subtrees
/// without leaves are pruned. Stages follow the hierarchy top-down
/// for multicasts and bottom-up for reductions.
std::vector<P2PTransfer> tree_factorize(const Primitive& primitive,
                                        const MachineDescriptor& machine);

/// Chain lowering across n conceptual nodes (blocks of p/n ranks);
/// data enters each block once and is assembled inside blocks with
/// trees. Reductions run the chain in reverse with op at each hop.
/// Falls through to the tree when nothing crosses blocks or n == 1.
std::vector<P2PTransfer> ring_factorize(const Primitive& primitive,
                                        const MachineDescriptor& machine,
                                        int n);

/// Full lowering pipeline: striping, ring, tree, fence offsets,
/// canonical ordering, dependency edges.
StagedPlan lower(const CollectiveProgram& program,
                 const MachineDescriptor& machine,
                 const OptimizationConfig& config);

/// Bytes moved by transfers whose endpoints lie in different blocks
/// of `node_size` consecutive ranks.
int64_t inter_node_bytes(const StagedPlan& plan, int node_size);

}  // namespace hiercoll
