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

#include <optional>
#include <string>
#include <vector>

#include "hiercoll/machine.hpp"
#include "hiercoll/pipeline.hpp"
#include "hiercoll/presets.hpp"

namespace hiercoll {

/// Simulated cost of one schedule slot. A slot lasts as long as its
/// busiest resource: latency of the level charged once, plus bytes
/// over capacity. Inter-node transfers charge the source NIC's
/// outbound side and the destination NIC's inbound side (full
/// duplex); intra-node transfers charge the per-GPU link of their
/// level; local copies charge the leaf-level link of their rank.
struct SlotCost {
  double duration = 0;      // seconds
  int64_t inter_bytes = 0;  // bytes through NICs this slot
  int64_t intra_bytes = 0;  // bytes on intra-node links
  int64_t local_bytes = 0;  // bytes moved rank-locally
};

struct Timeline {
  std::vector<SlotCost> slots;
  double total = 0;  // seconds, sum of slot durations
};

Timeline simulate(const PipelinedPlan& plan, const MachineDescriptor& machine);

/// Pipelined ring broadcast cost across n conceptual nodes:
///   (alpha + d / (k f m)) * (n + m - 2) + intra / m
/// d in bytes; `intra` is the caller-supplied intra-node residual.
double t_ring(double alpha, double d, int k, double f, int m, int n,
              double intra);

/// Pipelined tree broadcast cost:
///   (alpha * m + d / (k f)) * ceil(log2 n) + intra / m
double t_tree(double alpha, double d, int k, double f, int m, int n,
              double intra);

/// Asymptotic throughput limit (bytes/second) from node geometry:
/// broadcast/reduce kf; gather/scatter/all_gather/reduce_scatter
/// kf p/(p-g); all_reduce kf p/(2(p-g)); all_to_all kf p/(g(p-g)).
/// Throws NoInterNodeBound when p <= g.
double bound(CollectiveKind kind, int p, int g, int k, double f);

/// d bytes moved per rank-slot in t seconds: d * p / t.
double throughput(double d_bytes, int p, double t);

/// Intra-node residual for the analytic models, derived from the
/// exposed striping-scatter and assembly slots on the machine's leaf
/// level.
double calibrate_intra(const MachineDescriptor& machine, double payload_bytes,
                       int s);

struct ThroughputReport {
  double t = 0;                  // seconds
  double throughput = 0;         // bytes/second, payload * p... see below
  std::optional<double> bound;   // Table-style limit, absent if p <= g
  std::optional<double> utilization;
  std::optional<double> analytic_t;  // t_ring or t_tree prediction
  std::string analytic_model;        // "ring" or "tree"
};

/// payload_bytes is the per-rank payload (count * element_size); the
/// achieved throughput is payload_bytes * p / t.
ThroughputReport make_report(CollectiveKind kind, int p, int64_t count,
                             const MachineDescriptor& machine,
                             const OptimizationConfig& config,
                             const Timeline& timeline);

}  // namespace hiercoll
