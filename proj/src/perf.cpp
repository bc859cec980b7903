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

#include "hiercoll/perf.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace hiercoll {

namespace {

enum class Res : uint8_t { nic_out, nic_in, link_out, link_in, local };

// (kind, level, endpoint, lane): endpoint is the rank for links and
// the node for NICs, lane the NIC id.
using ResourceKey = std::tuple<Res, int, int, int>;

struct ResourceLoad {
  int64_t bytes = 0;
  double alpha = 0;
  double capacity = 0;
};

int ceil_log2(int n) {
  int l = 0;
  while ((1 << l) < n) ++l;
  return l;
}

}  // namespace

Timeline simulate(const PipelinedPlan& plan, const MachineDescriptor& machine) {
  require_valid_machine(machine, plan.base.world_size);
  const int levels = machine.num_levels();
  const int esize = plan.base.element_size;

  std::vector<std::vector<const P2PTransfer*>> by_slot(plan.slots);
  for (const auto& t : plan.base.transfers) {
    if (t.slot < 0 || t.slot >= plan.slots)
      throw Error(ErrorCode::InvalidConfig,
                  "transfer slot " + std::to_string(t.slot) + " out of range");
    by_slot[t.slot].push_back(&t);
  }

  Timeline timeline;
  timeline.slots.resize(plan.slots);
  for (int s = 0; s < plan.slots; ++s) {
    std::map<ResourceKey, ResourceLoad> loads;
    SlotCost& cost = timeline.slots[s];
    for (const P2PTransfer* t : by_slot[s]) {
      const int level = std::min(std::max(t->level, 1), levels);
      const LevelLink& link = machine.levels[level - 1];
      const int64_t bytes = t->count * esize;
      auto charge = [&](ResourceKey key, double cap) {
        ResourceLoad& l = loads[key];
        l.bytes += bytes;
        l.alpha = std::max(l.alpha, link.alpha);
        l.capacity = cap;
      };
      if (t->is_local()) {
        const LevelLink& leaf = machine.levels[levels - 1];
        ResourceLoad& l = loads[{Res::local, levels, t->src, 0}];
        l.bytes += bytes;
        l.alpha = std::max(l.alpha, leaf.alpha);
        l.capacity = leaf.bandwidth;
        cost.local_bytes += bytes;
      } else if (machine.level_crosses_nodes(level)) {
        // One NIC is one resource no matter which hierarchy level the
        // traffic crosses.
        charge({Res::nic_out, 0, machine.node_of(t->src),
                machine.nic_of(t->src)},
               machine.nic_bandwidth);
        charge({Res::nic_in, 0, machine.node_of(t->dst),
                machine.nic_of(t->dst)},
               machine.nic_bandwidth);
        cost.inter_bytes += bytes;
      } else {
        charge({Res::link_out, level, t->src, 0}, link.bandwidth);
        charge({Res::link_in, level, t->dst, 0}, link.bandwidth);
        cost.intra_bytes += bytes;
      }
    }
    double duration = 0;
    for (const auto& [key, l] : loads)
      duration = std::max(duration, l.alpha + (double)l.bytes / l.capacity);
    cost.duration = duration;
    timeline.total += duration;
  }
  return timeline;
}

double t_ring(double alpha, double d, int k, double f, int m, int n,
              double intra) {
  return (alpha + d / (k * f * m)) * (n + m - 2) + intra / m;
}

double t_tree(double alpha, double d, int k, double f, int m, int n,
              double intra) {
  return (alpha * m + d / (k * f)) * ceil_log2(n) + intra / m;
}

double bound(CollectiveKind kind, int p, int g, int k, double f) {
  if (p <= g)
    throw Error(ErrorCode::NoInterNodeBound,
                "p=" + std::to_string(p) + " fits in one node of g=" +
                    std::to_string(g));
  const double kf = (double)k * f;
  switch (kind) {
    case CollectiveKind::broadcast:
    case CollectiveKind::reduce: return kf;
    case CollectiveKind::gather:
    case CollectiveKind::scatter:
    case CollectiveKind::all_gather:
    case CollectiveKind::reduce_scatter: return kf * p / (p - g);
    case CollectiveKind::all_reduce: return kf * p / (2.0 * (p - g));
    case CollectiveKind::all_to_all: return kf * p / ((double)g * (p - g));
  }
  throw Error(ErrorCode::InvalidConfig, "unknown collective kind");
}

double throughput(double d_bytes, int p, double t) {
  if (t <= 0) throw Error(ErrorCode::InvalidConfig, "t must be positive");
  return d_bytes * p / t;
}

double calibrate_intra(const MachineDescriptor& machine, double payload_bytes,
                       int s) {
  const double beta = machine.levels.back().bandwidth;
  const int g = machine.gpus_per_node;
  double intra = 0;
  if (s > 1) intra += (s - 1) * payload_bytes / s / beta;
  if (g > 1) intra += (g - 1) * payload_bytes / g / beta;
  return intra;
}

ThroughputReport make_report(CollectiveKind kind, int p, int64_t count,
                             const MachineDescriptor& machine,
                             const OptimizationConfig& config,
                             const Timeline& timeline) {
  ThroughputReport rep;
  rep.t = timeline.total;
  const double payload = (double)count * machine.element_size;
  rep.throughput = throughput(payload, p, rep.t);
  if (p > machine.gpus_per_node) {
    rep.bound = bound(kind, p, machine.gpus_per_node, machine.nics_per_node,
                      machine.nic_bandwidth);
    rep.utilization = rep.throughput / *rep.bound;
  }
  double alpha_inter = 0;
  for (int l = 1; l <= machine.node_depth(); ++l)
    alpha_inter = std::max(alpha_inter, machine.levels[l - 1].alpha);
  const double total_bytes = payload * p;
  const double intra = calibrate_intra(machine, total_bytes, config.stripe);
  if (config.ring > 1) {
    rep.analytic_model = "ring";
    rep.analytic_t =
        t_ring(alpha_inter, total_bytes, machine.nics_per_node,
               machine.nic_bandwidth, config.pipeline, config.ring, intra);
  } else {
    rep.analytic_model = "tree";
    rep.analytic_t =
        t_tree(alpha_inter, total_bytes, machine.nics_per_node,
               machine.nic_bandwidth, config.pipeline, machine.node_count(),
               intra);
  }
  return rep;
}

}  // namespace hiercoll
