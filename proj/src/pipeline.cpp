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

#include "hiercoll/pipeline.hpp"

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <tuple>

namespace hiercoll {

using json = nlohmann::ordered_json;

namespace {

bool slot_less(const P2PTransfer& a, const P2PTransfer& b) {
  return std::tie(a.slot, a.reduce, a.src, a.dst, a.dst_buffer, a.dst_offset,
                  a.src_buffer, a.src_offset, a.channel, a.count, a.stripe) <
         std::tie(b.slot, b.reduce, b.src, b.dst, b.dst_buffer, b.dst_offset,
                  b.src_buffer, b.src_offset, b.channel, b.count, b.stripe);
}

struct WriteRecord {
  int64_t lo, hi;
  int slot;
  int id;
};

void compute_slot_deps(std::vector<P2PTransfer>& transfers) {
  std::map<std::pair<Rank, std::string>, std::vector<WriteRecord>> writes;
  for (const auto& t : transfers)
    writes[{t.dst, t.dst_buffer}].push_back(
        {t.dst_offset, t.dst_offset + t.count, t.slot, t.id});
  for (auto& [key, recs] : writes)
    std::sort(recs.begin(), recs.end(),
              [](const WriteRecord& a, const WriteRecord& b) {
                return a.lo < b.lo;
              });
  for (auto& t : transfers) {
    std::vector<int> deps;
    auto scan = [&](Rank rank, const std::string& buf, int64_t lo,
                    int64_t hi) {
      auto it = writes.find({rank, buf});
      if (it == writes.end()) return;
      for (const WriteRecord& w : it->second) {
        if (w.lo >= hi) break;
        if (w.hi <= lo || w.slot >= t.slot || w.id == t.id) continue;
        deps.push_back(w.id);
      }
    };
    scan(t.src, t.src_buffer, t.src_offset, t.src_offset + t.count);
    if (t.reduce)
      scan(t.dst, t.dst_buffer, t.dst_offset, t.dst_offset + t.count);
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    t.deps = std::move(deps);
  }
}

}  // namespace

PipelinedPlan pipeline(const StagedPlan& plan, int depth) {
  if (depth < 1)
    throw Error(ErrorCode::InvalidConfig, "pipeline depth must be >= 1");
  PipelinedPlan out;
  out.base = plan;
  out.depth = depth;
  if (depth == 1) {
    // One channel: the schedule is the plan itself.
    for (auto& t : out.base.transfers) {
      t.channel = 0;
      t.slot = t.stage;
    }
    out.slots = plan.num_stages;
    return out;
  }

  // Misaligned fences force a drain: every later stage shifts by
  // depth-1 so the slowest channel of the producing step lands before
  // the fastest channel of the consuming step.
  std::vector<int> drain_stages;
  for (const auto& f : plan.fences)
    if (!f.aligned) drain_stages.push_back(f.stage);
  auto shifted = [&](int stage) {
    int shift = 0;
    for (int ds : drain_stages)
      if (ds <= stage) shift += depth - 1;
    return stage + shift;
  };

  std::vector<P2PTransfer> transfers;
  transfers.reserve(plan.transfers.size() * depth);
  for (const auto& t : plan.transfers) {
    const int stage = shifted(t.stage);
    for (int c = 0; c < depth; ++c) {
      const SplitRange sr = balanced_split(t.count, depth, c);
      if (sr.count == 0) continue;
      P2PTransfer ct = t;
      ct.src_offset += sr.offset;
      ct.dst_offset += sr.offset;
      ct.count = sr.count;
      ct.stage = stage;
      ct.channel = c;
      ct.slot = stage + c;
      ct.deps.clear();
      transfers.push_back(std::move(ct));
    }
  }
  std::sort(transfers.begin(), transfers.end(), slot_less);
  for (size_t i = 0; i < transfers.size(); ++i) transfers[i].id = (int)i;
  compute_slot_deps(transfers);

  out.base.transfers = std::move(transfers);
  out.base.num_stages = shifted(plan.num_stages - 1) + 1;
  for (auto& f : out.base.fences) f.stage = shifted(f.stage);
  out.slots = out.base.num_stages + depth - 1;
  return out;
}

std::vector<std::vector<int64_t>> comm_matrix(const PipelinedPlan& plan,
                                              int slot) {
  if (slot < 0)
    throw Error(ErrorCode::InvalidConfig,
                "slot " + std::to_string(slot) + " out of range");
  const int p = plan.base.world_size;
  std::vector<std::vector<int64_t>> m(p, std::vector<int64_t>(p, 0));
  for (const auto& t : plan.base.transfers)
    if (t.slot == slot)
      m[t.src][t.dst] += t.count * plan.base.element_size;
  return m;
}

std::string PipelinedPlan::serialize() const {
  json j = json::parse(base.serialize());
  j["format"] = "hiercoll-pipelined-v1";
  j["pipeline"] = depth;
  j["slots"] = slots;
  return j.dump(2) + "\n";
}

PipelinedPlan PipelinedPlan::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (j.value("format", "") != "hiercoll-pipelined-v1")
    throw Error(ErrorCode::ParseError, "not a hiercoll pipelined plan file");
  PipelinedPlan out;
  out.depth = j.at("pipeline").get<int>();
  out.slots = j.at("slots").get<int>();
  j["format"] = "hiercoll-plan-v1";
  j.erase("pipeline");
  j.erase("slots");
  out.base = StagedPlan::deserialize(j.dump());
  return out;
}

}  // namespace hiercoll
