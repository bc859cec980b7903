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

#include "hiercoll/machine.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

namespace hiercoll {

using json = nlohmann::ordered_json;

std::string to_string(Binding b) {
  switch (b) {
    case Binding::packed: return "packed";
    case Binding::round_robin: return "round_robin";
    case Binding::bijective: return "bijective";
  }
  return "?";
}

Binding binding_from_string(const std::string& s) {
  if (s == "packed") return Binding::packed;
  if (s == "round_robin") return Binding::round_robin;
  if (s == "bijective") return Binding::bijective;
  throw Error(ErrorCode::ParseError, "unknown binding '" + s + "'");
}

int MachineDescriptor::world_size() const {
  int p = 1;
  for (int h : hierarchy) p *= h;
  return p;
}

int MachineDescriptor::group_size(int depth) const {
  if (depth < 0 || depth > num_levels())
    throw Error(ErrorCode::InvalidMachine,
                "depth " + std::to_string(depth) + " out of range");
  int size = world_size();
  for (int i = 0; i < depth; ++i) size /= hierarchy[i];
  return size;
}

int MachineDescriptor::group_index(Rank rank, int depth) const {
  return rank / group_size(depth);
}

std::pair<Rank, Rank> MachineDescriptor::group_span(Rank rank,
                                                    int depth) const {
  const int size = group_size(depth);
  const Rank lo = rank / size * size;
  return {lo, lo + size};
}

int MachineDescriptor::crossing_level(Rank a, Rank b) const {
  for (int depth = 1; depth <= num_levels(); ++depth)
    if (group_index(a, depth) != group_index(b, depth)) return depth;
  return num_levels();
}

int MachineDescriptor::node_depth() const {
  // Smallest suffix of factors whose product is g; the node boundary
  // sits just above it.
  int prod = 1;
  int depth = num_levels();
  while (depth >= 0) {
    if (prod == gpus_per_node) return depth;
    if (depth == 0) break;
    prod *= hierarchy[depth - 1];
    --depth;
  }
  throw Error(ErrorCode::InvalidMachine,
              "no hierarchy suffix multiplies to gpus_per_node");
}

int MachineDescriptor::nic_of(Rank rank) const {
  const int local = local_rank(rank);
  switch (binding) {
    case Binding::packed:
      if (gpus_per_node % nics_per_node != 0)
        throw Error(ErrorCode::InvalidMachine,
                    "packed binding requires k | g (use round_robin)");
      return local / (gpus_per_node / nics_per_node);
    case Binding::round_robin:
      return local % nics_per_node;
    case Binding::bijective:
      if (gpus_per_node != nics_per_node)
        throw Error(ErrorCode::InvalidMachine,
                    "bijective binding requires g == k");
      return local;
  }
  return 0;
}

GroupInfo group_of(Rank rank, int depth, const MachineDescriptor& m) {
  auto [lo, hi] = m.group_span(rank, depth);
  GroupInfo info;
  info.id = m.group_index(rank, depth);
  info.members.resize(hi - lo);
  std::iota(info.members.begin(), info.members.end(), lo);
  return info;
}

std::vector<Violation> validate_machine(const MachineDescriptor& m, int p) {
  std::vector<Violation> out;
  auto flag = [&](const std::string& msg) {
    Violation v;
    v.code = ErrorCode::InvalidMachine;
    v.message = msg;
    out.push_back(std::move(v));
  };

  if (m.hierarchy.empty()) flag("hierarchy is empty");
  for (int h : m.hierarchy)
    if (h < 1) flag("hierarchy factor " + std::to_string(h) + " < 1");
  if (!m.hierarchy.empty() && m.world_size() != p)
    flag("hierarchy product " + std::to_string(m.world_size()) +
         " != world size " + std::to_string(p));
  if (m.levels.size() != m.hierarchy.size())
    flag("need one link parameter set per hierarchy level");
  for (size_t i = 0; i < m.levels.size(); ++i) {
    if (m.levels[i].alpha < 0)
      flag("level " + std::to_string(i + 1) + " alpha < 0");
    if (m.levels[i].bandwidth <= 0)
      flag("level " + std::to_string(i + 1) + " bandwidth <= 0");
  }
  if (m.gpus_per_node < 1) flag("gpus_per_node < 1");
  if (m.nics_per_node < 1) flag("nics_per_node < 1");
  if (m.nics_per_node > m.gpus_per_node) flag("k > g");
  if (m.nic_bandwidth <= 0) flag("nic_bandwidth <= 0");
  if (m.element_size < 1) flag("element_size < 1");
  if (m.binding == Binding::bijective && m.gpus_per_node != m.nics_per_node)
    flag("bijective binding requires g == k");
  if (m.binding == Binding::packed &&
      m.gpus_per_node % m.nics_per_node != 0)
    flag("packed binding requires k | g");
  if (!m.hierarchy.empty() && m.world_size() % m.gpus_per_node == 0) {
    int prod = 1;
    bool found = m.gpus_per_node == 1;
    for (int i = (int)m.hierarchy.size() - 1; i >= 0 && !found; --i) {
      prod *= m.hierarchy[i];
      if (prod == m.gpus_per_node) found = true;
      if (prod > m.gpus_per_node) break;
    }
    if (!found) flag("deepest factors do not multiply to gpus_per_node");
  } else if (!m.hierarchy.empty()) {
    flag("gpus_per_node does not divide world size");
  }
  return out;
}

void require_valid_machine(const MachineDescriptor& m, int p) {
  auto v = validate_machine(m, p);
  if (!v.empty()) throw Error(ErrorCode::InvalidMachine, v.front().message);
}

std::vector<Violation> validate_config(const OptimizationConfig& cfg,
                                       const MachineDescriptor& m) {
  std::vector<Violation> out;
  auto flag = [&](const std::string& msg) {
    Violation v;
    v.code = ErrorCode::InvalidConfig;
    v.message = msg;
    out.push_back(std::move(v));
  };
  if (cfg.stripe < 1) flag("stripe < 1");
  if (cfg.stripe > m.gpus_per_node)
    flag("stripe " + std::to_string(cfg.stripe) + " > gpus_per_node " +
         std::to_string(m.gpus_per_node));
  if (cfg.ring < 1) flag("ring < 1");
  if (cfg.ring > m.node_count())
    flag("ring " + std::to_string(cfg.ring) + " > node count " +
         std::to_string(m.node_count()));
  else if (cfg.ring >= 1 && m.node_count() % cfg.ring != 0)
    flag("ring " + std::to_string(cfg.ring) + " does not divide node count " +
         std::to_string(m.node_count()));
  if (cfg.pipeline < 1) flag("pipeline < 1");
  return out;
}

void require_valid_config(const OptimizationConfig& cfg,
                          const MachineDescriptor& m) {
  auto v = validate_config(cfg, m);
  if (!v.empty()) throw Error(ErrorCode::InvalidConfig, v.front().message);
}

std::string MachineDescriptor::serialize() const {
  json j;
  j["format"] = "hiercoll-machine-v1";
  j["hierarchy"] = hierarchy;
  json levels_j = json::array();
  for (const LevelLink& l : levels)
    levels_j.push_back(json{{"alpha", l.alpha},
                            {"bandwidth", l.bandwidth},
                            {"transport", l.transport}});
  j["levels"] = std::move(levels_j);
  j["gpus_per_node"] = gpus_per_node;
  j["nics_per_node"] = nics_per_node;
  j["nic_bandwidth"] = nic_bandwidth;
  j["binding"] = to_string(binding);
  j["element_size"] = element_size;
  return j.dump(2) + "\n";
}

MachineDescriptor MachineDescriptor::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (j.value("format", "") != "hiercoll-machine-v1")
    throw Error(ErrorCode::ParseError, "not a hiercoll machine file");
  MachineDescriptor m;
  m.hierarchy = j.at("hierarchy").get<std::vector<int>>();
  for (const auto& lj : j.at("levels")) {
    LevelLink l;
    l.alpha = lj.at("alpha").get<double>();
    l.bandwidth = lj.at("bandwidth").get<double>();
    l.transport = lj.value("transport", "");
    m.levels.push_back(std::move(l));
  }
  m.gpus_per_node = j.at("gpus_per_node").get<int>();
  m.nics_per_node = j.at("nics_per_node").get<int>();
  m.nic_bandwidth = j.at("nic_bandwidth").get<double>();
  m.binding = binding_from_string(j.at("binding").get<std::string>());
  m.element_size = j.value("element_size", 4);
  return m;
}

MachineDescriptor MachineDescriptor::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::ParseError, "cannot open machine file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace hiercoll
