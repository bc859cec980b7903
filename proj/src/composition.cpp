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

#include "hiercoll/composition.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

namespace hiercoll {

using json = nlohmann::ordered_json;

std::string to_string(ReduceOp op) {
  return op == ReduceOp::sum ? "sum" : "max";
}

ReduceOp reduce_op_from_string(const std::string& s) {
  if (s == "sum") return ReduceOp::sum;
  if (s == "max") return ReduceOp::max;
  throw Error(ErrorCode::ParseError, "unknown reduce op '" + s + "'");
}

std::string to_string(PrimitiveKind k) {
  return k == PrimitiveKind::multicast ? "multicast" : "reduction";
}

std::string to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyLeafSet: return "EmptyLeafSet";
    case ErrorCode::RankOutOfRange: return "RankOutOfRange";
    case ErrorCode::EmptyStep: return "EmptyStep";
    case ErrorCode::WriteWriteRace: return "WriteWriteRace";
    case ErrorCode::ReadWriteRace: return "ReadWriteRace";
    case ErrorCode::BadBufferRef: return "BadBufferRef";
    case ErrorCode::UnsupportedFormulation: return "UnsupportedFormulation";
    case ErrorCode::InvalidMachine: return "InvalidMachine";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UninitializedRead: return "UninitializedRead";
    case ErrorCode::DependencyViolation: return "DependencyViolation";
    case ErrorCode::NoInterNodeBound: return "NoInterNodeBound";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "UnknownError";
}

CollectiveProgram::CollectiveProgram(int world_size)
    : world_size_(world_size) {
  if (world_size < 1)
    throw Error(ErrorCode::RankOutOfRange, "world size must be positive");
  steps_.emplace_back();
}

CollectiveProgram& CollectiveProgram::declare_buffer(const std::string& id,
                                                     int64_t length, bool input,
                                                     bool internal) {
  if (length <= 0)
    throw Error(ErrorCode::BadBufferRef, "buffer '" + id + "' length <= 0");
  buffers_[id] = BufferDecl{length, input, internal};
  return *this;
}

void CollectiveProgram::check_ref(const BufferRef& ref) const {
  auto it = buffers_.find(ref.buffer);
  if (it == buffers_.end())
    throw Error(ErrorCode::BadBufferRef, "undeclared buffer '" + ref.buffer + "'");
  if (ref.offset < 0 || ref.count <= 0 || ref.end() > it->second.length)
    throw Error(ErrorCode::BadBufferRef,
                "range [" + std::to_string(ref.offset) + ", " +
                    std::to_string(ref.end()) + ") exceeds buffer '" +
                    ref.buffer + "' of length " +
                    std::to_string(it->second.length));
}

std::vector<std::pair<Rank, BufferRef>> primitive_writes(const Primitive& p) {
  std::vector<std::pair<Rank, BufferRef>> out;
  if (p.kind == PrimitiveKind::multicast) {
    for (Rank leaf : p.leaves) out.emplace_back(leaf, p.recv);
    if (p.root_participates) out.emplace_back(p.root, p.recv);
  } else {
    out.emplace_back(p.root, p.recv);
  }
  return out;
}

std::vector<std::pair<Rank, BufferRef>> primitive_reads(const Primitive& p) {
  std::vector<std::pair<Rank, BufferRef>> out;
  if (p.kind == PrimitiveKind::multicast) {
    out.emplace_back(p.root, p.send);
  } else {
    for (Rank leaf : p.leaves) out.emplace_back(leaf, p.send);
    if (p.root_participates) out.emplace_back(p.root, p.send);
  }
  return out;
}

CollectiveProgram& CollectiveProgram::append_primitive(Primitive prim) {
  append(std::move(prim));
  return *this;
}

void CollectiveProgram::append(Primitive prim) {
  check_ref(prim.send);
  check_ref(prim.recv);
  if (prim.send.count != prim.recv.count)
    throw Error(ErrorCode::BadBufferRef, "send.count != recv.count");
  if (prim.root < 0 || prim.root >= world_size_)
    throw Error(ErrorCode::RankOutOfRange,
                "root " + std::to_string(prim.root));
  for (Rank r : prim.leaves)
    if (r < 0 || r >= world_size_)
      throw Error(ErrorCode::RankOutOfRange, "leaf " + std::to_string(r));

  // Normalize: sorted unique leaves, root membership as a flag.
  std::sort(prim.leaves.begin(), prim.leaves.end());
  prim.leaves.erase(std::unique(prim.leaves.begin(), prim.leaves.end()),
                    prim.leaves.end());
  auto it = std::find(prim.leaves.begin(), prim.leaves.end(), prim.root);
  if (it != prim.leaves.end()) {
    prim.leaves.erase(it);
    prim.root_participates = true;
  }

  // Eager write-write race check against the current step.
  for (const auto& [rank, range] : primitive_writes(prim)) {
    auto& intervals = step_writes_[{rank, range.buffer}];
    auto it = intervals.lower_bound(range.offset);
    bool clash = false;
    if (it != intervals.end() && it->first < range.end()) clash = true;
    if (it != intervals.begin() && std::prev(it)->second > range.offset)
      clash = true;
    if (clash)
      throw Error(ErrorCode::WriteWriteRace,
                  "rank " + std::to_string(rank) + " buffer '" + range.buffer +
                      "' [" + std::to_string(range.offset) + ", " +
                      std::to_string(range.end()) + ")");
  }
  for (const auto& [rank, range] : primitive_writes(prim))
    step_writes_[{rank, range.buffer}].emplace(range.offset, range.end());
  steps_.back().push_back(std::move(prim));
}

CollectiveProgram& CollectiveProgram::add_multicast(const BufferRef& send,
                                                    const BufferRef& recv,
                                                    Rank root,
                                                    std::vector<Rank> leaves) {
  if (leaves.empty())
    throw Error(ErrorCode::EmptyLeafSet, "multicast with no leaves");
  Primitive p;
  p.kind = PrimitiveKind::multicast;
  p.root = root;
  p.leaves = std::move(leaves);
  p.send = send;
  p.recv = recv;
  append(std::move(p));
  return *this;
}

CollectiveProgram& CollectiveProgram::add_reduction(const BufferRef& send,
                                                    const BufferRef& recv,
                                                    std::vector<Rank> leaves,
                                                    Rank root, ReduceOp op) {
  if (leaves.empty())
    throw Error(ErrorCode::EmptyLeafSet, "reduction with no leaves");
  Primitive p;
  p.kind = PrimitiveKind::reduction;
  p.root = root;
  p.leaves = std::move(leaves);
  p.send = send;
  p.recv = recv;
  p.op = op;
  append(std::move(p));
  return *this;
}

CollectiveProgram& CollectiveProgram::add_fence() {
  if (steps_.back().empty())
    throw Error(ErrorCode::EmptyStep, "fence on an empty step");
  steps_.emplace_back();
  step_writes_.clear();
  return *this;
}

size_t CollectiveProgram::primitive_count() const {
  size_t n = 0;
  for (const auto& s : steps_) n += s.size();
  return n;
}

namespace {

// Sorted disjoint interval set per (rank, buffer) key.
class IntervalSet {
 public:
  void add(int64_t lo, int64_t hi) {
    auto it = set_.lower_bound(lo);
    if (it != set_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= lo) it = prev;
    }
    while (it != set_.end() && it->first <= hi) {
      lo = std::min(lo, it->first);
      hi = std::max(hi, it->second);
      it = set_.erase(it);
    }
    set_.emplace(lo, hi);
  }
  bool covers(int64_t lo, int64_t hi) const {
    auto it = set_.upper_bound(lo);
    if (it == set_.begin()) return false;
    --it;
    return it->first <= lo && it->second >= hi;
  }

 private:
  std::map<int64_t, int64_t> set_;
};

struct Access {
  Rank rank;
  BufferRef range;
  int prim;
};

}  // namespace

std::vector<Violation> CollectiveProgram::validate() const {
  std::vector<Violation> out;
  auto flag = [&](ErrorCode code, int step, int prim, Rank rank,
                  const BufferRef& range, const std::string& msg) {
    Violation v;
    v.code = code;
    v.message = msg;
    v.step = step;
    v.primitive = prim;
    v.rank = rank;
    v.buffer = range.buffer;
    v.lo = range.offset;
    v.hi = range.end();
    out.push_back(std::move(v));
  };

  // A trailing fence leaves an empty last step behind; programs end
  // at their last primitive.
  if (steps_.size() > 1 && steps_.back().empty()) {
    Violation v;
    v.code = ErrorCode::EmptyStep;
    v.message = "trailing fence: last step is empty";
    v.step = (int)steps_.size() - 1;
    out.push_back(std::move(v));
  }

  // Written-so-far, keyed by (rank, buffer).
  std::map<std::pair<Rank, std::string>, IntervalSet> written;

  for (size_t si = 0; si < steps_.size(); ++si) {
    const auto& step = steps_[si];
    std::vector<Access> writes, reads;
    for (size_t pi = 0; pi < step.size(); ++pi) {
      const Primitive& p = step[pi];
      bool ok = true;
      auto check_rank = [&](Rank r) {
        if (r < 0 || r >= world_size_) {
          flag(ErrorCode::RankOutOfRange, (int)si, (int)pi, r, p.recv,
               "rank out of range");
          ok = false;
        }
      };
      check_rank(p.root);
      for (Rank r : p.leaves) check_rank(r);
      for (const BufferRef* ref : {&p.send, &p.recv}) {
        auto it = buffers_.find(ref->buffer);
        if (it == buffers_.end() || ref->offset < 0 || ref->count <= 0 ||
            ref->end() > it->second.length) {
          flag(ErrorCode::BadBufferRef, (int)si, (int)pi, p.root, *ref,
               "bad buffer range");
          ok = false;
        }
      }
      if (!ok) continue;
      for (auto& [rank, range] : primitive_writes(p))
        writes.push_back({rank, range, (int)pi});
      for (auto& [rank, range] : primitive_reads(p))
        reads.push_back({rank, range, (int)pi});
    }

    // Sweep per (rank, buffer): sorted intervals expose overlaps
    // between different primitives without a quadratic pass.
    std::map<std::pair<Rank, std::string>, std::vector<const Access*>>
        writes_by_loc;
    for (const Access& w : writes)
      writes_by_loc[{w.rank, w.range.buffer}].push_back(&w);
    for (auto& [loc, list] : writes_by_loc) {
      std::sort(list.begin(), list.end(), [](const Access* a, const Access* b) {
        return a->range.offset < b->range.offset;
      });
      const Access* open = nullptr;
      for (const Access* w : list) {
        if (open && open->range.end() > w->range.offset &&
            open->prim != w->prim)
          flag(ErrorCode::WriteWriteRace, (int)si, open->prim, open->rank,
               open->range,
               "write-write overlap with primitive " +
                   std::to_string(w->prim));
        if (!open || w->range.end() > open->range.end()) open = w;
      }
    }
    for (const Access& r : reads) {
      auto it = writes_by_loc.find({r.rank, r.range.buffer});
      if (it == writes_by_loc.end()) continue;
      for (const Access* w : it->second) {
        if (w->range.offset >= r.range.end()) break;
        if (w->prim != r.prim && w->range.overlaps(r.range)) {
          flag(ErrorCode::ReadWriteRace, (int)si, r.prim, r.rank, r.range,
               "read overlaps write of primitive " + std::to_string(w->prim));
          break;
        }
      }
    }

    // Reads must come from declared inputs or earlier-step writes.
    for (const Access& r : reads) {
      const BufferDecl& decl = buffers_.at(r.range.buffer);
      if (decl.input) continue;
      auto it = written.find({r.rank, r.range.buffer});
      if (it == written.end() ||
          !it->second.covers(r.range.offset, r.range.end()))
        flag(ErrorCode::UninitializedRead, (int)si, r.prim, r.rank, r.range,
             "read of a range never written in an earlier step");
    }

    for (const Access& w : writes)
      written[{w.rank, w.range.buffer}].add(w.range.offset, w.range.end());
  }
  return out;
}

namespace {

json ref_to_json(const BufferRef& ref) {
  return json{{"buffer", ref.buffer}, {"offset", ref.offset}, {"count", ref.count}};
}

BufferRef ref_from_json(const json& j) {
  return BufferRef{j.at("buffer").get<std::string>(),
                   j.at("offset").get<int64_t>(), j.at("count").get<int64_t>()};
}

}  // namespace

std::string CollectiveProgram::serialize() const {
  json j;
  j["format"] = "hiercoll-program-v1";
  j["world_size"] = world_size_;
  json bufs = json::array();
  for (const auto& [id, decl] : buffers_) {
    bufs.push_back(json{{"id", id},
                        {"length", decl.length},
                        {"input", decl.input},
                        {"internal", decl.internal}});
  }
  j["buffers"] = std::move(bufs);
  json steps = json::array();
  for (const auto& step : steps_) {
    json prims = json::array();
    for (const Primitive& p : step) {
      json pj;
      pj["kind"] = to_string(p.kind);
      pj["root"] = p.root;
      pj["leaves"] = p.leaves;
      pj["root_participates"] = p.root_participates;
      pj["send"] = ref_to_json(p.send);
      pj["recv"] = ref_to_json(p.recv);
      if (p.kind == PrimitiveKind::reduction) pj["op"] = to_string(p.op);
      if (p.stripe != 0) pj["stripe"] = p.stripe;
      prims.push_back(std::move(pj));
    }
    steps.push_back(std::move(prims));
  }
  j["steps"] = std::move(steps);
  return j.dump(2) + "\n";
}

CollectiveProgram CollectiveProgram::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (j.value("format", "") != "hiercoll-program-v1")
    throw Error(ErrorCode::ParseError, "not a hiercoll program file");
  CollectiveProgram prog(j.at("world_size").get<int>());
  for (const auto& b : j.at("buffers"))
    prog.declare_buffer(b.at("id").get<std::string>(),
                        b.at("length").get<int64_t>(), b.value("input", false),
                        b.value("internal", false));
  const auto& steps = j.at("steps");
  for (size_t si = 0; si < steps.size(); ++si) {
    for (const auto& pj : steps[si]) {
      Primitive p;
      p.kind = pj.at("kind").get<std::string>() == "multicast"
                   ? PrimitiveKind::multicast
                   : PrimitiveKind::reduction;
      p.root = pj.at("root").get<Rank>();
      p.leaves = pj.at("leaves").get<std::vector<Rank>>();
      p.root_participates = pj.value("root_participates", false);
      p.send = ref_from_json(pj.at("send"));
      p.recv = ref_from_json(pj.at("recv"));
      if (pj.contains("op")) p.op = reduce_op_from_string(pj.at("op"));
      p.stripe = pj.value("stripe", 0);
      prog.append_primitive(std::move(p));
    }
    if (si + 1 < steps.size()) prog.add_fence();
  }
  return prog;
}

std::string CollectiveProgram::id() const {
  const std::string text = serialize();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return std::string(buf);
}

}  // namespace hiercoll
