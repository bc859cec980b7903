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

#include "hiercoll/engine.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_map>

#include "hiercoll/factorize.hpp"
#include "hiercoll/pipeline.hpp"

namespace hiercoll {

namespace {

// Process-wide buffer-name table so atoms compare by small ids.
std::mutex g_intern_mu;
std::unordered_map<std::string, int32_t> g_intern_ids;
std::vector<std::string> g_intern_names;

int32_t intern(const std::string& name) {
  std::lock_guard<std::mutex> lock(g_intern_mu);
  auto [it, inserted] = g_intern_ids.emplace(name, (int32_t)g_intern_names.size());
  if (inserted) g_intern_names.push_back(name);
  return it->second;
}

const std::string& intern_name(int32_t id) {
  std::lock_guard<std::mutex> lock(g_intern_mu);
  return g_intern_names.at(id);
}

}  // namespace

SymbolicValue SymbolicValue::atom(Rank origin, const std::string& buffer,
                                  int64_t index) {
  SymbolicValue v;
  v.kind_ = Kind::atom;
  v.origin_ = origin;
  v.buffer_ = intern(buffer);
  v.index_ = index;
  return v;
}

SymbolicValue SymbolicValue::reduced(ReduceOp op,
                                     std::vector<SymbolicValue> parts) {
  // Flatten nested folds of the same op, order the multiset, collapse
  // duplicates under max, unwrap singletons.
  std::vector<SymbolicValue> flat;
  for (SymbolicValue& p : parts) {
    if (p.kind_ == Kind::reduced && p.op_ == op) {
      for (SymbolicValue& q : p.parts_) flat.push_back(std::move(q));
    } else {
      flat.push_back(std::move(p));
    }
  }
  std::sort(flat.begin(), flat.end());
  if (op == ReduceOp::max)
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
  if (flat.size() == 1) return std::move(flat.front());
  SymbolicValue v;
  v.kind_ = Kind::reduced;
  v.op_ = op;
  v.parts_ = std::move(flat);
  return v;
}

SymbolicValue SymbolicValue::fold(ReduceOp op, const SymbolicValue& a,
                                  const SymbolicValue& b) {
  // Both inputs are canonical, so their part lists are sorted; merge
  // instead of re-sorting.
  auto parts_of = [op](const SymbolicValue& v) {
    static const std::vector<SymbolicValue> empty;
    if (v.kind_ == Kind::reduced && v.op_ == op) return &v.parts_;
    return (const std::vector<SymbolicValue>*)nullptr;
  };
  const std::vector<SymbolicValue>* pa = parts_of(a);
  const std::vector<SymbolicValue>* pb = parts_of(b);
  std::vector<SymbolicValue> singleton_a, singleton_b;
  if (!pa) {
    singleton_a.push_back(a);
    pa = &singleton_a;
  }
  if (!pb) {
    singleton_b.push_back(b);
    pb = &singleton_b;
  }
  std::vector<SymbolicValue> merged;
  merged.reserve(pa->size() + pb->size());
  std::merge(pa->begin(), pa->end(), pb->begin(), pb->end(),
             std::back_inserter(merged));
  if (op == ReduceOp::max)
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  if (merged.size() == 1) return std::move(merged.front());
  SymbolicValue v;
  v.kind_ = Kind::reduced;
  v.op_ = op;
  v.parts_ = std::move(merged);
  return v;
}

bool SymbolicValue::operator==(const SymbolicValue& o) const {
  if (kind_ != o.kind_) return false;
  switch (kind_) {
    case Kind::bottom: return true;
    case Kind::atom:
      return origin_ == o.origin_ && buffer_ == o.buffer_ &&
             index_ == o.index_;
    case Kind::reduced: return op_ == o.op_ && parts_ == o.parts_;
  }
  return false;
}

bool SymbolicValue::operator<(const SymbolicValue& o) const {
  if (kind_ != o.kind_) return kind_ < o.kind_;
  switch (kind_) {
    case Kind::bottom: return false;
    case Kind::atom:
      if (origin_ != o.origin_) return origin_ < o.origin_;
      if (buffer_ != o.buffer_) return buffer_ < o.buffer_;
      return index_ < o.index_;
    case Kind::reduced:
      if (op_ != o.op_) return op_ < o.op_;
      return parts_ < o.parts_;
  }
  return false;
}

std::string SymbolicValue::to_string() const {
  switch (kind_) {
    case Kind::bottom: return "_";
    case Kind::atom:
      return intern_name(buffer_) + "[" + std::to_string(index_) + "]@" +
             std::to_string(origin_);
    case Kind::reduced: {
      std::string s = hiercoll::to_string(op_) + "{";
      for (size_t i = 0; i < parts_.size(); ++i) {
        if (i) s += ", ";
        s += parts_[i].to_string();
      }
      return s + "}";
    }
  }
  return "?";
}

SymbolicState SymbolicState::initial(
    int world_size, const std::map<std::string, BufferDecl>& buffers) {
  SymbolicState st;
  st.world_size_ = world_size;
  st.decls_ = buffers;
  for (const auto& [id, decl] : buffers) {
    auto& per_rank = st.data_[id];
    per_rank.resize(world_size);
    for (Rank r = 0; r < world_size; ++r) {
      per_rank[r].resize(decl.length);
      if (decl.input)
        for (int64_t i = 0; i < decl.length; ++i)
          per_rank[r][i] = SymbolicValue::atom(r, id, i);
    }
  }
  return st;
}

const SymbolicValue& SymbolicState::at(Rank rank, const std::string& buffer,
                                       int64_t index) const {
  return vec(rank, buffer).at(index);
}

void SymbolicState::set(Rank rank, const std::string& buffer, int64_t index,
                        SymbolicValue value) {
  vec(rank, buffer).at(index) = std::move(value);
}

std::vector<SymbolicValue>& SymbolicState::vec(Rank rank,
                                               const std::string& buffer) {
  auto it = data_.find(buffer);
  if (it == data_.end())
    throw Error(ErrorCode::BadBufferRef, "unknown buffer '" + buffer + "'");
  return it->second.at(rank);
}

const std::vector<SymbolicValue>& SymbolicState::vec(
    Rank rank, const std::string& buffer) const {
  auto it = data_.find(buffer);
  if (it == data_.end())
    throw Error(ErrorCode::BadBufferRef, "unknown buffer '" + buffer + "'");
  return it->second.at(rank);
}

const SymbolicValue& SymbolicState::read(Rank rank, const std::string& buffer,
                                         int64_t index) const {
  const SymbolicValue& v = at(rank, buffer, index);
  if (v.is_bottom())
    throw Error(ErrorCode::UninitializedRead,
                "rank " + std::to_string(rank) + " " + buffer + "[" +
                    std::to_string(index) + "]");
  return v;
}

std::string Divergence::to_string() const {
  return "rank " + std::to_string(rank) + " " + buffer + "[" +
         std::to_string(index) + "]: expected " + expected + ", actual " +
         actual;
}

std::optional<Divergence> states_equal(const SymbolicState& expected,
                                       const SymbolicState& actual,
                                       bool compare_internal) {
  for (const auto& [id, decl] : expected.buffers()) {
    if (decl.internal && !compare_internal) continue;
    auto it = actual.buffers().find(id);
    const BufferDecl* adecl = it == actual.buffers().end() ? nullptr : &it->second;
    for (Rank r = 0; r < expected.world_size(); ++r) {
      for (int64_t i = 0; i < decl.length; ++i) {
        const SymbolicValue& e = expected.at(r, id, i);
        const SymbolicValue a = (adecl && i < adecl->length)
                                    ? actual.at(r, id, i)
                                    : SymbolicValue();
        if (!(e == a))
          return Divergence{r, id, i, e.to_string(), a.to_string()};
      }
    }
  }
  return std::nullopt;
}

SymbolicState execute_program(const CollectiveProgram& program) {
  SymbolicState st =
      SymbolicState::initial(program.world_size(), program.buffers());
  for (const auto& step : program.steps()) {
    for (const Primitive& p : step) {
      if (p.kind == PrimitiveKind::multicast) {
        const auto& src = st.vec(p.root, p.send.buffer);
        for (int64_t i = 0; i < p.send.count; ++i) {
          const SymbolicValue& v = src.at(p.send.offset + i);
          if (v.is_bottom())
            throw Error(ErrorCode::UninitializedRead,
                        "rank " + std::to_string(p.root) + " " +
                            p.send.buffer + "[" +
                            std::to_string(p.send.offset + i) + "]");
          for (Rank leaf : p.leaves)
            st.vec(leaf, p.recv.buffer).at(p.recv.offset + i) = v;
          if (p.root_participates)
            st.vec(p.root, p.recv.buffer).at(p.recv.offset + i) = v;
        }
      } else {
        for (int64_t i = 0; i < p.send.count; ++i) {
          std::vector<SymbolicValue> parts;
          for (Rank leaf : p.leaves)
            parts.push_back(st.read(leaf, p.send.buffer, p.send.offset + i));
          if (p.root_participates)
            parts.push_back(st.read(p.root, p.send.buffer, p.send.offset + i));
          if (parts.empty()) continue;
          st.set(p.root, p.recv.buffer, p.recv.offset + i,
                 SymbolicValue::reduced(p.op, std::move(parts)));
        }
      }
    }
  }
  return st;
}

namespace {

struct TransferView {
  const P2PTransfer* t;
  int order_major;  // stage or slot
};

SymbolicState run_transfers(int world_size,
                            const std::map<std::string, BufferDecl>& buffers,
                            std::vector<TransferView> views) {
  std::stable_sort(views.begin(), views.end(),
                   [](const TransferView& a, const TransferView& b) {
                     if (a.order_major != b.order_major)
                       return a.order_major < b.order_major;
                     return a.t->id < b.t->id;
                   });
  SymbolicState st = SymbolicState::initial(world_size, buffers);
  std::vector<char> done;
  size_t max_id = 0;
  for (const auto& v : views) max_id = std::max(max_id, (size_t)v.t->id);
  done.resize(max_id + 1, 0);

  for (const auto& view : views) {
    const P2PTransfer& t = *view.t;
    for (int dep : t.deps)
      if (dep >= 0 && dep < (int)done.size() && !done[dep])
        throw Error(ErrorCode::DependencyViolation,
                    "transfer " + std::to_string(t.id) + " ran before dep " +
                        std::to_string(dep));
    const auto& src = st.vec(t.src, t.src_buffer);
    auto& dst = st.vec(t.dst, t.dst_buffer);
    for (int64_t i = 0; i < t.count; ++i) {
      const SymbolicValue& v = src.at(t.src_offset + i);
      if (v.is_bottom())
        throw Error(ErrorCode::UninitializedRead,
                    "rank " + std::to_string(t.src) + " " + t.src_buffer +
                        "[" + std::to_string(t.src_offset + i) + "]");
      SymbolicValue& cur = dst.at(t.dst_offset + i);
      if (t.reduce) {
        if (cur.is_bottom())
          throw Error(ErrorCode::UninitializedRead,
                      "accumulator rank " + std::to_string(t.dst) + " " +
                          t.dst_buffer + "[" +
                          std::to_string(t.dst_offset + i) + "]");
        cur = SymbolicValue::fold(t.op, cur, v);
      } else {
        cur = v;
      }
    }
    done[t.id] = 1;
  }
  return st;
}

}  // namespace

SymbolicState execute_plan(const StagedPlan& plan) {
  std::vector<TransferView> views;
  views.reserve(plan.transfers.size());
  for (const auto& t : plan.transfers) views.push_back({&t, t.stage});
  return run_transfers(plan.world_size, plan.buffers, std::move(views));
}

SymbolicState execute_plan(const PipelinedPlan& plan) {
  std::vector<TransferView> views;
  views.reserve(plan.base.transfers.size());
  for (const auto& t : plan.base.transfers) views.push_back({&t, t.slot});
  return run_transfers(plan.base.world_size, plan.base.buffers,
                       std::move(views));
}

}  // namespace hiercoll
