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

#include "hiercoll/presets.hpp"

#include <numeric>

namespace hiercoll {

namespace {
constexpr const char* kSend = "sendbuf";
constexpr const char* kRecv = "recvbuf";
constexpr const char* kTmp = "__tmp";

std::vector<Rank> all_ranks(int p) {
  std::vector<Rank> v(p);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<Rank> others(int p, Rank excluded) {
  std::vector<Rank> v;
  v.reserve(p - 1);
  for (Rank r = 0; r < p; ++r)
    if (r != excluded) v.push_back(r);
  return v;
}

BufferRef ref(const char* buf, int64_t off, int64_t count) {
  return BufferRef{buf, off, count};
}

}  // namespace

std::string to_string(CollectiveKind k) {
  switch (k) {
    case CollectiveKind::scatter: return "scatter";
    case CollectiveKind::broadcast: return "broadcast";
    case CollectiveKind::gather: return "gather";
    case CollectiveKind::reduce: return "reduce";
    case CollectiveKind::all_to_all: return "all_to_all";
    case CollectiveKind::all_gather: return "all_gather";
    case CollectiveKind::reduce_scatter: return "reduce_scatter";
    case CollectiveKind::all_reduce: return "all_reduce";
  }
  return "?";
}

CollectiveKind collective_from_string(const std::string& s) {
  for (int k = 0; k <= (int)CollectiveKind::all_reduce; ++k)
    if (to_string((CollectiveKind)k) == s) return (CollectiveKind)k;
  throw Error(ErrorCode::ParseError, "unknown collective '" + s + "'");
}

std::string to_string(Formulation f) {
  switch (f) {
    case Formulation::single: return "single";
    case Formulation::multi: return "multi";
    case Formulation::multi_alt: return "multi_alt";
  }
  return "?";
}

Formulation formulation_from_string(const std::string& s) {
  if (s == "single") return Formulation::single;
  if (s == "multi") return Formulation::multi;
  if (s == "multi_alt") return Formulation::multi_alt;
  throw Error(ErrorCode::ParseError, "unknown formulation '" + s + "'");
}

bool is_rooted(CollectiveKind k) {
  return k == CollectiveKind::scatter || k == CollectiveKind::broadcast ||
         k == CollectiveKind::gather || k == CollectiveKind::reduce;
}

CollectiveProgram build(const CollectiveSpec& spec, int p) {
  if (p < 1) throw Error(ErrorCode::RankOutOfRange, "p must be >= 1");
  if (spec.count < 1)
    throw Error(ErrorCode::BadBufferRef, "count must be >= 1");
  const Rank root = is_rooted(spec.kind) ? spec.root : 0;
  if (root < 0 || root >= p)
    throw Error(ErrorCode::RankOutOfRange, "root " + std::to_string(root));
  const int64_t d = spec.count;
  const int64_t pd = (int64_t)p * d;
  const auto U = all_ranks(p);

  Formulation form = spec.formulation;
  if (form == Formulation::multi_alt && spec.kind != CollectiveKind::all_reduce)
    throw Error(ErrorCode::UnsupportedFormulation,
                "multi_alt is only defined for all_reduce");
  if (form != Formulation::single &&
      (spec.kind == CollectiveKind::scatter ||
       spec.kind == CollectiveKind::gather ||
       spec.kind == CollectiveKind::all_to_all))
    throw Error(ErrorCode::UnsupportedFormulation,
                "no multi-step composition for " + to_string(spec.kind));
  // A lone rank leaves nothing to fence; the single-step form is the
  // same collective.
  if (p == 1) form = Formulation::single;

  CollectiveProgram prog(p);
  switch (spec.kind) {
    case CollectiveKind::scatter: {
      prog.declare_buffer(kSend, pd, true).declare_buffer(kRecv, d);
      for (Rank j = 0; j < p; ++j)
        prog.add_reduction(ref(kSend, j * d, d), ref(kRecv, 0, d), {root}, j,
                           spec.op);
      break;
    }
    case CollectiveKind::broadcast: {
      prog.declare_buffer(kSend, pd, true).declare_buffer(kRecv, pd);
      if (form == Formulation::single) {
        prog.add_multicast(ref(kSend, 0, pd), ref(kRecv, 0, pd), root, U);
      } else {
        // Scatter, fence, all-gather in place.
        for (Rank j = 0; j < p; ++j)
          prog.add_reduction(ref(kSend, j * d, d), ref(kRecv, j * d, d),
                             {root}, j, spec.op);
        prog.add_fence();
        for (Rank i = 0; i < p; ++i)
          prog.add_multicast(ref(kRecv, i * d, d), ref(kRecv, i * d, d), i,
                             others(p, i));
      }
      break;
    }
    case CollectiveKind::gather: {
      prog.declare_buffer(kSend, d, true).declare_buffer(kRecv, pd);
      for (Rank i = 0; i < p; ++i)
        prog.add_multicast(ref(kSend, 0, d), ref(kRecv, i * d, d), i, {root});
      break;
    }
    case CollectiveKind::reduce: {
      prog.declare_buffer(kSend, pd, true).declare_buffer(kRecv, pd);
      if (form == Formulation::single) {
        prog.add_reduction(ref(kSend, 0, pd), ref(kRecv, 0, pd), U, root,
                           spec.op);
      } else {
        // Reduce-scatter into staging, fence, gather to the root.
        prog.declare_buffer(kTmp, d, false, true);
        for (Rank j = 0; j < p; ++j)
          prog.add_reduction(ref(kSend, j * d, d), ref(kTmp, 0, d), U, j,
                             spec.op);
        prog.add_fence();
        for (Rank j = 0; j < p; ++j)
          prog.add_multicast(ref(kTmp, 0, d), ref(kRecv, j * d, d), j, {root});
      }
      break;
    }
    case CollectiveKind::all_to_all: {
      prog.declare_buffer(kSend, pd, true).declare_buffer(kRecv, pd);
      for (Rank i = 0; i < p; ++i)
        for (Rank j = 0; j < p; ++j)
          prog.add_multicast(ref(kSend, j * d, d), ref(kRecv, i * d, d), i,
                             {j});
      break;
    }
    case CollectiveKind::all_gather: {
      prog.declare_buffer(kSend, d, true).declare_buffer(kRecv, pd);
      if (form == Formulation::single) {
        for (Rank i = 0; i < p; ++i)
          prog.add_multicast(ref(kSend, 0, d), ref(kRecv, i * d, d), i, U);
      } else {
        // Gather to rank 0, fence, broadcast in place.
        for (Rank i = 0; i < p; ++i)
          prog.add_multicast(ref(kSend, 0, d), ref(kRecv, i * d, d), i, {0});
        prog.add_fence();
        prog.add_multicast(ref(kRecv, 0, pd), ref(kRecv, 0, pd), 0,
                           others(p, 0));
      }
      break;
    }
    case CollectiveKind::reduce_scatter: {
      prog.declare_buffer(kSend, pd, true).declare_buffer(kRecv, pd);
      if (form == Formulation::single) {
        for (Rank j = 0; j < p; ++j)
          prog.add_reduction(ref(kSend, j * d, d), ref(kRecv, j * d, d), U, j,
                             spec.op);
      } else {
        // Reduce to rank 0, fence, scatter.
        prog.declare_buffer(kTmp, pd, false, true);
        prog.add_reduction(ref(kSend, 0, pd), ref(kTmp, 0, pd), U, 0, spec.op);
        prog.add_fence();
        for (Rank j = 0; j < p; ++j)
          prog.add_reduction(ref(kTmp, j * d, d), ref(kRecv, j * d, d), {0}, j,
                             spec.op);
      }
      break;
    }
    case CollectiveKind::all_reduce: {
      prog.declare_buffer(kSend, pd, true).declare_buffer(kRecv, pd);
      if (form == Formulation::single) {
        for (Rank j = 0; j < p; ++j)
          prog.add_reduction(ref(kSend, 0, pd), ref(kRecv, 0, pd), U, j,
                             spec.op);
      } else if (form == Formulation::multi) {
        // Reduce-scatter, fence, all-gather in place.
        for (Rank j = 0; j < p; ++j)
          prog.add_reduction(ref(kSend, j * d, d), ref(kRecv, j * d, d), U, j,
                             spec.op);
        prog.add_fence();
        for (Rank i = 0; i < p; ++i)
          prog.add_multicast(ref(kRecv, i * d, d), ref(kRecv, i * d, d), i,
                             others(p, i));
      } else {
        // Reduce to rank 0, fence, broadcast in place.
        prog.add_reduction(ref(kSend, 0, pd), ref(kRecv, 0, pd), U, 0,
                           spec.op);
        prog.add_fence();
        prog.add_multicast(ref(kRecv, 0, pd), ref(kRecv, 0, pd), 0,
                           others(p, 0));
      }
      break;
    }
  }
  return prog;
}

SymbolicState reference_semantics(const CollectiveSpec& spec, int p) {
  if (p < 1) throw Error(ErrorCode::RankOutOfRange, "p must be >= 1");
  const Rank root = is_rooted(spec.kind) ? spec.root : 0;
  const int64_t d = spec.count;
  const int64_t pd = (int64_t)p * d;

  std::map<std::string, BufferDecl> bufs;
  const bool small_send = spec.kind == CollectiveKind::gather ||
                          spec.kind == CollectiveKind::all_gather;
  const bool small_recv = spec.kind == CollectiveKind::scatter;
  bufs[kSend] = BufferDecl{small_send ? d : pd, true, false};
  bufs[kRecv] = BufferDecl{small_recv ? d : pd, false, false};
  SymbolicState st = SymbolicState::initial(p, bufs);

  auto sum_over_origins = [&](int64_t index) {
    std::vector<SymbolicValue> parts;
    parts.reserve(p);
    for (Rank i = 0; i < p; ++i)
      parts.push_back(SymbolicValue::atom(i, kSend, index));
    return SymbolicValue::reduced(spec.op, std::move(parts));
  };

  switch (spec.kind) {
    case CollectiveKind::scatter:
      for (Rank j = 0; j < p; ++j)
        for (int64_t e = 0; e < d; ++e)
          st.set(j, kRecv, e, SymbolicValue::atom(root, kSend, j * d + e));
      break;
    case CollectiveKind::broadcast:
      for (Rank r = 0; r < p; ++r)
        for (int64_t x = 0; x < pd; ++x)
          st.set(r, kRecv, x, SymbolicValue::atom(root, kSend, x));
      break;
    case CollectiveKind::gather:
      for (Rank i = 0; i < p; ++i)
        for (int64_t e = 0; e < d; ++e)
          st.set(root, kRecv, i * d + e, SymbolicValue::atom(i, kSend, e));
      break;
    case CollectiveKind::reduce:
      for (int64_t x = 0; x < pd; ++x)
        st.set(root, kRecv, x, sum_over_origins(x));
      break;
    case CollectiveKind::all_to_all:
      for (Rank i = 0; i < p; ++i)
        for (Rank j = 0; j < p; ++j)
          for (int64_t e = 0; e < d; ++e)
            st.set(j, kRecv, i * d + e,
                   SymbolicValue::atom(i, kSend, j * d + e));
      break;
    case CollectiveKind::all_gather:
      for (Rank r = 0; r < p; ++r)
        for (Rank i = 0; i < p; ++i)
          for (int64_t e = 0; e < d; ++e)
            st.set(r, kRecv, i * d + e, SymbolicValue::atom(i, kSend, e));
      break;
    case CollectiveKind::reduce_scatter:
      for (Rank j = 0; j < p; ++j)
        for (int64_t e = 0; e < d; ++e)
          st.set(j, kRecv, j * d + e, sum_over_origins(j * d + e));
      break;
    case CollectiveKind::all_reduce:
      for (Rank r = 0; r < p; ++r)
        for (int64_t x = 0; x < pd; ++x)
          st.set(r, kRecv, x, sum_over_origins(x));
      break;
  }
  return st;
}

}  // namespace hiercoll
