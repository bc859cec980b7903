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

#include "hiercoll/types.hpp"

namespace hiercoll {

enum class PrimitiveKind : uint8_t { multicast, reduction };

std::string to_string(PrimitiveKind k);

/// One registered communication primitive.
///
/// A multicast replicates the root's `send` range into the `recv`
/// range of every leaf; a reduction folds the leaves' `send` ranges
/// into the root's `recv` range with `op`.
///
/// The leaf vector passed at registration may contain the root (the
/// algebraic forms use the full participant set). It is normalized
/// here: `leaves` never contains the root and `root_participates`
/// records whether the root also receives (multicast) or contributes
/// (reduction).
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::multicast;
  Rank root = 0;
  std::vector<Rank> leaves;  // sorted, root excluded
  bool root_participates = false;
  BufferRef send;
  BufferRef recv;
  ReduceOp op = ReduceOp::sum;  // reductions only
  int stripe = 0;  // lane tag set when striping derives this primitive

  /// Root's send and recv ranges alias the same elements (in-place).
  bool in_place() const { return send.same_range(recv); }
};

struct BufferDecl {
  int64_t length = 0;  // elements, per rank
  bool input = false;  // pre-filled with this rank's initial data
  bool internal = false;  // staging storage introduced by transforms
};

/// A machine-agnostic collective specification: an ordered list of
/// steps, each a set of primitives executed in parallel, separated by
/// fences. Mutable while being built; treat as immutable once
/// validated.
class CollectiveProgram {
 public:
  explicit CollectiveProgram(int world_size);

  int world_size() const { return world_size_; }
  const std::map<std::string, BufferDecl>& buffers() const { return buffers_; }
  const std::vector<std::vector<Primitive>>& steps() const { return steps_; }

  CollectiveProgram& declare_buffer(const std::string& id, int64_t length,
                                    bool input = false, bool internal = false);

  /// Appends a multicast to the current step. `leaves` may include
  /// `root`; duplicates are ignored. Throws EmptyLeafSet,
  /// RankOutOfRange, BadBufferRef, or WriteWriteRace.
  CollectiveProgram& add_multicast(const BufferRef& send, const BufferRef& recv,
                                   Rank root, std::vector<Rank> leaves);

  /// Appends a reduction; data flows leaves -> root.
  CollectiveProgram& add_reduction(const BufferRef& send, const BufferRef& recv,
                                   std::vector<Rank> leaves, Rank root,
                                   ReduceOp op);

  /// Closes the current step. Throws EmptyStep if no primitive was
  /// registered since the previous fence.
  CollectiveProgram& add_fence();

  /// Registration path used by program transforms: accepts a
  /// primitive that may already be normalized (leaves excluding the
  /// root plus the participation flag) and may have empty leaves when
  /// the root itself participates. Runs the same checks as the add_*
  /// builders.
  CollectiveProgram& append_primitive(Primitive prim);

  /// Full diagnostics pass: range checks, intra-step write-write and
  /// read-write overlaps, reads of ranges that are neither declared
  /// inputs nor written by an earlier step.
  std::vector<Violation> validate() const;

  std::string serialize() const;
  static CollectiveProgram deserialize(const std::string& text);

  /// FNV-1a of the serialized form; used to tag derived plans.
  std::string id() const;

  size_t primitive_count() const;

 private:
  void check_ref(const BufferRef& ref) const;
  void append(Primitive prim);

  int world_size_;
  std::map<std::string, BufferDecl> buffers_;
  std::vector<std::vector<Primitive>> steps_;
  // write intervals of the open step, for the eager race check
  std::map<std::pair<Rank, std::string>, std::map<int64_t, int64_t>>
      step_writes_;
};

/// Write set of a primitive as (rank, range) pairs.
std::vector<std::pair<Rank, BufferRef>> primitive_writes(const Primitive& p);
/// Read set of a primitive as (rank, range) pairs.
std::vector<std::pair<Rank, BufferRef>> primitive_reads(const Primitive& p);

}  // namespace hiercoll
