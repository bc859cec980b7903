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
#include <optional>
#include <string>
#include <vector>

#include "hiercoll/composition.hpp"
#include "hiercoll/types.hpp"

namespace hiercoll {

struct StagedPlan;
struct PipelinedPlan;

/// Formal value tracking copy/reduce provenance of one buffer element.
/// Either bottom (never written), an atom identifying the origin
/// element, or a canonicalized multiset of values folded with one
/// operator. Canonical form: Reduced nodes are flattened over the
/// same op and sorted; under max, duplicates collapse (idempotence);
/// a singleton multiset unwraps to its element.
class SymbolicValue {
 public:
  enum class Kind : uint8_t { bottom, atom, reduced };

  SymbolicValue() = default;
  static SymbolicValue atom(Rank origin, const std::string& buffer,
                            int64_t index);
  static SymbolicValue reduced(ReduceOp op, std::vector<SymbolicValue> parts);

  Kind kind() const { return kind_; }
  bool is_bottom() const { return kind_ == Kind::bottom; }

  /// Canonicalized fold of two non-bottom values.
  static SymbolicValue fold(ReduceOp op, const SymbolicValue& a,
                            const SymbolicValue& b);

  bool operator==(const SymbolicValue& o) const;
  bool operator<(const SymbolicValue& o) const;

  std::string to_string() const;

 private:
  Kind kind_ = Kind::bottom;
  // atom payload; buffer names are interned process-wide
  Rank origin_ = -1;
  int32_t buffer_ = -1;
  int64_t index_ = 0;
  // reduced payload
  ReduceOp op_ = ReduceOp::sum;
  std::vector<SymbolicValue> parts_;
};

/// Per-rank, per-buffer vectors of symbolic values.
class SymbolicState {
 public:
  SymbolicState() = default;

  /// Initial state for a program: input buffers hold their owning
  /// rank's atoms, the rest bottom.
  static SymbolicState initial(int world_size,
                               const std::map<std::string, BufferDecl>& buffers);

  int world_size() const { return world_size_; }
  const std::map<std::string, BufferDecl>& buffers() const { return decls_; }

  const SymbolicValue& at(Rank rank, const std::string& buffer,
                          int64_t index) const;
  void set(Rank rank, const std::string& buffer, int64_t index,
           SymbolicValue value);

  /// Read for a transfer/primitive: throws UninitializedRead on bottom.
  const SymbolicValue& read(Rank rank, const std::string& buffer,
                            int64_t index) const;

  /// Whole per-rank vector of one buffer (fast path for executors).
  std::vector<SymbolicValue>& vec(Rank rank, const std::string& buffer);
  const std::vector<SymbolicValue>& vec(Rank rank,
                                        const std::string& buffer) const;

 private:
  int world_size_ = 0;
  std::map<std::string, BufferDecl> decls_;
  // [buffer][rank] -> values
  std::map<std::string, std::vector<std::vector<SymbolicValue>>> data_;
};

struct Divergence {
  Rank rank;
  std::string buffer;
  int64_t index;
  std::string expected;
  std::string actual;
  std::string to_string() const;
};

/// Structural equality over user-visible buffers (internal staging
/// buffers are skipped unless compare_internal). On mismatch returns
/// the first divergence in (buffer, rank, index) order.
std::optional<Divergence> states_equal(const SymbolicState& expected,
                                       const SymbolicState& actual,
                                       bool compare_internal = false);

/// Executes a validated program step by step.
SymbolicState execute_program(const CollectiveProgram& program);

/// Executes a lowered plan transfer by transfer in (stage, canonical)
/// order; reduce-into transfers fold at the destination.
SymbolicState execute_plan(const StagedPlan& plan);
/// Same, in (slot, canonical) order with the plan's channel chunks.
SymbolicState execute_plan(const PipelinedPlan& plan);

}  // namespace hiercoll
