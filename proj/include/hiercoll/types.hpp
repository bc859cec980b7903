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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hiercoll {

/// GPU endpoint index, 0 <= value < world size.
using Rank = int;

enum class ReduceOp : uint8_t { sum, max };

std::string to_string(ReduceOp op);
ReduceOp reduce_op_from_string(const std::string& s);

/// A contiguous element range inside a per-rank buffer. Element
/// granularity only; bytes enter the picture at simulation time via
/// the machine's element_size.
struct BufferRef {
  std::string buffer;
  int64_t offset = 0;
  int64_t count = 0;

  int64_t end() const { return offset + count; }
  bool same_range(const BufferRef& o) const {
    return buffer == o.buffer && offset == o.offset && count == o.count;
  }
  bool overlaps(const BufferRef& o) const {
    return buffer == o.buffer && offset < o.end() && o.offset < end();
  }
};

enum class ErrorCode {
  EmptyLeafSet,
  RankOutOfRange,
  EmptyStep,
  WriteWriteRace,
  ReadWriteRace,
  BadBufferRef,
  UnsupportedFormulation,
  InvalidMachine,
  InvalidConfig,
  UninitializedRead,
  DependencyViolation,
  NoInterNodeBound,
  ParseError,
};

std::string to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(to_string(code) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Diagnostic returned (not thrown) by validate() / validate_machine().
struct Violation {
  ErrorCode code;
  std::string message;
  int step = -1;       // program step, when applicable
  int primitive = -1;  // index within the step, when applicable
  Rank rank = -1;
  std::string buffer;
  int64_t lo = 0, hi = 0;  // offending element range
};

/// Balanced partition: splits `count` into `parts` chunks whose sizes
/// differ by at most one; the first (count % parts) chunks get the
/// extra element. Returns the [offset, offset+size) of chunk `index`
/// relative to the start of the range.
struct SplitRange {
  int64_t offset;
  int64_t count;
};
inline SplitRange balanced_split(int64_t count, int parts, int index) {
  const int64_t q = count / parts;
  const int64_t r = count % parts;
  const int64_t off = index * q + (index < r ? index : r);
  const int64_t len = q + (index < r ? 1 : 0);
  return {off, len};
}

}  // namespace hiercoll
