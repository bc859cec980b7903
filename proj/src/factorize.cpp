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

#include "hiercoll/factorize.hpp"

#include <algorithm>
#include <cassert>
#include <nlohmann/json.hpp>
#include <set>
#include <tuple>

namespace hiercoll {

using json = nlohmann::ordered_json;

namespace {

struct Loc {
  std::string buf;
  int64_t off = 0;
};

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string prim_fingerprint(int step, const Primitive& p) {
  std::string s = std::to_string(step) + "|" + to_string(p.kind) + "|" +
                  std::to_string(p.root) + "|" + p.send.buffer + ":" +
                  std::to_string(p.send.offset) + "+" +
                  std::to_string(p.send.count) + "|" + p.recv.buffer + ":" +
                  std::to_string(p.recv.offset) + "|" +
                  std::to_string((int)p.op) + "|" +
                  std::to_string(p.root_participates);
  for (Rank r : p.leaves) s += "," + std::to_string(r);
  char buf[17];
  snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a(s));
  return buf;
}

// Lowers one primitive to transfers with primitive-relative stages.
// Accumulator writers are tracked so that exactly one writer per
// fresh accumulator becomes the initializing copy.
class PrimitiveLowering {
 public:
  PrimitiveLowering(const Primitive& prim, const MachineDescriptor& m,
                    int prim_stripe)
      : prim_(prim), m_(m), stripe_(prim_stripe), levels_(m.num_levels()) {}

  // `acc_buffer_name` names per-rank staging introduced for
  // intermediate reduction partials; shared decls collected by the
  // caller.
  std::vector<P2PTransfer> run(int ring_n, std::string acc_buffer_name,
                               std::map<std::string, BufferDecl>* extra_bufs) {
    acc_buf_ = std::move(acc_buffer_name);
    send_loc_ = {prim_.send.buffer, prim_.send.offset};
    recv_loc_ = {prim_.recv.buffer, prim_.recv.offset};
    count_ = prim_.recv.count;

    if (prim_.kind == PrimitiveKind::multicast) {
      lower_multicast(ring_n);
    } else {
      lower_reduction(ring_n);
    }
    finalize_accumulators();
    compact_stages();
    if (used_acc_ && extra_bufs)
      (*extra_bufs)[acc_buf_] = BufferDecl{count_, false, true};
    return std::move(out_);
  }

 private:
  int emit(Rank src, const Loc& sloc, Rank dst, const Loc& dloc, bool reduce,
           int stage) {
    P2PTransfer t;
    t.src = src;
    t.dst = dst;
    t.src_buffer = sloc.buf;
    t.src_offset = sloc.off;
    t.dst_buffer = dloc.buf;
    t.dst_offset = dloc.off;
    t.count = count_;
    t.reduce = reduce;
    t.op = prim_.op;
    t.stage = stage;
    t.level = src == dst ? levels_ : m_.crossing_level(src, dst);
    t.stripe = stripe_;
    out_.push_back(std::move(t));
    return (int)out_.size() - 1;
  }

  Loc acc_loc() const { return {acc_buf_, 0}; }

  void note_acc_writer(Rank rank, const Loc& loc, int idx) {
    acc_writers_[{rank, loc.buf}].push_back(idx);
  }

  // ---- multicast ----

  void lower_multicast(int ring_n) {
    if (prim_.root_participates && !prim_.in_place())
      emit(prim_.root, send_loc_, prim_.root, recv_loc_, false, 0);
    const auto& targets = prim_.leaves;
    if (targets.empty()) return;

    if (ring_n > 1) {
      const int block = m_.world_size() / ring_n;
      bool crossing = false;
      for (Rank t : targets)
        if (t / block != prim_.root / block) crossing = true;
      if (crossing) {
        ring_multicast(targets, ring_n);
        return;
      }
    }
    mcast_down(prim_.root, send_loc_, targets, 1, [](int depth) {
      return depth - 1;
    });
  }

  template <typename StageFn>
  void mcast_down(Rank sender, const Loc& src, std::vector<Rank> targets,
                  int depth, StageFn stage_of) {
    if (targets.empty() || depth > levels_) return;
    // Partition by the subgroup at this depth; the sender keeps its
    // own subgroup, every other subgroup containing targets gets one
    // copy sent to its representative.
    std::map<int, std::vector<Rank>> groups;
    for (Rank t : targets) groups[m_.group_index(t, depth)].push_back(t);
    const int own = m_.group_index(sender, depth);
    for (auto& [gid, members] : groups) {
      if (gid == own) {
        mcast_down(sender, src, members, depth + 1, stage_of);
      } else {
        const Rank rep = members[stripe_ % members.size()];
        emit(sender, src, rep, recv_loc_, false, stage_of(depth));
        members.erase(std::find(members.begin(), members.end(), rep));
        mcast_down(rep, recv_loc_, std::move(members), depth + 1, stage_of);
      }
    }
  }

  void ring_multicast(const std::vector<Rank>& targets, int n) {
    const int block = m_.world_size() / n;
    auto chain = chain_blocks(targets, n);
    const int len = (int)chain.size();
    const int block_depth = depth_of_block(block);

    // Chain hops, then one assembly tree per block after the last hop.
    std::vector<Rank> reps(len);
    std::vector<Loc> locs(len);
    reps[0] = prim_.root;
    locs[0] = send_loc_;
    for (int i = 1; i < len; ++i) {
      const auto& members = chain[i].second;
      reps[i] = members[stripe_ % members.size()];
      emit(reps[i - 1], locs[i - 1], reps[i], recv_loc_, false, i - 1);
      locs[i] = recv_loc_;
    }
    const int base = len - 1;
    for (int i = 0; i < len; ++i) {
      std::vector<Rank> local = chain[i].second;
      local.erase(std::remove(local.begin(), local.end(), reps[i]),
                  local.end());
      mcast_down(reps[i], locs[i], std::move(local), block_depth + 1,
                 [&](int depth) { return base + depth - block_depth - 1; });
    }
  }

  // ---- reduction ----

  void lower_reduction(int ring_n) {
    const bool preinit = prim_.root_participates && prim_.in_place();
    const auto& contribs = prim_.leaves;

    if (ring_n > 1 && !contribs.empty()) {
      const int block = m_.world_size() / ring_n;
      bool crossing = false;
      for (Rank c : contribs)
        if (c / block != prim_.root / block) crossing = true;
      if (crossing) {
        ring_reduction(contribs, ring_n);
        finish_root_acc(preinit);
        return;
      }
    }
    reduce_up(prim_.root, recv_loc_, contribs, 1,
              [this](int depth) { return levels_ - depth; });
    finish_root_acc(preinit);
  }

  void finish_root_acc(bool preinit) {
    if (prim_.root_participates && !preinit) {
      int idx = emit(prim_.root, send_loc_, prim_.root, recv_loc_, true, 0);
      note_acc_writer(prim_.root, recv_loc_, idx);
    }
    if (preinit) preinit_accs_.insert({prim_.root, recv_loc_.buf});
  }

  template <typename StageFn>
  void reduce_up(Rank collector, const Loc& acc, std::vector<Rank> contribs,
                 int depth, StageFn stage_of) {
    if (contribs.empty() || depth > levels_) return;
    std::map<int, std::vector<Rank>> groups;
    for (Rank c : contribs) groups[m_.group_index(c, depth)].push_back(c);
    const int own = m_.group_index(collector, depth);
    for (auto& [gid, members] : groups) {
      if (gid == own) {
        reduce_up(collector, acc, members, depth + 1, stage_of);
        continue;
      }
      if (members.size() == 1) {
        // A lone contributor feeds the collector straight from its
        // send range; no staging needed.
        int idx = emit(members[0], send_loc_, collector, acc, true,
                       stage_of(depth));
        note_acc_writer(collector, acc, idx);
        continue;
      }
      const Rank rep = members[stripe_ % members.size()];
      members.erase(std::find(members.begin(), members.end(), rep));
      used_acc_ = true;
      const Loc sub = acc_loc();
      int self = emit(rep, send_loc_, rep, sub, true, stage_of(levels_));
      note_acc_writer(rep, sub, self);
      reduce_up(rep, sub, std::move(members), depth + 1, stage_of);
      int idx = emit(rep, sub, collector, acc, true, stage_of(depth));
      note_acc_writer(collector, acc, idx);
    }
  }

  void ring_reduction(const std::vector<Rank>& contribs, int n) {
    const int block = m_.world_size() / n;
    auto chain = chain_blocks(contribs, n);
    const int len = (int)chain.size();
    const int block_depth = depth_of_block(block);
    const int pre_span = levels_ - block_depth;
    auto stage_of = [this](int depth) { return levels_ - depth; };

    // Per-block partial accumulation, then hops folding towards the
    // root's block (the reverse of the multicast chain).
    std::vector<Rank> reps(len);
    std::vector<Loc> locs(len);
    for (int i = 0; i < len; ++i) {
      std::vector<Rank> local = chain[i].second;
      if (i == 0) {
        reps[0] = prim_.root;
        locs[0] = recv_loc_;
        local.erase(std::remove(local.begin(), local.end(), prim_.root),
                    local.end());
        reduce_up(prim_.root, recv_loc_, std::move(local), block_depth + 1,
                  stage_of);
        continue;
      }
      reps[i] = local[stripe_ % local.size()];
      if (i == len - 1 && local.size() == 1) {
        // Chain end with a single contributor: forward its send range
        // without staging.
        locs[i] = send_loc_;
        continue;
      }
      used_acc_ = true;
      locs[i] = acc_loc();
      int self = emit(reps[i], send_loc_, reps[i], locs[i], true,
                      stage_of(levels_));
      note_acc_writer(reps[i], locs[i], self);
      local.erase(std::find(local.begin(), local.end(), reps[i]));
      reduce_up(reps[i], locs[i], std::move(local), block_depth + 1, stage_of);
    }
    for (int j = len - 2; j >= 0; --j) {
      const Rank dst = j == 0 ? prim_.root : reps[j];
      const Loc& dacc = locs[j];
      int idx = emit(reps[j + 1], locs[j + 1], dst, dacc, true,
                     pre_span + (len - 2 - j));
      note_acc_writer(dst, dacc, idx);
    }
  }

  // ---- shared helpers ----

  // Conceptual-node chain: the root's block first, then every block
  // containing peers in ascending wrap order. Peer-less blocks are
  // skipped.
  std::vector<std::pair<int, std::vector<Rank>>> chain_blocks(
      const std::vector<Rank>& peers, int n) {
    const int block = m_.world_size() / n;
    std::vector<std::vector<Rank>> per_block(n);
    for (Rank r : peers) per_block[r / block].push_back(r);
    const int root_block = prim_.root / block;
    std::vector<std::pair<int, std::vector<Rank>>> chain;
    chain.emplace_back(root_block, per_block[root_block]);
    for (int i = 1; i < n; ++i) {
      const int b = (root_block + i) % n;
      if (!per_block[b].empty()) chain.emplace_back(b, per_block[b]);
    }
    return chain;
  }

  int depth_of_block(int block_size) const {
    int depth = 0;
    while (depth < levels_ && m_.group_size(depth) > block_size) ++depth;
    return depth;
  }

  void finalize_accumulators() {
    for (auto& [key, writers] : acc_writers_) {
      if (preinit_accs_.count(key)) continue;
      size_t first = 0;
      auto rank_of = [&](size_t i) {
        const P2PTransfer& t = out_[writers[i]];
        return std::make_tuple(t.stage, t.src, t.src_buffer, t.src_offset);
      };
      for (size_t i = 1; i < writers.size(); ++i)
        if (rank_of(i) < rank_of(first)) first = i;
      out_[writers[first]].reduce = false;
    }
  }

  void compact_stages() {
    std::vector<int> used;
    for (const auto& t : out_) used.push_back(t.stage);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (auto& t : out_)
      t.stage = (int)(std::lower_bound(used.begin(), used.end(), t.stage) -
                      used.begin());
  }

  const Primitive& prim_;
  const MachineDescriptor& m_;
  int stripe_;
  int levels_;
  int64_t count_ = 0;
  Loc send_loc_, recv_loc_;
  std::string acc_buf_;
  bool used_acc_ = false;
  std::vector<P2PTransfer> out_;
  std::map<std::pair<Rank, std::string>, std::vector<int>> acc_writers_;
  std::set<std::pair<Rank, std::string>> preinit_accs_;
};

bool canonical_less(const P2PTransfer& a, const P2PTransfer& b) {
  return std::tie(a.stage, a.reduce, a.src, a.dst, a.dst_buffer, a.dst_offset,
                  a.src_buffer, a.src_offset, a.count, a.stripe, a.channel) <
         std::tie(b.stage, b.reduce, b.src, b.dst, b.dst_buffer, b.dst_offset,
                  b.src_buffer, b.src_offset, b.count, b.stripe, b.channel);
}

struct WriteRecord {
  int64_t lo, hi;
  int stage;
  int id;
};

// Dependency edges by def-use overlap: a transfer depends on every
// earlier-stage write overlapping its source range, and (for
// reduce-into) on earlier writes of its accumulator range. Records
// whether any cross-fence pair connects non-identical ranges.
void compute_deps(std::vector<P2PTransfer>& transfers,
                  std::vector<FenceBoundary>* fences) {
  std::map<std::pair<Rank, std::string>, std::vector<WriteRecord>> writes;
  for (const auto& t : transfers)
    writes[{t.dst, t.dst_buffer}].push_back(
        {t.dst_offset, t.dst_offset + t.count, t.stage, t.id});
  for (auto& [key, recs] : writes)
    std::sort(recs.begin(), recs.end(),
              [](const WriteRecord& a, const WriteRecord& b) {
                return a.lo < b.lo;
              });

  auto mark_misaligned = [&](int from_stage, int to_stage) {
    if (!fences) return;
    for (auto& f : *fences)
      if (f.stage > from_stage && f.stage <= to_stage) f.aligned = false;
  };

  for (auto& t : transfers) {
    std::vector<int> deps;
    auto scan = [&](Rank rank, const std::string& buf, int64_t lo, int64_t hi) {
      auto it = writes.find({rank, buf});
      if (it == writes.end()) return;
      for (const WriteRecord& w : it->second) {
        if (w.lo >= hi) break;
        if (w.hi <= lo || w.stage >= t.stage || w.id == t.id) continue;
        deps.push_back(w.id);
        if (w.lo != lo || w.hi != hi) mark_misaligned(w.stage, t.stage);
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

std::vector<P2PTransfer> finalize_single(std::vector<P2PTransfer> transfers) {
  std::sort(transfers.begin(), transfers.end(), canonical_less);
  for (size_t i = 0; i < transfers.size(); ++i) {
    transfers[i].id = (int)i;
    transfers[i].slot = transfers[i].stage;
  }
  compute_deps(transfers, nullptr);
  return transfers;
}

BufferRef subrange(const BufferRef& ref, const SplitRange& sr) {
  return BufferRef{ref.buffer, ref.offset + sr.offset, sr.count};
}

}  // namespace

std::vector<P2PTransfer> tree_factorize(const Primitive& primitive,
                                        const MachineDescriptor& machine) {
  PrimitiveLowering low(primitive, machine, primitive.stripe);
  return finalize_single(low.run(1, "__acc." + prim_fingerprint(0, primitive),
                                 nullptr));
}

std::vector<P2PTransfer> ring_factorize(const Primitive& primitive,
                                        const MachineDescriptor& machine,
                                        int n) {
  if (n < 1 || n > machine.node_count() || machine.node_count() % n != 0)
    throw Error(ErrorCode::InvalidConfig,
                "ring " + std::to_string(n) + " invalid for " +
                    std::to_string(machine.node_count()) + " nodes");
  PrimitiveLowering low(primitive, machine, primitive.stripe);
  return finalize_single(low.run(n, "__acc." + prim_fingerprint(0, primitive),
                                 nullptr));
}

CollectiveProgram stripe_transform(const CollectiveProgram& program,
                                   const MachineDescriptor& machine, int s) {
  if (s == 1) return program;
  if (s < 1 || s > machine.gpus_per_node)
    throw Error(ErrorCode::InvalidConfig,
                "stripe " + std::to_string(s) + " exceeds gpus_per_node " +
                    std::to_string(machine.gpus_per_node));

  CollectiveProgram out(program.world_size());
  for (const auto& [id, decl] : program.buffers())
    out.declare_buffer(id, decl.length, decl.input, decl.internal);

  bool first_step = true;
  for (size_t si = 0; si < program.steps().size(); ++si) {
    const auto& step = program.steps()[si];
    if (step.empty()) continue;
    std::vector<Primitive> sub1, sub2;
    for (const Primitive& prim : step) {
      bool crossing = false;
      for (Rank leaf : prim.leaves)
        if (machine.node_of(leaf) != machine.node_of(prim.root))
          crossing = true;
      if (!crossing) {
        sub1.push_back(prim);
        continue;
      }

      // Stripe roots: the primitive root keeps chunk 0, then the
      // lowest-ranked other GPUs of its node take one chunk each.
      auto [nlo, nhi] = std::make_pair(
          machine.node_of(prim.root) * machine.gpus_per_node,
          (machine.node_of(prim.root) + 1) * machine.gpus_per_node);
      std::vector<Rank> stripe_roots{prim.root};
      for (Rank r = nlo; r < nhi && (int)stripe_roots.size() < s; ++r)
        if (r != prim.root) stripe_roots.push_back(r);

      const std::string stage_buf =
          "__stage." + prim_fingerprint((int)si, prim);
      bool stage_buf_used = false;

      if (prim.kind == PrimitiveKind::multicast) {
        if (prim.root_participates && !prim.in_place()) {
          Primitive self;
          self.kind = PrimitiveKind::multicast;
          self.root = prim.root;
          self.root_participates = true;
          self.send = prim.send;
          self.recv = prim.recv;
          sub1.push_back(std::move(self));
        }
        for (int c = 0; c < s; ++c) {
          const SplitRange sr = balanced_split(prim.send.count, s, c);
          if (sr.count == 0) continue;
          const Rank q = stripe_roots[c];
          const bool q_is_target =
              std::binary_search(prim.leaves.begin(), prim.leaves.end(), q);
          BufferRef staged = q_is_target
                                 ? subrange(prim.recv, sr)
                                 : BufferRef{stage_buf, sr.offset, sr.count};
          if (!q_is_target) stage_buf_used = true;
          if (c > 0) {
            Primitive scatter;
            scatter.kind = PrimitiveKind::reduction;
            scatter.root = q;
            scatter.leaves = {prim.root};
            scatter.send = subrange(prim.send, sr);
            scatter.recv = staged;
            scatter.op = prim.op;
            scatter.stripe = c;
            sub1.push_back(std::move(scatter));
          }
          std::vector<Rank> branch_targets;
          for (Rank leaf : prim.leaves)
            if (leaf != q) branch_targets.push_back(leaf);
          if (!branch_targets.empty()) {
            Primitive branch;
            branch.kind = PrimitiveKind::multicast;
            branch.root = q;
            branch.leaves = std::move(branch_targets);
            branch.send = c == 0 ? subrange(prim.send, sr) : staged;
            branch.recv = subrange(prim.recv, sr);
            branch.stripe = c;
            sub2.push_back(std::move(branch));
          }
        }
      } else {
        std::vector<Rank> contribs = prim.leaves;
        if (prim.root_participates) contribs.push_back(prim.root);
        std::sort(contribs.begin(), contribs.end());
        for (int c = 0; c < s; ++c) {
          const SplitRange sr = balanced_split(prim.send.count, s, c);
          if (sr.count == 0) continue;
          const Rank q = stripe_roots[c];
          Primitive branch;
          branch.kind = PrimitiveKind::reduction;
          branch.root = q;
          branch.root_participates =
              std::binary_search(contribs.begin(), contribs.end(), q);
          for (Rank r : contribs)
            if (r != q) branch.leaves.push_back(r);
          branch.send = subrange(prim.send, sr);
          branch.recv = c == 0 ? subrange(prim.recv, sr)
                               : BufferRef{stage_buf, sr.offset, sr.count};
          branch.op = prim.op;
          branch.stripe = c;
          if (c > 0) stage_buf_used = true;
          sub1.push_back(std::move(branch));
          if (c > 0) {
            Primitive gather;
            gather.kind = PrimitiveKind::reduction;
            gather.root = prim.root;
            gather.leaves = {q};
            gather.send = BufferRef{stage_buf, sr.offset, sr.count};
            gather.recv = subrange(prim.recv, sr);
            gather.op = prim.op;
            gather.stripe = c;
            sub2.push_back(std::move(gather));
          }
        }
      }
      if (stage_buf_used)
        out.declare_buffer(stage_buf, prim.recv.count, false, true);
    }

    auto append_step = [&](std::vector<Primitive>& prims) {
      if (prims.empty()) return;
      if (!first_step) out.add_fence();
      first_step = false;
      for (Primitive& p : prims) out.append_primitive(std::move(p));
    };
    append_step(sub1);
    append_step(sub2);
  }
  return out;
}

StagedPlan lower(const CollectiveProgram& program,
                 const MachineDescriptor& machine,
                 const OptimizationConfig& config) {
  {
    auto v = program.validate();
    if (!v.empty())
      throw Error(v.front().code, "program invalid: " + v.front().message);
  }
  require_valid_machine(machine, program.world_size());
  require_valid_config(config, machine);

  const CollectiveProgram p =
      config.stripe > 1 ? stripe_transform(program, machine, config.stripe)
                        : program;

  StagedPlan plan;
  plan.world_size = p.world_size();
  plan.element_size = machine.element_size;
  plan.stripe = config.stripe;
  plan.ring = config.ring;
  plan.source_program_id = program.id();
  plan.buffers = p.buffers();

  std::vector<P2PTransfer> transfers;
  int cursor = 0;
  for (size_t si = 0; si < p.steps().size(); ++si) {
    const auto& step = p.steps()[si];
    int span = 0;
    for (const Primitive& prim : step) {
      PrimitiveLowering low(prim, machine, prim.stripe);
      auto ts = low.run(config.ring,
                        "__acc." + prim_fingerprint((int)si, prim),
                        &plan.buffers);
      for (auto& t : ts) {
        t.stage += cursor;
        t.step = (int)si;
        span = std::max(span, t.stage - cursor + 1);
        transfers.push_back(std::move(t));
      }
    }
    cursor += span;
    if (si + 1 < p.steps().size())
      plan.fences.push_back(FenceBoundary{cursor, true});
  }

  // Compact globally empty stages, shifting fence boundaries along.
  std::vector<int> used;
  for (const auto& t : transfers) used.push_back(t.stage);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  auto remap = [&](int stage) {
    return (int)(std::lower_bound(used.begin(), used.end(), stage) -
                 used.begin());
  };
  for (auto& t : transfers) t.stage = remap(t.stage);
  {
    std::vector<FenceBoundary> fences;
    for (const auto& f : plan.fences) {
      int stage = remap(f.stage);
      if (stage == 0 || stage >= (int)used.size()) continue;
      if (!fences.empty() && fences.back().stage == stage) continue;
      fences.push_back(FenceBoundary{stage, true});
    }
    plan.fences = std::move(fences);
  }
  plan.num_stages = (int)used.size();

  std::sort(transfers.begin(), transfers.end(), canonical_less);
  for (size_t i = 0; i < transfers.size(); ++i) {
    transfers[i].id = (int)i;
    transfers[i].slot = transfers[i].stage;
  }
  compute_deps(transfers, &plan.fences);
  plan.transfers = std::move(transfers);
  return plan;
}

int64_t StagedPlan::total_bytes() const {
  int64_t sum = 0;
  for (const auto& t : transfers) sum += t.count * element_size;
  return sum;
}

int64_t inter_node_bytes(const StagedPlan& plan, int node_size) {
  int64_t sum = 0;
  for (const auto& t : plan.transfers)
    if (t.src / node_size != t.dst / node_size)
      sum += t.count * plan.element_size;
  return sum;
}

namespace {

json transfer_to_json(const P2PTransfer& t) {
  json j;
  j["id"] = t.id;
  j["stage"] = t.stage;
  j["level"] = t.level;
  j["stripe"] = t.stripe;
  j["channel"] = t.channel;
  j["slot"] = t.slot;
  j["src"] = t.src;
  j["dst"] = t.dst;
  j["src_buffer"] = t.src_buffer;
  j["src_offset"] = t.src_offset;
  j["dst_buffer"] = t.dst_buffer;
  j["dst_offset"] = t.dst_offset;
  j["count"] = t.count;
  j["op"] = t.reduce ? to_string(t.op) : "copy";
  j["step"] = t.step;
  j["deps"] = t.deps;
  return j;
}

P2PTransfer transfer_from_json(const json& j) {
  P2PTransfer t;
  t.id = j.at("id").get<int>();
  t.stage = j.at("stage").get<int>();
  t.level = j.at("level").get<int>();
  t.stripe = j.at("stripe").get<int>();
  t.channel = j.value("channel", 0);
  t.slot = j.value("slot", t.stage);
  t.src = j.at("src").get<Rank>();
  t.dst = j.at("dst").get<Rank>();
  t.src_buffer = j.at("src_buffer").get<std::string>();
  t.src_offset = j.at("src_offset").get<int64_t>();
  t.dst_buffer = j.at("dst_buffer").get<std::string>();
  t.dst_offset = j.at("dst_offset").get<int64_t>();
  t.count = j.at("count").get<int64_t>();
  const std::string op = j.at("op").get<std::string>();
  t.reduce = op != "copy";
  if (t.reduce) t.op = reduce_op_from_string(op);
  t.step = j.value("step", 0);
  t.deps = j.at("deps").get<std::vector<int>>();
  return t;
}

json buffers_to_json(const std::map<std::string, BufferDecl>& buffers) {
  json out = json::array();
  for (const auto& [id, decl] : buffers)
    out.push_back(json{{"id", id},
                       {"length", decl.length},
                       {"input", decl.input},
                       {"internal", decl.internal}});
  return out;
}

std::map<std::string, BufferDecl> buffers_from_json(const json& j) {
  std::map<std::string, BufferDecl> out;
  for (const auto& b : j)
    out[b.at("id").get<std::string>()] =
        BufferDecl{b.at("length").get<int64_t>(), b.value("input", false),
                   b.value("internal", false)};
  return out;
}

}  // namespace

std::string StagedPlan::serialize() const {
  json j;
  j["format"] = "hiercoll-plan-v1";
  j["world_size"] = world_size;
  j["element_size"] = element_size;
  j["stripe"] = stripe;
  j["ring"] = ring;
  j["num_stages"] = num_stages;
  j["source_program_id"] = source_program_id;
  j["buffers"] = buffers_to_json(buffers);
  json fj = json::array();
  for (const auto& f : fences)
    fj.push_back(json{{"stage", f.stage}, {"aligned", f.aligned}});
  j["fences"] = std::move(fj);
  json tj = json::array();
  for (const auto& t : transfers) tj.push_back(transfer_to_json(t));
  j["transfers"] = std::move(tj);
  return j.dump(2) + "\n";
}

StagedPlan StagedPlan::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (j.value("format", "") != "hiercoll-plan-v1")
    throw Error(ErrorCode::ParseError, "not a hiercoll plan file");
  StagedPlan plan;
  plan.world_size = j.at("world_size").get<int>();
  plan.element_size = j.at("element_size").get<int>();
  plan.stripe = j.at("stripe").get<int>();
  plan.ring = j.at("ring").get<int>();
  plan.num_stages = j.at("num_stages").get<int>();
  plan.source_program_id = j.value("source_program_id", "");
  plan.buffers = buffers_from_json(j.at("buffers"));
  for (const auto& fj : j.at("fences"))
    plan.fences.push_back(
        FenceBoundary{fj.at("stage").get<int>(), fj.at("aligned").get<bool>()});
  for (const auto& tj : j.at("transfers"))
    plan.transfers.push_back(transfer_from_json(tj));
  return plan;
}

}  // namespace hiercoll
