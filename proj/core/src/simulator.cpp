//===- simulator.cpp - Sequential interpreter and GPU machine model -------===//
//
// The function body is flattened into a linear program (ops plus loop
// begin/end markers) so a warp can stop at a barrier inside a loop nest and
// resume later. Register files hold, per value and lane, an index, up to 8
// float elements, and a shared fragment pointer.
//
//===----------------------------------------------------------------------===//

#include "tcmm/simulator.h"

#include "tcmm/numeric.h"

#include <algorithm>
#include <array>
#include <memory>
#include <random>
#include <sstream>
#include <unordered_map>

namespace tcmm {

namespace {

constexpr int kMaxVec = 8;
constexpr int kWarpLanes = 32;

//===----------------------------------------------------------------------===//
// Compiled affine expressions
//===----------------------------------------------------------------------===//

struct CExpr {
  int64_t c = 0;
  std::vector<std::pair<uint32_t, int64_t>> terms; // slot, coefficient
  struct NonLinear {
    int64_t coef;
    bool mod;
    int64_t div;
    std::unique_ptr<CExpr> inner;
  };
  std::vector<NonLinear> nl;

  template <typename Get> int64_t eval(const Get &get) const {
    int64_t r = c;
    for (auto [s, k] : terms)
      r += k * get(s);
    for (const auto &n : nl) {
      int64_t v = n.inner->eval(get);
      r += n.coef * (n.mod ? floorMod(v, n.div) : floorDiv(v, n.div));
    }
    return r;
  }
};

/// `slots[d]` is the slot dim d reads (a ValueId or a position).
void compileInto(CExpr &out, const AffineExpr &e, int64_t scale,
                 const std::vector<uint32_t> &slots) {
  switch (e.kind()) {
  case AffineKind::Constant:
    out.c += scale * e.value();
    return;
  case AffineKind::Dim:
    out.terms.emplace_back(slots.at(static_cast<size_t>(e.value())), scale);
    return;
  case AffineKind::Symbol:
    throw SimError("affine symbols are not supported by the simulator");
  case AffineKind::Add:
    compileInto(out, e.lhs(), scale, slots);
    compileInto(out, e.rhs(), scale, slots);
    return;
  case AffineKind::Mul:
    if (e.rhs().isConstant())
      compileInto(out, e.lhs(), scale * e.rhs().value(), slots);
    else
      compileInto(out, e.rhs(), scale * e.lhs().value(), slots);
    return;
  case AffineKind::FloorDiv:
  case AffineKind::Mod: {
    auto inner = std::make_unique<CExpr>();
    compileInto(*inner, e.lhs(), 1, slots);
    out.nl.push_back({scale, e.kind() == AffineKind::Mod, e.rhs().value(),
                      std::move(inner)});
    return;
  }
  }
}

std::vector<CExpr> compileApply(const AffineApply &a) {
  std::vector<uint32_t> slots(a.operands.begin(), a.operands.end());
  std::vector<CExpr> out(a.map.numResults());
  for (unsigned r = 0; r < a.map.numResults(); ++r)
    compileInto(out[r], a.map.result(r), 1, slots);
  return out;
}

//===----------------------------------------------------------------------===//
// Program
//===----------------------------------------------------------------------===//

struct MemInfo {
  int buffer = -1;
  int64_t vw = 1;
  ElemType elem = ElemType::F32;
  std::vector<int64_t> shape;
  CExpr layout; // over index positions, in units of vw elements
};

struct BufferInfo {
  std::string name;
  ElemType elem = ElemType::F32;
  bool shared = false;
  int64_t elements = 0; // scalar elements, padding included
};

struct Instr {
  enum Kind : uint8_t { OpI, LoopBegin, LoopEnd } kind = OpI;
  const Op *op = nullptr;
  const Loop *loop = nullptr;
  int slot = -1;
  size_t jump = 0;
  std::vector<CExpr> index; // op index, or {lower, upper} for LoopBegin
  int mem = -1;
  bool copy = false;
  uint8_t valueKind = 0; // result storage for constants: 0 index, 1 float
  ElemType resultElem = ElemType::F32;
};

struct Program {
  const Function *f = nullptr;
  std::vector<Instr> code;
  std::vector<MemInfo> mems;
  std::unordered_map<ValueId, int> memOf;
  std::vector<BufferInfo> buffers;
  int loops = 0;
};

std::string opName(const Op &op) {
  std::string s(toString(op.kind));
  if (!op.tag.empty())
    s += " {" + op.tag + "}";
  return s;
}

void flatten(Program &p, const Block &b) {
  for (const Node &n : b) {
    if (n.isOp()) {
      const Op &op = n.op();
      if (op.kind == OpKind::Yield)
        continue;
      Instr in;
      in.op = &op;
      in.copy = op.tag.rfind("copy_", 0) == 0;
      if (op.isMemoryAccess()) {
        in.index = compileApply(op.index);
        in.mem = p.memOf.at(op.memref);
      }
      if (op.hasResult()) {
        const Type &t = p.f->typeOf(op.result);
        in.valueKind = std::holds_alternative<IndexType>(t) ? 0 : 1;
        if (auto *s = std::get_if<ScalarType>(&t))
          in.resultElem = s->elem;
      }
      p.code.push_back(std::move(in));
      continue;
    }
    const Loop &l = n.loop();
    Instr begin;
    begin.kind = Instr::LoopBegin;
    begin.loop = &l;
    begin.slot = p.loops++;
    begin.index.push_back(std::move(compileApply(l.lower)[0]));
    begin.index.push_back(std::move(compileApply(l.upper)[0]));
    size_t at = p.code.size();
    p.code.push_back(std::move(begin));
    flatten(p, l.body);
    Instr end;
    end.kind = Instr::LoopEnd;
    end.loop = &l;
    end.slot = p.code[at].slot;
    end.jump = at + 1;
    p.code.push_back(std::move(end));
    p.code[at].jump = p.code.size();
  }
}

int addMem(Program &p, const MemRefType &t, int buffer) {
  MemInfo mi;
  mi.buffer = buffer;
  mi.vw = t.vectorWidth;
  mi.elem = t.elem;
  mi.shape = t.shape;
  std::vector<uint32_t> slots(t.rank());
  for (unsigned d = 0; d < t.rank(); ++d)
    slots[d] = d;
  compileInto(mi.layout, t.layout.result(0), 1, slots);
  p.mems.push_back(std::move(mi));
  return static_cast<int>(p.mems.size() - 1);
}

Program compile(const Module &m) {
  Program p;
  const Function &f = m.func();
  p.f = &f;
  for (ValueId a : f.args) {
    const MemRefType &t = f.memrefType(a);
    p.buffers.push_back(
        {f.values[a].name, t.elem, false, t.footprint() * t.vectorWidth});
    p.memOf[a] = addMem(p, t, static_cast<int>(p.buffers.size() - 1));
  }
  std::unordered_map<std::string, int> globalBuf;
  for (const Global &g : m.globals) {
    p.buffers.push_back({g.name, g.type.elem, true,
                         g.type.footprint() * g.type.vectorWidth});
    globalBuf[g.name] = static_cast<int>(p.buffers.size() - 1);
  }
  walkOps(f.body, [&](const Op &op) {
    if (op.kind == OpKind::GetGlobal)
      p.memOf[op.result] =
          addMem(p, f.memrefType(op.result), globalBuf.at(op.symbol));
    else if (op.kind == OpKind::ViewCast)
      p.memOf[op.result] =
          addMem(p, f.memrefType(op.result),
                 p.mems[p.memOf.at(op.operands[0])].buffer);
  });
  flatten(p, f.body);
  return p;
}

//===----------------------------------------------------------------------===//
// Race detection
//===----------------------------------------------------------------------===//

class RaceDetector {
public:
  /// Starts a new barrier interval (or block).
  void nextEpoch() { ++epoch_; }

  /// Returns true and fills `race` when the access conflicts.
  bool access(int buffer, int64_t elem, int warp, bool write, Race &race) {
    if (static_cast<size_t>(buffer) >= state_.size())
      state_.resize(buffer + 1);
    auto &vec = state_[buffer];
    if (static_cast<size_t>(elem) >= vec.size())
      vec.resize(elem + 1);
    State &s = vec[elem];
    if (s.epoch != epoch_)
      s = State{epoch_, 0, 0};
    uint64_t me = uint64_t(1) << warp;
    bool found = false;
    if (uint64_t other = s.writers & ~me) {
      found = true;
      race.writerWarp = std::countr_zero(other);
      race.otherWarp = warp;
      race.writeWrite = write;
    } else if (write && (s.readers & ~me)) {
      found = true;
      race.writerWarp = warp;
      race.otherWarp = std::countr_zero(s.readers & ~me);
      race.writeWrite = false;
    }
    (write ? s.writers : s.readers) |= me;
    if (found)
      race.element = elem;
    return found;
  }

private:
  struct State {
    uint64_t epoch = ~uint64_t(0);
    uint64_t writers = 0, readers = 0;
  };
  uint64_t epoch_ = 0;
  std::vector<std::vector<State>> state_;
};

//===----------------------------------------------------------------------===//
// Bank conflicts and transactions
//===----------------------------------------------------------------------===//

int64_t segmentsOf(const int64_t *addrs, size_t n, int bytes,
                   int transactionBytes) {
  std::array<int64_t, 128> segs;
  size_t count = 0;
  for (size_t i = 0; i < n; ++i) {
    if (addrs[i] < 0)
      continue;
    for (int64_t s = addrs[i] / transactionBytes;
         s <= (addrs[i] + bytes - 1) / transactionBytes && count < segs.size();
         ++s)
      segs[count++] = s;
  }
  std::sort(segs.begin(), segs.begin() + count);
  return std::unique(segs.begin(), segs.begin() + count) - segs.begin();
}

} // namespace

int64_t phaseConflicts(const std::vector<int64_t> &byteAddrs, int accessBytes,
                       const MachineParams &mp) {
  std::vector<int64_t> words;
  words.reserve(byteAddrs.size() * 4);
  for (int64_t a : byteAddrs)
    for (int64_t w = a / mp.bankWidthBytes;
         w <= (a + accessBytes - 1) / mp.bankWidthBytes; ++w)
      words.push_back(w);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  std::vector<int64_t> perBank(static_cast<size_t>(mp.banks), 0);
  int64_t worst = 0;
  for (int64_t w : words)
    worst = std::max(worst, ++perBank[static_cast<size_t>(w % mp.banks)]);
  return worst > 0 ? worst - 1 : 0;
}

int64_t countBankConflicts(const std::vector<SharedAccess> &trace,
                           const MachineParams &mp) {
  int64_t total = 0;
  for (const SharedAccess &a : trace)
    for (const auto &phase : a.phases)
      total += phaseConflicts(phase, a.accessBytes, mp);
  return total;
}

std::vector<Race> raceCheck(const std::vector<SharedAccess> &trace) {
  // Accesses are grouped by (block, interval); the detector sees each group
  // as one epoch.
  std::vector<const SharedAccess *> sorted;
  for (const SharedAccess &a : trace)
    sorted.push_back(&a);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto *x, auto *y) {
    return std::pair(x->block, x->interval) < std::pair(y->block, y->interval);
  });
  std::map<std::string, int> bufferIds;
  RaceDetector det;
  std::vector<Race> races;
  std::pair<int64_t, int64_t> cur{-1, -1};
  for (const SharedAccess *a : sorted) {
    if (std::pair(a->block, a->interval) != cur) {
      cur = {a->block, a->interval};
      det.nextEpoch();
    }
    int id = bufferIds.emplace(a->buffer, int(bufferIds.size())).first->second;
    for (const auto &phase : a->phases)
      for (int64_t addr : phase)
        for (int64_t e = addr / a->elemBytes;
             e <= (addr + a->accessBytes - 1) / a->elemBytes; ++e) {
          Race r;
          if (det.access(id, e, a->warp, a->write, r)) {
            r.buffer = a->buffer;
            r.block = a->block;
            races.push_back(r);
          }
        }
  }
  return races;
}

std::string Race::str() const {
  std::ostringstream os;
  os << (writeWrite ? "write/write" : "write/read") << " on @" << buffer << "["
     << element << "] block " << block << " warps " << writerWarp << "/"
     << otherWarp;
  return os.str();
}

std::string SimMetrics::report() const {
  std::ostringstream os;
  os << "bank_conflicts=" << bankConflicts << "\n"
     << "global_transactions=" << globalTransactions << "\n"
     << "copy_transactions=" << copyTransactions << "\n"
     << "barriers=" << barriers << "\n"
     << "races=" << raceCount << "\n"
     << "stall_cycles=" << stallCycles << "\n";
  return os.str();
}

namespace {

//===----------------------------------------------------------------------===//
// Machine
//===----------------------------------------------------------------------===//

struct Fragment {
  std::array<float, 256> v;
};

struct Warp {
  int lanes = 1;
  int id = 0;
  std::vector<int64_t> idx;  // value * lanes + lane
  std::vector<float> data;   // (value * lanes + lane) * kMaxVec + e
  std::vector<std::shared_ptr<Fragment>> frag;
  std::vector<int64_t> loopUb;
  size_t pc = 0;
  bool done = false, atBarrier = false;
  int64_t wmmaCount = 0;
  std::unordered_map<ValueId, int64_t> pending; // global load -> wmmaCount

  void reset(size_t values, int nloops) {
    idx.assign(values * lanes, 0);
    data.assign(values * lanes * kMaxVec, 0.f);
    frag.assign(values, nullptr);
    loopUb.assign(nloops, 0);
    pc = 0;
    done = atBarrier = false;
    wmmaCount = 0;
    pending.clear();
  }
  int64_t &ix(ValueId v, int lane) { return idx[size_t(v) * lanes + lane]; }
  float *el(ValueId v, int lane) {
    return &data[(size_t(v) * lanes + lane) * kMaxVec];
  }
  void copyValue(ValueId dst, ValueId src) {
    for (int l = 0; l < lanes; ++l) {
      ix(dst, l) = ix(src, l);
      std::copy_n(el(src, l), kMaxVec, el(dst, l));
    }
    frag[dst] = frag[src];
  }
};

class Machine {
public:
  Machine(const Module &m, bool gpu, const MachineParams &mp,
          const GpuOptions &opts)
      : prog_(compile(m)), f_(m.func()), gpu_(gpu), mp_(mp), opts_(opts) {}

  Buffers run(const Buffers &inputs);
  SimMetrics metrics;

private:
  void loadInputs(const Buffers &inputs);
  void runBlock(int64_t bx, int64_t by);
  /// Runs until a barrier, the end, or the op budget runs out.
  void step(Warp &w, int64_t budget);
  void exec(Warp &w, const Instr &in);
  int64_t offsetOf(const Instr &in, const MemInfo &mi, Warp &w, int lane,
                   int64_t *indexOut);
  [[noreturn]] void oob(const Instr &in, const MemInfo &mi,
                        const std::vector<int64_t> &index);
  void noteUses(Warp &w, const Op &op);
  void sharedAccess(Warp &w, const Instr &in, const MemInfo &mi, bool write,
                    std::vector<std::vector<int64_t>> phases, int accessBytes);
  void globalAccess(const Instr &in, const MemInfo &mi, bool write,
                    const std::vector<int64_t> &elemOffsets, int accessBytes,
                    int groupLanes);

  Program prog_;
  const Function &f_;
  bool gpu_;
  MachineParams mp_;
  GpuOptions opts_;
  std::vector<std::vector<float>> mem_;
  std::vector<std::vector<int32_t>> writes_;
  std::vector<Warp> warps_;
  LaunchConfig launch_;
  int64_t bx_ = 0, by_ = 0, block_ = 0, interval_ = 0;
  RaceDetector races_;
};

void Machine::loadInputs(const Buffers &inputs) {
  mem_.resize(prog_.buffers.size());
  writes_.resize(prog_.buffers.size());
  for (size_t b = 0; b < prog_.buffers.size(); ++b) {
    const BufferInfo &bi = prog_.buffers[b];
    mem_[b].assign(static_cast<size_t>(bi.elements), 0.f);
    if (bi.shared)
      continue;
    auto it = inputs.find(bi.name);
    if (it == inputs.end())
      throw SimError("missing input buffer '" + bi.name + "'");
    if (static_cast<int64_t>(it->second.size()) != bi.elements)
      throw SimError("input buffer '" + bi.name + "' has " +
                     std::to_string(it->second.size()) + " elements, expected " +
                     std::to_string(bi.elements));
    mem_[b] = it->second;
    if (gpu_)
      writes_[b].assign(mem_[b].size(), 0);
  }
}

Buffers Machine::run(const Buffers &inputs) {
  loadInputs(inputs);
  if (!gpu_) {
    if (f_.launch)
      throw SimError("sequential interpretation of a mapped kernel");
    warps_.resize(1);
    warps_[0].lanes = 1;
    warps_[0].reset(f_.values.size(), prog_.loops);
    step(warps_[0], 0);
  } else {
    if (!f_.launch)
      throw SimError("GPU execution needs a mapped kernel (launch config)");
    launch_ = *f_.launch;
    if (launch_.warps() > 64)
      throw SimError("more than 64 warps per block");
    warps_.resize(static_cast<size_t>(launch_.warps()));
    for (size_t w = 0; w < warps_.size(); ++w) {
      warps_[w].lanes = kWarpLanes;
      warps_[w].id = static_cast<int>(w);
    }
    int64_t blocks = launch_.gridX * launch_.gridY;
    std::vector<int64_t> order = opts_.blockOrder;
    if (order.empty())
      for (int64_t b = 0; b < blocks; ++b)
        order.push_back(b);
    if (static_cast<int64_t>(order.size()) != blocks)
      throw SimError("block order does not list every block");
    for (int64_t b : order)
      runBlock(b / launch_.gridY, b % launch_.gridY);
    for (size_t b = 0; b < prog_.buffers.size(); ++b) {
      const auto &w = writes_[b];
      if (w.empty() || std::all_of(w.begin(), w.end(),
                                   [](int32_t c) { return c == 0; }))
        continue;
      auto [lo, hi] = std::minmax_element(w.begin(), w.end());
      metrics.writeCensus[prog_.buffers[b].name] = {*lo, *hi};
    }
  }
  Buffers out;
  for (size_t b = 0; b < prog_.buffers.size(); ++b)
    if (!prog_.buffers[b].shared)
      out[prog_.buffers[b].name] = mem_[b];
  return out;
}

void Machine::runBlock(int64_t bx, int64_t by) {
  bx_ = bx;
  by_ = by;
  block_ = bx * launch_.gridY + by;
  interval_ = 0;
  races_.nextEpoch();
  for (size_t b = 0; b < prog_.buffers.size(); ++b)
    if (prog_.buffers[b].shared)
      std::fill(mem_[b].begin(), mem_[b].end(), 0.f);
  for (Warp &w : warps_)
    w.reset(f_.values.size(), prog_.loops);
  for (;;) {
    for (Warp &w : warps_)
      if (!w.done && !w.atBarrier)
        step(w, opts_.segmentOps);
    bool anyRunnable = false, anyDone = false, anyWaiting = false;
    for (const Warp &w : warps_) {
      anyRunnable |= !w.done && !w.atBarrier;
      anyDone |= w.done;
      anyWaiting |= w.atBarrier;
    }
    if (anyRunnable)
      continue;
    if (!anyWaiting)
      return;
    if (anyDone)
      throw SimError("deadlock: a warp finished while others wait at a "
                     "barrier (block " +
                     std::to_string(block_) + ")");
    for (const Warp &w : warps_)
      if (w.pc != warps_[0].pc)
        throw SimError("barrier divergence: warps wait at different "
                       "barriers (block " +
                       std::to_string(block_) + ")");
    for (Warp &w : warps_)
      w.atBarrier = false;
    ++metrics.barriers;
    ++interval_;
    races_.nextEpoch();
  }
}

void Machine::step(Warp &w, int64_t budget) {
  int64_t ran = 0;
  while (w.pc < prog_.code.size()) {
    const Instr &in = prog_.code[w.pc];
    if (in.kind == Instr::OpI && in.op->kind == OpKind::Barrier) {
      ++w.pc;
      if (gpu_) {
        w.atBarrier = true;
        return;
      }
      continue;
    }
    exec(w, in);
    if (budget > 0 && ++ran >= budget)
      return;
  }
  w.done = true;
}

[[noreturn]] void Machine::oob(const Instr &in, const MemInfo &mi,
                               const std::vector<int64_t> &index) {
  std::ostringstream os;
  os << "out-of-bounds " << opName(*in.op) << " of '"
     << prog_.buffers[mi.buffer].name << "' at [";
  for (size_t i = 0; i < index.size(); ++i)
    os << (i ? ", " : "") << index[i];
  os << "], shape ";
  for (size_t i = 0; i < mi.shape.size(); ++i)
    os << (i ? "x" : "") << mi.shape[i];
  throw SimError(os.str());
}

int64_t Machine::offsetOf(const Instr &in, const MemInfo &mi, Warp &w,
                          int lane, int64_t *indexOut) {
  auto get = [&](uint32_t v) { return w.ix(v, lane); };
  size_t rank = in.index.size();
  for (size_t d = 0; d < rank; ++d)
    indexOut[d] = in.index[d].eval(get);
  for (size_t d = 0; d < rank; ++d)
    if (indexOut[d] < 0 || indexOut[d] >= mi.shape[d])
      oob(in, mi, std::vector<int64_t>(indexOut, indexOut + rank));
  return mi.layout.eval([&](uint32_t d) { return indexOut[d]; }) * mi.vw;
}

void Machine::noteUses(Warp &w, const Op &op) {
  if (w.pending.empty())
    return;
  for (ValueId v : op.operands) {
    auto it = w.pending.find(v);
    if (it == w.pending.end())
      continue;
    if (it->second == w.wmmaCount)
      metrics.stallCycles += mp_.globalLatency;
    w.pending.erase(it);
  }
}

void Machine::sharedAccess(Warp &w, const Instr &in, const MemInfo &mi,
                           bool write,
                           std::vector<std::vector<int64_t>> phases,
                           int accessBytes) {
  int eb = static_cast<int>(elemBytes(mi.elem));
  for (const auto &ph : phases) {
    metrics.bankConflicts += phaseConflicts(ph, accessBytes, mp_);
    for (int64_t addr : ph)
      for (int64_t e = addr / eb; e <= (addr + accessBytes - 1) / eb; ++e) {
        Race r;
        if (races_.access(mi.buffer, e, w.id, write, r)) {
          ++metrics.raceCount;
          if (metrics.races.size() < opts_.maxRacesKept) {
            r.buffer = prog_.buffers[mi.buffer].name;
            r.block = block_;
            metrics.races.push_back(r);
          }
        }
      }
  }
  if (opts_.sharedTrace) {
    SharedAccess a;
    a.buffer = prog_.buffers[mi.buffer].name;
    a.block = block_;
    a.warp = w.id;
    a.interval = interval_;
    a.write = write;
    a.elemBytes = eb;
    a.accessBytes = accessBytes;
    a.phases = std::move(phases);
    opts_.sharedTrace(a);
  }
  (void)in;
}

void Machine::globalAccess(const Instr &in, const MemInfo &mi, bool write,
                           const std::vector<int64_t> &elemOffsets,
                           int accessBytes, int groupLanes) {
  int64_t eb = elemBytes(mi.elem);
  std::vector<int64_t> bytes(elemOffsets.size());
  for (size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = elemOffsets[i] * eb;
  int64_t n = 0;
  for (size_t g = 0; g < bytes.size(); g += groupLanes)
    n += segmentsOf(bytes.data() + g,
                    std::min<size_t>(groupLanes, bytes.size() - g), accessBytes,
                    mp_.transactionBytes);
  metrics.globalTransactions += n;
  if (in.copy)
    metrics.copyTransactions += n;
  if (write) {
    auto &cnt = writes_[mi.buffer];
    for (int64_t off : elemOffsets)
      for (int64_t e = 0; e < accessBytes / eb; ++e)
        ++cnt[off + e];
  }
}

void Machine::exec(Warp &w, const Instr &in) {
  if (in.kind == Instr::LoopBegin) {
    const Loop &l = *in.loop;
    auto get0 = [&](uint32_t v) { return w.ix(v, 0); };
    int64_t lb = in.index[0].eval(get0), ub = in.index[1].eval(get0);
    for (int lane = 1; lane < w.lanes; ++lane) {
      auto get = [&](uint32_t v) { return w.ix(v, lane); };
      if (in.index[0].eval(get) != lb || in.index[1].eval(get) != ub)
        throw SimError("loop '" + l.tag + "' has lane-dependent bounds");
    }
    if (lb >= ub) {
      for (size_t i = 0; i < l.results.size(); ++i)
        w.copyValue(l.results[i], l.inits[i]);
      w.pc = in.jump;
      return;
    }
    for (int lane = 0; lane < w.lanes; ++lane)
      w.ix(l.iv, lane) = lb;
    for (size_t i = 0; i < l.regionArgs.size(); ++i)
      w.copyValue(l.regionArgs[i], l.inits[i]);
    w.loopUb[in.slot] = ub;
    ++w.pc;
    return;
  }
  if (in.kind == Instr::LoopEnd) {
    const Loop &l = *in.loop;
    const Op *y = l.yield();
    int64_t next = w.ix(l.iv, 0) + l.step;
    bool again = next < w.loopUb[in.slot];
    if (y)
      for (size_t i = 0; i < y->operands.size(); ++i)
        w.copyValue(again ? l.regionArgs[i] : l.results[i], y->operands[i]);
    if (again) {
      for (int lane = 0; lane < w.lanes; ++lane)
        w.ix(l.iv, lane) = next;
      w.pc = in.jump;
    } else {
      ++w.pc;
    }
    return;
  }

  const Op &op = *in.op;
  ++w.pc;
  if (gpu_)
    noteUses(w, op);
  int64_t index[8];
  switch (op.kind) {
  case OpKind::Constant:
    for (int lane = 0; lane < w.lanes; ++lane) {
      if (in.valueKind == 0)
        w.ix(op.result, lane) = op.intValue;
      else
        w.el(op.result, lane)[0] = static_cast<float>(op.floatValue);
    }
    return;
  case OpKind::GetGlobal:
  case OpKind::ViewCast:
  case OpKind::Barrier:
  case OpKind::Yield:
    return;
  case OpKind::HwId: {
    if (!gpu_)
      throw SimError("hw.id outside a mapped kernel");
    for (int lane = 0; lane < w.lanes; ++lane) {
      int64_t v = 0;
      switch (op.hw) {
      case HwDim::BlockX: v = bx_; break;
      case HwDim::BlockY: v = by_; break;
      case HwDim::WarpX: v = w.id % launch_.warpsX; break;
      case HwDim::WarpY: v = w.id / launch_.warpsX; break;
      case HwDim::Thread: v = int64_t(w.id) * kWarpLanes + lane; break;
      }
      w.ix(op.result, lane) = v;
    }
    return;
  }
  case OpKind::Load:
  case OpKind::Store:
  case OpKind::VectorLoad:
  case OpKind::VectorStore: {
    const MemInfo &mi = prog_.mems[in.mem];
    auto &buf = mem_[mi.buffer];
    bool write = op.kind == OpKind::Store || op.kind == OpKind::VectorStore;
    int64_t vw = mi.vw;
    int64_t offs[kWarpLanes];
    for (int lane = 0; lane < w.lanes; ++lane) {
      int64_t off = offsetOf(in, mi, w, lane, index);
      offs[lane] = off;
      if (write) {
        const float *src = w.el(op.operands[0], lane);
        std::copy_n(src, vw, buf.begin() + off);
      } else {
        std::copy_n(buf.begin() + off, vw, w.el(op.result, lane));
      }
    }
    if (!gpu_)
      return;
    int eb = static_cast<int>(elemBytes(mi.elem));
    int accessBytes = static_cast<int>(vw) * eb;
    if (prog_.buffers[mi.buffer].shared) {
      int perPhase =
          std::min(kWarpLanes, mp_.transactionBytes / std::max(1, accessBytes));
      std::vector<std::vector<int64_t>> phases;
      for (int l0 = 0; l0 < w.lanes; l0 += perPhase) {
        std::vector<int64_t> ph;
        for (int l = l0; l < std::min(w.lanes, l0 + perPhase); ++l)
          ph.push_back(offs[l] * eb);
        phases.push_back(std::move(ph));
      }
      sharedAccess(w, in, mi, write, std::move(phases), accessBytes);
    } else {
      globalAccess(in, mi, write, std::vector<int64_t>(offs, offs + w.lanes),
                   accessBytes, kWarpLanes / 2);
      if (!write)
        w.pending[op.result] = w.wmmaCount;
    }
    return;
  }
  case OpKind::MulF:
  case OpKind::AddF: {
    bool f16 = in.resultElem == ElemType::F16;
    bool mul = op.kind == OpKind::MulF;
    for (int lane = 0; lane < w.lanes; ++lane) {
      float a = w.el(op.operands[0], lane)[0];
      float b = w.el(op.operands[1], lane)[0];
      float r = mul ? a * b : a + b;
      w.el(op.result, lane)[0] = f16 ? roundF16(r) : r;
    }
    return;
  }
  case OpKind::ExtF:
    for (int lane = 0; lane < w.lanes; ++lane)
      w.el(op.result, lane)[0] = w.el(op.operands[0], lane)[0];
    return;
  case OpKind::WmmaLoad:
  case OpKind::WmmaStore: {
    const MemInfo &mi = prog_.mems[in.mem];
    auto &buf = mem_[mi.buffer];
    bool store = op.kind == OpKind::WmmaStore;
    const FragmentType &ft = std::get<FragmentType>(
        f_.typeOf(store ? op.operands[0] : op.result));
    int64_t rows = ft.rows(), cols = ft.cols();
    int64_t base = offsetOf(in, mi, w, 0, index);
    if (index[0] + rows > mi.shape[0] || index[1] + cols > mi.shape[1])
      oob(in, mi, {index[0] + rows - 1, index[1] + cols - 1});
    int64_t ld = op.leadingDim;
    if (store) {
      const auto &fr = w.frag[op.operands[0]];
      if (!fr)
        throw SimError("use of an uninitialized fragment in wmma.store");
      for (int64_t i = 0; i < rows; ++i)
        std::copy_n(fr->v.begin() + i * cols, cols,
                    buf.begin() + base + i * ld);
    } else {
      auto fr = std::make_shared<Fragment>();
      for (int64_t i = 0; i < rows; ++i)
        std::copy_n(buf.begin() + base + i * ld, cols,
                    fr->v.begin() + i * cols);
      w.frag[op.result] = std::move(fr);
    }
    if (!gpu_)
      return;
    int eb = static_cast<int>(elemBytes(mi.elem));
    if (prog_.buffers[mi.buffer].shared) {
      // ldmatrix-like: 16-byte row chunks, 8 per phase, chunk-column major.
      int64_t chunks = cols * eb / 16;
      std::vector<std::vector<int64_t>> phases;
      std::vector<int64_t> ph;
      for (int64_t c = 0; c < chunks; ++c)
        for (int64_t r = 0; r < rows; ++r) {
          ph.push_back((base + r * ld) * eb + c * 16);
          if (ph.size() == 8) {
            phases.push_back(std::move(ph));
            ph.clear();
          }
        }
      if (!ph.empty())
        phases.push_back(std::move(ph));
      sharedAccess(w, in, mi, store, std::move(phases), 16);
    } else {
      std::vector<int64_t> rowOffs;
      for (int64_t r = 0; r < rows; ++r)
        rowOffs.push_back(base + r * ld);
      globalAccess(in, mi, store, rowOffs, static_cast<int>(cols * eb), 1);
    }
    return;
  }
  case OpKind::WmmaCompute: {
    const auto &a = w.frag[op.operands[0]];
    const auto &b = w.frag[op.operands[1]];
    const auto &c = w.frag[op.operands[2]];
    if (!a || !b || !c)
      throw SimError("use of an uninitialized fragment in wmma.compute");
    const FragmentType &ft = std::get<FragmentType>(f_.typeOf(op.result));
    auto &slot = w.frag[op.result];
    std::shared_ptr<Fragment> d =
        slot && slot.use_count() == 1 && slot != a && slot != b && slot != c
            ? slot
            : std::make_shared<Fragment>();
    const int64_t M = ft.m, N = ft.n, K = ft.k;
    const float *A = a->v.data(), *B = b->v.data(), *C = c->v.data();
    float *D = d->v.data();
    if (ft.elem == ElemType::F32) {
      for (int64_t i = 0; i < M; ++i)
        for (int64_t j = 0; j < N; ++j) {
          float acc = C[i * N + j];
          for (int64_t k = 0; k < K; ++k)
            acc = acc + A[i * K + k] * B[k * N + j];
          D[i * N + j] = acc;
        }
    } else {
      for (int64_t i = 0; i < M; ++i)
        for (int64_t j = 0; j < N; ++j) {
          float acc = C[i * N + j];
          for (int64_t k = 0; k < K; ++k)
            acc = roundF16(acc + roundF16(A[i * K + k] * B[k * N + j]));
          D[i * N + j] = acc;
        }
    }
    slot = std::move(d);
    ++w.wmmaCount;
    return;
  }
  }
}

} // namespace

Buffers runSequential(const Module &m, const Buffers &inputs) {
  Machine mach(m, false, {}, {});
  return mach.run(inputs);
}

GpuRun runGpu(const GpuKernel &k, const Buffers &inputs,
              const MachineParams &mp, const GpuOptions &opts) {
  Machine mach(k, true, mp, opts);
  GpuRun r;
  r.outputs = mach.run(inputs);
  r.metrics = std::move(mach.metrics);
  return r;
}

Buffers randomInputs(const Module &m, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Buffers out;
  const Function &f = m.func();
  for (ValueId a : f.args) {
    const MemRefType &t = f.memrefType(a);
    std::vector<float> v(static_cast<size_t>(t.footprint() * t.vectorWidth));
    for (float &x : v)
      x = roundTo(t.elem, dist(rng));
    out[f.values[a].name] = std::move(v);
  }
  return out;
}

std::vector<double> referenceMatmul(const Buffers &in, int64_t M, int64_t N,
                                    int64_t K) {
  const auto &A = in.at("A"), &B = in.at("B"), &C = in.at("C");
  std::vector<double> out(static_cast<size_t>(M * N));
  for (int64_t i = 0; i < M; ++i)
    for (int64_t j = 0; j < N; ++j) {
      double acc = C[i * N + j];
      for (int64_t k = 0; k < K; ++k)
        acc += double(A[i * K + k]) * double(B[k * N + j]);
      out[i * N + j] = acc;
    }
  return out;
}

double maxRelativeError(const std::vector<float> &out,
                        const std::vector<double> &ref) {
  double num = 0, den = 0;
  for (size_t i = 0; i < ref.size(); ++i) {
    num = std::max(num, std::fabs(double(out.at(i)) - ref[i]));
    den = std::max(den, std::fabs(ref[i]));
  }
  return den == 0 ? num : num / den;
}

} // namespace tcmm
