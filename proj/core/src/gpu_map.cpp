//===- gpu_map.cpp - Mapping onto the grid/block/warp hierarchy -----------===//

#include "tcmm/gpu_map.h"

#include "loop_utils.h"

#include <algorithm>
#include <map>
#include <sstream>

namespace tcmm {

using namespace detail;

namespace {

bool findParent(Block &b, const Loop *target, Block *&parent, size_t &pos) {
  for (size_t i = 0; i < b.size(); ++i) {
    if (!b[i].isLoop())
      continue;
    if (&b[i].loop() == target) {
      parent = &b;
      pos = i;
      return true;
    }
    if (findParent(b[i].loop().body, target, parent, pos))
      return true;
  }
  return false;
}

void splice(Block &parent, size_t pos, Block body) {
  parent.erase(parent.begin() + static_cast<std::ptrdiff_t>(pos));
  parent.insert(parent.begin() + static_cast<std::ptrdiff_t>(pos),
                std::make_move_iterator(body.begin()),
                std::make_move_iterator(body.end()));
}

} // namespace

PassResult mapToGpu(const Module &in, const TileConfig &cfg,
                    const ProblemConfig &p) {
  const char *pass = "map-gpu";
  Module m = in;
  Function &f = m.func();
  if (f.launch)
    throw PassError(pass, "function is already mapped");
  if (cfg.blockThreads() > 1024)
    throw PassError(pass, "block of " + std::to_string(cfg.blockThreads()) +
                              " threads exceeds 1024");

  const char *tags[] = {"i", "j", "ii", "jj"};
  int64_t expect[] = {p.M / cfg.tbm, p.N / cfg.tbn, cfg.warpsX(), cfg.warpsY()};
  int64_t trips[4];
  for (int d = 0; d < 4; ++d) {
    const Loop *l = findLoop(f.body, tags[d]);
    if (!l)
      throw PassError(pass, std::string("no loop tagged '") + tags[d] + "'");
    if (!l->parallel)
      throw PassError(pass, std::string("loop '") + tags[d] +
                                "' is not marked parallel");
    auto t = l->tripCount();
    if (!t || *t != expect[d])
      throw PassError(pass, std::string("loop '") + tags[d] + "' trip count " +
                                (t ? std::to_string(*t) : "?") +
                                " does not match " + std::to_string(expect[d]));
    trips[d] = *t;
  }
  LaunchConfig launch{trips[0], trips[1], trips[2], trips[3]};

  Block hw;
  ValueId ids[5];
  const HwDim all[] = {HwDim::BlockX, HwDim::BlockY, HwDim::WarpX,
                       HwDim::WarpY, HwDim::Thread};
  for (int d = 0; d < 5; ++d) {
    Op op;
    op.kind = OpKind::HwId;
    op.hw = all[d];
    op.result = f.newValue(IndexType{});
    ids[d] = op.result;
    hw.push_back(op);
  }
  ValueId tid = ids[4];
  {
    size_t at = 0;
    while (at < f.body.size() && f.body[at].isOp() &&
           f.body[at].op().kind == OpKind::GetGlobal)
      ++at;
    f.body.insert(f.body.begin() + static_cast<std::ptrdiff_t>(at),
                  std::make_move_iterator(hw.begin()),
                  std::make_move_iterator(hw.end()));
  }

  for (int d = 0; d < 4; ++d) {
    Loop *l = findLoop(f.body, tags[d]);
    Block *parent = nullptr;
    size_t pos = 0;
    findParent(f.body, l, parent, pos);
    std::vector<ValueId> ops = l->lower.operands;
    ops.push_back(ids[d]);
    AffineApply repl =
        affine(exprOver(l->lower, ops) +
                   AffineExpr::dim(unsigned(ops.size() - 1)) * l->step,
               ops);
    Block body = std::move(l->body);
    substituteInBlock(body, l->iv, repl);
    splice(*parent, pos, std::move(body));
  }

  // Copy nests: thread t of T takes linear vector indices t, t + T, ...
  int64_t T = launch.blockThreads();
  std::vector<std::string> notes;
  std::vector<Loop *> nests;
  walkLoops(f.body, [&](Loop &l) {
    if (isCopyTag(l.tag) && !l.tag.ends_with("_inner"))
      nests.push_back(&l);
  });
  for (Loop *outer : nests) {
    if (outer->body.size() != 1 || !outer->body[0].isLoop())
      throw PassError(pass, "copy nest '" + outer->tag + "' is not 2-d");
    Loop inner = std::move(outer->body[0].loop());
    auto rows = outer->tripCount(), cols = inner.tripCount();
    if (!rows || !cols)
      throw PassError(pass, "copy nest '" + outer->tag +
                                "' has no constant trip count");
    int64_t total = *rows * *cols;
    if (total % T != 0)
      throw PassError(pass, "copy '" + outer->tag + "' of " +
                                std::to_string(total) +
                                " transfers is not divisible by " +
                                std::to_string(T) + " threads");
    Loop dist;
    dist.iv = f.newValue(IndexType{});
    dist.lower = AffineApply::constant(0);
    dist.upper = AffineApply::constant(total / T);
    dist.step = 1;
    dist.tag = outer->tag;
    auto coord = [&](const Loop &l, bool row) {
      std::vector<ValueId> ops = l.lower.operands;
      ops.push_back(dist.iv);
      ops.push_back(tid);
      unsigned di = unsigned(ops.size() - 2), dt = unsigned(ops.size() - 1);
      AffineExpr lin = AffineExpr::dim(di) * T + AffineExpr::dim(dt);
      AffineExpr part = row ? lin.floorDiv(*cols) : lin.mod(*cols);
      return affine(exprOver(l.lower, ops) + part * l.step, ops);
    };
    AffineApply r = coord(*outer, true), c = coord(inner, false);
    dist.body = std::move(inner.body);
    substituteInBlock(dist.body, outer->iv, r);
    substituteInBlock(dist.body, inner.iv, c);
    notes.push_back(outer->tag + ": " + std::to_string(total / T) +
                    " transfers per thread");
    *outer = std::move(dist);
  }

  f.launch = launch;
  notes.insert(notes.begin(),
               "grid " + std::to_string(launch.gridX) + "x" +
                   std::to_string(launch.gridY) + ", warps " +
                   std::to_string(launch.warpsX) + "x" +
                   std::to_string(launch.warpsY) + ", " +
                   std::to_string(T) + " threads per block");
  return finishPass(pass, in, std::move(m), std::move(notes));
}

PassResult finalizePipeline(const GpuKernel &in) {
  const char *pass = "finalize-pipeline";
  Module m = in;
  Function &f = m.func();
  Loop *kl = findLoop(f.body, "k");
  if (!kl)
    return finishPass(pass, in, std::move(m), {"no k loop"});
  Block &b = kl->body;
  size_t lastCompute = 0;
  bool anyCompute = false;
  for (size_t i = 0; i < b.size(); ++i) {
    const Node &n = b[i];
    bool copy = n.isLoop() ? isCopyTag(n.loop().tag) : isCopyTag(n.op().tag);
    bool filler = n.isOp() && (n.op().kind == OpKind::Barrier ||
                               n.op().kind == OpKind::Yield);
    if (!copy && !filler) {
      lastCompute = i;
      anyCompute = true;
    }
  }
  std::vector<size_t> copyLoops;
  for (size_t i = anyCompute ? lastCompute + 1 : b.size(); i < b.size(); ++i)
    if (b[i].isLoop() && isCopyTag(b[i].loop().tag))
      copyLoops.push_back(i);
  if (!anyCompute || copyLoops.empty())
    return finishPass(pass, in, std::move(m),
                      {"no copies trail the compute, unchanged"});

  Block loads, tail;
  Block rest;
  for (size_t i = 0; i < b.size(); ++i) {
    if (std::find(copyLoops.begin(), copyLoops.end(), i) == copyLoops.end()) {
      rest.push_back(std::move(b[i]));
      continue;
    }
    Loop &l = b[i].loop();
    auto trip = l.tripCount();
    if (!trip)
      throw PassError(pass, "copy loop '" + l.tag +
                                "' has no constant trip count");
    for (int64_t t = 0; t < *trip; ++t) {
      ValueMap map;
      Block copy = cloneBlock(f, l.body, map);
      substituteInBlock(copy, l.iv, shifted(l.lower, t * l.step));
      for (Node &n : copy) {
        if (n.isOp() && n.op().readsMemory())
          loads.push_back(std::move(n));
        else
          tail.push_back(std::move(n));
      }
    }
    // Keep the stores where the copy loop was.
    for (Node &n : tail)
      rest.push_back(std::move(n));
    tail.clear();
  }
  size_t at = 0;
  while (at < rest.size() && rest[at].isOp() &&
         rest[at].op().kind == OpKind::Barrier)
    ++at;
  size_t nloads = loads.size();
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(at),
              std::make_move_iterator(loads.begin()),
              std::make_move_iterator(loads.end()));
  b = std::move(rest);
  return finishPass(pass, in, std::move(m),
                    {std::to_string(nloads) +
                     " global loads moved to the k loop top"});
}

GpuKernel stripBarriers(const GpuKernel &k) {
  GpuKernel out = k;
  std::function<void(Block &)> strip = [&](Block &b) {
    std::erase_if(b, [](const Node &n) {
      return n.isOp() && n.op().kind == OpKind::Barrier;
    });
    for (Node &n : b)
      if (n.isLoop())
        strip(n.loop().body);
  };
  for (Function &f : out.funcs)
    strip(f.body);
  return out;
}

} // namespace tcmm

namespace tcmm {

namespace {

class KernelEmitter {
public:
  KernelEmitter(const Module &m) : m_(m), f_(m.func()) {}

  std::string run() {
    out_ << "__global__ void " << f_.name << "(";
    for (size_t i = 0; i < f_.args.size(); ++i) {
      const MemRefType &t = f_.memrefType(f_.args[i]);
      std::string n = f_.values[f_.args[i]].name;
      names_[f_.args[i]] = n;
      out_ << (i ? ", " : "") << elemName(t.elem) << " *" << n;
    }
    out_ << ")";
    if (f_.launch)
      out_ << " // grid(" << f_.launch->gridX << ", " << f_.launch->gridY
           << "), block(" << f_.launch->blockThreads() << ")";
    out_ << "\n{\n";
    for (const Global &g : m_.globals) {
      if (g.type.space != MemorySpace::Shared)
        continue;
      auto ext = g.type.allocationShape();
      line(1) << "__shared__ " << elemName(g.type.elem) << " " << g.name;
      for (int64_t e : ext)
        out_ << "[" << e << "]";
      out_ << ";\n";
    }
    block(f_.body, 1);
    out_ << "}\n";
    return out_.str();
  }

private:
  static std::string elemName(ElemType e) {
    return e == ElemType::F16 ? "half" : "float";
  }

  std::ostream &line(int depth) {
    for (int i = 0; i < depth; ++i)
      out_ << "  ";
    return out_;
  }

  const std::string &name(ValueId v) {
    auto it = names_.find(v);
    if (it != names_.end())
      return it->second;
    return names_[v] = "v" + std::to_string(next_++);
  }

  // Indices are never negative, so C division and remainder agree with
  // floordiv and mod.
  static std::string cOps(std::string s) {
    for (auto [from, to] : {std::pair{" floordiv ", " / "}, {" mod ", " % "}})
      for (size_t at = s.find(from); at != std::string::npos;
           at = s.find(from, at))
        s.replace(at, std::string(from).size(), to);
    return s;
  }

  std::string expr(const AffineApply &a, unsigned r = 0) {
    return cOps(a.map.result(r).str(
        [&](unsigned d) { return name(a.operands.at(d)); }));
  }

  /// Linear element offset of an access, using the memref layout.
  std::string address(const Op &op) {
    const MemRefType &t = f_.memrefType(op.memref);
    std::vector<AffineExpr> idx;
    for (unsigned r = 0; r < op.index.map.numResults(); ++r)
      idx.push_back(op.index.map.result(r));
    AffineExpr lin = t.layout.replaceDims(idx, op.index.map.numDims())
                         .result(0);
    return name(op.memref) + "[" +
           cOps(lin.str(
               [&](unsigned d) { return name(op.index.operands.at(d)); })) +
           "]";
  }

  std::string typeName(ValueId v) {
    const Type &t = f_.typeOf(v);
    if (std::holds_alternative<IndexType>(t))
      return "int";
    if (auto *s = std::get_if<ScalarType>(&t))
      return elemName(s->elem);
    if (auto *vt = std::get_if<VectorType>(&t))
      return elemName(vt->elem) + "x" + std::to_string(vt->width);
    if (auto *ft = std::get_if<FragmentType>(&t)) {
      std::string role = ft->role == FragmentRole::MatA   ? "matrix_a"
                         : ft->role == FragmentRole::MatB ? "matrix_b"
                                                          : "accumulator";
      std::string s = "wmma::fragment<wmma::" + role + ", " +
                      std::to_string(ft->m) + ", " + std::to_string(ft->n) +
                      ", " + std::to_string(ft->k) + ", " + elemName(ft->elem);
      if (ft->role != FragmentRole::Accum)
        s += ", wmma::row_major";
      return s + ">";
    }
    const MemRefType &mt = std::get<MemRefType>(t);
    std::string e = elemName(mt.elem);
    if (mt.vectorWidth > 1)
      e += "x" + std::to_string(mt.vectorWidth);
    return e + " *";
  }

  void block(const Block &b, int depth) {
    for (const Node &n : b) {
      if (n.isLoop())
        loop(n.loop(), depth);
      else
        op(n.op(), depth);
    }
  }

  void loop(const Loop &l, int depth) {
    for (size_t i = 0; i < l.regionArgs.size(); ++i)
      line(depth) << typeName(l.regionArgs[i]) << " " << name(l.regionArgs[i])
                  << " = " << name(l.inits[i]) << ";\n";
    const std::string &iv = name(l.iv);
    line(depth) << "for (int " << iv << " = " << expr(l.lower) << "; " << iv
                << " < " << expr(l.upper) << "; " << iv << " += " << l.step
                << ") {";
    if (!l.tag.empty())
      out_ << " // " << l.tag;
    out_ << "\n";
    owners_.push_back(&l);
    block(l.body, depth + 1);
    owners_.pop_back();
    line(depth) << "}\n";
    for (size_t i = 0; i < l.results.size(); ++i)
      line(depth) << typeName(l.results[i]) << " " << name(l.results[i])
                  << " = " << name(l.regionArgs[i]) << ";\n";
  }

  void op(const Op &op, int depth) {
    auto def = [&]() -> std::ostream & {
      return line(depth) << typeName(op.result) << " " << name(op.result)
                         << " = ";
    };
    switch (op.kind) {
    case OpKind::Constant:
      if (std::holds_alternative<IndexType>(f_.typeOf(op.result)))
        def() << op.intValue << ";\n";
      else
        def() << op.floatValue << ";\n";
      return;
    case OpKind::GetGlobal: {
      const Global *g = m_.global(op.symbol);
      def() << "&" << op.symbol;
      if (g)
        for (size_t i = 0; i < g->type.shape.size(); ++i)
          out_ << "[0]";
      out_ << ";\n";
      return;
    }
    case OpKind::ViewCast:
      def() << "reinterpret_cast<" << typeName(op.result) << ">("
            << name(op.operands[0]) << ");\n";
      return;
    case OpKind::HwId: {
      const char *e = "threadIdx.x";
      int64_t wx = f_.launch ? f_.launch->warpsX : 1;
      std::string w = "threadIdx.x / 32";
      switch (op.hw) {
      case HwDim::BlockX: def() << "blockIdx.x;\n"; return;
      case HwDim::BlockY: def() << "blockIdx.y;\n"; return;
      case HwDim::WarpX: def() << "(" << w << ") % " << wx << ";\n"; return;
      case HwDim::WarpY: def() << "(" << w << ") / " << wx << ";\n"; return;
      case HwDim::Thread: def() << e << ";\n"; return;
      }
      return;
    }
    case OpKind::Load:
    case OpKind::VectorLoad:
      def() << address(op) << ";";
      break;
    case OpKind::Store:
    case OpKind::VectorStore:
      line(depth) << address(op) << " = " << name(op.operands[0]) << ";";
      break;
    case OpKind::MulF:
      def() << name(op.operands[0]) << " * " << name(op.operands[1]) << ";";
      break;
    case OpKind::AddF:
      def() << name(op.operands[0]) << " + " << name(op.operands[1]) << ";";
      break;
    case OpKind::ExtF:
      def() << "(float)" << name(op.operands[0]) << ";";
      break;
    case OpKind::WmmaLoad:
      line(depth) << typeName(op.result) << " " << name(op.result) << ";\n";
      line(depth) << "wmma::load_matrix_sync(" << name(op.result) << ", &"
                  << address(op) << ", " << op.leadingDim;
      if (std::get<FragmentType>(f_.typeOf(op.result)).role ==
          FragmentRole::Accum)
        out_ << ", wmma::mem_row_major";
      out_ << ");";
      break;
    case OpKind::WmmaCompute:
      line(depth) << typeName(op.result) << " " << name(op.result) << ";\n";
      line(depth) << "wmma::mma_sync(" << name(op.result) << ", "
                  << name(op.operands[0]) << ", " << name(op.operands[1])
                  << ", " << name(op.operands[2]) << ");";
      break;
    case OpKind::WmmaStore:
      line(depth) << "wmma::store_matrix_sync(&" << address(op) << ", "
                  << name(op.operands[0]) << ", " << op.leadingDim
                  << ", wmma::mem_row_major);";
      break;
    case OpKind::Barrier:
      line(depth) << "__syncthreads();\n";
      return;
    case OpKind::Yield:
      // Loop-carried values are updated in place.
      if (!owners_.empty())
        for (size_t i = 0; i < op.operands.size(); ++i)
          line(depth) << name(owners_.back()->regionArgs.at(i)) << " = "
                      << name(op.operands[i]) << ";\n";
      return;
    }
    if (!op.tag.empty())
      out_ << " // " << op.tag;
    out_ << "\n";
  }

  const Module &m_;
  const Function &f_;
  std::ostringstream out_;
  std::map<ValueId, std::string> names_;
  std::vector<const Loop *> owners_;
  int next_ = 0;
};

} // namespace

std::string emitKernelText(const GpuKernel &k) {
  if (k.funcs.empty())
    return "";
  return KernelEmitter(k).run();
}

} // namespace tcmm
