//===- printer.cpp - Textual IR printer -----------------------------------===//

#include "tcmm/text.h"

#include <charconv>
#include <sstream>
#include <unordered_map>

namespace tcmm {

namespace {

std::string formatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos)
    s += ".0";
  return s;
}

class Printer {
public:
  explicit Printer(std::ostringstream &os) : os_(os) {}

  void module(const Module &m) {
    os_ << "module {\n";
    for (const Global &g : m.globals) {
      os_ << "  global @" << g.name << " : ";
      if (g.type.isIdentityLayout()) {
        os_ << typeToString(g.type);
      } else {
        MemRefType alloc = MemRefType::get(g.type.allocationShape(),
                                           g.type.elem, g.type.space,
                                           g.type.vectorWidth);
        os_ << typeToString(alloc) << " as " << typeToString(g.type);
      }
      os_ << "\n";
    }
    for (const Function &f : m.funcs)
      function(f);
    os_ << "}\n";
  }

private:
  std::ostringstream &os_;
  const Function *fn_ = nullptr;
  std::unordered_map<ValueId, std::string> names_;
  unsigned next_ = 0;
  int indent_ = 0;

  const std::string &define(ValueId v) {
    const std::string &hint = fn_->values.at(v).name;
    std::string name = hint.empty() ? "%" + std::to_string(next_++) : "%" + hint;
    return names_[v] = std::move(name);
  }
  std::string use(ValueId v) const {
    auto it = names_.find(v);
    return it == names_.end() ? "%<undef" + std::to_string(v) + ">" : it->second;
  }
  void pad() { os_ << std::string(static_cast<size_t>(indent_) * 2, ' '); }

  std::string apply(const AffineApply &a, unsigned result) const {
    return a.map.result(result).str(
        [&](unsigned d) { return use(a.operands.at(d)); });
  }
  std::string indices(const Op &op) const {
    std::string out = use(op.memref) + "[";
    for (unsigned i = 0; i < op.index.map.numResults(); ++i)
      out += (i ? ", " : "") + apply(op.index, i);
    return out + "]";
  }
  std::string list(const std::vector<ValueId> &vs) const {
    std::string out;
    for (size_t i = 0; i < vs.size(); ++i)
      out += (i ? ", " : "") + use(vs[i]);
    return out;
  }
  std::string type(ValueId v) const { return typeToString(fn_->typeOf(v)); }

  void function(const Function &f) {
    fn_ = &f;
    names_.clear();
    next_ = 0;
    os_ << "  func @" << f.name << "(";
    for (size_t i = 0; i < f.args.size(); ++i) {
      os_ << (i ? ", " : "") << define(f.args[i]) << ": " << type(f.args[i]);
    }
    os_ << ")";
    if (f.launch)
      os_ << " launch(grid = [" << f.launch->gridX << ", " << f.launch->gridY
          << "], warps = [" << f.launch->warpsX << ", " << f.launch->warpsY
          << "])";
    os_ << " {\n";
    indent_ = 2;
    block(f.body);
    os_ << "  }\n";
  }

  void block(const Block &b) {
    for (const Node &n : b) {
      if (n.isOp())
        op(n.op());
      else
        loop(n.loop());
    }
  }

  void loop(const Loop &l) {
    pad();
    if (!l.results.empty()) {
      for (size_t i = 0; i < l.results.size(); ++i)
        os_ << (i ? ", " : "") << define(l.results[i]);
      os_ << " = ";
    }
    os_ << "for " << define(l.iv) << " = " << apply(l.lower, 0) << " to "
        << apply(l.upper, 0) << " step " << l.step;
    if (!l.regionArgs.empty()) {
      os_ << " iter_args(";
      for (size_t i = 0; i < l.regionArgs.size(); ++i) {
        std::string init = use(l.inits[i]);
        os_ << (i ? ", " : "") << define(l.regionArgs[i]) << " = " << init;
      }
      os_ << ") -> (";
      for (size_t i = 0; i < l.regionArgs.size(); ++i)
        os_ << (i ? ", " : "") << type(l.regionArgs[i]);
      os_ << ")";
    }
    std::vector<std::string> attrs;
    if (!l.tag.empty())
      attrs.push_back("tag = \"" + l.tag + "\"");
    if (l.parallel)
      attrs.push_back("parallel");
    if (l.mapping)
      attrs.push_back("mapping = \"" + std::string(toString(*l.mapping)) +
                      "\"");
    if (!attrs.empty()) {
      os_ << " {";
      for (size_t i = 0; i < attrs.size(); ++i)
        os_ << (i ? ", " : "") << attrs[i];
      os_ << "}";
    }
    os_ << " {\n";
    ++indent_;
    block(l.body);
    --indent_;
    pad();
    os_ << "}\n";
  }

  void op(const Op &op) {
    pad();
    std::string lhs;
    if (op.hasResult())
      lhs = define(op.result) + " = ";
    os_ << lhs << toString(op.kind);
    std::vector<std::string> attrs;
    if (op.leadingDim)
      attrs.push_back("ld = " + std::to_string(op.leadingDim));
    if (!op.tag.empty())
      attrs.push_back("tag = \"" + op.tag + "\"");
    auto printAttrs = [&] {
      if (attrs.empty())
        return;
      os_ << " {";
      for (size_t i = 0; i < attrs.size(); ++i)
        os_ << (i ? ", " : "") << attrs[i];
      os_ << "}";
    };
    switch (op.kind) {
    case OpKind::Constant:
      if (std::holds_alternative<IndexType>(fn_->typeOf(op.result)))
        os_ << " " << op.intValue;
      else
        os_ << " " << formatDouble(op.floatValue);
      printAttrs();
      os_ << " : " << type(op.result);
      break;
    case OpKind::GetGlobal:
      os_ << " @" << op.symbol;
      printAttrs();
      os_ << " : " << type(op.result);
      break;
    case OpKind::ViewCast:
      os_ << " " << use(op.operands.at(0));
      printAttrs();
      os_ << " : " << type(op.operands.at(0)) << " to " << type(op.result);
      break;
    case OpKind::HwId:
      os_ << " " << toString(op.hw);
      printAttrs();
      break;
    case OpKind::Load:
    case OpKind::VectorLoad:
      os_ << " " << indices(op);
      printAttrs();
      os_ << " : " << type(op.memref);
      break;
    case OpKind::Store:
    case OpKind::VectorStore:
      os_ << " " << use(op.operands.at(0)) << ", " << indices(op);
      printAttrs();
      os_ << " : " << type(op.memref);
      break;
    case OpKind::MulF:
    case OpKind::AddF:
      os_ << " " << list(op.operands);
      printAttrs();
      os_ << " : " << type(op.result);
      break;
    case OpKind::ExtF:
      os_ << " " << use(op.operands.at(0));
      printAttrs();
      os_ << " : " << type(op.operands.at(0)) << " to " << type(op.result);
      break;
    case OpKind::WmmaLoad:
      os_ << " " << indices(op);
      printAttrs();
      os_ << " : " << type(op.memref) << " -> " << type(op.result);
      break;
    case OpKind::WmmaCompute:
      os_ << " " << list(op.operands);
      printAttrs();
      os_ << " : " << type(op.result);
      break;
    case OpKind::WmmaStore:
      os_ << " " << use(op.operands.at(0)) << ", " << indices(op);
      printAttrs();
      os_ << " : " << type(op.memref);
      break;
    case OpKind::Barrier:
      printAttrs();
      break;
    case OpKind::Yield:
      if (!op.operands.empty())
        os_ << " " << list(op.operands);
      printAttrs();
      break;
    }
    os_ << "\n";
  }
};

} // namespace

std::string printModule(const Module &m) {
  std::ostringstream os;
  Printer(os).module(m);
  return os.str();
}

} // namespace tcmm
