//===- config.cpp - Problem and tiling knobs ------------------------------===//

#include "tcmm/config.h"

namespace tcmm {

namespace {

void divides(std::vector<std::string> &out, const char *what, int64_t a,
             const char *aName, int64_t b, const char *bName) {
  if (b <= 0 || a % b != 0)
    out.push_back(std::string(what) + ": " + aName + "=" + std::to_string(a) +
                  " is not a multiple of " + bName + "=" + std::to_string(b));
}

} // namespace

std::vector<std::string> configViolations(const ProblemConfig &p,
                                          const TileConfig &t) {
  std::vector<std::string> out;
  if (p.M <= 0 || p.N <= 0 || p.K <= 0)
    out.push_back("problem: M, N, K must be positive");
  if (t.tbm <= 0 || t.tbn <= 0 || t.tbk <= 0 || t.wm <= 0 || t.wn <= 0) {
    out.push_back("tile: all tile extents must be positive");
    return out;
  }
  divides(out, "M", p.M, "M", t.tbm, "tbm");
  divides(out, "N", p.N, "N", t.tbn, "tbn");
  divides(out, "K", p.K, "K", t.tbk, "tbk");
  divides(out, "warp m", t.tbm, "tbm", t.wm, "wm");
  divides(out, "warp n", t.tbn, "tbn", t.wn, "wn");
  divides(out, "wmma m", t.wm, "wm", TileConfig::wmmaM, "wmmaM");
  divides(out, "wmma n", t.wn, "wn", TileConfig::wmmaN, "wmmaN");
  divides(out, "wmma k", t.tbk, "tbk", TileConfig::wmmaK, "wmmaK");
  for (auto [name, pad] : {std::pair{"paddingA", t.paddingA},
                           std::pair{"paddingB", t.paddingB}})
    if (pad < 0 || pad % 8 != 0 || pad > 40)
      out.push_back(std::string("padding: ") + name + "=" +
                    std::to_string(pad) +
                    " must be a multiple of 8 in [0, 40]");
  if (t.vectorBits != 32 && t.vectorBits != 64 &&
      t.vectorBits != 128)
    out.push_back("vector: width " + std::to_string(t.vectorBits) +
                  " is not one of 32, 64, 128");
  else {
    divides(out, "vector a row", t.tbk, "tbk", t.vectorElems(), "vector elems");
    divides(out, "vector b row", t.tbn, "tbn", t.vectorElems(), "vector elems");
    if (t.tbm % t.wm == 0 && t.tbn % t.wn == 0) {
      int64_t threads = t.blockThreads();
      divides(out, "copy a", t.tbm * t.tbk / t.vectorElems(), "vectors",
              threads, "block threads");
      divides(out, "copy b", t.tbk * t.tbn / t.vectorElems(), "vectors",
              threads, "block threads");
    }
  }
  return out;
}

} // namespace tcmm
