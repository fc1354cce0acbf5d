#include "spd/lbm.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace spd {

namespace {

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

// Port names "<prefix><i>_<lane><suffix>" for the nine directions of one lane.
std::vector<std::string> dirs(const std::string& prefix, int lane, const std::string& suffix = "") {
  std::vector<std::string> v;
  for (int i = 0; i < 9; ++i) v.push_back(prefix + std::to_string(i) + "_" + std::to_string(lane) + suffix);
  return v;
}

template <class... V>
std::vector<std::string> cat(V&&... parts) {
  std::vector<std::string> out;
  (out.insert(out.end(), parts.begin(), parts.end()), ...);
  return out;
}

const char* kCoreSpd = R"(Name      core;           # name of this core
Main_In   {main_i::x1,x2,x3,x4}; # main stream in
Main_Out  {main_o::z1,z2};   # main stream out
Brch_In   {brch_i::bin1};   # branch inputs
Brch_Out  {brch_o::bout1};  # branch outputs

Param     c = 123.456;      # define parameter
EQU      Node1,  t1 = x1 * x2;
EQU      Node2,  t2 = x3 + x4;
EQU      Node3,  z1 = t1 - t2 * bin1;
EQU      Node4,  z2 = t1 / t2 + c;
DRCT     (bout1) = (t2);     # port connection
)";

const char* kArraySpd = R"(Name      Array;
Main_In   {main_i::i1,i2,i3,i4,i5,i6,i7,i8};
Main_Out  {main_o::o1,o2,o3};

HDL Node_a, 14, (t1,t2) (b_a) = core(i1,i2,i3,i4) (b_b);
HDL Node_b, 14, (t3,t4) (b_b) = core(i5,i6,i7,i8) (b_a);
HDL Node_c, 14, (o1,o2) = core(t1,t2,t3,t4);
EQU Node_d, o3 = t2 * t4;
)";

// Collision in momentum form. Axis directions reuse mxx/myy; msq is its own
// product sum and the diagonal terms are factored as cu*(3 + 4.5*cu/rho).
const char* kCalcSpd = R"(Name Calc;
Main_In  {Mi::f0,f1,f2,f3,f4,f5,f6,f7,f8, one_tau};
Main_Out {Mo::g0,g1,g2,g3,g4,g5,g6,g7,g8};

Param w0 = 0.44444445;
Param w1 = 0.11111111;
Param w2 = 0.027777778;

##### moments
EQU eRho,  rho  = ((f0+f1)+(f2+f3))+((f4+f5)+(f6+f7))+f8;
EQU eIrho, irho = 1.0/rho;
EQU eMx,   mx   = ((f1-f3)+(f5-f6))-(f7-f8);
EQU eMy,   my   = ((f2-f4)+(f5+f6))-(f7+f8);
EQU eMxx,  mxx  = mx*mx;
EQU eMyy,  myy  = my*my;
EQU eMsq,  msq  = mx*mx + my*my;

##### equilibrium
EQU eFeq0, feq0 = w0*(rho - 1.5*msq*irho);
EQU eFeq1, feq1 = w1*(rho + 3.0*mx + (4.5*mxx - 1.5*msq)*irho);
EQU eFeq2, feq2 = w1*(rho + 3.0*my + (4.5*myy - 1.5*msq)*irho);
EQU eFeq3, feq3 = w1*(rho - 3.0*mx + (4.5*mxx - 1.5*msq)*irho);
EQU eFeq4, feq4 = w1*(rho - 3.0*my + (4.5*myy - 1.5*msq)*irho);
EQU eFeq5, feq5 = w2*((rho - 1.5*msq*irho) + (mx+my)*(3.0 + 4.5*(mx+my)*irho));
EQU eFeq6, feq6 = w2*((rho - 1.5*msq*irho) + (my-mx)*(3.0 + 4.5*(my-mx)*irho));
EQU eFeq7, feq7 = w2*((rho - 1.5*msq*irho) - (mx+my)*(3.0 - 4.5*(mx+my)*irho));
EQU eFeq8, feq8 = w2*((rho - 1.5*msq*irho) + (mx-my)*(3.0 + 4.5*(mx-my)*irho));

##### relaxation
EQU eCol0, g0 = f0 + one_tau*(feq0 - f0);
EQU eCol1, g1 = f1 + one_tau*(feq1 - f1);
EQU eCol2, g2 = f2 + one_tau*(feq2 - f2);
EQU eCol3, g3 = f3 + one_tau*(feq3 - f3);
EQU eCol4, g4 = f4 + one_tau*(feq4 - f4);
EQU eCol5, g5 = f5 + one_tau*(feq5 - f5);
EQU eCol6, g6 = f6 + one_tau*(feq6 - f6);
EQU eCol7, g7 = f7 + one_tau*(feq7 - f7);
EQU eCol8, g8 = f8 + one_tau*(feq8 - f8);
)";

// Tags: 0 interior, 1 wall, 2 inlet, 3 outlet. Every tagged cell bounces its
// moving populations back; inlet/outlet cells also pin f0 to the boundary density.
const char* kBoundarySpd = R"(Name Boundary;
Main_In  {Mi::f0,f1,f2,f3,f4,f5,f6,f7,f8, at, rho_in,rho_out};
Main_Out {Mo::g0,g1,g2,g3,g4,g5,g6,g7,g8, oat};

HDL cBounce, 1, (bb)  = Comparator(at), op=ne, type=int, imm=0;
HDL cOpen,   1, (io)  = Comparator(at), op=ge, type=int, imm=2;
HDL cInlet,  1, (inl) = Comparator(at), op=eq, type=int, imm=2;
HDL mRho,    1, (rho_b) = SyncMux(inl, rho_out, rho_in);

HDL m0, 1, (g0) = SyncMux(io, f0, rho_b);
HDL m1, 1, (g1) = SyncMux(bb, f1, f3);
HDL m2, 1, (g2) = SyncMux(bb, f2, f4);
HDL m3, 1, (g3) = SyncMux(bb, f3, f1);
HDL m4, 1, (g4) = SyncMux(bb, f4, f2);
HDL m5, 1, (g5) = SyncMux(bb, f5, f7);
HDL m6, 1, (g6) = SyncMux(bb, f6, f8);
HDL m7, 1, (g7) = SyncMux(bb, f7, f5);
HDL m8, 1, (g8) = SyncMux(bb, f8, f6);
DRCT (oat) = (at);
)";

constexpr std::int64_t kCalcDelay = 90;
constexpr std::int64_t kBoundaryDelay = 40;
constexpr std::int64_t kTransMargin = 3;

std::int64_t stencil_latency(std::int64_t offset, int n) { return offset > 0 ? (offset + n - 1) / n : 0; }

std::string trans_source(int width, int n) {
  std::ostringstream os;
  std::vector<std::string> ins, outs;
  for (int l = 0; l < n; ++l) {
    ins = cat(ins, dirs("f", l), std::vector<std::string>{"at_" + std::to_string(l)});
    outs = cat(outs, dirs("g", l), std::vector<std::string>{"gat_" + std::to_string(l)});
  }
  os << "Name Transx" << n << ";\n";
  os << "Main_In  {Mi::" << join(ins) << ", sop,eop};\n";
  os << "Main_Out {Mo::" << join(outs) << ", sop,eop};\n\n";
  os << "##### pull translation: direction i reads the cell at -(cx + " << width << "*cy)\n";
  for (int i = 0; i < 9; ++i) {
    const std::int64_t off = -(kCx[i] + static_cast<std::int64_t>(width) * kCy[i]);
    std::vector<std::string> o, in;
    for (int l = 0; l < n; ++l) {
      o.push_back("g" + std::to_string(i) + "_" + std::to_string(l));
      in.push_back("f" + std::to_string(i) + "_" + std::to_string(l));
    }
    os << "HDL uShift" << i << ", " << stencil_latency(off, n) << ", (" << join(o) << ") = Stencil2D(" << join(in)
       << "), offsets={" << off << "}, row=" << width << ", lanes=" << n << ";\n";
  }
  std::vector<std::string> ao, ai;
  for (int l = 0; l < n; ++l) {
    ao.push_back("gat_" + std::to_string(l));
    ai.push_back("at_" + std::to_string(l));
  }
  os << "HDL uShiftAt, 0, (" << join(ao) << ") = Stencil2D(" << join(ai) << "), offsets={0}, row=" << width
     << ", lanes=" << n << ";\n";
  os << "DRCT (Mo::sop, Mo::eop) = (Mi::sop, Mi::eop);\n";
  return os.str();
}

std::int64_t pe_depth(int width, int n) { return kCalcDelay + trans_delay(width, n) + kBoundaryDelay; }

// Declared delay of a PE instance inside the tops. The shipped 720-wide x1
// tops keep the published 495, which is below the real PE depth (see the
// elaborator warning); everything else declares the PE depth plus its I/O stage.
std::int64_t pe_declared(int width, int n) {
  if (width == 720 && n == 1) return 495;
  return pe_depth(width, n) + 1;
}

std::string pe_source(int width, int n) {
  std::ostringstream os;
  const std::string N = std::to_string(n);
  std::vector<std::string> ins, outs;
  for (int l = 0; l < n; ++l) {
    ins = cat(ins, dirs("if", l), std::vector<std::string>{"iat_" + std::to_string(l)});
    outs = cat(outs, dirs("of", l), std::vector<std::string>{"oat_" + std::to_string(l)});
  }
  os << "Name PEx" << N << ";\n";
  os << "Main_In {Mi::" << join(ins) << ",\nsop,eop, one_tau,rho_in,rho_out};\n";
  os << "Main_Out {Mo::" << join(outs) << ",\nsop,eop};\n\n";

  os << "##### Calculation stage (x" << N << " parallel)\n";
  for (int l = 0; l < n; ++l)
    os << "HDL uCalc" << l << ", " << kCalcDelay << ",\n(" << join(dirs("f", l, "_c")) << ") =\nCalc("
       << join(dirs("if", l)) << ", one_tau);\n";

  os << "\n##### Translation stage (x" << N << " parallel buffer)\n";
  std::vector<std::string> t_out, t_in;
  for (int l = 0; l < n; ++l) {
    t_out = cat(t_out, dirs("f", l, "_t"), std::vector<std::string>{"at_" + std::to_string(l) + "_t"});
    t_in = cat(t_in, dirs("f", l, "_c"), std::vector<std::string>{"iat_" + std::to_string(l)});
  }
  os << "HDL uTransx" << N << ", " << trans_delay(width, n) << ",\n(" << join(t_out) << ",\nMo::sop,Mo::eop) =\nTransx"
     << N << "(" << join(t_in) << ",\nMi::sop,Mi::eop);\n";

  os << "\n##### Boundary stage (x" << N << " parallel)\n";
  for (int l = 0; l < n; ++l) {
    const std::string L = std::to_string(l);
    os << "HDL uBoundary" << L << ", " << kBoundaryDelay << ",\n(" << join(dirs("f", l, "_b")) << ",at_" << L
       << "_b) =\nBoundary(" << join(dirs("f", l, "_t")) << ",at_" << L << "_t,\nrho_in,rho_out);\n";
  }
  os << "\n";
  for (int l = 0; l < n; ++l)
    os << "DRCT (" << join(dirs("of", l)) << ") =\n(" << join(dirs("f", l, "_b")) << ");\n";
  std::vector<std::string> ao, ab;
  for (int l = 0; l < n; ++l) {
    ao.push_back("oat_" + std::to_string(l));
    ab.push_back("at_" + std::to_string(l) + "_b");
  }
  os << "DRCT (" << join(ao, ", ") << ") = (" << join(ab, ", ") << ");\n";
  return os.str();
}

std::string top_source(int width, int n, int m) {
  std::ostringstream os;
  const std::string N = std::to_string(n);
  std::vector<std::string> ins, outs;
  for (int l = 0; l < n; ++l) {
    ins = cat(ins, dirs("if", l), std::vector<std::string>{"iAtr_" + std::to_string(l)});
    outs = cat(outs, dirs("of", l), std::vector<std::string>{"oAtr_" + std::to_string(l)});
  }
  os << "Name      " << lbm_top_name(n, m) << ";\n";
  os << "Main_In   {Mi::" << join(ins) << ",sop,eop};\n";
  os << "Main_Out  {Mo::" << join(outs) << ",sop,eop};\n";
  os << "Append_Reg {Mi::one_tau, rho_in, rho_out}; ## Definition of constant inputs\n";
  auto stage_outs = [&](int k) {
    std::vector<std::string> v;
    for (int l = 0; l < n; ++l)
      v = cat(v, dirs("f", l, "_" + std::to_string(k)),
              std::vector<std::string>{"Atr_" + std::to_string(l) + "_" + std::to_string(k)});
    return v;
  };
  for (int k = 1; k <= m; ++k) {
    const std::string K = std::to_string(k);
    os << "\n##### PEx" << N << "_" << K << "\n";
    os << "HDL Core_" << K << ", " << pe_declared(width, n) << ",\n(" << join(stage_outs(k)) << ",\nsop_" << K
       << ",eop_" << K << ") =\nPEx" << N << "(";
    if (k == 1)
      os << join(ins) << ",\nMi::sop,Mi::eop, one_tau,rho_in,rho_out);\n";
    else
      os << join(stage_outs(k - 1)) << ",\nsop_" << k - 1 << ",eop_" << k - 1 << ", one_tau,rho_in,rho_out);\n";
  }
  os << "\n";
  const std::string M = std::to_string(m);
  for (int l = 0; l < n; ++l) {
    std::vector<std::string> o = dirs("of", l), s = dirs("f", l, "_" + M);
    os << "DRCT (" << join(o, ", ") << ") =\n(" << join(s) << ");\n";
  }
  std::vector<std::string> ao, as;
  for (int l = 0; l < n; ++l) {
    ao.push_back("oAtr_" + std::to_string(l));
    as.push_back("Atr_" + std::to_string(l) + "_" + M);
  }
  os << "DRCT (" << join(ao, ", ") << ", Mo::sop, Mo::eop) = (" << join(as, ", ") << ", sop_" << M << ", eop_" << M
     << ");\n";
  return os.str();
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::int64_t trans_delay(int width, int n) { return (width + 1 + n - 1) / n + kTransMargin; }

std::string lbm_top_name(int n, int m) {
  if (n == 1) return "mQsys_Core" + std::to_string(m);
  return "mQsys_Corex" + std::to_string(n) + "_" + std::to_string(m);
}

std::vector<CorpusFile> build_corpus(int width) {
  if (width < 2) throw SpdError("grid width must be at least 2");
  std::vector<CorpusFile> c = {
      {"core.spd", kCoreSpd},
      {"array.spd", kArraySpd},
      {"calc.spd", kCalcSpd},
      {"boundary.spd", kBoundarySpd},
  };
  for (int n : {1, 2, 4}) {
    if (width % n) continue;
    c.push_back({"transx" + std::to_string(n) + ".spd", trans_source(width, n)});
    c.push_back({"pex" + std::to_string(n) + ".spd", pe_source(width, n)});
  }
  const std::pair<int, int> tops[] = {{1, 1}, {1, 2}, {1, 4}, {2, 1}, {2, 2}, {4, 1}};
  for (auto [n, m] : tops)
    if (width % n == 0) c.push_back({lower(lbm_top_name(n, m)) + ".spd", top_source(width, n, m)});
  return c;
}

ModuleLibrary corpus_library(int width) {
  ModuleLibrary lib;
  for (const auto& f : build_corpus(width)) lib.add_source(f.source, f.file);
  return lib;
}

// ---------------------------------------------------------------------------
// Oracle

Cell lbm_collide(const Cell& f, float one_tau) {
  const float w0 = 0.44444445f, w1 = 0.11111111f, w2 = 0.027777778f;
  const float f0 = f[0], f1 = f[1], f2 = f[2], f3 = f[3], f4 = f[4], f5 = f[5], f6 = f[6], f7 = f[7], f8 = f[8];
  const float rho = ((f0 + f1) + (f2 + f3)) + ((f4 + f5) + (f6 + f7)) + f8;
  const float irho = 1.0f / rho;
  const float mx = ((f1 - f3) + (f5 - f6)) - (f7 - f8);
  const float my = ((f2 - f4) + (f5 + f6)) - (f7 + f8);
  const float mxx = mx * mx;
  const float myy = my * my;
  const float msq = mx * mx + my * my;
  Cell feq;
  feq[0] = w0 * (rho - 1.5f * msq * irho);
  feq[1] = w1 * (rho + 3.0f * mx + (4.5f * mxx - 1.5f * msq) * irho);
  feq[2] = w1 * (rho + 3.0f * my + (4.5f * myy - 1.5f * msq) * irho);
  feq[3] = w1 * (rho - 3.0f * mx + (4.5f * mxx - 1.5f * msq) * irho);
  feq[4] = w1 * (rho - 3.0f * my + (4.5f * myy - 1.5f * msq) * irho);
  feq[5] = w2 * ((rho - 1.5f * msq * irho) + (mx + my) * (3.0f + 4.5f * (mx + my) * irho));
  feq[6] = w2 * ((rho - 1.5f * msq * irho) + (my - mx) * (3.0f + 4.5f * (my - mx) * irho));
  feq[7] = w2 * ((rho - 1.5f * msq * irho) - (mx + my) * (3.0f - 4.5f * (mx + my) * irho));
  feq[8] = w2 * ((rho - 1.5f * msq * irho) + (mx - my) * (3.0f + 4.5f * (mx - my) * irho));
  Cell out;
  for (int i = 0; i < 9; ++i) out[i] = f[i] + one_tau * (feq[i] - f[i]);
  return out;
}

Cell lbm_boundary(const Cell& f, std::uint32_t tag, float rho_in, float rho_out) {
  const bool bounce = tag != kInterior;
  const bool open = static_cast<std::int32_t>(tag) >= 2;
  const float rho_b = tag == kInlet ? rho_in : rho_out;
  Cell g;
  g[0] = open ? rho_b : f[0];
  for (int i = 1; i < 9; ++i) g[i] = bounce ? f[kOpposite[i]] : f[i];
  return g;
}

LbmGrid lbm_step(const LbmGrid& g, Topology topo) {
  const std::int64_t T = static_cast<std::int64_t>(g.cells());
  std::vector<Cell> post(g.f.size());
  for (std::size_t p = 0; p < g.f.size(); ++p) post[p] = lbm_collide(g.f[p], g.one_tau);
  LbmGrid out = g;
  for (std::int64_t p = 0; p < T; ++p) {
    Cell t;
    const int x = static_cast<int>(p % g.width), y = static_cast<int>(p / g.width);
    for (int i = 0; i < 9; ++i) {
      if (topo == Topology::Streamed) {
        const std::int64_t src = p - (kCx[i] + static_cast<std::int64_t>(g.width) * kCy[i]);
        t[i] = src >= 0 && src < T ? post[static_cast<std::size_t>(src)][i] : 0.0f;
      } else {
        const int sx = ((x - kCx[i]) % g.width + g.width) % g.width;
        const int sy = ((y - kCy[i]) % g.height + g.height) % g.height;
        t[i] = post[static_cast<std::size_t>(sy) * g.width + sx][i];
      }
    }
    out.f[static_cast<std::size_t>(p)] = lbm_boundary(t, g.tag[static_cast<std::size_t>(p)], g.rho_in, g.rho_out);
  }
  return out;
}

LbmGrid lbm_oracle(const LbmGrid& g, int steps, Topology topo) {
  if (steps < 0) throw SpdError("negative step count");
  LbmGrid cur = g;
  for (int s = 0; s < steps; ++s) cur = lbm_step(cur, topo);
  return cur;
}

namespace {

Cell equilibrium(double rho, double ux, double uy) {
  const double w[9] = {4.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36};
  Cell f;
  const double usq = ux * ux + uy * uy;
  for (int i = 0; i < 9; ++i) {
    const double cu = kCx[i] * ux + kCy[i] * uy;
    f[i] = static_cast<float>(w[i] * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq));
  }
  return f;
}

LbmGrid blank(int width, int height) {
  if (width < 1 || height < 1) throw SpdError("grid dimensions must be positive");
  LbmGrid g;
  g.width = width;
  g.height = height;
  g.f.resize(g.cells());
  g.tag.assign(g.cells(), kInterior);
  return g;
}

void perturb(LbmGrid& g) {
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      const double rho = 1.0 + 0.02 * std::sin(0.37 * x + 0.11 * y);
      const double ux = 0.03 * std::cos(0.23 * y), uy = 0.01 * std::sin(0.29 * x);
      g.f[static_cast<std::size_t>(y) * g.width + x] = equilibrium(rho, ux, uy);
    }
}

}  // namespace

LbmGrid lbm_equilibrium_grid(int width, int height, float rho, float ux, float uy, float one_tau) {
  LbmGrid g = blank(width, height);
  g.one_tau = one_tau;
  Cell c = equilibrium(rho, ux, uy);
  for (int it = 0;; ++it) {
    Cell next = lbm_collide(c, one_tau);
    if (next == c) break;
    if (it == 10000) throw SpdError("collision did not reach a fixed point");
    c = next;
  }
  std::fill(g.f.begin(), g.f.end(), c);
  return g;
}

LbmGrid lbm_channel_grid(int width, int height) {
  LbmGrid g = blank(width, height);
  perturb(g);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      std::uint32_t t = kInterior;
      if (y == 0 || y == height - 1)
        t = kWall;
      else if (x == 0)
        t = kInlet;
      else if (x == width - 1)
        t = kOutlet;
      g.tag[static_cast<std::size_t>(y) * width + x] = t;
    }
  g.one_tau = 1.25f;
  g.rho_in = 1.01f;
  g.rho_out = 0.99f;
  return g;
}

LbmGrid lbm_interior_grid(int width, int height) {
  LbmGrid g = blank(width, height);
  perturb(g);
  g.one_tau = 1.25f;
  return g;
}

double lbm_mass(const LbmGrid& g) {
  double sum = 0.0, comp = 0.0;
  for (const auto& c : g.f)
    for (float v : c) {
      const double t = sum + v;
      comp += std::abs(sum) >= std::abs(static_cast<double>(v)) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
  return sum + comp;
}

StreamSet lbm_to_streams(const LbmGrid& g, int n) {
  if (n < 1 || g.cells() % static_cast<std::size_t>(n)) throw SpdError("grid size is not a multiple of the lane count");
  StreamSet s;
  const std::size_t groups = g.cells() / static_cast<std::size_t>(n);
  for (int l = 0; l < n; ++l) {
    const std::string L = std::to_string(l);
    for (int i = 0; i < 9; ++i) {
      auto& w = s.streams["if" + std::to_string(i) + "_" + L];
      w.resize(groups);
      for (std::size_t k = 0; k < groups; ++k) w[k] = std::bit_cast<std::uint32_t>(g.f[k * n + l][i]);
    }
    auto& a = s.streams["iAtr_" + L];
    a.resize(groups);
    for (std::size_t k = 0; k < groups; ++k) a[k] = g.tag[k * n + l];
  }
  s.set_constant("one_tau", g.one_tau);
  s.set_constant("rho_in", g.rho_in);
  s.set_constant("rho_out", g.rho_out);
  return s;
}

LbmGrid lbm_from_streams(const StreamSet& out, const LbmGrid& like, int n) {
  LbmGrid g = like;
  const std::size_t groups = g.cells() / static_cast<std::size_t>(n);
  auto port = [&](const std::string& name) -> const std::vector<std::uint32_t>& {
    auto it = out.streams.find(name);
    if (it == out.streams.end()) throw SpdError("kernel output " + name + " missing");
    if (it->second.size() != groups)
      throw SpdError("kernel output " + name + " has " + std::to_string(it->second.size()) + " elements, expected " +
                     std::to_string(groups));
    return it->second;
  };
  for (int l = 0; l < n; ++l) {
    const std::string L = std::to_string(l);
    for (int i = 0; i < 9; ++i) {
      const auto& w = port("of" + std::to_string(i) + "_" + L);
      for (std::size_t k = 0; k < groups; ++k) g.f[k * n + l][i] = std::bit_cast<float>(w[k]);
    }
    const auto& a = port("oAtr_" + L);
    for (std::size_t k = 0; k < groups; ++k) g.tag[k * n + l] = a[k];
  }
  return g;
}

VerifyReport verify_kernel(const ModuleLibrary& lib, int n, int m, const LbmGrid& grid, int steps) {
  if (m < 1 || steps < 1 || steps % m) throw SpdError("steps must be a positive multiple of m");
  const SpdModule* top = lib.find(lbm_top_name(n, m));
  if (!top) throw SpdError("no top design " + lbm_top_name(n, m) + " in the library");
  const Dfg g = elaborate(*top, lib);

  VerifyReport rep;
  LbmGrid cur = grid, expect = grid;
  for (int pass = 0; pass < steps / m; ++pass) {
    SimResult r = simulate(g, lbm_to_streams(cur, n));
    rep.cycles += r.counters.total_cycles;
    ++rep.passes;
    cur = lbm_from_streams(r.outputs, grid, n);
    expect = lbm_oracle(expect, m);
    for (std::size_t p = 0; p < cur.cells(); ++p) {
      auto fail = [&](const std::string& field, std::uint32_t got, std::uint32_t want) {
        rep.step = (pass + 1) * m;
        rep.cell = p;
        rep.field = field;
        std::ostringstream os;
        os << "step " << rep.step << ", cell " << p << " (x=" << p % grid.width << ", y=" << p / grid.width << "), "
           << field << ": kernel 0x" << std::hex << got << ", oracle 0x" << want;
        rep.message = os.str();
        return rep;
      };
      if (cur.tag[p] != expect.tag[p]) return fail("tag", cur.tag[p], expect.tag[p]);
      for (int i = 0; i < 9; ++i) {
        const auto a = std::bit_cast<std::uint32_t>(cur.f[p][i]), b = std::bit_cast<std::uint32_t>(expect.f[p][i]);
        if (a != b) return fail("f" + std::to_string(i), a, b);
      }
    }
  }
  rep.pass = true;
  rep.message = "bit-exact over " + std::to_string(steps) + " steps";
  return rep;
}

}  // namespace spd
