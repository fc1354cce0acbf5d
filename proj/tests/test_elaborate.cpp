#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dag_oracle.hpp"
#include "spd/dfg.hpp"
#include "spd/lbm.hpp"

using namespace spd;

namespace {

const char* kCore = R"(Name core;
Main_In {main_i::x1,x2,x3,x4};
Main_Out {main_o::z1,z2};
Brch_In {brch_i::bin1};
Brch_Out {brch_o::bout1};
Param c = 123.456;
EQU Node1, t1 = x1 * x2;
EQU Node2, t2 = x3 + x4;
EQU Node3, z1 = t1 - t2 * bin1;
EQU Node4, z2 = t1 / t2 + c;
DRCT (bout1) = (t2);
)";

ElabOptions bare() {
  ElabOptions o;
  o.io_register_stages = 0;
  return o;
}

Dfg build(const std::vector<std::string>& sources, const std::string& top, ElabOptions o = bare()) {
  ModuleLibrary lib;
  for (const auto& s : sources) lib.add_source(s);
  return elaborate(*lib.find(top), lib, o);
}

const Edge* edge_between(const Dfg& g, const std::string& src, const std::string& dst) {
  const int s = g.find(src), d = g.find(dst);
  for (const auto& e : g.edges)
    if (e.src == s && e.dst == d) return &e;
  return nullptr;
}

const std::string kDelay5 = "Name d5;\nMain_In {Mi::a};\nMain_Out {Mo::b};\nHDL h, 5, (b) = Delay(a), k=5;\n";

}  // namespace

TEST_CASE("core example: operators, constants and depth") {
  Dfg g = build({kCore}, "core");
  // z2 = (x1*x2)/(x3+x4) + c: max(mul 5, add 7) + div 14 + add 7
  CHECK(g.depth == 28);
  OpCensus c = census(g);
  CHECK(c.adders == 3);
  CHECK(c.multipliers == 2);
  CHECK(c.dividers == 1);
  CHECK(c.n_flops == 6);

  CHECK(g.vertices[g.find("Node1")].op == OpKind::Mul);
  CHECK(g.vertices[g.find("Node4")].op == OpKind::Add);
  CHECK(g.vertices[g.find("Node4")].latency == 7);
  // the multiply feeding the divide waits for the slower add
  CHECK(edge_between(g, "Node1", "Node4.t0")->delay == 2);
  std::string why;
  CHECK_MESSAGE(oracle::balanced(g, &why), why);
  CHECK(oracle::output_depth(g) == g.depth);
}

TEST_CASE("top-level branch ports are aligned like main ports") {
  Dfg g = build({kCore}, "core");
  const int bout = g.find("bout1");
  REQUIRE(bout >= 0);
  CHECK(g.vertices[bout].kind == VertexKind::Output);
  CHECK(g.vertices[bout].branch_port);
  for (const auto& e : g.edges)
    if (e.dst == bout) {
      CHECK(e.kind == EdgeKind::Main);
      // t2 leaves at 7 and is held until the common exit at 28
      CHECK(e.delay == 21);
    }
}

TEST_CASE("io register stages add to the depth") {
  for (int k : {0, 1, 3}) {
    ElabOptions o;
    o.io_register_stages = k;
    CHECK(build({kCore}, "core", o).depth == 28 + k);
  }
}

TEST_CASE("operator latencies are configuration") {
  ElabOptions o = bare();
  o.latencies.div = 30;
  CHECK(build({kCore}, "core", o).depth == 44);
}

TEST_CASE("sibling branch bindings are branch edges and unaligned") {
  const std::string array = R"(Name Array;
Main_In   {main_i::i1,i2,i3,i4,i5,i6,i7,i8};
Main_Out  {main_o::o1,o2,o3};
HDL Node_a, 14, (t1,t2) (b_a) = core(i1,i2,i3,i4) (b_b);
HDL Node_b, 14, (t3,t4) (b_b) = core(i5,i6,i7,i8) (b_a);
HDL Node_c, 14, (o1,o2) = core(t1,t2,t3,t4);
EQU Node_d, o3 = t2 * t4;
)";
  SUBCASE("opaque") {
    ElabOptions o = bare();
    o.flatten_depth = 0;
    Dfg g = build({kCore, array}, "Array", o);
    int branch = 0;
    for (const auto& e : g.edges)
      if (e.kind == EdgeKind::Branch) {
        ++branch;
        CHECK(e.delay == 0);
      }
    // b_a, b_b and the tie-off of Node_c's unbound branch input
    CHECK(branch == 3);
    CHECK(g.vertices[g.find("Node_a")].kind == VertexKind::Module);
    CHECK(g.depth == 28);
    CHECK_THROWS_WITH_AS(census(g), doctest::Contains("opaque"), SpdError);
  }
  SUBCASE("flattened") {
    Dfg g = build({kCore, array}, "Array");
    // core is 28 deep, padded to nothing since 28 > 14: warning, real depth used
    CHECK(g.depth == 56);
    CHECK_FALSE(g.warnings.empty());
    OpCensus c = census(g);
    CHECK(c.n_flops == 3 * 6 + 1);
    std::string why;
    CHECK_MESSAGE(oracle::balanced(g, &why), why);
  }
}

TEST_CASE("declared delay pads a flattened instance") {
  const std::string top = "Name t;\nMain_In {Mi::x};\nMain_Out {Mo::y};\nHDL u, 12, (y) = d5(x);\n";
  Dfg g = build({kDelay5, top}, "t");
  CHECK(g.depth == 12);
  CHECK(g.warnings.empty());
}

TEST_CASE("sequential instances add their declared delays") {
  const std::string top = R"(Name t;
Main_In {Mi::x};
Main_Out {Mo::y};
HDL u1, 5, (m1) = d5(x);
HDL u2, 9, (m2) = d5(m1);
HDL u3, 5, (y) = d5(m2);
)";
  Dfg g = build({kDelay5, top}, "t");
  CHECK(g.depth == 19);
  for (const auto& e : g.edges) CHECK(e.delay == 0);
}

TEST_CASE("flattened instances keep their internal alignment") {
  // the short path through the sub-module must still wait for the long one
  const std::string sub = R"(Name two;
Main_In {Mi::a,b};
Main_Out {Mo::p,q};
HDL h1, 1, (p) = Delay(a), k=1;
HDL h2, 9, (q) = Delay(b), k=9;
)";
  const std::string top = R"(Name t;
Main_In {Mi::x};
Main_Out {Mo::y,z};
HDL u, 9, (p1,q1) = two(x, x);
HDL v, 4, (y) = Delay(p1), k=4;
DRCT (z) = (q1);
)";
  Dfg g = build({sub, top}, "t");
  CHECK(g.depth == 13);
  std::string why;
  CHECK_MESSAGE(oracle::balanced(g, &why), why);
}

TEST_CASE("primitive declared below its natural latency warns") {
  const std::string top =
      "Name t;\nMain_In {Mi::x};\nMain_Out {Mo::y};\nHDL s, 1, (y) = Stencil2D(x), offsets={4}, row=4, lanes=1;\n";
  Dfg g = build({top}, "t");
  CHECK(g.depth == 4);
  REQUIRE(g.warnings.size() == 1);
  CHECK(g.warnings[0].find("below primitive latency") != std::string::npos);
}

TEST_CASE("elaboration errors") {
  SUBCASE("cycle through equations") {
    const std::string top = "Name t;\nMain_In {Mi::x};\nMain_Out {Mo::y};\nEQU a, p = x + q;\nEQU b, q = p * x;\n"
                            "DRCT (y) = (q);\n";
    CHECK_THROWS_WITH_AS(build({top}, "t"), doctest::Contains("unschedulable"), SpdError);
  }
  SUBCASE("unknown module") {
    const std::string top = "Name t;\nMain_In {Mi::x};\nMain_Out {Mo::y};\nHDL u, 3, (y) = nothing(x);\n";
    CHECK_THROWS_WITH_AS(build({top}, "t"), doctest::Contains("nothing"), SpdError);
  }
  SUBCASE("recursion") {
    const std::string top = "Name t;\nMain_In {Mi::x};\nMain_Out {Mo::y};\nHDL u, 3, (y) = t(x);\n";
    CHECK_THROWS_AS(build({top}, "t"), SpdError);
  }
  SUBCASE("arity mismatch") {
    const std::string top = "Name t;\nMain_In {Mi::x};\nMain_Out {Mo::y};\nHDL u, 5, (y) = d5(x, x);\n";
    CHECK_THROWS_AS(build({kDelay5, top}, "t"), SpdError);
  }
  SUBCASE("invalid module") {
    const std::string top = "Name t;\nMain_In {Mi::x};\nMain_Out {Mo::y};\nEQU a, y = x + w;\n";
    CHECK_THROWS_WITH_AS(build({top}, "t"), doctest::Contains("w unresolved"), SpdError);
  }
}

TEST_CASE("equalization is idempotent and balances random graphs") {
  oracle::Lcg rng(7);
  for (int i = 0; i < 100; ++i) {
    Dfg g = equalize_delays(oracle::random_dag(rng));
    std::string why;
    REQUIRE_MESSAGE(oracle::balanced(g, &why), why);
    CHECK(equalize_delays(g) == g);
    CHECK(oracle::output_depth(g) == g.depth);
  }
}

TEST_CASE("cascade depth is m times the copy depth") {
  oracle::Lcg rng(11);
  for (int i = 0; i < 30; ++i) {
    Dfg g = equalize_delays(oracle::random_dag(rng));
    for (int m : {1, 2, 5}) {
      Dfg c = cascade(g, m);
      CHECK(c.depth == m * g.depth);
      CHECK(oracle::balanced(c));
      CHECK(c.inputs.size() == g.inputs.size());
    }
  }
  CHECK_THROWS_AS(cascade(Dfg{}, 0), SpdError);
}

TEST_CASE("equalize rejects zero-latency loops and cycles") {
  Dfg g;
  Vertex a;
  a.name = "a";
  a.kind = VertexKind::Primitive;
  Vertex b = a;
  b.name = "b";
  g.add_vertex(a);
  g.add_vertex(b);
  g.connect(0, 0, 1, 0);
  g.connect(1, 0, 0, 0);
  CHECK_THROWS_WITH_AS(equalize_delays(g), doctest::Contains("a -> b -> a"), SpdError);

  g.edges[1].kind = EdgeKind::Branch;
  CHECK_THROWS_WITH_AS(equalize_delays(g), doctest::Contains("zero-latency"), SpdError);
  g.vertices[1].latency = 1;
  CHECK_NOTHROW(equalize_delays(g));
}

TEST_CASE("LBM processing elements") {
  ModuleLibrary lib = corpus_library(720);
  auto depth = [&](const std::string& name) { return elaborate(*lib.find(name), lib, bare()).depth; };
  CHECK(depth("Calc") == 90);
  CHECK(depth("PEx1") == 854);
  CHECK(depth("PEx2") == 494);
  CHECK(depth("PEx4") == 314);

  Dfg pe = elaborate(*lib.find("PEx1"), lib, bare());
  // stages are purely sequential: nothing inserted between them
  for (const auto& e : pe.edges) {
    const auto& s = pe.vertices[e.src].name;
    const auto& d = pe.vertices[e.dst].name;
    if (s.rfind("uCalc0/", 0) == 0 && d.rfind("uTransx1/", 0) == 0) CHECK(e.delay == 0);
    if (s.rfind("uTransx1/", 0) == 0 && d.rfind("uBoundary0/", 0) == 0) CHECK(e.delay == 0);
  }
  std::string why;
  CHECK_MESSAGE(oracle::balanced(pe, &why), why);

  Dfg top = elaborate(*lib.find("mQsys_Core1"), lib);
  CHECK(top.depth == 855);
  REQUIRE(top.warnings.size() == 1);
  CHECK(top.warnings[0].find("exceeds declared delay 495") != std::string::npos);
  CHECK(elaborate(*lib.find("mQsys_Core4"), lib).depth == 4 * 854 + 1);
  // each x2 instance is padded from 494 to its declared 495
  CHECK(elaborate(*lib.find("mQsys_Corex2_2"), lib).depth == 2 * 495 + 1);
  CHECK(elaborate(*lib.find("mQsys_Corex4_1"), lib).warnings.empty());
}

TEST_CASE("netlist round trip and DOT export") {
  ModuleLibrary lib;
  lib.add_source(kCore);
  Dfg g = elaborate(*lib.find("core"), lib);
  CHECK(import_netlist(export_netlist(g)) == g);

  Dfg pe = elaborate(*corpus_library(32).find("PEx2"), corpus_library(32));
  CHECK(import_netlist(export_netlist(pe)) == pe);

  const std::string dot = export_dot(g);
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("Node4") != std::string::npos);
  CHECK(dot.find("d=21") != std::string::npos);

  CHECK_THROWS_AS(import_netlist("{\"schema\": \"other/9\"}"), SpdError);
  CHECK_THROWS_AS(import_netlist("not json"), SpdError);
}

TEST_CASE("library loading") {
  ModuleLibrary lib;
  CHECK_THROWS_AS(lib.add_source("Name Delay;\nMain_In {Mi::a};\nMain_Out {Mo::b};\nDRCT (b) = (a);\n"), SpdError);
  CHECK_THROWS_AS(lib.add_file("/nonexistent.spd"), SpdError);
  lib.add_directory(std::string(SPD_SOURCE_DIR) + "/corpus");
  CHECK(lib.find("PEx4") != nullptr);
  CHECK(lib.find("mQsys_Corex2_2") != nullptr);
}
