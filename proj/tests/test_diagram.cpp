#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "causal/diagram.hpp"
#include "support/gen.hpp"

using namespace causal;

namespace {

// Random channel interpretation for a diagram whose boxes are all mechanisms:
// every wire gets a small random cardinality, every box a matching channel.
Interpretation random_interp(const NetworkDiagram& d, std::mt19937_64& r,
                             int64_t max_card = 3) {
  Interpretation it;
  std::uniform_int_distribution<int64_t> cd(2, max_card);
  for (const auto& [label, atom] : d.wires) {
    (void)atom;
    it.wires[label] = Atom{label, cd(r)};
  }
  for (const auto& n : d.nodes) {
    if (n.kind.tag != NodeTag::mechanism && n.kind.tag != NodeTag::generic_state &&
        !(n.kind.tag == NodeTag::generic_effect && !n.kind.box.empty()))
      continue;
    std::vector<Atom> din;
    for (const auto& in : n.ins) din.push_back(it.wires[in]);
    FinObject dom = din.empty() ? FinObject::unit() : FinObject(din);
    FinObject cod =
        n.out ? FinObject({it.wires[*n.out]}) : FinObject::unit();
    it.boxes[n.kind.box] = gen::random_channel(r, dom, cod);
  }
  return it;
}

NetworkDiagram smoking_diagram() {
  Dag g = make_dag({"B", "S", "T", "L"},
                   {{"B", "S"}, {"B", "L"}, {"S", "T"}, {"T", "L"}});
  return diagram_from_dag(g, {}, {"S", "T", "L"});
}

}  // namespace

TEST_CASE("validate names the violated invariant") {
  NetworkDiagram d;
  d.wires["X"] = Atom{"X", 1};
  d.nodes.push_back({NodeKind::SharpState({0}), {}, "X"});
  d.nodes.push_back({NodeKind::SharpState({1}), {}, "X"});
  auto rep = validate(d, false);
  CHECK_FALSE(rep.ok);
  CHECK(rep.violation.find("multiple producers") != std::string::npos);

  NetworkDiagram c;
  c.wires["X"] = Atom{"X", 1};
  c.wires["Y"] = Atom{"Y", 1};
  c.nodes.push_back({NodeKind::Mechanism("a"), {"X"}, "Y"});
  c.nodes.push_back({NodeKind::Mechanism("b"), {"Y"}, "X"});
  rep = validate(c, false);
  CHECK_FALSE(rep.ok);
  CHECK(rep.violation.find("acyclic") != std::string::npos);

  CHECK(validate(smoking_diagram(), true).ok);

  NetworkDiagram e;
  e.wires["X"] = Atom{"X", 1};
  e.nodes.push_back({NodeKind::SharpState({0}), {}, "X"});
  CHECK(validate(e, false).ok);
  rep = validate(e, true);
  CHECK_FALSE(rep.ok);
  CHECK(rep.violation.find("constant") != std::string::npos);
}

TEST_CASE("diagram_from_dag produces the expected box structure") {
  NetworkDiagram d = smoking_diagram();
  REQUIRE(d.nodes.size() == 4);
  CHECK(d.nodes[0].kind.box == "c_B");
  CHECK(d.nodes[0].ins.empty());
  CHECK(d.nodes[1].kind.box == "c_S");
  CHECK(d.nodes[1].ins == std::vector<std::string>{"B"});
  CHECK(d.nodes[3].kind.box == "c_L");
  CHECK(d.nodes[3].ins == std::vector<std::string>{"B", "T"});
  CHECK(d.outputs == std::vector<std::string>{"S", "T", "L"});
  CHECK(d.consumption_count("B") == 2);  // c_S and c_L; B itself internal

  Dag single = make_dag({"X"}, {});
  NetworkDiagram sd = diagram_from_dag(single, {}, {"X"});
  REQUIRE(sd.nodes.size() == 1);
  CHECK(sd.nodes[0].ins.empty());
  CHECK(sd.outputs == std::vector<std::string>{"X"});

  Dag withp = make_dag({"A", "B"}, {{"A", "B"}});
  CHECK_THROWS_AS(diagram_from_dag(withp, {"B"}, {}), ValidationError);
}

TEST_CASE("diagram/DAG round trip is the identity") {
  auto r = gen::rng(41);
  for (int iter = 0; iter < 500; ++iter) {
    int n = 1 + static_cast<int>(iter % 10);
    Dag g = gen::random_dag(r, n, 0.3);
    // Random open boundary: parentless vertices as inputs, any subset as outputs.
    std::vector<std::string> I, O;
    std::uniform_int_distribution<int> coin(0, 1);
    for (size_t v = 0; v < g.n(); ++v) {
      if (g.parents(static_cast<int>(v)).empty() && coin(r)) I.push_back(g.vertices[v]);
      if (coin(r)) O.push_back(g.vertices[v]);
    }
    NetworkDiagram d = diagram_from_dag(g, I, O);
    CHECK(validate(d, true).ok);
    OpenDag od = open_dag_from_diagram(d);
    CHECK(od.dag.vertices == g.vertices);
    CHECK(od.dag.edges == g.edges);
    std::vector<std::string> I2, O2;
    for (int v : od.inputs) I2.push_back(od.dag.vertices[v]);
    for (int v : od.outputs) O2.push_back(od.dag.vertices[v]);
    CHECK(I2 == I);
    CHECK(O2 == O);
    // And back again, structurally identical.
    CHECK(diagram_from_dag(od.dag, I2, O2) == d);
  }

  // The bare-wire diagram corresponds to the single-vertex open DAG.
  NetworkDiagram wire;
  wire.wires["X"] = Atom{"X", 1};
  wire.inputs = {"X"};
  wire.outputs = {"X"};
  CHECK(validate(wire, true).ok);
  OpenDag od = open_dag_from_diagram(wire);
  CHECK(od.dag.vertices == std::vector<std::string>{"X"});
  CHECK(od.dag.edges.empty());
  CHECK(od.inputs == od.outputs);
}

TEST_CASE("evaluation: single boxes, identity wires, closed states") {
  auto r = gen::rng(53);
  FinObject a2 = FinObject::single("A", 2), b3 = FinObject::single("B", 3);

  NetworkDiagram d;
  d.wires["A"] = Atom{"A", 2};
  d.wires["B"] = Atom{"B", 3};
  d.wires["C"] = Atom{"C", 2};
  d.nodes.push_back({NodeKind::Mechanism("c"), {"A", "B"}, "C"});
  d.inputs = {"A", "B"};
  d.outputs = {"C"};
  Interpretation it;
  it.wires["A"] = Atom{"A", 2};
  it.wires["B"] = Atom{"B", 3};
  it.wires["C"] = Atom{"C", 2};
  it.boxes["c"] = gen::random_channel(r, tensor(a2, b3), FinObject::single("C", 2));
  Morphism ev = evaluate(d, it);
  CHECK(max_abs_diff(ev, it.boxes["c"]) == doctest::Approx(0.0));

  NetworkDiagram wire;
  wire.wires["X"] = Atom{"X", 1};
  wire.inputs = {"X"};
  wire.outputs = {"X"};
  Interpretation wit;
  wit.wires["X"] = Atom{"X", 4};
  Morphism idm = evaluate(wire, wit);
  CHECK(max_abs_diff(idm, identity(FinObject::single("X", 4))) == doctest::Approx(0.0));

  // Closed diagrams of channels evaluate to normalised states.
  for (int iter = 0; iter < 20; ++iter) {
    Dag g = gen::random_dag(r, 2 + iter % 5, 0.4);
    std::vector<std::string> O;
    for (size_t v = 0; v < g.n(); ++v)
      if (iter % 2 || v % 2) O.push_back(g.vertices[v]);
    NetworkDiagram dg = diagram_from_dag(g, {}, O);
    Interpretation itg = random_interp(dg, r);
    Morphism st = evaluate(dg, itg);
    CHECK(st.is_state());
    CHECK(classify(st).is_normalised_state);
  }
}

TEST_CASE("evaluation matches the summed-out factorisation on the smoking net") {
  auto r = gen::rng(67);
  NetworkDiagram d = smoking_diagram();
  Interpretation it = random_interp(d, r);
  const Morphism& cB = it.boxes["c_B"];
  const Morphism& cS = it.boxes["c_S"];
  const Morphism& cT = it.boxes["c_T"];
  const Morphism& cL = it.boxes["c_L"];  // dom B (x) T
  int64_t nb = it.wires["B"].card, ns = it.wires["S"].card;
  int64_t nt = it.wires["T"].card, nl = it.wires["L"].card;

  Morphism ev = evaluate(d, it);
  REQUIRE(ev.ccard() == ns * nt * nl);
  for (int64_t s = 0; s < ns; ++s)
    for (int64_t t = 0; t < nt; ++t)
      for (int64_t l = 0; l < nl; ++l) {
        double want = 0;
        for (int64_t b = 0; b < nb; ++b)
          want += cB.at(0, b) * cS.at(b, s) * cT.at(s, t) * cL.at(b * nt + t, l);
        CHECK(ev.at(0, (s * nt + t) * nl + l) == doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("evaluation is invariant under wire relabelling (scheduling order)") {
  auto r = gen::rng(71);
  for (int iter = 0; iter < 30; ++iter) {
    Dag g = gen::random_dag(r, 3 + iter % 5, 0.4);
    std::vector<std::string> O;
    for (size_t v = 0; v < g.n(); ++v)
      if ((iter + v) % 3) O.push_back(g.vertices[v]);
    NetworkDiagram d = diagram_from_dag(g, {}, O);
    Interpretation it = random_interp(d, r);

    // Bijectively relabel wires; reversing names reverses every tie-break.
    auto ren = [&](const std::string& w) {
      return "Q" + std::string(w.rbegin(), w.rend());
    };
    NetworkDiagram d2;
    for (const auto& [label, atom] : d.wires) d2.wires[ren(label)] = atom;
    for (auto n : d.nodes) {
      for (auto& in : n.ins) in = ren(in);
      if (n.out) n.out = ren(*n.out);
      d2.nodes.push_back(n);
    }
    std::reverse(d2.nodes.begin(), d2.nodes.end());
    for (const auto& i : d.inputs) d2.inputs.push_back(ren(i));
    for (const auto& o : d.outputs) d2.outputs.push_back(ren(o));
    Interpretation it2;
    for (const auto& [label, atom] : it.wires) it2.wires[ren(label)] = atom;
    it2.boxes = it.boxes;

    Morphism e1 = evaluate(d, it);
    Morphism e2 = evaluate(d2, it2);
    REQUIRE(e1.a.size() == e2.a.size());
    for (size_t i = 0; i < e1.a.size(); ++i) CHECK(std::abs(e1.a[i] - e2.a[i]) < 1e-12);
  }
}

TEST_CASE("marginalisation duality: fewer outputs = evaluate then discard") {
  auto r = gen::rng(83);
  for (int iter = 0; iter < 25; ++iter) {
    Dag g = gen::random_dag(r, 2 + iter % 5, 0.4);
    NetworkDiagram full = diagram_from_dag(g, {}, g.vertices);
    Interpretation it = random_interp(full, r);
    std::vector<std::string> O;
    for (size_t v = 0; v < g.n(); ++v)
      if ((iter + v) % 2) O.push_back(g.vertices[v]);
    NetworkDiagram part = diagram_from_dag(g, {}, O);
    Morphism whole = evaluate(full, it);
    Morphism sub = evaluate(part, it);
    CHECK(max_abs_diff(marginalize(whole, O), sub) < 1e-12);
  }
}

TEST_CASE("rewrites preserve evaluation") {
  auto r = gen::rng(97);

  SUBCASE("discard_fallthrough deletes dead boxes") {
    Dag g = make_dag({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
    NetworkDiagram d = diagram_from_dag(g, {}, {"B"});
    Interpretation it = random_interp(d, r);
    RewriteSite s;
    s.node = 2;  // c_C, output unconsumed
    auto res = apply_rewrite(d, RewriteRule::discard_fallthrough, s);
    REQUIRE(res.applied);
    CHECK(res.diagram.nodes.size() == 2);
    CHECK_FALSE(res.diagram.has_wire("C"));
    CHECK(max_abs_diff(evaluate(d, it), evaluate(res.diagram, it)) < 1e-12);

    s.node = 0;  // c_A output is consumed
    CHECK_FALSE(apply_rewrite(d, RewriteRule::discard_fallthrough, s).applied);
  }

  SUBCASE("copy_out_discard and drop_discarded_copy_leg invert each other") {
    NetworkDiagram d = smoking_diagram();
    Interpretation it = random_interp(d, r);
    RewriteSite s;
    s.wire = "T";
    auto out = apply_rewrite(d, RewriteRule::copy_out_discard, s);
    REQUIRE(out.applied);
    CHECK(out.diagram.nodes.back().kind.is_discard());
    CHECK(max_abs_diff(evaluate(d, it), evaluate(out.diagram, it)) < 1e-12);
    RewriteSite back;
    back.node = static_cast<int>(out.diagram.nodes.size()) - 1;
    auto undone = apply_rewrite(out.diagram, RewriteRule::drop_discarded_copy_leg, back);
    REQUIRE(undone.applied);
    CHECK(undone.diagram == d);
  }

  SUBCASE("copy_through_deterministic merges duplicate applications") {
    NetworkDiagram d;
    for (const char* w : {"A", "B1", "B2", "C1", "C2"}) d.wires[w] = Atom{w, 1};
    d.nodes.push_back({NodeKind::Mechanism("c_A"), {}, "A"});
    d.nodes.push_back({NodeKind::Mechanism("f"), {"A"}, "B1"});
    d.nodes.push_back({NodeKind::Mechanism("f"), {"A"}, "B2"});
    d.nodes.push_back({NodeKind::Mechanism("g1"), {"B1"}, "C1"});
    d.nodes.push_back({NodeKind::Mechanism("g2"), {"B2"}, "C2"});
    d.outputs = {"C1", "C2"};
    REQUIRE(validate(d, true).ok);

    Interpretation it;
    for (const auto& [label, atom] : d.wires) {
      (void)atom;
      it.wires[label] = Atom{label, 2};
    }
    FinObject two = FinObject::single("X", 2);
    it.boxes["c_A"] = gen::random_state(r, two);
    it.boxes["f"] = gen::random_deterministic(r, two, two);
    it.boxes["g1"] = gen::random_channel(r, two, two);
    it.boxes["g2"] = gen::random_channel(r, two, two);

    RewriteSite s;
    s.node = 1;
    s.node2 = 2;
    auto res = apply_rewrite(d, RewriteRule::copy_through_deterministic, s);
    REQUIRE(res.applied);
    CHECK(res.diagram.nodes.size() == 4);
    CHECK(max_abs_diff(evaluate(d, it), evaluate(res.diagram, it)) < 1e-12);

    // The merge is not sound for a properly random (noisy) box.
    it.boxes["f"] = Morphism(two, two, {0.5, 0.5, 0.5, 0.5});
    CHECK(max_abs_diff(evaluate(d, it), evaluate(res.diagram, it)) > 1e-3);
  }

  SUBCASE("sharp_effect_split restarts fanned-out wires") {
    NetworkDiagram d;
    for (const char* w : {"B", "C"}) d.wires[w] = Atom{w, 1};
    d.nodes.push_back({NodeKind::Mechanism("c_B"), {}, "B"});
    d.nodes.push_back({NodeKind::Mechanism("c_C"), {"B"}, "C"});
    d.nodes.push_back({NodeKind::SharpEffect({1}), {"B"}, std::nullopt});
    d.outputs = {"B", "C"};

    Interpretation it;
    it.wires["B"] = Atom{"B", 2};
    it.wires["C"] = Atom{"C", 3};
    FinObject b2 = FinObject::single("B", 2), c3 = FinObject::single("C", 3);
    it.boxes["c_B"] = gen::random_state(r, b2);
    it.boxes["c_C"] = gen::random_channel(r, b2, c3);

    RewriteSite s;
    s.node = 2;
    auto res = apply_rewrite(d, RewriteRule::sharp_effect_split, s);
    REQUIRE(res.applied);
    REQUIRE(res.diagram.has_wire("B'"));
    it.wires["B'"] = Atom{"B'", 2};
    CHECK(res.diagram.outputs == std::vector<std::string>{"B'", "C"});
    // The effect now has the wire to itself; everything else reads the state.
    CHECK(res.diagram.consumption_count("B") == 1);
    Morphism before = evaluate(d, it), after = evaluate(res.diagram, it);
    REQUIRE(before.a.size() == after.a.size());
    for (size_t i = 0; i < before.a.size(); ++i)
      CHECK(std::abs(before.a[i] - after.a[i]) < 1e-12);
  }

  SUBCASE("absorb_noise_into_channel folds single-use states") {
    NetworkDiagram d;
    for (const char* w : {"A", "U", "B"}) d.wires[w] = Atom{w, 1};
    d.nodes.push_back({NodeKind::Mechanism("c_A"), {}, "A"});
    d.nodes.push_back({NodeKind::GenericState("lam"), {}, "U"});
    d.nodes.push_back({NodeKind::Mechanism("f"), {"A", "U"}, "B"});
    d.outputs = {"A", "B"};

    Interpretation it;
    for (const char* w : {"A", "U", "B"}) it.wires[w] = Atom{w, 2};
    FinObject two = FinObject::single("X", 2);
    it.boxes["c_A"] = gen::random_state(r, two);
    it.boxes["lam"] = gen::random_state(r, two);
    it.boxes["f"] = gen::random_channel(r, tensor(two, two), two);

    RewriteSite s;
    s.node = 2;
    s.node2 = 1;
    auto res = apply_rewrite(d, RewriteRule::absorb_noise_into_channel, s);
    REQUIRE(res.applied);
    CHECK(res.old_box == "f");
    CHECK(res.absorbed_box == "lam");
    CHECK(res.absorbed_position == 1);
    it.boxes[res.new_box] = plug(it.boxes["f"], {1}, it.boxes["lam"]);
    CHECK(max_abs_diff(evaluate(d, it), evaluate(res.diagram, it)) < 1e-12);

    // Shared noise is not absorbable.
    NetworkDiagram shared = d;
    shared.nodes.push_back({NodeKind::Mechanism("f"), {"A", "U"}, "B2"});
    shared.wires["B2"] = Atom{"B2", 1};
    auto res2 = apply_rewrite(shared, RewriteRule::absorb_noise_into_channel, s);
    CHECK_FALSE(res2.applied);
    CHECK(res2.note.find("shared") != std::string::npos);
  }
}

TEST_CASE("fixpoint driver sweeps dead structure") {
  Dag g = make_dag({"A", "B", "C", "D"}, {{"A", "B"}, {"B", "C"}, {"C", "D"}});
  NetworkDiagram d = diagram_from_dag(g, {}, {"A"});
  auto fx = rewrite_fixpoint(
      d, {RewriteRule::drop_discarded_copy_leg, RewriteRule::discard_fallthrough});
  CHECK(fx.events.size() == 3);  // c_D, c_C, c_B die in cascade
  CHECK(fx.diagram.nodes.size() == 1);
  CHECK(fx.diagram.nodes[0].kind.box == "c_A");
  CHECK(fx.diagram.wires.size() == 1);

  // An expanding rule list hits the step budget instead of spinning.
  CHECK_THROWS_AS(rewrite_fixpoint(d, {RewriteRule::copy_out_discard}), BudgetError);
}

TEST_CASE("to_dot is deterministic and minimal") {
  NetworkDiagram empty;
  CHECK(to_dot(empty) == "digraph D {\n  rankdir=LR;\n  node [fontsize=10];\n}\n");

  NetworkDiagram one;
  one.wires["X"] = Atom{"X", 1};
  one.nodes.push_back({NodeKind::Mechanism("c_X"), {}, "X"});
  one.outputs = {"X"};
  std::string dot = to_dot(one);
  CHECK(dot == to_dot(one));
  size_t boxes = 0;
  for (size_t p = dot.find("shape=box"); p != std::string::npos;
       p = dot.find("shape=box", p + 1))
    ++boxes;
  CHECK(boxes == 1);

  std::string smoke1 = to_dot(smoking_diagram());
  std::string smoke2 = to_dot(smoking_diagram());
  CHECK(smoke1 == smoke2);
}
