#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "causal/model.hpp"
#include "support/gen.hpp"

using namespace causal;

namespace {

std::vector<std::string> vs(std::initializer_list<const char*> xs) {
  return {xs.begin(), xs.end()};
}

// The four-variable net whose joint is P(S,L,A) = sum_B P(L|S,B,A)P(S|B)P(B|A)P(A),
// i.e. A -> B -> S and L reading A, B, S.
CausalModel lung_model(std::mt19937_64& r) {
  Dag g = make_dag({"A", "B", "S", "L"},
                   {{"A", "B"}, {"B", "S"}, {"A", "L"}, {"B", "L"}, {"S", "L"}});
  NetworkDiagram d = diagram_from_dag(g, {}, {"S", "L", "A"});
  Interpretation it;
  for (const auto& v : g.vertices) it.wires[v] = Atom{v, 2};
  FinObject a2 = FinObject::single("A", 2), b2 = FinObject::single("B", 2);
  FinObject s2 = FinObject::single("S", 2), l2 = FinObject::single("L", 2);
  it.boxes["c_A"] = gen::random_state(r, a2);
  it.boxes["c_B"] = gen::random_channel(r, a2, b2);
  it.boxes["c_S"] = gen::random_channel(r, b2, s2);
  it.boxes["c_L"] = gen::random_channel(r, tensor(tensor(a2, b2), s2), l2);
  return make_model(std::move(d), std::move(it));
}

}  // namespace

TEST_CASE("make_model enforces channel mechanisms and shapes") {
  auto r = gen::rng(11);
  CausalModel m = lung_model(r);
  CHECK(model_variables(m) == vs({"A", "B", "L", "S"}));
  CHECK(mechanism_of(m, "S").dcard() == 2);

  Interpretation broken = m.interp;
  broken.boxes["c_S"].at(0, 0) += 0.2;
  CHECK_THROWS_AS(make_model(m.diagram, broken), ValidationError);

  Interpretation mis = m.interp;
  mis.wires["S"] = Atom{"S", 3};
  CHECK_THROWS_AS(make_model(m.diagram, mis), ShapeError);
}

TEST_CASE("output_state matches the factorisation sum and is normalised") {
  auto r = gen::rng(13);
  CausalModel m = lung_model(r);
  Morphism st = output_state(m);
  REQUIRE(st.is_state());
  REQUIRE(st.ccard() == 8);

  const Morphism& cA = m.interp.boxes.at("c_A");
  const Morphism& cB = m.interp.boxes.at("c_B");
  const Morphism& cS = m.interp.boxes.at("c_S");
  const Morphism& cL = m.interp.boxes.at("c_L");
  for (int64_t s = 0; s < 2; ++s)
    for (int64_t l = 0; l < 2; ++l)
      for (int64_t a = 0; a < 2; ++a) {
        double want = 0;
        for (int64_t b = 0; b < 2; ++b)
          want += cL.at((a * 2 + b) * 2 + s, l) * cS.at(b, s) * cB.at(a, b) * cA.at(0, a);
        CHECK(st.at(0, (s * 2 + l) * 2 + a) == doctest::Approx(want).epsilon(1e-12));
      }

  // Closure: column sums of any CBN joint are 1.
  for (int iter = 0; iter < 20; ++iter) {
    CausalModel cbn = gen::random_cbn(r, 2 + iter % 5, 0.4, 3, iter % 3 != 0);
    Morphism joint = output_state(cbn);
    CHECK(column_sum(joint, 0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  CausalModel open = lung_model(r);
  open.diagram = diagram_from_dag(
      make_dag({"A", "B"}, {{"A", "B"}}), {"A"}, {"B"});
  Interpretation oit;
  oit.wires["A"] = Atom{"A", 2};
  oit.wires["B"] = Atom{"B", 2};
  oit.boxes["c_B"] = gen::random_channel(r, FinObject::single("A", 2),
                                         FinObject::single("B", 2));
  CausalModel om = make_model(open.diagram, oit);
  CHECK_THROWS_AS(output_state(om), ShapeError);
  CHECK(max_abs_diff(channel_of(om), oit.boxes["c_B"]) < 1e-12);
}

TEST_CASE("channel_of an opened smoking model gives the surgery distribution") {
  auto r = gen::rng(17);
  // B -> S -> T -> L with B -> L; opened at S.
  Dag g = make_dag({"B", "S", "T", "L"}, {{"B", "S"}, {"B", "L"}, {"S", "T"}, {"T", "L"}});
  NetworkDiagram d;
  for (const auto& v : g.vertices) d.wires[v] = Atom{v, 1};
  d.nodes.push_back({NodeKind::Mechanism("c_B"), {}, "B"});
  d.nodes.push_back({NodeKind::Mechanism("c_T"), {"S"}, "T"});
  d.nodes.push_back({NodeKind::Mechanism("c_L"), {"B", "T"}, "L"});
  d.inputs = {"S"};
  d.outputs = {"T", "L"};
  Interpretation it;
  for (const auto& v : g.vertices) it.wires[v] = Atom{v, 2};
  FinObject b2 = FinObject::single("B", 2), s2 = FinObject::single("S", 2);
  FinObject t2 = FinObject::single("T", 2), l2 = FinObject::single("L", 2);
  it.boxes["c_B"] = gen::random_state(r, b2);
  it.boxes["c_T"] = gen::random_channel(r, s2, t2);
  it.boxes["c_L"] = gen::random_channel(r, tensor(b2, t2), l2);
  CausalModel m = make_model(d, it);

  Morphism chan = channel_of(m);
  REQUIRE(chan.dcard() == 2);

  auto direct = [&](int64_t s, int64_t t, int64_t l) {
    double acc = 0;
    for (int64_t b = 0; b < 2; ++b)
      acc += it.boxes["c_B"].at(0, b) * it.boxes["c_T"].at(s, t) *
             it.boxes["c_L"].at(b * 2 + t, l);
    return acc;
  };
  // Sharp input: the do-distribution at that setting.
  for (int64_t s = 0; s < 2; ++s) {
    Morphism dos = compose(sharp_state(FinObject::single("S", 2), {s}), chan);
    for (int64_t t = 0; t < 2; ++t)
      for (int64_t l = 0; l < 2; ++l)
        CHECK(dos.at(0, t * 2 + l) == doctest::Approx(direct(s, t, l)).epsilon(1e-12));
  }
  // General input state: the breaking-intervention mixture.
  Morphism rho = gen::random_state(r, s2);
  Morphism broke = compose(rho, chan);
  for (int64_t t = 0; t < 2; ++t)
    for (int64_t l = 0; l < 2; ++l) {
      double want = rho.at(0, 0) * direct(0, t, l) + rho.at(0, 1) * direct(1, t, l);
      CHECK(broke.at(0, t * 2 + l) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("conditional independence in states") {
  auto r = gen::rng(19);
  FinObject x2 = FinObject::single("X", 2), y3 = FinObject::single("Y", 3);
  FinObject z2 = FinObject::single("Z", 2);

  Morphism prod = tensor(tensor(gen::random_state(r, x2), gen::random_state(r, y3)),
                         gen::random_state(r, z2));
  CHECK(conditionally_independent(prod, {"X"}, {"Y"}, {"Z"}));
  CHECK(conditionally_independent(prod, {"X"}, {"Y"}, {}));
  CHECK(conditionally_independent(prod, {"X"}, {"Z"}, {"Y"}));

  // Perfectly correlated copies are dependent.
  Morphism omega = gen::random_state(r, x2);
  Morphism copied = compose(omega, copy_map(x2, 2));
  Morphism named(FinObject::unit(),
                 FinObject({Atom{"X", 2}, Atom{"X'", 2}}), copied.a);
  CHECK_FALSE(conditionally_independent(named, {"X"}, {"X'"}, {}));

  // Chain X -> Z -> Y: X and Y are independent given Z, not marginally.
  Dag chain = make_dag({"X", "Z", "Y"}, {{"X", "Z"}, {"Z", "Y"}});
  CausalModel m = gen::random_cbn_over(r, chain);
  Morphism joint = output_state(m);
  CHECK(conditionally_independent(joint, {"X"}, {"Y"}, {"Z"}, 1e-9));
  CHECK_FALSE(conditionally_independent(joint, {"X"}, {"Y"}, {}, 1e-3));

  CHECK_THROWS_AS(conditionally_independent(joint, {"X"}, {"X"}, {}), ValidationError);
}

TEST_CASE("semi-graphoid axioms hold for the CI relation") {
  auto r = gen::rng(23);
  const double tolp = 1e-9, tolc = 1e-7;
  std::uniform_int_distribution<int64_t> cd(2, 3);
  std::uniform_int_distribution<int> which(0, 2);
  int tested = 0;
  for (int iter = 0; iter < 150; ++iter) {
    // Two independent blocks, sometimes with zeroed entries; atoms V0..V5.
    int na = 2 + static_cast<int>(iter % 2), nb = 2 + static_cast<int>((iter / 2) % 2);
    std::vector<Atom> aa, bb;
    for (int i = 0; i < na; ++i) aa.push_back({"V" + std::to_string(i), cd(r)});
    for (int i = 0; i < nb; ++i) bb.push_back({"V" + std::to_string(na + i), cd(r)});
    Morphism sa = iter % 3 ? gen::random_state(r, FinObject(aa))
                           : normalize(gen::random_morphism(r, FinObject::unit(),
                                                            FinObject(aa), 0.4));
    Morphism sb = gen::random_state(r, FinObject(bb));
    if (classify(sa).is_zero) continue;
    Morphism omega = tensor(sa, sb);

    // X from block A; Y, W from block B; Z split across both.
    std::vector<std::string> X, Y, W, Z;
    X.push_back(aa[0].name);
    Y.push_back(bb[0].name);
    if (nb > 1) W.push_back(bb[1].name);
    if (na > 1 && which(r) == 0) Z.push_back(aa[1].name);

    auto ci = [&](const std::vector<std::string>& A, const std::vector<std::string>& B,
                  const std::vector<std::string>& C, double tol) {
      return conditionally_independent(omega, A, B, C, tol);
    };
    std::vector<std::string> YW = Y;
    YW.insert(YW.end(), W.begin(), W.end());
    std::vector<std::string> ZW = Z;
    ZW.insert(ZW.end(), W.begin(), W.end());

    // Symmetry.
    if (ci(X, Y, Z, tolp)) {
      CHECK(ci(Y, X, Z, tolc));
      ++tested;
    }
    if (W.empty()) continue;
    // Decomposition and weak union.
    if (ci(X, YW, Z, tolp)) {
      CHECK(ci(X, Y, Z, tolc));
      CHECK(ci(X, W, Z, tolc));
      CHECK(ci(X, Y, ZW, tolc));
      ++tested;
    }
    // Contraction.
    if (ci(X, Y, ZW, tolp) && ci(X, W, Z, tolp)) {
      CHECK(ci(X, YW, Z, tolc));
      ++tested;
    }
  }
  CHECK(tested > 100);  // the premises genuinely fire
}

TEST_CASE("d-separation implies conditional independence in CBN joints") {
  auto r = gen::rng(29);
  std::uniform_int_distribution<int> nverts(3, 7);
  for (int iter = 0; iter < 60; ++iter) {
    int n = nverts(r);
    CausalModel m = gen::random_cbn(r, n, 0.4, iter % 2 ? 2 : 3, iter % 4 != 0);
    Dag g = model_graph(m).dag;
    Morphism joint = output_state(m);
    std::vector<int> Y, Z, W;
    for (int probe = 0; probe < 8; ++probe) {
      gen::random_disjoint_sets(r, n, Y, Z, W);
      if (Y.empty() || Z.empty()) continue;
      if (d_separated(g, Y, Z, W)) {
        std::vector<std::string> X1, X2, X3;
        for (int v : Y) X1.push_back(g.vertices[v]);
        for (int v : Z) X2.push_back(g.vertices[v]);
        for (int v : W) X3.push_back(g.vertices[v]);
        CHECK(conditionally_independent(joint, X1, X2, X3, 1e-7));
      }
    }
  }
}

TEST_CASE("mechanism faithfulness flags exactly the silent parents") {
  auto r = gen::rng(31);
  FinObject x2 = FinObject::single("X", 2), y2 = FinObject::single("Y", 2);

  NetworkDiagram d;
  for (const char* w : {"A", "B", "C"}) d.wires[w] = Atom{w, 1};
  d.nodes.push_back({NodeKind::Mechanism("c_A"), {}, "A"});
  d.nodes.push_back({NodeKind::Mechanism("c_B"), {}, "B"});
  d.nodes.push_back({NodeKind::Mechanism("c_C"), {"A", "B"}, "C"});
  d.outputs = {"C"};
  Interpretation it;
  for (const char* w : {"A", "B", "C"}) it.wires[w] = Atom{w, 2};
  it.boxes["c_A"] = gen::random_state(r, x2);
  it.boxes["c_B"] = gen::random_state(r, x2);
  // c_C ignores B: both B-columns repeat the same A-conditional rows.
  Morphism cc(tensor(x2, y2), FinObject::single("C", 2));
  Morphism inner = gen::random_channel(r, x2, FinObject::single("C", 2));
  for (int64_t a = 0; a < 2; ++a)
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t c = 0; c < 2; ++c) cc.at(a * 2 + b, c) = inner.at(a, c);
  it.boxes["c_C"] = cc;
  CausalModel m = make_model(d, it);

  auto rep = mechanism_faithful(m);
  CHECK_FALSE(rep.faithful);
  REQUIRE(rep.nonsignalling.count("C") == 1);
  CHECK(rep.nonsignalling.at("C") == vs({"B"}));

  // The identity mechanism is faithful to its parent.
  it.boxes["c_C"] = tensor(identity(x2), discard(y2));
  // tensor(identity, discard) has cod (X (x) nothing); rebuild as dom AB -> C.
  Morphism idc(tensor(x2, y2), FinObject::single("C", 2));
  for (int64_t a = 0; a < 2; ++a)
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t c = 0; c < 2; ++c) idc.at(a * 2 + b, c) = a == c ? 1.0 : 0.0;
  it.boxes["c_C"] = idc;
  CausalModel m2 = make_model(d, it);
  auto rep2 = mechanism_faithful(m2);
  CHECK_FALSE(rep2.faithful);
  CHECK(rep2.nonsignalling.at("C") == vs({"B"}));

  // Fully signalling version.
  it.boxes["c_C"] = gen::random_channel(r, tensor(x2, y2), FinObject::single("C", 2));
  CHECK(mechanism_faithful(make_model(d, it)).faithful);
}

TEST_CASE("fcm round trip preserves mechanisms") {
  auto r = gen::rng(37);
  for (int iter = 0; iter < 100; ++iter) {
    CausalModel m = gen::random_cbn(r, 1 + iter % 4, 0.5, 3, iter % 2 != 0);
    Fcm f = fcm_from_model(m);
    CHECK(f.endogenous.size() == m.diagram.wires.size());
    CHECK(f.exogenous.size() == m.diagram.nodes.size());
    for (const auto& v : f.endogenous) {
      CHECK(is_deterministic(fcm_mechanism(f, v)));
      CHECK(classify(fcm_noise(f, v)).is_normalised_state);
    }
    CausalModel back = model_from_fcm(f);
    CHECK(model_graph(back).dag.edges == model_graph(m).dag.edges);
    for (const auto& v : f.endogenous)
      CHECK(max_abs_diff(mechanism_of(back, v), mechanism_of(m, v)) < 1e-12);
    CHECK(max_abs_diff(output_state(back), output_state(m)) < 1e-12);
  }

  // Deterministic models keep one-point noises.
  FinObject x2 = FinObject::single("X", 2);
  NetworkDiagram d;
  d.wires["A"] = Atom{"A", 1};
  d.wires["B"] = Atom{"B", 1};
  d.nodes.push_back({NodeKind::Mechanism("c_A"), {}, "A"});
  d.nodes.push_back({NodeKind::Mechanism("c_B"), {"A"}, "B"});
  d.outputs = {"A", "B"};
  Interpretation it;
  it.wires["A"] = Atom{"A", 2};
  it.wires["B"] = Atom{"B", 2};
  it.boxes["c_A"] = sharp_state(x2, {1});
  it.boxes["c_B"] = gen::random_deterministic(r, x2, x2);
  Fcm f = fcm_from_model(make_model(d, it));
  for (const auto& v : f.endogenous)
    CHECK(fcm_noise(f, v).ccard() == 1);

  // A noisy mechanism is rejected as an Fcm mechanism.
  auto r2 = gen::rng(38);
  CausalModel noisy = gen::random_cbn(r2, 2, 1.0);
  std::vector<std::string> endo = model_variables(noisy);
  CHECK_THROWS_AS(make_fcm(noisy, endo, {}), ValidationError);
}

TEST_CASE("mechanism recovery from full-support joints") {
  auto r = gen::rng(41);
  for (int iter = 0; iter < 40; ++iter) {
    CausalModel m = gen::random_cbn(r, 2 + iter % 5, 0.45, 3, true);
    Dag g = model_graph(m).dag;
    Morphism joint = output_state(m);
    for (size_t v = 0; v < g.n(); ++v) {
      std::vector<std::string> pa;
      for (int p : g.parents(static_cast<int>(v))) pa.push_back(g.vertices[p]);
      std::vector<std::string> pax = pa;
      pax.push_back(g.vertices[v]);
      Morphism rec = conditional(marginalize(joint, pax), pa);
      CHECK(max_abs_diff(rec, mechanism_of(m, g.vertices[v])) < 1e-9);
    }
  }
}

TEST_CASE("markov check accepts CBN joints and rejects perturbations") {
  auto r = gen::rng(43);
  for (int iter = 0; iter < 30; ++iter) {
    CausalModel m = gen::random_cbn(r, 2 + iter % 5, 0.4, 3, iter % 3 != 0);
    CHECK(markov_check(m, 1e-9));
  }

  // Bump one entry of a chain joint: X dep Y | Z appears.
  Dag chain = make_dag({"X", "Z", "Y"}, {{"X", "Z"}, {"Z", "Y"}});
  CausalModel m = gen::random_cbn_over(r, chain);
  CHECK(markov_check(m, 1e-9));
  Morphism joint = output_state(m);
  Morphism bumped = joint;
  bumped.a[0] += 0.25;
  bumped = normalize(bumped);
  CHECK_FALSE(markov_check(bumped, chain, 1e-4));

  // Open models with no mechanisms are identity channels.
  NetworkDiagram wirepair;
  wirepair.wires["X"] = Atom{"X", 1};
  wirepair.wires["Y"] = Atom{"Y", 1};
  wirepair.inputs = {"X", "Y"};
  wirepair.outputs = {"Y", "X"};
  Interpretation it;
  it.wires["X"] = Atom{"X", 2};
  it.wires["Y"] = Atom{"Y", 3};
  CausalModel open = make_model(wirepair, it);
  Morphism chan = channel_of(open);
  Morphism swap = swap_map(FinObject::single("X", 2), FinObject::single("Y", 3));
  CHECK(max_abs_diff(chan, swap) < 1e-12);
}
