#include "causal/identify.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace causal {

namespace {

std::vector<std::string> sorted_names(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::string> cod_names(const Morphism& f) {
  std::vector<std::string> out;
  for (const auto& a : f.cod.atoms) out.push_back(a.name);
  return out;
}

}  // namespace

PStarTables make_pstar_tables(std::vector<Atom> roster) {
  std::sort(roster.begin(), roster.end(),
            [](const Atom& a, const Atom& b) { return a.name < b.name; });
  for (size_t i = 0; i + 1 < roster.size(); ++i)
    if (roster[i].name == roster[i + 1].name)
      throw ValidationError("duplicate roster atom: " + roster[i].name);
  for (const auto& a : roster)
    if (a.card <= 0) throw ValidationError("roster atom needs positive card: " + a.name);
  PStarTables t;
  t.roster = std::move(roster);
  return t;
}

int64_t roster_card(const PStarTables& t, const std::string& name) {
  for (const auto& a : t.roster)
    if (a.name == name) return a.card;
  throw IndexError("not a roster atom: " + name);
}

void add_table(PStarTables& t, std::vector<std::string> doset, Morphism table) {
  std::sort(doset.begin(), doset.end());
  for (size_t i = 0; i + 1 < doset.size(); ++i)
    if (doset[i] == doset[i + 1]) throw ValidationError("duplicate do variable " + doset[i]);
  std::set<std::string> ds(doset.begin(), doset.end());
  for (const auto& n : doset) roster_card(t, n);

  if (table.dom.natoms() != doset.size())
    throw ShapeError("table domain arity does not match do-set size");
  for (size_t i = 0; i < doset.size(); ++i) {
    if (table.dom.atoms[i].name != doset[i])
      throw ShapeError("table domain atom " + table.dom.atoms[i].name +
                       " does not match do-set entry " + doset[i]);
    if (table.dom.atoms[i].card != roster_card(t, doset[i]))
      throw ShapeError("table domain card mismatch on " + doset[i]);
  }
  std::vector<Atom> rest;
  for (const auto& a : t.roster)
    if (!ds.count(a.name)) rest.push_back(a);
  if (table.cod.natoms() != rest.size())
    throw ShapeError("table cod arity does not match roster remainder");
  for (size_t i = 0; i < rest.size(); ++i)
    if (table.cod.atoms[i].name != rest[i].name || table.cod.atoms[i].card != rest[i].card)
      throw ShapeError("table cod atom mismatch at " + rest[i].name);
  if (!is_channel(table, 1e-7))
    throw ValidationError("table is not a channel for do-set {" + join(doset) + "}");
  t.tables[doset] = std::move(table);
}

bool has_table(const PStarTables& t, std::vector<std::string> doset) {
  std::sort(doset.begin(), doset.end());
  return t.tables.count(doset) > 0;
}

const Morphism& table_for(const PStarTables& t, std::vector<std::string> doset) {
  std::sort(doset.begin(), doset.end());
  auto it = t.tables.find(doset);
  if (it == t.tables.end())
    throw IndexError("no table for do-set {" + join(doset) + "}");
  return it->second;
}

PStarTables tables_from_model(const CausalModel& m,
                              const std::vector<std::string>& observed,
                              const std::vector<std::vector<std::string>>& dosets) {
  if (!m.diagram.inputs.empty())
    throw ValidationError("tables need a closed model");
  std::vector<std::string> obs = sorted_names(observed);
  std::vector<Atom> roster;
  for (const auto& n : obs) {
    auto it = m.interp.wires.find(n);
    if (it == m.interp.wires.end()) throw IndexError("not a model variable: " + n);
    roster.push_back(Atom{n, it->second.card, it->second.display});
  }
  PStarTables t = make_pstar_tables(roster);
  for (const auto& raw : dosets) {
    std::vector<std::string> ds = sorted_names(raw);
    std::set<std::string> in_obs(obs.begin(), obs.end());
    for (const auto& n : ds)
      if (!in_obs.count(n)) throw IndexError("do variable outside the roster: " + n);
    std::vector<std::string> outs;
    std::set<std::string> dset(ds.begin(), ds.end());
    for (const auto& n : obs)
      if (!dset.count(n)) outs.push_back(n);
    NetworkDiagram d2 = m.diagram;
    d2.outputs = outs;
    CausalModel m2 = make_model(d2, m.interp);
    Morphism table = ds.empty() ? output_state(m2) : channel_of(open_at(m2, ds));
    add_table(t, ds, std::move(table));
  }
  return t;
}

bool IdentifyingExpression::operator==(const IdentifyingExpression& o) const {
  if (kind != o.kind || doset != o.doset || outputs != o.outputs || names != o.names ||
      at != o.at || copies != o.copies || atom != o.atom || value != o.value)
    return false;
  if (constant.has_value() != o.constant.has_value()) return false;
  if (constant && !(constant->dom.same_shape(o.constant->dom) &&
                    constant->cod.same_shape(o.constant->cod) && constant->a == o.constant->a))
    return false;
  return children == o.children;
}

IdentifyingExpression expr_data_ref(std::vector<std::string> doset,
                                    std::vector<std::string> outputs) {
  std::sort(doset.begin(), doset.end());
  std::set<std::string> seen;
  for (const auto& n : outputs)
    if (!seen.insert(n).second)
      throw ValidationError("data_ref output listed twice: " + n);
  IdentifyingExpression e;
  e.kind = ExprKind::data_ref;
  e.doset = std::move(doset);
  e.outputs = std::move(outputs);
  return e;
}

IdentifyingExpression expr_boxed(Morphism m) {
  IdentifyingExpression e;
  e.kind = ExprKind::boxed;
  e.constant = std::move(m);
  return e;
}

IdentifyingExpression expr_compose(IdentifyingExpression l, IdentifyingExpression r,
                                   std::vector<int> at) {
  std::set<int> seen;
  for (int p : at) {
    if (p < 0) throw IndexError("compose leg must be nonnegative");
    if (!seen.insert(p).second) throw IndexError("compose leg listed twice");
  }
  IdentifyingExpression e;
  e.kind = ExprKind::compose;
  e.children.push_back(std::move(l));
  e.children.push_back(std::move(r));
  e.at = std::move(at);
  return e;
}

IdentifyingExpression expr_tensor(IdentifyingExpression l, IdentifyingExpression r) {
  IdentifyingExpression e;
  e.kind = ExprKind::tensor;
  e.children.push_back(std::move(l));
  e.children.push_back(std::move(r));
  return e;
}

IdentifyingExpression expr_copy(IdentifyingExpression arg, int leg, int copies) {
  if (leg < 0) throw IndexError("copy leg must be nonnegative");
  if (copies < 0) throw IndexError("copy count must be nonnegative");
  IdentifyingExpression e;
  e.kind = ExprKind::copy_fanout;
  e.children.push_back(std::move(arg));
  e.at = {leg};
  e.copies = copies;
  return e;
}

IdentifyingExpression expr_discard(IdentifyingExpression arg, std::vector<int> positions) {
  std::set<int> seen;
  for (int p : positions) {
    if (p < 0) throw IndexError("discard position must be nonnegative");
    if (!seen.insert(p).second) throw IndexError("discard position listed twice");
  }
  IdentifyingExpression e;
  e.kind = ExprKind::discard;
  e.children.push_back(std::move(arg));
  e.at = std::move(positions);
  return e;
}

IdentifyingExpression expr_sharp_state(std::string atom, int64_t value) {
  IdentifyingExpression e;
  e.kind = ExprKind::sharp_state;
  e.atom = std::move(atom);
  e.value = value;
  return e;
}

IdentifyingExpression expr_sharp_effect(std::string atom, int64_t value) {
  IdentifyingExpression e;
  e.kind = ExprKind::sharp_effect;
  e.atom = std::move(atom);
  e.value = value;
  return e;
}

IdentifyingExpression expr_conditional(IdentifyingExpression arg,
                                       std::vector<std::string> on) {
  std::set<std::string> seen;
  for (const auto& n : on)
    if (!seen.insert(n).second) throw ValidationError("conditioning atom listed twice: " + n);
  IdentifyingExpression e;
  e.kind = ExprKind::conditional;
  e.children.push_back(std::move(arg));
  e.names = std::move(on);
  return e;
}

IdentifyingExpression expr_marginal(IdentifyingExpression arg,
                                    std::vector<std::string> keep) {
  std::set<std::string> seen;
  for (const auto& n : keep)
    if (!seen.insert(n).second) throw ValidationError("marginal atom listed twice: " + n);
  IdentifyingExpression e;
  e.kind = ExprKind::marginal;
  e.children.push_back(std::move(arg));
  e.names = std::move(keep);
  return e;
}

IdentifyingExpression expr_normalize(IdentifyingExpression arg) {
  IdentifyingExpression e;
  e.kind = ExprKind::normalize_box;
  e.children.push_back(std::move(arg));
  return e;
}

Morphism evaluate_expression(const IdentifyingExpression& e, const PStarTables& data) {
  switch (e.kind) {
    case ExprKind::data_ref: {
      const Morphism& tab = table_for(data, e.doset);
      if (cod_names(tab) == e.outputs) return tab;
      return marginalize(tab, e.outputs);
    }
    case ExprKind::boxed:
      if (!e.constant) throw ValidationError("boxed node without a morphism");
      return *e.constant;
    case ExprKind::compose: {
      Morphism l = evaluate_expression(e.children.at(0), data);
      Morphism r = evaluate_expression(e.children.at(1), data);
      return contract(l, e.at, r);
    }
    case ExprKind::tensor: {
      Morphism l = evaluate_expression(e.children.at(0), data);
      Morphism r = evaluate_expression(e.children.at(1), data);
      return tensor(l, r);
    }
    case ExprKind::copy_fanout: {
      Morphism f = evaluate_expression(e.children.at(0), data);
      int leg = e.at.at(0);
      if (leg >= static_cast<int>(f.cod.natoms()))
        throw IndexError("copy leg out of range");
      FinObject x{{f.cod.atoms[leg]}};
      return contract(f, {leg}, copy_map(x, e.copies));
    }
    case ExprKind::discard: {
      Morphism f = evaluate_expression(e.children.at(0), data);
      std::set<int> drop(e.at.begin(), e.at.end());
      std::vector<int> keep;
      for (int i = 0; i < static_cast<int>(f.cod.natoms()); ++i)
        if (!drop.count(i)) keep.push_back(i);
      if (keep.size() + drop.size() != f.cod.natoms())
        throw IndexError("discard position out of range");
      return marginalize_positions(f, keep);
    }
    case ExprKind::sharp_state:
      return sharp_state(FinObject::single(e.atom, roster_card(data, e.atom)), {e.value});
    case ExprKind::sharp_effect:
      return sharp_effect(FinObject::single(e.atom, roster_card(data, e.atom)), {e.value});
    case ExprKind::conditional:
      return conditional(evaluate_expression(e.children.at(0), data), e.names);
    case ExprKind::marginal:
      return marginalize(evaluate_expression(e.children.at(0), data), e.names);
    case ExprKind::normalize_box:
      return normalize(evaluate_expression(e.children.at(0), data));
  }
  throw ValidationError("unknown expression node");
}

std::string to_text(const IdentifyingExpression& e) {
  switch (e.kind) {
    case ExprKind::data_ref:
      return "P(" + join(e.outputs) +
             (e.doset.empty() ? std::string() : " ; do(" + join(e.doset) + ")") + ")";
    case ExprKind::boxed: {
      std::vector<std::string> d, c;
      if (e.constant) {
        for (const auto& a : e.constant->dom.atoms) d.push_back(a.name);
        for (const auto& a : e.constant->cod.atoms) c.push_back(a.name);
      }
      return "[" + join(d) + " -> " + join(c) + "]";
    }
    case ExprKind::compose:
      return "(" + to_text(e.children[0]) + " ;[" + join_ints(e.at) + "] " +
             to_text(e.children[1]) + ")";
    case ExprKind::tensor:
      return "(" + to_text(e.children[0]) + " (x) " + to_text(e.children[1]) + ")";
    case ExprKind::copy_fanout:
      return "copy[" + std::to_string(e.at.at(0)) + "x" + std::to_string(e.copies) + "](" +
             to_text(e.children[0]) + ")";
    case ExprKind::discard:
      return "drop[" + join_ints(e.at) + "](" + to_text(e.children[0]) + ")";
    case ExprKind::sharp_state:
      return "|" + e.atom + "=" + std::to_string(e.value) + ">";
    case ExprKind::sharp_effect:
      return "<" + e.atom + "=" + std::to_string(e.value) + "|";
    case ExprKind::conditional:
      return "(" + to_text(e.children[0]) + " | " + join(e.names) + ")";
    case ExprKind::marginal:
      return "marg[" + join(e.names) + "](" + to_text(e.children[0]) + ")";
    case ExprKind::normalize_box:
      return "norm(" + to_text(e.children[0]) + ")";
  }
  return "?";
}

EtaIntervention eta_do(int64_t value) {
  EtaIntervention e;
  e.do_value = value;
  return e;
}

EtaIntervention eta_general(std::vector<std::string> reads, Morphism eta) {
  EtaIntervention e;
  e.reads = std::move(reads);
  e.eta = std::move(eta);
  return e;
}

int ExprAssembler::find_leg(const std::string& name) const {
  for (size_t i = 0; i < legs.size(); ++i)
    if (legs[i] == name) return static_cast<int>(i);
  throw IndexError("assembler: no leg named " + name);
}

void ExprAssembler::attach(IdentifyingExpression e, const std::vector<std::string>& feeds,
                           const std::vector<std::string>& outs) {
  if (!have) {
    if (!feeds.empty()) throw ShapeError("assembler: fed factor before any state");
    cur = std::move(e);
    legs = outs;
    have = true;
    return;
  }
  if (feeds.empty()) {
    cur = expr_tensor(std::move(cur), std::move(e));
    legs.insert(legs.end(), outs.begin(), outs.end());
    return;
  }
  std::vector<std::string> markers;
  for (size_t k = 0; k < feeds.size(); ++k) {
    int pos = find_leg(feeds[k]);
    cur = expr_copy(std::move(cur), pos, 2);
    legs.erase(legs.begin() + pos);
    legs.push_back(feeds[k]);
    markers.push_back(std::string(1, '\x01') + std::to_string(k));
    legs.push_back(markers.back());
  }
  std::vector<int> at;
  for (const auto& mk : markers) at.push_back(find_leg(mk));
  cur = expr_compose(std::move(cur), std::move(e), at);
  std::vector<std::string> next;
  for (const auto& l : legs)
    if (l.empty() || l[0] != '\x01') next.push_back(l);
  legs = std::move(next);
  legs.insert(legs.end(), outs.begin(), outs.end());
}

void ExprAssembler::apply_at(const std::string& name, IdentifyingExpression e) {
  int pos = find_leg(name);
  cur = expr_compose(std::move(cur), std::move(e), {pos});
  legs.erase(legs.begin() + pos);
}

void ExprAssembler::rename_leg(const std::string& from, const std::string& to, int64_t card) {
  if (from == to) return;
  int pos = find_leg(from);
  Morphism ren(FinObject::single(from, card), FinObject::single(to, card));
  for (int64_t i = 0; i < card; ++i) ren.at(i, i) = 1.0;
  cur = expr_compose(std::move(cur), expr_boxed(std::move(ren)), {pos});
  legs.erase(legs.begin() + pos);
  legs.push_back(to);
}

void ExprAssembler::drop_leg(const std::string& name) {
  int pos = find_leg(name);
  cur = expr_discard(std::move(cur), {pos});
  legs.erase(legs.begin() + pos);
}

IdentifyingExpression jkz_expression(const Admg& g, const JkzPartition& p,
                                     const std::string& X, const EtaIntervention& eta,
                                     const std::vector<Atom>& roster) {
  int xi = g.require(X);
  std::vector<std::string> lex = sorted_names(g.vertices);
  if (roster.size() != lex.size())
    throw ShapeError("roster does not cover the graph vertices");
  std::map<std::string, int64_t> card;
  for (const auto& a : roster) card[a.name] = a.card;
  for (const auto& n : lex)
    if (!card.count(n)) throw IndexError("roster is missing vertex " + n);
  int64_t cx = card[X];

  if (eta.do_value) {
    if (*eta.do_value < 0 || *eta.do_value >= cx)
      throw IndexError("do value out of range for " + X);
  } else {
    if (!eta.eta) throw ValidationError("regime needs do_value or a policy channel");
    if (!is_channel(*eta.eta, 1e-7))
      throw ValidationError("policy must be a channel");
    if (eta.eta->dom.natoms() != eta.reads.size() + 1)
      throw ShapeError("policy domain must list the reads then the old value");
    for (size_t i = 0; i < eta.reads.size(); ++i)
      if (eta.eta->dom.atoms[i].card != card.at(eta.reads[i]))
        throw ShapeError("policy read card mismatch on " + eta.reads[i]);
    if (eta.eta->dom.atoms.back().card != cx ||
        eta.eta->cod.natoms() != 1 || eta.eta->cod.atoms[0].card != cx)
      throw ShapeError("policy must map onto the intervened variable");
  }

  Dag dir = g.directed_part();
  std::vector<char> isdesc(g.n(), 0);
  for (int v : descendants(dir, xi)) isdesc[v] = 1;
  if (!eta.do_value)
    for (const auto& rd : eta.reads) {
      int ri = g.require(rd);
      if (isdesc[ri]) throw ValidationError("policy read " + rd + " descends from " + X);
    }

  std::vector<std::string> tau;
  for (int v : topological_order(dir))
    if (!isdesc[v]) tau.push_back(g.vertices[v]);
  for (int v : topological_order(dir))
    if (isdesc[v]) tau.push_back(g.vertices[v]);

  // Factors in the confounded class of X read the pre-regime value; everyone
  // else reads the regime output.
  std::set<std::string> route;
  route.insert(X);
  std::set<std::string> comp;
  for (int v : c_component(g, xi)) comp.insert(g.vertices[v]);
  for (const auto& n : p.C)
    if (comp.count(n)) route.insert(n);

  std::string xold = X + "'";
  std::set<std::string> vnames(lex.begin(), lex.end());
  while (vnames.count(xold)) xold += "'";

  ExprAssembler ab;
  std::vector<std::string> pref;
  for (const auto& v : tau) {
    IdentifyingExpression ev;
    if (pref.empty()) {
      ev = expr_data_ref({}, {v});
    } else {
      std::vector<std::string> outs = pref;
      outs.push_back(v);
      ev = expr_conditional(expr_data_ref({}, outs), pref);
    }
    std::vector<std::string> feeds;
    for (const auto& q : pref)
      feeds.push_back(q == X ? (route.count(v) ? xold : X) : q);
    ab.attach(std::move(ev), feeds, {v});

    if (v == X) {
      ab.rename_leg(X, xold, cx);
      if (eta.do_value) {
        ab.cur = expr_tensor(std::move(ab.cur), expr_sharp_state(X, *eta.do_value));
        ab.legs.push_back(X);
      } else {
        Morphism em = *eta.eta;
        Morphism wrapped(em.dom, FinObject::single(X, cx), em.a);
        std::vector<std::string> feeds2 = eta.reads;
        feeds2.push_back(xold);
        ab.attach(expr_boxed(std::move(wrapped)), feeds2, {X});
      }
    }
    pref.push_back(v);
  }
  ab.drop_leg(xold);
  return expr_marginal(std::move(ab.cur), lex);
}

namespace {

Morphism rand_channel(std::mt19937_64& r, const FinObject& dom, const FinObject& cod) {
  Morphism f(dom, cod);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (auto& v : f.a) v = u(r);
  return normalize(f);
}

CausalModel random_rooted_model(const Admg& g, std::mt19937_64& r) {
  Dag rd = rootify(g, RootifyMethod::rho_tilde);
  std::set<std::string> obs(g.vertices.begin(), g.vertices.end());
  std::uniform_int_distribution<int64_t> dv(2, 3), droot(2, 4);
  Interpretation it;
  for (const auto& nm : rd.vertices)
    it.wires[nm] = Atom{nm, obs.count(nm) ? dv(r) : droot(r), ""};
  NetworkDiagram d = diagram_from_dag(rd, {}, sorted_names(g.vertices));
  for (const auto& nd : d.nodes) {
    std::vector<Atom> da;
    for (const auto& i : nd.ins) da.push_back(it.wires[i]);
    FinObject dom = da.empty() ? FinObject::unit() : FinObject(da);
    it.boxes[nd.kind.box] = rand_channel(r, dom, FinObject::single(*nd.out, it.wires[*nd.out].card));
  }
  return make_model(d, it);
}

bool validate_jkz_partition(const Admg& g, const JkzPartition& p, const std::string& X) {
  std::mt19937_64 r(0x9c0ffee5ull);
  std::vector<std::string> obs = sorted_names(g.vertices);
  for (int trial = 0; trial < 10; ++trial) {
    CausalModel model = random_rooted_model(g, r);
    PStarTables t = tables_from_model(model, obs, {{}});
    int64_t cx = roster_card(t, X);
    for (int64_t xv = 0; xv < cx; ++xv) {
      Morphism lhs =
          evaluate_expression(jkz_expression(g, p, X, eta_do(xv), t.roster), t);
      Morphism rhs = marginalize(full_joint(apply(model, Do{X, xv})), obs);
      if (!approx_equal(lhs, rhs, 1e-7)) return false;
    }
    // The surgery oracle wires the reads into the mechanism node, so they
    // must not already be parents of X there.
    std::set<std::string> pa;
    for (int v : g.parents(g.require(X))) pa.insert(g.vertices[v]);
    std::vector<std::string> reads;
    for (const auto& n : p.A)
      if (!pa.count(n) && reads.size() < 2) reads.push_back(n);
    std::vector<Atom> da;
    for (const auto& n : reads) da.push_back(Atom{n, roster_card(t, n), ""});
    da.push_back(Atom{X, cx, ""});
    Morphism eta = rand_channel(r, FinObject(da), FinObject::single(X, cx));
    Morphism lhs = evaluate_expression(
        jkz_expression(g, p, X, eta_general(reads, eta), t.roster), t);
    Morphism rhs = marginalize(full_joint(apply(model, WideLocal{X, reads, eta})), obs);
    if (!approx_equal(lhs, rhs, 1e-7)) return false;
  }
  return true;
}

}  // namespace

std::optional<JkzPartition> jkz_partition(const Admg& g, const std::string& X) {
  int xi = g.require(X);
  Dag dir = g.directed_part();
  std::set<int> desc;
  for (int v : descendants(dir, xi)) desc.insert(v);
  std::set<int> comp;
  for (int v : c_component(g, xi)) comp.insert(v);
  std::set<int> ch;
  for (int v : g.children(xi)) ch.insert(v);

  auto build = [&](const std::set<int>& croute) {
    std::set<int> cset = croute;
    for (int v : desc)
      if (v != xi && !ch.count(v)) cset.insert(v);
    JkzPartition p;
    for (size_t v = 0; v < g.n(); ++v) {
      if (static_cast<int>(v) == xi) continue;
      if (ch.count(static_cast<int>(v)))
        p.B.push_back(g.vertices[v]);
      else if (cset.count(static_cast<int>(v)))
        p.C.push_back(g.vertices[v]);
      else
        p.A.push_back(g.vertices[v]);
    }
    std::sort(p.A.begin(), p.A.end());
    std::sort(p.B.begin(), p.B.end());
    std::sort(p.C.begin(), p.C.end());
    return p;
  };

  std::set<std::set<int>> tried;
  if (c_condition(g, xi)) {
    std::set<int> croute = comp;
    croute.erase(xi);
    JkzPartition p = build(croute);
    if (validate_jkz_partition(g, p, X)) return p;
    tried.insert(croute);
  }
  if (g.n() <= 10) {
    std::vector<int> pool;
    for (int v : comp)
      if (v != xi) pool.push_back(v);
    for (uint32_t mask = 0; mask < (1u << pool.size()); ++mask) {
      std::set<int> croute;
      for (size_t i = 0; i < pool.size(); ++i)
        if (mask & (1u << i)) croute.insert(pool[i]);
      if (!tried.insert(croute).second) continue;
      JkzPartition p = build(croute);
      if (validate_jkz_partition(g, p, X)) return p;
    }
  }
  return std::nullopt;
}

Morphism truncated_factorization(const CausalModel& m,
                                 const std::map<std::string, int64_t>& dos) {
  CausalModel cur = m;
  for (const auto& [name, value] : dos) cur = apply(cur, Do{name, value});
  return output_state(cur);
}

namespace {

// Closed four-variable model for the witness searches. All wires binary;
// `collider` switches between Z reading (R,X) and Z reading (R,X,Y).
CausalModel witness_model(bool collider, const std::vector<double>& pr,
                          const std::vector<double>& cx, const std::vector<double>& py,
                          const std::vector<double>& cz, const std::vector<double>& cy) {
  Dag dag;
  if (collider)
    dag = make_dag({"R", "X", "Y", "Z"}, {{"R", "X"}, {"R", "Z"}, {"X", "Z"}, {"Y", "Z"}});
  else
    dag = make_dag({"R", "X", "Z", "Y"}, {{"R", "X"}, {"R", "Z"}, {"X", "Z"}, {"Z", "Y"}});
  NetworkDiagram d = diagram_from_dag(dag, {}, {"X", "Y", "Z"});
  Interpretation it;
  for (const auto& n : dag.vertices) it.wires[n] = Atom{n, 2, ""};
  FinObject r2 = FinObject::single("R", 2), x2 = FinObject::single("X", 2),
            y2 = FinObject::single("Y", 2), z2 = FinObject::single("Z", 2);
  it.boxes["c_R"] = Morphism(FinObject::unit(), r2, pr);
  it.boxes["c_X"] = Morphism(r2, x2, cx);
  if (collider) {
    it.boxes["c_Y"] = Morphism(FinObject::unit(), y2, py);
    it.boxes["c_Z"] = Morphism(FinObject({Atom{"R", 2, ""}, Atom{"X", 2, ""}, Atom{"Y", 2, ""}}),
                               z2, cz);
  } else {
    it.boxes["c_Z"] = Morphism(FinObject({Atom{"R", 2, ""}, Atom{"X", 2, ""}}), z2, cz);
    it.boxes["c_Y"] = Morphism(z2, y2, cy);
  }
  return make_model(d, it);
}

double tv_between(const Morphism& a, const Morphism& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.a.size(); ++i) s += std::abs(a.a[i] - b.a[i]);
  return 0.5 * s;
}

}  // namespace

WitnessPair find_marginal_do_witness(uint64_t seed, int restarts) {
  std::mt19937_64 r(seed);
  std::uniform_real_distribution<double> mass(0.03, 1.0), sep(0.85, 0.98),
      dirn(-1.0, 1.0);
  WitnessPair best;
  for (int t = 0; t < restarts; ++t) {
    double q[2][2][2];
    double tot = 0.0;
    for (auto& px : q)
      for (auto& pz : px)
        for (auto& v : pz) {
          v = mass(r);
          tot += v;
        }
    for (auto& px : q)
      for (auto& pz : px)
        for (auto& v : pz) v /= tot;

    double a = sep(r), b = sep(r);
    std::vector<double> cy = {a, 1.0 - a, 1.0 - b, b};

    double d[2][2];
    for (auto& row : d)
      for (auto& v : row) v = dirn(r);
    double s = 1e9;
    for (int x = 0; x < 2; ++x)
      for (int z = 0; z < 2; ++z) {
        if (d[x][z] > 1e-12) s = std::min(s, (q[1][x][z] - 0.005) / d[x][z]);
        if (d[x][z] < -1e-12) s = std::min(s, (0.005 - q[0][x][z]) / d[x][z]);
      }
    if (s <= 0.0 || s > 1e8) continue;

    auto factorize = [&](double Q[2][2][2]) {
      std::vector<double> pr(2), cx(4), cz(8);
      for (int rr = 0; rr < 2; ++rr) {
        double m = 0.0;
        for (int x = 0; x < 2; ++x)
          for (int z = 0; z < 2; ++z) m += Q[rr][x][z];
        pr[rr] = m;
        for (int x = 0; x < 2; ++x) {
          double mx = Q[rr][x][0] + Q[rr][x][1];
          cx[rr * 2 + x] = mx / m;
          for (int z = 0; z < 2; ++z) cz[(rr * 2 + x) * 2 + z] = Q[rr][x][z] / mx;
        }
      }
      return witness_model(false, pr, cx, {}, cz, cy);
    };

    double q2[2][2][2];
    for (int x = 0; x < 2; ++x)
      for (int z = 0; z < 2; ++z) {
        q2[0][x][z] = q[0][x][z] + s * d[x][z];
        q2[1][x][z] = q[1][x][z] - s * d[x][z];
      }
    CausalModel m1 = factorize(q);
    CausalModel m2 = factorize(q2);
    if (!approx_equal(output_state(m1), output_state(m2), 1e-9)) continue;
    Morphism t1 = marginalize(full_joint(apply(m1, Do{"X", 0})), {"Y"});
    Morphism t2 = marginalize(full_joint(apply(m2, Do{"X", 0})), {"Y"});
    double tv = tv_between(t1, t2);
    if (tv > best.tv) best = WitnessPair{m1, m2, t1, t2, tv};
  }
  if (best.tv <= 0.0) throw BudgetError("no usable witness found");
  return best;
}

WitnessPair find_conditional_do_witness(uint64_t seed, int restarts) {
  std::mt19937_64 r(seed);
  std::uniform_real_distribution<double> mass(0.05, 0.95), rho_d(0.25, 0.75),
      shift(-0.3, 0.3), dirn(-1.0, 1.0);
  WitnessPair best;
  for (int t = 0; t < restarts; ++t) {
    auto row = [&](double lo, double hi) {
      double v = lo + (hi - lo) * mass(r);
      return std::vector<double>{v, 1.0 - v};
    };
    std::vector<double> pr = row(0.2, 0.8), py = row(0.2, 0.8);
    std::vector<double> cx(4), cz(16);
    for (int i = 0; i < 2; ++i) {
      auto v = row(0.1, 0.9);
      cx[i * 2] = v[0];
      cx[i * 2 + 1] = v[1];
    }
    for (int i = 0; i < 8; ++i) {
      auto v = row(0.08, 0.92);
      cz[i * 2] = v[0];
      cz[i * 2 + 1] = v[1];
    }
    CausalModel m1 = witness_model(true, pr, cx, py, cz, {});

    Morphism obs = output_state(m1);  // lex cod (X, Y, Z)
    Morphism px = marginalize(obs, {"X"});
    Morphism pym = marginalize(obs, {"Y"});

    double rho = rho_d(r);
    double e = shift(r);
    std::vector<double> cx2(4);
    bool ok = true;
    for (int x = 0; x < 2; ++x) {
      double sign = x == 0 ? 1.0 : -1.0;
      cx2[0 * 2 + x] = px.a[x] + sign * e;
      cx2[1 * 2 + x] = px.a[x] - sign * e * rho / (1.0 - rho);
      if (cx2[x] < 0.02 || cx2[x] > 0.98 || cx2[2 + x] < 0.02 || cx2[2 + x] > 0.98)
        ok = false;
    }
    if (!ok) continue;

    std::vector<double> pr2 = {rho, 1.0 - rho};
    std::vector<double> cz2(16);
    for (int x = 0; x < 2 && ok; ++x) {
      double m0 = rho * cx2[x], m1v = (1.0 - rho) * cx2[2 + x];
      for (int y = 0; y < 2 && ok; ++y) {
        double vbar[2];
        for (int z = 0; z < 2; ++z) {
          // obs index over (X,Y,Z)
          double c = obs.a[(x * 2 + y) * 2 + z] / pym.a[y];
          vbar[z] = c / px.a[x];
        }
        double dv = dirn(r);
        double dz[2] = {dv, -dv};
        double alpha = 1e9;
        for (int z = 0; z < 2; ++z) {
          for (double mm : {m1v, -m0}) {
            double slope = mm * dz[z];
            if (slope > 1e-12) alpha = std::min(alpha, (0.98 - vbar[z]) / slope);
            if (slope < -1e-12) alpha = std::min(alpha, (0.02 - vbar[z]) / slope);
          }
        }
        if (alpha <= 0.0 || alpha > 1e8) {
          ok = false;
          break;
        }
        for (int z = 0; z < 2; ++z) {
          cz2[((0 * 2 + x) * 2 + y) * 2 + z] = vbar[z] + alpha * m1v * dz[z];
          cz2[((1 * 2 + x) * 2 + y) * 2 + z] = vbar[z] - alpha * m0 * dz[z];
        }
      }
    }
    if (!ok) continue;
    CausalModel m2 = witness_model(true, pr2, cx2, py, cz2, {});
    if (!approx_equal(obs, output_state(m2), 1e-9)) continue;

    auto target = [&](const CausalModel& m) {
      Morphism dj = full_joint(apply(m, Do{"X", 0}));
      Morphism cond = conditional(marginalize(dj, {"Z", "Y"}), {"Z"});
      return compose(sharp_state(FinObject::single("Z", 2), {0}), cond);
    };
    Morphism t1 = target(m1), t2 = target(m2);
    double tv = tv_between(t1, t2);
    if (tv > best.tv) best = WitnessPair{m1, m2, t1, t2, tv};
  }
  if (best.tv <= 0.0) throw BudgetError("no usable witness found");
  return best;
}

}  // namespace causal
