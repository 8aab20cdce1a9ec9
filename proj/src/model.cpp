#include "causal/model.hpp"

#include <algorithm>
#include <set>

namespace causal {

namespace {

const DiagramNode& producer_of(const CausalModel& m, const std::string& variable) {
  if (!m.diagram.has_wire(variable))
    throw IndexError("unknown variable: " + variable);
  int n = m.diagram.producer_node(variable);
  if (n < 0) throw IndexError("variable has no mechanism (input wire): " + variable);
  return m.diagram.nodes[n];
}

int64_t wire_card(const Interpretation& it, const std::string& label) {
  auto w = it.wires.find(label);
  if (w == it.wires.end())
    throw IndexError("missing interpretation for wire: " + label);
  return w->second.card;
}

}  // namespace

CausalModel make_model(NetworkDiagram diagram, Interpretation interp, double tol) {
  auto rep = validate(diagram, true);
  if (!rep.ok) throw ValidationError("model diagram: " + rep.violation);
  for (const auto& n : diagram.nodes) {
    auto b = interp.boxes.find(n.kind.box);
    if (b == interp.boxes.end())
      throw IndexError("missing interpretation for box: " + n.kind.box);
    const Morphism& c = b->second;
    if (c.dom.natoms() != n.ins.size() || c.cod.natoms() != (n.out ? 1u : 0u))
      throw ShapeError("box arity does not match node wiring: " + n.kind.box);
    for (size_t i = 0; i < n.ins.size(); ++i)
      if (c.dom.atoms[i].card != wire_card(interp, n.ins[i]))
        throw ShapeError("box input cardinality mismatch: " + n.kind.box);
    if (n.out && c.cod.atoms[0].card != wire_card(interp, *n.out))
      throw ShapeError("box output cardinality mismatch: " + n.kind.box);
    if (!is_channel(c, tol))
      throw ValidationError("mechanism is not a channel: " + n.kind.box);
  }
  for (const auto& [label, atom] : diagram.wires) {
    (void)atom;
    wire_card(interp, label);
  }
  return CausalModel{std::move(diagram), std::move(interp)};
}

std::vector<std::string> model_variables(const CausalModel& m) {
  std::vector<std::string> vs;
  for (const auto& [label, atom] : m.diagram.wires) {
    (void)atom;
    vs.push_back(label);
  }
  return vs;
}

OpenDag model_graph(const CausalModel& m) { return open_dag_from_diagram(m.diagram); }

const Morphism& mechanism_of(const CausalModel& m, const std::string& variable) {
  return m.interp.boxes.at(producer_of(m, variable).kind.box);
}

Morphism output_state(const CausalModel& m) {
  if (!m.diagram.inputs.empty())
    throw ShapeError("output_state: model has inputs; use channel_of");
  return evaluate(m.diagram, m.interp);
}

Morphism channel_of(const CausalModel& m) { return evaluate(m.diagram, m.interp); }

bool conditionally_independent(const Morphism& omega,
                               const std::vector<std::string>& X,
                               const std::vector<std::string>& Y,
                               const std::vector<std::string>& Z, double tol) {
  std::set<std::string> seen;
  for (const auto* set : {&X, &Y, &Z})
    for (const auto& a : *set)
      if (!seen.insert(a).second)
        throw ValidationError("conditionally_independent: sets overlap at " + a);

  std::vector<std::string> xyz;
  xyz.insert(xyz.end(), X.begin(), X.end());
  xyz.insert(xyz.end(), Y.begin(), Y.end());
  xyz.insert(xyz.end(), Z.begin(), Z.end());
  std::vector<std::string> xz = X, yz = Y;
  xz.insert(xz.end(), Z.begin(), Z.end());
  yz.insert(yz.end(), Z.begin(), Z.end());

  Morphism both = conditional(marginalize(omega, xyz), Z);
  Morphism cx = conditional(marginalize(omega, xz), Z);
  Morphism cy = conditional(marginalize(omega, yz), Z);
  Morphism prod = compose(copy_map(both.dom, 2), tensor(cx, cy));
  return max_abs_diff(both, prod) <= tol;
}

Morphism full_joint(const CausalModel& m) {
  if (!m.diagram.inputs.empty())
    throw ShapeError("full_joint: model has inputs");
  NetworkDiagram full = m.diagram;
  full.outputs = model_variables(m);
  return evaluate(full, m.interp);
}

std::vector<int> nonsignalling_legs(const Morphism& c, double tol) {
  std::vector<int> dead;
  size_t k = c.dom.natoms();
  for (size_t leg = 0; leg < k; ++leg) {
    int64_t stride = 1;
    for (size_t j = leg + 1; j < k; ++j) stride *= c.dom.atoms[j].card;
    int64_t card = c.dom.atoms[leg].card;
    int64_t rest = c.dcard() / card;
    bool signals = false;
    // Enumerate settings of the other legs via the quotient index.
    for (int64_t q = 0; q < rest && !signals; ++q) {
      int64_t hi = q / stride, lo = q % stride;
      int64_t base = (hi * card) * stride + lo;
      for (int64_t v = 1; v < card && !signals; ++v)
        for (int64_t y = 0; y < c.ccard(); ++y)
          if (std::abs(c.at(base + v * stride, y) - c.at(base, y)) > tol) {
            signals = true;
            break;
          }
    }
    if (!signals) dead.push_back(static_cast<int>(leg));
  }
  return dead;
}

FaithfulnessReport mechanism_faithful(const CausalModel& m, double tol) {
  FaithfulnessReport rep;
  for (const auto& n : m.diagram.nodes) {
    if (!n.out) continue;
    const Morphism& c = m.interp.boxes.at(n.kind.box);
    std::vector<std::string> dead;
    for (int leg : nonsignalling_legs(c, tol)) dead.push_back(n.ins[leg]);
    if (!dead.empty()) {
      rep.faithful = false;
      rep.nonsignalling[*n.out] = std::move(dead);
    }
  }
  return rep;
}

namespace {

const DiagramNode* fcm_producer(const Fcm& f, const std::string& variable) {
  int n = f.base.diagram.producer_node(variable);
  return n < 0 ? nullptr : &f.base.diagram.nodes[n];
}

}  // namespace

Fcm make_fcm(CausalModel base, std::vector<std::string> endogenous,
             std::vector<std::string> exogenous, double tol) {
  std::sort(endogenous.begin(), endogenous.end());
  std::sort(exogenous.begin(), exogenous.end());
  Fcm f{std::move(base), std::move(endogenous), std::move(exogenous)};
  const NetworkDiagram& d = f.base.diagram;

  std::set<std::string> endo(f.endogenous.begin(), f.endogenous.end());
  std::set<std::string> exo(f.exogenous.begin(), f.exogenous.end());
  for (const auto& v : f.endogenous)
    if (exo.count(v)) throw ValidationError("variable both endogenous and exogenous: " + v);
  for (const auto& [label, atom] : d.wires) {
    (void)atom;
    if (!endo.count(label) && !exo.count(label))
      throw ValidationError("wire not classified: " + label);
  }
  for (const auto& o : d.outputs)
    if (!endo.count(o)) throw ValidationError("output is not endogenous: " + o);
  for (const auto& i : d.inputs)
    if (!endo.count(i)) throw ValidationError("input is not endogenous: " + i);

  for (const auto& u : f.exogenous) {
    int p = d.producer_node(u);
    if (p < 0) throw ValidationError("noise wire has no state: " + u);
    if (!d.nodes[p].ins.empty())
      throw ValidationError("noise wire has parents: " + u);
    if (d.consumption_count(u) != 1)
      throw ValidationError("noise wire must feed exactly one mechanism: " + u);
    const Morphism& lam = f.base.interp.boxes.at(d.nodes[p].kind.box);
    if (!lam.is_state() || !is_channel(lam, tol))
      throw ValidationError("noise interpretation is not a normalised state: " + u);
  }
  for (const auto& v : f.endogenous) {
    int p = d.producer_node(v);
    if (p < 0) continue;  // input wire of an open model
    const DiagramNode& n = d.nodes[p];
    int noise = 0;
    for (const auto& in : n.ins) noise += exo.count(in) ? 1 : 0;
    if (noise != 1)
      throw ValidationError("endogenous mechanism needs exactly one noise parent: " + v);
    if (!is_deterministic(f.base.interp.boxes.at(n.kind.box), tol))
      throw ValidationError("mechanism is not deterministic: " + v);
  }
  return f;
}

Fcm fcm_from_model(const CausalModel& m) {
  if (!m.diagram.inputs.empty())
    throw ShapeError("fcm_from_model: model must be closed");
  NetworkDiagram d;
  Interpretation it;
  d.wires = m.diagram.wires;
  d.inputs = m.diagram.inputs;
  d.outputs = m.diagram.outputs;
  it.wires = m.interp.wires;
  std::vector<std::string> endo, exo;

  for (const auto& n : m.diagram.nodes) {
    if (!n.out) {
      // Effect boxes have no noise to split off; carry them over verbatim.
      d.nodes.push_back(n);
      it.boxes[n.kind.box] = m.interp.boxes.at(n.kind.box);
      continue;
    }
    const std::string& x = *n.out;
    endo.push_back(x);
    std::string uw = "U_" + x;
    while (d.has_wire(uw)) uw += "~";
    exo.push_back(uw);

    Dilation dd = functional_dilation(m.interp.boxes.at(n.kind.box));
    Morphism fx = dd.f, lam = dd.lambda;
    if (dd.U.natoms() == 0) {
      // Unit noise: keep the Fcm shape uniform with a one-point noise wire.
      FinObject u1 = FinObject::single(uw, 1);
      fx = Morphism(tensor(fx.dom, u1), fx.cod, fx.a);
      lam = Morphism(FinObject::unit(), u1, {1.0});
      it.wires[uw] = Atom{uw, 1};
    } else {
      it.wires[uw] = Atom{uw, dd.U.card()};
    }
    d.wires[uw] = Atom{uw, 1};
    d.nodes.push_back({NodeKind::Mechanism("lam_" + x), {}, uw});
    std::vector<std::string> ins = n.ins;
    ins.push_back(uw);
    d.nodes.push_back({NodeKind::Mechanism("f_" + x), std::move(ins), x});
    it.boxes["lam_" + x] = std::move(lam);
    it.boxes["f_" + x] = std::move(fx);
  }
  return make_fcm(make_model(std::move(d), std::move(it)), std::move(endo),
                  std::move(exo));
}

CausalModel model_from_fcm(const Fcm& f) {
  std::set<std::string> exo(f.exogenous.begin(), f.exogenous.end());
  NetworkDiagram d;
  Interpretation it;
  d.inputs = f.base.diagram.inputs;
  d.outputs = f.base.diagram.outputs;
  for (const auto& v : f.endogenous) {
    d.wires[v] = Atom{v, 1};
    it.wires[v] = f.base.interp.wires.at(v);
  }
  for (const auto& n : f.base.diagram.nodes) {
    if (!n.out) {
      d.nodes.push_back(n);
      it.boxes[n.kind.box] = f.base.interp.boxes.at(n.kind.box);
      continue;
    }
    if (exo.count(*n.out)) continue;
    const std::string& x = *n.out;
    std::vector<std::string> ins;
    int plugged = -1;
    for (size_t i = 0; i < n.ins.size(); ++i) {
      if (exo.count(n.ins[i]))
        plugged = static_cast<int>(i);
      else
        ins.push_back(n.ins[i]);
    }
    const Morphism& fx = f.base.interp.boxes.at(n.kind.box);
    const Morphism& lam = fcm_noise(f, x);
    it.boxes["c_" + x] = plug(fx, {plugged}, lam);
    d.nodes.push_back({NodeKind::Mechanism("c_" + x), std::move(ins), x});
  }
  return make_model(std::move(d), std::move(it));
}

const Morphism& fcm_mechanism(const Fcm& f, const std::string& variable) {
  const DiagramNode* n = fcm_producer(f, variable);
  if (!n) throw IndexError("no mechanism for variable: " + variable);
  return f.base.interp.boxes.at(n->kind.box);
}

std::string fcm_noise_wire(const Fcm& f, const std::string& variable) {
  const DiagramNode* n = fcm_producer(f, variable);
  if (!n) throw IndexError("no mechanism for variable: " + variable);
  std::set<std::string> exo(f.exogenous.begin(), f.exogenous.end());
  for (const auto& in : n->ins)
    if (exo.count(in)) return in;
  throw IndexError("variable has no noise parent: " + variable);
}

const Morphism& fcm_noise(const Fcm& f, const std::string& variable) {
  std::string uw = fcm_noise_wire(f, variable);
  int p = f.base.diagram.producer_node(uw);
  return f.base.interp.boxes.at(f.base.diagram.nodes[p].kind.box);
}

bool markov_check(const Morphism& joint, const Dag& g, double tol) {
  NetworkDiagram d = diagram_from_dag(g, {}, g.vertices);
  Interpretation it;
  for (size_t v = 0; v < g.n(); ++v) {
    const std::string& x = g.vertices[v];
    int pos = -1;
    for (size_t i = 0; i < joint.cod.natoms(); ++i)
      if (joint.cod.atoms[i].name == x) pos = static_cast<int>(i);
    if (pos < 0) throw IndexError("joint lacks variable: " + x);
    it.wires[x] = Atom{x, joint.cod.atoms[pos].card};

    std::vector<std::string> pa;
    for (int p : g.parents(static_cast<int>(v))) pa.push_back(g.vertices[p]);
    std::vector<std::string> pax = pa;
    pax.push_back(x);
    it.boxes["c_" + x] = conditional(marginalize(joint, pax), pa);
  }
  Morphism product = evaluate(d, it);
  return max_abs_diff(marginalize(joint, g.vertices), product) <= tol;
}

bool markov_check(const CausalModel& m, double tol) {
  return markov_check(full_joint(m), model_graph(m).dag, tol);
}

}  // namespace causal
