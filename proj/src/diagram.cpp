#include "causal/diagram.hpp"

#include <algorithm>
#include <sstream>

namespace causal {

int NetworkDiagram::consumption_count(const std::string& label) const {
  int c = 0;
  for (const auto& n : nodes)
    for (const auto& in : n.ins)
      if (in == label) ++c;
  for (const auto& o : outputs)
    if (o == label) ++c;
  return c;
}

int NetworkDiagram::producer_node(const std::string& label) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].out && *nodes[i].out == label) return static_cast<int>(i);
  return -1;
}

namespace {

ValidationReport fail(const std::string& why) { return {false, why}; }

std::string join_values(const std::vector<int64_t>& vs) {
  std::string s;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) s += "_";
    s += std::to_string(vs[i]);
  }
  return s;
}

}  // namespace

ValidationReport validate(const NetworkDiagram& d, bool strict) {
  for (const auto& n : d.nodes) {
    for (const auto& in : n.ins)
      if (!d.has_wire(in)) return fail("unknown wire: " + in);
    if (n.out && !d.has_wire(*n.out)) return fail("unknown wire: " + *n.out);
    for (size_t i = 0; i < n.ins.size(); ++i)
      for (size_t j = i + 1; j < n.ins.size(); ++j)
        if (n.ins[i] == n.ins[j]) return fail("wire used twice by one node: " + n.ins[i]);
    switch (n.kind.tag) {
      case NodeTag::mechanism:
        if (!n.out) return fail("mechanism without output");
        if (n.kind.box.empty()) return fail("mechanism without box name");
        break;
      case NodeTag::sharp_state:
        if (!n.out || !n.ins.empty()) return fail("state node must have one output, no inputs");
        if (n.kind.value.size() != 1) return fail("sharp state value arity");
        break;
      case NodeTag::generic_state:
        if (!n.out || !n.ins.empty()) return fail("state node must have one output, no inputs");
        if (n.kind.box.empty()) return fail("generic state without reference");
        break;
      case NodeTag::sharp_effect:
        if (n.out || n.ins.empty()) return fail("effect node must have inputs, no output");
        if (n.kind.value.size() != n.ins.size()) return fail("sharp effect value arity");
        break;
      case NodeTag::generic_effect:
        if (n.out || n.ins.empty()) return fail("effect node must have inputs, no output");
        break;
    }
    if (strict && n.kind.is_constant()) return fail("constant node in strict mode");
  }

  for (const auto& in : d.inputs)
    if (!d.has_wire(in)) return fail("unknown wire: " + in);
  for (const auto& o : d.outputs)
    if (!d.has_wire(o)) return fail("unknown wire: " + o);
  for (size_t i = 0; i < d.outputs.size(); ++i)
    for (size_t j = i + 1; j < d.outputs.size(); ++j)
      if (d.outputs[i] == d.outputs[j]) return fail("duplicate output: " + d.outputs[i]);

  for (const auto& [label, atom] : d.wires) {
    (void)atom;
    int produced = 0;
    for (const auto& n : d.nodes)
      if (n.out && *n.out == label) ++produced;
    for (const auto& in : d.inputs)
      if (in == label) ++produced;
    if (produced == 0) return fail("unproduced wire: " + label);
    if (produced > 1) return fail("multiple producers: " + label);
  }

  // Acyclicity of the wire graph (edges input-wire -> output-wire per node).
  std::map<std::string, int> indeg;
  for (const auto& [label, atom] : d.wires) {
    (void)atom;
    indeg[label] = 0;
  }
  for (const auto& n : d.nodes)
    if (n.out) indeg[*n.out] += static_cast<int>(n.ins.size());
  std::vector<std::string> ready;
  for (const auto& [label, deg] : indeg)
    if (deg == 0) ready.push_back(label);
  size_t done = 0;
  while (!ready.empty()) {
    std::string w = ready.back();
    ready.pop_back();
    ++done;
    for (const auto& n : d.nodes) {
      if (!n.out) continue;
      for (const auto& in : n.ins)
        if (in == w && --indeg[*n.out] == 0) ready.push_back(*n.out);
    }
  }
  if (done != d.wires.size()) return fail("acyclic");

  return {};
}

NetworkDiagram diagram_from_dag(const Dag& g, const std::vector<std::string>& I,
                                const std::vector<std::string>& O) {
  NetworkDiagram d;
  std::vector<bool> is_input(g.n(), false);
  for (const auto& name : I) {
    int v = g.require(name);
    if (!g.parents(v).empty())
      throw ValidationError("input vertex has parents: " + name);
    if (is_input[v]) throw ValidationError("duplicate input: " + name);
    is_input[v] = true;
    d.inputs.push_back(name);
  }
  for (size_t v = 0; v < g.n(); ++v) d.wires[g.vertices[v]] = Atom{g.vertices[v], 1};
  for (size_t v = 0; v < g.n(); ++v) {
    if (is_input[v]) continue;
    DiagramNode n;
    n.kind = NodeKind::Mechanism("c_" + g.vertices[v]);
    for (int p : g.parents(static_cast<int>(v))) n.ins.push_back(g.vertices[p]);
    n.out = g.vertices[v];
    d.nodes.push_back(std::move(n));
  }
  std::vector<bool> seen(g.n(), false);
  for (const auto& name : O) {
    int v = g.require(name);
    if (seen[v]) throw ValidationError("duplicate output: " + name);
    seen[v] = true;
    d.outputs.push_back(name);
  }
  return d;
}

OpenDag open_dag_from_diagram(const NetworkDiagram& d) {
  auto rep = validate(d, true);
  if (!rep.ok) throw ValidationError("not a strict diagram: " + rep.violation);
  std::vector<std::string> vertices;
  for (const auto& [label, atom] : d.wires) {
    (void)atom;
    vertices.push_back(label);
  }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& n : d.nodes)
    for (const auto& in : n.ins) edges.emplace_back(in, *n.out);
  return make_open_dag(make_dag(vertices, edges), d.inputs, d.outputs);
}

namespace {

// Resolved semantic atom for a wire label: the label itself as the name so
// evaluated cod/dom legs stay traceable, cardinality from the interpretation.
Atom wire_atom(const NetworkDiagram& d, const Interpretation& interp,
               const std::string& label) {
  auto it = interp.wires.find(label);
  if (it == interp.wires.end())
    throw IndexError("missing interpretation for wire: " + label);
  (void)d;
  return Atom{label, it->second.card, it->second.shown()};
}

Morphism node_morphism(const NetworkDiagram& d, const Interpretation& interp,
                       const DiagramNode& n) {
  FinObject dom = FinObject::unit(), cod = FinObject::unit();
  {
    std::vector<Atom> datoms, catoms;
    for (const auto& in : n.ins) datoms.push_back(wire_atom(d, interp, in));
    if (n.out) catoms.push_back(wire_atom(d, interp, *n.out));
    if (!datoms.empty()) dom = FinObject(std::move(datoms));
    if (!catoms.empty()) cod = FinObject(std::move(catoms));
  }
  switch (n.kind.tag) {
    case NodeTag::sharp_state:
      return sharp_state(cod, n.kind.value);
    case NodeTag::sharp_effect:
      return sharp_effect(dom, n.kind.value);
    case NodeTag::generic_effect:
      if (n.kind.is_discard()) return discard(dom);
      [[fallthrough]];
    case NodeTag::mechanism:
    case NodeTag::generic_state: {
      auto it = interp.boxes.find(n.kind.box);
      if (it == interp.boxes.end())
        throw IndexError("missing interpretation for box: " + n.kind.box);
      const Morphism& m = it->second;
      if (m.dom.natoms() != dom.natoms() || m.cod.natoms() != cod.natoms())
        throw ShapeError("box arity mismatch: " + n.kind.box);
      for (size_t i = 0; i < dom.natoms(); ++i)
        if (m.dom.atoms[i].card != dom.atoms[i].card)
          throw ShapeError("box input cardinality mismatch: " + n.kind.box);
      for (size_t i = 0; i < cod.natoms(); ++i)
        if (m.cod.atoms[i].card != cod.atoms[i].card)
          throw ShapeError("box output cardinality mismatch: " + n.kind.box);
      return m;
    }
  }
  throw ValidationError("unreachable node kind");
}

}  // namespace

Morphism evaluate(const NetworkDiagram& d, const Interpretation& interp) {
  auto rep = validate(d, false);
  if (!rep.ok) throw ValidationError("invalid diagram: " + rep.violation);

  // Frontier: one open leg per live wire. Fan-out copies are split off only
  // when a consumer fires, so a wire shared k ways costs one leg, not k.
  Morphism F = scalar(1.0);
  std::vector<std::string> slots;
  std::map<std::string, int> remaining;
  for (const auto& in : d.inputs) {
    Atom a = wire_atom(d, interp, in);
    int k = d.consumption_count(in);
    remaining[in] = k;
    F = tensor(F, copy_map(FinObject({a}), k == 0 ? 0 : 1));
    if (k > 0) slots.push_back(in);
  }

  // Kahn order over nodes, ties broken by output label.
  std::vector<int> pending(d.nodes.size(), 0);
  std::set<std::pair<std::string, int>> ready;
  for (size_t i = 0; i < d.nodes.size(); ++i) {
    for (const auto& in : d.nodes[i].ins)
      if (d.producer_node(in) >= 0) ++pending[i];
    if (pending[i] == 0)
      ready.insert({d.nodes[i].out.value_or(""), static_cast<int>(i)});
  }

  size_t processed = 0;
  while (!ready.empty()) {
    int idx = ready.begin()->second;
    ready.erase(ready.begin());
    const DiagramNode& n = d.nodes[idx];
    ++processed;

    std::vector<int> legs;
    for (const auto& in : n.ins) {
      int s = -1;
      for (size_t t = 0; t < slots.size(); ++t) {
        if (slots[t] != in) continue;
        if (std::find(legs.begin(), legs.end(), static_cast<int>(t)) != legs.end())
          continue;
        s = static_cast<int>(t);
        break;
      }
      if (s < 0) throw ValidationError("internal: missing slot");
      if (remaining[in] > 1) {
        // split off the copy this consumer takes; one leg stays behind
        Atom a = wire_atom(d, interp, in);
        F = contract(F, {s}, copy_map(FinObject({a}), 2));
        slots.erase(slots.begin() + s);
        for (int& l : legs)
          if (l > s) --l;
        slots.push_back(in);
        slots.push_back(in);
        s = static_cast<int>(slots.size()) - 1;
      }
      --remaining[in];
      legs.push_back(s);
    }

    if (getenv("CAUSAL_EVAL_TRACE"))
      fprintf(stderr, "fire %s out=%s legs=%zu entries=%lld\n",
              n.kind.box.c_str(), n.out ? n.out->c_str() : "-", slots.size(),
              (long long)F.a.size());
    F = contract(F, legs, node_morphism(d, interp, n));
    {
      std::vector<bool> used(slots.size(), false);
      for (int l : legs) used[l] = true;
      std::vector<std::string> kept;
      for (size_t s = 0; s < slots.size(); ++s)
        if (!used[s]) kept.push_back(slots[s]);
      slots = std::move(kept);
    }

    if (n.out) {
      Atom a = wire_atom(d, interp, *n.out);
      int k = d.consumption_count(*n.out);
      remaining[*n.out] = k;
      if (k == 0)
        F = contract(F, {static_cast<int>(slots.size())}, copy_map(FinObject({a}), 0));
      else
        slots.push_back(*n.out);

      // Wake consumers.
      for (size_t j = 0; j < d.nodes.size(); ++j)
        for (const auto& in : d.nodes[j].ins)
          if (in == *n.out && --pending[j] == 0)
            ready.insert({d.nodes[j].out.value_or(""), static_cast<int>(j)});
    }
  }
  if (processed != d.nodes.size())
    throw ValidationError("invalid diagram: acyclic");

  // Materialise the deferred output multiplicities, then order slots as O.
  for (size_t s = 0; s < slots.size();) {
    int r = remaining[slots[s]];
    if (r > 1) {
      std::string w = slots[s];
      Atom a = wire_atom(d, interp, w);
      F = contract(F, {static_cast<int>(s)}, copy_map(FinObject({a}), r));
      slots.erase(slots.begin() + s);
      for (int i = 0; i < r; ++i) slots.push_back(w);
      remaining[w] = 1;
    } else {
      ++s;
    }
  }
  if (slots.size() != d.outputs.size())
    throw ValidationError("internal: leftover slots");
  std::vector<int> order;
  std::vector<bool> taken(slots.size(), false);
  for (const auto& o : d.outputs)
    for (size_t s = 0; s < slots.size(); ++s)
      if (!taken[s] && slots[s] == o) {
        order.push_back(static_cast<int>(s));
        taken[s] = true;
        break;
      }
  if (order.size() != d.outputs.size())
    throw ValidationError("internal: output slot mismatch");
  F = reorder_cod(F, order);

  // Fan-out legs pick up collision-renamed atoms mid-contraction; restore the
  // wire labels on the finished cod (the entry layout is already right).
  std::vector<Atom> catoms;
  for (const auto& o : d.outputs) catoms.push_back(wire_atom(d, interp, o));
  FinObject cod = catoms.empty() ? FinObject::unit() : FinObject(std::move(catoms));
  if (cod.card() != F.ccard()) throw ValidationError("internal: cod card mismatch");
  return Morphism(F.dom, cod, F.a);
}

namespace {

RewriteResult mismatch(const NetworkDiagram& d, const std::string& why) {
  RewriteResult r;
  r.diagram = d;
  r.applied = false;
  r.note = why;
  return r;
}

bool in_range(const NetworkDiagram& d, int i) {
  return i >= 0 && i < static_cast<int>(d.nodes.size());
}

std::string fresh_wire(const NetworkDiagram& d, const std::string& base) {
  std::string cand = base + "'";
  int k = 2;
  while (d.has_wire(cand)) cand = base + "'" + std::to_string(k++);
  return cand;
}

}  // namespace

RewriteResult apply_rewrite(const NetworkDiagram& d, RewriteRule rule,
                            const RewriteSite& site) {
  RewriteResult r;
  r.diagram = d;

  switch (rule) {
    case RewriteRule::discard_fallthrough: {
      if (!in_range(d, site.node)) return mismatch(d, "no such node");
      const DiagramNode& n = d.nodes[site.node];
      if (!n.out) return mismatch(d, "site is not a producer");
      if (d.consumption_count(*n.out) != 0) return mismatch(d, "output still consumed");
      r.diagram.wires.erase(*n.out);
      r.diagram.nodes.erase(r.diagram.nodes.begin() + site.node);
      r.applied = true;
      return r;
    }

    case RewriteRule::drop_discarded_copy_leg: {
      if (!in_range(d, site.node)) return mismatch(d, "no such node");
      if (!d.nodes[site.node].kind.is_discard())
        return mismatch(d, "site is not an explicit discard");
      r.diagram.nodes.erase(r.diagram.nodes.begin() + site.node);
      r.applied = true;
      return r;
    }

    case RewriteRule::copy_out_discard: {
      if (!d.has_wire(site.wire)) return mismatch(d, "no such wire");
      r.diagram.nodes.push_back({NodeKind::Discard(), {site.wire}, std::nullopt});
      r.applied = true;
      return r;
    }

    case RewriteRule::copy_through_deterministic: {
      if (!in_range(d, site.node) || !in_range(d, site.node2) || site.node == site.node2)
        return mismatch(d, "need two distinct nodes");
      const DiagramNode& a = d.nodes[site.node];
      const DiagramNode& b = d.nodes[site.node2];
      if (a.kind.tag != NodeTag::mechanism || b.kind.tag != NodeTag::mechanism)
        return mismatch(d, "both sites must be mechanisms");
      if (a.kind.box != b.kind.box) return mismatch(d, "different boxes");
      if (a.ins != b.ins) return mismatch(d, "different inputs");
      const std::string keep = *a.out, drop = *b.out;
      for (const auto& n : d.nodes) {
        bool uses_keep = std::count(n.ins.begin(), n.ins.end(), keep) > 0;
        bool uses_drop = std::count(n.ins.begin(), n.ins.end(), drop) > 0;
        if (uses_keep && uses_drop) return mismatch(d, "merge would duplicate an input");
      }
      if (std::count(d.outputs.begin(), d.outputs.end(), keep) &&
          std::count(d.outputs.begin(), d.outputs.end(), drop))
        return mismatch(d, "merge would duplicate an output");
      for (auto& n : r.diagram.nodes)
        for (auto& in : n.ins)
          if (in == drop) in = keep;
      for (auto& o : r.diagram.outputs)
        if (o == drop) o = keep;
      r.diagram.nodes.erase(r.diagram.nodes.begin() + site.node2);
      r.diagram.wires.erase(drop);
      r.applied = true;
      return r;
    }

    case RewriteRule::sharp_effect_split: {
      if (!in_range(d, site.node)) return mismatch(d, "no such node");
      const DiagramNode& e = d.nodes[site.node];
      if (e.kind.tag != NodeTag::sharp_effect || e.ins.size() != 1)
        return mismatch(d, "site is not a single-wire sharp effect");
      const std::string w = e.ins[0];
      if (d.consumption_count(w) < 2) return mismatch(d, "wire has no other consumers");
      std::string w2 = fresh_wire(d, w);
      r.diagram.wires[w2] = d.wires.at(w);
      for (size_t i = 0; i < r.diagram.nodes.size(); ++i) {
        if (static_cast<int>(i) == site.node) continue;
        for (auto& in : r.diagram.nodes[i].ins)
          if (in == w) in = w2;
      }
      for (auto& o : r.diagram.outputs)
        if (o == w) o = w2;
      r.diagram.nodes.push_back(
          {NodeKind::SharpState({e.kind.value[0]}), {}, w2});
      r.applied = true;
      r.note = w2;
      return r;
    }

    case RewriteRule::absorb_noise_into_channel: {
      if (!in_range(d, site.node) || !in_range(d, site.node2))
        return mismatch(d, "no such node");
      const DiagramNode& m = d.nodes[site.node];
      const DiagramNode& s = d.nodes[site.node2];
      if (m.kind.tag != NodeTag::mechanism) return mismatch(d, "site is not a mechanism");
      if (!s.kind.is_state()) return mismatch(d, "second site is not a state");
      const std::string u = *s.out;
      if (d.consumption_count(u) != 1) return mismatch(d, "state output is shared");
      auto it = std::find(m.ins.begin(), m.ins.end(), u);
      if (it == m.ins.end()) return mismatch(d, "state does not feed the mechanism");
      int pos = static_cast<int>(it - m.ins.begin());
      r.old_box = m.kind.box;
      r.absorbed_box = s.kind.tag == NodeTag::generic_state
                           ? s.kind.box
                           : "v" + join_values(s.kind.value);
      r.new_box = r.old_box + "&" + r.absorbed_box + "@" + std::to_string(pos);
      r.absorbed_position = pos;
      DiagramNode& mm = r.diagram.nodes[site.node];
      mm.ins.erase(mm.ins.begin() + pos);
      mm.kind.box = r.new_box;
      int drop = site.node2;
      r.diagram.nodes.erase(r.diagram.nodes.begin() + drop);
      r.diagram.wires.erase(u);
      r.applied = true;
      return r;
    }
  }
  return mismatch(d, "unknown rule");
}

FixpointResult rewrite_fixpoint(const NetworkDiagram& d,
                                const std::vector<RewriteRule>& rules,
                                const std::set<std::string>& deterministic_boxes) {
  FixpointResult out;
  out.diagram = d;
  constexpr int kMaxSteps = 10000;
  for (int step = 0; step < kMaxSteps; ++step) {
    RewriteResult res;
    RewriteSite hit;
    RewriteRule hit_rule = RewriteRule::discard_fallthrough;
    bool fired = false;
    for (RewriteRule rule : rules) {
      const NetworkDiagram& cur = out.diagram;
      switch (rule) {
        case RewriteRule::discard_fallthrough:
        case RewriteRule::drop_discarded_copy_leg:
        case RewriteRule::sharp_effect_split: {
          for (int i = 0; i < static_cast<int>(cur.nodes.size()) && !fired; ++i) {
            RewriteSite s;
            s.node = i;
            RewriteResult attempt = apply_rewrite(cur, rule, s);
            if (attempt.applied) {
              res = std::move(attempt);
              hit = s;
              hit_rule = rule;
              fired = true;
            }
          }
          break;
        }
        case RewriteRule::copy_out_discard: {
          for (const auto& [label, atom] : cur.wires) {
            (void)atom;
            RewriteSite s;
            s.wire = label;
            RewriteResult attempt = apply_rewrite(cur, rule, s);
            if (attempt.applied) {
              res = std::move(attempt);
              hit = s;
              hit_rule = rule;
              fired = true;
              break;
            }
          }
          break;
        }
        case RewriteRule::copy_through_deterministic: {
          int n = static_cast<int>(cur.nodes.size());
          for (int i = 0; i < n && !fired; ++i) {
            if (cur.nodes[i].kind.tag != NodeTag::mechanism) continue;
            if (!deterministic_boxes.count(cur.nodes[i].kind.box)) continue;
            for (int j = i + 1; j < n && !fired; ++j) {
              RewriteSite s;
              s.node = i;
              s.node2 = j;
              RewriteResult attempt = apply_rewrite(cur, rule, s);
              if (attempt.applied) {
                res = std::move(attempt);
                hit = s;
                hit_rule = rule;
                fired = true;
              }
            }
          }
          break;
        }
        case RewriteRule::absorb_noise_into_channel: {
          int n = static_cast<int>(cur.nodes.size());
          for (int i = 0; i < n && !fired; ++i) {
            if (cur.nodes[i].kind.tag != NodeTag::mechanism) continue;
            for (int j = 0; j < n && !fired; ++j) {
              if (j == i || !cur.nodes[j].kind.is_state()) continue;
              RewriteSite s;
              s.node = i;
              s.node2 = j;
              RewriteResult attempt = apply_rewrite(cur, rule, s);
              if (attempt.applied) {
                res = std::move(attempt);
                hit = s;
                hit_rule = rule;
                fired = true;
              }
            }
          }
          break;
        }
      }
      if (fired) break;
    }
    if (!fired) return out;
    out.diagram = std::move(res.diagram);
    out.events.push_back({hit_rule, hit, res.old_box, res.absorbed_box, res.new_box,
                          res.absorbed_position});
  }
  throw BudgetError("rewrite fixpoint exceeded step budget");
}

std::string to_dot(const NetworkDiagram& d) {
  std::ostringstream os;
  os << "digraph D {\n";
  os << "  rankdir=LR;\n";
  os << "  node [fontsize=10];\n";
  for (size_t i = 0; i < d.inputs.size(); ++i)
    os << "  i" << i << " [shape=plaintext, label=\"" << d.inputs[i] << "\"];\n";
  for (size_t i = 0; i < d.outputs.size(); ++i)
    os << "  o" << i << " [shape=plaintext, label=\"" << d.outputs[i] << "\"];\n";
  if (!d.inputs.empty()) {
    os << "  { rank=source;";
    for (size_t i = 0; i < d.inputs.size(); ++i) os << " i" << i << ";";
    os << " }\n";
  }
  if (!d.outputs.empty()) {
    os << "  { rank=sink;";
    for (size_t i = 0; i < d.outputs.size(); ++i) os << " o" << i << ";";
    os << " }\n";
  }
  for (size_t i = 0; i < d.nodes.size(); ++i) {
    const auto& k = d.nodes[i].kind;
    std::string shape = "box", label = k.box;
    switch (k.tag) {
      case NodeTag::mechanism: break;
      case NodeTag::sharp_state:
        shape = "triangle";
        label = "st[" + join_values(k.value) + "]";
        break;
      case NodeTag::sharp_effect:
        shape = "invtriangle";
        label = "ef[" + join_values(k.value) + "]";
        break;
      case NodeTag::generic_state:
        shape = "house";
        break;
      case NodeTag::generic_effect:
        shape = k.is_discard() ? "point" : "invhouse";
        if (k.is_discard()) label = "";
        break;
    }
    os << "  n" << i << " [shape=" << shape << ", label=\"" << label << "\"];\n";
  }

  auto producer_token = [&](const std::string& label) -> std::string {
    int p = d.producer_node(label);
    if (p >= 0) return "n" + std::to_string(p);
    for (size_t i = 0; i < d.inputs.size(); ++i)
      if (d.inputs[i] == label) return "i" + std::to_string(i);
    return "?";
  };
  for (size_t i = 0; i < d.nodes.size(); ++i)
    for (const auto& in : d.nodes[i].ins)
      os << "  " << producer_token(in) << " -> n" << i << " [label=\"" << in << "\"];\n";
  for (size_t i = 0; i < d.outputs.size(); ++i)
    os << "  " << producer_token(d.outputs[i]) << " -> o" << i << " [label=\""
       << d.outputs[i] << "\"];\n";
  int ground = 0;
  for (const auto& [label, atom] : d.wires) {
    (void)atom;
    if (d.consumption_count(label) == 0) {
      os << "  g" << ground << " [shape=point];\n";
      os << "  " << producer_token(label) << " -> g" << ground << " [label=\"" << label
         << "\", style=dashed];\n";
      ++ground;
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace causal
