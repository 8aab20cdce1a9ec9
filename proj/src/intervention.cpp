#include "causal/intervention.hpp"

#include <algorithm>
#include <set>

namespace causal {

namespace {

int producer_or_throw(const CausalModel& m, const std::string& X) {
  if (!m.diagram.has_wire(X)) throw IndexError("unknown variable: " + X);
  int p = m.diagram.producer_node(X);
  if (p < 0) throw ValidationError("variable has no mechanism: " + X);
  return p;
}

std::string fresh_box(const Interpretation& it, std::string base) {
  while (it.boxes.count(base)) base += "~";
  return base;
}

int64_t card_of(const CausalModel& m, const std::string& w) {
  auto a = m.interp.wires.find(w);
  if (a == m.interp.wires.end()) throw IndexError("unknown variable: " + w);
  return a->second.card;
}

FinObject wires_object(const CausalModel& m, const std::vector<std::string>& ws) {
  std::vector<Atom> atoms;
  for (const auto& w : ws) atoms.push_back(Atom{w, card_of(m, w)});
  return atoms.empty() ? FinObject::unit() : FinObject(std::move(atoms));
}

// Swap the mechanism node of X for (box, ins, morphism) and revalidate.
CausalModel replace_mechanism(const CausalModel& m, const std::string& X,
                              const std::string& base, std::vector<std::string> ins,
                              Morphism mech, double tol) {
  int p = producer_or_throw(m, X);
  NetworkDiagram d = m.diagram;
  Interpretation it = m.interp;
  std::string box = fresh_box(it, base);
  d.nodes[p] = DiagramNode{NodeKind::Mechanism(box), std::move(ins), X};
  it.boxes[box] = std::move(mech);
  return make_model(std::move(d), std::move(it), tol);
}

bool same_entries(const Morphism& a, const Morphism& b) {
  return a.dcard() == b.dcard() && a.ccard() == b.ccard() && a.a == b.a;
}

void merge_box(Interpretation& it, const std::string& name, const Morphism& m) {
  auto found = it.boxes.find(name);
  if (found == it.boxes.end()) {
    it.boxes.emplace(name, m);
    return;
  }
  if (!same_entries(found->second, m))
    throw ValidationError("box name collision: " + name);
}

}  // namespace

CausalModel apply(const CausalModel& m, const Intervention& sigma, double tol) {
  return std::visit(
      [&](const auto& iv) -> CausalModel {
        using T = std::decay_t<decltype(iv)>;
        if constexpr (std::is_same_v<T, Do>) {
          int64_t card = card_of(m, iv.X);
          if (iv.value < 0 || iv.value >= card)
            throw IndexError("Do value out of range for " + iv.X);
          return replace_mechanism(
              m, iv.X, "do_" + iv.X, {},
              sharp_state(FinObject::single(iv.X, card), {iv.value}), tol);
        } else if constexpr (std::is_same_v<T, Break>) {
          if (!iv.state.is_state() || !is_channel(iv.state, tol))
            throw ValidationError("Break state must be normalised");
          if (iv.state.ccard() != card_of(m, iv.X))
            throw ShapeError("Break state cardinality mismatch for " + iv.X);
          return replace_mechanism(m, iv.X, "brk_" + iv.X, {}, iv.state, tol);
        } else if constexpr (std::is_same_v<T, Cut>) {
          return replace_mechanism(
              m, iv.X, "cut_" + iv.X, {},
              uniform_state(FinObject::single(iv.X, card_of(m, iv.X))), tol);
        } else if constexpr (std::is_same_v<T, Local>) {
          int64_t card = card_of(m, iv.X);
          if (iv.eta.dcard() != card || iv.eta.ccard() != card)
            throw ShapeError("Local eta must be an endomap of " + iv.X);
          if (!is_channel(iv.eta, tol))
            throw ValidationError("Local eta must be a channel");
          int p = producer_or_throw(m, iv.X);
          const DiagramNode& n = m.diagram.nodes[p];
          return replace_mechanism(m, iv.X, "loc_" + iv.X, n.ins,
                                   compose(m.interp.boxes.at(n.kind.box), iv.eta),
                                   tol);
        } else if constexpr (std::is_same_v<T, WideLocal>) {
          Dag g = model_graph(m).dag;
          std::vector<int> desc = descendants(g, g.index_of(iv.X));
          std::set<std::string> dnames;
          for (int v : desc) dnames.insert(g.vertices[v]);
          for (const auto& a : iv.A)
            if (dnames.count(a))
              throw ValidationError("WideLocal reads a descendant of " + iv.X +
                                    ": " + a);
          FinObject aobj = wires_object(m, iv.A);
          int64_t card = card_of(m, iv.X);
          if (iv.eta.dcard() != aobj.card() * card || iv.eta.ccard() != card)
            throw ShapeError("WideLocal eta shape mismatch for " + iv.X);
          if (!is_channel(iv.eta, tol))
            throw ValidationError("WideLocal eta must be a channel");
          int p = producer_or_throw(m, iv.X);
          const DiagramNode& n = m.diagram.nodes[p];
          std::vector<std::string> ins = iv.A;
          ins.insert(ins.end(), n.ins.begin(), n.ins.end());
          Morphism wide = compose(
              tensor(identity(aobj), m.interp.boxes.at(n.kind.box)), iv.eta);
          return replace_mechanism(m, iv.X, "wloc_" + iv.X, std::move(ins),
                                   std::move(wide), tol);
        } else if constexpr (std::is_same_v<T, Trim>) {
          int p = producer_or_throw(m, iv.X);
          const DiagramNode& n = m.diagram.nodes[p];
          const Morphism& c = m.interp.boxes.at(n.kind.box);
          std::vector<int> drop = nonsignalling_legs(c, tol);
          std::set<int> dropset(drop.begin(), drop.end());
          std::vector<std::string> kept;
          std::vector<Atom> dropped_atoms;
          for (size_t i = 0; i < n.ins.size(); ++i) {
            if (dropset.count(static_cast<int>(i)))
              dropped_atoms.push_back(c.dom.atoms[i]);
            else
              kept.push_back(n.ins[i]);
          }
          Morphism trimmed =
              drop.empty()
                  ? c
                  : plug(c, drop, uniform_state(FinObject(dropped_atoms)));
          return replace_mechanism(m, iv.X, "trim_" + iv.X, std::move(kept),
                                   std::move(trimmed), tol);
        } else if constexpr (std::is_same_v<T, Pad>) {
          int p = producer_or_throw(m, iv.X);
          const DiagramNode& n = m.diagram.nodes[p];
          const Morphism& c = m.interp.boxes.at(n.kind.box);
          FinObject sobj = wires_object(m, iv.S);
          Morphism padded =
              compose(tensor(discard(sobj), identity(c.dom)), c);
          std::vector<std::string> ins = iv.S;
          ins.insert(ins.end(), n.ins.begin(), n.ins.end());
          return replace_mechanism(m, iv.X, "pad_" + iv.X, std::move(ins),
                                   std::move(padded), tol);
        } else {
          static_assert(std::is_same_v<T, Rewire>);
          std::set<std::string> keys, vals;
          for (const auto& [x, src] : iv.phi) {
            keys.insert(x);
            vals.insert(src);
          }
          if (keys != vals)
            throw ValidationError("Rewire phi must permute the touched set");
          NetworkDiagram d = m.diagram;
          Interpretation it = m.interp;
          for (const auto& [x, src] : iv.phi) {
            auto f = iv.maps.find(x);
            if (f == iv.maps.end())
              throw IndexError("Rewire missing map for " + x);
            if (f->second.dcard() != card_of(m, src) ||
                f->second.ccard() != card_of(m, x))
              throw ShapeError("Rewire map shape mismatch for " + x);
            if (!is_channel(f->second, tol))
              throw ValidationError("Rewire map must be a channel: " + x);
            int psrc = producer_or_throw(m, src);
            int p = producer_or_throw(m, x);
            const DiagramNode& nsrc = m.diagram.nodes[psrc];
            std::string box = fresh_box(it, "rw_" + x);
            d.nodes[p] = DiagramNode{NodeKind::Mechanism(box), nsrc.ins, x};
            it.boxes[box] =
                compose(m.interp.boxes.at(nsrc.kind.box), f->second);
          }
          return make_model(std::move(d), std::move(it), tol);
        }
      },
      sigma);
}

CausalModel apply(const CausalModel& m, const std::vector<Intervention>& sigmas,
                  double tol) {
  CausalModel out = m;
  for (const auto& s : sigmas) out = apply(out, s, tol);
  return out;
}

CausalModel open_at(const CausalModel& m, const std::vector<std::string>& S) {
  NetworkDiagram d = m.diagram;
  Interpretation it = m.interp;
  for (const auto& x : S) {
    if (std::find(d.inputs.begin(), d.inputs.end(), x) != d.inputs.end())
      throw ValidationError("open_at: already an input: " + x);
    int p = d.producer_node(x);
    if (p < 0) throw ValidationError("open_at: no mechanism to remove: " + x);
    d.nodes.erase(d.nodes.begin() + p);
    d.inputs.push_back(x);
  }
  return make_model(std::move(d), std::move(it));
}

CausalModel boundary(const CausalModel& m, const std::vector<std::string>& A,
                     BoundaryDirection direction) {
  NetworkDiagram d = m.diagram;
  std::set<std::string> aset(A.begin(), A.end());
  for (const auto& a : A)
    if (!d.has_wire(a)) throw IndexError("unknown variable: " + a);
  if (direction == BoundaryDirection::internalise) {
    std::vector<std::string> kept;
    for (const auto& o : d.outputs)
      if (!aset.count(o)) kept.push_back(o);
    d.outputs = std::move(kept);
  } else {
    std::set<std::string> present(d.outputs.begin(), d.outputs.end());
    for (const auto& a : A)
      if (!present.count(a)) {
        d.outputs.push_back(a);
        present.insert(a);
      }
  }
  return make_model(std::move(d), m.interp);
}

CausalModel compose_models(const CausalModel& m, const CausalModel& n,
                           ComposeMode mode) {
  NetworkDiagram d = m.diagram;
  Interpretation it = m.interp;

  if (mode == ComposeMode::parallel) {
    for (const auto& [label, atom] : n.diagram.wires) {
      if (d.wires.count(label))
        throw ValidationError("wire name collision: " + label);
      d.wires[label] = atom;
      it.wires[label] = n.interp.wires.at(label);
    }
    for (const auto& node : n.diagram.nodes) {
      merge_box(it, node.kind.box, n.interp.boxes.at(node.kind.box));
      d.nodes.push_back(node);
    }
    d.inputs.insert(d.inputs.end(), n.diagram.inputs.begin(), n.diagram.inputs.end());
    d.outputs.insert(d.outputs.end(), n.diagram.outputs.begin(),
                     n.diagram.outputs.end());
    return make_model(std::move(d), std::move(it));
  }

  if (m.diagram.outputs.size() != n.diagram.inputs.size())
    throw ShapeError("sequential composition: boundary arity mismatch");
  std::map<std::string, std::string> ren;
  for (size_t i = 0; i < n.diagram.inputs.size(); ++i) {
    const std::string& from = n.diagram.inputs[i];
    const std::string& to = m.diagram.outputs[i];
    if (n.interp.wires.at(from).card != m.interp.wires.at(to).card)
      throw ShapeError("sequential composition: cardinality mismatch at " + to);
    ren[from] = to;
  }
  auto renamed = [&](const std::string& w) {
    auto f = ren.find(w);
    return f == ren.end() ? w : f->second;
  };
  for (const auto& [label, atom] : n.diagram.wires) {
    if (ren.count(label)) continue;  // identified with an M output
    if (d.wires.count(label))
      throw ValidationError("wire name collision: " + label);
    d.wires[label] = atom;
    it.wires[label] = n.interp.wires.at(label);
  }
  for (const auto& node : n.diagram.nodes) {
    merge_box(it, node.kind.box, n.interp.boxes.at(node.kind.box));
    DiagramNode moved = node;
    for (auto& in : moved.ins) in = renamed(in);
    if (moved.out) moved.out = renamed(*moved.out);
    d.nodes.push_back(std::move(moved));
  }
  d.outputs.clear();
  for (const auto& o : n.diagram.outputs) d.outputs.push_back(renamed(o));
  return make_model(std::move(d), std::move(it));
}

CausalModel share_inputs(const std::vector<CausalModel>& models) {
  if (models.empty()) throw ValidationError("share_inputs: no models");
  if (models.size() == 1) return models[0];
  const std::vector<std::string>& shared = models[0].diagram.inputs;
  for (const auto& mm : models) {
    if (mm.diagram.inputs != shared)
      throw ValidationError("share_inputs: input lists differ");
    for (const auto& i : shared)
      if (mm.interp.wires.at(i).card != models[0].interp.wires.at(i).card)
        throw ShapeError("share_inputs: input cardinality differs at " + i);
  }

  NetworkDiagram d;
  Interpretation it;
  for (const auto& i : shared) {
    d.wires[i] = models[0].diagram.wires.at(i);
    it.wires[i] = models[0].interp.wires.at(i);
  }
  d.inputs = shared;
  std::set<std::string> input_set(shared.begin(), shared.end());

  for (size_t j = 0; j < models.size(); ++j) {
    const CausalModel& mj = models[j];
    std::string tag = "#" + std::to_string(j + 1);
    auto renamed = [&](const std::string& w) {
      return input_set.count(w) ? w : w + tag;
    };
    for (const auto& [label, atom] : mj.diagram.wires) {
      if (input_set.count(label)) continue;
      Atom moved = atom;
      moved.name = label + tag;
      d.wires[label + tag] = moved;
      Atom sem = mj.interp.wires.at(label);
      sem.name = label + tag;
      it.wires[label + tag] = sem;
    }
    // Boxes keep their names when the interpretations agree; otherwise the
    // world tag disambiguates.
    std::map<std::string, std::string> localname;
    for (const auto& node : mj.diagram.nodes) {
      const std::string& b = node.kind.box;
      if (!localname.count(b)) {
        const Morphism& mech = mj.interp.boxes.at(b);
        std::string cand = b;
        if (it.boxes.count(cand) && !same_entries(it.boxes.at(cand), mech))
          cand = b + tag;
        while (it.boxes.count(cand) && !same_entries(it.boxes.at(cand), mech))
          cand += "~";
        if (!it.boxes.count(cand)) it.boxes.emplace(cand, mech);
        localname[b] = cand;
      }
      DiagramNode moved = node;
      moved.kind.box = localname[b];
      for (auto& in : moved.ins) in = renamed(in);
      if (moved.out) moved.out = renamed(*moved.out);
      d.nodes.push_back(std::move(moved));
    }
    for (const auto& o : mj.diagram.outputs) {
      if (!input_set.count(o)) {
        d.outputs.push_back(o + tag);
        continue;
      }
      // Pass-through of a shared input: give this world its own copy.
      std::string w = o + tag;
      if (!d.has_wire(w)) {
        d.wires[w] = Atom{w, 1};
        Atom sem = it.wires.at(o);
        sem.name = w;
        it.wires[w] = sem;
      }
      std::string box = fresh_box(it, "id_" + w);
      it.boxes[box] = identity(FinObject::single(o, it.wires.at(o).card));
      d.nodes.push_back(DiagramNode{NodeKind::Mechanism(box), {o}, w});
      d.outputs.push_back(w);
    }
  }
  return make_model(std::move(d), std::move(it));
}

}  // namespace causal
