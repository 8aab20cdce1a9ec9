#include "causal/counterfactual.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace causal {

namespace {

std::string world_tag(size_t j, size_t k) {
  return k > 1 ? "#" + std::to_string(j + 1) : std::string();
}

std::vector<std::string> sorted_copy(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::string join_names(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

// Introspection of a strict open model: producers of each wire and a
// parents-first order over the produced wires.
struct OpenPart {
  std::vector<std::string> order;
  std::map<std::string, int> producer;
  std::set<std::string> exo;
};

OpenPart open_part(const CausalModel& F) {
  OpenPart op;
  op.exo.insert(F.diagram.inputs.begin(), F.diagram.inputs.end());
  for (size_t i = 0; i < F.diagram.nodes.size(); ++i) {
    const DiagramNode& n = F.diagram.nodes[i];
    if (n.kind.tag != NodeTag::mechanism)
      throw ValidationError("the deterministic part must be a strict mechanism diagram");
    if (!n.out) throw ValidationError("mechanism node without an output wire");
    op.producer[*n.out] = static_cast<int>(i);
  }
  OpenDag od = open_dag_from_diagram(F.diagram);
  for (int v : topological_order(od.dag)) {
    const std::string& name = od.dag.vertices[v];
    if (op.producer.count(name)) op.order.push_back(name);
  }
  return op;
}

int64_t wire_card(const CausalModel& F, const std::string& w) {
  auto it = F.interp.wires.find(w);
  if (it == F.interp.wires.end()) throw IndexError("no interpreted wire " + w);
  return it->second.card;
}

void check_terms(const CausalModel& F, const OpenPart& op, const CounterfactualTerms& terms) {
  if (terms.empty()) throw ValidationError("a counterfactual needs at least one world");
  for (const auto& t : terms) {
    for (const auto& [x, v] : t.s) {
      if (!op.producer.count(x)) throw IndexError("cannot intervene on unknown variable " + x);
      if (v < 0 || v >= wire_card(F, x)) throw IndexError("do value out of range for " + x);
    }
    for (const auto& [x, v] : t.c) {
      if (!op.producer.count(x)) throw IndexError("cannot condition on unknown variable " + x);
      if (v < 0 || v >= wire_card(F, x)) throw IndexError("evidence value out of range for " + x);
    }
    std::set<std::string> seen;
    for (const auto& x : t.E) {
      if (!op.producer.count(x)) throw IndexError("cannot expose unknown variable " + x);
      if (!seen.insert(x).second) throw ValidationError("output listed twice: " + x);
      if (t.c.count(x)) throw ValidationError("variable both conditioned and exposed: " + x);
    }
  }
}

const Morphism& noise_for(const NoiseStates& L, const std::string& u) {
  auto it = L.find(u);
  if (it == L.end()) throw IndexError("no noise state supplied for input wire " + u);
  return it->second;
}

void check_noise(const CausalModel& F, const NoiseStates& L) {
  for (const auto& u : F.diagram.inputs) {
    const Morphism& lam = noise_for(L, u);
    if (!lam.dom.is_unit() || lam.cod.natoms() != 1)
      throw ShapeError("noise for " + u + " must be a single-wire state");
    if (lam.cod.atoms[0].card != wire_card(F, u))
      throw ShapeError("noise cardinality mismatch on " + u);
    if (!classify(lam).is_normalised_state)
      throw ValidationError("noise state on " + u + " must be normalised");
  }
}

std::string lam_box_name(const std::string& u, const std::map<std::string, Morphism>& taken) {
  std::string base = u.rfind("U_", 0) == 0 ? "lam_" + u.substr(2) : "lam_" + u;
  while (taken.count(base)) base += "~";
  return base;
}

struct CfBuild {
  NetworkDiagram d;
  Interpretation interp;
};

// The extended diagram of a counterfactual: one copy of the open model per
// world (do-values become sharp states, truncating the mechanism), a single
// shared noise state per exogenous wire, sharp effects for the evidence and
// explicit discards for everything a world neither conditions nor exposes.
CfBuild build_cf_diagram(const CausalModel& F, const NoiseStates& L,
                         const CounterfactualTerms& terms) {
  OpenPart op = open_part(F);
  check_terms(F, op, terms);
  check_noise(F, L);
  size_t k = terms.size();

  CfBuild b;
  b.interp.boxes = F.interp.boxes;
  for (const auto& u : F.diagram.inputs) {
    std::string box = lam_box_name(u, b.interp.boxes);
    b.interp.boxes.emplace(box, L.at(u));
    b.d.wires[u] = F.interp.wires.at(u);
    b.interp.wires[u] = F.interp.wires.at(u);
    b.d.nodes.push_back({NodeKind::GenericState(box), {}, u});
  }

  for (size_t j = 0; j < k; ++j) {
    const WorldTerm& t = terms[j];
    const std::string tag = world_tag(j, k);
    for (const auto& x : op.order) {
      std::string wx = x + tag;
      if (b.d.wires.count(wx)) throw ValidationError("wire label clash: " + wx);
      b.d.wires[wx] = F.interp.wires.at(x);
      b.interp.wires[wx] = F.interp.wires.at(x);
      auto sv = t.s.find(x);
      if (sv != t.s.end()) {
        b.d.nodes.push_back({NodeKind::SharpState({sv->second}), {}, wx});
        continue;
      }
      const DiagramNode& src = F.diagram.nodes[op.producer.at(x)];
      std::vector<std::string> ins;
      for (const auto& w : src.ins) ins.push_back(op.exo.count(w) ? w : w + tag);
      b.d.nodes.push_back({NodeKind::Mechanism(src.kind.box), std::move(ins), wx});
    }
    for (const auto& [x, v] : t.c)
      b.d.nodes.push_back({NodeKind::SharpEffect({v}), {x + tag}, std::nullopt});
    std::vector<std::string> es = sorted_copy(t.E);
    for (const auto& x : es) b.d.outputs.push_back(x + tag);
    for (const auto& x : op.order)
      if (!t.c.count(x) && !std::count(es.begin(), es.end(), x))
        b.d.nodes.push_back({NodeKind::Discard(), {x + tag}, std::nullopt});
  }

  ValidationReport rep = validate(b.d, false);
  if (!rep.ok) throw ValidationError("counterfactual diagram: " + rep.violation);
  return b;
}

// Closes the exogenous inputs of an open model with the given noise states.
CausalModel close_with_noise(const CausalModel& m, const NoiseStates& L, double tol) {
  NetworkDiagram nd;
  Interpretation ni;
  for (const auto& u : m.diagram.inputs) {
    const Morphism& lam = noise_for(L, u);
    std::string box = lam_box_name(u, ni.boxes);
    ni.boxes.emplace(box, lam);
    nd.wires[u] = m.interp.wires.at(u);
    ni.wires[u] = m.interp.wires.at(u);
    nd.nodes.push_back({NodeKind::Mechanism(box), {}, u});
    nd.outputs.push_back(u);
  }
  CausalModel noise = make_model(std::move(nd), std::move(ni), tol);
  return compose_models(noise, m, ComposeMode::sequential);
}

}  // namespace

bool valid_counterfactual_terms(const CounterfactualTerms& terms) {
  for (size_t j = 0; j < terms.size(); ++j)
    for (size_t j2 = 0; j2 < terms.size(); ++j2)
      if (j != j2 && !terms[j].c.empty() && !terms[j2].E.empty()) return true;
  return false;
}

FcmParts split_fcm(const Fcm& f) {
  FcmParts p{open_at(f.base, f.exogenous), {}};
  for (const auto& v : f.endogenous) p.L.emplace(fcm_noise_wire(f, v), fcm_noise(f, v));
  return p;
}

CausalModel parallel_worlds(const CausalModel& F, const NoiseStates& L,
                            const std::vector<std::vector<Intervention>>& sigmas,
                            double tol) {
  if (sigmas.empty()) throw ValidationError("a counterfactual needs at least one world");
  open_part(F);
  check_noise(F, L);
  std::vector<CausalModel> worlds;
  for (const auto& sj : sigmas) {
    CausalModel mj = apply(F, sj, tol);
    for (const auto& n : mj.diagram.nodes) {
      if (n.kind.tag != NodeTag::mechanism) continue;
      if (!is_deterministic(mj.interp.boxes.at(n.kind.box), tol))
        throw ValidationError("intervention leaves a non-deterministic mechanism at " +
                              (n.out ? *n.out : n.kind.box));
    }
    worlds.push_back(std::move(mj));
  }
  CausalModel shared = share_inputs(worlds);
  return close_with_noise(shared, L, tol);
}

CounterfactualState counterfactual_state(const CausalModel& F, const NoiseStates& L,
                                         const CounterfactualTerms& terms) {
  if (!valid_counterfactual_terms(terms))
    throw ValidationError(
        "terms must condition in one world and expose outputs in another");
  CfBuild b = build_cf_diagram(F, L, terms);
  Morphism un = evaluate(b.d, b.interp);
  CounterfactualState out;
  out.unnormalised = un;
  out.normalised = normalize(un);
  out.diagram = std::move(b.d);
  out.interp = std::move(b.interp);
  return out;
}

Morphism evaluate_counterfactual(const CausalModel& F, const NoiseStates& L,
                                 const CounterfactualTerms& terms) {
  OpenPart op = open_part(F);
  check_terms(F, op, terms);
  check_noise(F, L);
  size_t k = terms.size();
  size_t nv = op.order.size();

  std::map<std::string, int> uidx, vidx;
  const std::vector<std::string>& us = F.diagram.inputs;
  for (size_t i = 0; i < us.size(); ++i) uidx[us[i]] = static_cast<int>(i);
  for (size_t i = 0; i < nv; ++i) vidx[op.order[i]] = static_cast<int>(i);

  // src >= 0 indexes an endogenous value, src < 0 the noise tuple (-1 - u).
  struct Mech {
    std::vector<int> src;
    std::vector<int64_t> scard;
    std::vector<int64_t> table;
  };
  std::vector<Mech> mechs(nv);
  for (size_t i = 0; i < nv; ++i) {
    const DiagramNode& n = F.diagram.nodes[op.producer.at(op.order[i])];
    const Morphism& m = F.interp.boxes.at(n.kind.box);
    if (!is_deterministic(m, 1e-7))
      throw ValidationError("mechanism of " + op.order[i] + " must be deterministic");
    Mech& me = mechs[i];
    for (const auto& w : n.ins)
      me.src.push_back(op.exo.count(w) ? -1 - uidx.at(w) : vidx.at(w));
    for (const auto& a : m.dom.atoms) me.scard.push_back(a.card);
    int64_t cols = m.dom.card(), cc = m.cod.card();
    me.table.resize(cols);
    for (int64_t x = 0; x < cols; ++x) {
      int64_t best = 0;
      for (int64_t y = 1; y < cc; ++y)
        if (m.a[x * cc + y] > m.a[x * cc + best]) best = y;
      me.table[x] = best;
    }
  }

  double total = 1;
  std::vector<int64_t> ucards;
  std::vector<std::vector<double>> weights;
  for (const auto& u : us) {
    const Morphism& lam = L.at(u);
    int64_t c = lam.cod.card();
    ucards.push_back(c);
    weights.emplace_back(lam.a.begin(), lam.a.end());
    total *= static_cast<double>(c);
    if (total > 1e7)
      throw BudgetError("counterfactual enumeration exceeds 10^7 joint noise states");
  }

  // Per-world plumbing: forced values, evidence checks, exposed variables.
  struct World {
    std::vector<std::optional<int64_t>> forced;
    std::vector<std::pair<int, int64_t>> conds;
    std::vector<int> outs;
  };
  std::vector<World> ws(k);
  FinObject cod = FinObject::unit();
  for (size_t j = 0; j < k; ++j) {
    ws[j].forced.assign(nv, std::nullopt);
    for (const auto& [x, v] : terms[j].s) ws[j].forced[vidx.at(x)] = v;
    for (const auto& [x, v] : terms[j].c) ws[j].conds.push_back({vidx.at(x), v});
    for (const auto& x : sorted_copy(terms[j].E)) {
      ws[j].outs.push_back(vidx.at(x));
      cod = tensor(cod, FinObject::single(x + world_tag(j, k), wire_card(F, x)));
    }
  }

  Morphism acc(FinObject::unit(), cod);
  std::vector<int64_t> uval(us.size(), 0);
  std::vector<int64_t> val(nv, 0);
  for (;;) {
    double p = 1;
    for (size_t i = 0; i < us.size(); ++i) p *= weights[i][uval[i]];
    if (p > 0) {
      bool ok = true;
      int64_t oidx = 0;
      for (size_t j = 0; j < k && ok; ++j) {
        const World& wd = ws[j];
        for (size_t i = 0; i < nv; ++i) {
          if (wd.forced[i]) {
            val[i] = *wd.forced[i];
            continue;
          }
          const Mech& me = mechs[i];
          int64_t idx = 0;
          for (size_t t = 0; t < me.src.size(); ++t) {
            int s = me.src[t];
            idx = idx * me.scard[t] + (s < 0 ? uval[-1 - s] : val[s]);
          }
          val[i] = me.table[idx];
        }
        for (const auto& [vi, v] : wd.conds)
          if (val[vi] != v) {
            ok = false;
            break;
          }
        if (!ok) break;
        for (int vi : wd.outs) oidx = oidx * wire_card(F, op.order[vi]) + val[vi];
      }
      if (ok) acc.a[oidx] += p;
    }
    size_t d = us.size();
    while (d > 0 && ++uval[d - 1] == ucards[d - 1]) uval[--d] = 0;
    if (d == 0) break;
  }
  return normalize(acc);
}

namespace {

// "f_X" or "c_X" for a roster variable X.
std::optional<std::string> mech_var(const std::string& box, const std::set<std::string>& vars) {
  for (const char* prefix : {"f_", "c_"}) {
    std::string p = prefix;
    if (box.rfind(p, 0) == 0 && vars.count(box.substr(p.size()))) return box.substr(p.size());
  }
  return std::nullopt;
}

}  // namespace

NetworkDiagram simplify_cf(const NetworkDiagram& D, const std::vector<std::string>& V,
                           const std::vector<std::string>& pi,
                           Interpretation* interp) {
  std::set<std::string> vset(V.begin(), V.end());
  if (vset.size() != V.size()) throw ValidationError("variable roster has duplicates");
  if (sorted_copy(pi) != sorted_copy(V))
    throw ValidationError("pi must be a permutation of the variable roster");
  std::map<std::string, int> rank;
  for (size_t i = 0; i < pi.size(); ++i) rank[pi[i]] = static_cast<int>(i);
  for (const auto& n : D.nodes) {
    if (n.kind.tag != NodeTag::mechanism) continue;
    auto va = mech_var(n.kind.box, vset);
    if (!va) continue;
    for (const auto& w : n.ins) {
      int p = D.producer_node(w);
      if (p < 0) continue;
      auto vb = mech_var(D.nodes[p].kind.box, vset);
      if (vb && rank.at(*vb) >= rank.at(*va))
        throw ValidationError("pi is not topological: " + *vb + " feeds " + *va);
    }
  }

  // Pass 1: discards fall through until nothing is implicitly or explicitly
  // discarded any more.
  NetworkDiagram cur =
      rewrite_fixpoint(D, {RewriteRule::drop_discarded_copy_leg,
                           RewriteRule::discard_fallthrough})
          .diagram;

  // Pass 2: every sharp effect sitting on a fanned-out wire becomes a scalar
  // gate plus a sharp state.
  cur = rewrite_fixpoint(cur, {RewriteRule::sharp_effect_split}).diagram;

  // Pass 3: one sweep along pi. For each variable, first merge duplicate
  // mechanism copies whose inputs coincide (value-equal sharp states count as
  // the same input), then split effects off the merged output.
  for (const auto& Lvar : pi) {
    const std::string fbox = "f_" + Lvar;
    if (interp) {
      int uses = 0;
      for (const auto& n : cur.nodes)
        if (n.kind.tag == NodeTag::mechanism && n.kind.box == fbox) ++uses;
      if (uses > 1) {
        auto it = interp->boxes.find(fbox);
        if (it != interp->boxes.end() && !is_deterministic(it->second, 1e-7))
          throw ValidationError("cannot merge copies of non-deterministic box " + fbox);
      }
    }

    bool changed = true;
    while (changed) {
      changed = false;
      // Point equal-valued sharp feeds of this box at one representative.
      std::map<std::tuple<std::string, int64_t, int64_t>, std::string> canon;
      for (auto& nd : cur.nodes) {
        if (nd.kind.tag != NodeTag::mechanism || nd.kind.box != fbox) continue;
        for (auto& w : nd.ins) {
          int p = cur.producer_node(w);
          if (p < 0 || cur.nodes[p].kind.tag != NodeTag::sharp_state) continue;
          const Atom& at = cur.wires.at(w);
          auto key = std::make_tuple(at.name, at.card, cur.nodes[p].kind.value.at(0));
          auto [it, fresh] = canon.emplace(key, w);
          if (!fresh && it->second != w) {
            w = it->second;
            changed = true;
          }
        }
      }
      // Representatives may leave duplicates orphaned; collect them.
      bool gc = true;
      while (gc) {
        gc = false;
        for (size_t i = 0; i < cur.nodes.size(); ++i) {
          if (cur.nodes[i].kind.tag != NodeTag::sharp_state) continue;
          if (cur.consumption_count(*cur.nodes[i].out) != 0) continue;
          RewriteSite s;
          s.node = static_cast<int>(i);
          RewriteResult res = apply_rewrite(cur, RewriteRule::discard_fallthrough, s);
          if (res.applied) {
            cur = std::move(res.diagram);
            gc = true;
            changed = true;
            break;
          }
        }
      }
      // Merge any two copies that now share all inputs.
      bool merged = false;
      for (size_t i = 0; i < cur.nodes.size() && !merged; ++i) {
        if (cur.nodes[i].kind.tag != NodeTag::mechanism || cur.nodes[i].kind.box != fbox)
          continue;
        for (size_t j = i + 1; j < cur.nodes.size() && !merged; ++j) {
          if (cur.nodes[j].kind.tag != NodeTag::mechanism || cur.nodes[j].kind.box != fbox)
            continue;
          RewriteSite s;
          s.node = static_cast<int>(i);
          s.node2 = static_cast<int>(j);
          RewriteResult res = apply_rewrite(cur, RewriteRule::copy_through_deterministic, s);
          if (res.applied) {
            cur = std::move(res.diagram);
            merged = true;
            changed = true;
          }
        }
      }
    }

    bool split = true;
    while (split) {
      split = false;
      for (size_t i = 0; i < cur.nodes.size(); ++i) {
        const DiagramNode& e = cur.nodes[i];
        if (e.kind.tag != NodeTag::sharp_effect || e.ins.size() != 1) continue;
        int p = cur.producer_node(e.ins[0]);
        if (p < 0 || cur.nodes[p].kind.tag != NodeTag::mechanism ||
            cur.nodes[p].kind.box != fbox)
          continue;
        RewriteSite s;
        s.node = static_cast<int>(i);
        RewriteResult res = apply_rewrite(cur, RewriteRule::sharp_effect_split, s);
        if (res.applied) {
          cur = std::move(res.diagram);
          split = true;
          break;
        }
      }
    }
  }

  // Pass 4: absorb each noise state that directly and exclusively feeds one
  // mechanism, renaming the closed box f_X -> c_X.
  bool more = true;
  while (more) {
    more = false;
    for (size_t si = 0; si < cur.nodes.size() && !more; ++si) {
      const DiagramNode& s = cur.nodes[si];
      if (s.kind.tag != NodeTag::generic_state || !s.out) continue;
      if (cur.consumption_count(*s.out) != 1) continue;
      int mi = -1;
      for (size_t i = 0; i < cur.nodes.size() && mi < 0; ++i)
        for (const auto& w : cur.nodes[i].ins)
          if (w == *s.out) {
            mi = static_cast<int>(i);
            break;
          }
      if (mi < 0) continue;  // the single use is an output, not a node
      const DiagramNode& m = cur.nodes[mi];
      if (m.kind.tag != NodeTag::mechanism) continue;
      if (m.kind.box.rfind("f_", 0) != 0 || !vset.count(m.kind.box.substr(2))) continue;
      std::string var = m.kind.box.substr(2);
      RewriteSite site;
      site.node = mi;
      site.node2 = static_cast<int>(si);
      RewriteResult res = apply_rewrite(cur, RewriteRule::absorb_noise_into_channel, site);
      if (!res.applied) continue;
      cur = std::move(res.diagram);
      std::string cname = "c_" + var;
      bool taken = false;
      for (const auto& n : cur.nodes)
        if (n.kind.tag == NodeTag::mechanism && n.kind.box == cname) taken = true;
      std::string final_name = taken ? res.new_box : cname;
      for (auto& n : cur.nodes)
        if (n.kind.tag == NodeTag::mechanism && n.kind.box == res.new_box)
          n.kind.box = final_name;
      if (interp)
        interp->boxes[final_name] = plug(interp->boxes.at(res.old_box),
                                         {res.absorbed_position},
                                         interp->boxes.at(res.absorbed_box));
      more = true;
    }
  }
  // Effect splitting mints fresh wires; keep the interpretation covering.
  if (interp)
    for (const auto& [w, a] : cur.wires)
      if (!interp->wires.count(w)) interp->wires[w] = a;
  return cur;
}

namespace {

struct Dsu {
  std::vector<int> p;
  explicit Dsu(int n) : p(n) {
    for (int i = 0; i < n; ++i) p[i] = i;
  }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void join(int a, int b) { p[find(a)] = find(b); }
};

// The variable a wire carries, read off its syntactic atom.
const std::string& wire_var(const NetworkDiagram& D, const std::string& w) {
  return D.wires.at(w).name;
}

// Fills the typed boundary lists of one fragment, or records why the values
// seen there disagree.
void classify_fragment(const NetworkDiagram& D, const std::set<std::string>& oset,
                       const std::set<std::string>& rset,
                       const std::map<int, std::string>& var_of, RFragment& f) {
  std::set<int> nl(f.nodes.begin(), f.nodes.end());
  std::set<std::string> outset(D.outputs.begin(), D.outputs.end());
  std::string where = "fragment over {" + join_names(f.s_o) + "}";
  auto conflict = [&](const std::string& why) {
    f.do_inputs.clear();
    f.open_inputs.clear();
    f.effect_outputs.clear();
    f.open_outputs.clear();
    f.conflict = where + ": " + why;
  };

  std::map<std::string, int> inside;  // observable var -> member node
  for (int i : f.nodes) {
    const std::string& v = var_of.at(i);
    if (!oset.count(v)) continue;
    if (inside.count(v))
      return conflict("two unmerged copies of the mechanism of " + v);
    inside[v] = i;
  }

  // Wires consumed by fragment members, grouped by the variable they carry.
  std::map<std::string, std::set<std::string>> consumed;
  for (int i : f.nodes)
    for (const auto& w : D.nodes[i].ins) {
      const std::string& v = wire_var(D, w);
      if (oset.count(v)) {
        consumed[v].insert(w);
      } else if (rset.count(v)) {
        int p = D.producer_node(w);
        if (p < 0 || !nl.count(p))
          return conflict("root input " + w + " is not produced inside the fragment");
      }
    }

  // Root outputs must stay internal: observable mechanisms of this fragment.
  for (int i : f.nodes) {
    const std::string& v = var_of.at(i);
    if (!rset.count(v)) continue;
    const std::string& w = *D.nodes[i].out;
    if (outset.count(w)) return conflict("root wire " + w + " reaches the boundary");
    for (size_t j = 0; j < D.nodes.size(); ++j)
      for (const auto& in : D.nodes[j].ins)
        if (in == w && !nl.count(static_cast<int>(j)))
          return conflict("root wire " + w + " leaves the fragment");
  }

  std::set<std::string> typed;
  for (const auto& [v, i] : inside) typed.insert(v);
  for (const auto& [v, ws] : consumed) typed.insert(v);

  for (const auto& X : typed) {
    auto ii = inside.find(X);
    if (ii != inside.end()) {
      const std::string& wout = *D.nodes[ii->second].out;
      std::optional<int64_t> cval;
      bool fanned = false;
      bool external = false;
      for (size_t j = 0; j < D.nodes.size(); ++j) {
        const DiagramNode& n = D.nodes[j];
        for (const auto& in : n.ins)
          if (in == wout) {
            if (n.kind.tag == NodeTag::sharp_effect) {
              if (cval) return conflict("two effects condition " + wout);
              cval = n.kind.value.at(0);
            } else if (!nl.count(static_cast<int>(j))) {
              external = true;
            } else {
              fanned = true;  // internal mechanism use
            }
          }
      }
      std::set<std::string> others = consumed.count(X) ? consumed.at(X) : std::set<std::string>{};
      others.erase(wout);
      if (cval) {
        if (external || fanned || outset.count(wout))
          return conflict("conditioned output " + wout + " still fans out");
        for (const auto& w : others) {
          int p = D.producer_node(w);
          if (p < 0 || D.nodes[p].kind.tag != NodeTag::sharp_state ||
              D.nodes[p].kind.value.at(0) != *cval)
            return conflict(X + " is conditioned to one value but fed another");
        }
        f.effect_outputs.push_back({wout, X, *cval});
      } else {
        if (!others.empty())
          return conflict(X + " is produced inside yet also fed from elsewhere");
        if (external || outset.count(wout)) f.open_outputs.push_back({wout, X, 0});
      }
    } else {
      std::set<int64_t> vals;
      std::set<std::string> mech_wires;
      for (const auto& w : consumed.at(X)) {
        int p = D.producer_node(w);
        if (p < 0) return conflict(X + " is fed from the open boundary");
        const DiagramNode& pr = D.nodes[p];
        if (pr.kind.tag == NodeTag::sharp_state)
          vals.insert(pr.kind.value.at(0));
        else if (pr.kind.tag == NodeTag::mechanism)
          mech_wires.insert(w);
        else
          return conflict(X + " is fed by an unexpected producer");
      }
      if (!vals.empty() && !mech_wires.empty())
        return conflict(X + " is both forced to a value and mechanism-fed");
      if (!vals.empty()) {
        if (vals.size() > 1) return conflict(X + " is forced to two different values");
        std::string rep;
        for (const auto& w : consumed.at(X)) {
          int p = D.producer_node(w);
          if (D.nodes[p].kind.tag == NodeTag::sharp_state) {
            rep = w;
            break;
          }
        }
        f.do_inputs.push_back({rep, X, *vals.begin()});
      } else {
        if (mech_wires.size() > 1)
          return conflict(X + " is fed from two distinct mechanism outputs");
        f.open_inputs.push_back({*mech_wires.begin(), X, 0});
      }
    }
  }
}

}  // namespace

std::vector<RFragment> r_fragments(const NetworkDiagram& D, const Admg& A,
                                   const std::vector<std::string>& R,
                                   RootifyMethod method) {
  Dag rd = rootify(A, method);
  if (sorted_copy(R) != sorted_copy(rootify_roots(A, method)))
    throw ValidationError("root roster does not match the rootification");
  std::set<std::string> oset(A.vertices.begin(), A.vertices.end());
  std::set<std::string> rset(R.begin(), R.end());

  std::map<int, std::string> var_of;
  for (size_t i = 0; i < D.nodes.size(); ++i) {
    const DiagramNode& n = D.nodes[i];
    if (n.kind.tag != NodeTag::mechanism) continue;
    if (n.kind.box.rfind("c_", 0) != 0)
      throw ValidationError("fragment scan expects absorbed mechanisms, found " + n.kind.box);
    std::string v = n.kind.box.substr(2);
    if (!oset.count(v) && !rset.count(v))
      throw ValidationError("mechanism " + n.kind.box + " is not over the given graph");
    if (!n.out) throw ValidationError("mechanism without output: " + n.kind.box);
    if (wire_var(D, *n.out) != v)
      throw ValidationError("mechanism " + n.kind.box + " produces a wire typed " +
                            wire_var(D, *n.out));
    var_of[static_cast<int>(i)] = std::move(v);
  }

  // Parent lookup against the rootified graph.
  auto parents_of = [&](const std::string& v) {
    std::set<std::string> ps;
    for (int p : rd.parents(rd.require(v))) ps.insert(rd.vertices[p]);
    return ps;
  };

  Dsu dsu(static_cast<int>(D.nodes.size()));
  for (const auto& [i, v] : var_of) {
    if (!rset.count(v)) continue;
    const std::string& w = *D.nodes[i].out;
    for (const auto& [j, vj] : var_of) {
      if (!std::count(D.nodes[j].ins.begin(), D.nodes[j].ins.end(), w)) continue;
      if (!parents_of(vj).count(v))
        throw ValidationError("root " + v + " feeds " + vj + ", which is not its child");
      dsu.join(i, j);
    }
  }

  std::map<int, RFragment> by_root;
  for (const auto& [i, v] : var_of) {
    RFragment& f = by_root[dsu.find(i)];
    f.nodes.push_back(i);
    (rset.count(v) ? f.s_r : f.s_o).push_back(v);
  }
  std::vector<RFragment> out;
  for (auto& [root, f] : by_root) {
    std::sort(f.nodes.begin(), f.nodes.end());
    f.s_o = sorted_copy(f.s_o);
    f.s_o.erase(std::unique(f.s_o.begin(), f.s_o.end()), f.s_o.end());
    f.s_r = sorted_copy(f.s_r);
    f.s_r.erase(std::unique(f.s_r.begin(), f.s_r.end()), f.s_r.end());
    classify_fragment(D, oset, rset, var_of, f);
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(),
            [](const RFragment& a, const RFragment& b) { return a.nodes[0] < b.nodes[0]; });
  return out;
}

namespace {

IdCfResult fail_res(CfFailReason r, const std::string& msg) {
  IdCfResult x;
  x.fail = r;
  x.detail = "not identified by implemented criteria: " + msg;
  return x;
}

}  // namespace

IdCfResult id_cf(const Admg& A, const CounterfactualTerms& terms, const PStarTables& data,
                 RootifyMethod method) {
  if (terms.empty()) throw ValidationError("a counterfactual needs at least one world");
  std::set<std::string> overt(A.vertices.begin(), A.vertices.end());
  auto check_var = [&](const std::string& x, int64_t v, bool valued) {
    if (!overt.count(x)) throw IndexError("unknown variable " + x);
    if (valued && (v < 0 || v >= roster_card(data, x)))
      throw IndexError("value out of range for " + x);
  };
  for (const auto& t : terms) {
    for (const auto& [x, v] : t.s) check_var(x, v, true);
    for (const auto& [x, v] : t.c) check_var(x, v, true);
    for (const auto& x : t.E) check_var(x, 0, false);
  }

  // A functional model over the rootified graph whose observational joint
  // matches the data; which one is irrelevant, identification is structural.
  Dag rd = rootify(A, method);
  std::vector<std::string> roots = rootify_roots(A, method);
  std::set<std::string> rset(roots.begin(), roots.end());
  NetworkDiagram bd = diagram_from_dag(rd, {}, sorted_copy(A.vertices));
  Interpretation bi;
  for (const auto& v : rd.vertices)
    bi.wires[v] = rset.count(v) ? Atom{v, 2} : Atom{v, roster_card(data, v)};
  const Morphism& joint = table_for(data, {});
  for (const auto& v : rd.vertices) {
    if (rset.count(v)) {
      bi.boxes["c_" + v] = uniform_state(FinObject::single(v, 2));
      continue;
    }
    std::vector<std::string> opar, rpar;
    for (int p : rd.parents(rd.require(v))) {
      const std::string& name = rd.vertices[p];
      (rset.count(name) ? rpar : opar).push_back(name);
    }
    Morphism cond(FinObject::unit(), FinObject::unit());
    if (opar.empty()) {
      cond = normalize(marginalize(joint, {v}));
    } else {
      std::vector<std::string> keep = opar;
      keep.push_back(v);
      cond = conditional(marginalize(joint, keep), opar);
    }
    int64_t cols = cond.dom.card(), cv = cond.cod.card();
    for (int64_t x = 0; x < cols; ++x) {
      double sum = 0;
      for (int64_t y = 0; y < cv; ++y) sum += cond.a[x * cv + y];
      if (sum < 0.5)
        for (int64_t y = 0; y < cv; ++y) cond.a[x * cv + y] = 1.0 / static_cast<double>(cv);
    }
    if (!rpar.empty()) {
      FinObject dom = cond.dom;
      int64_t rprod = 1;
      for (const auto& r : rpar) {
        dom = tensor(dom, FinObject::single(r, 2));
        rprod *= 2;
      }
      Morphism ext(dom, cond.cod);
      for (int64_t x = 0; x < cols; ++x)
        for (int64_t r = 0; r < rprod; ++r)
          for (int64_t y = 0; y < cv; ++y)
            ext.a[(x * rprod + r) * cv + y] = cond.a[x * cv + y];
      cond = std::move(ext);
    }
    bi.boxes["c_" + v] = std::move(cond);
  }
  CausalModel base = make_model(std::move(bd), std::move(bi));
  Fcm fcm = fcm_from_model(base);
  FcmParts parts = split_fcm(fcm);

  CfBuild cf = build_cf_diagram(parts.F, parts.L, terms);
  std::vector<std::string> pi;
  for (int v : topological_order(rd)) pi.push_back(rd.vertices[v]);
  Interpretation interp = cf.interp;
  NetworkDiagram D2 = simplify_cf(cf.d, fcm.endogenous, pi, &interp);

  std::vector<std::string> leftover;
  for (const auto& n : D2.nodes)
    if (n.kind.tag == NodeTag::generic_state) leftover.push_back(n.kind.box);
  if (!leftover.empty())
    return fail_res(CfFailReason::unabsorbed_noise,
                    "shared noise survives simplification: " + join_names(leftover));

  std::vector<RFragment> frags = r_fragments(D2, A, roots, method);
  for (const auto& f : frags)
    if (f.conflict) return fail_res(CfFailReason::fragment_value_conflict, *f.conflict);

  // Assemble the estimator: one data table per fragment, sharp states for
  // forced inputs, sharp effects for conditioned outputs, wires renamed to
  // the diagram's labels so fragments can feed each other.
  ExprAssembler ab;
  std::set<std::string> outset(D2.outputs.begin(), D2.outputs.end());

  std::map<std::string, std::string> leaf_alias;  // state wire -> leg name
  for (const auto& n : D2.nodes) {
    if (n.kind.tag != NodeTag::sharp_state) continue;
    const std::string& w = *n.out;
    std::string alias = std::string(1, '\x02') + w;
    ab.attach(expr_sharp_state(wire_var(D2, w), n.kind.value.at(0)), {}, {alias});
    leaf_alias[w] = alias;
  }
  for (const auto& n : D2.nodes) {
    if (n.kind.tag != NodeTag::sharp_effect) continue;
    const std::string& w = n.ins.at(0);
    int p = D2.producer_node(w);
    if (p >= 0 && D2.nodes[p].kind.tag == NodeTag::sharp_state) {
      IdentifyingExpression gate =
          expr_compose(expr_sharp_state(wire_var(D2, w), D2.nodes[p].kind.value.at(0)),
                       expr_sharp_effect(wire_var(D2, w), n.kind.value.at(0)), {0});
      ab.attach(std::move(gate), {}, {});
    }
  }

  // Feed-forward order over fragments, following open-input wires.
  std::map<std::string, int> source_of;
  for (size_t i = 0; i < frags.size(); ++i)
    for (const auto& ow : frags[i].open_outputs) source_of[ow.wire] = static_cast<int>(i);
  std::vector<int> order;
  std::vector<char> done(frags.size(), 0);
  while (order.size() < frags.size()) {
    bool advanced = false;
    for (size_t i = 0; i < frags.size(); ++i) {
      if (done[i]) continue;
      bool ready = true;
      for (const auto& iw : frags[i].open_inputs) {
        auto it = source_of.find(iw.wire);
        if (it == source_of.end())
          throw ValidationError("open input " + iw.wire + " has no producing fragment");
        if (!done[it->second]) ready = false;
      }
      if (ready) {
        order.push_back(static_cast<int>(i));
        done[i] = 1;
        advanced = true;
      }
    }
    if (!advanced)
      return fail_res(CfFailReason::fragment_value_conflict,
                      "fragments feed each other cyclically");
  }

  for (int l : order) {
    const RFragment& f = frags[l];
    std::map<std::string, std::pair<const FragmentWire*, bool>> ins;  // var -> (entry, forced?)
    for (const auto& e : f.do_inputs) ins[e.var] = {&e, true};
    for (const auto& e : f.open_inputs) ins[e.var] = {&e, false};
    std::vector<std::string> doset, feeds;
    for (const auto& [v, entry] : ins) {
      doset.push_back(v);
      feeds.push_back(entry.second ? leaf_alias.at(entry.first->wire) : entry.first->wire);
    }
    std::vector<std::string> outs;
    for (const auto& e : f.effect_outputs) outs.push_back(e.var);
    for (const auto& e : f.open_outputs) outs.push_back(e.var);
    outs = sorted_copy(outs);
    ab.attach(expr_data_ref(doset, outs), feeds, outs);
    for (const auto& e : f.effect_outputs)
      ab.apply_at(e.var, expr_sharp_effect(e.var, e.value));
    for (const auto& e : f.open_outputs)
      ab.rename_leg(e.var, e.wire, roster_card(data, e.var));
  }

  for (const auto& [w, alias] : leaf_alias) {
    if (outset.count(w))
      ab.rename_leg(alias, w, roster_card(data, wire_var(D2, w)));
    else
      ab.drop_leg(alias);
  }
  std::vector<std::string> legs = ab.legs;
  for (const auto& leg : legs)
    if (!outset.count(leg)) ab.drop_leg(leg);
  if (!ab.have) ab.attach(expr_boxed(scalar(1.0)), {}, {});

  IdCfResult res;
  res.expression = expr_normalize(expr_marginal(std::move(ab.cur), D2.outputs));
  return res;
}

Morphism generalized_counterfactual(const CausalModel& F, const NoiseStates& L,
                                    const std::vector<std::vector<Intervention>>& sigmas,
                                    const std::vector<SoftEvidence>& conditioning,
                                    EvidenceMode mode, bool allow_mixed_modes) {
  if (sigmas.empty()) throw ValidationError("a counterfactual needs at least one world");
  if (conditioning.size() != sigmas.size())
    throw ShapeError("one evidence entry per world");
  OpenPart op = open_part(F);
  check_noise(F, L);
  size_t k = sigmas.size();

  std::set<EvidenceMode> used;
  for (size_t j = 0; j < k; ++j)
    if (!conditioning[j].C.empty()) used.insert(conditioning[j].mode.value_or(mode));
  if (used.size() > 1 && !allow_mixed_modes)
    throw ValidationError("mixed evidence modes are experimental; enable allow_mixed_modes");

  std::vector<CausalModel> worlds;
  for (const auto& sj : sigmas) worlds.push_back(apply(F, sj));
  CausalModel shared = share_inputs(worlds);
  CausalModel closed = close_with_noise(shared, L, kDefaultTol);

  // Output layout: per world the conditioned wires (sorted) then the exposed
  // wires (sorted).
  std::vector<std::string> outs;
  std::vector<size_t> csize(k, 0);
  for (size_t j = 0; j < k; ++j) {
    const SoftEvidence& ev = conditioning[j];
    const std::string tag = world_tag(j, k);
    std::set<std::string> cs;
    for (const auto& x : ev.C) {
      if (!op.producer.count(x)) throw IndexError("cannot condition on unknown variable " + x);
      if (!cs.insert(x).second) throw ValidationError("conditioned variable listed twice: " + x);
    }
    std::set<std::string> es;
    for (const auto& x : ev.E) {
      if (!op.producer.count(x)) throw IndexError("cannot expose unknown variable " + x);
      if (!es.insert(x).second) throw ValidationError("output listed twice: " + x);
      if (cs.count(x)) throw ValidationError("variable both conditioned and exposed: " + x);
    }
    csize[j] = cs.size();
    for (const auto& x : cs) outs.push_back(x + tag);
    for (const auto& x : es) outs.push_back(x + tag);
  }
  closed.diagram.outputs = outs;
  CausalModel m = make_model(std::move(closed.diagram), std::move(closed.interp));
  Morphism cur = output_state(m);

  size_t offset = 0;
  for (size_t j = 0; j < k; ++j) {
    const SoftEvidence& evd = conditioning[j];
    size_t nc = csize[j], ne = evd.E.size();
    if (nc == 0) {
      offset += ne;
      continue;
    }
    if (!evd.evidence) throw ValidationError("conditioned world without an evidence morphism");
    const Morphism& ev = *evd.evidence;
    EvidenceMode mj = evd.mode.value_or(mode);
    std::vector<int> cpos;
    for (size_t t = 0; t < nc; ++t) cpos.push_back(static_cast<int>(offset + t));
    std::vector<std::string> cs;
    for (const auto& x : evd.C) cs.push_back(x);
    cs = sorted_copy(cs);
    if (mj == EvidenceMode::from_effects) {
      if (!ev.cod.is_unit() || ev.dom.natoms() != nc)
        throw ShapeError("effect evidence must map the conditioned wires to the unit");
      for (size_t t = 0; t < nc; ++t)
        if (ev.dom.atoms[t].card != wire_card(F, cs[t]))
          throw ShapeError("evidence cardinality mismatch on " + cs[t]);
      cur = contract(cur, cpos, ev);
    } else {
      if (!ev.dom.is_unit() || ev.cod.natoms() != nc)
        throw ShapeError("state evidence must be a state over the conditioned wires");
      for (size_t t = 0; t < nc; ++t)
        if (ev.cod.atoms[t].card != wire_card(F, cs[t]))
          throw ShapeError("evidence cardinality mismatch on " + cs[t]);
      cur = soft_conditional_positions(cur, cpos, ev, ConditioningMode::lower);
    }
    offset += ne;
  }
  return normalize(cur);
}

}  // namespace causal
