#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "causal/graph.hpp"
#include "causal/morphism.hpp"

namespace causal {

// Network diagrams: single-output boxes wired by labelled wires. Copy fan-out
// is implicit (a wire may feed any number of consumers); a wire consumed zero
// times is implicitly discarded. Constant nodes (states/effects) extend the
// strict box-only form and are what the counterfactual simplifier works on.

enum class NodeTag { mechanism, sharp_state, sharp_effect, generic_state, generic_effect };

struct NodeKind {
  NodeTag tag = NodeTag::mechanism;
  // Interpretation key for mechanism/generic nodes. An empty key on a
  // generic_effect denotes the discarding effect on its input wires.
  std::string box;
  // Sharp nodes: one value index per attached wire.
  std::vector<int64_t> value;

  static NodeKind Mechanism(std::string name) {
    return {NodeTag::mechanism, std::move(name), {}};
  }
  static NodeKind SharpState(std::vector<int64_t> v) {
    return {NodeTag::sharp_state, {}, std::move(v)};
  }
  static NodeKind SharpEffect(std::vector<int64_t> v) {
    return {NodeTag::sharp_effect, {}, std::move(v)};
  }
  static NodeKind GenericState(std::string ref) {
    return {NodeTag::generic_state, std::move(ref), {}};
  }
  static NodeKind GenericEffect(std::string ref) {
    return {NodeTag::generic_effect, std::move(ref), {}};
  }
  static NodeKind Discard() { return {NodeTag::generic_effect, {}, {}}; }

  bool is_constant() const { return tag != NodeTag::mechanism; }
  bool is_state() const {
    return tag == NodeTag::sharp_state || tag == NodeTag::generic_state;
  }
  bool is_effect() const {
    return tag == NodeTag::sharp_effect || tag == NodeTag::generic_effect;
  }
  bool is_discard() const { return tag == NodeTag::generic_effect && box.empty(); }
  bool operator==(const NodeKind& o) const {
    return tag == o.tag && box == o.box && value == o.value;
  }
};

struct DiagramNode {
  NodeKind kind;
  std::vector<std::string> ins;
  std::optional<std::string> out;
  bool operator==(const DiagramNode& o) const {
    return kind == o.kind && ins == o.ins && out == o.out;
  }
};

struct NetworkDiagram {
  std::map<std::string, Atom> wires;  // label -> syntactic atom
  std::vector<DiagramNode> nodes;
  std::vector<std::string> inputs;    // ordered, produced by the boundary
  std::vector<std::string> outputs;   // ordered, each label at most once

  bool has_wire(const std::string& label) const { return wires.count(label) > 0; }
  // Node-input uses plus output membership.
  int consumption_count(const std::string& label) const;
  // Producing node index, or -1 when produced by the input boundary (or not
  // produced at all).
  int producer_node(const std::string& label) const;
  bool operator==(const NetworkDiagram& o) const {
    return wires == o.wires && nodes == o.nodes && inputs == o.inputs &&
           outputs == o.outputs;
  }
};

struct ValidationReport {
  bool ok = true;
  std::string violation;
};

ValidationReport validate(const NetworkDiagram& d, bool strict);

// Finite-set semantics for a diagram: channels for the boxes, an atom
// (carrying the cardinality) for every wire label.
struct Interpretation {
  std::map<std::string, Morphism> boxes;
  std::map<std::string, Atom> wires;
};

// One mechanism box "c_<vertex>" per non-input vertex, inputs per parent
// (in vertex-index order), wire labels = vertex names.
NetworkDiagram diagram_from_dag(const Dag& g, const std::vector<std::string>& I,
                                const std::vector<std::string>& O);

// Inverse direction of the diagram/DAG correspondence; requires strict D.
OpenDag open_dag_from_diagram(const NetworkDiagram& d);

// Contracts the diagram in topological order (ties broken by output label)
// into a single morphism from the inputs (in order) to the outputs (in order).
Morphism evaluate(const NetworkDiagram& d, const Interpretation& interp);

enum class RewriteRule {
  discard_fallthrough,        // delete a producer whose output is never used
  drop_discarded_copy_leg,    // delete an explicit discard node
  copy_through_deterministic, // merge same-box nodes sharing all inputs
  sharp_effect_split,         // effect on a fanned-out wire restarts as a state
  copy_out_discard,           // attach an explicit discard to a wire (inverse GC)
  absorb_noise_into_channel   // fold a single-use state into its consumer box
};

struct RewriteSite {
  int node = -1;
  int node2 = -1;
  std::string wire;
};

struct RewriteResult {
  NetworkDiagram diagram;
  bool applied = false;
  std::string note;  // mismatch reason when not applied
  // absorb_noise_into_channel bookkeeping so callers can extend their
  // interpretation: boxes[new_box] = plug(boxes[old_box], {position}, state).
  std::string old_box, absorbed_box, new_box;
  int absorbed_position = -1;
};

// Single-step rewrite. Pattern mismatch is not an error: the input diagram is
// returned with applied=false and the reason in note.
// copy_through_deterministic is only sound when the shared box denotes a
// deterministic channel; callers are responsible for checking that.
RewriteResult apply_rewrite(const NetworkDiagram& d, RewriteRule rule,
                            const RewriteSite& site);

struct RewriteEvent {
  RewriteRule rule;
  RewriteSite site;
  std::string old_box, absorbed_box, new_box;
  int absorbed_position = -1;
};

struct FixpointResult {
  NetworkDiagram diagram;
  std::vector<RewriteEvent> events;
};

// Repeatedly applies the first matching site of the first matching rule until
// nothing fires. Sites are scanned deterministically (node index, then wire
// label order). copy_through_deterministic only fires for boxes listed in
// deterministic_boxes. Expanding rule lists are cut off by a step budget.
FixpointResult rewrite_fixpoint(const NetworkDiagram& d,
                                const std::vector<RewriteRule>& rules,
                                const std::set<std::string>& deterministic_boxes = {});

// Deterministic DOT rendering: boxes and constants as shaped nodes, wires as
// labelled edges, inputs/outputs as rank-pinned ports.
std::string to_dot(const NetworkDiagram& d);

}  // namespace causal
