#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causal/intervention.hpp"
#include "causal/model.hpp"

namespace causal {

// Experimental data an analyst can tabulate: one channel per performed do-set.
// The empty do-set holds the observational joint as a state over the roster;
// a do-set D holds the channel D -> roster \ D (column x = joint under do(x)).
// Roster atoms are kept sorted by name and fix the cod order of every table.
struct PStarTables {
  std::vector<Atom> roster;
  std::map<std::vector<std::string>, Morphism> tables;
};

PStarTables make_pstar_tables(std::vector<Atom> roster);
void add_table(PStarTables& t, std::vector<std::string> doset, Morphism table);
bool has_table(const PStarTables& t, std::vector<std::string> doset);
const Morphism& table_for(const PStarTables& t, std::vector<std::string> doset);
int64_t roster_card(const PStarTables& t, const std::string& name);

// Tabulate the requested do-sets by mechanism surgery on a closed model.
// `observed` selects the roster; the remaining variables stay latent.
PStarTables tables_from_model(const CausalModel& m,
                              const std::vector<std::string>& observed,
                              const std::vector<std::vector<std::string>>& dosets);

// A causal-effect estimator as a term over data tables. Every operation is
// one of the interpreted-category kernels, so an expression both evaluates
// numerically and prints as a formula. `compose` carries the cod legs of the
// left child that feed the right child (contract semantics, fed legs removed,
// right cod appended); `boxed` embeds a constant morphism such as a supplied
// policy channel.
enum class ExprKind {
  data_ref,
  boxed,
  compose,
  tensor,
  copy_fanout,
  discard,
  sharp_state,
  sharp_effect,
  conditional,
  marginal,
  normalize_box,
};

struct IdentifyingExpression {
  ExprKind kind = ExprKind::data_ref;
  std::vector<IdentifyingExpression> children;

  std::vector<std::string> doset;    // data_ref
  std::vector<std::string> outputs;  // data_ref: cod selection, listed order
  std::vector<std::string> names;    // conditional: on; marginal: keep
  std::vector<int> at;               // compose: fed legs; copy_fanout: {leg};
                                     // discard: dropped cod positions
  int copies = 0;                    // copy_fanout
  std::string atom;                  // sharp leaves: roster atom name
  int64_t value = 0;                 // sharp leaves
  std::optional<Morphism> constant;  // boxed

  bool operator==(const IdentifyingExpression& o) const;
};

IdentifyingExpression expr_data_ref(std::vector<std::string> doset,
                                    std::vector<std::string> outputs);
IdentifyingExpression expr_boxed(Morphism m);
IdentifyingExpression expr_compose(IdentifyingExpression l, IdentifyingExpression r,
                                   std::vector<int> at);
IdentifyingExpression expr_tensor(IdentifyingExpression l, IdentifyingExpression r);
IdentifyingExpression expr_copy(IdentifyingExpression arg, int leg, int copies);
IdentifyingExpression expr_discard(IdentifyingExpression arg, std::vector<int> positions);
IdentifyingExpression expr_sharp_state(std::string atom, int64_t value);
IdentifyingExpression expr_sharp_effect(std::string atom, int64_t value);
IdentifyingExpression expr_conditional(IdentifyingExpression arg,
                                       std::vector<std::string> on);
IdentifyingExpression expr_marginal(IdentifyingExpression arg,
                                    std::vector<std::string> keep);
IdentifyingExpression expr_normalize(IdentifyingExpression arg);

// Bottom-up numeric evaluation against a table set. Total on well-shaped
// expressions: conditioning against an unsupported column yields the zero
// column rather than failing. Missing tables raise IndexError; leg or atom
// mismatches raise ShapeError/IndexError.
Morphism evaluate_expression(const IdentifyingExpression& e, const PStarTables& data);

std::string to_text(const IdentifyingExpression& e);

// Incremental expression builder that mirrors contract position bookkeeping:
// `legs` names the cod legs of `cur` in order. attach() fans each fed leg out
// (one copy stays in the output), then contracts the new factor onto the
// fresh copies. Names are bookkeeping only; the numeric atoms may differ.
struct ExprAssembler {
  IdentifyingExpression cur;
  std::vector<std::string> legs;
  bool have = false;

  int find_leg(const std::string& name) const;
  void attach(IdentifyingExpression e, const std::vector<std::string>& feeds,
              const std::vector<std::string>& outs);
  // Composes a one-leg factor (an effect, say) onto the named leg, consuming it.
  void apply_at(const std::string& name, IdentifyingExpression e);
  void rename_leg(const std::string& from, const std::string& to, int64_t card);
  void drop_leg(const std::string& name);
};

// Single-vertex intervention-identification criterion: children of X must
// avoid the confounded component of X. When it applies, every regime at X
// (sharp or a policy reading non-descendants) is expressible from the
// observational table alone.
struct JkzPartition {
  std::vector<std::string> A;  // untouched non-descendants
  std::vector<std::string> B;  // children of X
  std::vector<std::string> C;  // confounded-with-X rest and later descendants
};

std::optional<JkzPartition> jkz_partition(const Admg& g, const std::string& X);

// A regime at X: either do(value) or a policy channel eta : reads (x) X -> X
// fed the old mechanism output, with reads drawn from non-descendants of X.
struct EtaIntervention {
  std::optional<int64_t> do_value;
  std::vector<std::string> reads;
  std::optional<Morphism> eta;
};

EtaIntervention eta_do(int64_t value);
EtaIntervention eta_general(std::vector<std::string> reads, Morphism eta);

// Assemble the estimator for P(roster under the regime at X) from the
// observational table, as iterated prefix conditionals re-routed through the
// partition. The roster supplies atom cards for the rename and sharp leaves.
IdentifyingExpression jkz_expression(const Admg& g, const JkzPartition& p,
                                     const std::string& X, const EtaIntervention& eta,
                                     const std::vector<Atom>& roster);

// Ground-truth post-intervention joint: pin each listed variable by mechanism
// surgery, then evaluate the model's declared outputs.
Morphism truncated_factorization(const CausalModel& m,
                                 const std::map<std::string, int64_t>& dos);

// A pair of models over the same observables that agree on the observational
// joint to machine precision but disagree on a do-target; used to exhibit
// graphs where the criterion above is genuinely silent.
struct WitnessPair {
  CausalModel first, second;
  Morphism target_first, target_second;
  double tv = 0.0;  // total variation between the targets
};

// Confounded mediator X -> Z -> Y with X <-> Z; target P(Y ; do(X=0)).
WitnessPair find_marginal_do_witness(uint64_t seed, int restarts = 200);
// Confounded collider X -> Z <- Y with X <-> Z; target P(Y | Z=0 ; do(X=0)).
WitnessPair find_conditional_do_witness(uint64_t seed, int restarts = 200);

}  // namespace causal
