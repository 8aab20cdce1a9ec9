#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causal/identify.hpp"
#include "causal/intervention.hpp"

namespace causal {

// One hypothetical world over a shared variable roster: force the variables
// in `s` to the given values, condition on the variables in `c` taking the
// given values, and expose `E` as outputs. Everything else in that world is
// marginalised. A variable may not be both conditioned and exposed.
struct WorldTerm {
  std::map<std::string, int64_t> s;
  std::map<std::string, int64_t> c;
  std::vector<std::string> E;
};

using CounterfactualTerms = std::vector<WorldTerm>;

// A counterfactual proper conditions in one world and exposes in a different
// one; queries failing this are plain (interventional) conditionals and the
// world bookkeeping adds nothing.
bool valid_counterfactual_terms(const CounterfactualTerms& terms);

// Noise states keyed by the exogenous wire they close.
using NoiseStates = std::map<std::string, Morphism>;

// Split a structural model into its deterministic open part F (exogenous
// wires promoted to inputs) and the noise states L that close them.
struct FcmParts {
  CausalModel F;
  NoiseStates L;
};
FcmParts split_fcm(const Fcm& f);

// k copies of F, each under its own intervention list, sharing one copy of
// every noise state. Wires and per-world boxes get a "#j" tag when k > 1; a
// single world comes back untouched. Every mechanism must stay deterministic
// under its interventions (Do keeps determinism; anything else is checked).
CausalModel parallel_worlds(const CausalModel& F, const NoiseStates& L,
                            const std::vector<std::vector<Intervention>>& sigmas,
                            double tol = 1e-9);

// The counterfactual as a diagram plus its value: do-values enter as sharp
// states, conditioning as sharp effects, unexposed variables as discards.
// Outputs are ordered world-major, lexicographic within a world. Evidence
// with zero probability yields the zero state; the normalised field is then
// zero too rather than an error.
struct CounterfactualState {
  Morphism unnormalised;
  Morphism normalised;
  NetworkDiagram diagram;
  Interpretation interp;
};

CounterfactualState counterfactual_state(const CausalModel& F, const NoiseStates& L,
                                         const CounterfactualTerms& terms);

// Ground truth by exhausting the joint noise space: every noise tuple fixes
// all worlds' variables, so the query reduces to counting. Refuses jobs with
// more than 10^7 joint noise states (BudgetError). Returns the normalised
// state over the exposed outputs.
Morphism evaluate_counterfactual(const CausalModel& F, const NoiseStates& L,
                                 const CounterfactualTerms& terms);

// Four-pass cleanup of a parallel-worlds diagram, in this fixed order:
//   1. discards fall through copies and swallow unused mechanisms;
//   2. sharp effects meeting a copy split off as scalar gates;
//   3. per variable L along pi: merge duplicate f_L boxes that share their
//      inputs (value-equal sharp states count as shared), then split effects
//      sitting on f_L outputs;
//   4. noise states feeding a single mechanism are absorbed into it; the
//      merged box is renamed "f_X" -> "c_X", and when `interp` is given the
//      plugged morphism is added under the new name.
// pi must be a topological order of the variables V wrt the diagram's
// mechanism wiring. No other rewrites are applied.
NetworkDiagram simplify_cf(const NetworkDiagram& D, const std::vector<std::string>& V,
                           const std::vector<std::string>& pi,
                           Interpretation* interp = nullptr);

// One typed boundary wire of a fragment; `value` is used for sharp entries
// (forced inputs and conditioned outputs) and ignored otherwise.
struct FragmentWire {
  std::string wire;
  std::string var;
  int64_t value = 0;
};

// Maximal group of mechanisms tied together by shared roots: any two of its
// observable mechanisms are linked by a chain of root mechanisms feeding
// them both. `nodes` indexes into the simplified diagram.
struct RFragment {
  std::vector<int> nodes;
  std::vector<std::string> s_o;  // observable variables typed in the fragment
  std::vector<std::string> s_r;  // root variables
  std::vector<FragmentWire> do_inputs;       // sharp-fed inputs, by variable
  std::vector<FragmentWire> open_inputs;     // inputs fed from other fragments
  std::vector<FragmentWire> effect_outputs;  // sharp-conditioned outputs
  std::vector<FragmentWire> open_outputs;    // free or diagram outputs
  // Set when the fragment's boundary cannot be expressed as one
  // interventional table (conflicting forced values, exposed roots, ...).
  // The boundary lists are empty in that case.
  std::optional<std::string> conflict;
};

// Decompose a simplified diagram (mechanism boxes named "c_X") over the
// rootification of A with added roots R, classifying each fragment's
// boundary into the four typed lists above.
std::vector<RFragment> r_fragments(const NetworkDiagram& D, const Admg& A,
                                   const std::vector<std::string>& R,
                                   RootifyMethod method = RootifyMethod::rho_tilde);

// Why identification gave up: a noise state survived simplification, or one
// fragment saw the same variable with conflicting values/sources.
enum class CfFailReason { unabsorbed_noise, fragment_value_conflict };

struct IdCfResult {
  std::optional<IdentifyingExpression> expression;
  std::optional<CfFailReason> fail;
  std::string detail;

  bool ok() const { return expression.has_value(); }
};

// Decide whether the counterfactual over the latent structure A is a
// function of the interventional tables alone, and if so produce the
// estimator. FAIL means not identified by the implemented criteria, not a
// proof of unidentifiability. Tables for every doset a fragment needs must
// be present in `data`.
IdCfResult id_cf(const Admg& A, const CounterfactualTerms& terms,
                 const PStarTables& data,
                 RootifyMethod method = RootifyMethod::rho_tilde);

// How soft evidence acts on a world: compose the effect and renormalise
// once at the end, or treat it as a target marginal and average the
// Bayesian inversions (Jeffrey). Sharp evidence makes the two agree.
enum class EvidenceMode { from_effects, from_states };

// Per-world soft evidence: `evidence` is an effect on C (from_effects) or a
// state over C (from_states); E lists the world's exposed outputs. `mode`
// overrides the call-level mode for this world (experimental).
struct SoftEvidence {
  std::vector<std::string> C;
  std::optional<Morphism> evidence;
  std::vector<std::string> E;
  std::optional<EvidenceMode> mode;
};

// Counterfactual with general interventions and soft evidence. sigmas need
// not preserve determinism here. Mixing per-world modes is refused unless
// allow_mixed_modes is set.
Morphism generalized_counterfactual(const CausalModel& F, const NoiseStates& L,
                                    const std::vector<std::vector<Intervention>>& sigmas,
                                    const std::vector<SoftEvidence>& conditioning,
                                    EvidenceMode mode, bool allow_mixed_modes = false);

}  // namespace causal
