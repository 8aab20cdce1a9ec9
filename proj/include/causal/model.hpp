#pragma once

#include <map>
#include <string>
#include <vector>

#include "causal/diagram.hpp"
#include "causal/graph.hpp"
#include "causal/morphism.hpp"

namespace causal {

// A causal model is a strict network diagram (open allowed) together with a
// channel interpretation of its boxes. Closed models have no input wires.
struct CausalModel {
  NetworkDiagram diagram;
  Interpretation interp;
};

// Validating constructor: strict diagram, every box interpreted by a channel
// whose shape matches the node's wires.
CausalModel make_model(NetworkDiagram diagram, Interpretation interp,
                       double tol = kDefaultTol);

// Variable roster (wire labels, lex order) and the induced open DAG.
std::vector<std::string> model_variables(const CausalModel& m);
OpenDag model_graph(const CausalModel& m);

// The interpreted mechanism of the node producing `variable`.
const Morphism& mechanism_of(const CausalModel& m, const std::string& variable);

// Joint state of a closed model over its output wires.
Morphism output_state(const CausalModel& m);

// The model's channel from input wires to output wires; for an opened model
// this is the do-distribution with the input left unspecified.
Morphism channel_of(const CausalModel& m);

// X independent of Y given Z in the state omega: the conditional over (X,Y)
// factors as the product of the X and Y conditionals, entrywise within tol.
// Columns of Z with no support compare as zero against zero.
bool conditionally_independent(const Morphism& omega,
                               const std::vector<std::string>& X,
                               const std::vector<std::string>& Y,
                               const std::vector<std::string>& Z,
                               double tol = kDefaultTol);

// Joint state over all variables of a closed model, regardless of its
// declared outputs; cod atoms in wire (lex) order.
Morphism full_joint(const CausalModel& m);

// Dom legs of c that cannot change the output distribution under any setting
// of the other legs.
std::vector<int> nonsignalling_legs(const Morphism& c, double tol = kDefaultTol);

// Per-variable signalling audit: a parent that cannot change the output
// distribution under any setting of the other parents is flagged.
struct FaithfulnessReport {
  bool faithful = true;
  std::map<std::string, std::vector<std::string>> nonsignalling;
};
FaithfulnessReport mechanism_faithful(const CausalModel& m,
                                      double tol = kDefaultTol);

// Functional presentation: endogenous variables driven by deterministic
// mechanisms, each with exactly one private exogenous noise parent carrying a
// normalised state.
struct Fcm {
  CausalModel base;
  std::vector<std::string> endogenous;
  std::vector<std::string> exogenous;
};

Fcm make_fcm(CausalModel base, std::vector<std::string> endogenous,
             std::vector<std::string> exogenous, double tol = kDefaultTol);

// Noise wire/box/mechanism names used by fcm_from_model for variable X:
// wire "U_X", state box "lam_X", deterministic box "f_X".
Fcm fcm_from_model(const CausalModel& m);

// Collapse each (f_X, lambda_X) pair back to a single channel "c_X".
CausalModel model_from_fcm(const Fcm& f);

// The deterministic mechanism / noise state / noise wire of an endogenous
// variable in an Fcm.
const Morphism& fcm_mechanism(const Fcm& f, const std::string& variable);
const Morphism& fcm_noise(const Fcm& f, const std::string& variable);
std::string fcm_noise_wire(const Fcm& f, const std::string& variable);

// Causal Markov condition: the joint factorises as the product of
// parent-conditionals over g.
bool markov_check(const Morphism& joint, const Dag& g, double tol);
bool markov_check(const CausalModel& m, double tol = 1e-9);

}  // namespace causal
