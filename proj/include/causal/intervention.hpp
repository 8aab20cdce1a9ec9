#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "causal/model.hpp"

namespace causal {

// The intervention zoo. Every variant swaps the mechanism of its target(s)
// for a new channel; apply() re-validates the resulting model.
struct Do {
  std::string X;
  int64_t value = 0;
};
struct Break {
  std::string X;
  Morphism state;
};
struct Cut {
  std::string X;
};
// Post-compose eta : X -> X onto the mechanism of X.
struct Local {
  std::string X;
  Morphism eta;
};
// Post-compose eta : A (x) X -> X, reading extra variables A (which must not
// be descendants of X beforehand, to keep the result acyclic).
struct WideLocal {
  std::string X;
  std::vector<std::string> A;
  Morphism eta;
};
// Drop the parents X provably ignores; the kept mechanism is faithful.
struct Trim {
  std::string X;
};
// Prepend ignored parents S to the mechanism of X.
struct Pad {
  std::string X;
  std::vector<std::string> S;
};
// New mechanism for each key X: maps[X] after the old mechanism of phi[X].
struct Rewire {
  std::map<std::string, std::string> phi;
  std::map<std::string, Morphism> maps;
};

using Intervention =
    std::variant<Do, Break, Cut, Local, WideLocal, Trim, Pad, Rewire>;

// Same variables, inputs, and outputs; mechanisms replaced per the variant.
CausalModel apply(const CausalModel& m, const Intervention& sigma,
                  double tol = kDefaultTol);
CausalModel apply(const CausalModel& m, const std::vector<Intervention>& sigmas,
                  double tol = kDefaultTol);

// Remove the mechanisms of S and turn S into input wires.
CausalModel open_at(const CausalModel& m, const std::vector<std::string>& S);

enum class BoundaryDirection { internalise, externalise };

// internalise: drop A from the outputs; externalise: append the missing part
// of A to the outputs. Both leave mechanisms untouched and are idempotent.
CausalModel boundary(const CausalModel& m, const std::vector<std::string>& A,
                     BoundaryDirection direction);

enum class ComposeMode { sequential, parallel };

// sequential: feed M's outputs positionally into N's inputs (N's input wires
// take M's output names); parallel: disjoint union.
CausalModel compose_models(const CausalModel& m, const CausalModel& n,
                           ComposeMode mode);

// One copy fan-out of the shared inputs feeding every model; wires caused
// inside model j are tagged "#j" (1-based). A single model is returned as-is.
CausalModel share_inputs(const std::vector<CausalModel>& models);

}  // namespace causal
