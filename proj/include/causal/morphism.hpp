#pragma once

#include "causal/fin_object.hpp"

namespace causal {

inline constexpr double kDefaultTol = 1e-9;
inline constexpr double kZeroColumnTol = 1e-12;
// Hard cap on dense tensor size (entries), kept well inside RAM at desk scale.
inline constexpr int64_t kMaxEntries = int64_t(1) << 26;

// A morphism of the finite nonnegative-matrix category: a dense tensor
// M(cod-value | dom-value), stored row-major over (dom index, cod index).
// dom = unit makes a state, cod = unit an effect, both unit a scalar.
struct Morphism {
  FinObject dom;
  FinObject cod;
  std::vector<double> a;

  Morphism() = default;
  Morphism(FinObject d, FinObject c);
  Morphism(FinObject d, FinObject c, std::vector<double> entries);

  int64_t dcard() const { return dom.card(); }
  int64_t ccard() const { return cod.card(); }

  double at(int64_t x, int64_t y) const { return a[x * cod.card() + y]; }
  double& at(int64_t x, int64_t y) { return a[x * cod.card() + y]; }

  bool is_state() const { return dom.is_unit(); }
  bool is_effect() const { return cod.is_unit(); }
  bool is_scalar() const { return dom.is_unit() && cod.is_unit(); }
  double scalar_value() const;
};

// Generator symbols of the cd-structure (plus caps, sharp points, zero).
struct GeneratorKind {
  enum class Tag {
    identity,
    swap_,
    copy,  // legs >= 0; copy(0) coincides with discard
    discard,
    cap,
    uniform_state,
    sharp_state,
    sharp_effect,
    zero
  };
  Tag tag = Tag::identity;
  int legs = 2;
  std::vector<int64_t> value;  // per-atom value tuple for sharp kinds
  FinObject other;             // second object for swap

  static GeneratorKind Identity() { return {Tag::identity, 2, {}, {}}; }
  static GeneratorKind Swap(FinObject snd) { return {Tag::swap_, 2, {}, std::move(snd)}; }
  static GeneratorKind Copy(int n) { return {Tag::copy, n, {}, {}}; }
  static GeneratorKind Discard() { return {Tag::discard, 2, {}, {}}; }
  static GeneratorKind Cap() { return {Tag::cap, 2, {}, {}}; }
  static GeneratorKind Uniform() { return {Tag::uniform_state, 2, {}, {}}; }
  static GeneratorKind SharpState(std::vector<int64_t> v) {
    return {Tag::sharp_state, 2, std::move(v), {}};
  }
  static GeneratorKind SharpEffect(std::vector<int64_t> v) {
    return {Tag::sharp_effect, 2, std::move(v), {}};
  }
  static GeneratorKind Zero() { return {Tag::zero, 2, {}, {}}; }
};

Morphism generator(const GeneratorKind& kind, const FinObject& obj);

Morphism identity(const FinObject& x);
Morphism copy_map(const FinObject& x, int legs);
Morphism discard(const FinObject& x);
Morphism cap(const FinObject& x);
Morphism uniform_state(const FinObject& x);
Morphism sharp_state(const FinObject& x, const std::vector<int64_t>& value);
Morphism sharp_effect(const FinObject& x, const std::vector<int64_t>& value);
Morphism zero_state(const FinObject& x);
Morphism zero_morphism(const FinObject& dom, const FinObject& cod);
Morphism swap_map(const FinObject& x, const FinObject& y);
Morphism scalar(double v);

// g after f: (g . f)(z|x) = sum_y g(z|y) f(y|x).
Morphism compose(const Morphism& f, const Morphism& g);
Morphism tensor(const Morphism& f, const Morphism& g);

// Sum out all codomain atoms not in `keep`; result codomain follows the order
// of `keep`.
Morphism marginalize(const Morphism& f, const std::vector<std::string>& keep);
Morphism marginalize_positions(const Morphism& f, const std::vector<int>& keep);

// Columnwise renormalisation; columns with sum <= kZeroColumnTol stay zero.
Morphism normalize(const Morphism& f);

// Bayesian conditional f|_Z : dom (x) Z -> cod \ Z, zero columns where the
// conditioned event has no mass.
Morphism conditional(const Morphism& f, const std::vector<std::string>& on);
Morphism conditional_positions(const Morphism& f, const std::vector<int>& on);

enum class ConditioningMode { upper, lower };

// upper: renormalise after composing an effect on Z (Pearl-style update);
// lower: mix the Bayesian conditionals with a state on Z (Jeffrey-style).
Morphism soft_conditional(const Morphism& f, const std::vector<std::string>& on,
                          const Morphism& evidence, ConditioningMode mode);
Morphism soft_conditional_positions(const Morphism& f, const std::vector<int>& on,
                                    const Morphism& evidence, ConditioningMode mode);

struct MorphismClass {
  bool is_channel = false;
  bool is_partial_channel = false;
  bool is_deterministic = false;
  bool is_normalised_state = false;
  bool is_sharp = false;
  bool is_zero = false;
};

MorphismClass classify(const Morphism& f, double tol = kDefaultTol);
bool is_channel(const Morphism& f, double tol = kDefaultTol);
bool is_partial_channel(const Morphism& f, double tol = kDefaultTol);
bool is_deterministic(const Morphism& f, double tol = kDefaultTol);

// Deterministic-plus-noise presentation of a channel c : X -> Y, with
// c = f . (id_X (x) lambda). Deterministic channels get the unit noise.
struct Dilation {
  Morphism f;  // X (x) U -> Y, deterministic
  FinObject U;
  Morphism lambda;  // state on U
};
Dilation functional_dilation(const Morphism& c);

// Contraction kernels shared by evaluation and expression code.
//
// contract: apply g to the selected cod legs of F (in the listed order);
// result cod = remaining legs in original order ++ cod(g).
Morphism contract(const Morphism& F, const std::vector<int>& legs, const Morphism& g);
// plug: feed a state into selected dom legs of f; result dom = remaining legs.
Morphism plug(const Morphism& f, const std::vector<int>& dom_legs, const Morphism& state);

// order[i] = old atom position that lands at new position i.
Morphism reorder_cod(const Morphism& f, const std::vector<int>& order);
Morphism reorder_dom(const Morphism& f, const std::vector<int>& order);

double max_abs_diff(const Morphism& f, const Morphism& g);
bool approx_equal(const Morphism& f, const Morphism& g, double tol = kDefaultTol);
double column_sum(const Morphism& f, int64_t x);

}  // namespace causal
