#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace causal {

// Error hierarchy shared across the library. The CLI maps these to exit codes.
struct CausalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : CausalError {
  using CausalError::CausalError;
};
struct IndexError : CausalError {
  using CausalError::CausalError;
};
struct ValidationError : CausalError {
  using CausalError::CausalError;
};
struct SchemaError : CausalError {
  using CausalError::CausalError;
};
struct BudgetError : CausalError {
  using CausalError::CausalError;
};

// One named finite value space. `display` keeps the original name when a
// tensor product had to disambiguate a clash; empty means name is original.
struct Atom {
  std::string name;
  int64_t card = 1;
  std::string display;

  const std::string& shown() const { return display.empty() ? name : display; }
  bool operator==(const Atom& o) const { return name == o.name && card == o.card; }
};

// Ordered sequence of atoms; the tensor unit I is the empty sequence.
// Total cardinality is the product of atom cardinalities (empty product = 1).
struct FinObject {
  std::vector<Atom> atoms;

  FinObject() = default;
  explicit FinObject(std::vector<Atom> a);

  static FinObject unit() { return FinObject{}; }
  static FinObject single(const std::string& name, int64_t card);

  size_t natoms() const { return atoms.size(); }
  bool is_unit() const { return atoms.empty(); }
  int64_t card() const;

  // Position of the named atom, or -1.
  int find(const std::string& name) const;

  // Mixed-radix index <-> value tuple, first atom most significant.
  int64_t index_of(const std::vector<int64_t>& tuple) const;
  std::vector<int64_t> tuple_of(int64_t index) const;

  // Stride of atom i in the flat index.
  int64_t stride(size_t i) const;

  // Same length and per-position cardinalities (names ignored).
  bool same_shape(const FinObject& o) const;
  bool operator==(const FinObject& o) const { return atoms == o.atoms; }
};

// Concatenation; right-hand names are suffixed "~2", "~3", ... on clashes,
// keeping the original as display metadata.
FinObject tensor(const FinObject& a, const FinObject& b);

// Subsequence selected by positions, in the given order.
FinObject select_atoms(const FinObject& x, const std::vector<int>& positions);

// Positions of x's atoms NOT in `positions`, in original order.
std::vector<int> complement_positions(const FinObject& x, const std::vector<int>& positions);

}  // namespace causal
