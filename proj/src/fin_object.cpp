#include "causal/fin_object.hpp"

#include <algorithm>
#include <set>

namespace causal {

FinObject::FinObject(std::vector<Atom> a) : atoms(std::move(a)) {
  std::set<std::string> seen;
  for (const auto& at : atoms) {
    if (at.card <= 0)
      throw ValidationError("atom cardinality must be positive: " + at.name);
    if (!seen.insert(at.name).second)
      throw ValidationError("duplicate atom name in FinObject: " + at.name);
  }
}

FinObject FinObject::single(const std::string& name, int64_t card) {
  return FinObject{{Atom{name, card, ""}}};
}

int64_t FinObject::card() const {
  int64_t c = 1;
  for (const auto& a : atoms) c *= a.card;
  return c;
}

int FinObject::find(const std::string& name) const {
  for (size_t i = 0; i < atoms.size(); ++i)
    if (atoms[i].name == name) return static_cast<int>(i);
  return -1;
}

int64_t FinObject::index_of(const std::vector<int64_t>& tuple) const {
  if (tuple.size() != atoms.size()) throw IndexError("tuple arity mismatch");
  int64_t idx = 0;
  for (size_t i = 0; i < atoms.size(); ++i) {
    if (tuple[i] < 0 || tuple[i] >= atoms[i].card)
      throw IndexError("value out of range for atom " + atoms[i].name);
    idx = idx * atoms[i].card + tuple[i];
  }
  return idx;
}

std::vector<int64_t> FinObject::tuple_of(int64_t index) const {
  std::vector<int64_t> t(atoms.size());
  for (size_t i = atoms.size(); i-- > 0;) {
    t[i] = index % atoms[i].card;
    index /= atoms[i].card;
  }
  return t;
}

int64_t FinObject::stride(size_t i) const {
  int64_t s = 1;
  for (size_t j = i + 1; j < atoms.size(); ++j) s *= atoms[j].card;
  return s;
}

bool FinObject::same_shape(const FinObject& o) const {
  if (atoms.size() != o.atoms.size()) return false;
  for (size_t i = 0; i < atoms.size(); ++i)
    if (atoms[i].card != o.atoms[i].card) return false;
  return true;
}

FinObject tensor(const FinObject& a, const FinObject& b) {
  FinObject r;
  r.atoms = a.atoms;
  std::set<std::string> names;
  for (const auto& at : r.atoms) names.insert(at.name);
  for (Atom at : b.atoms) {
    if (names.count(at.name)) {
      std::string base = at.name;
      int k = 2;
      std::string cand;
      do {
        cand = base + "~" + std::to_string(k++);
      } while (names.count(cand));
      if (at.display.empty()) at.display = base;
      at.name = cand;
    }
    names.insert(at.name);
    r.atoms.push_back(std::move(at));
  }
  return r;
}

FinObject select_atoms(const FinObject& x, const std::vector<int>& positions) {
  FinObject r;
  for (int p : positions) {
    if (p < 0 || p >= static_cast<int>(x.natoms())) throw IndexError("atom position out of range");
    r.atoms.push_back(x.atoms[p]);
  }
  return r;
}

std::vector<int> complement_positions(const FinObject& x, const std::vector<int>& positions) {
  std::vector<bool> drop(x.natoms(), false);
  for (int p : positions) {
    if (p < 0 || p >= static_cast<int>(x.natoms())) throw IndexError("atom position out of range");
    drop[p] = true;
  }
  std::vector<int> rest;
  for (size_t i = 0; i < x.natoms(); ++i)
    if (!drop[i]) rest.push_back(static_cast<int>(i));
  return rest;
}

}  // namespace causal
