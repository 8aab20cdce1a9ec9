#include "causal/morphism.hpp"

#include <algorithm>
#include <cmath>

namespace causal {

namespace {

void check_entry_budget(const FinObject& d, const FinObject& c) {
  int64_t n = 1;
  for (const auto& at : d.atoms) {
    n *= at.card;
    if (n > kMaxEntries) throw BudgetError("morphism too large");
  }
  for (const auto& at : c.atoms) {
    n *= at.card;
    if (n > kMaxEntries) throw BudgetError("morphism too large");
  }
}

void check_finite_nonneg(const std::vector<double>& v) {
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw ValidationError("morphism entries must be finite and nonnegative");
}

}  // namespace

Morphism::Morphism(FinObject d, FinObject c) : dom(std::move(d)), cod(std::move(c)) {
  check_entry_budget(dom, cod);
  a.assign(static_cast<size_t>(dom.card() * cod.card()), 0.0);
}

Morphism::Morphism(FinObject d, FinObject c, std::vector<double> entries)
    : dom(std::move(d)), cod(std::move(c)), a(std::move(entries)) {
  check_entry_budget(dom, cod);
  if (static_cast<int64_t>(a.size()) != dom.card() * cod.card())
    throw ShapeError("entry count does not match dom x cod");
  check_finite_nonneg(a);
}

double Morphism::scalar_value() const {
  if (!is_scalar()) throw ShapeError("not a scalar");
  return a[0];
}

Morphism identity(const FinObject& x) {
  Morphism m(x, x);
  int64_t n = x.card();
  for (int64_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Morphism copy_map(const FinObject& x, int legs) {
  if (legs < 0) throw IndexError("copy legs must be >= 0");
  FinObject cod;
  for (int i = 0; i < legs; ++i) cod = tensor(cod, x);
  Morphism m(x, cod);
  int64_t n = x.card();
  for (int64_t v = 0; v < n; ++v) {
    int64_t idx = 0;
    for (int i = 0; i < legs; ++i) idx = idx * n + v;
    m.at(v, idx) = 1.0;
  }
  return m;
}

Morphism discard(const FinObject& x) { return copy_map(x, 0); }

Morphism cap(const FinObject& x) {
  Morphism m(tensor(x, x), FinObject::unit());
  int64_t n = x.card();
  for (int64_t v = 0; v < n; ++v) m.at(v * n + v, 0) = 1.0;
  return m;
}

Morphism uniform_state(const FinObject& x) {
  Morphism m(FinObject::unit(), x);
  int64_t n = x.card();
  for (int64_t v = 0; v < n; ++v) m.at(0, v) = 1.0 / static_cast<double>(n);
  return m;
}

Morphism sharp_state(const FinObject& x, const std::vector<int64_t>& value) {
  Morphism m(FinObject::unit(), x);
  m.at(0, x.index_of(value)) = 1.0;
  return m;
}

Morphism sharp_effect(const FinObject& x, const std::vector<int64_t>& value) {
  Morphism m(x, FinObject::unit());
  m.at(x.index_of(value), 0) = 1.0;
  return m;
}

Morphism zero_state(const FinObject& x) { return Morphism(FinObject::unit(), x); }

Morphism zero_morphism(const FinObject& dom, const FinObject& cod) {
  return Morphism(dom, cod);
}

Morphism swap_map(const FinObject& x, const FinObject& y) {
  Morphism m(tensor(x, y), tensor(y, x));
  int64_t nx = x.card(), ny = y.card();
  for (int64_t i = 0; i < nx; ++i)
    for (int64_t j = 0; j < ny; ++j) m.at(i * ny + j, j * nx + i) = 1.0;
  return m;
}

Morphism scalar(double v) {
  return Morphism(FinObject::unit(), FinObject::unit(), {v});
}

Morphism generator(const GeneratorKind& kind, const FinObject& obj) {
  using Tag = GeneratorKind::Tag;
  switch (kind.tag) {
    case Tag::identity:
      return identity(obj);
    case Tag::swap_:
      return swap_map(obj, kind.other);
    case Tag::copy:
      return copy_map(obj, kind.legs);
    case Tag::discard:
      return discard(obj);
    case Tag::cap:
      return cap(obj);
    case Tag::uniform_state:
      return uniform_state(obj);
    case Tag::sharp_state:
      return sharp_state(obj, kind.value);
    case Tag::sharp_effect:
      return sharp_effect(obj, kind.value);
    case Tag::zero:
      return zero_state(obj);
  }
  throw IndexError("unknown generator");
}

Morphism compose(const Morphism& f, const Morphism& g) {
  if (f.cod.card() != g.dom.card())
    throw ShapeError("compose: middle object cardinality mismatch");
  Morphism r(f.dom, g.cod);
  int64_t nx = f.dom.card(), ny = f.cod.card(), nz = g.cod.card();
  for (int64_t x = 0; x < nx; ++x) {
    const double* frow = f.a.data() + x * ny;
    double* rrow = r.a.data() + x * nz;
    for (int64_t y = 0; y < ny; ++y) {
      double fy = frow[y];
      if (fy == 0.0) continue;
      const double* grow = g.a.data() + y * nz;
      for (int64_t z = 0; z < nz; ++z) rrow[z] += fy * grow[z];
    }
  }
  return r;
}

Morphism tensor(const Morphism& f, const Morphism& g) {
  Morphism r(tensor(f.dom, g.dom), tensor(f.cod, g.cod));
  int64_t fdx = f.dom.card(), gdx = g.dom.card();
  int64_t fcy = f.cod.card(), gcy = g.cod.card();
  for (int64_t x1 = 0; x1 < fdx; ++x1)
    for (int64_t x2 = 0; x2 < gdx; ++x2) {
      int64_t x = x1 * gdx + x2;
      double* rrow = r.a.data() + x * (fcy * gcy);
      const double* frow = f.a.data() + x1 * fcy;
      const double* grow = g.a.data() + x2 * gcy;
      for (int64_t y1 = 0; y1 < fcy; ++y1) {
        double fv = frow[y1];
        if (fv == 0.0) continue;
        double* dst = rrow + y1 * gcy;
        for (int64_t y2 = 0; y2 < gcy; ++y2) dst[y2] += fv * grow[y2];
      }
    }
  return r;
}

Morphism contract(const Morphism& F, const std::vector<int>& legs, const Morphism& g) {
  size_t m = F.cod.natoms();
  std::vector<bool> selected(m, false);
  for (int p : legs) {
    if (p < 0 || p >= static_cast<int>(m)) throw IndexError("contract: leg out of range");
    if (selected[p]) throw IndexError("contract: duplicate leg");
    selected[p] = true;
  }
  if (legs.size() != g.dom.natoms())
    throw ShapeError("contract: leg count does not match g's domain arity");
  for (size_t i = 0; i < legs.size(); ++i)
    if (F.cod.atoms[legs[i]].card != g.dom.atoms[i].card)
      throw ShapeError("contract: leg cardinality mismatch");

  std::vector<int> rest = complement_positions(F.cod, legs);
  FinObject rest_obj = select_atoms(F.cod, rest);
  FinObject new_cod = tensor(rest_obj, g.cod);
  Morphism r(F.dom, new_cod);

  // Per-atom contributions of a cod index to (sel index, rest index).
  std::vector<int64_t> sel_stride(m, 0), rest_stride(m, 0);
  {
    int64_t s = 1;
    for (size_t i = legs.size(); i-- > 0;) {
      sel_stride[legs[i]] = s;
      s *= F.cod.atoms[legs[i]].card;
    }
    s = 1;
    for (size_t i = rest.size(); i-- > 0;) {
      rest_stride[rest[i]] = s;
      s *= F.cod.atoms[rest[i]].card;
    }
  }

  int64_t nx = F.dom.card(), nl = F.cod.card(), ng = g.cod.card();
  std::vector<int64_t> digits(m, 0);
  int64_t sel_idx = 0, rest_idx = 0;
  for (int64_t x = 0; x < nx; ++x) {
    std::fill(digits.begin(), digits.end(), 0);
    sel_idx = rest_idx = 0;
    const double* Frow = F.a.data() + x * nl;
    double* rrow = r.a.data() + x * (rest_obj.card() * ng);
    for (int64_t l = 0;; ++l) {
      double fv = Frow[l];
      if (fv != 0.0) {
        const double* grow = g.a.data() + sel_idx * ng;
        double* dst = rrow + rest_idx * ng;
        for (int64_t y = 0; y < ng; ++y) dst[y] += fv * grow[y];
      }
      if (l + 1 >= nl) break;
      // mixed-radix increment, last atom fastest
      for (size_t i = m; i-- > 0;) {
        digits[i]++;
        sel_idx += sel_stride[i];
        rest_idx += rest_stride[i];
        if (digits[i] < F.cod.atoms[i].card) break;
        sel_idx -= digits[i] * sel_stride[i];
        rest_idx -= digits[i] * rest_stride[i];
        digits[i] = 0;
      }
    }
  }
  return r;
}

Morphism plug(const Morphism& f, const std::vector<int>& dom_legs, const Morphism& state) {
  if (!state.is_state()) throw ShapeError("plug: expected a state");
  size_t m = f.dom.natoms();
  std::vector<bool> selected(m, false);
  for (int p : dom_legs) {
    if (p < 0 || p >= static_cast<int>(m)) throw IndexError("plug: leg out of range");
    if (selected[p]) throw IndexError("plug: duplicate leg");
    selected[p] = true;
  }
  if (dom_legs.size() != state.cod.natoms())
    throw ShapeError("plug: leg count does not match state arity");
  for (size_t i = 0; i < dom_legs.size(); ++i)
    if (f.dom.atoms[dom_legs[i]].card != state.cod.atoms[i].card)
      throw ShapeError("plug: leg cardinality mismatch");

  std::vector<int> rest = complement_positions(f.dom, dom_legs);
  FinObject rest_obj = select_atoms(f.dom, rest);
  Morphism r(rest_obj, f.cod);

  std::vector<int64_t> sel_stride(m, 0), rest_stride(m, 0);
  {
    int64_t s = 1;
    for (size_t i = dom_legs.size(); i-- > 0;) {
      sel_stride[dom_legs[i]] = s;
      s *= f.dom.atoms[dom_legs[i]].card;
    }
    s = 1;
    for (size_t i = rest.size(); i-- > 0;) {
      rest_stride[rest[i]] = s;
      s *= f.dom.atoms[rest[i]].card;
    }
  }

  int64_t nx = f.dom.card(), ny = f.cod.card();
  std::vector<int64_t> digits(m, 0);
  int64_t sel_idx = 0, rest_idx = 0;
  for (int64_t x = 0;; ++x) {
    double w = state.a[sel_idx];
    if (w != 0.0) {
      const double* frow = f.a.data() + x * ny;
      double* rrow = r.a.data() + rest_idx * ny;
      for (int64_t y = 0; y < ny; ++y) rrow[y] += w * frow[y];
    }
    if (x + 1 >= nx) break;
    for (size_t i = m; i-- > 0;) {
      digits[i]++;
      sel_idx += sel_stride[i];
      rest_idx += rest_stride[i];
      if (digits[i] < f.dom.atoms[i].card) break;
      sel_idx -= digits[i] * sel_stride[i];
      rest_idx -= digits[i] * rest_stride[i];
      digits[i] = 0;
    }
  }
  return r;
}

Morphism marginalize_positions(const Morphism& f, const std::vector<int>& keep) {
  std::vector<int> drop = complement_positions(f.cod, keep);
  Morphism summed = contract(f, drop, discard(select_atoms(f.cod, drop)));
  // summed cod = kept atoms in original order; move to the requested order
  std::vector<int> order;
  std::vector<int> sorted_keep = keep;
  std::sort(sorted_keep.begin(), sorted_keep.end());
  for (int want : keep) {
    // position of `want` among sorted kept positions
    int pos = static_cast<int>(std::lower_bound(sorted_keep.begin(), sorted_keep.end(), want) -
                               sorted_keep.begin());
    order.push_back(pos);
  }
  return reorder_cod(summed, order);
}

Morphism marginalize(const Morphism& f, const std::vector<std::string>& keep) {
  std::vector<int> pos;
  for (const auto& n : keep) {
    int p = f.cod.find(n);
    if (p < 0) throw IndexError("marginalize: unknown atom " + n);
    pos.push_back(p);
  }
  return marginalize_positions(f, pos);
}

Morphism normalize(const Morphism& f) {
  Morphism r = f;
  int64_t nx = f.dom.card(), ny = f.cod.card();
  for (int64_t x = 0; x < nx; ++x) {
    double s = 0.0;
    const double* row = f.a.data() + x * ny;
    for (int64_t y = 0; y < ny; ++y) s += row[y];
    double* rrow = r.a.data() + x * ny;
    if (s <= kZeroColumnTol) {
      for (int64_t y = 0; y < ny; ++y) rrow[y] = 0.0;
    } else {
      for (int64_t y = 0; y < ny; ++y) rrow[y] = row[y] / s;
    }
  }
  return r;
}

Morphism conditional_positions(const Morphism& f, const std::vector<int>& on) {
  std::vector<int> rest = complement_positions(f.cod, on);
  FinObject Z = select_atoms(f.cod, on);
  FinObject Y = select_atoms(f.cod, rest);
  FinObject new_dom = tensor(f.dom, Z);
  Morphism r(new_dom, Y);

  size_t m = f.cod.natoms();
  std::vector<int64_t> z_stride(m, 0), y_stride(m, 0);
  {
    int64_t s = 1;
    for (size_t i = on.size(); i-- > 0;) {
      z_stride[on[i]] = s;
      s *= f.cod.atoms[on[i]].card;
    }
    s = 1;
    for (size_t i = rest.size(); i-- > 0;) {
      y_stride[rest[i]] = s;
      s *= f.cod.atoms[rest[i]].card;
    }
  }

  int64_t nx = f.dom.card(), nl = f.cod.card();
  int64_t nz = Z.card(), nyc = Y.card();
  std::vector<double> den(static_cast<size_t>(nz));
  std::vector<int64_t> digits(m);
  for (int64_t x = 0; x < nx; ++x) {
    std::fill(den.begin(), den.end(), 0.0);
    std::fill(digits.begin(), digits.end(), 0);
    int64_t zi = 0, yi = 0;
    const double* frow = f.a.data() + x * nl;
    for (int64_t l = 0;; ++l) {
      den[zi] += frow[l];
      if (l + 1 >= nl) break;
      for (size_t i = m; i-- > 0;) {
        digits[i]++;
        zi += z_stride[i];
        yi += y_stride[i];
        if (digits[i] < f.cod.atoms[i].card) break;
        zi -= digits[i] * z_stride[i];
        yi -= digits[i] * y_stride[i];
        digits[i] = 0;
      }
    }
    std::fill(digits.begin(), digits.end(), 0);
    zi = yi = 0;
    for (int64_t l = 0;; ++l) {
      if (den[zi] > kZeroColumnTol)
        r.at(x * nz + zi, yi) = frow[l] / den[zi];
      if (l + 1 >= nl) break;
      for (size_t i = m; i-- > 0;) {
        digits[i]++;
        zi += z_stride[i];
        yi += y_stride[i];
        if (digits[i] < f.cod.atoms[i].card) break;
        zi -= digits[i] * z_stride[i];
        yi -= digits[i] * y_stride[i];
        digits[i] = 0;
      }
    }
  }
  return r;
}

Morphism conditional(const Morphism& f, const std::vector<std::string>& on) {
  std::vector<int> pos;
  for (const auto& n : on) {
    int p = f.cod.find(n);
    if (p < 0) throw IndexError("conditional: unknown atom " + n);
    pos.push_back(p);
  }
  return conditional_positions(f, pos);
}

Morphism soft_conditional_positions(const Morphism& f, const std::vector<int>& on,
                                    const Morphism& evidence, ConditioningMode mode) {
  if (mode == ConditioningMode::upper) {
    if (!evidence.is_effect()) throw ShapeError("upper conditioning expects an effect");
    return normalize(contract(f, on, evidence));
  }
  if (!evidence.is_state()) throw ShapeError("lower conditioning expects a state");
  Morphism c = conditional_positions(f, on);
  // The conditioned atoms sit at the tail of c's domain.
  std::vector<int> tail;
  for (size_t i = f.dom.natoms(); i < c.dom.natoms(); ++i) tail.push_back(static_cast<int>(i));
  return plug(c, tail, evidence);
}

Morphism soft_conditional(const Morphism& f, const std::vector<std::string>& on,
                          const Morphism& evidence, ConditioningMode mode) {
  std::vector<int> pos;
  for (const auto& n : on) {
    int p = f.cod.find(n);
    if (p < 0) throw IndexError("soft_conditional: unknown atom " + n);
    pos.push_back(p);
  }
  return soft_conditional_positions(f, pos, evidence, mode);
}

MorphismClass classify(const Morphism& f, double tol) {
  MorphismClass c;
  int64_t nx = f.dom.card(), ny = f.cod.card();
  bool all_one = true, all_one_or_zero = true, det = true, zero = true;
  for (int64_t x = 0; x < nx; ++x) {
    const double* row = f.a.data() + x * ny;
    double s = 0.0;
    int near_one = 0;
    bool col_det = true;
    for (int64_t y = 0; y < ny; ++y) {
      double v = row[y];
      s += v;
      if (v > tol) {
        zero = false;
        if (std::abs(v - 1.0) <= tol)
          near_one++;
        else
          col_det = false;
      }
    }
    if (std::abs(s - 1.0) > tol) {
      all_one = false;
      if (s > tol) all_one_or_zero = false;
    }
    if (!col_det || near_one > 1) det = false;
  }
  c.is_channel = all_one;
  c.is_partial_channel = all_one_or_zero;
  c.is_deterministic = det;
  c.is_zero = zero;
  c.is_normalised_state = f.is_state() && all_one;
  c.is_sharp = f.is_state() && det && !zero;
  return c;
}

bool is_channel(const Morphism& f, double tol) { return classify(f, tol).is_channel; }
bool is_partial_channel(const Morphism& f, double tol) {
  return classify(f, tol).is_partial_channel;
}
bool is_deterministic(const Morphism& f, double tol) {
  return classify(f, tol).is_deterministic;
}

Dilation functional_dilation(const Morphism& c) {
  if (!is_channel(c)) throw ValidationError("functional_dilation: input is not a channel");
  if (is_deterministic(c)) {
    return Dilation{c, FinObject::unit(), scalar(1.0)};
  }
  int64_t nx = c.dom.card(), ny = c.cod.card();
  // U holds one output value per input value: a table of the random function.
  double log_card = static_cast<double>(nx) * std::log2(static_cast<double>(ny));
  if (log_card > 26.0) throw BudgetError("functional_dilation: noise space too large");
  int64_t ucard = 1;
  for (int64_t i = 0; i < nx; ++i) ucard *= ny;
  FinObject U = FinObject::single("U", ucard);

  Morphism lambda(FinObject::unit(), U);
  for (int64_t u = 0; u < ucard; ++u) {
    double p = 1.0;
    int64_t rem = u;
    // digit for input x sits at significance nx-1-x
    for (int64_t x = nx - 1; x >= 0; --x) {
      int64_t yx = rem % ny;
      rem /= ny;
      p *= c.at(x, yx);
      if (p == 0.0) break;
    }
    lambda.at(0, u) = p;
  }

  Morphism f(tensor(c.dom, U), c.cod);
  for (int64_t x = 0; x < nx; ++x) {
    int64_t high = nx - 1 - x;
    int64_t div = 1;
    for (int64_t i = 0; i < high; ++i) div *= ny;
    for (int64_t u = 0; u < ucard; ++u) {
      int64_t yx = (u / div) % ny;
      f.at(x * ucard + u, yx) = 1.0;
    }
  }
  return Dilation{std::move(f), std::move(U), std::move(lambda)};
}

Morphism reorder_cod(const Morphism& f, const std::vector<int>& order) {
  if (order.size() != f.cod.natoms()) throw ShapeError("reorder_cod: arity mismatch");
  FinObject new_cod = select_atoms(f.cod, order);
  Morphism r(f.dom, new_cod);
  size_t m = f.cod.natoms();
  // new_stride[old position] = stride in the new flat index
  std::vector<int64_t> new_stride(m, 0);
  {
    int64_t s = 1;
    for (size_t i = order.size(); i-- > 0;) {
      new_stride[order[i]] = s;
      s *= f.cod.atoms[order[i]].card;
    }
  }
  int64_t nx = f.dom.card(), ny = f.cod.card();
  std::vector<int64_t> digits(m, 0);
  for (int64_t x = 0; x < nx; ++x) {
    std::fill(digits.begin(), digits.end(), 0);
    int64_t ni = 0;
    const double* frow = f.a.data() + x * ny;
    double* rrow = r.a.data() + x * ny;
    for (int64_t l = 0;; ++l) {
      rrow[ni] = frow[l];
      if (l + 1 >= ny) break;
      for (size_t i = m; i-- > 0;) {
        digits[i]++;
        ni += new_stride[i];
        if (digits[i] < f.cod.atoms[i].card) break;
        ni -= digits[i] * new_stride[i];
        digits[i] = 0;
      }
    }
  }
  return r;
}

Morphism reorder_dom(const Morphism& f, const std::vector<int>& order) {
  if (order.size() != f.dom.natoms()) throw ShapeError("reorder_dom: arity mismatch");
  FinObject new_dom = select_atoms(f.dom, order);
  Morphism r(new_dom, f.cod);
  size_t m = f.dom.natoms();
  std::vector<int64_t> new_stride(m, 0);
  {
    int64_t s = 1;
    for (size_t i = order.size(); i-- > 0;) {
      new_stride[order[i]] = s;
      s *= f.dom.atoms[order[i]].card;
    }
  }
  int64_t nx = f.dom.card(), ny = f.cod.card();
  std::vector<int64_t> digits(m, 0);
  int64_t ni = 0;
  for (int64_t x = 0;; ++x) {
    const double* src = f.a.data() + x * ny;
    double* dst = r.a.data() + ni * ny;
    for (int64_t y = 0; y < ny; ++y) dst[y] = src[y];
    if (x + 1 >= nx) break;
    for (size_t i = m; i-- > 0;) {
      digits[i]++;
      ni += new_stride[i];
      if (digits[i] < f.dom.atoms[i].card) break;
      ni -= digits[i] * new_stride[i];
      digits[i] = 0;
    }
  }
  return r;
}

double max_abs_diff(const Morphism& f, const Morphism& g) {
  if (f.dom.card() != g.dom.card() || f.cod.card() != g.cod.card())
    throw ShapeError("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (size_t i = 0; i < f.a.size(); ++i) d = std::max(d, std::abs(f.a[i] - g.a[i]));
  return d;
}

bool approx_equal(const Morphism& f, const Morphism& g, double tol) {
  return max_abs_diff(f, g) <= tol;
}

double column_sum(const Morphism& f, int64_t x) {
  double s = 0.0;
  int64_t ny = f.cod.card();
  const double* row = f.a.data() + x * ny;
  for (int64_t y = 0; y < ny; ++y) s += row[y];
  return s;
}

}  // namespace causal
