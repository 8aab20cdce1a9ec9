#include "causal/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

namespace causal {
namespace {

constexpr size_t kMaxVertices = 32;

int find_name(const std::vector<std::string>& names, const std::string& name) {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

void check_names(const std::vector<std::string>& names) {
  if (names.size() > kMaxVertices)
    throw ValidationError("graph exceeds " + std::to_string(kMaxVertices) + " vertices");
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw ValidationError("empty vertex name");
    for (size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j]) throw ValidationError("duplicate vertex name: " + names[i]);
  }
}

void check_index(const Dag& g, int v) {
  if (v < 0 || v >= static_cast<int>(g.n())) throw IndexError("vertex index out of range");
}

std::vector<bool> to_mask(size_t n, const std::vector<int>& vs) {
  std::vector<bool> m(n, false);
  for (int v : vs) {
    if (v < 0 || v >= static_cast<int>(n)) throw IndexError("vertex index out of range");
    m[v] = true;
  }
  return m;
}

// Fresh name: base if unused, else base~2, base~3, ...
std::string fresh_name(const std::vector<std::string>& taken, const std::string& base) {
  if (find_name(taken, base) < 0) return base;
  int k = 2;
  while (true) {
    std::string cand = base + "~" + std::to_string(k);
    if (find_name(taken, cand) < 0) return cand;
    ++k;
  }
}

}  // namespace

int Dag::index_of(const std::string& name) const { return find_name(vertices, name); }

int Dag::require(const std::string& name) const {
  int i = index_of(name);
  if (i < 0) throw IndexError("unknown vertex: " + name);
  return i;
}

bool Dag::has_edge(int a, int b) const {
  for (const auto& e : edges)
    if (e.first == a && e.second == b) return true;
  return false;
}

std::vector<int> Dag::parents(int v) const {
  check_index(*this, v);
  std::vector<int> out;
  for (const auto& e : edges)
    if (e.second == v) out.push_back(e.first);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> Dag::children(int v) const {
  check_index(*this, v);
  std::vector<int> out;
  for (const auto& e : edges)
    if (e.first == v) out.push_back(e.second);
  std::sort(out.begin(), out.end());
  return out;
}

int Admg::index_of(const std::string& name) const { return find_name(vertices, name); }

int Admg::require(const std::string& name) const {
  int i = index_of(name);
  if (i < 0) throw IndexError("unknown vertex: " + name);
  return i;
}

std::vector<int> Admg::parents(int v) const { return directed_part().parents(v); }

std::vector<int> Admg::children(int v) const { return directed_part().children(v); }

std::vector<int> Admg::siblings(int v) const {
  if (v < 0 || v >= static_cast<int>(n())) throw IndexError("vertex index out of range");
  std::vector<int> out;
  for (const auto& e : bidirected) {
    if (e.first == v) out.push_back(e.second);
    if (e.second == v) out.push_back(e.first);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Dag Admg::directed_part() const { return Dag{vertices, directed}; }

Dag make_dag(std::vector<std::string> vertices,
             const std::vector<std::pair<std::string, std::string>>& edges) {
  check_names(vertices);
  Dag g;
  g.vertices = std::move(vertices);
  for (const auto& e : edges) {
    int a = g.require(e.first), b = g.require(e.second);
    if (a == b) throw ValidationError("self-loop at " + e.first);
    if (!g.has_edge(a, b)) g.edges.emplace_back(a, b);
  }
  std::sort(g.edges.begin(), g.edges.end());
  topological_order(g);  // throws on cycle
  return g;
}

Admg make_admg(std::vector<std::string> vertices,
               const std::vector<std::pair<std::string, std::string>>& directed,
               const std::vector<std::pair<std::string, std::string>>& bidirected) {
  Dag d = make_dag(std::move(vertices), directed);
  Admg a;
  a.vertices = std::move(d.vertices);
  a.directed = std::move(d.edges);
  for (const auto& e : bidirected) {
    int x = a.require(e.first), y = a.require(e.second);
    if (x == y) throw ValidationError("bidirected self-loop at " + e.first);
    auto p = std::minmax(x, y);
    std::pair<int, int> key{p.first, p.second};
    if (std::find(a.bidirected.begin(), a.bidirected.end(), key) == a.bidirected.end())
      a.bidirected.push_back(key);
  }
  std::sort(a.bidirected.begin(), a.bidirected.end());
  return a;
}

OpenDag make_open_dag(Dag g, const std::vector<std::string>& inputs,
                      const std::vector<std::string>& outputs) {
  OpenDag od;
  od.dag = std::move(g);
  for (const auto& name : inputs) {
    int v = od.dag.require(name);
    if (!od.dag.parents(v).empty())
      throw ValidationError("input vertex has parents: " + name);
    if (std::find(od.inputs.begin(), od.inputs.end(), v) != od.inputs.end())
      throw ValidationError("duplicate input: " + name);
    od.inputs.push_back(v);
  }
  for (const auto& name : outputs) {
    int v = od.dag.require(name);
    if (std::find(od.outputs.begin(), od.outputs.end(), v) != od.outputs.end())
      throw ValidationError("duplicate output: " + name);
    od.outputs.push_back(v);
  }
  return od;
}

std::vector<int> topological_order(const Dag& g) {
  size_t n = g.n();
  std::vector<int> indeg(n, 0);
  for (const auto& e : g.edges) ++indeg[e.second];
  // Min-heap on vertex name for deterministic tie-breaking.
  auto cmp = [&](int a, int b) { return g.vertices[a] > g.vertices[b]; };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
  for (size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push(static_cast<int>(v));
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (const auto& e : g.edges)
      if (e.first == v && --indeg[e.second] == 0) ready.push(e.second);
  }
  if (order.size() != n) throw ValidationError("graph has a directed cycle");
  return order;
}

std::vector<int> descendants(const Dag& g, int v) {
  check_index(g, v);
  std::vector<bool> seen(g.n(), false);
  std::vector<int> stack{v};
  seen[v] = true;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int c : g.children(u))
      if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
  }
  std::vector<int> out;
  for (size_t i = 0; i < g.n(); ++i)
    if (seen[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> ancestors(const Dag& g, int v) {
  check_index(g, v);
  std::vector<bool> seen(g.n(), false);
  std::vector<int> stack{v};
  seen[v] = true;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int p : g.parents(u))
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
  }
  std::vector<int> out;
  for (size_t i = 0; i < g.n(); ++i)
    if (seen[i]) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

void check_disjoint(const std::vector<bool>& a, const std::vector<bool>& b,
                    const char* what) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] && b[i]) throw ValidationError(std::string("d-separation sets overlap: ") + what);
}

}  // namespace

bool d_separated(const Dag& g, const std::vector<int>& Y, const std::vector<int>& Z,
                 const std::vector<int>& W) {
  size_t n = g.n();
  auto ym = to_mask(n, Y), zm = to_mask(n, Z), wm = to_mask(n, W);
  check_disjoint(ym, zm, "Y,Z");
  check_disjoint(ym, wm, "Y,W");
  check_disjoint(zm, wm, "Z,W");

  // Vertices with a descendant in W (including W itself): active colliders.
  std::vector<bool> anc_w(n, false);
  {
    std::vector<int> stack;
    for (int w : W) {
      anc_w[w] = true;
      stack.push_back(w);
    }
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int p : g.parents(v))
        if (!anc_w[p]) {
          anc_w[p] = true;
          stack.push_back(p);
        }
    }
  }

  // Ball passing over (vertex, arrival direction). "up" means the edge was
  // traversed child-to-parent, "down" parent-to-child.
  std::vector<bool> vis_up(n, false), vis_down(n, false);
  std::vector<std::pair<int, bool>> stack;  // (vertex, arrived_up)
  for (int y : Y)
    if (!vis_up[y]) {
      vis_up[y] = true;
      stack.emplace_back(y, true);
    }
  while (!stack.empty()) {
    auto [v, up] = stack.back();
    stack.pop_back();
    if (zm[v]) return false;
    if (up) {
      if (wm[v]) continue;
      for (int p : g.parents(v))
        if (!vis_up[p]) {
          vis_up[p] = true;
          stack.emplace_back(p, true);
        }
      for (int c : g.children(v))
        if (!vis_down[c]) {
          vis_down[c] = true;
          stack.emplace_back(c, false);
        }
    } else {
      if (!wm[v])
        for (int c : g.children(v))
          if (!vis_down[c]) {
            vis_down[c] = true;
            stack.emplace_back(c, false);
          }
      if (anc_w[v])
        for (int p : g.parents(v))
          if (!vis_up[p]) {
            vis_up[p] = true;
            stack.emplace_back(p, true);
          }
    }
  }
  return true;
}

bool d_separated(const Dag& g, const std::vector<std::string>& Y,
                 const std::vector<std::string>& Z, const std::vector<std::string>& W) {
  auto resolve = [&](const std::vector<std::string>& names) {
    std::vector<int> out;
    out.reserve(names.size());
    for (const auto& s : names) out.push_back(g.require(s));
    return out;
  };
  return d_separated(g, resolve(Y), resolve(Z), resolve(W));
}

namespace {

// Enumerate simple skeleton paths from src and test the blocking condition
// on every intermediate triple; used as an independent cross-check.
bool active_path_exists(const Dag& g, int src, const std::vector<bool>& zm,
                        const std::vector<bool>& wm, const std::vector<bool>& anc_w,
                        std::vector<int>& path, std::vector<bool>& on_path) {
  int v = path.back();
  if (zm[v] && path.size() >= 2) {
    // Check every intermediate vertex of the completed path.
    bool active = true;
    for (size_t i = 1; i + 1 < path.size(); ++i) {
      int a = path[i - 1], b = path[i], c = path[i + 1];
      bool collider = g.has_edge(a, b) && g.has_edge(c, b);
      if (collider ? !anc_w[b] : wm[b]) {
        active = false;
        break;
      }
    }
    if (active) return true;
    // A longer continuation through z could still be active; fall through.
  }
  for (size_t u = 0; u < g.n(); ++u) {
    int ui = static_cast<int>(u);
    if (on_path[u]) continue;
    if (!g.has_edge(v, ui) && !g.has_edge(ui, v)) continue;
    path.push_back(ui);
    on_path[u] = true;
    bool hit = active_path_exists(g, src, zm, wm, anc_w, path, on_path);
    on_path[u] = false;
    path.pop_back();
    if (hit) return true;
  }
  return false;
}

}  // namespace

bool d_separated_oracle(const Dag& g, const std::vector<int>& Y, const std::vector<int>& Z,
                        const std::vector<int>& W) {
  size_t n = g.n();
  auto ym = to_mask(n, Y), zm = to_mask(n, Z), wm = to_mask(n, W);
  check_disjoint(ym, zm, "Y,Z");
  check_disjoint(ym, wm, "Y,W");
  check_disjoint(zm, wm, "Z,W");
  std::vector<bool> anc_w(n, false);
  for (size_t v = 0; v < n; ++v)
    for (int d : descendants(g, static_cast<int>(v)))
      if (wm[d]) anc_w[v] = true;
  for (int y : Y) {
    std::vector<int> path{y};
    std::vector<bool> on_path(n, false);
    on_path[y] = true;
    if (active_path_exists(g, y, zm, wm, anc_w, path, on_path)) return false;
  }
  return true;
}

namespace {

// Observed vertices reachable from v by directed paths whose intermediate
// vertices are all latent. v itself is not included.
std::vector<bool> latent_reach(const Dag& g, int v, const std::vector<bool>& obs) {
  std::vector<bool> hit(g.n(), false), seen(g.n(), false);
  std::vector<int> stack{v};
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int c : g.children(u)) {
      if (obs[c]) {
        hit[c] = true;
      } else if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
    }
  }
  return hit;
}

}  // namespace

Admg latent_projection(const Dag& g, const std::vector<int>& observed) {
  size_t n = g.n();
  auto obs = to_mask(n, observed);
  {
    std::vector<bool> dup(n, false);
    for (int v : observed) {
      if (dup[v]) throw ValidationError("duplicate observed vertex");
      dup[v] = true;
    }
  }
  Admg out;
  std::vector<int> rank(n, -1);
  for (int v : observed) {
    rank[v] = static_cast<int>(out.vertices.size());
    out.vertices.push_back(g.vertices[v]);
  }
  for (int a : observed) {
    auto hit = latent_reach(g, a, obs);
    for (int b : observed)
      if (hit[b]) out.directed.emplace_back(rank[a], rank[b]);
  }
  for (size_t l = 0; l < n; ++l) {
    if (obs[l]) continue;
    auto hit = latent_reach(g, static_cast<int>(l), obs);
    for (int a : observed)
      for (int b : observed) {
        if (!(hit[a] && hit[b]) || rank[a] >= rank[b]) continue;
        std::pair<int, int> key{rank[a], rank[b]};
        if (std::find(out.bidirected.begin(), out.bidirected.end(), key) ==
            out.bidirected.end())
          out.bidirected.push_back(key);
      }
  }
  std::sort(out.directed.begin(), out.directed.end());
  out.directed.erase(std::unique(out.directed.begin(), out.directed.end()),
                     out.directed.end());
  std::sort(out.bidirected.begin(), out.bidirected.end());
  return out;
}

Admg latent_projection(const Dag& g, const std::vector<std::string>& observed) {
  std::vector<int> idx;
  idx.reserve(observed.size());
  for (const auto& s : observed) idx.push_back(g.require(s));
  return latent_projection(g, idx);
}

namespace {

// Maximal cliques of the bidirected graph, bitmask Bron-Kerbosch.
void bron_kerbosch(uint32_t r, uint32_t p, uint32_t x, const std::vector<uint32_t>& adj,
                   std::vector<uint32_t>& out) {
  if (p == 0 && x == 0) {
    if (r) out.push_back(r);
    return;
  }
  uint32_t iter = p;
  while (iter) {
    int v = __builtin_ctz(iter);
    uint32_t bit = uint32_t(1) << v;
    iter &= ~bit;
    bron_kerbosch(r | bit, p & adj[v], x & adj[v], adj, out);
    p &= ~bit;
    x |= bit;
  }
}

std::vector<std::vector<int>> root_groups(const Admg& a, RootifyMethod method) {
  std::vector<std::vector<int>> groups;
  if (method == RootifyMethod::rho) {
    for (const auto& e : a.bidirected) groups.push_back({e.first, e.second});
    return groups;
  }
  std::vector<uint32_t> adj(a.n(), 0);
  uint32_t active = 0;
  for (const auto& e : a.bidirected) {
    adj[e.first] |= uint32_t(1) << e.second;
    adj[e.second] |= uint32_t(1) << e.first;
    active |= (uint32_t(1) << e.first) | (uint32_t(1) << e.second);
  }
  std::vector<uint32_t> cliques;
  bron_kerbosch(0, active, 0, adj, cliques);
  for (uint32_t c : cliques) {
    if (__builtin_popcount(c) < 2) continue;
    std::vector<int> members;
    for (size_t v = 0; v < a.n(); ++v)
      if (c & (uint32_t(1) << v)) members.push_back(static_cast<int>(v));
    groups.push_back(std::move(members));
  }
  // Deterministic order: sort groups by their sorted member-name tuple.
  std::sort(groups.begin(), groups.end(), [&](const auto& g1, const auto& g2) {
    std::vector<std::string> n1, n2;
    for (int v : g1) n1.push_back(a.vertices[v]);
    for (int v : g2) n2.push_back(a.vertices[v]);
    std::sort(n1.begin(), n1.end());
    std::sort(n2.begin(), n2.end());
    return n1 < n2;
  });
  return groups;
}

std::string root_name(const Admg& a, const std::vector<int>& group) {
  std::vector<std::string> names;
  for (int v : group) names.push_back(a.vertices[v]);
  std::sort(names.begin(), names.end());
  std::string base = "R_{";
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) base += ",";
    base += names[i];
  }
  base += "}";
  return base;
}

}  // namespace

Dag rootify(const Admg& a, RootifyMethod method) {
  std::vector<std::string> names = a.vertices;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : a.directed)
    edges.emplace_back(a.vertices[e.first], a.vertices[e.second]);
  for (const auto& group : root_groups(a, method)) {
    std::string r = fresh_name(names, root_name(a, group));
    names.push_back(r);
    for (int v : group) edges.emplace_back(r, a.vertices[v]);
  }
  return make_dag(std::move(names), edges);
}

std::vector<std::string> rootify_roots(const Admg& a, RootifyMethod method) {
  std::vector<std::string> names = a.vertices;
  std::vector<std::string> roots;
  for (const auto& group : root_groups(a, method)) {
    std::string r = fresh_name(names, root_name(a, group));
    names.push_back(r);
    roots.push_back(r);
  }
  return roots;
}

std::vector<int> c_component(const Admg& a, int x) {
  if (x < 0 || x >= static_cast<int>(a.n())) throw IndexError("vertex index out of range");
  std::vector<bool> seen(a.n(), false);
  std::vector<int> stack{x};
  seen[x] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int s : a.siblings(v))
      if (!seen[s]) {
        seen[s] = true;
        stack.push_back(s);
      }
  }
  std::vector<int> out;
  for (size_t i = 0; i < a.n(); ++i)
    if (seen[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> c_component(const Admg& a, const std::string& x) {
  return c_component(a, a.require(x));
}

bool c_condition(const Admg& a, int x) {
  auto comp = c_component(a, x);
  for (int c : a.children(x))
    if (std::binary_search(comp.begin(), comp.end(), c)) return false;
  return true;
}

}  // namespace causal
