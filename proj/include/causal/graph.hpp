#pragma once

#include <string>
#include <utility>
#include <vector>

#include "causal/fin_object.hpp"

namespace causal {

// Directed acyclic graph over named vertices. Vertex order is significant
// (it fixes index meaning); edges are stored as (from, to) index pairs.
struct Dag {
  std::vector<std::string> vertices;
  std::vector<std::pair<int, int>> edges;

  size_t n() const { return vertices.size(); }
  int index_of(const std::string& name) const;  // -1 if absent
  int require(const std::string& name) const;   // throws if absent
  bool has_edge(int a, int b) const;
  std::vector<int> parents(int v) const;
  std::vector<int> children(int v) const;
};

// Acyclic directed mixed graph: directed part plus unordered bidirected pairs.
struct Admg {
  std::vector<std::string> vertices;
  std::vector<std::pair<int, int>> directed;
  std::vector<std::pair<int, int>> bidirected;  // stored with first < second

  size_t n() const { return vertices.size(); }
  int index_of(const std::string& name) const;
  int require(const std::string& name) const;
  std::vector<int> parents(int v) const;
  std::vector<int> children(int v) const;
  std::vector<int> siblings(int v) const;  // bidirected neighbours
  Dag directed_part() const;
};

struct OpenDag {
  Dag dag;
  std::vector<int> inputs;   // parentless vertices opened as inputs
  std::vector<int> outputs;

  bool operator==(const OpenDag& o) const {
    return dag.vertices == o.dag.vertices && dag.edges == o.dag.edges &&
           inputs == o.inputs && outputs == o.outputs;
  }
};

// Constructors that validate (acyclicity, name resolution, dedup).
Dag make_dag(std::vector<std::string> vertices,
             const std::vector<std::pair<std::string, std::string>>& edges);
Admg make_admg(std::vector<std::string> vertices,
               const std::vector<std::pair<std::string, std::string>>& directed,
               const std::vector<std::pair<std::string, std::string>>& bidirected);
OpenDag make_open_dag(Dag g, const std::vector<std::string>& inputs,
                      const std::vector<std::string>& outputs);

// Parents-first order, ties broken lexicographically by vertex name.
std::vector<int> topological_order(const Dag& g);

// Descendant/ancestor sets along directed edges, including v itself.
std::vector<int> descendants(const Dag& g, int v);
std::vector<int> ancestors(const Dag& g, int v);

// Reachability-style d-separation check (chain/fork/collider rules).
bool d_separated(const Dag& g, const std::vector<int>& Y, const std::vector<int>& Z,
                 const std::vector<int>& W);
bool d_separated(const Dag& g, const std::vector<std::string>& Y,
                 const std::vector<std::string>& Z, const std::vector<std::string>& W);

// Literal all-simple-paths blocked checker; test oracle for d_separated.
bool d_separated_oracle(const Dag& g, const std::vector<int>& Y, const std::vector<int>& Z,
                        const std::vector<int>& W);

// Forget everything outside `observed`: directed edges through latent chains,
// bidirected edges for latent common causes.
Admg latent_projection(const Dag& g, const std::vector<int>& observed);
Admg latent_projection(const Dag& g, const std::vector<std::string>& observed);

enum class RootifyMethod { rho, rho_tilde };

// Introduce fresh latent roots realising the bidirected edges: one per edge
// (rho) or one per maximal bidirected clique (rho_tilde). Root names are
// "R_{a,b,...}" over the sorted member names, suffixed on collision.
Dag rootify(const Admg& a, RootifyMethod method);
// Names of the roots added by rootify, in the order they were appended.
std::vector<std::string> rootify_roots(const Admg& a, RootifyMethod method);

// Vertices reachable from x via bidirected edges only (includes x).
std::vector<int> c_component(const Admg& a, int x);
std::vector<int> c_component(const Admg& a, const std::string& x);
// Ch(x) does not meet the c-component of x.
bool c_condition(const Admg& a, int x);

}  // namespace causal
