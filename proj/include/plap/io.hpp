#pragma once

// Plain-text mesh and solution files. Numbers are written with 17 significant
// digits so a write/read round trip is exact.
//
//   plap-mesh 1
//   sizes <h_far> <h_neck> <grading>
//   nodes <N>
//   <x> <y> <tag>                      (tag: interior | outer | particle1 | particle2)
//   triangles <M>
//   <a> <b> <c>                        (counter-clockwise, 0-based)
//   boundary_edges <K>
//   <a> <b> <triangle> <tag>
//
//   plap-solution 1
//   kind <floating | prescribed | tied | linear_aux>
//   p <p>
//   epsilon <eps>
//   pair <R> <delta> | pair none
//   T1 <value | none>
//   T2 <value | none>
//   energy <E>
//   residual <r>
//   iterations <n>
//   values <N>
//   <u_0>
//   ...

#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "plap/error.hpp"
#include "plap/mesh.hpp"
#include "plap/solver.hpp"

namespace plap {

namespace detail {

inline BoundaryTag parse_tag(const std::string& s) {
  if (s == "interior") return BoundaryTag::interior;
  if (s == "outer") return BoundaryTag::outer;
  if (s == "particle1") return BoundaryTag::particle1;
  if (s == "particle2") return BoundaryTag::particle2;
  throw IoError("unknown boundary tag '" + s + "'");
}

inline ProblemKind parse_kind(const std::string& s) {
  if (s == "floating") return ProblemKind::floating;
  if (s == "prescribed") return ProblemKind::prescribed;
  if (s == "tied") return ProblemKind::tied;
  if (s == "linear_aux") return ProblemKind::linear_aux;
  throw IoError("unknown problem kind '" + s + "'");
}

inline void expect(std::istream& is, const std::string& word) {
  std::string got;
  if (!(is >> got) || got != word) throw IoError("expected '" + word + "', found '" + got + "'");
}

template <class T>
T read_value(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) throw IoError(std::string("could not read ") + what);
  return v;
}

inline std::optional<double> read_optional(std::istream& is, const char* what) {
  std::string s;
  if (!(is >> s)) throw IoError(std::string("could not read ") + what);
  if (s == "none") return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw IoError(std::string("bad value for ") + what + ": '" + s + "'");
  }
}

}  // namespace detail

inline void write_mesh(std::ostream& os, const Mesh& m) {
  os.precision(17);
  os << "plap-mesh 1\n";
  os << "sizes " << m.h_far << ' ' << m.h_neck << ' ' << m.grading << '\n';
  os << "nodes " << m.num_nodes() << '\n';
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    os << m.nodes[i].x << ' ' << m.nodes[i].y << ' ' << to_string(m.node_tags[i]) << '\n';
  os << "triangles " << m.num_triangles() << '\n';
  for (const auto& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "boundary_edges " << m.boundary_edges.size() << '\n';
  for (const auto& e : m.boundary_edges) os << e.a << ' ' << e.b << ' ' << e.triangle << ' ' << to_string(e.tag) << '\n';
}

inline Mesh read_mesh(std::istream& is) {
  using namespace detail;
  Mesh m;
  expect(is, "plap-mesh");
  if (read_value<int>(is, "mesh version") != 1) throw IoError("unsupported mesh version");
  expect(is, "sizes");
  m.h_far = read_value<double>(is, "h_far");
  m.h_neck = read_value<double>(is, "h_neck");
  m.grading = read_value<double>(is, "grading");
  expect(is, "nodes");
  const auto n = read_value<std::size_t>(is, "node count");
  m.nodes.resize(n);
  m.node_tags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.nodes[i].x = read_value<double>(is, "node x");
    m.nodes[i].y = read_value<double>(is, "node y");
    m.node_tags[i] = parse_tag(read_value<std::string>(is, "node tag"));
  }
  expect(is, "triangles");
  const auto nt = read_value<std::size_t>(is, "triangle count");
  m.triangles.resize(nt);
  for (auto& t : m.triangles)
    for (int& v : t) {
      v = read_value<int>(is, "triangle vertex");
      if (v < 0 || static_cast<std::size_t>(v) >= n) throw IoError("triangle vertex out of range");
    }
  expect(is, "boundary_edges");
  const auto ne = read_value<std::size_t>(is, "boundary edge count");
  m.boundary_edges.resize(ne);
  for (auto& e : m.boundary_edges) {
    e.a = read_value<int>(is, "edge a");
    e.b = read_value<int>(is, "edge b");
    e.triangle = read_value<int>(is, "edge triangle");
    e.tag = parse_tag(read_value<std::string>(is, "edge tag"));
    if (e.triangle < 0 || static_cast<std::size_t>(e.triangle) >= nt) throw IoError("edge triangle out of range");
  }
  return m;
}

inline void write_solution(std::ostream& os, const DiscreteSolution& s) {
  os.precision(17);
  os << "plap-solution 1\n";
  os << "kind " << to_string(s.kind) << '\n';
  os << "p " << s.p << '\n';
  os << "epsilon " << s.epsilon << '\n';
  if (s.pair)
    os << "pair " << s.pair->radius() << ' ' << s.pair->delta() << '\n';
  else
    os << "pair none\n";
  auto opt = [&](const char* name, const std::optional<double>& v) {
    os << name << ' ';
    if (v)
      os << *v;
    else
      os << "none";
    os << '\n';
  };
  opt("T1", s.T1);
  opt("T2", s.T2);
  os << "energy " << s.energy << '\n';
  os << "residual " << s.residual << '\n';
  os << "iterations " << s.trace.iterations << '\n';
  os << "values " << s.u.size() << '\n';
  for (double v : s.u) os << v << '\n';
}

inline DiscreteSolution read_solution(std::istream& is, std::shared_ptr<const Mesh> mesh) {
  using namespace detail;
  DiscreteSolution s;
  s.mesh = std::move(mesh);
  expect(is, "plap-solution");
  if (read_value<int>(is, "solution version") != 1) throw IoError("unsupported solution version");
  expect(is, "kind");
  s.kind = parse_kind(read_value<std::string>(is, "kind"));
  expect(is, "p");
  s.p = read_value<double>(is, "p");
  expect(is, "epsilon");
  s.epsilon = read_value<double>(is, "epsilon");
  expect(is, "pair");
  if (const auto R = read_optional(is, "pair radius")) s.pair = ParticlePair(*R, read_value<double>(is, "pair delta"));
  expect(is, "T1");
  s.T1 = read_optional(is, "T1");
  expect(is, "T2");
  s.T2 = read_optional(is, "T2");
  expect(is, "energy");
  s.energy = read_value<double>(is, "energy");
  expect(is, "residual");
  s.residual = read_value<double>(is, "residual");
  expect(is, "iterations");
  s.trace.iterations = read_value<int>(is, "iterations");
  expect(is, "values");
  const auto n = read_value<std::size_t>(is, "value count");
  if (s.mesh && n != s.mesh->num_nodes()) throw IoError("solution size does not match the mesh");
  s.u.resize(n);
  for (double& v : s.u) v = read_value<double>(is, "nodal value");
  s.converged = true;
  return s;
}

inline void save_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write to " + path.string() + " failed");
}

inline std::string load_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace plap
