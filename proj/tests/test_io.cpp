#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "plap/io.hpp"

using namespace plap;

namespace {

struct Fixture {
  DomainSpec dom;
  std::shared_ptr<const Mesh> mesh;
  DiscreteSolution sol;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    DomainFamily fam;
    fam.h_far = 0.25;
    fam.clearance = 0.5;
    Fixture x{fam.domain(0.04), nullptr, {}};
    x.mesh = fam.mesh(x.dom);
    SolverConfig cfg;
    cfg.p = 2.5;
    x.sol = solve_floating(x.mesh, x.dom, cfg);
    return x;
  }();
  return f;
}

}  // namespace

TEST(MeshIo, RoundTripIsExact) {
  const Mesh& m = *fixture().mesh;
  std::ostringstream os;
  write_mesh(os, m);
  std::istringstream is(os.str());
  const Mesh r = read_mesh(is);
  ASSERT_EQ(r.num_nodes(), m.num_nodes());
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    EXPECT_EQ(r.nodes[i].x, m.nodes[i].x);
    EXPECT_EQ(r.nodes[i].y, m.nodes[i].y);
    EXPECT_EQ(r.node_tags[i], m.node_tags[i]);
  }
  EXPECT_EQ(r.triangles, m.triangles);
  ASSERT_EQ(r.boundary_edges.size(), m.boundary_edges.size());
  for (std::size_t k = 0; k < m.boundary_edges.size(); ++k) {
    EXPECT_EQ(r.boundary_edges[k].a, m.boundary_edges[k].a);
    EXPECT_EQ(r.boundary_edges[k].triangle, m.boundary_edges[k].triangle);
    EXPECT_EQ(r.boundary_edges[k].tag, m.boundary_edges[k].tag);
  }
  EXPECT_EQ(r.h_far, m.h_far);
  EXPECT_EQ(r.h_neck, m.h_neck);
  std::ostringstream again;
  write_mesh(again, r);
  EXPECT_EQ(again.str(), os.str());
}

TEST(SolutionIo, RoundTripIsExact) {
  const auto& f = fixture();
  std::ostringstream os;
  write_solution(os, f.sol);
  std::istringstream is(os.str());
  const auto r = read_solution(is, f.mesh);
  EXPECT_EQ(r.u, f.sol.u);
  EXPECT_EQ(r.kind, f.sol.kind);
  EXPECT_EQ(r.p, f.sol.p);
  EXPECT_EQ(r.epsilon, f.sol.epsilon);
  EXPECT_EQ(*r.T1, *f.sol.T1);
  EXPECT_EQ(r.pair->delta(), 0.04);
  EXPECT_EQ(r.energy, f.sol.energy);
  EXPECT_EQ(energy(r), energy(f.sol));
}

TEST(SolutionIo, MissingParticleValues) {
  const auto mesh = std::make_shared<const Mesh>(build_mesh(DomainSpec::annulus(0.5, 2.0, [](Point) { return 1.0; }), 0.3, 0.3));
  const auto sol = solve_prescribed(mesh, DomainSpec::annulus(0.5, 2.0, [](Point) { return 1.0; }), 0.0, 0.0, {});
  std::ostringstream os;
  write_solution(os, sol);
  EXPECT_NE(os.str().find("T2 none"), std::string::npos);
  EXPECT_NE(os.str().find("pair none"), std::string::npos);
  std::istringstream is(os.str());
  const auto r = read_solution(is, mesh);
  EXPECT_FALSE(r.T2.has_value());
  EXPECT_FALSE(r.pair.has_value());
}

TEST(Io, MalformedInputs) {
  std::istringstream bad_magic("plap-grid 1\n");
  EXPECT_THROW(read_mesh(bad_magic), IoError);
  std::istringstream truncated("plap-mesh 1\nsizes 0.1 0.01 0.2\nnodes 3\n0 0 interior\n");
  EXPECT_THROW(read_mesh(truncated), IoError);
  std::istringstream bad_tag("plap-mesh 1\nsizes 0.1 0.01 0.2\nnodes 1\n0 0 sideways\n");
  EXPECT_THROW(read_mesh(bad_tag), IoError);

  const auto& f = fixture();
  std::ostringstream os;
  write_solution(os, f.sol);
  std::string text = os.str();
  std::istringstream wrong_mesh(text);
  const auto other = std::make_shared<const Mesh>(build_mesh(DomainSpec::annulus(0.5, 2.0, [](Point) { return 1.0; }), 0.3, 0.3));
  EXPECT_THROW(read_solution(wrong_mesh, other), IoError);
}

TEST(Io, FilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "plap_io_test";
  std::filesystem::create_directories(dir);
  save_text(dir / "x.txt", "abc\n1 2 3\n");
  EXPECT_EQ(load_text(dir / "x.txt"), "abc\n1 2 3\n");
  EXPECT_THROW(load_text(dir / "missing.txt"), IoError);
  EXPECT_THROW(save_text(dir / "no" / "such" / "dir.txt", "x"), IoError);
  std::filesystem::remove_all(dir);
}
