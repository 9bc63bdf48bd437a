#include <cmath>
#include <random>

#include "cmc/graph.hpp"
#include "doctest.h"

using namespace cmc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
std::string graph_path(const char* name) { return std::string(CMC_GRAPH_DIR) + "/" + name; }

VectorXd random_unit(std::mt19937& rng, int d) {
  std::normal_distribution<double> N;
  VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = N(rng);
  return v.normalized();
}
}  // namespace

TEST_CASE("bundled example graphs are central and pre-embedded") {
  for (const char* name : {"antipodal.json", "star120.json", "square_rays.json", "dumbbell.json"}) {
    WeightedGraph g = WeightedGraph::load(graph_path(name));
    BalanceReport r = balance_check(g);
    CHECK(r.balanced);
    CHECK(r.central);
    CHECK(r.pre_embedded);
  }
  BalanceReport star = balance_check(WeightedGraph::load(graph_path("star120.json")));
  CHECK(star.summary().rfind("balanced: yes, central: yes", 0) == 0);
}

TEST_CASE("orientation and attachments") {
  WeightedGraph g = WeightedGraph::load(graph_path("square_rays.json"));
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const Edge& E = g.edges[e];
    CHECK(g.vertices[E.plus].id < g.vertices[E.minus].id);
    VectorXd vp = g.direction({E.plus, e, false, 1}), vm = g.direction({E.minus, e, false, -1});
    CHECK((vp + vm).norm() <= 1e-15);
    CHECK((vp - g.v1(e)).norm() <= 1e-15);
    CHECK(g.half_length(e) == doctest::Approx(2.0));
  }
  CHECK(g.all_attachments().size() == 12u);
  for (const auto& a : g.all_attachments())
    if (!a.is_ray) CHECK(a.sign == (g.direction(a).dot(g.v1(a.element)) > 0 ? 1 : -1));
}

TEST_CASE("non-integer half-length is not central") {
  WeightedGraph g = WeightedGraph::load(graph_path("dumbbell.json"));
  g.vertices[1].pos(0) = 3.0;
  g.rays[1].dir = VectorXd::Unit(4, 0);
  BalanceReport r = balance_check(g);
  CHECK(r.balanced);
  CHECK_FALSE(r.central);
  CHECK(r.summary().find("central: no (non-integer half-length") != std::string::npos);
}

TEST_CASE("pre-embedded conditions detect violations") {
  WeightedGraph g = WeightedGraph::load(graph_path("star120.json"));
  g.rays[1].dir = VectorXd::Unit(4, 0);
  CHECK_FALSE(balance_check(g).pre_embedded);
  nlohmann::json j = {{"n", 3},
                      {"vertices", {{{"id", "p"}, {"pos", {0, 0, 0, 0}}}, {{"id", "q"}, {"pos", {0, 1.5, 0, 0}}}}},
                      {"rays",
                       {{{"id", "r1"}, {"from", "p"}, {"dir", {1, 0, 0, 0}}, {"tau_hat", 1}},
                        {{"id", "r2"}, {"from", "p"}, {"dir", {-1, 0, 0, 0}}, {"tau_hat", 1}},
                        {{"id", "r3"}, {"from", "q"}, {"dir", {1, 0, 0, 0}}, {"tau_hat", 1}},
                        {{"id", "r4"}, {"from", "q"}, {"dir", {-1, 0, 0, 0}}, {"tau_hat", 1}}}}};
  BalanceReport r = balance_check(WeightedGraph::from_json(j));
  CHECK(r.central);
  CHECK_FALSE(r.pre_embedded);
}

TEST_CASE("parser rejects malformed graphs") {
  CHECK_THROWS_AS(WeightedGraph::parse("{\"n\": 3,\n \"vertices\": [\n {\"id\": \"p\" \"pos\": [0,0,0,0]}]}"), Error);
  try {
    WeightedGraph::parse("{\"n\": 3,\n \"vertices\": [\n {\"id\": \"p\" \"pos\": [0,0,0,0]}]}");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  nlohmann::json dup = {{"n", 3},
                        {"vertices", {{{"id", "p"}, {"pos", {0, 0, 0, 0}}}, {{"id", "p"}, {"pos", {1, 0, 0, 0}}}}}};
  CHECK_THROWS_AS(WeightedGraph::from_json(dup), Error);
  nlohmann::json nonunit = {{"n", 3},
                            {"vertices", {{{"id", "p"}, {"pos", {0, 0, 0, 0}}}}},
                            {"rays", {{{"id", "r"}, {"from", "p"}, {"dir", {2, 0, 0, 0}}, {"tau_hat", 1}}}}};
  CHECK_THROWS_AS(WeightedGraph::from_json(nonunit), Error);
  CHECK(WeightedGraph::from_json(nonunit, true).rays[0].dir.norm() == doctest::Approx(1.0));
  nlohmann::json badend = {{"n", 3},
                           {"vertices", {{{"id", "p"}, {"pos", {0, 0, 0, 0}}}}},
                           {"edges", {{{"id", "e7"}, {"from", "p"}, {"to", "zz"}, {"tau_hat", 1}}}}};
  try {
    WeightedGraph::from_json(badend);
    FAIL("expected structural error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Structural);
    CHECK(std::string(e.what()).find("e7") != std::string::npos);
  }
  nlohmann::json n2 = {{"n", 2}, {"vertices", {{{"id", "p"}, {"pos", {0, 0, 0}}}}}};
  CHECK_THROWS_AS(WeightedGraph::from_json(n2), Error);
  CHECK_THROWS_AS(WeightedGraph::load("/nonexistent/graph.json"), Error);
}

TEST_CASE("json round trip") {
  WeightedGraph g = WeightedGraph::load(graph_path("square_rays.json"));
  WeightedGraph h = WeightedGraph::from_json(g.to_json());
  CHECK(h.to_json() == g.to_json());
}

TEST_CASE("d-hat scales linearly with the weights") {
  WeightedGraph g = WeightedGraph::load(graph_path("star120.json"));
  g.rays[0].tau_hat = 1.3;
  auto d1 = dhat(g);
  for (auto& r : g.rays) r.tau_hat *= 2.5;
  auto d2 = dhat(g);
  CHECK((d2[0] - 2.5 * d1[0]).norm() <= 1e-15);
  double c = (sphere_volume(2) / 3) / std::sqrt(sphere_volume(3) / 4);
  CHECK(d1[0](0) == doctest::Approx(c * 0.3));
}

TEST_CASE("rotations") {
  VectorXd e1 = VectorXd::Unit(4, 0), e2 = VectorXd::Unit(4, 1), e3 = VectorXd::Unit(4, 2);
  CHECK((rotate_to(e1, e1) - MatrixXd::Identity(4, 4)).norm() <= 1e-15);
  CHECK_THROWS_AS(rotate_to(e1, e2), Error);
  VectorXd y = (e1 + 1e-3 * e2).normalized();
  MatrixXd R = rotate_to(e1, y);
  CHECK((R * e1 - y).norm() <= 1e-15);
  CHECK((R * e3 - e3).norm() <= 1e-15);
  std::mt19937 rng(11);
  for (int i = 0; i < 100; ++i) {
    VectorXd x = random_unit(rng, 5), w = random_unit(rng, 5);
    w = (w - w.dot(x) * x).normalized();
    VectorXd z = std::cos(M_PI / 6) * x + std::sin(M_PI / 6) * w;
    MatrixXd Q = rotate_to(x, z);
    CHECK((Q.transpose() * Q - MatrixXd::Identity(5, 5)).norm() <= 1e-12);
    CHECK((Q * x - z).norm() <= 1e-12);
    CHECK(Q.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((rotate_to(x, z) * rotate_to(z, x) - MatrixXd::Identity(5, 5)).norm() <= 1e-12);
    VectorXd q = random_unit(rng, 5);
    q -= q.dot(x) * x + q.dot(w) * w;
    CHECK((Q * q - q).norm() <= 1e-12);
  }
}

TEST_CASE("frames") {
  std::mt19937 rng(3);
  for (int i = 0; i < 50; ++i) {
    VectorXd v = random_unit(rng, 4);
    MatrixXd F = complete_frame(v);
    CHECK((F.transpose() * F - MatrixXd::Identity(4, 4)).norm() <= 1e-12);
    CHECK(F.determinant() == doctest::Approx(1.0));
    CHECK((F.col(0) - v).norm() <= 1e-15);
    CHECK((propagate_frame(F, v) - F).norm() <= 1e-14);
  }
  MatrixXd F = complete_frame(VectorXd::Unit(4, 0));
  VectorXd v1 = (std::cos(0.2) * F.col(0) + std::sin(0.2) * F.col(1));
  MatrixXd G = propagate_frame(F, v1);
  CHECK((G.col(2) - F.col(2)).norm() <= 1e-15);
  CHECK((G.col(3) - F.col(3)).norm() <= 1e-15);
  VectorXd mid = (std::cos(0.1) * F.col(0) + std::sin(0.1) * F.col(1));
  CHECK((propagate_frame(propagate_frame(F, mid), v1) - G).norm() <= 1e-12);
}

TEST_CASE("family: identity, unbalancing, flexibility") {
  WeightedGraph sq = WeightedGraph::load(graph_path("square_rays.json"));
  std::vector<VectorXd> d0(4, VectorXd::Zero(4));
  FamilyPoint id = realize_family(sq, d0, {0, 0, 0, 0});
  CHECK(id.realized.to_json() == sq.to_json());

  WeightedGraph star = WeightedGraph::load(graph_path("star120.json"));
  std::vector<VectorXd> dt{1e-3 * VectorXd::Unit(4, 0)};
  FamilyPoint s = realize_family(star, dt, {});
  CHECK((dhat(s.unbalanced)[0] - dt[0]).norm() <= 1e-8);
  for (const auto& r : s.realized.rays) CHECK(r.dir.norm() == doctest::Approx(1.0).epsilon(1e-14));

  WeightedGraph db = WeightedGraph::load(graph_path("dumbbell.json"));
  FamilyPoint f = realize_family(db, {VectorXd::Zero(4), VectorXd::Zero(4)}, {0.01});
  CHECK(f.realized.half_length(0) == doctest::Approx(2.01).epsilon(1e-12));
  CHECK(f.realized.vertices[0].pos(0) == doctest::Approx(-0.01).epsilon(1e-10));
  CHECK(f.realized.vertices[1].pos(0) == doctest::Approx(4.01).epsilon(1e-10));

  // Out-of-plane components and in-plane components normal to the rays are realizable
  // with fixed weights; components along the rays are tied to the single flex mode.
  std::vector<VectorXd> dq(4);
  for (int p = 0; p < 4; ++p) {
    VectorXd perp = VectorXd::Zero(4);
    perp.head(2) = Eigen::Vector2d(-sq.rays[p].dir(1), sq.rays[p].dir(0));
    dq[p] = 1e-3 * (VectorXd::Unit(4, 2 + p % 2) + 0.5 * perp);
  }
  FamilyPoint g = realize_family(sq, dq, {1e-3, -2e-3, 5e-4, 0.0});
  CHECK(g.dhat_residual <= 1e-8);
  CHECK(g.length_residual <= 1e-10);
  for (std::size_t el = 0; el < sq.element_count(); ++el) {
    CHECK((g.frames[el].transpose() * g.frames[el] - MatrixXd::Identity(4, 4)).norm() <= 1e-12);
    CHECK((g.frames[el].col(0) - g.realized.v1(el)).norm() <= 1e-14);
  }
  CHECK_THROWS_AS(realize_family(sq, dq, {1.0, 0, 0, 0}), Error);
}

TEST_CASE("family realization failure is reported") {
  // A closed cycle cannot be unbalanced with nonzero total d~.
  nlohmann::json j = {{"n", 3},
                      {"vertices", {{{"id", "a"}, {"pos", {0, 0, 0, 0}}}, {{"id", "b"}, {"pos", {2, 0, 0, 0}}}}},
                      {"edges", {{{"id", "e"}, {"from", "a"}, {"to", "b"}, {"tau_hat", 1}}}}};
  WeightedGraph g = WeightedGraph::from_json(j);
  CHECK_THROWS_AS(realize_family(g, {1e-3 * VectorXd::Unit(4, 1), 1e-3 * VectorXd::Unit(4, 1)}, {0.0}), Error);
  // Same-sign unbalancing along all four rays of the square is outside the fixed-weight family.
  WeightedGraph sq = WeightedGraph::load(graph_path("square_rays.json"));
  std::vector<VectorXd> along;
  for (const auto& r : sq.rays) along.push_back(1e-3 * r.dir);
  try {
    realize_family(sq, along, {0, 0, 0, 0});
    FAIL("expected family realization error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FamilyRealization);
  }
}

TEST_CASE("edge targets") {
  WeightedGraph g = WeightedGraph::load(graph_path("dumbbell.json"));
  ProfileCache cache;
  double tb = 1e-4;
  auto P = cache.get(3, tb);
  Dislocation z = Dislocation::zero(g);
  EdgeTargets T = edge_targets(g, tb, z, 10.0, cache);
  CHECK(T.elltilde[0] == doctest::Approx(P->phat() * 2).epsilon(1e-12));
  CHECK((T.frames[0] - MatrixXd::Identity(4, 4)).norm() <= 1e-15);
  z.plus[0] = 5e-4 * VectorXd::Unit(4, 1);
  z.minus[0] = 5e-4 * VectorXd::Unit(4, 1);
  T = edge_targets(g, tb, z, 10.0, cache);
  CHECK(T.elltilde[0] == doctest::Approx(P->phat() * 2).epsilon(1e-12));
  CHECK((T.frames[0] - MatrixXd::Identity(4, 4)).norm() <= 1e-15);
  z.minus[0].setZero();
  T = edge_targets(g, tb, z, 10.0, cache);
  double lt = (2 + 2 * P->phat()) * 2;
  CHECK(T.elltilde[0] == doctest::Approx(0.5 * std::sqrt(lt * lt + 25e-8) - 2).epsilon(1e-12));
  CHECK((T.frames[0].col(0) - (lt * VectorXd::Unit(4, 0) - z.plus[0]).normalized()).norm() <= 1e-14);
  z.plus[0] = 2e-3 * VectorXd::Unit(4, 1);
  CHECK_THROWS_AS(edge_targets(g, tb, z, 10.0, cache), Error);
}
