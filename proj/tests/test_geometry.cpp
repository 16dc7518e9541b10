#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <dualfusion/geometry.hpp>

#include "support.hpp"

using namespace dualfusion;

TEST_CASE("box validity") {
  CHECK(box_valid(Box{0, 0, 1, 1}));
  CHECK_FALSE(box_valid(Box{0, 0, 0, 1}));
  CHECK_FALSE(box_valid(Box{0, 0, 1, 0}));
  CHECK_FALSE(box_valid(Box{5, 5, 4, 6}));
  CHECK_FALSE(box_valid(Box{0, 0, std::nan(""), 1}));
  CHECK_FALSE(box_valid(Box{0, 0, std::numeric_limits<double>::infinity(), 1}));
}

TEST_CASE("iou and ioa on hand-computed boxes") {
  const Box a{0, 0, 10, 10};
  SECTION("identical boxes") {
    CHECK(iou(a, a) == 1.0);
    CHECK(ioa(a, a) == 1.0);
  }
  SECTION("disjoint boxes") {
    const Box b{20, 20, 30, 30};
    CHECK(iou(a, b) == 0.0);
    CHECK(ioa(a, b) == 0.0);
    CHECK(ioa(b, a) == 0.0);
  }
  SECTION("touching edges count as disjoint") {
    const Box b{10, 0, 20, 10};
    CHECK(iou(a, b) == 0.0);
    CHECK(ioa(a, b) == 0.0);
  }
  SECTION("half overlap") {
    const Box b{5, 0, 15, 10};
    CHECK(iou(a, b) == Catch::Approx(50.0 / 150.0).epsilon(1e-14));
    CHECK(ioa(a, b) == 0.5);
    CHECK(ioa(b, a) == 0.5);
  }
  SECTION("containment is asymmetric") {
    const Box small{2, 2, 4, 4};
    CHECK(ioa(small, a) == 1.0);
    CHECK(ioa(a, small) == Catch::Approx(4.0 / 100.0).epsilon(1e-14));
    CHECK(iou(small, a) == Catch::Approx(4.0 / 100.0).epsilon(1e-14));
  }
}

TEST_CASE("iou and ioa match the cell-counting oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const Box a = support::random_int_box(rng);
    const Box b = support::random_int_box(rng);
    INFO("a=(" << a.x1 << "," << a.y1 << "," << a.x2 << "," << a.y2 << ") b=("
               << b.x1 << "," << b.y1 << "," << b.x2 << "," << b.y2 << ")");
    CHECK(std::fabs(iou(a, b) - support::oracle_iou(a, b)) < 1e-12);
    CHECK(std::fabs(ioa(a, b) - support::oracle_ioa(a, b)) < 1e-12);
    CHECK(std::fabs(ioa(b, a) - support::oracle_ioa(b, a)) < 1e-12);
  }
}

TEST_CASE("pairwise_ioa matches elementwise ioa and handles empties") {
  std::mt19937_64 rng(7);
  std::vector<Box> p, q;
  for (int i = 0; i < 4; ++i) p.push_back(support::random_int_box(rng));
  for (int i = 0; i < 3; ++i) q.push_back(support::random_int_box(rng));
  const auto m = pairwise_ioa(p, q);
  REQUIRE(m.size() == 4);
  for (std::size_t i = 0; i < p.size(); ++i) {
    REQUIRE(m[i].size() == 3);
    for (std::size_t j = 0; j < q.size(); ++j) {
      CHECK(m[i][j] == ioa(p[i], q[j]));
    }
  }
  CHECK(pairwise_ioa({}, q).empty());
  const auto rows = pairwise_ioa(p, {});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].empty());
}
