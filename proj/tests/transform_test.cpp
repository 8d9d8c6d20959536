// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "survscan/error.hpp"
#include "survscan/transform.hpp"
#include "test_helpers.hpp"

using survscan::Error;
using survscan::RigidTransform;
using survscan::Vec3;

namespace {

RigidTransform random_transform(std::mt19937& g) {
  RigidTransform t;
  t.rotation = testutil::random_rotation(g);
  t.translation = Vec3(testutil::uniform(g, -50, 50),
                       testutil::uniform(g, -50, 50),
                       testutil::uniform(g, -50, 50));
  return t;
}

}  // namespace

TEST_CASE("compose applies the right transform first") {
  std::mt19937 g(11);
  for (int rep = 0; rep < 20; ++rep) {
    const RigidTransform a = random_transform(g);
    const RigidTransform b = random_transform(g);
    const RigidTransform ab = survscan::compose(a, b);
    for (int i = 0; i < 5; ++i) {
      const Vec3 p(testutil::uniform(g, -10, 10), testutil::uniform(g, -10, 10),
                   testutil::uniform(g, -10, 10));
      CHECK((ab.apply(p) - a.apply(b.apply(p))).norm() < 1e-10);
    }
  }
}

TEST_CASE("invert composes to the identity") {
  std::mt19937 g(12);
  for (int rep = 0; rep < 20; ++rep) {
    const RigidTransform t = random_transform(g);
    const RigidTransform id = survscan::compose(t, survscan::invert(t));
    CHECK((id.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(id.translation.norm() < 1e-9);
  }
}

TEST_CASE("rigid transforms preserve pairwise distances") {
  std::mt19937 g(13);
  const RigidTransform t = random_transform(g);
  const auto cloud = testutil::random_cloud(g, 60);
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const double before = (cloud.positions[i] - cloud.positions[0]).norm();
    const double after =
        (t.apply(cloud.positions[i]) - t.apply(cloud.positions[0])).norm();
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("validate accepts rotations and rejects improper matrices") {
  std::mt19937 g(14);
  const RigidTransform good = random_transform(g);
  CHECK_NOTHROW(good.validate());
  CHECK_NOTHROW(RigidTransform::identity().validate());

  RigidTransform scaled = good;
  scaled.rotation *= 2.0;
  CHECK_THROWS_AS(scaled.validate(), Error);

  RigidTransform mirror;
  mirror.rotation = Eigen::Vector3d(1, 1, -1).asDiagonal();
  CHECK_THROWS_AS(mirror.validate(), Error);

  RigidTransform bad_t = good;
  bad_t.translation.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad_t.validate(), Error);
}

TEST_CASE("apply_transform carries channels and controls the frame tag") {
  std::mt19937 g(15);
  survscan::PointCloud cloud = testutil::random_cloud(g, 40);
  cloud.intensities.assign(cloud.size(), 0.5f);
  cloud.colors.assign(cloud.size(), survscan::Rgb8{10, 20, 30});
  cloud.classes.assign(cloud.size(),
                       static_cast<std::uint8_t>(survscan::PointClass::kGround));
  cloud.epoch = 1700000000;
  cloud.source = "unit-test";

  const RigidTransform t = random_transform(g);

  SUBCASE("frame kept by default") {
    const survscan::PointCloud moved = survscan::apply_transform(cloud, t);
    REQUIRE(moved.size() == cloud.size());
    CHECK(moved.frame == cloud.frame);
    CHECK(moved.intensities == cloud.intensities);
    CHECK(moved.colors == cloud.colors);
    CHECK(moved.classes == cloud.classes);
    CHECK(moved.epoch == cloud.epoch);
    CHECK(moved.source == cloud.source);
    for (std::size_t i = 0; i < cloud.size(); ++i)
      CHECK((moved.positions[i] - t.apply(cloud.positions[i])).norm() == 0.0);
  }

  SUBCASE("frame replaced when requested") {
    const survscan::FrameTag frame{survscan::FrameTag::Kind::kGeoreferenced,
                                   "EPSG:25832"};
    const survscan::PointCloud moved =
        survscan::apply_transform(cloud, t, frame);
    CHECK(moved.frame == frame);
    CHECK(moved.frame.str() == "georeferenced(EPSG:25832)");
  }
}

TEST_CASE("frame tags round-trip through their string form") {
  const survscan::FrameTag local{survscan::FrameTag::Kind::kLocal, "scan-3"};
  CHECK(local.str() == "local(scan-3)");
  CHECK(survscan::FrameTag::parse("local(scan-3)") == local);
  const survscan::FrameTag geo{survscan::FrameTag::Kind::kGeoreferenced,
                               "EPSG:4979"};
  CHECK(survscan::FrameTag::parse(geo.str()) == geo);
  CHECK_THROWS_AS(survscan::FrameTag::parse("frame(x)"), Error);
  CHECK_THROWS_AS(survscan::FrameTag::parse("local(x"), Error);
}
