// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "sdm/geo.hpp"
#include "test_util.hpp"

using namespace sdm;
using geo::GeoPoint;
using geo::haversine_km;

namespace {

std::vector<geo::IndexedPoint> random_points(std::mt19937_64& rng, std::size_t n, bool clustered) {
    std::uniform_real_distribution<double> ulat(-90, 90), ulon(-180, 180), uoff(-0.05, 0.05);
    std::vector<geo::IndexedPoint> pts;
    double clat = ulat(rng), clon = ulon(rng);
    for (std::size_t i = 0; i < n; ++i) {
        double lat, lon;
        if (clustered) {
            if (i % 50 == 0) clat = ulat(rng) * 0.9, clon = ulon(rng);
            lat = std::clamp(clat + uoff(rng), -90.0, 90.0);
            lon = std::clamp(clon + uoff(rng), -180.0, 180.0);
        } else {
            lat = ulat(rng);
            lon = ulon(rng);
        }
        pts.push_back({GeoPoint::from_degrees(lat, lon), static_cast<SurveyId>(rng() % (n * 2))});
    }
    return pts;
}

}  // namespace

TEST(Haversine, ClosedForms) {
    const auto a = GeoPoint::from_degrees(45.0, 5.0);
    EXPECT_EQ(haversine_km(a, a), 0.0);
    const double quarter = std::numbers::pi * geo::kEarthRadiusKm / 2.0;
    EXPECT_NEAR(quarter, 10007.543, 1e-3);
    EXPECT_NEAR(haversine_km(GeoPoint::from_degrees(0, 0), GeoPoint::from_degrees(90, 0)), quarter, 1e-3);
    EXPECT_NEAR(haversine_km(GeoPoint::from_degrees(0, 0), GeoPoint::from_degrees(0, 180)), 2 * quarter, 1e-3);
    EXPECT_NEAR(haversine_km(GeoPoint::from_degrees(0, 0), GeoPoint::from_degrees(0, 180)), 20015.087, 1e-3);
}

TEST(Haversine, SymmetricNonNegativeTriangle) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ulat(-90, 90), ulon(-180, 180);
    for (int i = 0; i < 5000; ++i) {
        const auto a = GeoPoint::from_degrees(ulat(rng), ulon(rng));
        const auto b = GeoPoint::from_degrees(ulat(rng), ulon(rng));
        const auto c = GeoPoint::from_degrees(ulat(rng), ulon(rng));
        const double ab = haversine_km(a, b), bc = haversine_km(b, c), ac = haversine_km(a, c);
        EXPECT_EQ(ab, haversine_km(b, a));
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ac, ab + bc + 1e-9);
    }
}

TEST(GeoIndex, EmptyIndex) {
    const geo::GeoIndex idx;
    EXPECT_EQ(idx.size(), 0u);
    EXPECT_TRUE(idx.radius_query(GeoPoint::from_degrees(1, 1), 1e6).empty());
    EXPECT_TRUE(idx.knn_query(GeoPoint::from_degrees(1, 1), 3).empty());
}

TEST(GeoIndex, ThreePointsMatchBruteForce) {
    const std::vector<geo::IndexedPoint> pts{{GeoPoint::from_degrees(48.0, 2.0), 3},
                                             {GeoPoint::from_degrees(48.05, 2.0), 1},
                                             {GeoPoint::from_degrees(48.0, 2.2), 2}};
    const geo::GeoIndex idx(pts);
    EXPECT_EQ(idx.size(), 3u);
    const auto c = GeoPoint::from_degrees(48.01, 2.01);
    EXPECT_EQ(idx.knn_query(c, 1), sdm::testing::brute_knn(pts, c, 1));
    EXPECT_EQ(idx.knn_query(c, 10), sdm::testing::brute_knn(pts, c, 10));
    EXPECT_EQ(idx.knn_query(c, 10).size(), 3u);
    for (double r : {0.0, 1.0, 5.0, 15.0, 100.0}) EXPECT_EQ(idx.radius_query(c, r), sdm::testing::brute_radius(pts, c, r));
}

TEST(GeoIndex, RadiusBoundaryExamples) {
    const auto center = GeoPoint::from_degrees(48.0, 2.0);
    const auto near = GeoPoint::from_degrees(48.05, 2.0);
    const auto far = GeoPoint::from_degrees(48.0, 2.2);
    EXPECT_NEAR(haversine_km(center, near), 5.56, 0.02);
    EXPECT_NEAR(haversine_km(center, far), 14.88, 0.02);
    const geo::GeoIndex idx(std::vector<geo::IndexedPoint>{{near, 1}, {far, 2}});
    const auto hits = idx.radius_query(center, 10.0);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].survey_id, 1);
}

TEST(GeoIndex, RadiusZeroReturnsColocated) {
    const auto p = GeoPoint::from_degrees(10.5, -20.25);
    const geo::GeoIndex idx(std::vector<geo::IndexedPoint>{{p, 5}, {p, 4}, {GeoPoint::from_degrees(10.5, -20.2500001), 6}});
    const auto hits = idx.radius_query(p, 0.0);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].survey_id, 4);
    EXPECT_EQ(hits[1].survey_id, 5);
}

TEST(GeoIndex, EquidistantTieBreaksBySurveyId) {
    // Mirror images across the query's meridian are exactly equidistant.
    const auto c = GeoPoint::from_degrees(30.0, 0.0);
    const geo::GeoIndex idx(std::vector<geo::IndexedPoint>{{GeoPoint::from_degrees(30.0, 0.1), 9},
                                                           {GeoPoint::from_degrees(30.0, -0.1), 4}});
    const auto nn = idx.knn_query(c, 1);
    ASSERT_EQ(nn.size(), 1u);
    EXPECT_EQ(nn[0].survey_id, 4);
}

TEST(GeoIndex, RandomInstancesMatchBruteForce) {
    std::mt19937_64 rng(2024);
    for (int inst = 0; inst < 40; ++inst) {
        const std::size_t n = 1 + rng() % 3000;
        const auto pts = random_points(rng, n, inst % 2 == 0);
        const geo::GeoIndex idx(pts);
        std::uniform_real_distribution<double> ulat(-90, 90), ulon(-180, 180), ur(0, 50);
        for (int q = 0; q < 10; ++q) {
            GeoPoint c = q % 3 == 0 ? pts[rng() % n].point : GeoPoint::from_degrees(ulat(rng), ulon(rng));
            const double r = q % 4 == 0 ? 0.0 : ur(rng) * (q % 2 ? 1.0 : 100.0);
            ASSERT_EQ(idx.radius_query(c, r), sdm::testing::brute_radius(pts, c, r));
            const std::size_t k = 1 + rng() % 20;
            ASSERT_EQ(idx.knn_query(c, k), sdm::testing::brute_knn(pts, c, k));
        }
    }
}

TEST(GeoIndex, QueriesArePure) {
    std::mt19937_64 rng(5);
    const auto pts = random_points(rng, 500, true);
    const geo::GeoIndex idx(pts);
    const auto c = pts[17].point;
    EXPECT_EQ(idx.radius_query(c, 12.0), idx.radius_query(c, 12.0));
    EXPECT_EQ(idx.knn_query(c, 7), idx.knn_query(c, 7));
}

TEST(GeoIndex, SlotsReferToInputPositions) {
    std::mt19937_64 rng(8);
    const auto pts = random_points(rng, 200, false);
    const geo::GeoIndex idx(pts);
    for (const auto& nb : idx.knn_query(pts[3].point, 10)) {
        EXPECT_EQ(pts[nb.slot].survey_id, nb.survey_id);
        EXPECT_EQ(idx.point_at_slot(nb.slot).survey_id, nb.survey_id);
    }
}
