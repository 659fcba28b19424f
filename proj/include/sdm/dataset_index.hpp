// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdm/geo.hpp"
#include "sdm/ingest.hpp"

namespace sdm {

inline geo::GeoPoint location(const SurveyRecord& r) { return geo::GeoPoint::from_degrees(r.lat, r.lon); }

/// Index over a dataset's records; Neighbor::slot is the record position.
inline geo::GeoIndex build_index(const Dataset& ds) {
    std::vector<geo::IndexedPoint> pts;
    pts.reserve(ds.records.size());
    for (const auto& r : ds.records) pts.push_back({location(r), r.survey_id});
    return geo::GeoIndex(pts);
}

}  // namespace sdm
