// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "sdm/dataset_index.hpp"

namespace sdm::gate {

inline constexpr double kDefaultGateRadiusKm = 10.0;

enum class Side { InDistribution, OutOfDistribution };

inline const char* to_string(Side s) { return s == Side::InDistribution ? "in" : "ood"; }

struct GateAssignment {
    SurveyId survey_id = 0;
    Side side = Side::OutOfDistribution;
    /// Distance to the nearest PA training survey; +inf when there is none.
    double nearest_pa_km = std::numeric_limits<double>::infinity();

    friend bool operator==(const GateAssignment&, const GateAssignment&) = default;
};

/// A test survey goes to the in-distribution expert iff some PA training survey
/// lies within `gate_radius_km` (inclusive). Output follows the test dataset's
/// survey_id order.
inline std::vector<GateAssignment> assign(const Dataset& test, const geo::GeoIndex& pa_index,
                                          double gate_radius_km = kDefaultGateRadiusKm) {
    std::vector<GateAssignment> out(test.records.size());
    parallel_for(out.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto& r = test.records[i];
            GateAssignment a{r.survey_id, Side::OutOfDistribution, std::numeric_limits<double>::infinity()};
            const auto nn = pa_index.knn_query(location(r), 1);
            if (!nn.empty()) a.nearest_pa_km = nn.front().distance_km;
            if (a.nearest_pa_km <= gate_radius_km) a.side = Side::InDistribution;
            out[i] = a;
        }
    }, 1024);
    return out;
}

inline std::vector<GateAssignment> assign(const Dataset& test, const Dataset& pa,
                                          double gate_radius_km = kDefaultGateRadiusKm) {
    return assign(test, build_index(pa), gate_radius_km);
}

/// Routes each survey to its assigned expert's prediction. Throws when a
/// survey is missing from the expert it was assigned to.
inline Predictions moe_merge(const std::vector<GateAssignment>& assignments, const Predictions& in_dist,
                             const Predictions& ood) {
    Predictions out;
    std::vector<SurveyId> missing;
    for (const auto& a : assignments) {
        const Predictions& src = a.side == Side::InDistribution ? in_dist : ood;
        auto it = src.find(a.survey_id);
        if (it == src.end()) {
            missing.push_back(a.survey_id);
            continue;
        }
        out[a.survey_id] = it->second;
    }
    if (!missing.empty()) {
        std::string msg = "moe_merge: surveys missing from their assigned expert's predictions:";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += ' ' + std::to_string(missing[i]);
        if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
        throw Error(msg);
    }
    return out;
}

inline std::string format_assignments(const std::vector<GateAssignment>& as) {
    std::string out = "surveyId,side,nearestPaKm\n";
    for (const auto& a : as)
        out += std::to_string(a.survey_id) + ',' + to_string(a.side) + ',' +
               (std::isfinite(a.nearest_pa_km) ? format_fixed(a.nearest_pa_km, 6) : std::string("inf")) + '\n';
    return out;
}

inline void write_assignments(const std::vector<GateAssignment>& as, const std::string& path) {
    csv::write_file(path, format_assignments(as));
}

}  // namespace sdm::gate
