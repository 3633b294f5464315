#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fade/geometry.hpp"

namespace fade {

struct TrackPoint {
    int frame = 0;
    BoxPx box;
    bool operator==(const TrackPoint&) const = default;
};

// One identity's boxes over time; frames strictly increasing.
struct Trajectory {
    int id = 0;
    std::vector<TrackPoint> points;
    bool operator==(const Trajectory&) const = default;
};

struct EvalReport {
    double hota = 0, deta = 0, assa = 0;
    double idf1 = 0, idr = 0, idp = 0;
    int idsw = 0;
    double idsw_per_track = 0;  // raw count / number of GT trajectories
    std::vector<double> alphas;
    std::vector<double> hota_alpha, deta_alpha, assa_alpha;
};

std::vector<double> default_alpha_grid();  // 0.05, 0.10, ..., 0.95

EvalReport evaluate(const std::vector<Trajectory>& gt, const std::vector<Trajectory>& pred,
                    const std::vector<double>& alphas = default_alpha_grid());

// Comparison table; rows after the first carry deltas against the first.
std::string report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace fade
