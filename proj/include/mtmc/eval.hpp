#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtmc/box3d.hpp"

namespace mtmc::eval {

// Boxes keyed by (frame, track id); id spaces of GT and prediction are
// independent.
struct TrackSet {
    std::map<std::pair<int, int>, Box3D> boxes;

    void insert(int frame, int id, const Box3D& box);
    static TrackSet from_results_file(const std::string& path);
};

// Rotated 3D IoU: yaw-rotated ground-plane rectangle intersection (convex
// polygon clipping) times the vertical interval overlap, over the union.
double iou3d(const Box3D& a, const Box3D& b);

struct HotaScores {
    double hota = 0.0;
    double deta = 0.0;
    double assa = 0.0;
    double loca = 0.0;
    // per-alpha breakdowns, aligned with alphas
    std::vector<double> alphas;
    std::vector<double> hota_alpha;
    std::vector<double> deta_alpha;
    std::vector<double> assa_alpha;
    std::vector<double> loca_alpha;
};

std::vector<double> default_alphas();  // 0.05 .. 0.95 step 0.05

// HOTA with per-frame Hungarian matching on iou3d (pairs below alpha are
// inadmissible; total similarity is maximized). Per-alpha passes run under
// OpenMP. Throws ValidationError when gt is empty.
HotaScores hota(const TrackSet& gt, const TrackSet& pred,
                const std::vector<double>& alphas = default_alphas());

} // namespace mtmc::eval
