#pragma once

#include <vector>

#include "mtmc/ingest.hpp"

namespace mtmc::spatial {

struct SpatialParams {
    int pedestrian_class_id = 0;
    double app_gate = 0.5;      // max appearance cosine distance, all classes
    double spatial_gate = 3.0;  // max top-down distance (m), all classes
    double ped_cut = 0.35;      // agglomerative cut, cosine, pedestrians
    double other_cut = 1.5;     // agglomerative cut, meters, other classes
};

// One locally-tracked target at one frame, as seen by the clustering stage.
struct TargetSnapshot {
    int camera_id = 0;
    int local_id = 0;
    int class_id = 0;
    std::vector<double> embedding;  // unit norm
    double map_x = 0.0, map_y = 0.0;  // top-down location, meters
    double foot_u = 0.0, foot_v = 0.0;
    double score = 0.0;
    int det_index = -1;  // index into the (frame, camera) detection list
};

// Cross-camera grouping of snapshots believed to be one entity.
struct Cluster {
    std::vector<TargetSnapshot> members;  // pairwise-distinct camera ids
    double centroid_x = 0.0, centroid_y = 0.0;
    std::vector<double> appearance;  // renormalized mean of member embeddings
    int class_id = 0;                // majority class of members

    void recompute();  // centroid, appearance, class from members
};

// Gated pairwise distance matrix for snapshots of one class: cosine distance
// for pedestrians, top-down Euclidean otherwise. Entries are kForbidden when
// either gate fails or both snapshots share a camera. Throws on mixed classes.
std::vector<double> build_distance_matrix(const std::vector<TargetSnapshot>& snapshots, int class_id,
                                          const ingest::ClassStats& stats, const SpatialParams& params);

// Average-linkage agglomerative clustering per class, cut at the class
// threshold; merges across gated pairs are forbidden. Deterministic: ties
// break on the lexicographically smallest (camera_id, local_id) member keys.
std::vector<Cluster> cluster_frame(const std::vector<TargetSnapshot>& snapshots,
                                   const ingest::ClassStats& stats, const SpatialParams& params);

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

} // namespace mtmc::spatial
