#include "mtmc/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mtmc/errors.hpp"
#include "mtmc/hungarian.hpp"

namespace mtmc::spatial {

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    if (denom <= 0.0) return 1.0;
    return 1.0 - dot / denom;
}

void Cluster::recompute() {
    centroid_x = centroid_y = 0.0;
    for (const auto& m : members) {
        centroid_x += m.map_x;
        centroid_y += m.map_y;
    }
    centroid_x /= static_cast<double>(members.size());
    centroid_y /= static_cast<double>(members.size());

    appearance.assign(members.front().embedding.size(), 0.0);
    for (const auto& m : members)
        for (std::size_t i = 0; i < appearance.size(); ++i) appearance[i] += m.embedding[i];
    double sq = 0.0;
    for (double v : appearance) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > 0.0)
        for (double& v : appearance) v /= norm;

    std::map<int, int> votes;
    for (const auto& m : members) ++votes[m.class_id];
    int best = members.front().class_id, best_n = 0;
    for (const auto& [cid, n] : votes)
        if (n > best_n) {  // map order: ties go to the lower class id
            best = cid;
            best_n = n;
        }
    class_id = best;
}

std::vector<double> build_distance_matrix(const std::vector<TargetSnapshot>& snapshots, int class_id,
                                          const ingest::ClassStats& stats, const SpatialParams& params) {
    const std::size_t n = snapshots.size();
    for (const auto& s : snapshots)
        if (s.class_id != class_id)
            throw ValidationError("build_distance_matrix: snapshot class " + std::to_string(s.class_id) +
                                  " != " + std::to_string(class_id));
    double spatial_gate = params.spatial_gate;
    if (stats.has(class_id) && stats.require(class_id).spatial_gate > 0.0)
        spatial_gate = stats.require(class_id).spatial_gate;
    const bool pedestrian = (class_id == params.pedestrian_class_id);

    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d;
            const double app = cosine_distance(snapshots[i].embedding, snapshots[j].embedding);
            const double dx = snapshots[i].map_x - snapshots[j].map_x;
            const double dy = snapshots[i].map_y - snapshots[j].map_y;
            const double spat = std::sqrt(dx * dx + dy * dy);
            if (snapshots[i].camera_id == snapshots[j].camera_id || app > params.app_gate ||
                spat > spatial_gate) {
                d = kForbidden;
            } else {
                d = pedestrian ? app : spat;
            }
            dist[i * n + j] = dist[j * n + i] = d;
        }
    }
    return dist;
}

namespace {

struct ActiveCluster {
    std::vector<std::size_t> members;          // snapshot indices
    std::pair<int, int> min_key{0, 0};         // lexicographic tie-break key
};

std::pair<int, int> key_of(const TargetSnapshot& s) { return {s.camera_id, s.local_id}; }

// Average linkage; any gated cross pair forbids the merge entirely.
double cluster_distance(const ActiveCluster& a, const ActiveCluster& b, const std::vector<double>& dist,
                        std::size_t n) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i : a.members)
        for (std::size_t j : b.members) {
            const double d = dist[i * n + j];
            if (d >= kForbidden / 2) return kForbidden;
            sum += d;
            ++cnt;
        }
    return sum / static_cast<double>(cnt);
}

std::vector<Cluster> cluster_one_class(const std::vector<TargetSnapshot>& snapshots, int class_id,
                                       const ingest::ClassStats& stats, const SpatialParams& params) {
    const std::size_t n = snapshots.size();
    const auto dist = build_distance_matrix(snapshots, class_id, stats, params);

    double cut = (class_id == params.pedestrian_class_id) ? params.ped_cut : params.other_cut;
    if (stats.has(class_id) && stats.require(class_id).cluster_cut > 0.0)
        cut = stats.require(class_id).cluster_cut;

    std::vector<ActiveCluster> active(n);
    for (std::size_t i = 0; i < n; ++i) {
        active[i].members = {i};
        active[i].min_key = key_of(snapshots[i]);
    }

    while (active.size() > 1) {
        double best = kForbidden;
        std::size_t bi = 0, bj = 0;
        std::pair<std::pair<int, int>, std::pair<int, int>> best_keys;
        bool found = false;
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                const double d = cluster_distance(active[i], active[j], dist, n);
                if (d >= cut || d >= kForbidden / 2) continue;
                auto keys = std::minmax(active[i].min_key, active[j].min_key);
                const std::pair<std::pair<int, int>, std::pair<int, int>> key_pair{keys.first,
                                                                                   keys.second};
                if (!found || d < best || (d == best && key_pair < best_keys)) {
                    best = d;
                    bi = i;
                    bj = j;
                    best_keys = key_pair;
                    found = true;
                }
            }
        }
        if (!found) break;
        auto& dst = active[bi];
        dst.members.insert(dst.members.end(), active[bj].members.begin(), active[bj].members.end());
        dst.min_key = std::min(dst.min_key, active[bj].min_key);
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    std::sort(active.begin(), active.end(),
              [](const ActiveCluster& a, const ActiveCluster& b) { return a.min_key < b.min_key; });

    std::vector<Cluster> out;
    out.reserve(active.size());
    for (const auto& ac : active) {
        Cluster c;
        auto sorted_members = ac.members;
        std::sort(sorted_members.begin(), sorted_members.end(), [&](std::size_t a, std::size_t b) {
            return key_of(snapshots[a]) < key_of(snapshots[b]);
        });
        for (std::size_t i : sorted_members) c.members.push_back(snapshots[i]);
        c.recompute();
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace

std::vector<Cluster> cluster_frame(const std::vector<TargetSnapshot>& snapshots,
                                   const ingest::ClassStats& stats, const SpatialParams& params) {
    std::map<int, std::vector<TargetSnapshot>> by_class;
    for (const auto& s : snapshots) by_class[s.class_id].push_back(s);

    std::vector<Cluster> out;
    for (const auto& [cid, snaps] : by_class) {
        auto clusters = cluster_one_class(snaps, cid, stats, params);
        out.insert(out.end(), std::make_move_iterator(clusters.begin()),
                   std::make_move_iterator(clusters.end()));
    }
    return out;
}

} // namespace mtmc::spatial
