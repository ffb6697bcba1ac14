#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtmc/spatial.hpp"

namespace mtmc::temporal {

enum class TrackState { Tentative, Confirmed, Lost };

enum class MatchMode {
    MotIdConsistency,  // local-ID overlap matching
    AppearanceOnly,    // Hungarian on appearance distance (baseline)
};

struct TemporalParams {
    MatchMode mode = MatchMode::MotIdConsistency;
    bool split_enabled = true;
    double app_lost_max = 0.45;   // lost re-match appearance gate
    double r0 = 1.0;              // lost re-match radius at d = 0, meters
    double r_rate = 0.05;         // radius growth per lost frame, m/frame
    int m0 = 1;                   // base consecutive matches to reactivate
    int m_div = 60;               // +1 required match per m_div lost frames
    int n_confirm = 3;            // consecutive matches to confirm a track
    double app_ema = 0.9;         // track appearance EMA retention
    double app_baseline_max = 0.5;  // gate for the appearance-only baseline
};

// Persistent multi-camera identity.
struct GlobalTrack {
    int global_id = 0;
    TrackState state = TrackState::Tentative;
    std::map<int, int> membership;  // camera_id -> local_id
    std::vector<double> appearance;  // unit-norm EMA
    double last_map_x = 0.0, last_map_y = 0.0;
    int last_seen_frame = -1;
    int consecutive_matches = 0;   // tentative confirmation counter
    int lost_consecutive = 0;      // lost reactivation counter
    std::map<std::pair<int, int>, std::vector<double>> member_appearance;  // (cam, lid) -> last embedding
};

// G vs M membership comparison for one (cluster, track) pair.
struct OverlapReport {
    std::vector<std::pair<int, int>> expected;    // G intersect M
    std::vector<std::pair<int, int>> unexpected;  // G minus M
    std::vector<std::pair<int, int>> vacated;     // M minus G
};

OverlapReport overlap_report(const spatial::Cluster& cluster, const GlobalTrack& track);

enum class EventType { Spawn, Confirm, Lost, Reactivate, Remove, Split };

struct Event {
    int frame = 0;
    EventType type = EventType::Spawn;
    int global_id = 0;
    int camera_id = -1;   // Split only
    int old_local = -1;   // Split only
    int new_local = -1;   // Split only
    std::vector<std::pair<int, int>> members;  // Spawn/Reactivate
};

const char* event_name(EventType t);

// One cluster's outcome for a frame. `emit` marks output-eligible
// assignments (track confirmed at end of this frame's update). The stored
// cluster reflects post-split routing: rejected unexpected members have been
// moved out into their own residual clusters.
struct Assignment {
    spatial::Cluster cluster;
    int global_id = 0;
    bool emit = false;
    OverlapReport overlap;  // vs the matched track's pre-update membership
};

struct FrameAssociation {
    std::vector<Assignment> assignments;
    std::vector<Event> events;
};

// Online global-ID assignment with the Tentative/Confirmed/Lost lifecycle.
// Matching stages run in the order Confirmed -> Lost -> Tentative -> spawn.
class TemporalAssociator {
public:
    explicit TemporalAssociator(const TemporalParams& params) : params_(params) {}

    FrameAssociation update(int frame, const std::vector<spatial::Cluster>& clusters);

    const std::vector<GlobalTrack>& tracks() const { return tracks_; }

private:
    TemporalParams params_;
    std::vector<GlobalTrack> tracks_;  // kept sorted by global_id
    int next_global_id_ = 1;

    GlobalTrack* find(int gid);
    void claim_members(GlobalTrack& track, const spatial::Cluster& cluster);
    // Applies expected refresh + split routing; returns residual singleton
    // clusters for members routed to later stages.
    std::vector<spatial::Cluster> process_match(GlobalTrack& track, spatial::Cluster& cluster, int frame,
                                                std::vector<Event>& events);
};

} // namespace mtmc::temporal
