#include "mtmc/temporal.hpp"

#include <algorithm>
#include <cmath>

#include "mtmc/hungarian.hpp"

namespace mtmc::temporal {

namespace {

double cos_sim(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
}

std::vector<double> mean_embedding(const std::vector<const std::vector<double>*>& embs) {
    std::vector<double> mean(embs.front()->size(), 0.0);
    for (const auto* e : embs)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*e)[i];
    for (double& v : mean) v /= static_cast<double>(embs.size());
    return mean;
}

void ema_update(std::vector<double>& app, const std::vector<double>& obs, double alpha) {
    if (app.size() != obs.size()) {
        app = obs;
        return;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < app.size(); ++i) {
        app[i] = alpha * app[i] + (1.0 - alpha) * obs[i];
        sq += app[i] * app[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > 0.0)
        for (double& v : app) v /= norm;
}

int membership_overlap(const spatial::Cluster& cluster, const GlobalTrack& track) {
    int n = 0;
    for (const auto& m : cluster.members) {
        auto it = track.membership.find(m.camera_id);
        if (it != track.membership.end() && it->second == m.local_id) ++n;
    }
    return n;
}

} // namespace

const char* event_name(EventType t) {
    switch (t) {
        case EventType::Spawn: return "spawn";
        case EventType::Confirm: return "confirm";
        case EventType::Lost: return "lost";
        case EventType::Reactivate: return "reactivate";
        case EventType::Remove: return "remove";
        case EventType::Split: return "split";
    }
    return "?";
}

OverlapReport overlap_report(const spatial::Cluster& cluster, const GlobalTrack& track) {
    OverlapReport rep;
    for (const auto& m : cluster.members) {
        auto it = track.membership.find(m.camera_id);
        if (it != track.membership.end() && it->second == m.local_id)
            rep.expected.emplace_back(m.camera_id, m.local_id);
        else
            rep.unexpected.emplace_back(m.camera_id, m.local_id);
    }
    for (const auto& [cam, lid] : track.membership) {
        bool in_cluster = false;
        for (const auto& m : cluster.members)
            if (m.camera_id == cam && m.local_id == lid) {
                in_cluster = true;
                break;
            }
        if (!in_cluster) rep.vacated.emplace_back(cam, lid);
    }
    return rep;
}

GlobalTrack* TemporalAssociator::find(int gid) {
    for (auto& t : tracks_)
        if (t.global_id == gid) return &t;
    return nullptr;
}

// A (camera_id, local_id) pair maps to at most one track's membership:
// claiming it here strips it from every other track.
void TemporalAssociator::claim_members(GlobalTrack& track, const spatial::Cluster& cluster) {
    for (const auto& m : cluster.members) {
        for (auto& other : tracks_) {
            if (other.global_id == track.global_id) continue;
            auto it = other.membership.find(m.camera_id);
            if (it != other.membership.end() && it->second == m.local_id) {
                other.membership.erase(it);
                other.member_appearance.erase({m.camera_id, m.local_id});
            }
        }
    }
}

std::vector<spatial::Cluster> TemporalAssociator::process_match(GlobalTrack& track,
                                                                spatial::Cluster& cluster, int frame,
                                                                std::vector<Event>& events) {
    std::vector<spatial::Cluster> residuals;

    if (params_.mode == MatchMode::AppearanceOnly) {
        // Baseline keeps no local-ID bookkeeping: adopt the cluster wholesale.
        track.membership.clear();
        track.member_appearance.clear();
        for (const auto& m : cluster.members) {
            track.membership[m.camera_id] = m.local_id;
            track.member_appearance[{m.camera_id, m.local_id}] = m.embedding;
        }
        claim_members(track, cluster);
        return residuals;
    }

    OverlapReport rep = overlap_report(cluster, track);

    std::vector<const std::vector<double>*> expected_embs;
    for (const auto& m : cluster.members) {
        auto it = track.membership.find(m.camera_id);
        if (it != track.membership.end() && it->second == m.local_id) {
            track.member_appearance[{m.camera_id, m.local_id}] = m.embedding;
            expected_embs.push_back(&m.embedding);
        }
    }

    if (!rep.unexpected.empty()) {
        std::vector<spatial::TargetSnapshot> kept;
        std::optional<std::vector<double>> expected_mean;
        if (!expected_embs.empty()) expected_mean = mean_embedding(expected_embs);

        for (auto& m : cluster.members) {
            auto it = track.membership.find(m.camera_id);
            const bool is_expected = (it != track.membership.end() && it->second == m.local_id);
            if (is_expected) {
                kept.push_back(m);
                continue;
            }
            bool accept = true;
            int old_local = (it != track.membership.end()) ? it->second : -1;
            if (params_.split_enabled && expected_mean) {
                // Splitting: the newcomer competes against the incumbent
                // local ID via cosine similarity to the expected members;
                // an absent incumbent always loses.
                const double a = cos_sim(m.embedding, *expected_mean);
                double b = -1.0;
                if (old_local >= 0) {
                    auto stored = track.member_appearance.find({m.camera_id, old_local});
                    if (stored != track.member_appearance.end())
                        b = cos_sim(stored->second, *expected_mean);
                }
                accept = a > b;
            }
            // Without splitting, matching adopts the cluster as a whole.
            if (accept) {
                if (old_local >= 0) {
                    track.member_appearance.erase({m.camera_id, old_local});
                    if (params_.split_enabled)
                        events.push_back(Event{frame, EventType::Split, track.global_id, m.camera_id,
                                               old_local, m.local_id, {}});
                }
                track.membership[m.camera_id] = m.local_id;
                track.member_appearance[{m.camera_id, m.local_id}] = m.embedding;
                kept.push_back(m);
            } else {
                spatial::Cluster residual;
                residual.members = {m};
                residual.recompute();
                residuals.push_back(std::move(residual));
            }
        }
        cluster.members = std::move(kept);
        if (!cluster.members.empty()) cluster.recompute();
    }

    claim_members(track, cluster);
    return residuals;
}

FrameAssociation TemporalAssociator::update(int frame, const std::vector<spatial::Cluster>& clusters) {
    FrameAssociation out;

    std::vector<spatial::Cluster> pending = clusters;

    auto track_ids_in_state = [&](TrackState st) {
        std::vector<int> ids;
        for (const auto& t : tracks_)
            if (t.state == st) ids.push_back(t.global_id);
        return ids;  // tracks_ is sorted by global_id
    };

    // Generic overlap/appearance matching used for confirmed and tentative
    // stages. Consumes matched clusters from `pending`; returns pairs of
    // (cluster, gid).
    auto match_stage = [&](const std::vector<int>& gids) {
        std::vector<std::pair<spatial::Cluster, int>> matched;
        if (pending.empty() || gids.empty()) return matched;
        const std::size_t nc = pending.size(), nt = gids.size();
        std::vector<double> cost(nc * nt, kForbidden);
        for (std::size_t ci = 0; ci < nc; ++ci) {
            for (std::size_t ti = 0; ti < nt; ++ti) {
                const GlobalTrack& tr = *find(gids[ti]);
                const double app_dist = 1.0 - cos_sim(pending[ci].appearance, tr.appearance);
                if (params_.mode == MatchMode::MotIdConsistency) {
                    const int ov = membership_overlap(pending[ci], tr);
                    if (ov < 1) continue;
                    // overlap dominates; appearance then track order break ties
                    cost[ci * nt + ti] =
                        -static_cast<double>(ov) + 1e-3 * app_dist + 1e-7 * static_cast<double>(ti);
                } else {
                    if (app_dist > params_.app_baseline_max) continue;
                    cost[ci * nt + ti] = app_dist + 1e-9 * static_cast<double>(ti);
                }
            }
        }
        const auto match = solve_assignment(cost, nc, nt);
        std::vector<char> consumed(nc, 0);
        for (std::size_t ci = 0; ci < nc; ++ci) {
            if (match[ci] < 0) continue;
            matched.emplace_back(std::move(pending[ci]), gids[static_cast<std::size_t>(match[ci])]);
            consumed[ci] = 1;
        }
        std::vector<spatial::Cluster> rest;
        for (std::size_t ci = 0; ci < nc; ++ci)
            if (!consumed[ci]) rest.push_back(std::move(pending[ci]));
        pending = std::move(rest);
        return matched;
    };

    // --- stage 1: confirmed tracks ---
    const auto confirmed_ids = track_ids_in_state(TrackState::Confirmed);
    std::vector<char> confirmed_matched(confirmed_ids.size(), 0);
    for (auto& [cluster, gid] : match_stage(confirmed_ids)) {
        GlobalTrack& tr = *find(gid);
        for (std::size_t i = 0; i < confirmed_ids.size(); ++i)
            if (confirmed_ids[i] == gid) confirmed_matched[i] = 1;
        OverlapReport report = overlap_report(cluster, tr);
        auto residuals = process_match(tr, cluster, frame, out.events);
        for (auto& r : residuals) pending.push_back(std::move(r));
        if (!cluster.members.empty()) {
            ema_update(tr.appearance, cluster.appearance, params_.app_ema);
            tr.last_map_x = cluster.centroid_x;
            tr.last_map_y = cluster.centroid_y;
            tr.last_seen_frame = frame;
            out.assignments.push_back(Assignment{std::move(cluster), gid, true, std::move(report)});
        }
    }
    // unmatched confirmed tracks become Lost immediately
    for (std::size_t i = 0; i < confirmed_ids.size(); ++i) {
        if (confirmed_matched[i]) continue;
        GlobalTrack& tr = *find(confirmed_ids[i]);
        tr.state = TrackState::Lost;
        tr.lost_consecutive = 0;
        out.events.push_back(Event{frame, EventType::Lost, tr.global_id, -1, -1, -1, {}});
    }

    // --- stage 2: lost tracks (appearance Hungarian + growing radius gate) ---
    {
        const auto lost_ids = track_ids_in_state(TrackState::Lost);
        std::vector<char> lost_matched(lost_ids.size(), 0);
        if (!pending.empty() && !lost_ids.empty()) {
            const std::size_t nc = pending.size(), nt = lost_ids.size();
            std::vector<double> cost(nc * nt, kForbidden);
            for (std::size_t ci = 0; ci < nc; ++ci) {
                for (std::size_t ti = 0; ti < nt; ++ti) {
                    const GlobalTrack& tr = *find(lost_ids[ti]);
                    const double app_dist = 1.0 - cos_sim(pending[ci].appearance, tr.appearance);
                    if (app_dist > params_.app_lost_max) continue;
                    const int d = frame - tr.last_seen_frame;
                    const double dx = pending[ci].centroid_x - tr.last_map_x;
                    const double dy = pending[ci].centroid_y - tr.last_map_y;
                    const double radius = params_.r0 + params_.r_rate * static_cast<double>(d);
                    if (std::sqrt(dx * dx + dy * dy) > radius) continue;
                    cost[ci * nt + ti] = app_dist + 1e-9 * static_cast<double>(ti);
                }
            }
            const auto match = solve_assignment(cost, nc, nt);
            std::vector<char> consumed(nc, 0);
            for (std::size_t ci = 0; ci < nc; ++ci) {
                if (match[ci] < 0) continue;
                const int gid = lost_ids[static_cast<std::size_t>(match[ci])];
                for (std::size_t i = 0; i < lost_ids.size(); ++i)
                    if (lost_ids[i] == gid) lost_matched[i] = 1;
                GlobalTrack& tr = *find(gid);
                consumed[ci] = 1;
                spatial::Cluster cluster = std::move(pending[ci]);
                ++tr.lost_consecutive;
                const int d = frame - tr.last_seen_frame;
                const int required = params_.m0 + d / params_.m_div;
                ema_update(tr.appearance, cluster.appearance, params_.app_ema);
                tr.last_map_x = cluster.centroid_x;
                tr.last_map_y = cluster.centroid_y;
                if (tr.lost_consecutive >= required) {
                    tr.state = TrackState::Confirmed;
                    tr.lost_consecutive = 0;
                    tr.last_seen_frame = frame;
                    tr.membership.clear();
                    tr.member_appearance.clear();
                    std::vector<std::pair<int, int>> members;
                    for (const auto& m : cluster.members) {
                        tr.membership[m.camera_id] = m.local_id;
                        tr.member_appearance[{m.camera_id, m.local_id}] = m.embedding;
                        members.emplace_back(m.camera_id, m.local_id);
                    }
                    claim_members(tr, cluster);
                    out.events.push_back(
                        Event{frame, EventType::Reactivate, tr.global_id, -1, -1, -1, members});
                    out.assignments.push_back(Assignment{std::move(cluster), gid, true, {}});
                } else {
                    // consumed while the reactivation counter builds up
                    out.assignments.push_back(Assignment{std::move(cluster), gid, false, {}});
                }
            }
            std::vector<spatial::Cluster> rest;
            for (std::size_t ci = 0; ci < nc; ++ci)
                if (!consumed[ci]) rest.push_back(std::move(pending[ci]));
            pending = std::move(rest);
        }
        for (std::size_t i = 0; i < lost_ids.size(); ++i)
            if (!lost_matched[i]) find(lost_ids[i])->lost_consecutive = 0;  // a miss resets the counter
    }

    // --- stage 3: tentative tracks (same paradigm as confirmed) ---
    {
        const auto tent_ids = track_ids_in_state(TrackState::Tentative);
        std::vector<char> tent_matched(tent_ids.size(), 0);
        for (auto& [cluster, gid] : match_stage(tent_ids)) {
            GlobalTrack& tr = *find(gid);
            for (std::size_t i = 0; i < tent_ids.size(); ++i)
                if (tent_ids[i] == gid) tent_matched[i] = 1;
            OverlapReport report = overlap_report(cluster, tr);
            auto residuals = process_match(tr, cluster, frame, out.events);
            for (auto& r : residuals) pending.push_back(std::move(r));
            if (cluster.members.empty()) continue;
            ema_update(tr.appearance, cluster.appearance, params_.app_ema);
            tr.last_map_x = cluster.centroid_x;
            tr.last_map_y = cluster.centroid_y;
            tr.last_seen_frame = frame;
            ++tr.consecutive_matches;
            bool emit = false;
            if (tr.consecutive_matches >= params_.n_confirm) {
                tr.state = TrackState::Confirmed;
                out.events.push_back(Event{frame, EventType::Confirm, tr.global_id, -1, -1, -1, {}});
                emit = true;
            }
            out.assignments.push_back(Assignment{std::move(cluster), gid, emit, std::move(report)});
        }
        // a tentative track missing a match is removed
        for (std::size_t i = 0; i < tent_ids.size(); ++i) {
            if (tent_matched[i]) continue;
            const int gid = tent_ids[i];
            out.events.push_back(Event{frame, EventType::Remove, gid, -1, -1, -1, {}});
            std::erase_if(tracks_, [gid](const GlobalTrack& t) { return t.global_id == gid; });
        }
    }

    // --- stage 4: spawn tentative tracks for everything still unmatched ---
    for (auto& cluster : pending) {
        GlobalTrack tr;
        tr.global_id = next_global_id_++;
        tr.state = TrackState::Tentative;
        tr.appearance = cluster.appearance;
        tr.last_map_x = cluster.centroid_x;
        tr.last_map_y = cluster.centroid_y;
        tr.last_seen_frame = frame;
        std::vector<std::pair<int, int>> members;
        for (const auto& m : cluster.members) {
            tr.membership[m.camera_id] = m.local_id;
            tr.member_appearance[{m.camera_id, m.local_id}] = m.embedding;
            members.emplace_back(m.camera_id, m.local_id);
        }
        tracks_.push_back(std::move(tr));
        claim_members(tracks_.back(), cluster);
        out.events.push_back(
            Event{frame, EventType::Spawn, tracks_.back().global_id, -1, -1, -1, members});
        out.assignments.push_back(
            Assignment{std::move(cluster), tracks_.back().global_id, false, {}});
    }
    pending.clear();

    std::sort(tracks_.begin(), tracks_.end(),
              [](const GlobalTrack& a, const GlobalTrack& b) { return a.global_id < b.global_id; });
    return out;
}

} // namespace mtmc::temporal
