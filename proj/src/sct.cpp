#include "mtmc/sct.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mtmc/errors.hpp"
#include "mtmc/hungarian.hpp"

namespace mtmc::sct {

namespace {

constexpr int kStateDim = 8;
constexpr int kMeasDim = 4;

std::array<double, 4> box_to_meas(const ingest::Detection2D& d) {
    return {(d.x1 + d.x2) / 2.0, (d.y1 + d.y2) / 2.0, d.x2 - d.x1, d.y2 - d.y1};
}

double iou_xyxy(const std::array<double, 4>& a, const std::array<double, 4>& b) {
    const double ix = std::max(0.0, std::min(a[2], b[2]) - std::max(a[0], b[0]));
    const double iy = std::max(0.0, std::min(a[3], b[3]) - std::max(a[1], b[1]));
    const double inter = ix * iy;
    const double ua = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    return ua > 0.0 ? inter / ua : 0.0;
}

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

void kalman_init(LocalTrack& tr, const std::array<double, 4>& meas, const SctParams& p) {
    tr.state = {meas[0], meas[1], meas[2], meas[3], 0, 0, 0, 0};
    tr.cov.fill(0.0);
    for (int i = 0; i < 4; ++i) tr.cov[i * kStateDim + i] = 10.0 * p.meas_noise;
    for (int i = 4; i < 8; ++i) tr.cov[i * kStateDim + i] = 100.0;
}

// x <- F x; P <- F P F^T + Q with F = [I I; 0 I] (unit dt).
void kalman_predict(LocalTrack& tr, const SctParams& p) {
    for (int i = 0; i < 4; ++i) tr.state[i] += tr.state[i + 4];
    auto& P = tr.cov;
    auto idx = [](int r, int c) { return r * kStateDim + c; };
    // P <- F P: row i gains row i+4 for i < 4
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 8; ++j) P[idx(i, j)] += P[idx(i + 4, j)];
    // P <- P F^T: col j gains col j+4 for j < 4
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 4; ++j) P[idx(i, j)] += P[idx(i, j + 4)];
    for (int i = 0; i < 4; ++i) P[idx(i, i)] += p.process_noise_pos;
    for (int i = 4; i < 8; ++i) P[idx(i, i)] += p.process_noise_vel;
}

void kalman_update(LocalTrack& tr, const std::array<double, 4>& meas, const SctParams& p) {
    auto& P = tr.cov;
    auto idx = [](int r, int c) { return r * kStateDim + c; };
    // S = P[0:4,0:4] + R
    double S[kMeasDim][kMeasDim];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) S[i][j] = P[idx(i, j)] + (i == j ? p.meas_noise : 0.0);
    // invert S in place (Gauss-Jordan on [S | I])
    double inv[kMeasDim][kMeasDim] = {};
    for (int i = 0; i < 4; ++i) inv[i][i] = 1.0;
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(S[r][col]) > std::abs(S[piv][col])) piv = r;
        std::swap(S[col], S[piv]);
        std::swap(inv[col], inv[piv]);
        const double d = S[col][col];
        for (int j = 0; j < 4; ++j) {
            S[col][j] /= d;
            inv[col][j] /= d;
        }
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = S[r][col];
            for (int j = 0; j < 4; ++j) {
                S[r][j] -= f * S[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    // K = P H^T S^-1, H = [I 0] so P H^T = first 4 columns of P
    double K[kStateDim][kMeasDim];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += P[idx(i, k)] * inv[k][j];
            K[i][j] = s;
        }
    double innov[kMeasDim];
    for (int i = 0; i < 4; ++i) innov[i] = meas[i] - tr.state[i];
    for (int i = 0; i < 8; ++i) {
        double s = 0.0;
        for (int j = 0; j < 4; ++j) s += K[i][j] * innov[j];
        tr.state[i] += s;
    }
    // P <- (I - K H) P
    std::array<double, 64> newP{};
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double s = P[idx(i, j)];
            for (int k = 0; k < 4; ++k) s -= K[i][k] * P[idx(k, j)];
            newP[idx(i, j)] = s;
        }
    P = newP;
}

void update_appearance(LocalTrack& tr, const std::vector<double>& emb, double alpha) {
    if (tr.appearance.size() != emb.size()) {
        tr.appearance = emb;
        return;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < emb.size(); ++i) {
        tr.appearance[i] = alpha * tr.appearance[i] + (1.0 - alpha) * emb[i];
        sq += tr.appearance[i] * tr.appearance[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > 0.0)
        for (double& v : tr.appearance) v /= norm;
}

} // namespace

std::array<double, 4> LocalTrack::predicted_box() const {
    const double cx = state[0], cy = state[1];
    const double w = std::max(1.0, state[2]), h = std::max(1.0, state[3]);
    return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

std::pair<double, double> select_foot_point(const ingest::Detection2D& det, const SctParams& params) {
    if (det.class_id == params.pedestrian_class_id && det.keypoints.size() == 14) {
        const auto& a = det.keypoints[static_cast<std::size_t>(params.ankle_indices[0])];
        const auto& b = det.keypoints[static_cast<std::size_t>(params.ankle_indices[1])];
        if (a.conf >= params.kp_conf && b.conf >= params.kp_conf)
            return {(a.u + b.u) / 2.0, (a.v + b.v) / 2.0};
    }
    return {(det.x1 + det.x2) / 2.0, det.y2};
}

std::vector<std::pair<int, int>> CameraTracker::step(const std::vector<ingest::Detection2D>& detections) {
    // reject exact duplicate detection objects (same box, class and
    // embedding; distinct targets may legitimately coincide in the image)
    std::set<std::tuple<double, double, double, double, int, std::vector<double>>> seen;
    for (const auto& d : detections) {
        if (d.camera_id != camera_id_)
            throw ValidationError("detection from camera " + std::to_string(d.camera_id) +
                                  " fed to tracker for camera " + std::to_string(camera_id_));
        if (!seen.insert({d.x1, d.y1, d.x2, d.y2, d.class_id, d.embedding}).second)
            throw ValidationError("duplicate detection in camera " + std::to_string(camera_id_));
    }

    // bypass: precomputed local IDs pass through with no state estimation
    const bool bypass =
        !detections.empty() &&
        std::all_of(detections.begin(), detections.end(),
                    [](const ingest::Detection2D& d) { return d.local_track_id.has_value(); });
    if (bypass) {
        std::vector<std::pair<int, int>> out;
        out.reserve(detections.size());
        for (std::size_t i = 0; i < detections.size(); ++i)
            out.emplace_back(static_cast<int>(i), *detections[i].local_track_id);
        return out;
    }

    for (auto& tr : tracks_) {
        kalman_predict(tr, params_);
        ++tr.age;
    }

    const std::size_t nt = tracks_.size(), nd = detections.size();
    std::vector<int> det_to_track(nd, -1);
    if (nt > 0 && nd > 0) {
        std::vector<double> cost(nt * nd, kForbidden);
        std::vector<double> iou_mat(nt * nd, 0.0), app_mat(nt * nd, 1.0);
        for (std::size_t ti = 0; ti < nt; ++ti) {
            const auto pbox = tracks_[ti].predicted_box();
            for (std::size_t di = 0; di < nd; ++di) {
                const auto& d = detections[di];
                const double iou = iou_xyxy(pbox, {d.x1, d.y1, d.x2, d.y2});
                const double app = cosine_distance(tracks_[ti].appearance, d.embedding);
                iou_mat[ti * nd + di] = iou;
                app_mat[ti * nd + di] = app;
                // a pair is inadmissible only when both gates fail
                if (iou < params_.iou_min && app > params_.app_max) continue;
                cost[ti * nd + di] = params_.lambda * (1.0 - iou) + (1.0 - params_.lambda) * app;
            }
        }
        const auto match = solve_assignment(cost, nt, nd);
        for (std::size_t ti = 0; ti < nt; ++ti)
            if (match[ti] >= 0) det_to_track[static_cast<std::size_t>(match[ti])] = static_cast<int>(ti);
    }

    std::vector<std::pair<int, int>> out;
    out.reserve(nd);
    std::vector<char> matched(nt, 0);
    for (std::size_t di = 0; di < nd; ++di) {
        const auto& d = detections[di];
        if (det_to_track[di] >= 0) {
            auto& tr = tracks_[static_cast<std::size_t>(det_to_track[di])];
            kalman_update(tr, box_to_meas(d), params_);
            update_appearance(tr, d.embedding, params_.alpha_ema);
            ++tr.hits;
            tr.misses = 0;
            std::tie(tr.foot_u, tr.foot_v) = select_foot_point(d, params_);
            matched[static_cast<std::size_t>(det_to_track[di])] = 1;
            out.emplace_back(static_cast<int>(di), tr.local_id);
        } else {
            LocalTrack tr;
            tr.camera_id = camera_id_;
            tr.local_id = next_local_id_++;
            kalman_init(tr, box_to_meas(d), params_);
            tr.appearance = d.embedding;
            tr.hits = 1;
            std::tie(tr.foot_u, tr.foot_v) = select_foot_point(d, params_);
            tracks_.push_back(std::move(tr));
            out.emplace_back(static_cast<int>(di), tracks_.back().local_id);
        }
    }

    for (std::size_t ti = 0; ti < nt; ++ti)
        if (!matched[ti]) ++tracks_[ti].misses;
    std::erase_if(tracks_, [this](const LocalTrack& tr) { return tr.misses > params_.max_age; });

    return out;
}

} // namespace mtmc::sct
