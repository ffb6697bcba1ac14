#include "mtmc/eval.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <set>

#include "mtmc/errors.hpp"
#include "mtmc/hungarian.hpp"
#include "mtmc/ingest.hpp"

namespace mtmc::eval {

void TrackSet::insert(int frame, int id, const Box3D& box) {
    if (!boxes.emplace(std::make_pair(frame, id), box).second)
        throw ValidationError("duplicate (frame, id) in track set: frame " + std::to_string(frame) +
                              " id " + std::to_string(id));
}

TrackSet TrackSet::from_results_file(const std::string& path) {
    TrackSet set;
    for (const auto& row : ingest::load_results(path)) set.insert(row.frame, row.global_id, row.box);
    return set;
}

namespace {

struct Pt {
    double x, y;
};

// yaw-rotated footprint corners, counterclockwise
std::vector<Pt> footprint(const Box3D& b) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double hl = b.length / 2.0, hw = b.width / 2.0;
    std::vector<Pt> out;
    for (const auto& [dx, dy] :
         {std::pair{hl, hw}, std::pair{-hl, hw}, std::pair{-hl, -hw}, std::pair{hl, -hw}})
        out.push_back({b.x + c * dx - s * dy, b.y + s * dx + c * dy});
    return out;
}

double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Sutherland-Hodgman clip of a convex subject polygon by a convex CCW clip
// polygon.
std::vector<Pt> clip_polygon(std::vector<Pt> subject, const std::vector<Pt>& clip) {
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Pt& a = clip[e];
        const Pt& b = clip[(e + 1) % clip.size()];
        std::vector<Pt> out;
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Pt& p = subject[i];
            const Pt& q = subject[(i + 1) % subject.size()];
            const double dp = cross(a, b, p);
            const double dq = cross(a, b, q);
            if (dp >= 0.0) {
                out.push_back(p);
                if (dq < 0.0) {
                    const double t = dp / (dp - dq);
                    out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
                }
            } else if (dq >= 0.0) {
                const double t = dp / (dp - dq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        subject = std::move(out);
    }
    return subject;
}

double polygon_area(const std::vector<Pt>& poly) {
    if (poly.size() < 3) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Pt& p = poly[i];
        const Pt& q = poly[(i + 1) % poly.size()];
        s += p.x * q.y - q.x * p.y;
    }
    return std::abs(s) / 2.0;
}

} // namespace

double iou3d(const Box3D& a, const Box3D& b) {
    const double zlo = std::max(a.z - a.height / 2.0, b.z - b.height / 2.0);
    const double zhi = std::min(a.z + a.height / 2.0, b.z + b.height / 2.0);
    const double dz = std::max(0.0, zhi - zlo);
    if (dz == 0.0) return 0.0;
    const double area = polygon_area(clip_polygon(footprint(a), footprint(b)));
    const double inter = area * dz;
    const double uni = a.volume() + b.volume() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<double> default_alphas() {
    std::vector<double> a;
    for (int i = 1; i <= 19; ++i) a.push_back(0.05 * i);
    return a;
}

HotaScores hota(const TrackSet& gt, const TrackSet& pred, const std::vector<double>& alphas) {
    if (gt.boxes.empty()) throw ValidationError("hota: ground truth is empty");
    if (alphas.empty()) throw ValidationError("hota: no alphas given");

    // dense id indices
    std::map<int, int> gt_idx, pr_idx;
    for (const auto& [key, box] : gt.boxes) gt_idx.emplace(key.second, 0);
    for (const auto& [key, box] : pred.boxes) pr_idx.emplace(key.second, 0);
    {
        int k = 0;
        for (auto& [id, idx] : gt_idx) idx = k++;
        k = 0;
        for (auto& [id, idx] : pr_idx) idx = k++;
    }
    const std::size_t ng = gt_idx.size(), np = pr_idx.size();

    // per-frame det lists
    std::set<int> frame_set;
    for (const auto& [key, box] : gt.boxes) frame_set.insert(key.first);
    for (const auto& [key, box] : pred.boxes) frame_set.insert(key.first);

    struct FrameData {
        std::vector<int> gt_ids, pr_ids;           // dense indices
        std::vector<double> sim;                    // gt x pr similarity
    };
    std::vector<FrameData> frames;
    std::vector<double> gt_count(ng, 0.0), pr_count(np, 0.0);
    for (int f : frame_set) {
        FrameData fd;
        std::vector<const Box3D*> gt_boxes, pr_boxes;
        for (auto it = gt.boxes.lower_bound({f, INT_MIN}); it != gt.boxes.end() && it->first.first == f;
             ++it) {
            fd.gt_ids.push_back(gt_idx.at(it->first.second));
            gt_boxes.push_back(&it->second);
        }
        for (auto it = pred.boxes.lower_bound({f, INT_MIN});
             it != pred.boxes.end() && it->first.first == f; ++it) {
            fd.pr_ids.push_back(pr_idx.at(it->first.second));
            pr_boxes.push_back(&it->second);
        }
        for (int i : fd.gt_ids) gt_count[static_cast<std::size_t>(i)] += 1.0;
        for (int j : fd.pr_ids) pr_count[static_cast<std::size_t>(j)] += 1.0;
        fd.sim.resize(fd.gt_ids.size() * fd.pr_ids.size());
        for (std::size_t i = 0; i < gt_boxes.size(); ++i)
            for (std::size_t j = 0; j < pr_boxes.size(); ++j)
                fd.sim[i * pr_boxes.size() + j] = iou3d(*gt_boxes[i], *pr_boxes[j]);
        frames.push_back(std::move(fd));
    }

    HotaScores scores;
    scores.alphas = alphas;
    const std::size_t na = alphas.size();
    scores.hota_alpha.assign(na, 0.0);
    scores.deta_alpha.assign(na, 0.0);
    scores.assa_alpha.assign(na, 0.0);
    scores.loca_alpha.assign(na, 0.0);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ai = 0; ai < static_cast<std::ptrdiff_t>(na); ++ai) {
        const double alpha = alphas[static_cast<std::size_t>(ai)];
        double tp = 0.0, fn = 0.0, fp = 0.0, loc_sum = 0.0;
        std::map<std::pair<int, int>, double> match_count;
        for (const auto& fd : frames) {
            const std::size_t g = fd.gt_ids.size(), p = fd.pr_ids.size();
            if (g == 0 || p == 0) {
                fn += static_cast<double>(g);
                fp += static_cast<double>(p);
                continue;
            }
            std::vector<double> cost(g * p, kForbidden);
            for (std::size_t i = 0; i < g; ++i)
                for (std::size_t j = 0; j < p; ++j)
                    if (fd.sim[i * p + j] >= alpha) cost[i * p + j] = -fd.sim[i * p + j];
            const auto match = solve_assignment(cost, g, p);
            std::size_t matched = 0;
            for (std::size_t i = 0; i < g; ++i) {
                if (match[i] < 0) continue;
                ++matched;
                const double s = fd.sim[i * p + static_cast<std::size_t>(match[i])];
                loc_sum += s;
                ++match_count[{fd.gt_ids[i], fd.pr_ids[static_cast<std::size_t>(match[i])]}];
            }
            tp += static_cast<double>(matched);
            fn += static_cast<double>(g - matched);
            fp += static_cast<double>(p - matched);
        }
        const double det_denom = tp + fn + fp;
        const double deta = det_denom > 0.0 ? tp / det_denom : 0.0;
        double assa = 0.0;
        if (tp > 0.0) {
            for (const auto& [pair, m] : match_count) {
                const double denom = gt_count[static_cast<std::size_t>(pair.first)] +
                                     pr_count[static_cast<std::size_t>(pair.second)] - m;
                assa += m * (m / denom);
            }
            assa /= tp;
        }
        scores.deta_alpha[static_cast<std::size_t>(ai)] = deta;
        scores.assa_alpha[static_cast<std::size_t>(ai)] = assa;
        scores.loca_alpha[static_cast<std::size_t>(ai)] = tp > 0.0 ? loc_sum / tp : 0.0;
        scores.hota_alpha[static_cast<std::size_t>(ai)] = std::sqrt(deta * assa);
    }

    for (std::size_t ai = 0; ai < na; ++ai) {
        scores.hota += scores.hota_alpha[ai];
        scores.deta += scores.deta_alpha[ai];
        scores.assa += scores.assa_alpha[ai];
        scores.loca += scores.loca_alpha[ai];
    }
    scores.hota /= static_cast<double>(na);
    scores.deta /= static_cast<double>(na);
    scores.assa /= static_cast<double>(na);
    scores.loca /= static_cast<double>(na);
    return scores;
}

} // namespace mtmc::eval
