// Benchmark comparing the OpenMP kernels against their serial references:
// mask erosion, DBSCAN, mask lifting and analytic depth rendering.
#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mtmc/ingest.hpp"
#include "mtmc/lift.hpp"
#include "mtmc/serial_ref.hpp"
#include "mtmc/synth.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename F>
double time_best_of(F&& fn, int reps = 3) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, ms_since(t0));
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-14s serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx   match %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms, equal ? "yes" : "NO");
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP\n");
#endif
    std::mt19937_64 rng(12345);

    // --- erosion ---
    {
        mtmc::ingest::Bitmap bmp;
        bmp.width = 1920;
        bmp.height = 1080;
        bmp.data.assign(static_cast<std::size_t>(bmp.width) * bmp.height, 0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& px : bmp.data) px = u(rng) < 0.6 ? 1 : 0;
        mtmc::ingest::Bitmap serial_out, parallel_out;
        const double ts = time_best_of([&] { serial_out = mtmc::serial::erode(bmp); });
        const double tp = time_best_of([&] { parallel_out = mtmc::ingest::erode(bmp); });
        report("erode", ts, tp, serial_out.data == parallel_out.data);
    }

    // --- dbscan ---
    {
        std::vector<mtmc::lift::CloudPoint> pts;
        std::normal_distribution<double> g(0.0, 0.35);
        std::uniform_real_distribution<double> u(-6.0, 6.0);
        for (int blob = 0; blob < 6; ++blob) {
            const double cx = u(rng), cy = u(rng);
            for (int i = 0; i < 1200; ++i)
                pts.push_back({cx + g(rng), cy + g(rng), 1.0 + 0.2 * g(rng), 0});
        }
        for (int i = 0; i < 400; ++i) pts.push_back({u(rng), u(rng), u(rng) + 6.5, 0});
        std::vector<int> ls, lp;
        const double ts = time_best_of([&] { ls = mtmc::serial::dbscan(pts, 0.25, 20); });
        const double tp = time_best_of([&] { lp = mtmc::lift::dbscan(pts, 0.25, 20); });
        // serial reference may permute labels; compare cluster partitions
        bool equal = ls.size() == lp.size();
        if (equal) {
            std::map<int, int> fwd, bwd;
            for (std::size_t i = 0; i < ls.size() && equal; ++i) {
                if ((ls[i] < 0) != (lp[i] < 0)) equal = false;
                if (ls[i] < 0) continue;
                auto f = fwd.emplace(ls[i], lp[i]);
                auto b = bwd.emplace(lp[i], ls[i]);
                if (f.first->second != lp[i] || b.first->second != ls[i]) equal = false;
            }
        }
        report("dbscan", ts, tp, equal);
    }

    // --- render + lift on a small synthetic setup ---
    {
        mtmc::synth::ScenarioConfig cfg;
        cfg.image_width = 960;
        cfg.image_height = 540;
        cfg.camera_focal = 6000.0;
        cfg.classes = {{1, 4, 1.4, 1.4, 1.9, 0.8, false}};
        const auto cams = mtmc::synth::make_cameras(cfg);
        const auto targets = mtmc::synth::make_targets(cfg);
        std::vector<mtmc::synth::Obb> boxes;
        for (const auto& t : targets) boxes.push_back(t.obb_at(25));
        const std::vector<char> visible(targets.size(), 1);

        mtmc::synth::RenderedFrame rs, rp;
        const double ts = time_best_of(
            [&] { rs = mtmc::serial::render_depth_frame(cams[0], boxes, visible); });
        const double tp = time_best_of(
            [&] { rp = mtmc::synth::render_depth_frame(cams[0], boxes, visible); });
        report("render", ts, tp, rs.depth.values == rp.depth.values && rs.winner == rp.winner);

        // full-frame mask over the first target
        mtmc::ingest::Bitmap mask;
        mask.width = cfg.image_width;
        mask.height = cfg.image_height;
        mask.data.assign(rp.winner.size(), 0);
        for (std::size_t i = 0; i < rp.winner.size(); ++i)
            if (rp.winner[i] == 0) mask.data[i] = 1;
        mtmc::ingest::Detection2D det;
        det.camera_id = 0;
        det.score = 1.0;
        det.embedding = {1.0, 0.0};
        rp.depth.frame = 0;
        mtmc::lift::LiftParams lp_params;
        std::vector<mtmc::lift::LiftInput> inputs{{&det, &mask, &rp.depth, &cams[0]}};
        mtmc::lift::TargetCloud cs, cp;
        const double tls = time_best_of([&] { cs = mtmc::serial::lift_target(inputs, 1, 1, lp_params); });
        const double tlp = time_best_of([&] { cp = mtmc::lift::lift_target(inputs, 1, 1, lp_params); });
        bool equal = cs.points.size() == cp.points.size();
        for (std::size_t i = 0; i < cs.points.size() && equal; ++i)
            equal = cs.points[i].x == cp.points[i].x && cs.points[i].y == cp.points[i].y &&
                    cs.points[i].z == cp.points[i].z;
        report("lift", tls, tlp, equal);
    }
    return 0;
}
