// The OpenMP kernels must agree with the serial references and produce
// identical output regardless of thread count.
#include <doctest.h>

#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mtmc/ingest.hpp"
#include "mtmc/lift.hpp"
#include "mtmc/serial_ref.hpp"
#include "mtmc/synth.hpp"

using namespace mtmc;

namespace {

struct ThreadGuard {
#ifdef _OPENMP
    int saved = omp_get_max_threads();
    ~ThreadGuard() { omp_set_num_threads(saved); }
    void set(int n) { omp_set_num_threads(n); }
#else
    void set(int) {}
#endif
};

std::vector<lift::CloudPoint> random_blobs(std::mt19937_64& rng, int blobs, int per_blob) {
    std::normal_distribution<double> g(0.0, 0.25);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    std::vector<lift::CloudPoint> pts;
    for (int b = 0; b < blobs; ++b) {
        const double cx = u(rng), cy = u(rng), cz = u(rng);
        for (int i = 0; i < per_blob; ++i) pts.push_back({cx + g(rng), cy + g(rng), cz + g(rng), 0});
    }
    for (int i = 0; i < per_blob / 2; ++i) pts.push_back({u(rng) * 2, u(rng) * 2, u(rng) * 2, 0});
    return pts;
}

} // namespace

TEST_CASE("erosion kernel equals the serial reference on a large mask") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ingest::Bitmap bmp;
    bmp.width = 320;
    bmp.height = 240;
    bmp.data.assign(static_cast<std::size_t>(bmp.width) * bmp.height, 0);
    for (auto& px : bmp.data) px = u(rng) < 0.65 ? 1 : 0;
    CHECK(ingest::erode(bmp).data == serial::erode(bmp).data);
}

TEST_CASE("dbscan labels are identical across thread counts") {
    std::mt19937_64 rng(103);
    const auto pts = random_blobs(rng, 4, 300);
    ThreadGuard guard;
    guard.set(1);
    const auto one = lift::dbscan(pts, 0.3, 15);
    guard.set(3);
    const auto three = lift::dbscan(pts, 0.3, 15);
    CHECK(one == three);  // exact label equality, not just partition
}

TEST_CASE("render kernel equals the serial reference and is thread-invariant") {
    synth::ScenarioConfig cfg;
    cfg.image_width = 160;
    cfg.image_height = 120;
    cfg.camera_count = 1;
    cfg.camera_ring_radius = 6.0;
    cfg.camera_height = 5.0;
    cfg.camera_focal = 380.0;
    cfg.classes = {{1, 3, 0.8, 0.8, 1.4, 0.5, false}};
    const auto cams = synth::make_cameras(cfg);
    const auto targets = synth::make_targets(cfg);
    std::vector<synth::Obb> boxes;
    for (const auto& t : targets) boxes.push_back(t.obb_at(7));
    const std::vector<char> visible(targets.size(), 1);

    ThreadGuard guard;
    guard.set(3);
    const auto parallel = synth::render_depth_frame(cams[0], boxes, visible);
    const auto serial_out = serial::render_depth_frame(cams[0], boxes, visible);
    CHECK(parallel.depth.values == serial_out.depth.values);
    CHECK(parallel.winner == serial_out.winner);

    guard.set(1);
    const auto single = synth::render_depth_frame(cams[0], boxes, visible);
    CHECK(parallel.depth.values == single.depth.values);
}

TEST_CASE("lift kernel equals the serial reference bit for bit") {
    synth::ScenarioConfig cfg;
    cfg.image_width = 160;
    cfg.image_height = 120;
    cfg.camera_count = 2;
    cfg.camera_ring_radius = 6.0;
    cfg.camera_height = 5.0;
    cfg.camera_focal = 380.0;
    cfg.classes = {{1, 1, 0.9, 0.9, 1.3, 0.5, false}};
    const auto cams = synth::make_cameras(cfg);
    const auto targets = synth::make_targets(cfg);
    std::vector<synth::Obb> boxes{targets[0].obb_at(3)};
    const std::vector<char> visible{1};

    std::vector<ingest::DepthMap> depths;
    std::vector<ingest::Bitmap> masks;
    std::vector<ingest::Detection2D> dets;
    for (const auto& cam : cams) {
        auto rendered = synth::render_depth_frame(cam, boxes, visible);
        rendered.depth.frame = 0;
        ingest::Bitmap mask;
        mask.width = cfg.image_width;
        mask.height = cfg.image_height;
        mask.data.assign(rendered.winner.size(), 0);
        for (std::size_t i = 0; i < rendered.winner.size(); ++i)
            if (rendered.winner[i] == 0) mask.data[i] = 1;
        depths.push_back(std::move(rendered.depth));
        masks.push_back(std::move(mask));
        ingest::Detection2D det;
        det.camera_id = cam.camera_id;
        det.score = 0.9;
        det.embedding = {1.0, 0.0};
        dets.push_back(det);
    }
    std::vector<lift::LiftInput> inputs;
    for (std::size_t i = 0; i < cams.size(); ++i)
        inputs.push_back({&dets[i], &masks[i], &depths[i], &cams[i]});

    for (int stride : {1, 2, 3}) {
        lift::LiftParams params;
        params.pixel_stride = stride;
        ThreadGuard guard;
        guard.set(3);
        const auto fast = lift::lift_target(inputs, 1, 1, params);
        const auto slow = serial::lift_target(inputs, 1, 1, params);
        REQUIRE(fast.points.size() == slow.points.size());
        for (std::size_t i = 0; i < fast.points.size(); ++i) {
            CHECK(fast.points[i].x == slow.points[i].x);
            CHECK(fast.points[i].y == slow.points[i].y);
            CHECK(fast.points[i].z == slow.points[i].z);
            CHECK(fast.points[i].camera_id == slow.points[i].camera_id);
        }
    }
}
