#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "mtmc/errors.hpp"
#include "mtmc/eval.hpp"
#include "mtmc/serial_ref.hpp"

using namespace mtmc;
using namespace mtmc::eval;

namespace {

Box3D box(double x, double y, double z, double l, double w, double h, double yaw = 0.0) {
    Box3D b;
    b.x = x;
    b.y = y;
    b.z = z;
    b.length = l;
    b.width = w;
    b.height = h;
    b.yaw = yaw;
    b.score = 1.0;
    return b;
}

Box3D random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-2.0, 2.0);
    std::uniform_real_distribution<double> dim(0.4, 2.5);
    std::uniform_real_distribution<double> ang(-3.14, 3.14);
    return box(pos(rng), pos(rng), 1.0 + 0.1 * pos(rng), dim(rng), dim(rng), dim(rng), ang(rng));
}

} // namespace

TEST_CASE("iou3d: identical boxes at any yaw give 1") {
    for (double yaw : {0.0, 0.3, -1.2, 3.0}) {
        const auto a = box(1, 2, 0.9, 1.5, 0.8, 1.8, yaw);
        CHECK(iou3d(a, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("iou3d: unit cubes two meters apart are disjoint") {
    CHECK(iou3d(box(0, 0, 0.5, 1, 1, 1), box(2, 0, 0.5, 1, 1, 1)) == doctest::Approx(0.0));
}

TEST_CASE("iou3d: axis-aligned overlap has a closed form") {
    // 1x1x1 cubes offset by 0.5 in x: inter 0.5, union 1.5
    CHECK(iou3d(box(0, 0, 0.5, 1, 1, 1), box(0.5, 0, 0.5, 1, 1, 1)) == doctest::Approx(0.5 / 1.5));
}

TEST_CASE("iou3d matches Monte-Carlo estimates on rotated pairs") {
    std::mt19937_64 rng(81);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_box(rng);
        auto b = random_box(rng);
        b.x = a.x + 0.3;  // keep most pairs overlapping
        b.y = a.y - 0.2;
        const double analytic = iou3d(a, b);
        const double mc = serial::iou3d_monte_carlo(a, b, 200000, 1234 + trial);
        CHECK(std::abs(analytic - mc) < 5e-3);
    }
}

TEST_CASE("iou3d is symmetric and rigid-transform invariant") {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_box(rng);
        auto b = random_box(rng);
        CHECK(iou3d(a, b) == doctest::Approx(iou3d(b, a)).epsilon(1e-9));

        // translate + rotate both by the same planar rigid transform
        std::uniform_real_distribution<double> ang(-3.0, 3.0);
        std::uniform_real_distribution<double> tr(-5.0, 5.0);
        const double th = ang(rng), tx = tr(rng), ty = tr(rng), tz = tr(rng);
        auto rigid = [&](Box3D v) {
            const double c = std::cos(th), s = std::sin(th);
            const double nx = c * v.x - s * v.y + tx;
            const double ny = s * v.x + c * v.y + ty;
            v.x = nx;
            v.y = ny;
            v.z += tz;
            v.yaw += th;
            return v;
        };
        CHECK(iou3d(rigid(a), rigid(b)) == doctest::Approx(iou3d(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("hota: perfect prediction scores 1 everywhere") {
    TrackSet gt;
    std::mt19937_64 rng(85);
    for (int f = 0; f < 5; ++f)
        for (int id = 1; id <= 3; ++id) gt.insert(f, id, box(id * 3.0, f * 0.1, 0.9, 1.2, 0.8, 1.8));
    TrackSet pred;
    for (const auto& [key, b] : gt.boxes) pred.insert(key.first, key.second + 100, b);
    const auto scores = hota(gt, pred);
    CHECK(scores.hota == doctest::Approx(1.0));
    CHECK(scores.deta == doctest::Approx(1.0));
    CHECK(scores.assa == doctest::Approx(1.0));
    CHECK(scores.loca == doctest::Approx(1.0));
}

TEST_CASE("hota: empty prediction gives zero DetA and HOTA") {
    TrackSet gt;
    gt.insert(0, 1, box(0, 0, 0.9, 1, 1, 1.8));
    gt.insert(1, 1, box(0.1, 0, 0.9, 1, 1, 1.8));
    const auto scores = hota(gt, TrackSet{});
    CHECK(scores.deta == doctest::Approx(0.0));
    CHECK(scores.hota == doctest::Approx(0.0));
}

TEST_CASE("hota rejects empty ground truth") {
    TrackSet pred;
    pred.insert(0, 1, box(0, 0, 0.9, 1, 1, 1.8));
    CHECK_THROWS_AS(hota(TrackSet{}, pred), ValidationError);
}

TEST_CASE("hota on the two-frame toy instance equals the hand-enumerated value") {
    // two GT tracks; one prediction covers A at frame 0 and B at frame 1
    TrackSet gt, pred;
    const auto at = [&](double x) { return box(x, 0, 0.9, 1, 1, 1.8); };
    gt.insert(0, 1, at(0.0));
    gt.insert(0, 2, at(10.0));
    gt.insert(1, 1, at(0.0));
    gt.insert(1, 2, at(10.0));
    pred.insert(0, 9, at(0.0));   // matches gt 1
    pred.insert(1, 9, at(10.0));  // matches gt 2
    const auto scores = hota(gt, pred);
    // exhaustive matching per frame: one TP per frame (IoU 1), one FN, no FP.
    // DetA = 2/(2+2+0) = 0.5. Each TP pair (g, 9): m = 1, gt count 2,
    // pred count 2 -> A = 1/3. AssA = 1/3. HOTA = sqrt(1/6). LocA = 1.
    CHECK(scores.deta == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(scores.assa == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(scores.hota == doctest::Approx(std::sqrt(0.5 / 3.0)).epsilon(1e-12));
    CHECK(scores.loca == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hota is invariant under prediction id relabeling") {
    std::mt19937_64 rng(87);
    TrackSet gt, pred_a, pred_b;
    std::map<int, int> relabel{{1, 71}, {2, 12}, {3, 55}};
    for (int f = 0; f < 6; ++f)
        for (int id = 1; id <= 3; ++id) {
            const auto b = box(id * 2.5 + 0.01 * f, 0.2 * f, 0.9, 1.1, 0.9, 1.8, 0.1 * f);
            gt.insert(f, id, b);
            auto noisy = b;
            noisy.x += 0.05 * ((f + id) % 3 - 1);
            if ((f + id) % 4 != 0) {  // a few misses
                pred_a.insert(f, id, noisy);
                pred_b.insert(f, relabel[id], noisy);
            }
        }
    const auto sa = hota(gt, pred_a);
    const auto sb = hota(gt, pred_b);
    CHECK(sa.hota == doctest::Approx(sb.hota).epsilon(1e-12));
    CHECK(sa.deta == doctest::Approx(sb.deta).epsilon(1e-12));
    CHECK(sa.assa == doctest::Approx(sb.assa).epsilon(1e-12));
    CHECK(sa.loca == doctest::Approx(sb.loca).epsilon(1e-12));
}

TEST_CASE("per-alpha HOTA never exceeds the larger of DetA and AssA") {
    std::mt19937_64 rng(89);
    TrackSet gt, pred;
    for (int f = 0; f < 4; ++f)
        for (int id = 1; id <= 2; ++id) {
            gt.insert(f, id, random_box(rng));
            pred.insert(f, id + 10, random_box(rng));
        }
    const auto s = hota(gt, pred);
    for (std::size_t i = 0; i < s.alphas.size(); ++i)
        CHECK(s.hota_alpha[i] <= std::max(s.deta_alpha[i], s.assa_alpha[i]) + 1e-12);
}
