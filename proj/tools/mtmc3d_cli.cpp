#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtmc/errors.hpp"
#include "mtmc/eval.hpp"
#include "mtmc/pipeline.hpp"
#include "mtmc/synth.hpp"

namespace {

int run_command(const std::string& scene, const std::string& config_path, const std::string& out_path,
                const std::string& log_path, const std::string& mode_str, bool bypass, int workers) {
    mtmc::pipeline::PipelineConfig cfg;
    if (!config_path.empty()) cfg = mtmc::pipeline::PipelineConfig::from_json_file(config_path);
    if (bypass) cfg.bypass_sct = true;
    if (workers > 0) cfg.workers = workers;
    const auto mode =
        mode_str == "2d" ? mtmc::pipeline::RunMode::TwoD : mtmc::pipeline::RunMode::ThreeD;
    const auto stats = mtmc::pipeline::run_scene(scene, cfg, mode, out_path, log_path);
    std::printf("frames=%d detections=%d clusters=%d splits=%d reactivations=%d fusion_groups=%d "
                "fallback_boxes=%d rows=%d\n",
                stats.frames, stats.detections, stats.clusters, stats.splits, stats.reactivations,
                stats.fusion_groups, stats.fallback_boxes, stats.rows_written);
    return 0;
}

int gen_command(const std::string& config_path, const std::string& out_dir, std::int64_t seed) {
    auto cfg = mtmc::synth::ScenarioConfig::from_json_file(config_path);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    const auto summary = mtmc::synth::generate(cfg, out_dir);
    std::printf("cameras=%d targets=%d frames=%d detections=%d\n", summary.cameras, summary.targets,
                summary.frames, summary.detections);
    return 0;
}

int eval_command(const std::string& gt_path, const std::string& pred_path, const std::string& csv_path) {
    const auto gt = mtmc::eval::TrackSet::from_results_file(gt_path);
    const auto pred = mtmc::eval::TrackSet::from_results_file(pred_path);
    const auto scores = mtmc::eval::hota(gt, pred);
    std::printf("HOTA %.6f DetA %.6f AssA %.6f LocA %.6f\n", scores.hota, scores.deta, scores.assa,
                scores.loca);
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw mtmc::DataError("cannot write CSV: " + csv_path);
        csv << "alpha,hota,deta,assa,loca\n";
        for (std::size_t i = 0; i < scores.alphas.size(); ++i) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%.2f,%.6f,%.6f,%.6f,%.6f\n", scores.alphas[i],
                          scores.hota_alpha[i], scores.deta_alpha[i], scores.assa_alpha[i],
                          scores.loca_alpha[i]);
            csv << buf;
        }
    }
    return 0;
}

int inspect_command(const std::string& scene, const std::string& config_path, int frame,
                    const std::string& out_path, bool bypass, int workers) {
    mtmc::pipeline::PipelineConfig cfg;
    if (!config_path.empty()) cfg = mtmc::pipeline::PipelineConfig::from_json_file(config_path);
    if (bypass) cfg.bypass_sct = true;
    if (workers > 0) cfg.workers = workers;
    nlohmann::json dump;
    const auto tmp_results = out_path.empty() ? std::string("/tmp/mtmc3d_inspect_results.txt")
                                              : out_path + ".results.txt";
    mtmc::pipeline::run_scene(scene, cfg, mtmc::pipeline::RunMode::ThreeD, tmp_results, "", frame,
                              &dump);
    if (dump.is_null()) throw mtmc::DataError("frame " + std::to_string(frame) + " was never processed");
    if (out_path.empty()) {
        std::cout << dump.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw mtmc::DataError("cannot write inspect dump: " + out_path);
        out << dump.dump(2) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online 3D multi-target multi-camera tracker"};
    app.require_subcommand(0, 1);

    bool print_config = false;
    app.add_flag("--print-config", print_config, "Print the default pipeline config as JSON and exit");

    // run
    auto* run = app.add_subcommand("run", "Track a scene directory and write 3D (or 2D) results");
    std::string run_scene_dir, run_config, run_out, run_log, run_mode = "3d";
    bool run_bypass = false;
    int run_workers = 0;
    run->add_option("--scene", run_scene_dir, "Scene directory")->required();
    run->add_option("--config", run_config, "Pipeline config JSON");
    run->add_option("--out", run_out, "Output results file")->required();
    run->add_option("--log", run_log, "Per-frame JSONL counters/events log");
    run->add_option("--mode", run_mode, "2d or 3d")->check(CLI::IsMember({"2d", "3d"}));
    run->add_flag("--bypass-sct", run_bypass, "Use precomputed local track IDs");
    run->add_option("--workers", run_workers, "OpenMP worker threads (0 = default)");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic scene");
    std::string gen_config, gen_out;
    std::int64_t gen_seed = -1;
    gen->add_option("--config", gen_config, "Scenario config JSON")->required();
    gen->add_option("--out", gen_out, "Output scene directory")->required();
    gen->add_option("--seed", gen_seed, "Override the scenario seed");

    // eval
    auto* ev = app.add_subcommand("eval", "Score a results file against ground truth");
    std::string eval_gt, eval_pred, eval_csv;
    ev->add_option("--gt", eval_gt, "Ground-truth results file")->required();
    ev->add_option("--pred", eval_pred, "Predicted results file")->required();
    ev->add_option("--csv", eval_csv, "Optional per-alpha CSV output");

    // inspect
    auto* insp = app.add_subcommand("inspect", "Dump per-stage JSON for one frame");
    std::string insp_scene, insp_config, insp_out;
    int insp_frame = 0, insp_workers = 0;
    bool insp_bypass = false;
    insp->add_option("--scene", insp_scene, "Scene directory")->required();
    insp->add_option("--config", insp_config, "Pipeline config JSON");
    insp->add_option("--frame", insp_frame, "Frame to dump")->required();
    insp->add_option("--out", insp_out, "Output JSON path (stdout when omitted)");
    insp->add_flag("--bypass-sct", insp_bypass, "Use precomputed local track IDs");
    insp->add_option("--workers", insp_workers, "OpenMP worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (print_config) {
            std::cout << mtmc::pipeline::PipelineConfig{}.to_json().dump(2) << "\n";
            return 0;
        }
        if (run->parsed())
            return run_command(run_scene_dir, run_config, run_out, run_log, run_mode, run_bypass,
                               run_workers);
        if (gen->parsed()) return gen_command(gen_config, gen_out, gen_seed);
        if (ev->parsed()) return eval_command(eval_gt, eval_pred, eval_csv);
        if (insp->parsed())
            return inspect_command(insp_scene, insp_config, insp_frame, insp_out, insp_bypass,
                                   insp_workers);
        std::cout << app.help() << "\n";
        return 0;
    } catch (const mtmc::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const mtmc::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
