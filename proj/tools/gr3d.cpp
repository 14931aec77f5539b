#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gr3d/gr3d.hpp"

namespace {

using namespace gr3d;

PipelineConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return load_config(path);
}

AnswerSource parse_source(const std::string& s) {
    if (s == "model") return AnswerSource::Model;
    if (s == "extraction") return AnswerSource::Extraction;
    if (s == "oracle") return AnswerSource::Oracle;
    throw ConfigError("unknown answer source \"" + s + "\" (model|extraction|oracle)");
}

void report_stage(const char* stage, bool ran) {
    std::cout << stage << ": " << (ran ? "done" : "up to date") << "\n";
}

int run_cli(int argc, char** argv) {
    CLI::App app{"gr3d: 3D geometric references for multi-view spatial question answering"};
    app.require_subcommand(1);
    app.fallthrough(); // allow --config after the subcommand name

    std::string config_path;
    app.add_option("--config", config_path, "pipeline config json (default: built-in)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic scenes with ground truth");
    std::string synth_out;
    std::uint64_t synth_seed = 1;
    int synth_scenes = 1;
    synth::SynthParams sp;
    synth::ExportOptions eo;
    int synth_threads = 1;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--seed", synth_seed, "base scene seed");
    synth_cmd->add_option("--scenes", synth_scenes, "number of scenes (seeds seed..seed+n-1)");
    synth_cmd->add_option("--boxes", sp.n_boxes, "box objects per scene");
    synth_cmd->add_option("--cylinders", sp.n_cylinders, "cylinder objects per scene");
    synth_cmd->add_option("--cameras", sp.n_cameras, "views per scene");
    synth_cmd->add_option("--width", sp.image_width, "image width");
    synth_cmd->add_option("--height", sp.image_height, "image height");
    synth_cmd->add_option("--recon-scale", eo.recon_scale, "divide exported depths by this");
    synth_cmd->add_option("--depth-noise", eo.depth_noise, "gaussian depth noise sigma, meters");
    synth_cmd->add_option("--yaw", eo.world_yaw_deg, "reconstruction frame yaw, degrees");
    synth_cmd->add_option("--tilt", eo.world_tilt_deg, "reconstruction frame tilt, degrees");
    synth_cmd->add_flag("--png-depth", eo.png_depth, "write 16-bit png depth instead of .fraw");
    synth_cmd->add_option("--threads", synth_threads, "render threads");

    // per-scene stages
    std::vector<std::string> scene_dirs;
    const auto add_scenes = [&scene_dirs](CLI::App* cmd) {
        cmd->add_option("--scene", scene_dirs, "scene directory (repeatable)")->required();
    };
    auto* extract_cmd = app.add_subcommand("extract", "build the aligned scene representation");
    add_scenes(extract_cmd);
    auto* annotate_cmd = app.add_subcommand("annotate", "draw ID markers on every view");
    add_scenes(annotate_cmd);
    auto* prompt_cmd = app.add_subcommand("prompt", "write geometric references and the prompt");
    add_scenes(prompt_cmd);

    auto* questions_cmd =
        app.add_subcommand("questions", "generate evaluation questions from ground truth");
    add_scenes(questions_cmd);
    std::uint64_t qa_seed = 1;
    QaParams qa;
    questions_cmd->add_option("--seed", qa_seed, "question sampling seed");
    questions_cmd->add_option("--per-task", qa.per_task, "questions per task");

    auto* ask_cmd = app.add_subcommand("ask", "answer the questions");
    add_scenes(ask_cmd);
    std::string source_name = "model";
    ask_cmd->add_option("--source", source_name, "model|extraction|oracle");

    auto* eval_cmd = app.add_subcommand("eval", "score answers and render the report");
    add_scenes(eval_cmd);
    std::string method = "method";
    std::string report_out, csv_out;
    eval_cmd->add_option("--method", method, "row label in the report table");
    eval_cmd->add_option("--report", report_out, "also write the markdown table here");
    eval_cmd->add_option("--csv", csv_out, "also write all score records here");

    auto* run_cmd = app.add_subcommand("run", "extract, annotate, prompt, questions, ask, eval");
    add_scenes(run_cmd);
    run_cmd->add_option("--source", source_name, "model|extraction|oracle");
    run_cmd->add_option("--seed", qa_seed, "question sampling seed");
    run_cmd->add_option("--per-task", qa.per_task, "questions per task");
    run_cmd->add_option("--report", report_out, "also write the markdown table here");

    auto* config_cmd = app.add_subcommand("config", "print the canonical config and its hash");

    CLI11_PARSE(app, argc, argv);

    const PipelineConfig cfg = load_config_or_default(config_path);

    if (*synth_cmd) {
        for (int k = 0; k < synth_scenes; ++k) {
            const std::uint64_t seed = synth_seed + static_cast<std::uint64_t>(k);
            const fs::path dir = fs::path(synth_out) / ("scene_" + std::to_string(seed));
            const bool ran = stage_synth(dir, seed, sp, eo, synth_threads);
            std::cout << "synth " << dir.string() << ": " << (ran ? "done" : "up to date")
                      << "\n";
        }
        return 0;
    }
    if (*config_cmd) {
        std::cout << config_to_json(cfg).dump(2) << "\n";
        std::cout << "hash: " << config_hash(cfg) << "\n";
        return 0;
    }

    std::vector<ScenePaths> scenes;
    for (const auto& dir : scene_dirs) scenes.push_back(ScenePaths{dir});

    if (*extract_cmd)
        for (const auto& s : scenes) report_stage("extract", stage_extract(s, cfg));
    if (*annotate_cmd)
        for (const auto& s : scenes) report_stage("annotate", stage_annotate(s, cfg));
    if (*prompt_cmd)
        for (const auto& s : scenes) report_stage("prompt", stage_prompt(s, cfg));
    if (*questions_cmd)
        for (const auto& s : scenes)
            report_stage("questions", stage_questions(s, cfg, qa_seed, qa));
    if (*ask_cmd) {
        const AnswerSource source = parse_source(source_name);
        for (const auto& s : scenes) report_stage("ask", stage_ask(s, cfg, source));
    }
    if (*eval_cmd || *run_cmd) {
        if (*run_cmd) {
            const AnswerSource source = parse_source(source_name);
            method = answer_source_name(source);
            for (const auto& s : scenes) {
                stage_extract(s, cfg);
                stage_annotate(s, cfg);
                stage_prompt(s, cfg);
                if (fs::exists(s.truth())) stage_questions(s, cfg, qa_seed, qa);
                stage_ask(s, cfg, source);
                stage_eval(s, method);
            }
        }
        std::vector<ScoreRecord> records;
        for (const auto& s : scenes) {
            const auto scene_records = score_scene(s);
            records.insert(records.end(), scene_records.begin(), scene_records.end());
        }
        const ScoreReport report = aggregate(records);
        const std::string table = render_table({{method, report}});
        std::cout << table;
        if (!report_out.empty()) {
            std::ofstream out(report_out, std::ios::binary);
            if (!out) throw DataError("cannot write report: " + report_out);
            out << table;
        }
        if (!csv_out.empty()) write_score_csv(csv_out, records);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const gr3d::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const gr3d::AuthError& e) {
        std::cerr << "auth error: " << e.what() << "\n";
        return 4;
    } catch (const gr3d::NetworkError& e) {
        std::cerr << "network error: " << e.what() << "\n";
        return 4;
    } catch (const gr3d::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    }
}
