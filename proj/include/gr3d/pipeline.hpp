#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gr3d/annotate.hpp"
#include "gr3d/client.hpp"
#include "gr3d/config.hpp"
#include "gr3d/errors.hpp"
#include "gr3d/eval.hpp"
#include "gr3d/extract.hpp"
#include "gr3d/sha256.hpp"
#include "gr3d/spatial_qa.hpp"
#include "gr3d/synth.hpp"
#include "gr3d/textref.hpp"

namespace gr3d {

namespace fs = std::filesystem;

/// Fixed on-disk layout per scene. Inputs (manifest, frames, optional
/// ground-truth sidecar) live in the scene directory; everything the pipeline
/// produces goes under work/.
struct ScenePaths {
    fs::path dir;

    fs::path manifest() const { return dir / "manifest.json"; }
    fs::path truth() const { return dir / "scene_truth.json"; }
    fs::path work() const { return dir / "work"; }
    fs::path objects() const { return work() / "objects.txt"; }
    fs::path annotated_dir() const { return work() / "annotated"; }
    fs::path annotations_dir() const { return work() / "annotations"; }
    fs::path references() const { return work() / "references.txt"; }
    fs::path prompt() const { return work() / "prompt.txt"; }
    fs::path questions() const { return work() / "questions.jsonl"; }
    fs::path answers() const { return work() / "answers.jsonl"; }
    fs::path scores_csv() const { return work() / "scores.csv"; }
    fs::path report() const { return work() / "report.md"; }
    fs::path stamps() const { return work() / "stamps"; }
    fs::path cache() const { return work() / "cache"; }

    fs::path annotated_image(std::size_t frame) const {
        char name[48];
        std::snprintf(name, sizeof(name), "annotated_%03zu.png", frame);
        return annotated_dir() / name;
    }
    fs::path annotation_sidecar(std::size_t frame) const {
        char name[48];
        std::snprintf(name, sizeof(name), "frame_%03zu.txt", frame);
        return annotations_dir() / name;
    }
};

// ---------------------------------------------------------------------------
// Stage stamps. A stage is current when its stamp records the same config
// hash, the same stage parameters, and matching content hashes for every
// input and output file; anything else reruns the stage. Hashes cover file
// content, so a hand-edited artifact is detected and rebuilt.

namespace pipeline_detail {

inline nlohmann::json hash_files(const fs::path& root, const std::vector<fs::path>& files) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : files)
        j[fs::relative(f, root).generic_string()] = sha256_file(f);
    return j;
}

inline bool stage_current(const fs::path& stamp_path, const std::string& stage,
                          const std::string& config_hash, const nlohmann::json& params,
                          const fs::path& root, const std::vector<fs::path>& inputs,
                          const std::vector<fs::path>& outputs) {
    std::ifstream in(stamp_path);
    if (!in) return false;
    nlohmann::json stamp;
    try {
        in >> stamp;
        if (stamp.at("stage") != stage) return false;
        if (stamp.at("config_hash") != config_hash) return false;
        if (stamp.at("params") != params) return false;
        if (stamp.at("inputs") != hash_files(root, inputs)) return false;
        if (stamp.at("outputs") != hash_files(root, outputs)) return false;
    } catch (...) {
        return false; // unreadable stamp or missing file: stale
    }
    return true;
}

inline void write_stamp(const fs::path& stamp_path, const std::string& stage,
                        const std::string& config_hash, const nlohmann::json& params,
                        const fs::path& root, const std::vector<fs::path>& inputs,
                        const std::vector<fs::path>& outputs) {
    nlohmann::json stamp;
    stamp["stage"] = stage;
    stamp["config_hash"] = config_hash;
    stamp["params"] = params;
    stamp["inputs"] = hash_files(root, inputs);
    stamp["outputs"] = hash_files(root, outputs);
    fs::create_directories(stamp_path.parent_path());
    std::ofstream out(stamp_path, std::ios::binary);
    if (!out) throw DataError("cannot write stamp: " + stamp_path.string());
    out << stamp.dump(2) << "\n";
}

inline std::vector<fs::path> frame_files(const SceneManifest& m) {
    std::vector<fs::path> files;
    for (const auto& f : m.frames) {
        files.push_back(f.image_path);
        files.push_back(f.depth_path);
        files.push_back(f.label_path);
    }
    return files;
}

/// Stable per-scene seed derived from a base seed and the scene id.
inline std::uint64_t seed_for_scene(std::uint64_t base, const std::string& scene_id) {
    const std::string hex = sha256_hex(scene_id).substr(0, 16);
    return base ^ std::stoull(hex, nullptr, 16);
}

} // namespace pipeline_detail

// ---------------------------------------------------------------------------
// Stages. Each returns true when it did work and false when the stamp showed
// the outputs are already current.

/// Generates a synthetic scene and exports it as a reconstruction would look.
inline bool stage_synth(const fs::path& dir, std::uint64_t seed, const synth::SynthParams& params,
                        const synth::ExportOptions& opt, int threads = 1) {
    nlohmann::json p;
    p["seed"] = seed;
    p["n_boxes"] = params.n_boxes;
    p["n_cylinders"] = params.n_cylinders;
    p["n_cameras"] = params.n_cameras;
    p["image_width"] = params.image_width;
    p["image_height"] = params.image_height;
    p["focal"] = params.focal;
    p["l_shape_prob"] = params.l_shape_prob;
    p["recon_scale"] = opt.recon_scale;
    p["depth_noise"] = opt.depth_noise;
    p["world_yaw_deg"] = opt.world_yaw_deg;
    p["world_tilt_deg"] = opt.world_tilt_deg;
    p["png_depth"] = opt.png_depth;
    p["noise_seed"] = opt.noise_seed;

    const fs::path stamp = dir / "work" / "stamps" / "synth.json";
    std::vector<fs::path> outputs = {dir / "manifest.json", dir / "scene_truth.json"};
    if (pipeline_detail::stage_current(stamp, "synth", "-", p, dir, {}, outputs)) return false;

    const synth::SynthScene scene = synth::generate_scene(seed, params);
    synth::export_manifest(scene, dir, opt, threads);
    pipeline_detail::write_stamp(stamp, "synth", "-", p, dir, {}, outputs);
    return true;
}

/// Point cloud -> aligned metric frame -> room polygon + object primitives,
/// written as the objects file.
inline bool stage_extract(const ScenePaths& sp, const PipelineConfig& cfg) {
    const SceneManifest manifest = load_manifest(sp.manifest());
    std::vector<fs::path> inputs = pipeline_detail::frame_files(manifest);
    inputs.push_back(sp.manifest());
    const std::vector<fs::path> outputs = {sp.objects()};
    const std::string hash = config_hash(cfg);
    const fs::path stamp = sp.stamps() / "extract.json";
    if (pipeline_detail::stage_current(stamp, "extract", hash, {}, sp.dir, inputs, outputs))
        return false;

    const ExtractionResult result = extract_scene(manifest, cfg, cfg.jobs);
    fs::create_directories(sp.work());
    write_objects(sp.objects(), result, hash, cfg.precision);
    pipeline_detail::write_stamp(stamp, "extract", hash, {}, sp.dir, inputs, outputs);
    return true;
}

/// Draws ID markers on every frame and writes per-frame sidecars with the
/// projected positions and cull decisions.
inline bool stage_annotate(const ScenePaths& sp, const PipelineConfig& cfg) {
    const SceneManifest manifest = load_manifest(sp.manifest());
    std::vector<fs::path> inputs = pipeline_detail::frame_files(manifest);
    inputs.push_back(sp.manifest());
    inputs.push_back(sp.objects());
    std::vector<fs::path> outputs;
    for (std::size_t fi = 0; fi < manifest.frames.size(); ++fi) {
        outputs.push_back(sp.annotated_image(fi));
        outputs.push_back(sp.annotation_sidecar(fi));
    }
    const std::string hash = config_hash(cfg);
    const fs::path stamp = sp.stamps() / "annotate.json";
    if (pipeline_detail::stage_current(stamp, "annotate", hash, {}, sp.dir, inputs, outputs))
        return false;

    const ObjectsFile objects = load_objects(sp.objects());
    fs::create_directories(sp.annotated_dir());
    fs::create_directories(sp.annotations_dir());
    for (std::size_t fi = 0; fi < manifest.frames.size(); ++fi) {
        const Frame& frame = manifest.frames[fi];
        const FrameData data = load_frame_data(manifest, fi);
        const std::vector<Annotation> annotations =
            annotate_frame(objects.result.objects, objects.result.alignment, frame.intrinsics,
                           frame.pose, data.depth, cfg.occlusion_tau_floor);
        ImageRgb8 image = read_png_rgb8(frame.image_path);
        render_annotations(image, annotations);
        write_png_rgb8(sp.annotated_image(fi), image);
        write_annotation_sidecar(sp.annotation_sidecar(fi), annotations);
    }
    pipeline_detail::write_stamp(stamp, "annotate", hash, {}, sp.dir, inputs, outputs);
    return true;
}

namespace pipeline_detail {

inline std::vector<CameraRef> camera_refs(const SceneManifest& manifest) {
    std::vector<CameraRef> refs;
    for (const auto& f : manifest.frames) refs.push_back({f.intrinsics, f.pose});
    return refs;
}

inline PromptOptions prompt_options(const PipelineConfig& cfg, const SceneManifest& manifest,
                                    const std::string& question) {
    PromptOptions opt;
    opt.mode = prompt_mode_from_string(cfg.prompt_mode);
    opt.precision = cfg.precision;
    opt.include_polygon = cfg.prompt_include_polygon;
    opt.question = question;
    if (opt.mode == PromptMode::CameraParams) opt.cameras = camera_refs(manifest);
    return opt;
}

} // namespace pipeline_detail

/// Serializes the geometric references and the question-free prompt preamble.
inline bool stage_prompt(const ScenePaths& sp, const PipelineConfig& cfg) {
    const std::vector<fs::path> inputs = {sp.manifest(), sp.objects()};
    const std::vector<fs::path> outputs = {sp.references(), sp.prompt()};
    const std::string hash = config_hash(cfg);
    const fs::path stamp = sp.stamps() / "prompt.json";
    if (pipeline_detail::stage_current(stamp, "prompt", hash, {}, sp.dir, inputs, outputs))
        return false;

    const SceneManifest manifest = load_manifest(sp.manifest());
    const ObjectsFile objects = load_objects(sp.objects());
    const std::vector<std::string> refs =
        serialize_refs(objects.result.objects, cfg.precision);

    fs::create_directories(sp.work());
    {
        std::ofstream out(sp.references(), std::ios::binary);
        if (!out) throw DataError("cannot write references: " + sp.references().string());
        for (const auto& line : refs) out << line << "\n";
    }
    {
        std::ofstream out(sp.prompt(), std::ios::binary);
        if (!out) throw DataError("cannot write prompt: " + sp.prompt().string());
        out << build_prompt(refs, objects.result.room,
                            pipeline_detail::prompt_options(cfg, manifest, ""));
    }
    pipeline_detail::write_stamp(stamp, "prompt", hash, {}, sp.dir, inputs, outputs);
    return true;
}

/// Generates the question set from the ground-truth sidecar. The QA seed is
/// mixed with the scene id so one base seed gives every scene its own
/// questions.
inline bool stage_questions(const ScenePaths& sp, const PipelineConfig& cfg,
                            std::uint64_t base_seed, const QaParams& qa = {}) {
    nlohmann::json p;
    p["seed"] = base_seed;
    p["per_task"] = qa.per_task;
    p["min_distance"] = qa.min_distance;
    p["min_extent"] = qa.min_extent;
    p["min_gap"] = qa.min_gap;
    p["min_angle_deg"] = qa.min_angle_deg;
    const std::vector<fs::path> inputs = {sp.manifest(), sp.truth()};
    const std::vector<fs::path> outputs = {sp.questions()};
    const std::string hash = config_hash(cfg);
    const fs::path stamp = sp.stamps() / "questions.json";
    if (pipeline_detail::stage_current(stamp, "questions", hash, p, sp.dir, inputs, outputs))
        return false;

    const SceneManifest manifest = load_manifest(sp.manifest());
    const synth::SynthScene scene = synth::load_scene_truth(sp.truth());
    const SceneView view =
        view_from_truth(scene, manifest.scene_id, cfg.occlusion_tau_floor);
    const std::vector<Question> questions = generate_questions(
        view, pipeline_detail::seed_for_scene(base_seed, manifest.scene_id), qa);
    if (questions.empty()) throw DataError("questions: no valid questions for " + sp.dir.string());
    fs::create_directories(sp.work());
    save_questions(sp.questions(), questions);
    pipeline_detail::write_stamp(stamp, "questions", hash, p, sp.dir, inputs, outputs);
    return true;
}

/// Who produces the answers: a chat model over the annotated views, the
/// geometric answerer over this pipeline's own extraction, or the geometric
/// answerer over ground truth (the upper bound / sanity reference).
enum class AnswerSource { Model, Extraction, Oracle };

inline const char* answer_source_name(AnswerSource s) {
    switch (s) {
        case AnswerSource::Model: return "model";
        case AnswerSource::Extraction: return "extraction";
        case AnswerSource::Oracle: return "oracle";
    }
    return "?";
}

namespace pipeline_detail {

inline SceneView extraction_view(const ScenePaths& sp, const PipelineConfig& cfg) {
    const SceneManifest manifest = load_manifest(sp.manifest());
    ObjectsFile objects = load_objects(sp.objects());
    // The objects file carries no semantics; category names come from the
    // manifest's label table.
    for (auto& obj : objects.result.objects) {
        const auto it = manifest.labels.find(obj.label);
        if (it != manifest.labels.end()) obj.category = it->second;
    }
    std::vector<std::vector<Annotation>> frames;
    for (std::size_t fi = 0; fi < manifest.frames.size(); ++fi) {
        const Frame& frame = manifest.frames[fi];
        const FrameData data = load_frame_data(manifest, fi);
        frames.push_back(annotate_frame(objects.result.objects, objects.result.alignment,
                                        frame.intrinsics, frame.pose, data.depth,
                                        cfg.occlusion_tau_floor));
    }
    return view_from_extraction(manifest.scene_id, objects.result, frames);
}

} // namespace pipeline_detail

/// Answers every question and writes answers.jsonl, one row per question in
/// question order. Model answering goes through the response cache; failures
/// are recorded per row, never thrown, so a flaky endpoint cannot lose the
/// finished rows.
inline bool stage_ask(const ScenePaths& sp, const PipelineConfig& cfg, AnswerSource source) {
    nlohmann::json p;
    p["source"] = answer_source_name(source);
    std::vector<fs::path> inputs = {sp.questions()};
    if (source == AnswerSource::Oracle) {
        inputs.push_back(sp.truth());
        inputs.push_back(sp.manifest());
    } else {
        inputs.push_back(sp.manifest());
        inputs.push_back(sp.objects());
    }
    const std::vector<fs::path> outputs = {sp.answers()};
    const std::string hash = config_hash(cfg);
    const fs::path stamp = sp.stamps() / "ask.json";
    if (pipeline_detail::stage_current(stamp, "ask", hash, p, sp.dir, inputs, outputs))
        return false;

    const SceneManifest manifest = load_manifest(sp.manifest());
    const std::vector<Question> questions = load_questions(sp.questions());

    std::vector<nlohmann::json> rows(questions.size());
    for (std::size_t i = 0; i < questions.size(); ++i) {
        rows[i]["index"] = i;
        rows[i]["scene_id"] = questions[i].scene_id;
        rows[i]["task"] = questions[i].task;
        rows[i]["source"] = answer_source_name(source);
    }

    if (source == AnswerSource::Model) {
        const ObjectsFile objects = load_objects(sp.objects());
        const std::vector<std::string> refs =
            serialize_refs(objects.result.objects, cfg.precision);
        const PromptMode mode = prompt_mode_from_string(cfg.prompt_mode);
        std::vector<fs::path> images;
        for (std::size_t fi = 0; fi < manifest.frames.size(); ++fi) {
            const bool annotated =
                mode == PromptMode::Full || mode == PromptMode::SceneDescription;
            images.push_back(annotated ? sp.annotated_image(fi) : manifest.frames[fi].image_path);
        }
        std::vector<QueryJob> jobs;
        for (const auto& q : questions) {
            QueryJob job;
            job.prompt = build_prompt(refs, objects.result.room,
                                      pipeline_detail::prompt_options(cfg, manifest,
                                                                      question_text(q)));
            job.images = images;
            jobs.push_back(std::move(job));
        }
        const std::vector<BatchItem> items = batch_query(jobs, cfg.jobs, sp.cache(), cfg.query);
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].ok) {
                rows[i]["answer"] = items[i].result.answer;
                rows[i]["raw"] = items[i].result.raw;
                rows[i]["parse_warning"] = items[i].result.parse_warning;
                rows[i]["attempts"] = items[i].result.attempts;
                rows[i]["cache_hit"] = items[i].result.cache_hit;
                if (items[i].result.prompt_tokens >= 0)
                    rows[i]["prompt_tokens"] = items[i].result.prompt_tokens;
                if (items[i].result.completion_tokens >= 0)
                    rows[i]["completion_tokens"] = items[i].result.completion_tokens;
            } else {
                rows[i]["answer"] = "";
                rows[i]["error"] = items[i].error;
            }
        }
    } else {
        const SceneView view =
            source == AnswerSource::Oracle
                ? view_from_truth(synth::load_scene_truth(sp.truth()), manifest.scene_id,
                                  cfg.occlusion_tau_floor)
                : pipeline_detail::extraction_view(sp, cfg);
        for (std::size_t i = 0; i < questions.size(); ++i)
            rows[i]["answer"] = answer_question(questions[i], view);
    }

    fs::create_directories(sp.work());
    std::ofstream out(sp.answers(), std::ios::binary);
    if (!out) throw DataError("cannot write answers: " + sp.answers().string());
    for (const auto& row : rows) out << row.dump() << "\n";
    out.close();
    pipeline_detail::write_stamp(stamp, "ask", hash, p, sp.dir, inputs, outputs);
    return true;
}

/// answers.jsonl rows in question order; a missing or error row scores as an
/// empty answer.
inline std::vector<std::string> load_answers(const fs::path& path, std::size_t n_questions) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open answers: " + path.string());
    std::vector<std::string> answers(n_questions);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            const std::size_t idx = j.at("index").get<std::size_t>();
            if (idx >= n_questions)
                throw DataError("answers " + path.string() + ": index out of range");
            answers[idx] = j.value("answer", "");
        } catch (const nlohmann::json::exception& e) {
            throw DataError("answers " + path.string() + ": " + e.what());
        }
    }
    return answers;
}

/// Scores one scene's answers against its questions.
inline std::vector<ScoreRecord> score_scene(const ScenePaths& sp) {
    const std::vector<Question> questions = load_questions(sp.questions());
    const std::vector<std::string> answers = load_answers(sp.answers(), questions.size());
    std::vector<ScoreRecord> records;
    for (std::size_t i = 0; i < questions.size(); ++i)
        records.push_back(score_answer(questions[i], answers[i]));
    return records;
}

/// Scores and writes scores.csv + report.md for one scene.
inline ScoreReport stage_eval(const ScenePaths& sp, const std::string& method_name) {
    const std::vector<ScoreRecord> records = score_scene(sp);
    const ScoreReport report = aggregate(records);
    fs::create_directories(sp.work());
    write_score_csv(sp.scores_csv(), records);
    std::ofstream out(sp.report(), std::ios::binary);
    if (!out) throw DataError("cannot write report: " + sp.report().string());
    out << render_table({{method_name, report}});
    return report;
}

/// Everything after ingestion for one scene: extract, annotate, prompt,
/// questions (when ground truth exists), ask, eval.
inline ScoreReport run_scene(const ScenePaths& sp, const PipelineConfig& cfg, AnswerSource source,
                             std::uint64_t qa_seed, const QaParams& qa = {}) {
    stage_extract(sp, cfg);
    stage_annotate(sp, cfg);
    stage_prompt(sp, cfg);
    if (fs::exists(sp.truth()))
        stage_questions(sp, cfg, qa_seed, qa);
    else if (!fs::exists(sp.questions()))
        throw DataError("run: no questions and no ground truth in " + sp.dir.string());
    stage_ask(sp, cfg, source);
    return stage_eval(sp, answer_source_name(source));
}

} // namespace gr3d
