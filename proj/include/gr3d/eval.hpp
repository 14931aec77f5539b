#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gr3d/errors.hpp"

namespace gr3d {

namespace fs = std::filesystem;

inline const std::array<std::string, 8>& task_names() {
    static const std::array<std::string, 8> names = {
        "object_count",      "absolute_distance", "object_size",        "room_size",
        "relative_distance", "relative_direction", "route_plan", "appearance_order"};
    return names;
}

enum class QuestionKind { Mcq, Numeric };

struct Question {
    std::string scene_id;
    std::string task;
    QuestionKind kind = QuestionKind::Numeric;
    std::string prompt;
    std::vector<std::string> options;     ///< mcq only; letters A.. map to indices
    std::string truth_mcq;                ///< option letter
    double truth_numeric = 0.0;
    std::vector<std::string> categories;  ///< referenced categories, for geometric answerers
};

/// Question as sent to a model: the prompt plus lettered options for mcq.
inline std::string question_text(const Question& q) {
    std::string out = q.prompt;
    for (std::size_t k = 0; k < q.options.size(); ++k) {
        out += "\n";
        out += static_cast<char>('A' + k);
        out += ". ";
        out += q.options[k];
    }
    return out;
}

namespace detail {

inline void validate_question(const Question& q) {
    bool known = false;
    for (const auto& name : task_names()) known |= (name == q.task);
    if (!known) throw DataError("question: unknown task \"" + q.task + "\"");
    if (q.kind == QuestionKind::Mcq) {
        if (q.options.size() < 2) throw DataError("question: mcq needs >= 2 options");
        if (q.truth_mcq.size() != 1 ||
            q.truth_mcq[0] < 'A' ||
            q.truth_mcq[0] >= static_cast<char>('A' + q.options.size()))
            throw DataError("question: mcq truth must be an option letter");
    } else {
        if (!std::isfinite(q.truth_numeric))
            throw DataError("question: numeric truth must be finite");
    }
}

} // namespace detail

inline nlohmann::json question_to_json(const Question& q) {
    nlohmann::json j;
    j["scene_id"] = q.scene_id;
    j["task"] = q.task;
    j["kind"] = q.kind == QuestionKind::Mcq ? "mcq" : "numeric";
    j["prompt"] = q.prompt;
    if (q.kind == QuestionKind::Mcq) {
        j["options"] = q.options;
        j["truth"] = q.truth_mcq;
    } else {
        j["truth"] = q.truth_numeric;
    }
    if (!q.categories.empty()) j["categories"] = q.categories;
    return j;
}

inline Question question_from_json(const nlohmann::json& j) {
    Question q;
    try {
        q.scene_id = j.at("scene_id").get<std::string>();
        q.task = j.at("task").get<std::string>();
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "mcq")
            q.kind = QuestionKind::Mcq;
        else if (kind == "numeric")
            q.kind = QuestionKind::Numeric;
        else
            throw DataError("question: unknown kind \"" + kind + "\"");
        q.prompt = j.at("prompt").get<std::string>();
        if (q.kind == QuestionKind::Mcq) {
            q.options = j.at("options").get<std::vector<std::string>>();
            q.truth_mcq = j.at("truth").get<std::string>();
        } else {
            q.truth_numeric = j.at("truth").get<double>();
        }
        if (j.contains("categories"))
            q.categories = j.at("categories").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("question: ") + e.what());
    }
    detail::validate_question(q);
    return q;
}

inline void save_questions(const fs::path& path, const std::vector<Question>& questions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write questions: " + path.string());
    for (const auto& q : questions) out << question_to_json(q).dump() << "\n";
}

inline std::vector<Question> load_questions(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open questions: " + path.string());
    std::vector<Question> questions;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("questions " + path.string() + ": " + e.what());
        }
        questions.push_back(question_from_json(j));
    }
    return questions;
}

// ---------------------------------------------------------------------------
// Scoring

/// Mean relative accuracy: fraction of confidence thresholds
/// theta in {0.50, 0.55, ..., 0.95} where |answer - truth| / truth < 1 - theta.
inline double score_numeric(double answer, double truth) {
    if (!(truth > 0)) throw std::invalid_argument("score_numeric: truth must be > 0");
    if (!std::isfinite(answer)) return 0.0;
    const double rel = std::abs(answer - truth) / truth;
    int hits = 0;
    for (int i = 0; i < 10; ++i)
        if (rel < (50 - 5 * i) / 100.0) ++hits;
    return hits / 10.0;
}

namespace detail {

/// First standalone option letter in the answer, case-insensitive:
/// a single alphabetic character not flanked by alphanumerics, within the
/// option range. Returns 0 when nothing parses.
inline char extract_option_letter(const std::string& answer, std::size_t n_options) {
    for (std::size_t k = 0; k < answer.size(); ++k) {
        const unsigned char c = static_cast<unsigned char>(answer[k]);
        if (!std::isalpha(c)) continue;
        const bool prev_ok =
            k == 0 || !std::isalnum(static_cast<unsigned char>(answer[k - 1]));
        const bool next_ok = k + 1 >= answer.size() ||
                             !std::isalnum(static_cast<unsigned char>(answer[k + 1]));
        if (!prev_ok || !next_ok) continue;
        const char upper = static_cast<char>(std::toupper(c));
        if (upper >= 'A' && upper < static_cast<char>('A' + n_options)) return upper;
    }
    return 0;
}

/// First parseable floating-point value in the answer, NaN when absent.
inline double extract_number(const std::string& answer) {
    for (std::size_t k = 0; k < answer.size(); ++k) {
        const char c = answer[k];
        if (!std::isdigit(static_cast<unsigned char>(c)) && c != '-' && c != '+' && c != '.')
            continue;
        const char* start = answer.c_str() + k;
        char* end = nullptr;
        const double v = std::strtod(start, &end);
        if (end > start && std::isfinite(v)) {
            bool has_digit = false;
            for (const char* p = start; p < end; ++p)
                has_digit |= std::isdigit(static_cast<unsigned char>(*p)) != 0;
            if (has_digit) return v;
        }
    }
    return std::nan("");
}

} // namespace detail

struct ScoreRecord {
    std::string scene_id;
    std::string task;
    QuestionKind kind = QuestionKind::Numeric;
    std::string answer;
    double score = 0.0;
    bool unparseable = false;
};

inline ScoreRecord score_answer(const Question& q, const std::string& answer) {
    ScoreRecord rec;
    rec.scene_id = q.scene_id;
    rec.task = q.task;
    rec.kind = q.kind;
    rec.answer = answer;
    if (q.kind == QuestionKind::Mcq) {
        const char letter = detail::extract_option_letter(answer, q.options.size());
        if (letter == 0) {
            rec.unparseable = true;
            rec.score = 0.0;
        } else {
            rec.score = (letter == q.truth_mcq[0]) ? 1.0 : 0.0;
        }
    } else {
        const double value = detail::extract_number(answer);
        if (std::isnan(value)) {
            rec.unparseable = true;
            rec.score = 0.0;
        } else {
            rec.score = score_numeric(value, q.truth_numeric);
        }
    }
    return rec;
}

struct ScoreReport {
    std::map<std::string, double> task_means;
    std::map<std::string, std::size_t> task_counts;
    double overall = 0.0;
    std::vector<ScoreRecord> records;
};

/// Per-task means plus their unweighted average (each task counts once,
/// regardless of how many questions it has). Scores are summed in sorted
/// order so the result is exactly permutation-invariant.
inline ScoreReport aggregate(const std::vector<ScoreRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    ScoreReport report;
    report.records = records;
    std::map<std::string, std::vector<double>> buckets;
    for (const auto& rec : records) buckets[rec.task].push_back(rec.score);
    double total = 0.0;
    for (auto& [task, scores] : buckets) {
        std::sort(scores.begin(), scores.end());
        double sum = 0.0;
        for (double s : scores) sum += s;
        report.task_means[task] = sum / static_cast<double>(scores.size());
        report.task_counts[task] = scores.size();
        total += report.task_means[task];
    }
    report.overall = total / static_cast<double>(report.task_means.size());
    return report;
}

/// Markdown table, tasks as columns, one row per method, scores as
/// percentages. Tasks with no questions anywhere are dropped with a trailing
/// note.
inline std::string render_table(
    const std::vector<std::pair<std::string, ScoreReport>>& methods) {
    static const std::map<std::string, std::string> headers = {
        {"object_count", "Obj. Count"},      {"absolute_distance", "Abs. Dist."},
        {"object_size", "Obj. Size"},        {"room_size", "Room Size"},
        {"relative_distance", "Rel. Dist."}, {"relative_direction", "Rel. Dir."},
        {"route_plan", "Route Plan"},        {"appearance_order", "Appr. Order"}};

    std::vector<std::string> present;
    for (const auto& task : task_names()) {
        bool any = false;
        for (const auto& [name, report] : methods) any |= report.task_means.count(task) > 0;
        if (any) present.push_back(task);
    }

    std::ostringstream out;
    out << "| Method | Avg. |";
    for (const auto& task : present) out << " " << headers.at(task) << " |";
    out << "\n|---|---|";
    for (std::size_t k = 0; k < present.size(); ++k) out << "---|";
    out << "\n";
    char buf[32];
    for (const auto& [name, report] : methods) {
        out << "| " << name << " | ";
        std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * report.overall);
        out << buf << " |";
        for (const auto& task : present) {
            auto it = report.task_means.find(task);
            if (it == report.task_means.end()) {
                out << " - |";
            } else {
                std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * it->second);
                out << " " << buf << " |";
            }
        }
        out << "\n";
    }
    std::vector<std::string> missing;
    for (const auto& task : task_names())
        if (std::find(present.begin(), present.end(), task) == present.end())
            missing.push_back(task);
    if (!missing.empty()) {
        out << "\nTasks without questions:";
        for (const auto& task : missing) out << " " << task;
        out << "\n";
    }
    return out.str();
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

inline void write_score_csv(const fs::path& path, const std::vector<ScoreRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write csv: " + path.string());
    out << "scene_id,task,kind,score,unparseable,answer\n";
    char buf[32];
    for (const auto& rec : records) {
        std::snprintf(buf, sizeof(buf), "%.3f", rec.score);
        out << detail::csv_quote(rec.scene_id) << "," << rec.task << ","
            << (rec.kind == QuestionKind::Mcq ? "mcq" : "numeric") << "," << buf << ","
            << (rec.unparseable ? 1 : 0) << "," << detail::csv_quote(rec.answer) << "\n";
    }
}

} // namespace gr3d
