#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "gr3d/eval.hpp"
#include "helpers.hpp"

using namespace gr3d;

namespace {

Question mcq(const std::string& truth, std::vector<std::string> options) {
    Question q;
    q.scene_id = "s";
    q.task = "relative_distance";
    q.kind = QuestionKind::Mcq;
    q.prompt = "which?";
    q.options = std::move(options);
    q.truth_mcq = truth;
    return q;
}

Question numeric(double truth) {
    Question q;
    q.scene_id = "s";
    q.task = "absolute_distance";
    q.kind = QuestionKind::Numeric;
    q.prompt = "how far?";
    q.truth_numeric = truth;
    return q;
}

} // namespace

TEST_CASE("score_numeric walks the confidence threshold ladder") {
    CHECK(score_numeric(2.0, 2.0) == 1.0);
    CHECK(score_numeric(1.9, 2.0) == 0.9);
    CHECK(score_numeric(1.0, 2.0) == 0.0);
    CHECK(score_numeric(3.0, 2.0) == 0.0);
    CHECK(score_numeric(1.95, 2.0) == 1.0);   // rel 0.025 < every threshold
    CHECK(score_numeric(1.002, 1.0) == 1.0);
    CHECK(score_numeric(1.9, 1.0) == 0.0);    // rel 0.9
    CHECK(score_numeric(0.51, 1.0) == 0.1);   // rel 0.49, only the 0.50 rung
    CHECK(score_numeric(0.88, 1.0) == 0.8);   // rel 0.12, rungs 0.50 through 0.15
    CHECK(score_numeric(-1.0, 2.0) == 0.0);
    CHECK(score_numeric(std::nan(""), 2.0) == 0.0);
    CHECK_THROWS_AS(score_numeric(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(score_numeric(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("score_numeric is scale invariant") {
    Rng rng(99);
    for (int k = 0; k < 1000; ++k) {
        const double truth = rng.uniform(0.05, 50.0);
        const double answer = truth * rng.uniform(0.0, 2.0);
        const double s = rng.uniform(0.01, 100.0);
        CHECK(score_numeric(answer, truth) == score_numeric(s * answer, s * truth));
    }
}

TEST_CASE("mcq answers are matched on the first standalone letter") {
    const Question q = mcq("B", {"one", "two", "three", "four"});
    CHECK(score_answer(q, "B").score == 1.0);
    CHECK(score_answer(q, "ANSWER: b").score == 1.0);
    CHECK(score_answer(q, "the answer is (B).").score == 1.0);
    CHECK(score_answer(q, "A").score == 0.0);
    CHECK(score_answer(q, "ANSWER: C, not B").score == 0.0); // first letter wins

    CHECK(score_answer(q, "").unparseable);
    CHECK(score_answer(q, "maybe").unparseable);     // no standalone a-d letter
    CHECK(score_answer(q, "AB").unparseable);        // flanked by alnum
    CHECK(score_answer(q, "E").unparseable);         // out of option range
    CHECK_FALSE(score_answer(q, "x: b").unparseable);
}

TEST_CASE("numeric answers are matched on the first parseable number") {
    const Question q = numeric(2.0);
    CHECK(score_answer(q, "2").score == 1.0);
    CHECK(score_answer(q, "ANSWER: about 2.0 meters").score == 1.0);
    CHECK(score_answer(q, "roughly 1.9m, maybe 2.1").score == 0.9);
    CHECK(score_answer(q, "-2").score == 0.0);
    CHECK_FALSE(score_answer(q, "-2").unparseable);
    CHECK(score_answer(q, "").unparseable);
    CHECK(score_answer(q, "no idea").unparseable);
    CHECK(score_answer(q, "... - . +").unparseable);
    CHECK(score_answer(q, ".5 plus 1.5").score == 0.0); // reads 0.5
}

TEST_CASE("aggregate averages tasks, not questions") {
    std::vector<ScoreRecord> records;
    auto add = [&](const char* task, double score) {
        ScoreRecord r;
        r.scene_id = "s";
        r.task = task;
        r.score = score;
        records.push_back(r);
    };
    add("object_count", 1.0);
    add("object_count", 0.0);
    add("object_count", 0.5);
    add("room_size", 1.0);

    const ScoreReport rep = aggregate(records);
    CHECK(rep.task_means.at("object_count") == 0.5);
    CHECK(rep.task_means.at("room_size") == 1.0);
    CHECK(rep.task_counts.at("object_count") == 3);
    CHECK(rep.overall == 0.75);

    std::vector<ScoreRecord> shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937{7});
    const ScoreReport rep2 = aggregate(shuffled);
    CHECK(rep2.overall == rep.overall);
    CHECK(rep2.task_means == rep.task_means);

    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("aggregate sums in sorted order for permutation-exact means") {
    Rng rng(3);
    std::vector<ScoreRecord> records;
    for (int k = 0; k < 200; ++k) {
        ScoreRecord r;
        r.task = "object_size";
        r.score = rng.uniform(0.0, 1.0);
        records.push_back(r);
    }
    const double mean = aggregate(records).task_means.at("object_size");
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(records.begin(), records.end(), std::mt19937{std::uint32_t(trial)});
        CHECK(aggregate(records).task_means.at("object_size") == mean);
    }
}

TEST_CASE("render_table lays out methods by task with gaps dashed") {
    ScoreRecord count;
    count.task = "object_count";
    count.score = 1.0;
    ScoreRecord size;
    size.task = "object_size";
    size.score = 0.5;

    const auto a = aggregate({count, size});
    const auto b = aggregate({count});
    const std::string table = render_table({{"ours", a}, {"baseline", b}});

    CHECK(table.find("| Method | Avg. | Obj. Count | Obj. Size |") != std::string::npos);
    CHECK(table.find("| ours | 75.0 | 100.0 | 50.0 |") != std::string::npos);
    CHECK(table.find("| baseline | 100.0 | 100.0 | - |") != std::string::npos);
    CHECK(table.find("Tasks without questions:") != std::string::npos);
    CHECK(table.find("route_plan") != std::string::npos);
    CHECK(table.find("Room Size") == std::string::npos); // absent everywhere
}

TEST_CASE("questions round-trip through json including categories") {
    Question q = mcq("A", {"near", "far"});
    q.categories = {"chair", "desk", "bed"};
    const Question back = question_from_json(question_to_json(q));
    CHECK(back.task == q.task);
    CHECK(back.kind == QuestionKind::Mcq);
    CHECK(back.options == q.options);
    CHECK(back.truth_mcq == "A");
    CHECK(back.categories == q.categories);

    const Question n = numeric(3.25);
    const Question nback = question_from_json(question_to_json(n));
    CHECK(nback.kind == QuestionKind::Numeric);
    CHECK(nback.truth_numeric == 3.25);
    CHECK(nback.categories.empty());
}

TEST_CASE("question validation rejects malformed input") {
    nlohmann::json j = question_to_json(numeric(1.0));
    j["task"] = "telepathy";
    CHECK_THROWS_AS(question_from_json(j), DataError);

    j = question_to_json(numeric(1.0));
    j["kind"] = "essay";
    CHECK_THROWS_AS(question_from_json(j), DataError);

    j = question_to_json(mcq("C", {"a", "b"})); // truth beyond options
    CHECK_THROWS_AS(question_from_json(j), DataError);

    j = question_to_json(numeric(1.0));
    j.erase("prompt");
    CHECK_THROWS_AS(question_from_json(j), DataError);
}

TEST_CASE("question files round-trip as jsonl") {
    testutil::TempDir tmp("questions");
    std::vector<Question> qs = {numeric(2.5), mcq("B", {"x", "y", "z"})};
    qs[1].categories = {"sofa", "stool"};
    const auto path = tmp.path / "questions.jsonl";
    save_questions(path, qs);
    const auto back = load_questions(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].truth_numeric == 2.5);
    CHECK(back[1].options == qs[1].options);
    CHECK(back[1].categories == qs[1].categories);
    CHECK_THROWS_AS(load_questions(tmp.path / "absent.jsonl"), DataError);
}

TEST_CASE("question text appends lettered options") {
    const Question q = mcq("A", {"near", "far"});
    CHECK(question_text(q) == "which?\nA. near\nB. far");
    CHECK(question_text(numeric(1.0)) == "how far?");
}

TEST_CASE("score csv escapes answers and flags unparseable rows") {
    testutil::TempDir tmp("csv");
    ScoreRecord rec;
    rec.scene_id = "synth-1";
    rec.task = "object_count";
    rec.answer = "a, \"quoted\" answer";
    rec.score = 0.25;
    rec.unparseable = true;
    const auto path = tmp.path / "scores.csv";
    write_score_csv(path, {rec});

    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "scene_id,task,kind,score,unparseable,answer");
    CHECK(row == "synth-1,object_count,numeric,0.250,1,\"a, \"\"quoted\"\" answer\"");
}
