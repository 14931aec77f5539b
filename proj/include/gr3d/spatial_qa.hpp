#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gr3d/annotate.hpp"
#include "gr3d/eval.hpp"
#include "gr3d/extract.hpp"
#include "gr3d/format.hpp"
#include "gr3d/rng.hpp"
#include "gr3d/synth.hpp"

namespace gr3d {

// ---------------------------------------------------------------------------
// A scene "view" is the minimum a geometric answerer needs: object geometry in
// a z-up metric frame with the floor at z = 0, plus per-object first-visible
// frame indices. Every question below is invariant under z-rotation and xy
// translation of that frame, so a view built from ground truth and one built
// from an independently aligned reconstruction answer the same questions.

struct ViewObject {
    std::string category;
    SceneObject geo;
    int first_frame = -1;            ///< first view where the center is visible
    bool appearance_reliable = false; ///< visibility is clear of border/occlusion edge cases
};

struct SceneView {
    std::string scene_id;
    std::vector<ViewObject> objects;
    double room_area = 0.0;
    double room_height = 0.0;
    std::size_t n_frames = 0;
};

namespace qa_detail {

/// Distance (pixels) from the continuous projection to the nearest image
/// edge: positive inside, negative outside, -inf behind the camera.
inline double border_margin(const Vec3& point, const synth::SynthCamera& cam) {
    const auto proj = project(point, cam.pose, cam.intrinsics);
    if (!proj) return -std::numeric_limits<double>::infinity();
    const double di = std::min(proj->pixel.i, cam.intrinsics.width - 1.0 - proj->pixel.i);
    const double dj = std::min(proj->pixel.j, cam.intrinsics.height - 1.0 - proj->pixel.j);
    return std::min(di, dj);
}

} // namespace qa_detail

/// Builds the ground-truth view. An object's appearance is flagged unreliable
/// when a measured reconstruction could plausibly disagree about the first
/// visible frame: the center projects within `border_px` of an image edge, or
/// an earlier occlusion is shallower than twice the occlusion tolerance the
/// annotator would use.
inline SceneView view_from_truth(const synth::SynthScene& scene, const std::string& scene_id,
                                 double tau_floor = 0.1, double border_px = 8.0) {
    SceneView view;
    view.scene_id = scene_id;
    view.room_area = scene.room.area;
    view.room_height = scene.room.height;
    view.n_frames = scene.cameras.size();
    for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
        ViewObject vo;
        vo.category = scene.objects[oi].category;
        vo.geo = scene.objects[oi];
        const Vec3 center = vo.geo.center();
        const double tau = std::max(tau_floor, half_diagonal(vo.geo));
        bool reliable = true;
        for (std::size_t f = 0; f < scene.cameras.size(); ++f) {
            const auto& cam = scene.cameras[f];
            double surface = 0.0;
            const synth::Visibility vis =
                synth::visibility_oracle(scene, center, static_cast<int>(oi), cam, &surface);
            const double margin = qa_detail::border_margin(center, cam);
            if (vis == synth::Visibility::Visible) {
                if (margin < border_px) reliable = false;
                vo.first_frame = static_cast<int>(f);
                break;
            }
            if (vis == synth::Visibility::Occluded) {
                const Vec3 x_cam = cam.pose.R * center + cam.pose.t;
                if (x_cam.z() - surface <= 2.0 * tau) reliable = false;
            } else if (margin > -border_px) {
                reliable = false; // barely off-image; a shifted estimate may land inside
            }
        }
        vo.appearance_reliable = reliable && vo.first_frame >= 0;
        view.objects.push_back(std::move(vo));
    }
    return view;
}

/// Builds the measured view from an extraction plus per-frame annotations.
/// First appearance is the first frame whose annotation for the object id is
/// not culled.
inline SceneView view_from_extraction(const std::string& scene_id, const ExtractionResult& result,
                                      const std::vector<std::vector<Annotation>>& frames) {
    SceneView view;
    view.scene_id = scene_id;
    view.room_area = result.room.area;
    view.room_height = result.room.height;
    view.n_frames = frames.size();
    for (const auto& obj : result.objects) {
        ViewObject vo;
        vo.category = obj.category;
        vo.geo = obj;
        for (std::size_t f = 0; f < frames.size() && vo.first_frame < 0; ++f)
            for (const auto& a : frames[f])
                if (a.object_id == obj.id && !a.culled) {
                    vo.first_frame = static_cast<int>(f);
                    break;
                }
        vo.appearance_reliable = vo.first_frame >= 0;
        view.objects.push_back(std::move(vo));
    }
    return view;
}

// ---------------------------------------------------------------------------
// Deterministic answerer. Questions carry the referenced category tokens in
// `categories`, so answers come from geometry alone, never from parsing the
// prompt text. An empty string means the view cannot answer (a referenced
// object is missing); callers score that as a miss.

namespace qa_detail {

inline const ViewObject* find_object(const SceneView& view, const std::string& category) {
    const ViewObject* best = nullptr;
    for (const auto& o : view.objects)
        if (o.category == category && (!best || o.geo.point_count > best->geo.point_count))
            best = &o;
    return best;
}

inline Vec2 center_xy(const ViewObject& o) {
    const Vec3 c = o.geo.center();
    return {c.x(), c.y()};
}

/// Longest horizontal dimension; invariant under z-rotations of the frame.
inline double horizontal_extent(const SceneObject& o) {
    if (o.kind == PrimitiveKind::Box) return std::max(o.box.size.x(), o.box.size.y());
    return 2.0 * o.cylinder.radius;
}

inline double cross_z(const Vec2& d, const Vec2& e) { return d.x() * e.y() - d.y() * e.x(); }

inline double angle_deg(const Vec2& d, const Vec2& e) {
    const double nd = d.norm(), ne = e.norm();
    if (nd < 1e-12 || ne < 1e-12) return 0.0;
    const double c = std::clamp(d.dot(e) / (nd * ne), -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

inline std::string display_name(const std::string& category) {
    std::string s = category;
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

inline std::string order_string(const std::vector<std::string>& categories) {
    std::string s;
    for (std::size_t k = 0; k < categories.size(); ++k) {
        if (k) s += ", ";
        s += display_name(categories[k]);
    }
    return s;
}

inline std::string option_letter(std::size_t index) {
    return std::string(1, static_cast<char>('A' + index));
}

} // namespace qa_detail

inline std::string answer_question(const Question& q, const SceneView& view) {
    using namespace qa_detail;
    if (q.task == "object_count") return std::to_string(view.objects.size());
    if (q.task == "room_size") return fixed_str(view.room_area, 2);
    if (q.task == "object_size") {
        const ViewObject* o = find_object(view, q.categories.at(0));
        if (!o) return {};
        return fixed_str(horizontal_extent(o->geo), 2);
    }
    if (q.task == "absolute_distance") {
        const ViewObject* a = find_object(view, q.categories.at(0));
        const ViewObject* b = find_object(view, q.categories.at(1));
        if (!a || !b) return {};
        return fixed_str((a->geo.center() - b->geo.center()).norm(), 2);
    }
    if (q.task == "relative_distance") {
        // categories[0] is the anchor; categories[1..] align with options A..
        const ViewObject* anchor = find_object(view, q.categories.at(0));
        if (!anchor) return {};
        std::size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < q.categories.size(); ++k) {
            const ViewObject* o = find_object(view, q.categories[k]);
            if (!o) continue; // a lost object cannot be the closest
            const double d = (o->geo.center() - anchor->geo.center()).norm();
            if (d < best_dist) {
                best_dist = d;
                best = k;
            }
        }
        if (best == 0) return {};
        return option_letter(best - 1);
    }
    if (q.task == "relative_direction" || q.task == "route_plan") {
        const ViewObject* a = find_object(view, q.categories.at(0));
        const ViewObject* b = find_object(view, q.categories.at(1));
        const ViewObject* c = find_object(view, q.categories.at(2));
        if (!a || !b || !c) return {};
        Vec2 d, e;
        if (q.task == "relative_direction") {
            d = center_xy(*b) - center_xy(*a); // facing direction
            e = center_xy(*c) - center_xy(*a);
        } else {
            d = center_xy(*b) - center_xy(*a); // first leg
            e = center_xy(*c) - center_xy(*b); // second leg
        }
        const std::string want = cross_z(d, e) > 0.0 ? "left" : "right";
        for (std::size_t k = 0; k < q.options.size(); ++k)
            if (q.options[k].find(want) != std::string::npos) return option_letter(k);
        return {};
    }
    if (q.task == "appearance_order") {
        std::vector<std::pair<int, std::string>> order;
        for (const auto& cat : q.categories) {
            const ViewObject* o = find_object(view, cat);
            if (!o || o->first_frame < 0) return {};
            order.emplace_back(o->first_frame, cat);
        }
        std::sort(order.begin(), order.end());
        for (std::size_t k = 1; k < order.size(); ++k)
            if (order[k].first == order[k - 1].first) return {}; // tied order is ambiguous
        std::vector<std::string> cats;
        for (const auto& [frame, cat] : order) cats.push_back(cat);
        const std::string answer = order_string(cats);
        for (std::size_t k = 0; k < q.options.size(); ++k)
            if (q.options[k] == answer) return option_letter(k);
        return {};
    }
    throw std::invalid_argument("answer_question: unknown task \"" + q.task + "\"");
}

// ---------------------------------------------------------------------------
// Question generation. Candidates are enumerated in index order and sampled
// with the seeded generator, so a (view, seed) pair always yields the same
// questions. Margin filters keep answers stable under measurement noise, and
// the stored truth is literally the answerer's output on this view, so a view
// answering its own questions scores 1.0 by construction.

struct QaParams {
    int per_task = 2;            ///< questions per task where combinations exist
    double min_distance = 0.5;   ///< meters, center separation for pair questions
    double min_extent = 0.3;     ///< meters, smallest askable horizontal size
    double min_gap = 0.3;        ///< meters, closest vs runner-up margin
    double min_angle_deg = 15.0; ///< degrees away from collinear for turn questions
};

namespace qa_detail {

inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, int want) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    while (!pool.empty() && static_cast<int>(picked.size()) < want) {
        const std::size_t k = rng.uniform_index(pool.size());
        picked.push_back(pool[k]);
        pool.erase(pool.begin() + static_cast<long>(k));
    }
    return picked;
}

inline void shuffle_strings(Rng& rng, std::vector<std::string>& v) {
    for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[rng.uniform_index(k)]);
}

/// Indices of objects whose category occurs exactly once, so a category token
/// names one object unambiguously.
inline std::vector<std::size_t> unique_category_indices(const SceneView& view) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < view.objects.size(); ++i) {
        int count = 0;
        for (const auto& o : view.objects) count += (o.category == view.objects[i].category);
        if (count == 1) idx.push_back(i);
    }
    return idx;
}

} // namespace qa_detail

inline std::vector<Question> generate_questions(const SceneView& view, std::uint64_t seed,
                                                const QaParams& params = {}) {
    using namespace qa_detail;
    Rng rng(seed);
    std::vector<Question> out;

    const auto finalize = [&](Question q) {
        q.scene_id = view.scene_id;
        const std::string answer = answer_question(q, view);
        if (answer.empty()) return;
        if (q.kind == QuestionKind::Numeric) {
            q.truth_numeric = std::stod(answer);
            if (!(q.truth_numeric > 0.0)) return; // relative scoring needs positive truth
        } else {
            q.truth_mcq = answer;
        }
        detail::validate_question(q);
        out.push_back(std::move(q));
    };

    const std::vector<std::size_t> uniq = unique_category_indices(view);
    const auto cat = [&](std::size_t i) { return view.objects[i].category; };
    const auto ctr = [&](std::size_t i) { return view.objects[i].geo.center(); };

    if (params.per_task >= 1 && !view.objects.empty()) {
        Question q;
        q.task = "object_count";
        q.kind = QuestionKind::Numeric;
        q.prompt = "How many objects are in the room, not counting the floor, the walls, and "
                   "the ceiling?";
        finalize(std::move(q));
    }

    if (params.per_task >= 1 && view.room_area > 0.0) {
        Question q;
        q.task = "room_size";
        q.kind = QuestionKind::Numeric;
        q.prompt = "What is the floor area of the room, in square meters?";
        finalize(std::move(q));
    }

    {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < uniq.size(); ++a)
            for (std::size_t b = a + 1; b < uniq.size(); ++b)
                if ((ctr(uniq[a]) - ctr(uniq[b])).norm() >= params.min_distance)
                    pairs.emplace_back(uniq[a], uniq[b]);
        for (std::size_t k : sample_without_replacement(rng, pairs.size(), params.per_task)) {
            const auto [a, b] = pairs[k];
            Question q;
            q.task = "absolute_distance";
            q.kind = QuestionKind::Numeric;
            q.prompt = "What is the distance in meters between the center of the " +
                       display_name(cat(a)) + " and the center of the " + display_name(cat(b)) +
                       "?";
            q.categories = {cat(a), cat(b)};
            finalize(std::move(q));
        }
    }

    {
        std::vector<std::size_t> sized;
        for (std::size_t i : uniq)
            if (horizontal_extent(view.objects[i].geo) >= params.min_extent) sized.push_back(i);
        for (std::size_t k : sample_without_replacement(rng, sized.size(), params.per_task)) {
            const std::size_t i = sized[k];
            Question q;
            q.task = "object_size";
            q.kind = QuestionKind::Numeric;
            q.prompt = "What is the longest horizontal dimension of the " + display_name(cat(i)) +
                       ", in meters?";
            q.categories = {cat(i)};
            finalize(std::move(q));
        }
    }

    {
        // Anchor plus the nearest others as options; keep only anchors whose
        // closest object beats the runner-up by a clear margin.
        struct Candidate {
            std::size_t anchor;
            std::vector<std::string> options; ///< category tokens, nearest first
        };
        std::vector<Candidate> cands;
        for (std::size_t a : uniq) {
            std::vector<std::pair<double, std::string>> others;
            for (std::size_t b : uniq)
                if (b != a) others.emplace_back((ctr(b) - ctr(a)).norm(), cat(b));
            if (others.size() < 2) continue;
            std::sort(others.begin(), others.end());
            if (others[1].first - others[0].first < params.min_gap) continue;
            Candidate c;
            c.anchor = a;
            for (std::size_t k = 0; k < std::min<std::size_t>(4, others.size()); ++k)
                c.options.push_back(others[k].second);
            cands.push_back(std::move(c));
        }
        for (std::size_t k : sample_without_replacement(rng, cands.size(), params.per_task)) {
            Candidate c = cands[k];
            shuffle_strings(rng, c.options);
            Question q;
            q.task = "relative_distance";
            q.kind = QuestionKind::Mcq;
            q.prompt =
                "Which of the following objects is closest to the " + display_name(cat(c.anchor)) +
                "?";
            for (const auto& token : c.options) q.options.push_back(display_name(token));
            q.categories = c.options;
            q.categories.insert(q.categories.begin(), cat(c.anchor));
            finalize(std::move(q));
        }
    }

    const auto turn_triples = [&](bool route) {
        std::vector<std::array<std::size_t, 3>> triples;
        for (std::size_t a : uniq)
            for (std::size_t b : uniq)
                for (std::size_t c : uniq) {
                    if (a == b || b == c || a == c) continue;
                    const Vec2 pa = {ctr(a).x(), ctr(a).y()};
                    const Vec2 pb = {ctr(b).x(), ctr(b).y()};
                    const Vec2 pc = {ctr(c).x(), ctr(c).y()};
                    const Vec2 d = pb - pa;
                    const Vec2 e = route ? Vec2(pc - pb) : Vec2(pc - pa);
                    if (d.norm() < params.min_distance || e.norm() < params.min_distance)
                        continue;
                    const double ang = angle_deg(d, e);
                    if (ang < params.min_angle_deg || ang > 180.0 - params.min_angle_deg)
                        continue;
                    triples.push_back({a, b, c});
                }
        return triples;
    };

    {
        const auto triples = turn_triples(false);
        for (std::size_t k : sample_without_replacement(rng, triples.size(), params.per_task)) {
            const auto [a, b, c] = triples[k];
            Question q;
            q.task = "relative_direction";
            q.kind = QuestionKind::Mcq;
            q.prompt = "You are standing at the " + display_name(cat(a)) + " and facing the " +
                       display_name(cat(b)) + ". Is the " + display_name(cat(c)) +
                       " to your left or to your right?";
            q.options = {"to the left", "to the right"};
            shuffle_strings(rng, q.options);
            q.categories = {cat(a), cat(b), cat(c)};
            finalize(std::move(q));
        }
    }

    {
        const auto triples = turn_triples(true);
        for (std::size_t k : sample_without_replacement(rng, triples.size(), params.per_task)) {
            const auto [a, b, c] = triples[k];
            Question q;
            q.task = "route_plan";
            q.kind = QuestionKind::Mcq;
            q.prompt = "You start at the " + display_name(cat(a)) + ", walk straight to the " +
                       display_name(cat(b)) + ", and then head to the " + display_name(cat(c)) +
                       ". Which way do you turn at the " + display_name(cat(b)) + "?";
            q.options = {"turn left", "turn right"};
            shuffle_strings(rng, q.options);
            q.categories = {cat(a), cat(b), cat(c)};
            finalize(std::move(q));
        }
    }

    {
        std::vector<std::size_t> reliable;
        for (std::size_t i : uniq)
            if (view.objects[i].appearance_reliable) reliable.push_back(i);
        std::vector<std::array<std::size_t, 3>> triples;
        for (std::size_t a = 0; a < reliable.size(); ++a)
            for (std::size_t b = a + 1; b < reliable.size(); ++b)
                for (std::size_t c = b + 1; c < reliable.size(); ++c) {
                    const int fa = view.objects[reliable[a]].first_frame;
                    const int fb = view.objects[reliable[b]].first_frame;
                    const int fc = view.objects[reliable[c]].first_frame;
                    if (fa != fb && fb != fc && fa != fc)
                        triples.push_back({reliable[a], reliable[b], reliable[c]});
                }
        for (std::size_t k : sample_without_replacement(rng, triples.size(), params.per_task)) {
            const auto triple = triples[k];
            std::vector<std::string> mention = {cat(triple[0]), cat(triple[1]), cat(triple[2])};
            shuffle_strings(rng, mention);

            std::vector<std::pair<int, std::string>> order;
            for (const auto& token : mention)
                order.emplace_back(find_object(view, token)->first_frame, token);
            std::sort(order.begin(), order.end());
            std::vector<std::string> truth_cats;
            for (const auto& [frame, token] : order) truth_cats.push_back(token);

            // All six orderings of the three tokens; the true one plus three
            // random distractors become the options.
            std::vector<std::string> perms;
            std::vector<std::string> sorted = mention;
            std::sort(sorted.begin(), sorted.end());
            do {
                perms.push_back(order_string(sorted));
            } while (std::next_permutation(sorted.begin(), sorted.end()));
            const std::string truth_text = order_string(truth_cats);
            std::erase(perms, truth_text);
            std::vector<std::string> options = {truth_text};
            for (std::size_t p : sample_without_replacement(rng, perms.size(), 3))
                options.push_back(perms[p]);
            shuffle_strings(rng, options);

            Question q;
            q.task = "appearance_order";
            q.kind = QuestionKind::Mcq;
            q.prompt = "Taking the views in order, in which order do the following objects first "
                       "become visible: " +
                       order_string(mention) + "?";
            q.options = options;
            q.categories = mention;
            finalize(std::move(q));
        }
    }

    return out;
}

} // namespace gr3d
