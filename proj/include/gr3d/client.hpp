#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <unistd.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gr3d/config.hpp"
#include "gr3d/errors.hpp"
#include "gr3d/sha256.hpp"

namespace gr3d {

namespace fs = std::filesystem;

struct QueryResult {
    std::string raw;            ///< full assistant message text
    std::string answer;         ///< text after the last "ANSWER:" marker
    bool parse_warning = false; ///< marker missing; answer is the last non-empty line
    int attempts = 0;           ///< requests actually sent (0 on cache hit)
    bool cache_hit = false;
    long prompt_tokens = -1;    ///< -1 when the endpoint reports no usage
    long completion_tokens = -1;
};

namespace client_detail {

inline std::string base64(const std::string& bytes) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const unsigned n = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                           static_cast<unsigned char>(bytes[i + 2]);
        out += alphabet[(n >> 18) & 63];
        out += alphabet[(n >> 12) & 63];
        out += alphabet[(n >> 6) & 63];
        out += alphabet[n & 63];
    }
    if (i + 1 == bytes.size()) {
        const unsigned n = static_cast<unsigned char>(bytes[i]) << 16;
        out += alphabet[(n >> 18) & 63];
        out += alphabet[(n >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const unsigned n = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += alphabet[(n >> 18) & 63];
        out += alphabet[(n >> 12) & 63];
        out += alphabet[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("query: cannot read image " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

/// Evenly spaced frame indices, first and last always included.
inline std::vector<std::size_t> select_frames(std::size_t n, std::size_t max_count) {
    std::vector<std::size_t> idx;
    if (n == 0 || max_count == 0) return idx;
    if (n <= max_count) {
        for (std::size_t k = 0; k < n; ++k) idx.push_back(k);
        return idx;
    }
    for (std::size_t k = 0; k < max_count; ++k)
        idx.push_back(static_cast<std::size_t>(
            std::llround(static_cast<double>(k) * static_cast<double>(n - 1) /
                         static_cast<double>(max_count - 1))));
    return idx;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

/// Splits "http://host:port/some/path" into base url and path.
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("query: endpoint missing scheme: " + endpoint);
    const std::size_t slash = endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

inline nlohmann::json build_body(const std::string& prompt, const std::vector<fs::path>& images,
                                 const QueryConfig& cfg) {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", prompt}});
    const auto picked =
        select_frames(images.size(), static_cast<std::size_t>(std::max(cfg.max_images, 0)));
    for (const std::size_t k : picked) {
        const std::string url = "data:image/png;base64," + base64(read_file_bytes(images[k]));
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    }
    nlohmann::json body;
    body["model"] = cfg.model;
    body["temperature"] = cfg.temperature;
    body["messages"] = nlohmann::json::array({nlohmann::json{
        {"role", "user"},
        {"content", std::move(content)},
    }});
    if (!cfg.reasoning_effort.empty()) body["reasoning_effort"] = cfg.reasoning_effort;
    return body;
}

/// The answer is whatever follows the final "ANSWER:" marker on its line;
/// replies without a marker fall back to the last non-empty line and flag a
/// parse warning instead of failing, so sloppy model output still scores.
inline void extract_answer(QueryResult& r) {
    static const std::string marker = "ANSWER:";
    const std::size_t pos = r.raw.rfind(marker);
    if (pos != std::string::npos) {
        std::size_t end = r.raw.find('\n', pos);
        if (end == std::string::npos) end = r.raw.size();
        r.answer = trim(r.raw.substr(pos + marker.size(), end - pos - marker.size()));
        r.parse_warning = false;
        if (!r.answer.empty()) return;
    }
    r.parse_warning = true;
    std::size_t end = r.raw.find_last_not_of(" \t\r\n");
    if (end == std::string::npos) {
        r.answer.clear();
        return;
    }
    std::size_t start = r.raw.find_last_of('\n', end);
    start = (start == std::string::npos) ? 0 : start + 1;
    r.answer = trim(r.raw.substr(start, end - start + 1));
}

inline void parse_response(const std::string& body, QueryResult& r) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
        r.raw = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("query: malformed chat response: ") + e.what());
    }
    if (j.contains("usage")) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens")) r.prompt_tokens = u["prompt_tokens"].get<long>();
        if (u.contains("completion_tokens"))
            r.completion_tokens = u["completion_tokens"].get<long>();
    }
    extract_answer(r);
}

} // namespace client_detail

/// One chat-completions round trip. Transport failures and 5xx responses are
/// retried with exponential backoff; 401/403 aborts immediately since retrying
/// bad credentials never helps; other 4xx and malformed replies are permanent.
inline QueryResult query(const std::string& prompt, const std::vector<fs::path>& images,
                         const QueryConfig& cfg) {
    const auto [base, path] = client_detail::split_endpoint(cfg.endpoint);
    const std::string body = client_detail::build_body(prompt, images, cfg).dump();

    httplib::Headers headers;
    if (!cfg.api_key_env.empty()) {
        const char* key = std::getenv(cfg.api_key_env.c_str());
        if (!key || !*key)
            throw ConfigError("query: api key env var " + cfg.api_key_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    httplib::Client cli(base);
    const auto sec = static_cast<time_t>(cfg.timeout_s);
    const auto usec = static_cast<time_t>((cfg.timeout_s - static_cast<double>(sec)) * 1e6);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);

    QueryResult result;
    std::string last_error;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        result.attempts = attempt;
        if (attempt > 1) {
            const double delay = cfg.backoff_base_s * std::pow(2.0, attempt - 2);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("query: endpoint rejected credentials (status " +
                            std::to_string(res->status) + ")");
        if (res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw NetworkError("query: endpoint returned status " + std::to_string(res->status));
        client_detail::parse_response(res->body, result);
        return result;
    }
    throw NetworkError("query: " + std::to_string(cfg.max_attempts) +
                       " attempts failed, last error: " + last_error);
}

// ---------------------------------------------------------------------------
// Batched queries with an on-disk response cache. The cache key covers the
// model, sampling settings, prompt text, and image content hashes, so any
// change that could alter the reply misses. Cache files are written to a temp
// name and renamed, keeping concurrent writers benign.

struct QueryJob {
    std::string prompt;
    std::vector<fs::path> images;
};

struct BatchItem {
    bool ok = false;
    QueryResult result;
    std::string error; ///< what() of the failure when !ok
};

namespace client_detail {

inline std::string cache_key(const QueryJob& job, const QueryConfig& cfg) {
    nlohmann::json j;
    j["model"] = cfg.model;
    j["temperature"] = cfg.temperature;
    j["reasoning_effort"] = cfg.reasoning_effort;
    j["max_images"] = cfg.max_images;
    j["prompt"] = job.prompt;
    auto hashes = nlohmann::json::array();
    for (const auto& img : job.images) hashes.push_back(sha256_file(img));
    j["images"] = std::move(hashes);
    return sha256_hex(j.dump());
}

inline bool load_cached(const fs::path& file, QueryResult& r) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return false;
    nlohmann::json j;
    try {
        in >> j;
        r.raw = j.at("raw").get<std::string>();
        r.prompt_tokens = j.value("prompt_tokens", -1L);
        r.completion_tokens = j.value("completion_tokens", -1L);
    } catch (const nlohmann::json::exception&) {
        return false; // corrupt cache entry; treat as a miss
    }
    extract_answer(r);
    r.cache_hit = true;
    r.attempts = 0;
    return true;
}

inline void store_cached(const fs::path& file, const QueryResult& r) {
    nlohmann::json j;
    j["raw"] = r.raw;
    j["prompt_tokens"] = r.prompt_tokens;
    j["completion_tokens"] = r.completion_tokens;
    const fs::path tmp = file.string() + ".tmp." + std::to_string(::getpid());
    std::ofstream out(tmp, std::ios::binary);
    out << j.dump();
    out.close();
    fs::rename(tmp, file);
}

} // namespace client_detail

/// `query` with a response cache; `cache_dir` empty disables caching.
inline QueryResult query_cached(const QueryJob& job, const fs::path& cache_dir,
                                const QueryConfig& cfg) {
    if (cache_dir.empty()) return query(job.prompt, job.images, cfg);
    fs::create_directories(cache_dir);
    const fs::path file = cache_dir / (client_detail::cache_key(job, cfg) + ".json");
    QueryResult cached;
    if (client_detail::load_cached(file, cached)) return cached;
    QueryResult fresh = query(job.prompt, job.images, cfg);
    client_detail::store_cached(file, fresh);
    return fresh;
}

/// Runs jobs on at most `limit` worker threads; results keep submission
/// order and per-job failures are captured, not thrown, so one bad scene
/// cannot sink a batch.
inline std::vector<BatchItem> batch_query(const std::vector<QueryJob>& jobs, int limit,
                                          const fs::path& cache_dir, const QueryConfig& cfg) {
    std::vector<BatchItem> items(jobs.size());
    if (jobs.empty()) return items;
    const std::size_t workers =
        std::min<std::size_t>(std::max(limit, 1), jobs.size());
    std::atomic<std::size_t> next{0};
    auto run = [&]() {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
            try {
                items[i].result = query_cached(jobs[i], cache_dir, cfg);
                items[i].ok = true;
            } catch (const std::exception& e) {
                items[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    return items;
}

} // namespace gr3d
