#include "lva/episode_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lva/errors.hpp"

namespace lva {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << content;
}

std::string trim_copy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// "HH:MM:SS,mmm" (or '.' before the millis) -> seconds.
std::optional<double> parse_srt_timestamp(const std::string& raw) {
    int h = 0, m = 0, s = 0, ms = 0;
    char sep = 0;
    std::istringstream in(trim_copy(raw));
    char c1 = 0, c2 = 0;
    if (!(in >> h >> c1 >> m >> c2 >> s)) return std::nullopt;
    if (c1 != ':' || c2 != ':') return std::nullopt;
    if (in >> sep && (sep == ',' || sep == '.')) {
        if (!(in >> ms)) return std::nullopt;
    }
    return h * 3600.0 + m * 60.0 + s + ms / 1000.0;
}

json subtitle_to_json(const SubtitleLine& line) {
    json j;
    j["start_s"] = line.start_s;
    j["end_s"] = line.end_s;
    j["speaker"] = line.speaker ? json(*line.speaker) : json(nullptr);
    j["text"] = line.text;
    return j;
}

SubtitleLine subtitle_from_json(const json& j) {
    SubtitleLine line;
    line.start_s = j.at("start_s").get<double>();
    line.end_s = j.at("end_s").get<double>();
    if (j.contains("speaker") && !j.at("speaker").is_null()) {
        line.speaker = j.at("speaker").get<std::string>();
    }
    line.text = j.at("text").get<std::string>();
    return line;
}

std::string derive_episode_id(const std::string& clip_id) {
    std::size_t at = clip_id.find("_seg");
    if (at == std::string::npos || at == 0) return clip_id;
    return clip_id.substr(0, at);
}

ClipRecord clip_record_from_json(const json& j) {
    ClipRecord rec;
    rec.clip_id = j.at("clip_id").get<std::string>();
    rec.episode_id = j.value("episode_id", derive_episode_id(rec.clip_id));
    if (j.contains("duration_s")) {
        rec.duration_s = j.at("duration_s").get<double>();
    } else if (j.contains("duration")) {
        rec.duration_s = j.at("duration").get<double>();
    }
    if (j.contains("frame_refs")) {
        for (const auto& f : j.at("frame_refs")) {
            rec.frame_refs.push_back(f.is_string() ? f.get<std::string>() : f.dump());
        }
    }
    if (j.contains("subtitles")) {
        for (const auto& s : j.at("subtitles")) rec.subtitles.push_back(subtitle_from_json(s));
    }
    return rec;
}

QaRecord qa_record_from_json(const json& j) {
    QaRecord rec;
    rec.question_id = j.contains("question_id") ? j.at("question_id").get<std::string>()
                                                : std::to_string(j.at("qid").get<long>());
    rec.text = j.contains("text") ? j.at("text").get<std::string>()
                                  : j.at("q").get<std::string>();
    if (j.contains("choices")) {
        for (const auto& c : j.at("choices")) rec.choices.push_back(c.get<std::string>());
    } else {
        for (int i = 0; i < 5; ++i) {
            std::string key = "a" + std::to_string(i);
            if (j.contains(key)) rec.choices.push_back(j.at(key).get<std::string>());
        }
    }
    rec.gold_index = j.contains("gold_index") ? j.at("gold_index").get<int>()
                                              : j.value("answer_idx", 0);
    rec.gold_clip_id = j.contains("gold_clip_id") ? j.at("gold_clip_id").get<std::string>()
                                                  : j.value("vid_name", "");
    rec.episode_id = j.value("episode_id", derive_episode_id(rec.gold_clip_id));
    return rec;
}

BoxAnnotation box_from_json(const json& j) {
    BoxAnnotation box;
    box.clip_id = j.contains("clip_id") ? j.at("clip_id").get<std::string>()
                                        : j.value("vid_name", "");
    box.frame_index = j.contains("frame_index") ? j.at("frame_index").get<int>()
                                                : j.value("img_id", 0);
    box.entity = j.contains("entity") ? j.at("entity").get<std::string>()
                                      : j.value("label", "");
    if (j.contains("box")) {
        const auto& b = j.at("box");
        box.x = b.at(0).get<double>();
        box.y = b.at(1).get<double>();
        box.w = b.at(2).get<double>();
        box.h = b.at(3).get<double>();
    } else {
        box.x = j.value("left", 0.0);
        box.y = j.value("top", 0.0);
        box.w = j.value("width", 0.0);
        box.h = j.value("height", 0.0);
    }
    return box;
}

json parse_json_file(const std::filesystem::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::IoError, "invalid JSON in " + path.string());
    return j;
}

std::vector<json> parse_jsonl_file(const std::filesystem::path& path) {
    std::vector<json> out;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim_copy(line);
        if (t.empty()) continue;
        json j = json::parse(t, nullptr, false);
        if (j.is_discarded()) {
            throw Error(ErrorCode::IoError,
                        path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
        }
        out.push_back(std::move(j));
    }
    return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string manifest_to_json(const Episode& episode) {
    json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["episode_id"] = episode.episode_id;
    j["clips"] = json::array();
    for (const Clip& clip : episode.clips) {
        json c;
        c["clip_id"] = clip.clip_id;
        c["index"] = clip.index;
        c["duration_s"] = clip.local_duration_s;
        c["offset_s"] = clip.episode_offset_s;
        c["frame_refs"] = clip.frame_refs;
        j["clips"].push_back(std::move(c));
    }
    j["subtitles"] = json::array();
    for (const SubtitleLine& line : episode.subtitles) {
        j["subtitles"].push_back(subtitle_to_json(line));
    }
    j["questions"] = json::array();
    for (const Question& q : episode.questions) {
        json qj;
        qj["question_id"] = q.question_id;
        qj["text"] = q.text;
        qj["choices"] = q.choices;
        qj["gold_index"] = q.gold_index;
        qj["gold_clip_id"] = q.gold_clip_id;
        j["questions"].push_back(std::move(qj));
    }
    j["boxes"] = json::array();
    for (const BoxAnnotation& box : episode.boxes) {
        json b;
        b["clip_id"] = box.clip_id;
        b["frame_index"] = box.frame_index;
        b["entity"] = box.entity;
        b["box"] = {box.x, box.y, box.w, box.h};
        j["boxes"].push_back(std::move(b));
    }
    return j.dump(2) + "\n";
}

Episode episode_from_manifest(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::IoError, "invalid manifest JSON");
    int version = j.value("schema_version", -1);
    if (version != kManifestSchemaVersion) {
        throw Error(ErrorCode::ConfigError,
                    "unsupported manifest schema_version " + std::to_string(version));
    }
    Episode episode;
    episode.episode_id = j.at("episode_id").get<std::string>();
    for (const auto& c : j.at("clips")) {
        Clip clip;
        clip.clip_id = c.at("clip_id").get<std::string>();
        clip.index = c.at("index").get<std::size_t>();
        clip.local_duration_s = c.at("duration_s").get<double>();
        clip.episode_offset_s = c.at("offset_s").get<double>();
        for (const auto& f : c.at("frame_refs")) clip.frame_refs.push_back(f.get<std::string>());
        episode.clips.push_back(std::move(clip));
    }
    for (const auto& s : j.at("subtitles")) episode.subtitles.push_back(subtitle_from_json(s));
    for (const auto& qj : j.at("questions")) {
        Question q;
        q.question_id = qj.at("question_id").get<std::string>();
        q.episode_id = episode.episode_id;
        q.text = qj.at("text").get<std::string>();
        for (const auto& c : qj.at("choices")) q.choices.push_back(c.get<std::string>());
        q.gold_index = qj.at("gold_index").get<int>();
        q.gold_clip_id = qj.at("gold_clip_id").get<std::string>();
        episode.questions.push_back(std::move(q));
    }
    for (const auto& b : j.at("boxes")) episode.boxes.push_back(box_from_json(b));
    recompute_subtitle_ranges(episode);
    return episode;
}

void save_manifest(const Episode& episode, const std::filesystem::path& path) {
    write_file(path, manifest_to_json(episode));
}

Episode load_manifest(const std::filesystem::path& path) {
    return episode_from_manifest(read_file(path));
}

std::vector<Episode> load_dataset(const std::filesystem::path& path) {
    std::vector<Episode> episodes;
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) episodes.push_back(load_manifest(f));
    } else {
        episodes.push_back(load_manifest(path));
    }
    std::sort(episodes.begin(), episodes.end(), [](const Episode& a, const Episode& b) {
        return a.episode_id < b.episode_id;
    });
    return episodes;
}

std::vector<SubtitleLine> parse_srt(const std::string& srt_text) {
    std::vector<SubtitleLine> lines;
    std::istringstream in(srt_text);
    std::string raw;
    std::vector<std::string> block;
    auto flush = [&]() {
        if (block.empty()) return;
        std::size_t i = 0;
        // optional numeric cue index
        if (i < block.size() && !block[i].empty() &&
            std::all_of(block[i].begin(), block[i].end(),
                        [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; })) {
            ++i;
        }
        if (i >= block.size()) {
            block.clear();
            return;
        }
        std::size_t arrow = block[i].find("-->");
        if (arrow == std::string::npos) {
            block.clear();
            return;
        }
        auto start = parse_srt_timestamp(block[i].substr(0, arrow));
        auto end = parse_srt_timestamp(block[i].substr(arrow + 3));
        ++i;
        if (!start || !end) {
            block.clear();
            return;
        }
        std::string text;
        for (; i < block.size(); ++i) {
            if (!text.empty()) text += ' ';
            text += block[i];
        }
        SubtitleLine line;
        line.start_s = *start;
        line.end_s = *end;
        std::size_t colon = text.find(':');
        if (colon != std::string::npos && colon > 0 && colon <= 40) {
            line.speaker = trim_copy(text.substr(0, colon));
            line.text = trim_copy(text.substr(colon + 1));
        } else {
            line.text = trim_copy(text);
        }
        lines.push_back(std::move(line));
        block.clear();
    };
    while (std::getline(in, raw)) {
        std::string t = trim_copy(raw);
        if (t.empty()) {
            flush();
        } else {
            block.push_back(t);
        }
    }
    flush();
    return lines;
}

std::vector<Episode> ingest_clip_directory(const std::filesystem::path& in_dir) {
    if (!std::filesystem::is_directory(in_dir)) {
        throw Error(ErrorCode::IoError, in_dir.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(in_dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::map<std::string, std::vector<ClipRecord>> clips_by_episode;
    std::map<std::string, std::vector<QaRecord>> qas_by_episode;
    std::map<std::string, std::vector<BoxAnnotation>> boxes_by_clip_episode;

    for (const auto& path : files) {
        const std::string name = path.filename().string();
        if (path.extension() == ".jsonl") {
            bool is_qa = ends_with(name, "qa.jsonl");
            bool is_boxes = ends_with(name, "boxes.jsonl");
            if (!is_qa && !is_boxes) continue;
            for (const json& j : parse_jsonl_file(path)) {
                if (is_qa) {
                    QaRecord rec = qa_record_from_json(j);
                    qas_by_episode[rec.episode_id].push_back(std::move(rec));
                } else {
                    BoxAnnotation box = box_from_json(j);
                    boxes_by_clip_episode[derive_episode_id(box.clip_id)].push_back(std::move(box));
                }
            }
            continue;
        }
        if (path.extension() != ".json") continue;
        json j = parse_json_file(path);
        if (j.is_array()) {
            // array form: qa.json / boxes.json
            bool is_qa = ends_with(name, "qa.json");
            for (const json& item : j) {
                if (is_qa) {
                    QaRecord rec = qa_record_from_json(item);
                    qas_by_episode[rec.episode_id].push_back(std::move(rec));
                } else if (ends_with(name, "boxes.json")) {
                    BoxAnnotation box = box_from_json(item);
                    boxes_by_clip_episode[derive_episode_id(box.clip_id)].push_back(std::move(box));
                }
            }
            continue;
        }
        if (!j.is_object() || !j.contains("clip_id")) continue;
        ClipRecord rec = clip_record_from_json(j);
        std::filesystem::path srt = path;
        srt.replace_extension(".srt");
        if (std::filesystem::exists(srt)) {
            rec.subtitles = parse_srt(read_file(srt));
        }
        clips_by_episode[rec.episode_id].push_back(std::move(rec));
    }

    std::vector<Episode> episodes;
    for (auto& [episode_id, clip_records] : clips_by_episode) {
        auto qa_it = qas_by_episode.find(episode_id);
        auto box_it = boxes_by_clip_episode.find(episode_id);
        episodes.push_back(build_episode(
            clip_records,
            qa_it != qas_by_episode.end() ? qa_it->second : std::vector<QaRecord>{},
            box_it != boxes_by_clip_episode.end() ? box_it->second
                                                  : std::vector<BoxAnnotation>{}));
    }
    return episodes;
}

std::vector<std::filesystem::path> build_dataset(const std::filesystem::path& in_dir,
                                                 const std::filesystem::path& out_dir) {
    std::vector<Episode> episodes = ingest_clip_directory(in_dir);
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (const Episode& episode : episodes) {
        std::filesystem::path path = out_dir / (episode.episode_id + ".json");
        save_manifest(episode, path);
        written.push_back(path);
    }
    return written;
}

}  // namespace lva
