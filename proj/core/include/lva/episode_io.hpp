#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lva/episode.hpp"

namespace lva {

constexpr int kManifestSchemaVersion = 1;

// Episode manifest: one self-contained JSON document per episode with an
// explicit schema version, so evaluation runs can pin a dataset snapshot.
std::string manifest_to_json(const Episode& episode);
Episode episode_from_manifest(const std::string& json_text);

void save_manifest(const Episode& episode, const std::filesystem::path& path);
Episode load_manifest(const std::filesystem::path& path);

// Loads every *.json manifest in a directory (or a single manifest file),
// sorted by episode_id.
std::vector<Episode> load_dataset(const std::filesystem::path& path);

// Clip-local subtitles from standard SRT text. "Name:" speaker prefixes are
// split on the first colon when one appears early in the cue.
std::vector<SubtitleLine> parse_srt(const std::string& srt_text);

// Ingests a clip-level input directory (per-clip JSON records, optional
// sibling .srt files, qa.jsonl, optional boxes.jsonl) and builds one Episode
// per episode id found. See the README ingestion guide for the field mapping.
std::vector<Episode> ingest_clip_directory(const std::filesystem::path& in_dir);

// build-dataset: ingest + write one manifest per episode under out_dir.
// Returns the manifest paths written.
std::vector<std::filesystem::path> build_dataset(const std::filesystem::path& in_dir,
                                                 const std::filesystem::path& out_dir);

}  // namespace lva
