#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lva/orchestrator.hpp"

namespace lva {

// One JSON document per trajectory; stable field order so identical runs
// produce identical bytes.
std::string trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const std::string& json_text);

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

// Loads every *.json trajectory under a directory (or the single file),
// sorted by (question_id, path).
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

// (question_id, final_answer, terminated_by, n_turns, grounded_clips) line
// for the JSONL index that accompanies a trajectory directory.
std::string trajectory_index_line(const Trajectory& trajectory);

}  // namespace lva
