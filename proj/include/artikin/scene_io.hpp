// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/field_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace artikin {

/// File name used when a scene path names a directory.
inline constexpr const char* kSceneManifestName = "scene.json";

/// Load and validate a scene manifest. `path` may name the manifest itself or
/// a directory containing `scene.json`.
SceneBundle load_scene(const std::filesystem::path& path);

/// Write `bundle` as a manifest. Directories get `scene.json` appended.
/// Doubles are written with shortest round-trip formatting, so reloading
/// reproduces every value exactly.
void save_field(const SceneBundle& bundle, const std::filesystem::path& path);

nlohmann::json to_json(const GaussianPrimitive& p);
GaussianPrimitive primitive_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StateSnapshot& s);
StateSnapshot snapshot_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraModel& c);
CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JointModel& j);
JointModel joint_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneBundle& bundle);
SceneBundle bundle_from_json(const nlohmann::json& j);

/// Read a JSON document, converting parse errors to ValidationError.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Write a JSON document (2-space indent, trailing newline).
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);
/// Write raw text, creating parent directories.
void write_text_file(const std::string& text, const std::filesystem::path& path);

} // namespace artikin
