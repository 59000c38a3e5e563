// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/scene_io.hpp"

#include "artikin/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace artikin {

using nlohmann::json;

namespace {

template <int N>
json vec_json(const Eigen::Matrix<double, N, 1>& v)
{
    json a = json::array();
    for (int i = 0; i < N; ++i) {
        a.push_back(v[i]);
    }
    return a;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const json& j, const char* key)
{
    if (!j.contains(key)) {
        throw ValidationError(std::string("malformed record: missing '") + key + "'");
    }
    const json& a = j.at(key);
    if (!a.is_array() || a.size() != static_cast<std::size_t>(N)) {
        throw ValidationError(std::string("malformed record: '") + key + "' must be an array of " +
                              std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) {
        if (!a[i].is_number()) {
            throw ValidationError(std::string("malformed record: '") + key + "' has a non-numeric entry");
        }
        v[i] = a[i].get<double>();
    }
    return v;
}

double number_from(const json& j, const char* key)
{
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw ValidationError(std::string("malformed record: '") + key + "' must be a number");
    }
    return j.at(key).get<double>();
}

int int_from(const json& j, const char* key)
{
    if (!j.contains(key) || !j.at(key).is_number_integer()) {
        throw ValidationError(std::string("malformed record: '") + key + "' must be an integer");
    }
    return j.at(key).get<int>();
}

void require_finite(const GaussianPrimitive& p, const std::string& where)
{
    if (!p.center.allFinite() || !p.scale.allFinite() || !p.color.allFinite() ||
        !p.orientation.as_vector().allFinite() || !std::isfinite(p.opacity)) {
        throw ValidationError(where + ": non-finite value, refusing to write");
    }
}

} // namespace

json to_json(const GaussianPrimitive& p)
{
    return json{{"mu", vec_json<3>(p.center)},
                {"q", vec_json<4>(p.orientation.as_vector())},
                {"s", vec_json<3>(p.scale)},
                {"rgb", vec_json<3>(p.color)},
                {"opacity", p.opacity},
                {"label", p.label}};
}

GaussianPrimitive primitive_from_json(const json& j)
{
    if (!j.is_object()) {
        throw ValidationError("malformed record: primitive must be an object");
    }
    GaussianPrimitive p;
    p.center = vec_from<3>(j, "mu");
    p.orientation = Quat::from_vector(vec_from<4>(j, "q"));
    p.scale = vec_from<3>(j, "s");
    p.color = vec_from<3>(j, "rgb");
    p.opacity = number_from(j, "opacity");
    p.label = int_from(j, "label");
    return p;
}

json to_json(const StateSnapshot& s)
{
    json prims = json::array();
    for (const auto& p : s.primitives) {
        prims.push_back(to_json(p));
    }
    return json{{"state_index", s.state_index}, {"primitives", std::move(prims)}};
}

StateSnapshot snapshot_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("primitives") || !j.at("primitives").is_array()) {
        throw ValidationError("malformed record: snapshot needs a 'primitives' array");
    }
    StateSnapshot s;
    s.state_index = j.contains("state_index") ? int_from(j, "state_index") : 0;
    s.primitives.reserve(j.at("primitives").size());
    for (const auto& pj : j.at("primitives")) {
        s.primitives.push_back(primitive_from_json(pj));
    }
    return s;
}

json to_json(const CameraModel& c)
{
    json r = json::array();
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            r.push_back(c.world_to_camera.rotation(row, col));
        }
    }
    return json{{"fx", c.fx},
                {"fy", c.fy},
                {"cx", c.cx},
                {"cy", c.cy},
                {"width", c.width},
                {"height", c.height},
                {"R", std::move(r)},
                {"t", vec_json<3>(c.world_to_camera.translation)}};
}

CameraModel camera_from_json(const json& j)
{
    if (!j.is_object()) {
        throw ValidationError("malformed record: camera must be an object");
    }
    CameraModel c;
    c.fx = number_from(j, "fx");
    c.fy = number_from(j, "fy");
    c.cx = number_from(j, "cx");
    c.cy = number_from(j, "cy");
    c.width = int_from(j, "width");
    c.height = int_from(j, "height");
    const Eigen::Matrix<double, 9, 1> r = vec_from<9>(j, "R");
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            c.world_to_camera.rotation(row, col) = r[row * 3 + col];
        }
    }
    c.world_to_camera.translation = vec_from<3>(j, "t");
    return c;
}

json to_json(const JointModel& j)
{
    json out{{"kind", std::string(to_string(j.kind))}, {"axis", vec_json<3>(j.axis)}, {"magnitude", j.magnitude}};
    if (j.kind == JointKind::revolute) {
        out["pivot"] = vec_json<3>(j.pivot);
    }
    return out;
}

JointModel joint_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw ValidationError("malformed record: joint needs a 'kind'");
    }
    JointModel out;
    out.kind = joint_kind_from_string(j.at("kind").get<std::string>());
    out.axis = vec_from<3>(j, "axis");
    out.magnitude = number_from(j, "magnitude");
    if (out.kind == JointKind::revolute) {
        out.pivot = vec_from<3>(j, "pivot");
    }
    return out;
}

namespace {

json to_json(const GroundTruth& gt)
{
    json parts = json::array();
    for (const auto& p : gt.parts) {
        parts.push_back(json{{"label", p.label},
                             {"kind", std::string(to_string(p.kind))},
                             {"pivot", vec_json<3>(p.pivot)},
                             {"axis", vec_json<3>(p.axis)},
                             {"magnitudes", p.magnitudes}});
    }
    json out{{"labels", gt.labels}, {"parts", std::move(parts)}};
    if (!gt.mixed.empty()) {
        json mixed = json::array();
        for (const auto& m : gt.mixed) {
            mixed.push_back(json{{"index", m.index},
                                 {"plane_point", vec_json<3>(m.plane_point)},
                                 {"plane_normal", vec_json<3>(m.plane_normal)},
                                 {"label_positive", m.label_positive},
                                 {"label_negative", m.label_negative}});
        }
        out["mixed"] = std::move(mixed);
    }
    return out;
}

GroundTruth ground_truth_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("labels") || !j.at("labels").is_array()) {
        throw ValidationError("malformed record: ground_truth needs 'labels'");
    }
    GroundTruth gt;
    for (const auto& l : j.at("labels")) {
        if (!l.is_number_integer()) {
            throw ValidationError("malformed record: ground_truth labels must be integers");
        }
        gt.labels.push_back(l.get<int>());
    }
    if (j.contains("parts")) {
        for (const auto& pj : j.at("parts")) {
            PartTruth p;
            p.label = int_from(pj, "label");
            p.kind = joint_kind_from_string(pj.at("kind").get<std::string>());
            p.pivot = vec_from<3>(pj, "pivot");
            p.axis = vec_from<3>(pj, "axis");
            if (!pj.contains("magnitudes") || !pj.at("magnitudes").is_array()) {
                throw ValidationError("malformed record: part truth needs 'magnitudes'");
            }
            for (const auto& m : pj.at("magnitudes")) {
                p.magnitudes.push_back(m.get<double>());
            }
            gt.parts.push_back(std::move(p));
        }
    }
    if (j.contains("mixed")) {
        for (const auto& mj : j.at("mixed")) {
            MixedTruth m;
            m.index = static_cast<std::size_t>(int_from(mj, "index"));
            m.plane_point = vec_from<3>(mj, "plane_point");
            m.plane_normal = vec_from<3>(mj, "plane_normal");
            m.label_positive = int_from(mj, "label_positive");
            m.label_negative = int_from(mj, "label_negative");
            gt.mixed.push_back(m);
        }
    }
    return gt;
}

} // namespace

json to_json(const SceneBundle& bundle)
{
    json states = json::array();
    for (const auto& s : bundle.states) {
        states.push_back(to_json(s));
    }
    json cams = json::array();
    for (const auto& per_state : bundle.cameras) {
        json row = json::array();
        for (const auto& c : per_state) {
            row.push_back(to_json(c));
        }
        cams.push_back(std::move(row));
    }
    json out{{"format", "artikin-scene-v1"},
             {"canonical", to_json(bundle.canonical)},
             {"states", std::move(states)},
             {"cameras", std::move(cams)}};
    if (bundle.ground_truth) {
        out["ground_truth"] = to_json(*bundle.ground_truth);
    }
    return out;
}

SceneBundle bundle_from_json(const json& j)
{
    if (!j.is_object()) {
        throw ValidationError("malformed record: scene manifest must be an object");
    }
    for (const char* key : {"canonical", "states", "cameras"}) {
        if (!j.contains(key)) {
            throw ValidationError(std::string("malformed record: scene manifest lacks '") + key + "'");
        }
    }
    SceneBundle b;
    b.canonical = snapshot_from_json(j.at("canonical"));
    if (!j.at("states").is_array() || !j.at("cameras").is_array()) {
        throw ValidationError("malformed record: 'states' and 'cameras' must be arrays");
    }
    for (const auto& sj : j.at("states")) {
        b.states.push_back(snapshot_from_json(sj));
    }
    for (const auto& row : j.at("cameras")) {
        if (!row.is_array()) {
            throw ValidationError("malformed record: 'cameras' must be an array of arrays");
        }
        std::vector<CameraModel> per_state;
        for (const auto& cj : row) {
            per_state.push_back(camera_from_json(cj));
        }
        b.cameras.push_back(std::move(per_state));
    }
    if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
        b.ground_truth = ground_truth_from_json(j.at("ground_truth"));
    }
    return b;
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed record in '" + path.string() + "': " + e.what());
    }
}

void write_text_file(const std::string& text, const std::filesystem::path& path)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw RuntimeFailure("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw RuntimeFailure("write failed for '" + path.string() + "'");
    }
}

void write_json_file(const json& doc, const std::filesystem::path& path)
{
    write_text_file(doc.dump(2) + "\n", path);
}

namespace {

std::filesystem::path manifest_path(const std::filesystem::path& path)
{
    if (std::filesystem::is_directory(path)) {
        return path / kSceneManifestName;
    }
    return path;
}

} // namespace

SceneBundle load_scene(const std::filesystem::path& path)
{
    const auto file = manifest_path(path);
    if (!std::filesystem::exists(file)) {
        throw ValidationError("missing file: '" + file.string() + "'");
    }
    SceneBundle b = bundle_from_json(read_json_file(file));
    validate(b);
    return b;
}

void save_field(const SceneBundle& bundle, const std::filesystem::path& path)
{
    for (std::size_t i = 0; i < bundle.canonical.primitives.size(); ++i) {
        require_finite(bundle.canonical.primitives[i], "canonical primitive " + std::to_string(i));
    }
    for (std::size_t s = 0; s < bundle.states.size(); ++s) {
        for (std::size_t i = 0; i < bundle.states[s].primitives.size(); ++i) {
            require_finite(bundle.states[s].primitives[i],
                           "state " + std::to_string(s) + " primitive " + std::to_string(i));
        }
    }
    validate(bundle);
    const bool to_dir = std::filesystem::is_directory(path) ||
                        (!path.has_extension() && !std::filesystem::exists(path));
    write_json_file(to_json(bundle), to_dir ? path / kSceneManifestName : path);
}

} // namespace artikin
