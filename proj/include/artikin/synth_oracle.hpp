// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/field_model.hpp"
#include "artikin/part_mask.hpp"
#include "artikin/splatter.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace artikin::synth {

struct Box {
    Vec3 min_corner = Vec3::Zero();
    Vec3 max_corner = Vec3::Ones();

    [[nodiscard]] Vec3 center() const { return 0.5 * (min_corner + max_corner); }
    [[nodiscard]] Vec3 extents() const { return max_corner - min_corner; }
    [[nodiscard]] bool interiors_overlap(const Box& other) const;
};

struct JointSpec {
    JointKind kind = JointKind::prismatic;
    Vec3 pivot = Vec3::Zero();
    Vec3 axis = Vec3::UnitX();
    /// Joint magnitude in each state (radians or scene units).
    std::vector<double> magnitudes;
};

struct PartSpec {
    std::string name;
    Box box;
    /// Absent for static geometry (label 0).
    std::optional<JointSpec> joint;
    Vec3 color = Vec3::Constant(0.5);
    std::size_t gaussians = 200;
};

struct CameraRing {
    std::size_t count = 20;
    double radius = 1.8;
    double elevation_min_deg = 30.0;
    double elevation_max_deg = 60.0;
    double fov_deg = 40.0;
    int width = 192;
    int height = 192;
};

struct StraddlerPlan {
    /// Elongated primitives planted across one edge of each movable part's
    /// front face. They move with the part; their ground truth is split by
    /// the plane through that edge.
    std::size_t per_part = 0;
    double length = 0.08;
    /// Share of the length lying inside the part's face.
    double inside_fraction = 0.6;
    /// Outward normal of the face that carries the straddlers.
    Vec3 front = Vec3::UnitX();
    /// Direction in which the straddlers cross the edge.
    Vec3 outward = -Vec3::UnitZ();
};

struct SceneSpec {
    std::uint64_t seed = 0;
    std::size_t states = 4;
    std::vector<PartSpec> parts;
    CameraRing cameras;
    StraddlerPlan straddlers;
};

/// Names accepted by preset().
std::vector<std::string> preset_names();

/// Built-in desk-scale scenes: storage2, storage3, box, eyeglasses2r,
/// drawer1 and static_box.
SceneSpec preset(std::string_view name, std::uint64_t seed = 0);

/// Sample a bundle with exact ground truth. Throws ValidationError for
/// malformed specs and for parts whose boxes overlap in state 0.
SceneBundle generate_scene(const SceneSpec& spec);

/// Cameras on a ring around `target`, azimuths evenly spaced starting at +x,
/// elevations drawn uniformly from the ring's range.
std::vector<CameraModel> ring_cameras(const CameraRing& ring, const Vec3& target, std::uint64_t seed);

/// Look-at camera: +z towards `target`, +y image-down, world +z up.
CameraModel look_at(const Vec3& eye, const Vec3& target, int width, int height, double fov_deg);

struct MaskOptions {
    RasterConfig raster;
    /// Minimum object coverage 1 − T of a mask pixel.
    double coverage_threshold = 0.5;
    /// Minimum share of the accumulated weight owned by the part.
    double part_share = 0.5;
};

/// State `state` with every mixed primitive replaced by its two true halves
/// (cut by the mixed plane), labelled by side.
StateSnapshot truth_field(const SceneBundle& bundle, std::size_t state = 0);

/// Ground-truth visible masks of every part (static included) in `view` of
/// state `state`. truth_field() is composited once; a pixel belongs to part
/// p when 1 − T > coverage_threshold and w_p > part_share · (1 − T).
std::vector<PartMask> ground_truth_masks(const SceneBundle& bundle, std::size_t view, const MaskOptions& opts = {},
                                         std::size_t state = 0);

/// Ground-truth label of a primitive derived from original primitive
/// `source` (mixed primitives are split by their plane).
int truth_label(const GroundTruth& gt, std::size_t source, const Vec3& center);

} // namespace artikin::synth
