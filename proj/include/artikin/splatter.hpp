// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/field_model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace artikin {

/// Rasterizer constants. The low-pass dilation and density clamp follow the
/// usual 3DGS rasterizer conventions.
struct RasterConfig {
    /// Added to both diagonal entries of the 2D covariance, in px².
    double low_pass = 0.3;
    /// Upper clamp on per-primitive density.
    double max_density = 0.99;
    double z_near = 1e-4;
    /// Footprint cutoff in standard deviations.
    double cutoff_sigma = 3.0;
    /// Accumulated weight below which the depth image reads 0.
    double depth_weight_floor = 1e-6;
};

struct ProjectedGaussian {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    /// Camera-space z.
    double depth = 0.0;
    std::size_t source_index = 0;
};

/// World point to camera space.
Vec3 to_camera(const CameraModel& cam, const Vec3& world);
/// Camera-space point to pixel coordinates (pixel (i, j) spans [i, i+1) × [j, j+1)).
Vec2 project_point(const CameraModel& cam, const Vec3& camera_space);

/// Perspective-linearised footprint of `p`, or nullopt when the primitive is
/// behind the near plane or its cutoff ellipse misses the viewport.
std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& p, const CameraModel& cam,
                                                  const RasterConfig& cfg = {}, std::size_t source_index = 0);

/// opacity · exp(-½ dᵀ S⁻¹ d), clamped to cfg.max_density, 0 beyond the cutoff.
double pixel_density(const ProjectedGaussian& pg, double opacity, const Vec2& x, const RasterConfig& cfg = {});

struct CompositeSample {
    double density = 0.0;
    Vec3 color = Vec3::Zero();
    int part = 0;
};

struct CompositeResult {
    Vec3 color = Vec3::Zero();
    /// Per-sample blending weights, same order as the input.
    std::vector<double> weights;
    /// (label, accumulated weight), ascending by label.
    std::vector<std::pair<int, double>> part_weights;
    double transmittance = 1.0;
};

/// Front-to-back alpha compositing of samples already sorted by depth.
CompositeResult composite_pixel(std::span<const CompositeSample> samples);

struct RenderOutput {
    int width = 0;
    int height = 0;
    /// Interleaved RGB, row-major.
    std::vector<double> color;
    /// Weight-normalised mean depth, 0 where nothing contributes.
    std::vector<double> depth;
    std::vector<double> transmittance;
    /// Labels present in the rendered field, ascending; parallel to weight_maps.
    std::vector<int> part_labels;
    std::vector<std::vector<double>> weight_maps;

    [[nodiscard]] std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    [[nodiscard]] std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    /// Weight map of `label`, or nullptr when the label is absent.
    [[nodiscard]] const std::vector<double>* weight_map(int label) const;
};

struct RenderOptions {
    RasterConfig raster;
    /// Restrict compositing to primitives with this label.
    std::optional<int> only_label;
    unsigned threads = 1;
};

RenderOutput render_view(const StateSnapshot& field, const CameraModel& cam, const RenderOptions& opts = {});

/// One RenderOutput per camera. Views render in parallel when opts.threads > 1;
/// output does not depend on the thread count.
std::vector<RenderOutput> render_views(const StateSnapshot& field, std::span<const CameraModel> cams,
                                       const RenderOptions& opts = {});

} // namespace artikin
