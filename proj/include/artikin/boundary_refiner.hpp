// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/field_model.hpp"
#include "artikin/part_mask.hpp"
#include "artikin/splatter.hpp"

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace artikin {

struct Pixel {
    int x = 0;
    int y = 0;

    friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Winning part per pixel, or kUnassigned.
struct PixelAssignment {
    static constexpr int kUnassigned = -1;

    int width = 0;
    int height = 0;
    std::vector<int> part;

    [[nodiscard]] int at(int x, int y) const { return part[static_cast<std::size_t>(y) * width + x]; }
};

/// Pixel goes to p when w_p / (max_{q≠p} w_q + eps) > tau_vis.
PixelAssignment part_pixel_assignment(const RenderOutput& render, double tau_vis = 2.0, double eps = 1e-9);

/// Farthest-point sampling. The first pick is the member nearest the pool
/// centroid; ties go to the earlier pool entry.
std::vector<Pixel> farthest_point_sampling(std::span<const Pixel> pool, std::size_t count);

struct PromptSet {
    int view = 0;
    int label = 0;
    std::vector<Pixel> positives;
    std::vector<Pixel> negatives;
};

/// Positives are drawn from pixels assigned to `label`, negatives from
/// pixels where its weight is exactly zero. nullopt when no pixel is
/// assigned to the part.
std::optional<PromptSet> sample_prompts(const PixelAssignment& assignment, const RenderOutput& render, int label,
                                        int view, std::size_t positives = 10, std::size_t negatives = 20);

/// Throws ValidationError for an empty positive set or out-of-bounds prompts.
void validate_prompts(const PromptSet& prompts, int width, int height);

struct SegmentRequest {
    int view = 0;
    int label = 0;
    int width = 0;
    int height = 0;
    /// Interleaved RGB in [0,1].
    std::vector<double> rgb;
    PromptSet prompts;
};

/// Promptable image segmenter.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual bool needs_images() const { return true; }
    /// Throws RuntimeFailure on backend errors.
    virtual PartMask segment(const SegmentRequest& request) = 0;
};

/// Returns the ground-truth silhouette of the part hit by most positive
/// prompts (ties to the smaller label) in the requested view.
class OracleSegmenter final : public Segmenter {
public:
    OracleSegmenter(const SceneBundle& bundle, std::size_t state = 0);
    [[nodiscard]] std::string name() const override { return "oracle"; }
    [[nodiscard]] bool needs_images() const override { return false; }
    PartMask segment(const SegmentRequest& request) override;

private:
    std::vector<std::vector<PartMask>> masks_;
};

/// View used to test a primitive against its part mask.
enum class ViewChoice {
    /// Smallest camera depth of the center.
    nearest,
    /// Longest projected major axis.
    longest_axis,
    /// Every view is tested; the largest splittable overflow wins.
    max_overflow,
};

std::string_view to_string(ViewChoice c);
ViewChoice view_choice_from_string(std::string_view name);

struct RefineConfig {
    double tau_vis = 2.0;
    std::size_t positives = 10;
    std::size_t negatives = 20;
    /// Endpoint distance along the major axis in standard deviations.
    double ellipse_sigma = 1.0;
    ViewChoice view_choice = ViewChoice::max_overflow;
    /// Both the in-mask and the overflowing share of a projected axis must
    /// span at least this many pixels for a split.
    double min_segment_px = 0.5;
    std::size_t max_depth = 4;
    double s_min = 1e-4;
    double lambda_clamp = 1e-3;
    /// A primitive counts as visible in a view when it lies at most this far
    /// behind the rendered depth at its pixel.
    double visibility_tolerance = 0.02;
    double coverage_threshold = 0.5;
    unsigned threads = 1;
};

/// Masks for every moving part in each requested view, together with the
/// canonical renders they were prompted from.
struct MaskSet {
    std::vector<std::size_t> views;
    std::vector<RenderOutput> renders;
    std::vector<PartMask> masks;
    std::vector<PromptSet> prompts;
    std::vector<std::string> warnings;

    [[nodiscard]] const PartMask* find(int label, int view) const;
};

/// Renders the canonical field with `labels` in each view of state 0 and
/// queries the segmenter once per moving part.
MaskSet acquire_masks(Segmenter& segmenter, const SceneBundle& bundle, const std::vector<int>& labels,
                      std::span<const std::size_t> views, const RefineConfig& cfg);

/// λ of the segment a → b lying inside the mask before the first crossing,
/// found by a Bresenham walk; pixels off the image count as outside.
double crossing_fraction(const BinaryImage& mask, const Vec2& a, const Vec2& b);

struct BoundaryCandidate {
    std::size_t index = 0;
    int label = 0;
    int view = 0;
    Vec2 inside_end = Vec2::Zero();
    Vec2 outside_end = Vec2::Zero();
    /// Unit major axis pointing at the in-mask end.
    Vec3 axis = Vec3::UnitX();
    /// In-mask share of the full axis segment.
    double lambda = 0.0;
    double overflow_px = 0.0;
    /// False when neither endpoint is inside the mask or a share is too small.
    bool splittable = false;
};

/// Primitives with label ≥ 1 whose projected major-axis endpoints are not
/// both inside their part's mask, judged in the view picked by
/// cfg.view_choice among those that see the primitive. An endpoint outside
/// the mask only counts where the canonical render still shows the
/// primitive's part.
std::vector<BoundaryCandidate> detect_boundary_candidates(const StateSnapshot& field, const MaskSet& masks,
                                                          std::span<const CameraModel> cameras,
                                                          const RefineConfig& cfg);

/// Cut `p` across its major axis into a part child (the λ share toward e)
/// and a background child (the rest). The children tile the parent's axis.
std::pair<GaussianPrimitive, GaussianPrimitive> split_gaussian(const GaussianPrimitive& p, double lambda,
                                                               const Vec3& e);

struct RefineStats {
    std::size_t candidates = 0;
    std::size_t splits = 0;
    std::size_t unsplittable = 0;
    std::size_t relabelled = 0;
    std::size_t max_depth = 0;
};

struct RefinedField {
    StateSnapshot field;
    /// Canonical primitive each output primitive descends from.
    std::vector<std::size_t> source_index;
    std::vector<std::size_t> depth;
    RefineStats stats;
};

RefinedField refine_labels(const SceneBundle& bundle, const std::vector<int>& labels, const MaskSet& masks,
                           const RefineConfig& cfg);

/// Volume-weighted share of the field labelled as in the ground truth.
/// A primitive derived from a mixed source is credited with the share of
/// its major axis on the side of the plane that carries its label. Labels
/// must already use the ground-truth numbering.
double region_accuracy(const GroundTruth& truth, const StateSnapshot& field, std::span<const std::size_t> source_index);

} // namespace artikin
