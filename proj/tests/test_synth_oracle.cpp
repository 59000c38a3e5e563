// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/error.hpp"
#include "artikin/synth_oracle.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace artikin {
namespace {

double line_distance(const Vec3& point, const Vec3& line_point, const Vec3& dir)
{
    const Vec3 d = point - line_point;
    return (d - d.dot(dir) * dir).norm();
}

TEST(Synth, StaticBoxNeverMoves)
{
    const SceneBundle b = synth::generate_scene(synth::preset("static_box", 1));
    EXPECT_EQ(b.state_count(), 2u);
    EXPECT_EQ(b.primitive_count(), 300u);
    EXPECT_EQ(b.states[0].primitives, b.states[1].primitives);
    EXPECT_TRUE(b.ground_truth->parts.empty());
    EXPECT_EQ(b.ground_truth->labels, std::vector<int>(300, 0));
    EXPECT_EQ(b.cameras[0].size(), 4u);
}

TEST(Synth, DrawerTranslatesByScheduledSteps)
{
    const SceneBundle b = synth::generate_scene(synth::preset("drawer1", 2));
    const auto& gt = *b.ground_truth;
    ASSERT_EQ(gt.parts.size(), 1u);
    std::size_t drawer = 0;
    for (std::size_t i = 0; i < b.primitive_count(); ++i) {
        for (std::size_t k = 0; k < b.state_count(); ++k) {
            const Vec3 shift = b.states[k].primitives[i].center - b.states[0].primitives[i].center;
            const Vec3 want = gt.labels[i] == 1 ? Vec3(0.1 * static_cast<double>(k), 0, 0) : Vec3::Zero();
            EXPECT_LT((shift - want).norm(), 1e-15);
            EXPECT_EQ(b.states[k].primitives[i].orientation, b.states[0].primitives[i].orientation);
        }
        drawer += gt.labels[i] == 1 ? 1 : 0;
    }
    EXPECT_EQ(drawer, 300u);
}

TEST(Synth, HingedPartKeepsItsDistanceToTheAxis)
{
    const SceneBundle b = synth::generate_scene(synth::preset("box", 3));
    const PartTruth& lid = b.ground_truth->parts.front();
    ASSERT_EQ(lid.kind, JointKind::revolute);
    for (std::size_t i = 0; i < b.primitive_count(); ++i) {
        if (b.ground_truth->labels[i] != lid.label) {
            continue;
        }
        const double r0 = line_distance(b.states[0].primitives[i].center, lid.pivot, lid.axis);
        const double h0 = lid.axis.dot(b.states[0].primitives[i].center - lid.pivot);
        for (std::size_t k = 1; k < b.state_count(); ++k) {
            const Vec3& c = b.states[k].primitives[i].center;
            EXPECT_NEAR(line_distance(c, lid.pivot, lid.axis), r0, 1e-12);
            EXPECT_NEAR(lid.axis.dot(c - lid.pivot), h0, 1e-12);
            // The orientation turns with the part.
            const Mat3 r = testing::rodrigues(lid.axis, lid.magnitudes[k]);
            const Mat3 want = r * b.states[0].primitives[i].orientation.to_matrix();
            EXPECT_LT((b.states[k].primitives[i].orientation.to_matrix() - want).norm(), 1e-12);
        }
    }
}

TEST(Synth, AppearanceIsSharedAcrossStates)
{
    const SceneBundle b = synth::generate_scene(synth::preset("storage3", 4));
    for (std::size_t k = 1; k < b.state_count(); ++k) {
        for (std::size_t i = 0; i < b.primitive_count(); ++i) {
            const auto& p = b.states[k].primitives[i];
            const auto& c = b.canonical.primitives[i];
            EXPECT_EQ(p.color, c.color);
            EXPECT_EQ(p.opacity, c.opacity);
            EXPECT_EQ(p.scale, c.scale);
            EXPECT_EQ(p.label, c.label);
        }
    }
    EXPECT_EQ(b.canonical, b.states[0]);
}

TEST(Synth, SameSeedSameScene)
{
    const auto a = synth::generate_scene(synth::preset("eyeglasses2r", 5));
    EXPECT_EQ(a, synth::generate_scene(synth::preset("eyeglasses2r", 5)));
    EXPECT_NE(a, synth::generate_scene(synth::preset("eyeglasses2r", 6)));
}

TEST(Synth, SpecValidation)
{
    auto overlap = synth::preset("storage2");
    overlap.parts[1].box = overlap.parts[0].box;
    EXPECT_THROW(synth::generate_scene(overlap), ValidationError);

    auto short_schedule = synth::preset("storage2");
    short_schedule.parts[1].joint->magnitudes.pop_back();
    EXPECT_THROW(synth::generate_scene(short_schedule), ValidationError);

    auto wild = synth::preset("box");
    wild.parts[1].joint->magnitudes[2] = 4.0;
    EXPECT_THROW(synth::generate_scene(wild), ValidationError);

    auto lonely = synth::preset("static_box");
    lonely.states = 1;
    EXPECT_THROW(synth::generate_scene(lonely), ValidationError);

    EXPECT_THROW(synth::preset("no_such_scene"), ValidationError);
    EXPECT_EQ(synth::preset_names().size(), 6u);
}

TEST(Synth, StraddlersCrossTheirCuttingPlane)
{
    auto spec = synth::preset("storage2", 6);
    spec.straddlers.per_part = 6;
    const SceneBundle b = synth::generate_scene(spec);
    const auto& gt = *b.ground_truth;
    ASSERT_EQ(gt.mixed.size(), 12u);
    for (const auto& m : gt.mixed) {
        const auto& g = b.canonical.primitives[m.index];
        EXPECT_EQ(gt.labels[m.index], m.label_negative);
        EXPECT_EQ(m.label_positive, 0);
        int k = 0;
        g.scale.maxCoeff(&k);
        const Vec3 e = g.orientation.to_matrix().col(k);
        const Vec3 a = g.center + 0.5 * g.scale[k] * e;
        const Vec3 c = g.center - 0.5 * g.scale[k] * e;
        EXPECT_NE(m.label_at(a), m.label_at(c));
        EXPECT_EQ(synth::truth_label(gt, m.index, a), m.label_at(a));
    }
    // The truth field replaces each straddler by its two halves.
    EXPECT_EQ(synth::truth_field(b).primitives.size(), b.primitive_count() + 12);
}

TEST(Masks, DisjointAndCoverTheSilhouette)
{
    const SceneBundle b = synth::generate_scene(synth::preset("storage2", 7));
    for (std::size_t v : {0u, 5u, 11u}) {
        const auto masks = synth::ground_truth_masks(b, v);
        ASSERT_EQ(masks.size(), 3u);
        StateSnapshot field = b.canonical;
        const RenderOutput r = render_view(field, b.cameras[0][v]);
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < r.pixel_count(); ++i) {
            int owners = 0;
            for (const auto& m : masks) {
                owners += m.mask.pixels[i];
            }
            EXPECT_LE(owners, 1);
            const bool silhouette = 1.0 - r.transmittance[i] > 0.5;
            inter += silhouette && owners > 0 ? 1 : 0;
            uni += silhouette || owners > 0 ? 1 : 0;
        }
        ASSERT_GT(uni, 0u);
        EXPECT_GE(static_cast<double>(inter) / static_cast<double>(uni), 0.98) << "view " << v;
    }
}

TEST(Masks, UnreachableCoverageGivesEmptyMasks)
{
    const SceneBundle b = synth::generate_scene(synth::preset("drawer1", 7));
    synth::MaskOptions opts;
    opts.coverage_threshold = 1.0;
    for (const auto& m : synth::ground_truth_masks(b, 0, opts)) {
        EXPECT_EQ(m.mask.count(), 0u);
        EXPECT_EQ(m.mask.width, 96);
    }
    EXPECT_THROW(synth::ground_truth_masks(b, 99), ValidationError);
}

TEST(Cameras, RingLooksAtItsTarget)
{
    synth::CameraRing ring;
    ring.count = 6;
    const Vec3 target(0.1, -0.2, 0.3);
    const auto cams = synth::ring_cameras(ring, target, 3);
    ASSERT_EQ(cams.size(), 6u);
    for (const auto& c : cams) {
        const Vec3 t = c.world_to_camera.rotation * target + c.world_to_camera.translation;
        EXPECT_NEAR(t.x(), 0.0, 1e-12);
        EXPECT_NEAR(t.y(), 0.0, 1e-12);
        EXPECT_NEAR(t.z(), ring.radius, 1e-12);
        EXPECT_NO_THROW(validate(c));
    }
    ring.count = 0;
    EXPECT_THROW(synth::ring_cameras(ring, target, 3), ValidationError);
}

} // namespace
} // namespace artikin
