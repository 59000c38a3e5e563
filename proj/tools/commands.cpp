// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/cli.hpp"

#include "artikin/codec.hpp"
#include "artikin/error.hpp"
#include "artikin/http_backends.hpp"
#include "artikin/image_io.hpp"
#include "artikin/metrics.hpp"
#include "artikin/scene_io.hpp"
#include "artikin/synth_oracle.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>

namespace artikin {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

/// Output directory that remembers the hash of everything written to it.
class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root))
    {
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec) {
            throw RuntimeFailure("cannot create output directory '" + root_.string() + "': " + ec.message());
        }
    }

    void text(const std::string& rel, const std::string& bytes)
    {
        write_text_file(bytes, root_ / rel);
        hashes_[rel] = sha256_hex(bytes);
    }

    void json_file(const std::string& rel, const json& doc) { text(rel, doc.dump(2) + "\n"); }

    [[nodiscard]] const fs::path& root() const { return root_; }

    /// manifest.json: command, seed, full config, input and output hashes.
    void manifest(const std::string& command, const RunConfig& cfg, const json& inputs) const
    {
        json outputs = json::object();
        for (const auto& [rel, hash] : hashes_) {
            outputs[rel] = hash;
        }
        const json doc = {{"tool", "artikin"},     {"version", kVersion}, {"command", command},
                          {"seed", cfg.seed},      {"config", to_json(cfg)}, {"inputs", inputs},
                          {"outputs", outputs}};
        write_json_file(doc, root_ / "manifest.json");
    }

private:
    fs::path root_;
    std::map<std::string, std::string> hashes_;
};

json input_entry(const fs::path& path)
{
    fs::path file = path;
    if (fs::is_directory(file)) {
        file /= kSceneManifestName;
    }
    return {{"path", file.generic_string()}, {"sha256", sha256_file(file)}};
}

std::string view_name(std::size_t view)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "view%03zu", view);
    return buf;
}

std::string t_name(double t)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%.4f", t);
    return buf;
}

std::unique_ptr<PartCountProvider> make_provider(const RunConfig& cfg, const SceneBundle& bundle)
{
    if (cfg.provider == "oracle") {
        if (!bundle.ground_truth) {
            throw ValidationError("provider 'oracle' needs the scene's ground_truth block; use --set provider=fixed");
        }
        return std::make_unique<OracleProvider>(*bundle.ground_truth);
    }
    if (cfg.provider == "fixed") {
        return std::make_unique<FixedProvider>(cfg.fixed_parts);
    }
    return std::make_unique<HttpProvider>(HttpEndpoint::from_env("ARTIKIN_VLM"));
}

std::unique_ptr<Segmenter> make_segmenter(const RunConfig& cfg, const SceneBundle& bundle)
{
    if (cfg.segmenter == "oracle") {
        if (!bundle.ground_truth) {
            throw ValidationError(
                "segmenter 'oracle' needs the scene's ground_truth block; use --set segmenter=http or "
                "--set refiner.enabled=false");
        }
        return std::make_unique<OracleSegmenter>(bundle);
    }
    return std::make_unique<HttpSegmenter>(HttpEndpoint::from_env("ARTIKIN_SEG"));
}

std::vector<int> read_labels(const fs::path& path, std::size_t expected)
{
    const json doc = read_json_file(path);
    if (!doc.is_object() || !doc.contains("labels") || !doc["labels"].is_array()) {
        throw ValidationError("'" + path.string() + "' has no 'labels' array");
    }
    std::vector<int> labels;
    for (const json& v : doc["labels"]) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ValidationError("'" + path.string() + "': labels must be non-negative integers");
        }
        labels.push_back(v.get<int>());
    }
    if (labels.size() != expected) {
        throw ValidationError("'" + path.string() + "' holds " + std::to_string(labels.size()) +
                              " labels but the scene has " + std::to_string(expected) + " primitives");
    }
    return labels;
}

Vec3 label_color(int label)
{
    static const Vec3 palette[] = {{0.85, 0.33, 0.10}, {0.00, 0.45, 0.74}, {0.47, 0.67, 0.19},
                                   {0.49, 0.18, 0.56}, {0.93, 0.69, 0.13}, {0.30, 0.75, 0.93}};
    if (label == 0) {
        return Vec3::Constant(0.6);
    }
    return palette[static_cast<std::size_t>(label - 1) % std::size(palette)];
}

struct SegmentOutcome {
    CoarseResult coarse;
    std::optional<RefinedField> refined;
    MaskSet masks;
    std::vector<int> labels;
};

SegmentOutcome segment_scene(const SceneBundle& bundle, const RunConfig& cfg)
{
    SegmentOutcome r;
    auto provider = make_provider(cfg, bundle);
    r.coarse = coarse_labels(bundle, *provider, cfg.coarse_config());
    r.labels = r.coarse.labels;
    if (!cfg.refine) {
        return r;
    }
    auto segmenter = make_segmenter(cfg, bundle);
    std::vector<std::size_t> views(bundle.cameras.front().size());
    for (std::size_t v = 0; v < views.size(); ++v) {
        views[v] = v;
    }
    const RefineConfig rc = cfg.refine_config();
    r.masks = acquire_masks(*segmenter, bundle, r.labels, views, rc);
    r.refined = refine_labels(bundle, r.labels, r.masks, rc);
    // The part child of a split keeps its parent's slot, so the first N
    // refined primitives label the original ones.
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        r.labels[i] = r.refined->field.primitives[i].label;
    }
    return r;
}

void write_segment(OutputDir& out, const SegmentOutcome& seg, const RunConfig& cfg)
{
    json refine = {{"enabled", cfg.refine}};
    if (seg.refined) {
        const RefineStats& s = seg.refined->stats;
        refine["candidates"] = s.candidates;
        refine["splits"] = s.splits;
        refine["unsplittable"] = s.unsplittable;
        refine["relabelled"] = s.relabelled;
        refine["max_depth"] = s.max_depth;
        refine["primitive_count"] = seg.refined->field.primitives.size();
        refine["masks"] = seg.masks.masks.size();
    }
    const json doc = {{"format", "artikin-labels-v1"},
                      {"primitive_count", seg.labels.size()},
                      {"labels", seg.labels},
                      {"coarse_labels", seg.coarse.labels},
                      {"estimated_parts", seg.coarse.estimated_parts},
                      {"provider", cfg.provider},
                      {"provider_counts", seg.coarse.provider_counts},
                      {"dynamic_count", seg.coarse.split.dynamic_set.size()},
                      {"refine", refine},
                      {"warnings", seg.masks.warnings}};
    out.json_file("labels.json", doc);
    if (!seg.refined) {
        return;
    }
    out.json_file("refined_field.json", {{"format", "artikin-refined-v1"},
                                         {"source_index", seg.refined->source_index},
                                         {"depth", seg.refined->depth},
                                         {"field", to_json(seg.refined->field)}});
    for (const PartMask& m : seg.masks.masks) {
        out.text("masks/" + view_name(static_cast<std::size_t>(m.view)) + "_label" + std::to_string(m.label) +
                     ".pgm",
                 encode_mask_pgm(m.mask));
    }
}

json kinematics_scene(OutputDir& out, const SceneBundle& bundle, const std::vector<int>& labels,
                      const RunConfig& cfg, std::ostream& log)
{
    const auto [a, b] = cfg.state_pair(bundle.state_count());
    const auto parts = analyze_parts(bundle, labels, a, b, cfg.kinematics(), cfg.threads);
    const json report = joint_report(parts, a, b);
    out.json_file("joints.json", report);
    for (const auto& [label, part] : parts) {
        log << "part " << label << ": ";
        if (part.joint) {
            log << to_string(part.joint->kind) << ", magnitude " << part.joint->magnitude << "\n";
        } else {
            log << "no joint (" << part.error << ")\n";
        }
    }
    return report;
}

void eval_scene(OutputDir& out, const SceneBundle& bundle, const std::vector<int>& labels, const json& joints,
                const RunConfig& cfg, std::ostream& log)
{
    const auto [a, b] = cfg.state_pair(bundle.state_count());
    EvalOptions opts;
    opts.state_a = a;
    opts.state_b = b;
    opts.threads = cfg.threads;
    const MetricsReport report = evaluate(bundle, labels, joints_from_report(joints), opts);
    out.json_file("report.json", to_json(report));
    out.text("report.csv", to_csv(report));
    log << "label accuracy " << report.label_accuracy << "\n";
}

void render_labels(OutputDir& out, const SceneBundle& bundle, const std::vector<int>& labels, const RunConfig& cfg)
{
    StateSnapshot field = bundle.canonical;
    assign_labels(field, labels);
    for (GaussianPrimitive& p : field.primitives) {
        p.color = label_color(p.label);
    }
    RenderOptions ro;
    ro.raster = cfg.raster;
    ro.threads = cfg.threads;
    const RenderOutput img = render_view(field, bundle.cameras.front().front(), ro);
    out.text("images/labels_" + view_name(0) + ".ppm", encode_ppm(img.width, img.height, img.color));
}

SceneBundle require_ground_truth(SceneBundle bundle, const std::string& what)
{
    if (!bundle.ground_truth) {
        throw ValidationError("scene has no ground_truth block; " + what);
    }
    return bundle;
}

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;

    std::string scene;
    std::string out;
    std::string labels;
    std::string joints;
    std::string checkpoint;

    std::string preset;
    std::size_t straddlers = 0;

    std::vector<double> ts;
    std::optional<int> part;
    std::optional<std::size_t> view;
    std::size_t state = 0;
    std::optional<std::size_t> from_state;
    std::optional<std::size_t> to_state;
};

RunConfig resolve_config(const Options& o)
{
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    for (const std::string& s : o.overrides) {
        apply_override(cfg, s);
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.threads) {
        if (*o.threads < 1) {
            throw ValidationError("--threads must be at least 1");
        }
        cfg.threads = *o.threads;
    }
    return cfg;
}

int cmd_synth(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    synth::SceneSpec spec = synth::preset(o.preset, cfg.seed);
    spec.straddlers.per_part = o.straddlers;
    const SceneBundle bundle = synth::generate_scene(spec);
    OutputDir out(o.out);
    out.text(kSceneManifestName, to_json(bundle).dump(2) + "\n");
    synth::MaskOptions mo;
    mo.raster = cfg.raster;
    for (std::size_t v = 0; v < bundle.cameras.front().size(); ++v) {
        for (const PartMask& m : synth::ground_truth_masks(bundle, v, mo)) {
            out.text("masks/" + view_name(v) + "_label" + std::to_string(m.label) + ".pgm",
                     encode_mask_pgm(m.mask));
        }
    }
    out.manifest("synth", cfg, {{"preset", o.preset}, {"straddlers", o.straddlers}});
    log << "wrote " << bundle.primitive_count() << " primitives, " << bundle.state_count() << " states to "
        << o.out << "\n";
    return 0;
}

int cmd_fit(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    const SceneBundle bundle = load_scene(o.scene);
    const FitConfig fc = cfg.fit_config();
    const FitResult fit = artikin::fit(bundle, fc);
    OutputDir out(o.out);
    out.json_file("checkpoint.json", checkpoint_to_json(fit, fc));
    out.manifest("fit-deform", cfg, {{"scene", input_entry(o.scene)}});
    log << "final loss " << fit.final_loss << " after " << fc.epochs << " epochs\n";
    return 0;
}

int cmd_segment(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    const SceneBundle bundle = load_scene(o.scene);
    const SegmentOutcome seg = segment_scene(bundle, cfg);
    OutputDir out(o.out);
    write_segment(out, seg, cfg);
    out.manifest("segment", cfg, {{"scene", input_entry(o.scene)}});
    log << seg.coarse.estimated_parts << " moving part(s), " << seg.coarse.split.dynamic_set.size()
        << " dynamic primitives\n";
    return 0;
}

int cmd_kinematics(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    const SceneBundle bundle = load_scene(o.scene);
    const std::vector<int> labels = read_labels(o.labels, bundle.primitive_count());
    OutputDir out(o.out);
    kinematics_scene(out, bundle, labels, cfg, log);
    out.manifest("kinematics", cfg, {{"scene", input_entry(o.scene)}, {"labels", input_entry(o.labels)}});
    return 0;
}

int cmd_eval(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    const SceneBundle bundle =
        require_ground_truth(load_scene(o.scene), "eval needs ground-truth labels and joints");
    const std::vector<int> labels = read_labels(o.labels, bundle.primitive_count());
    const json joints = read_json_file(o.joints);
    OutputDir out(o.out);
    eval_scene(out, bundle, labels, joints, cfg, log);
    out.manifest("eval", cfg,
                 {{"scene", input_entry(o.scene)}, {"labels", input_entry(o.labels)}, {"joints", input_entry(o.joints)}});
    return 0;
}

int cmd_interp(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    const SceneBundle bundle = load_scene(o.scene);
    const FitResult fit = load_checkpoint(o.checkpoint);
    if (fit.latents.size() < 2) {
        throw ValidationError("checkpoint holds fewer than two latents");
    }
    const std::size_t from = o.from_state.value_or(0);
    const std::size_t to = o.to_state.value_or(fit.latents.size() - 1);
    if (from >= fit.latents.size() || to >= fit.latents.size()) {
        throw ValidationError("--from/--to exceed the checkpoint's " + std::to_string(fit.latents.size()) +
                              " latents");
    }
    StateSnapshot canonical = bundle.canonical;
    if (!o.labels.empty()) {
        assign_labels(canonical, read_labels(o.labels, bundle.primitive_count()));
    }
    std::optional<std::set<int>> filter;
    if (o.part) {
        const auto present = labels_of(canonical);
        if (std::find(present.begin(), present.end(), *o.part) == present.end()) {
            throw ValidationError("--part " + std::to_string(*o.part) + " labels no primitive");
        }
        filter = std::set<int>{*o.part};
    }
    const std::size_t view = o.view.value_or(0);
    if (view >= bundle.cameras.front().size()) {
        throw ValidationError("--view " + std::to_string(view) + " is out of range");
    }
    for (double t : o.ts) {
        if (!std::isfinite(t) || t < 0.0 || t > 1.0) {
            throw ValidationError("--t values must lie in [0, 1]");
        }
    }
    OutputDir out(o.out);
    RenderOptions ro;
    ro.raster = cfg.raster;
    ro.threads = cfg.threads;
    for (double t : o.ts) {
        const StateSnapshot s = interpolate(fit.net, fit.latents[from], fit.latents[to], t, canonical, filter);
        out.json_file("states/interp_" + t_name(t) + ".json", to_json(s));
        const RenderOutput img = render_view(s, bundle.cameras.front()[view], ro);
        out.text("images/interp_" + t_name(t) + ".ppm", encode_ppm(img.width, img.height, img.color));
    }
    json inputs = {{"scene", input_entry(o.scene)}, {"checkpoint", input_entry(o.checkpoint)}, {"t", o.ts}};
    if (o.part) {
        inputs["part"] = *o.part;
    }
    out.manifest("interp", cfg, inputs);
    log << "wrote " << o.ts.size() << " interpolated state(s)\n";
    return 0;
}

int cmd_render(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    const SceneBundle bundle = load_scene(o.scene);
    if (o.state >= bundle.state_count()) {
        throw ValidationError("--state " + std::to_string(o.state) + " is out of range");
    }
    const auto& cams = bundle.cameras[o.state];
    std::vector<std::size_t> views;
    if (o.view) {
        if (*o.view >= cams.size()) {
            throw ValidationError("--view " + std::to_string(*o.view) + " is out of range");
        }
        views.push_back(*o.view);
    } else {
        for (std::size_t v = 0; v < cams.size(); ++v) {
            views.push_back(v);
        }
    }
    std::vector<CameraModel> selected;
    for (std::size_t v : views) {
        selected.push_back(cams[v]);
    }
    RenderOptions ro;
    ro.raster = cfg.raster;
    ro.threads = cfg.threads;
    const auto renders = render_views(bundle.states[o.state], selected, ro);
    OutputDir out(o.out);
    const std::string prefix = "images/state" + std::to_string(o.state) + "_";
    for (std::size_t i = 0; i < views.size(); ++i) {
        const RenderOutput& r = renders[i];
        out.text(prefix + view_name(views[i]) + ".ppm", encode_ppm(r.width, r.height, r.color));
        out.text(prefix + view_name(views[i]) + "_depth.pgm", encode_pgm16(r.width, r.height, r.depth, kDepthScale));
    }
    out.manifest("render", cfg, {{"scene", input_entry(o.scene)}, {"state", o.state}});
    log << "rendered " << views.size() << " view(s)\n";
    return 0;
}

int cmd_pipeline(const Options& o, const RunConfig& cfg, std::ostream& log)
{
    const SceneBundle bundle = load_scene(o.scene);
    static_cast<void>(cfg.state_pair(bundle.state_count()));
    OutputDir out(o.out);
    out.json_file("config.json", to_json(cfg));
    const SegmentOutcome seg = segment_scene(bundle, cfg);
    write_segment(out, seg, cfg);
    const json joints = kinematics_scene(out, bundle, seg.labels, cfg, log);
    render_labels(out, bundle, seg.labels, cfg);
    json inputs = {{"scene", input_entry(o.scene)}};
    if (bundle.ground_truth) {
        eval_scene(out, bundle, seg.labels, joints, cfg, log);
    } else {
        inputs["eval"] = "skipped: scene has no ground_truth block";
        log << "eval skipped: scene has no ground_truth block\n";
    }
    out.manifest("pipeline", cfg, inputs);
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Articulated Gaussian scenes: segmentation, joint estimation and evaluation.", "artikin"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.footer(config_help() + "\nEnvironment: ARTIKIN_VLM_URL/_TOKEN/_MODEL and ARTIKIN_SEG_URL/_TOKEN/_MODEL "
                               "configure the http provider and segmenter. ARTIKIN_SIMD=scalar|avx2 pins the "
                               "kernel variant.");
    app.set_version_flag("--version", kVersion);

    Options o;
    app.add_option("--config", o.config_path, "JSON run config (keys below)");
    app.add_option("--set", o.overrides, "Override one config key: key=value (repeatable)");
    app.add_option("--seed", o.seed, "Seed for all randomness (overrides the config)");
    app.add_option("--threads", o.threads, "Worker cap (overrides the config)");

    auto* synth = app.add_subcommand("synth", "Generate a preset scene with exact ground truth");
    synth->add_option("--preset", o.preset, "Preset name")
        ->required()
        ->check(CLI::IsMember(synth::preset_names()));
    synth->add_option("--straddlers", o.straddlers, "Boundary-straddling primitives per movable part");
    synth->add_option("--out", o.out, "Output directory")->required();

    auto* fit = app.add_subcommand("fit-deform", "Fit the deformation field; writes checkpoint.json");
    fit->add_option("--scene", o.scene, "Scene directory or manifest")->required();
    fit->add_option("--out", o.out, "Output directory")->required();

    auto* segment = app.add_subcommand("segment", "Coarse labels, masks and boundary refinement");
    segment->add_option("--scene", o.scene, "Scene directory or manifest")->required();
    segment->add_option("--out", o.out, "Output directory")->required();

    auto* kin = app.add_subcommand("kinematics", "Classify and fit one joint per labelled part");
    kin->add_option("--scene", o.scene, "Scene directory or manifest")->required();
    kin->add_option("--labels", o.labels, "labels.json from segment")->required();
    kin->add_option("--out", o.out, "Output directory")->required();

    auto* interp = app.add_subcommand("interp", "Interpolate between two fitted latents and render");
    interp->add_option("--scene", o.scene, "Scene directory or manifest")->required();
    interp->add_option("--checkpoint", o.checkpoint, "checkpoint.json from fit-deform")->required();
    interp->add_option("--t", o.ts, "Interpolation weights in [0, 1], comma separated")
        ->required()
        ->delimiter(',');
    interp->add_option("--part", o.part, "Only this label moves");
    interp->add_option("--labels", o.labels, "labels.json overriding the scene's labels");
    interp->add_option("--from", o.from_state, "Latent at t = 0 (default 0)");
    interp->add_option("--to", o.to_state, "Latent at t = 1 (default last)");
    interp->add_option("--view", o.view, "Camera used for the images (default 0)");
    interp->add_option("--out", o.out, "Output directory")->required();

    auto* render = app.add_subcommand("render", "Render one state of a scene");
    render->add_option("--scene", o.scene, "Scene directory or manifest")->required();
    render->add_option("--state", o.state, "State index");
    render->add_option("--view", o.view, "Single view (default all)");
    render->add_option("--out", o.out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Score labels and joints against ground truth");
    eval->add_option("--scene", o.scene, "Scene directory or manifest")->required();
    eval->add_option("--labels", o.labels, "labels.json")->required();
    eval->add_option("--joints", o.joints, "joints.json")->required();
    eval->add_option("--out", o.out, "Output directory")->required();

    auto* pipeline = app.add_subcommand("pipeline", "segment, kinematics and eval in one run");
    pipeline->add_option("--scene", o.scene, "Scene directory or manifest")->required();
    pipeline->add_option("--out", o.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e, out, err);
        }
        err << "artikin: " << e.what() << " (run 'artikin --help')\n";
        return 1;
    }

    try {
        const RunConfig cfg = resolve_config(o);
        if (synth->parsed()) {
            return cmd_synth(o, cfg, out);
        }
        if (fit->parsed()) {
            return cmd_fit(o, cfg, out);
        }
        if (segment->parsed()) {
            return cmd_segment(o, cfg, out);
        }
        if (kin->parsed()) {
            return cmd_kinematics(o, cfg, out);
        }
        if (interp->parsed()) {
            return cmd_interp(o, cfg, out);
        }
        if (render->parsed()) {
            return cmd_render(o, cfg, out);
        }
        if (eval->parsed()) {
            return cmd_eval(o, cfg, out);
        }
        return cmd_pipeline(o, cfg, out);
    } catch (const ValidationError& e) {
        err << "artikin: " << e.what() << "\n";
        return 1;
    } catch (const RuntimeFailure& e) {
        err << "artikin: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "artikin: " << e.what() << "\n";
        return 2;
    }
}

} // namespace artikin
