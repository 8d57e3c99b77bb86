#include "defgraph/pipeline.hpp"

#include <chrono>

#include "defgraph/normalize.hpp"
#include "defgraph/sampling.hpp"

namespace defgraph {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct EncodedScene {
    SceneNormalizer normalizer;
    PointCloud source;
    PointCloudSeq seq;
    std::vector<Descriptor> source_desc;
    std::vector<TriplaneGrid> grids;
};

EncodedScene encode_scene(const PointCloud& source, const PointCloudSeq& seq,
                          const RegistrationOptions& options) {
    require_cloud(source, "source");
    require_seq(seq);
    EncodedScene scene;
    if (options.normalize) {
        scene.normalizer = SceneNormalizer(source);
        scene.source = scene.normalizer.apply(source);
        scene.seq = scene.normalizer.apply(seq);
    } else {
        scene.source = source;
        scene.seq = seq;
    }
    scene.source_desc = compute_descriptors(scene.source, options.descriptor_params);
    scene.grids.reserve(scene.seq.size());
    for (const PointCloud& frame : scene.seq) {
        const std::vector<Descriptor> frame_desc =
            compute_descriptors(frame, options.descriptor_params);
        scene.grids.push_back(splat(frame, frame_desc, options.resolution));
    }
    return scene;
}

MatchOptions make_match_options(const RegistrationOptions& options) {
    MatchOptions m = options.match;
    m.iterations = options.iterations;
    m.descriptor_params = options.descriptor_params;
    m.threads = options.threads;
    return m;
}

RefineOptions make_refine_options(const RegistrationOptions& options) {
    RefineOptions r = options.refine;
    r.window = options.window;
    r.iterations = options.iterations;
    r.threads = options.threads;
    return r;
}

EnergyWeights make_weights(const RegistrationOptions& options) {
    EnergyWeights w;
    w.lambda_node = options.lambda_node;
    w.lambda_rigid = options.lambda_rigid;
    return w;
}

}  // namespace

PipelineResult register_sequence(const PointCloud& source, const PointCloudSeq& seq,
                                 const RegistrationOptions& options) {
    if (options.nodes < 4) throw std::invalid_argument("register_sequence: need at least 4 nodes");
    const auto total0 = Clock::now();
    PipelineResult result;

    auto t0 = Clock::now();
    EncodedScene scene = encode_scene(source, seq, options);
    result.timing.encode_seconds = seconds_since(t0);

    const int node_count = std::min<int>(options.nodes, static_cast<int>(scene.source.size()));
    const int seed_index = static_cast<int>(options.seed % scene.source.size());
    const std::vector<int> node_idx =
        farthest_point_sample(scene.source, node_count, seed_index);

    DeformationGraph graph;
    graph.rest_nodes.reserve(node_idx.size());
    std::vector<Descriptor> node_desc;
    node_desc.reserve(node_idx.size());
    for (int i : node_idx) {
        graph.rest_nodes.push_back(scene.source[static_cast<std::size_t>(i)]);
        node_desc.push_back(scene.source_desc[static_cast<std::size_t>(i)]);
    }

    t0 = Clock::now();
    std::vector<std::vector<double>> confidence;
    const std::vector<PointCloud> coarse =
        match_sequence(graph.rest_nodes, node_desc, scene.seq, scene.grids,
                       make_match_options(options), &confidence);
    result.timing.match_seconds = seconds_since(t0);

    t0 = Clock::now();
    RefineResult refined = refine(scene.seq, coarse, graph.rest_nodes, make_weights(options),
                                  make_refine_options(options), &scene.grids, &confidence);
    graph.node_traj = std::move(refined.node_traj);
    graph.radii = estimate_radii(graph.node_traj, graph.rest_nodes);
    result.timing.refine_seconds = seconds_since(t0);

    t0 = Clock::now();
    TransformOptions topt = options.transform;
    const TransformDiagnostics tdiag = estimate_transforms(graph, topt);
    result.timing.transform_seconds = seconds_since(t0);

    t0 = Clock::now();
    SkinningOptions sopt;
    sopt.k_max = options.k_skin;
    sopt.k_init = std::max(options.k_skin + 2, 6);
    result.registration = register_clouds(scene.source, graph, sopt, options.threads);
    result.registration.degenerate_transform_count = tdiag.degenerate_groups;
    result.timing.skin_seconds = seconds_since(t0);

    if (options.normalize) {
        for (PointCloud& frame : result.registration.warped)
            frame = scene.normalizer.invert(frame);
        DeformationGraph& g = result.registration.graph;
        g.rest_nodes = scene.normalizer.invert(g.rest_nodes);
        for (PointCloud& frame : g.node_traj) frame = scene.normalizer.invert(frame);
        for (double& r : g.radii) r /= scene.normalizer.scale();
        for (auto& frame : g.transforms)
            for (Se3& tr : frame) tr = scene.normalizer.invert(tr);
    }

    result.timing.total_seconds = seconds_since(total0);
    const double shared = result.timing.total_seconds -
                          [&] {
                              double s = 0.0;
                              for (double v : result.registration.per_frame_seconds) s += v;
                              return s;
                          }();
    result.per_frame_pipeline_seconds.resize(seq.size());
    for (std::size_t f = 0; f < seq.size(); ++f)
        result.per_frame_pipeline_seconds[f] =
            shared / static_cast<double>(seq.size()) + result.registration.per_frame_seconds[f];
    return result;
}

PipelineResult register_dense(const PointCloud& source, const PointCloudSeq& seq,
                              const RegistrationOptions& options) {
    const auto total0 = Clock::now();
    PipelineResult result;

    auto t0 = Clock::now();
    EncodedScene scene = encode_scene(source, seq, options);
    result.timing.encode_seconds = seconds_since(t0);

    t0 = Clock::now();
    const std::vector<PointCloud> coarse =
        match_sequence(scene.source, scene.source_desc, scene.seq, scene.grids,
                       make_match_options(options));
    result.timing.match_seconds = seconds_since(t0);

    t0 = Clock::now();
    RefineResult refined = refine(scene.seq, coarse, scene.source, make_weights(options),
                                  make_refine_options(options), &scene.grids);
    result.timing.refine_seconds = seconds_since(t0);

    result.registration.graph.rest_nodes = scene.source;
    result.registration.graph.node_traj = refined.node_traj;
    result.registration.warped = std::move(refined.node_traj);
    result.registration.per_frame_seconds.assign(seq.size(), 0.0);

    if (options.normalize) {
        for (PointCloud& frame : result.registration.warped)
            frame = scene.normalizer.invert(frame);
        result.registration.graph.rest_nodes =
            scene.normalizer.invert(result.registration.graph.rest_nodes);
        for (PointCloud& frame : result.registration.graph.node_traj)
            frame = scene.normalizer.invert(frame);
    }

    result.timing.total_seconds = seconds_since(total0);
    result.per_frame_pipeline_seconds.assign(
        seq.size(), result.timing.total_seconds / static_cast<double>(seq.size()));
    return result;
}

}  // namespace defgraph
