#pragma once

#include <cstdint>
#include <vector>

#include "defgraph/matcher.hpp"
#include "defgraph/refiner.hpp"
#include "defgraph/skinning.hpp"
#include "defgraph/transform.hpp"
#include "defgraph/triplane.hpp"
#include "defgraph/types.hpp"

namespace defgraph {

struct RegistrationOptions {
    int nodes = 256;           // B
    int window = 8;            // T_w
    int iterations = 6;        // M, shared by matcher and refiner
    int k_skin = 4;
    int resolution = 256;      // triplane resolution
    double lambda_node = 1.0;
    double lambda_rigid = 0.1;
    std::uint64_t seed = 0;    // FPS seed (seed % N picks the first node)
    int threads = 0;
    bool normalize = true;     // rescale by the source bounding box
    DescriptorParams descriptor_params{};
    MatchOptions match{};
    RefineOptions refine{};
    TransformOptions transform{};
};

struct PipelineTiming {
    double encode_seconds = 0.0;
    double match_seconds = 0.0;
    double refine_seconds = 0.0;
    double transform_seconds = 0.0;
    double skin_seconds = 0.0;
    double total_seconds = 0.0;
};

struct PipelineResult {
    RegistrationResult registration;
    PipelineTiming timing;
    std::vector<double> per_frame_pipeline_seconds;  // full pipeline cost / frame
};

/// Full registration pipeline: normalize, sample B nodes by FPS, encode
/// every cloud onto triplanes, coarse-match each frame, refine node
/// trajectories over sliding windows, estimate radii and per-node rigid
/// transforms, then skin the dense source. Outputs are mapped back to the
/// input units.
PipelineResult register_sequence(const PointCloud& source, const PointCloudSeq& seq,
                                 const RegistrationOptions& options = {});

/// Ablation path: every source point becomes a node and the matched+refined
/// trajectories are returned directly (no transforms, no skinning).
PipelineResult register_dense(const PointCloud& source, const PointCloudSeq& seq,
                              const RegistrationOptions& options = {});

}  // namespace defgraph
