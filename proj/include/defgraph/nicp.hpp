#pragma once

#include <vector>

#include "defgraph/types.hpp"

namespace defgraph {

struct NicpOptions {
    double lambda_arap = 0.1;
    int max_iterations = 50;
    double relative_tol = 1e-6;
    int skin_neighbors = 4;      // nodes per point
    int arap_neighbors = 4;      // rest-graph degree
    int max_data_points = 2000;  // source subsample for the data term
    int threads = 0;
};

/// Chained non-rigid ICP over the deformation-graph parameterization:
/// per frame, alternate closest-point correspondences with damped
/// Gauss-Newton steps on per-node SE(3) transforms (point-to-point residual
/// plus ARAP regularizer); frame i starts from frame i-1's solution.
RegistrationResult chained_nicp(const PointCloud& source, const PointCloudSeq& seq,
                                const PointCloud& rest_nodes, const NicpOptions& options = {});

}  // namespace defgraph
