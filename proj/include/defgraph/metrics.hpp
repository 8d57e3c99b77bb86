#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "defgraph/types.hpp"

namespace defgraph {

struct MetricsReport {
    double ate3d = 0.0;        // mean L1 trajectory error, scene units
    double delta_001 = 0.0;    // inlier fraction at 0.01
    double delta_005 = 0.0;    // inlier fraction at 0.05
    double t_avg = 0.0;        // seconds per frame (0 when unknown)
    std::vector<double> per_frame_ate;
};

/// Mean L1 distance over all frames and points.
double ate3d(const PointCloudSeq& pred, const PointCloudSeq& gt);

/// Mean L1 distance per frame.
std::vector<double> per_frame_ate(const PointCloudSeq& pred, const PointCloudSeq& gt);

/// Fraction of (frame, point) pairs with L2 error strictly below threshold.
double delta_inlier(const PointCloudSeq& pred, const PointCloudSeq& gt, double threshold);

/// All four metrics in one pass; t_avg taken from `per_frame_seconds` when
/// non-empty.
MetricsReport evaluate(const PointCloudSeq& pred, const PointCloudSeq& gt,
                       const std::vector<double>& per_frame_seconds = {});

/// Aligned text table, rows sorted by ATE_3D ascending.
std::string comparison_table(const std::vector<std::pair<std::string, MetricsReport>>& reports);

/// Machine-readable comparison: header row then one CSV row per method,
/// same sort order as the text table.
std::string comparison_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports);
std::vector<std::pair<std::string, MetricsReport>> parse_comparison_csv(const std::string& text);

/// Key-value report file mirroring the MetricsReport fields.
void write_metrics(const std::string& path, const MetricsReport& report);
MetricsReport read_metrics(const std::string& path);

}  // namespace defgraph
