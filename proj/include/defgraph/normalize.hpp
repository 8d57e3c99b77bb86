#pragma once

#include "defgraph/types.hpp"

namespace defgraph {

/// Maps a scene so the reference bounding box has max extent 1 and its
/// center sits at the origin. Thresholds and grid domains throughout the
/// library assume this normalized scale; the inverse restores input units.
class SceneNormalizer {
public:
    SceneNormalizer() = default;

    /// Builds the transform from the bounding box of `reference`
    /// (the source cloud in the pipeline).
    explicit SceneNormalizer(const PointCloud& reference);

    Point3 apply(const Point3& p) const { return (p - center_) * scale_; }
    Point3 invert(const Point3& p) const { return p / scale_ + center_; }

    PointCloud apply(const PointCloud& cloud) const;
    PointCloud invert(const PointCloud& cloud) const;
    PointCloudSeq apply(const PointCloudSeq& seq) const;
    PointCloudSeq invert(const PointCloudSeq& seq) const;

    /// Conjugates a transform expressed in normalized coordinates back to
    /// input units (rotation unchanged, translation rescaled/recentered).
    Se3 invert(const Se3& t) const;

    double scale() const { return scale_; }
    const Point3& center() const { return center_; }

private:
    Point3 center_ = Point3::Zero();
    double scale_ = 1.0;
};

}  // namespace defgraph
