#include "defgraph/normalize.hpp"

namespace defgraph {

SceneNormalizer::SceneNormalizer(const PointCloud& reference) {
    require_cloud(reference, "normalization reference");
    Point3 lo = reference[0], hi = reference[0];
    for (const Point3& p : reference) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    center_ = 0.5 * (lo + hi);
    const double extent = (hi - lo).maxCoeff();
    scale_ = extent > 0.0 ? 1.0 / extent : 1.0;
}

PointCloud SceneNormalizer::apply(const PointCloud& cloud) const {
    PointCloud out;
    out.reserve(cloud.size());
    for (const Point3& p : cloud) out.push_back(apply(p));
    return out;
}

PointCloud SceneNormalizer::invert(const PointCloud& cloud) const {
    PointCloud out;
    out.reserve(cloud.size());
    for (const Point3& p : cloud) out.push_back(invert(p));
    return out;
}

PointCloudSeq SceneNormalizer::apply(const PointCloudSeq& seq) const {
    PointCloudSeq out;
    out.reserve(seq.size());
    for (const PointCloud& f : seq) out.push_back(apply(f));
    return out;
}

PointCloudSeq SceneNormalizer::invert(const PointCloudSeq& seq) const {
    PointCloudSeq out;
    out.reserve(seq.size());
    for (const PointCloud& f : seq) out.push_back(invert(f));
    return out;
}

Se3 SceneNormalizer::invert(const Se3& t) const {
    // x_out = N^{-1}(R * N(x) + t) with N(x) = (x - c) * s.
    Se3 out;
    out.rotation = t.rotation;
    out.translation = t.translation / scale_ + center_ - t.rotation * center_;
    return out;
}

}  // namespace defgraph
