#pragma once

#include <iosfwd>
#include <string>

#include "defgraph/types.hpp"

namespace defgraph {

/// Text cloud: one "x y z" per line, '#' comments ignored. Also reads PLY
/// files (ascii or binary little-endian) limited to vertex positions.
/// Coordinates are stored at 32-bit precision.
PointCloud read_cloud(const std::string& path);
void write_cloud(const std::string& path, const PointCloud& cloud);

/// Binary sequence container, little-endian:
///   magic "DGSQ", version u32 = 1, frame count u32,
///   then per frame: point count u32 followed by count * 3 f32.
PointCloudSeq read_seq(const std::string& path);
PointCloudSeq read_seq_stream(std::istream& in);
void write_seq(const std::string& path, const PointCloudSeq& seq);
void write_seq_stream(std::ostream& out, const PointCloudSeq& seq);

/// Structured text capture of a full deformation graph (rest nodes, radii,
/// per-frame trajectories and transforms); reads back exactly.
void write_graph(const std::string& path, const DeformationGraph& graph);
DeformationGraph read_graph(const std::string& path);

}  // namespace defgraph
