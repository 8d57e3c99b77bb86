#include "defgraph/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <vector>

namespace defgraph {

namespace {

constexpr char kSeqMagic[4] = {'D', 'G', 'S', 'Q'};
constexpr std::uint32_t kSeqVersion = 1;
constexpr char kGraphMagic[] = "defgraph-trajectories";
constexpr int kGraphVersion = 1;

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (in.gcount() != 4)
        throw IoError(IoError::Kind::Truncated, std::string("truncated while reading ") + what);
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

float bits_to_float(std::uint32_t bits) {
    float f;
    static_assert(sizeof(f) == sizeof(bits));
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

std::uint32_t float_to_bits(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    return bits;
}

std::streamsize remaining_bytes(std::istream& in) {
    const std::streampos here = in.tellg();
    in.seekg(0, std::ios::end);
    const std::streampos end = in.tellg();
    in.seekg(here);
    return end - here;
}

}  // namespace

PointCloudSeq read_seq_stream(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4) throw IoError(IoError::Kind::Truncated, "file shorter than magic");
    if (std::memcmp(magic, kSeqMagic, 4) != 0)
        throw IoError(IoError::Kind::BadMagic, "not a DGSQ sequence file");
    const std::uint32_t version = read_u32(in, "version");
    if (version != kSeqVersion)
        throw IoError(IoError::Kind::VersionMismatch,
                      "unsupported DGSQ version " + std::to_string(version));
    const std::uint32_t frames = read_u32(in, "frame count");
    if (frames == 0) throw IoError(IoError::Kind::Malformed, "sequence has zero frames");

    PointCloudSeq seq;
    seq.reserve(frames);
    for (std::uint32_t f = 0; f < frames; ++f) {
        const std::uint32_t count = read_u32(in, "point count");
        if (count == 0)
            throw IoError(IoError::Kind::Malformed,
                          "frame " + std::to_string(f) + " has zero points");
        // Validate the payload size before allocating anything.
        const std::streamsize need = static_cast<std::streamsize>(count) * 12;
        if (remaining_bytes(in) < need)
            throw IoError(IoError::Kind::Truncated,
                          "frame " + std::to_string(f) + " payload truncated");
        PointCloud frame;
        frame.reserve(count);
        std::vector<unsigned char> buf(static_cast<std::size_t>(need));
        in.read(reinterpret_cast<char*>(buf.data()), need);
        if (in.gcount() != need)
            throw IoError(IoError::Kind::Truncated,
                          "frame " + std::to_string(f) + " payload truncated");
        for (std::uint32_t i = 0; i < count; ++i) {
            double c[3];
            for (int a = 0; a < 3; ++a) {
                const std::size_t off = (static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(a)) * 4;
                std::uint32_t bits = static_cast<std::uint32_t>(buf[off]) |
                                     (static_cast<std::uint32_t>(buf[off + 1]) << 8) |
                                     (static_cast<std::uint32_t>(buf[off + 2]) << 16) |
                                     (static_cast<std::uint32_t>(buf[off + 3]) << 24);
                c[a] = static_cast<double>(bits_to_float(bits));
                if (!std::isfinite(c[a]))
                    throw IoError(IoError::Kind::Malformed,
                                  "frame " + std::to_string(f) + " contains non-finite values");
            }
            frame.emplace_back(c[0], c[1], c[2]);
        }
        seq.push_back(std::move(frame));
    }
    return seq;
}

PointCloudSeq read_seq(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::FileAccess, "cannot open: " + path);
    return read_seq_stream(in);
}

void write_seq_stream(std::ostream& out, const PointCloudSeq& seq) {
    require_seq(seq);
    out.write(kSeqMagic, 4);
    write_u32(out, kSeqVersion);
    write_u32(out, static_cast<std::uint32_t>(seq.size()));
    for (const PointCloud& frame : seq) {
        write_u32(out, static_cast<std::uint32_t>(frame.size()));
        for (const Point3& p : frame) {
            for (int a = 0; a < 3; ++a) write_u32(out, float_to_bits(static_cast<float>(p[a])));
        }
    }
}

void write_seq(const std::string& path, const PointCloudSeq& seq) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::FileAccess, "cannot open for writing: " + path);
    write_seq_stream(out, seq);
    if (!out) throw IoError(IoError::Kind::FileAccess, "write failed: " + path);
}

namespace {

PointCloud read_cloud_text(std::istream& in, const std::string& path) {
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x)) continue;  // blank or comment-only line
        if (!(ls >> y >> z))
            throw IoError(IoError::Kind::Malformed,
                          path + ":" + std::to_string(line_no) + ": expected three coordinates");
        std::string extra;
        if (ls >> extra)
            throw IoError(IoError::Kind::Malformed,
                          path + ":" + std::to_string(line_no) + ": trailing content");
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw IoError(IoError::Kind::Malformed,
                          path + ":" + std::to_string(line_no) + ": non-finite coordinate");
        // Coordinates are declared 32-bit; quantize so write/read round-trips.
        cloud.emplace_back(static_cast<float>(x), static_cast<float>(y), static_cast<float>(z));
    }
    if (cloud.empty()) throw IoError(IoError::Kind::Malformed, path + ": no points");
    return cloud;
}

struct PlyProperty {
    std::string type;
    std::string name;
};

std::size_t ply_type_size(const std::string& type, const std::string& path) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    throw IoError(IoError::Kind::Malformed, path + ": unsupported ply property type " + type);
}

double ply_read_scalar(std::istream& in, const std::string& type, const std::string& path) {
    unsigned char buf[8];
    const std::size_t size = ply_type_size(type, path);
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in.gcount()) != size)
        throw IoError(IoError::Kind::Truncated, path + ": truncated vertex data");
    if (type == "float" || type == "float32") {
        std::uint32_t bits = 0;
        for (int i = 3; i >= 0; --i) bits = (bits << 8) | buf[i];
        return static_cast<double>(bits_to_float(bits));
    }
    if (type == "double" || type == "float64") {
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) bits = (bits << 8) | buf[i];
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    // Integer types: little-endian two's complement; adequate for skipping.
    std::int64_t v = 0;
    for (std::size_t i = size; i-- > 0;) v = (v << 8) | buf[i];
    return static_cast<double>(v);
}

PointCloud read_cloud_ply(std::istream& in, const std::string& path) {
    std::string line;
    std::getline(in, line);  // "ply" already matched by caller
    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> vertex_props;
    bool in_vertex_element = false;
    bool before_vertex_data = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") {
                binary = false;
            } else if (fmt == "binary_little_endian") {
                binary = true;
            } else {
                throw IoError(IoError::Kind::Malformed, path + ": unsupported ply format " + fmt);
            }
        } else if (word == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                in_vertex_element = true;
                vertex_count = count;
            } else {
                if (vertex_count == 0 && count > 0 && binary)
                    throw IoError(IoError::Kind::Malformed,
                                  path + ": ply elements before vertex are not supported");
                in_vertex_element = false;
            }
        } else if (word == "property") {
            if (in_vertex_element) {
                PlyProperty prop;
                ls >> prop.type;
                if (prop.type == "list")
                    throw IoError(IoError::Kind::Malformed,
                                  path + ": list properties on vertices are not supported");
                ls >> prop.name;
                vertex_props.push_back(prop);
            }
        } else if (word == "end_header") {
            before_vertex_data = false;
            break;
        }
    }
    if (before_vertex_data) throw IoError(IoError::Kind::Truncated, path + ": missing end_header");
    if (vertex_count == 0) throw IoError(IoError::Kind::Malformed, path + ": no vertices");

    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
        if (vertex_props[i].name == "x") ix = static_cast<int>(i);
        if (vertex_props[i].name == "y") iy = static_cast<int>(i);
        if (vertex_props[i].name == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw IoError(IoError::Kind::Schema, path + ": vertex element lacks x/y/z");

    PointCloud cloud;
    cloud.reserve(vertex_count);
    for (std::size_t v = 0; v < vertex_count; ++v) {
        std::vector<double> values(vertex_props.size());
        if (binary) {
            for (std::size_t i = 0; i < vertex_props.size(); ++i)
                values[i] = ply_read_scalar(in, vertex_props[i].type, path);
        } else {
            if (!std::getline(in, line))
                throw IoError(IoError::Kind::Truncated, path + ": truncated vertex data");
            std::istringstream ls(line);
            for (std::size_t i = 0; i < vertex_props.size(); ++i) {
                if (!(ls >> values[i]))
                    throw IoError(IoError::Kind::Malformed, path + ": malformed vertex line");
            }
        }
        const double x = values[static_cast<std::size_t>(ix)];
        const double y = values[static_cast<std::size_t>(iy)];
        const double z = values[static_cast<std::size_t>(iz)];
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw IoError(IoError::Kind::Malformed, path + ": non-finite vertex");
        cloud.emplace_back(x, y, z);
    }
    return cloud;
}

}  // namespace

PointCloud read_cloud(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::FileAccess, "cannot open: " + path);
    char head[3] = {0, 0, 0};
    in.read(head, 3);
    in.seekg(0);
    if (head[0] == 'p' && head[1] == 'l' && head[2] == 'y') return read_cloud_ply(in, path);
    return read_cloud_text(in, path);
}

void write_cloud(const std::string& path, const PointCloud& cloud) {
    require_cloud(cloud);
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::FileAccess, "cannot open for writing: " + path);
    out << "# defgraph point cloud, " << cloud.size() << " points\n";
    out << std::setprecision(9);
    for (const Point3& p : cloud) {
        out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
            << static_cast<float>(p.z()) << '\n';
    }
    if (!out) throw IoError(IoError::Kind::FileAccess, "write failed: " + path);
}

void write_graph(const std::string& path, const DeformationGraph& graph) {
    const std::size_t node_count = graph.rest_nodes.size();
    if (node_count == 0) throw std::invalid_argument("write_graph: empty graph");
    if (graph.radii.size() != node_count)
        throw std::invalid_argument("write_graph: radii count mismatch");
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::FileAccess, "cannot open for writing: " + path);
    out << std::setprecision(17);
    out << kGraphMagic << ' ' << kGraphVersion << '\n';
    out << "nodes " << node_count << '\n';
    out << "frames " << graph.node_traj.size() << '\n';
    out << "rest\n";
    for (const Point3& p : graph.rest_nodes) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    out << "radii\n";
    for (double r : graph.radii) out << r << '\n';
    for (std::size_t f = 0; f < graph.node_traj.size(); ++f) {
        out << "trajectory " << f << '\n';
        for (const Point3& p : graph.node_traj[f]) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
    for (std::size_t f = 0; f < graph.transforms.size(); ++f) {
        out << "transforms " << f << '\n';
        for (const Se3& t : graph.transforms[f]) {
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) out << t.rotation(r, c) << ' ';
            out << t.translation.x() << ' ' << t.translation.y() << ' ' << t.translation.z()
                << '\n';
        }
    }
    if (!out) throw IoError(IoError::Kind::FileAccess, "write failed: " + path);
}

namespace {

void expect_line_keyword(std::istream& in, const std::string& keyword, const std::string& path) {
    std::string line;
    if (!std::getline(in, line))
        throw IoError(IoError::Kind::Schema, path + ": missing section " + keyword);
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word != keyword)
        throw IoError(IoError::Kind::Schema,
                      path + ": expected section " + keyword + ", found " + word);
}

Point3 parse_point_line(std::istream& in, const std::string& path, const char* what) {
    std::string line;
    if (!std::getline(in, line))
        throw IoError(IoError::Kind::Truncated, path + ": truncated " + what);
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z))
        throw IoError(IoError::Kind::Malformed, path + ": malformed " + what);
    return {x, y, z};
}

}  // namespace

DeformationGraph read_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::FileAccess, "cannot open: " + path);

    std::string line;
    if (!std::getline(in, line)) throw IoError(IoError::Kind::Truncated, path + ": empty file");
    {
        std::istringstream ls(line);
        std::string magic;
        int version = -1;
        ls >> magic >> version;
        if (magic != kGraphMagic) throw IoError(IoError::Kind::BadMagic, path + ": not a graph file");
        if (version != kGraphVersion)
            throw IoError(IoError::Kind::VersionMismatch,
                          path + ": unsupported graph version " + std::to_string(version));
    }

    auto read_sized_header = [&](const char* key) -> std::size_t {
        if (!std::getline(in, line))
            throw IoError(IoError::Kind::Schema, path + ": missing " + std::string(key));
        std::istringstream ls(line);
        std::string word;
        long long value = -1;
        ls >> word >> value;
        if (word != key || value < 0)
            throw IoError(IoError::Kind::Schema, path + ": expected '" + key + " <count>'");
        return static_cast<std::size_t>(value);
    };

    DeformationGraph graph;
    const std::size_t node_count = read_sized_header("nodes");
    const std::size_t frame_count = read_sized_header("frames");
    if (node_count == 0) throw IoError(IoError::Kind::Malformed, path + ": zero nodes");

    expect_line_keyword(in, "rest", path);
    graph.rest_nodes.reserve(node_count);
    for (std::size_t i = 0; i < node_count; ++i)
        graph.rest_nodes.push_back(parse_point_line(in, path, "rest node"));

    expect_line_keyword(in, "radii", path);
    graph.radii.reserve(node_count);
    for (std::size_t i = 0; i < node_count; ++i) {
        if (!std::getline(in, line)) throw IoError(IoError::Kind::Truncated, path + ": truncated radii");
        std::istringstream ls(line);
        double r;
        if (!(ls >> r) || !(r > 0.0))
            throw IoError(IoError::Kind::Malformed, path + ": malformed radius");
        graph.radii.push_back(r);
    }

    graph.node_traj.resize(frame_count);
    for (std::size_t f = 0; f < frame_count; ++f) {
        expect_line_keyword(in, "trajectory", path);
        graph.node_traj[f].reserve(node_count);
        for (std::size_t i = 0; i < node_count; ++i)
            graph.node_traj[f].push_back(parse_point_line(in, path, "trajectory node"));
    }

    graph.transforms.resize(frame_count);
    for (std::size_t f = 0; f < frame_count; ++f) {
        expect_line_keyword(in, "transforms", path);
        graph.transforms[f].resize(node_count);
        for (std::size_t i = 0; i < node_count; ++i) {
            if (!std::getline(in, line))
                throw IoError(IoError::Kind::Truncated, path + ": truncated transforms");
            std::istringstream ls(line);
            Se3 t;
            bool ok = true;
            for (int r = 0; r < 3 && ok; ++r)
                for (int c = 0; c < 3 && ok; ++c) ok = static_cast<bool>(ls >> t.rotation(r, c));
            ok = ok && static_cast<bool>(ls >> t.translation.x() >> t.translation.y() >>
                                         t.translation.z());
            if (!ok) throw IoError(IoError::Kind::Malformed, path + ": malformed transform");
            graph.transforms[f][i] = t;
        }
    }
    return graph;
}

}  // namespace defgraph
