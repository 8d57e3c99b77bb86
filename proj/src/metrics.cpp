#include "defgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace defgraph {

namespace {

void check_shapes(const PointCloudSeq& pred, const PointCloudSeq& gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("metrics: frame counts differ");
    if (pred.empty()) throw std::invalid_argument("metrics: empty sequences");
    for (std::size_t f = 0; f < pred.size(); ++f) {
        if (pred[f].size() != gt[f].size())
            throw std::invalid_argument("metrics: point counts differ at frame " +
                                        std::to_string(f));
        if (pred[f].empty())
            throw std::invalid_argument("metrics: empty frame " + std::to_string(f));
    }
}

}  // namespace

std::vector<double> per_frame_ate(const PointCloudSeq& pred, const PointCloudSeq& gt) {
    check_shapes(pred, gt);
    std::vector<double> out(pred.size());
    for (std::size_t f = 0; f < pred.size(); ++f) {
        double sum = 0.0;
        for (std::size_t i = 0; i < pred[f].size(); ++i)
            sum += (pred[f][i] - gt[f][i]).cwiseAbs().sum();
        out[f] = sum / static_cast<double>(pred[f].size());
    }
    return out;
}

double ate3d(const PointCloudSeq& pred, const PointCloudSeq& gt) {
    check_shapes(pred, gt);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        for (std::size_t i = 0; i < pred[f].size(); ++i) sum += (pred[f][i] - gt[f][i]).cwiseAbs().sum();
        count += pred[f].size();
    }
    return sum / static_cast<double>(count);
}

double delta_inlier(const PointCloudSeq& pred, const PointCloudSeq& gt, double threshold) {
    check_shapes(pred, gt);
    if (!(threshold > 0.0)) throw std::invalid_argument("delta_inlier: threshold must be positive");
    std::size_t inliers = 0, count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        for (std::size_t i = 0; i < pred[f].size(); ++i) {
            if ((pred[f][i] - gt[f][i]).norm() < threshold) ++inliers;
        }
        count += pred[f].size();
    }
    return static_cast<double>(inliers) / static_cast<double>(count);
}

MetricsReport evaluate(const PointCloudSeq& pred, const PointCloudSeq& gt,
                       const std::vector<double>& per_frame_seconds) {
    MetricsReport report;
    report.per_frame_ate = per_frame_ate(pred, gt);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        sum += report.per_frame_ate[f] * static_cast<double>(pred[f].size());
        count += pred[f].size();
    }
    report.ate3d = sum / static_cast<double>(count);
    report.delta_001 = delta_inlier(pred, gt, 0.01);
    report.delta_005 = delta_inlier(pred, gt, 0.05);
    if (!per_frame_seconds.empty()) {
        double t = 0.0;
        for (double s : per_frame_seconds) t += s;
        report.t_avg = t / static_cast<double>(per_frame_seconds.size());
    }
    return report;
}

namespace {

std::vector<std::pair<std::string, MetricsReport>> sorted_by_ate(
    std::vector<std::pair<std::string, MetricsReport>> reports) {
    std::stable_sort(reports.begin(), reports.end(),
                     [](const auto& a, const auto& b) { return a.second.ate3d < b.second.ate3d; });
    return reports;
}

}  // namespace

std::string comparison_table(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
    if (reports.empty()) throw std::invalid_argument("comparison_table: no reports");
    const auto sorted = sorted_by_ate(reports);
    std::size_t name_width = 6;
    for (const auto& [name, r] : sorted) name_width = std::max(name_width, name.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_width) + 2) << "method" << std::right
       << std::setw(10) << "ATE_3D v" << std::setw(12) << "d_0.01 ^" << std::setw(12)
       << "d_0.05 ^" << std::setw(12) << "T_avg v" << '\n';
    for (const auto& [name, r] : sorted) {
        os << std::left << std::setw(static_cast<int>(name_width) + 2) << name << std::right
           << std::fixed << std::setprecision(4) << std::setw(10) << r.ate3d << std::setw(12)
           << r.delta_001 << std::setw(12) << r.delta_005 << std::setw(12) << r.t_avg << '\n';
    }
    return os.str();
}

std::string comparison_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
    if (reports.empty()) throw std::invalid_argument("comparison_csv: no reports");
    const auto sorted = sorted_by_ate(reports);
    std::ostringstream os;
    os << "method,ate3d,delta_001,delta_005,t_avg\n";
    os << std::setprecision(17);
    for (const auto& [name, r] : sorted)
        os << name << ',' << r.ate3d << ',' << r.delta_001 << ',' << r.delta_005 << ',' << r.t_avg
           << '\n';
    return os.str();
}

std::vector<std::pair<std::string, MetricsReport>> parse_comparison_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "method,ate3d,delta_001,delta_005,t_avg")
        throw IoError(IoError::Kind::Schema, "comparison csv: bad header");
    std::vector<std::pair<std::string, MetricsReport>> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string name, field;
        if (!std::getline(ls, name, ',')) throw IoError(IoError::Kind::Malformed, "comparison csv: bad row");
        MetricsReport r;
        double* slots[4] = {&r.ate3d, &r.delta_001, &r.delta_005, &r.t_avg};
        for (double* slot : slots) {
            if (!std::getline(ls, field, ','))
                throw IoError(IoError::Kind::Malformed, "comparison csv: missing field");
            *slot = std::stod(field);
        }
        out.emplace_back(name, r);
    }
    return out;
}

void write_metrics(const std::string& path, const MetricsReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError(IoError::Kind::FileAccess, "cannot open for writing: " + path);
    os << std::setprecision(17);
    os << "ate3d " << report.ate3d << '\n';
    os << "delta_001 " << report.delta_001 << '\n';
    os << "delta_005 " << report.delta_005 << '\n';
    os << "t_avg " << report.t_avg << '\n';
    os << "per_frame_ate";
    for (double v : report.per_frame_ate) os << ' ' << v;
    os << '\n';
    if (!os) throw IoError(IoError::Kind::FileAccess, "write failed: " + path);
}

MetricsReport read_metrics(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(IoError::Kind::FileAccess, "cannot open: " + path);
    MetricsReport report;
    bool seen[4] = {false, false, false, false};
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "ate3d") {
            ls >> report.ate3d;
            seen[0] = true;
        } else if (key == "delta_001") {
            ls >> report.delta_001;
            seen[1] = true;
        } else if (key == "delta_005") {
            ls >> report.delta_005;
            seen[2] = true;
        } else if (key == "t_avg") {
            ls >> report.t_avg;
            seen[3] = true;
        } else if (key == "per_frame_ate") {
            double v;
            while (ls >> v) report.per_frame_ate.push_back(v);
        } else {
            throw IoError(IoError::Kind::Schema, "metrics file: unknown key '" + key + "'");
        }
        if (ls.fail() && !ls.eof())
            throw IoError(IoError::Kind::Malformed, "metrics file: bad value for " + key);
    }
    for (bool s : seen) {
        if (!s) throw IoError(IoError::Kind::Schema, "metrics file: missing field in " + path);
    }
    return report;
}

}  // namespace defgraph
