#include "defgraph/matcher.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "defgraph/parallel.hpp"
#include "defgraph/sampling.hpp"
#include "defgraph/transform.hpp"

namespace defgraph {

namespace {

// Raw descriptor channels have wildly different scales and a large common
// component (occupancy is 1 everywhere), so a plain cosine between any two
// points of a cloud sits near 1 and carries no matching signal. The learned
// features this stage replaces are trained to be discriminative; the
// classical equivalent is to standardize every feature dimension over the
// target frame before taking cosines. Rotation-variant dimensions (the raw
// normal direction) are masked out of the similarity.
struct FeatureWhitener {
    std::vector<double> mean;
    std::vector<double> inv_std;
    int fdim = 0;
    int channels = 0;

    FeatureWhitener(const std::vector<double>& features, std::size_t count, int channel_count)
        : fdim(3 * channel_count), channels(channel_count) {
        mean.assign(static_cast<std::size_t>(fdim), 0.0);
        inv_std.assign(static_cast<std::size_t>(fdim), 0.0);
        if (count == 0) return;
        for (std::size_t i = 0; i < count; ++i)
            for (int d = 0; d < fdim; ++d)
                mean[static_cast<std::size_t>(d)] += features[i * static_cast<std::size_t>(fdim) +
                                                              static_cast<std::size_t>(d)];
        for (double& m : mean) m /= static_cast<double>(count);
        std::vector<double> var(static_cast<std::size_t>(fdim), 0.0);
        for (std::size_t i = 0; i < count; ++i)
            for (int d = 0; d < fdim; ++d) {
                const double delta = features[i * static_cast<std::size_t>(fdim) +
                                              static_cast<std::size_t>(d)] -
                                     mean[static_cast<std::size_t>(d)];
                var[static_cast<std::size_t>(d)] += delta * delta;
            }
        for (int d = 0; d < fdim; ++d) {
            const double sd = std::sqrt(var[static_cast<std::size_t>(d)] /
                                        static_cast<double>(count));
            // Channels 2..4 of each plane block hold the normal direction.
            const int channel = d % channels;
            const bool masked = channel >= 2 && channel <= 4;
            inv_std[static_cast<std::size_t>(d)] = (sd > 1e-9 && !masked) ? 1.0 / sd : 0.0;
        }
    }

    void apply(const double* in, double* out) const {
        for (int d = 0; d < fdim; ++d)
            out[d] = (in[d] - mean[static_cast<std::size_t>(d)]) *
                     inv_std[static_cast<std::size_t>(d)];
    }

    // Tiles a descriptor across the three plane blocks, then whitens.
    void apply_descriptor(const Descriptor& desc, double* out) const {
        for (int pl = 0; pl < 3; ++pl)
            for (int c = 0; c < channels; ++c) out[pl * channels + c] = desc[c];
        std::vector<double> tmp(out, out + fdim);
        apply(tmp.data(), out);
    }
};

double cosine(const double* a, const double* b, int n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na < 1e-18 || nb < 1e-18) return 0.0;
    return dot / std::sqrt(na * nb);
}

// Grid features of every target point, sampled once per frame.
std::vector<double> sample_target_features(const PointCloud& target, const TriplaneGrid& grid) {
    const int fdim = 3 * grid.channels();
    std::vector<double> features(target.size() * static_cast<std::size_t>(fdim));
    for (std::size_t i = 0; i < target.size(); ++i)
        grid.sample_into(target[i], &features[i * static_cast<std::size_t>(fdim)]);
    return features;
}

std::vector<double> whiten_all(const std::vector<double>& features, std::size_t count,
                               const FeatureWhitener& whitener) {
    std::vector<double> out(features.size());
    for (std::size_t i = 0; i < count; ++i)
        whitener.apply(&features[i * static_cast<std::size_t>(whitener.fdim)],
                       &out[i * static_cast<std::size_t>(whitener.fdim)]);
    return out;
}

std::vector<double> whiten_descriptors(const std::vector<Descriptor>& descs,
                                       const FeatureWhitener& whitener) {
    std::vector<double> out(descs.size() * static_cast<std::size_t>(whitener.fdim));
    for (std::size_t i = 0; i < descs.size(); ++i)
        whitener.apply_descriptor(descs[i], &out[i * static_cast<std::size_t>(whitener.fdim)]);
    return out;
}

struct ScoredCandidate {
    double sim;
    int index;
};

// Frame-wise rigid pre-alignment: the classical stand-in for the global
// attention that lets a learned matcher jump large motions. Deterministic
// rotation seeds (plus a correspondence fit) are polished by trimmed
// rigid ICP and scored by geometric verification: how well the transformed
// nodes land on target geometry that also looks like them. The identity
// competes on equal footing, which protects partial views from
// fold-consensus fits; non-rigid scenes lose nothing because the winner
// only has to shrink the basin for the per-node update loop.
class PreAligner {
public:
    PreAligner(const PointCloud& rest_nodes, const PointCloud& target,
               const GridIndex& target_index, const std::vector<double>& node_features,
               const std::vector<double>& target_features, int fdim)
        : nodes_(&rest_nodes),
          target_(&target),
          index_(&target_index),
          node_features_(&node_features),
          target_features_(&target_features),
          fdim_(fdim) {
        // Hypothesis search probes a bounded subset of nodes so the cost
        // does not scale with the graph size.
        const int probe_count = std::min<int>(128, static_cast<int>(rest_nodes.size()));
        probes_ = rest_nodes.size() > 16
                      ? farthest_point_sample(rest_nodes, probe_count, 0)
                      : [&] {
                            std::vector<int> all(rest_nodes.size());
                            for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
                            return all;
                        }();
        Point3 node_centroid = Point3::Zero(), target_centroid = Point3::Zero();
        for (const Point3& p : rest_nodes) node_centroid += p;
        node_centroid /= static_cast<double>(rest_nodes.size());
        for (const Point3& p : target) target_centroid += p;
        target_centroid /= static_cast<double>(target.size());
        node_centroid_ = node_centroid;
        target_centroid_ = target_centroid;
    }

    Se3 run(const std::vector<std::vector<ScoredCandidate>>& cands) const {
        // Stage one: short polish on every seed, cheap verification.
        std::vector<Se3> seeds;
        seeds.push_back(Se3::identity());
        if (const auto corr_fit = correspondence_fit(cands)) seeds.push_back(*corr_fit);
        for (const Se3& seed : rotation_seeds()) seeds.push_back(seed);

        std::vector<std::pair<double, std::size_t>> ranked;
        std::vector<Se3> coarse(seeds.size());
        for (std::size_t h = 0; h < seeds.size(); ++h) {
            coarse[h] = polish(seeds[h], 4);
            ranked.emplace_back(-verify(coarse[h]), h);
        }
        std::sort(ranked.begin(), ranked.end());

        // Stage two: full polish of the leaders; raw identity competes so a
        // static scene never gets dragged into a wrong consensus.
        std::vector<Se3> finalists{Se3::identity()};
        for (std::size_t r = 0; r < std::min<std::size_t>(5, ranked.size()); ++r)
            finalists.push_back(polish(coarse[ranked[r].second], 8));

        double best_score = -1.0;
        Se3 best = Se3::identity();
        for (std::size_t h = 0; h < finalists.size(); ++h) {
            const double score = verify(finalists[h]);
            if ((h == 0 && score > best_score) || score > best_score * 1.02) {
                best_score = score;
                best = finalists[h];
            }
        }
        return best;
    }

private:
    std::vector<Se3> rotation_seeds() const {
        static const double kAxes[13][3] = {
            {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1},
            {0, 1, 1}, {0, 1, -1}, {1, 1, 1}, {1, -1, 1}, {1, 1, -1}, {1, -1, -1}};
        std::vector<Se3> seeds;
        seeds.reserve(78);
        for (const auto& a : kAxes) {
            const Point3 axis = Point3(a[0], a[1], a[2]).normalized();
            for (double angle : {M_PI / 9.0, -M_PI / 9.0, 2.0 * M_PI / 9.0, -2.0 * M_PI / 9.0,
                                 M_PI / 3.0, -M_PI / 3.0}) {
                Se3 t;
                t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
                t.translation = target_centroid_ - t.rotation * node_centroid_;
                seeds.push_back(t);
            }
        }
        return seeds;
    }

    std::optional<Se3> correspondence_fit(
        const std::vector<std::vector<ScoredCandidate>>& cands) const {
        PointCloud src, dst;
        std::vector<double> weights;
        for (std::size_t p = 0; p < nodes_->size(); ++p) {
            for (std::size_t j = 0; j < std::min<std::size_t>(2, cands[p].size()); ++j) {
                const double sim = cands[p][j].sim;
                if (sim < 0.2) break;
                src.push_back((*nodes_)[p]);
                dst.push_back((*target_)[static_cast<std::size_t>(cands[p][j].index)]);
                weights.push_back(sim * sim * sim);
            }
        }
        if (src.size() < 8) return std::nullopt;
        try {
            return procrustes(src, dst, &weights);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

    // Annealed soft rigid ICP over the probe nodes. Gaussian soft
    // correspondences smooth away the local minima that defeat hard
    // nearest-neighbor ICP on bumpy partial views; occluded probes carry
    // vanishing support mass and drop out of the fit on their own.
    Se3 polish(Se3 t, int iterations = 10) const {
        const double sigma_hi = 0.15, sigma_lo = 0.02;
        const int k = std::min<int>(8, static_cast<int>(target_->size()));
        for (int it = 0; it < iterations; ++it) {
            const double f = iterations > 1 ? static_cast<double>(it) / (iterations - 1) : 1.0;
            const double sigma = sigma_hi * std::pow(sigma_lo / sigma_hi, f);
            const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
            PointCloud src, dst;
            std::vector<double> weights;
            for (int p : probes_) {
                const Point3& n = (*nodes_)[static_cast<std::size_t>(p)];
                const Point3 moved = t.apply(n);
                Point3 acc = Point3::Zero();
                double support = 0.0;
                for (int j : (*index_).knn(moved, k)) {
                    const Point3& q = (*target_)[static_cast<std::size_t>(j)];
                    const double w = std::exp(-(q - moved).squaredNorm() * inv_two_sigma2);
                    acc += w * q;
                    support += w;
                }
                if (support < 1e-9) continue;
                src.push_back(n);
                dst.push_back(acc / support);
                weights.push_back(std::min(support, 1.0));
            }
            if (src.size() < 4) return t;
            try {
                t = procrustes(src, dst, &weights);
            } catch (const std::exception&) {
                return t;
            }
        }
        return t;
    }

    double verify(const Se3& t) const {
        const double sigma_v = 0.03;
        double score = 0.0;
        for (int p : probes_) {
            const Point3 moved = t.apply((*nodes_)[static_cast<std::size_t>(p)]);
            const int nn = (*index_).knn(moved, 1)[0];
            const double d2 = (moved - (*target_)[static_cast<std::size_t>(nn)]).squaredNorm();
            const double sim = std::max(
                0.0,
                cosine(&(*node_features_)[static_cast<std::size_t>(p) *
                                          static_cast<std::size_t>(fdim_)],
                       &(*target_features_)[static_cast<std::size_t>(nn) *
                                            static_cast<std::size_t>(fdim_)],
                       fdim_));
            score += std::exp(-d2 / (2.0 * sigma_v * sigma_v)) * sim;
        }
        return score;
    }

    const PointCloud* nodes_;
    const PointCloud* target_;
    const GridIndex* index_;
    const std::vector<double>* node_features_;
    const std::vector<double>* target_features_;
    int fdim_;
    std::vector<int> probes_;
    Point3 node_centroid_;
    Point3 target_centroid_;
};

// Best-correlating target indices per node, descending similarity.
std::vector<std::vector<ScoredCandidate>> global_candidates(
    const std::vector<double>& node_features, std::size_t node_count,
    const std::vector<double>& target_features, std::size_t target_count, int fdim, int top,
    int threads) {
    std::vector<std::vector<ScoredCandidate>> out(node_count);
    if (top <= 0) return out;
    parallel_for(node_count, [&](std::size_t p) {
        std::vector<std::pair<double, int>> scored;
        scored.reserve(target_count);
        for (std::size_t t = 0; t < target_count; ++t) {
            const double sim = cosine(&node_features[p * static_cast<std::size_t>(fdim)],
                                      &target_features[t * static_cast<std::size_t>(fdim)], fdim);
            scored.emplace_back(-sim, static_cast<int>(t));
        }
        const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(top), scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(keep), scored.end());
        out[p].reserve(keep);
        for (std::size_t j = 0; j < keep; ++j)
            out[p].push_back(ScoredCandidate{-scored[j].first, scored[j].second});
    }, threads);
    return out;
}

}  // namespace

PointCloud match_frame(const PointCloud& rest_nodes, const std::vector<Descriptor>& rest_desc,
                       const PointCloud& target, const TriplaneGrid& target_grid,
                       const MatchOptions& options, std::vector<double>* confidence_out) {
    require_cloud(rest_nodes, "rest nodes");
    if (target.empty()) throw std::invalid_argument("match_frame: empty target frame");
    if (rest_desc.size() != rest_nodes.size())
        throw std::invalid_argument("match_frame: descriptor count must match node count");
    if (options.iterations < 1) throw std::invalid_argument("match_frame: iterations must be >= 1");

    const std::size_t node_count = rest_nodes.size();
    const int rounds = options.iterations;
    const DescriptorField target_field(target, options.descriptor_params);
    const GridIndex& target_index = target_field.index();
    const int k_local = std::min<int>(options.k_neighbors, static_cast<int>(target.size()));
    const int channels = target_grid.channels();
    const int fdim = 3 * channels;

    const std::vector<double> raw_target_features = sample_target_features(target, target_grid);
    const FeatureWhitener whitener(raw_target_features, target.size(), channels);
    const std::vector<double> target_features =
        whiten_all(raw_target_features, target.size(), whitener);
    std::vector<Descriptor> node_desc = rest_desc;
    std::vector<double> node_features = whiten_descriptors(node_desc, whitener);
    std::vector<std::vector<ScoredCandidate>> far_candidates =
        global_candidates(node_features, node_count, target_features, target.size(), fdim,
                          std::max(options.global_candidates, options.pre_align ? 2 : 0),
                          options.threads);

    // 4-NN rest graph for the smoothing step.
    const int k_smooth = std::min<int>(options.smoothing_neighbors,
                                       static_cast<int>(node_count) - 1);
    std::vector<std::vector<int>> smooth_nbrs(node_count);
    if (k_smooth > 0) {
        const GridIndex rest_index(rest_nodes);
        for (std::size_t p = 0; p < node_count; ++p) {
            std::vector<int> nn = rest_index.knn(rest_nodes[p], k_smooth + 1);
            for (int j : nn)
                if (j != static_cast<int>(p) &&
                    smooth_nbrs[p].size() < static_cast<std::size_t>(k_smooth))
                    smooth_nbrs[p].push_back(j);
        }
    }

    PointCloud pos = rest_nodes;
    if (options.pre_align) {
        const PreAligner aligner(rest_nodes, target, target_index, node_features,
                                 target_features, fdim);
        const Se3 fit = aligner.run(far_candidates);
        for (Point3& v : pos) v = fit.apply(v);
    }
    PointCloud stepped(node_count);
    std::vector<double> worst_confidence(node_count, 1.0);
    std::vector<double> round_confidence(node_count, 1.0);
    for (int m = 0; m < rounds; ++m) {
        const double t = rounds > 1 ? static_cast<double>(m) / (rounds - 1) : 0.0;
        const double sigma = options.sigma_start *
                             std::pow(options.sigma_end / options.sigma_start, t);
        const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
        const double gate2 = options.gate_sigmas * options.gate_sigmas * sigma * sigma;

        parallel_for(node_count, [&](std::size_t p) {
            const Point3& v = pos[p];
            std::vector<int> candidates = target_index.knn(v, k_local);
            for (std::size_t g = 0;
                 g < std::min<std::size_t>(far_candidates[p].size(),
                                           static_cast<std::size_t>(options.global_candidates));
                 ++g) {
                const int idx = far_candidates[p][g].index;
                if (std::find(candidates.begin(), candidates.end(), idx) == candidates.end())
                    candidates.push_back(idx);
            }

            Point3 weighted = Point3::Zero(), geometric = Point3::Zero();
            double weighted_sum = 0.0, geometric_sum = 0.0, best_gauss = 0.0;
            for (int j : candidates) {
                const Point3& q = target[static_cast<std::size_t>(j)];
                const double d2 = (q - v).squaredNorm();
                if (d2 > gate2) continue;
                const double gauss = std::exp(-d2 * inv_two_sigma2);
                const double sim = std::max(
                    0.0, cosine(&node_features[p * static_cast<std::size_t>(fdim)],
                                &target_features[static_cast<std::size_t>(j) *
                                                 static_cast<std::size_t>(fdim)],
                                fdim));
                weighted += gauss * sim * q;
                weighted_sum += gauss * sim;
                geometric += gauss * q;
                geometric_sum += gauss;
                best_gauss = std::max(best_gauss, gauss);
            }

            Point3 closest;
            bool have_target = true;
            if (weighted_sum > 1e-12) {
                closest = weighted / weighted_sum;
            } else if (geometric_sum > 1e-12) {
                // Descriptors vetoed everything nearby: pure geometric pull.
                closest = geometric / geometric_sum;
            } else {
                // Nothing within the gate: no evidence, hold position.
                have_target = false;
            }
            // Trust the step only as far as geometry exists at the current
            // attention scale; occluded nodes barely move and are carried
            // by the smoothing term instead.
            const double confidence = std::min(1.0, best_gauss * best_gauss);
            round_confidence[p] = have_target ? confidence : 0.0;
            stepped[p] =
                have_target ? Point3(v + options.step * confidence * (closest - v)) : v;
        }, options.threads);
        for (std::size_t p = 0; p < node_count; ++p)
            worst_confidence[p] = std::min(worst_confidence[p], round_confidence[p]);

        if (options.smoothing > 0.0 && k_smooth > 0) {
            parallel_for(node_count, [&](std::size_t p) {
                Point3 mean_disp = Point3::Zero();
                for (int j : smooth_nbrs[p])
                    mean_disp += stepped[static_cast<std::size_t>(j)] -
                                 rest_nodes[static_cast<std::size_t>(j)];
                mean_disp /= static_cast<double>(smooth_nbrs[p].size());
                const Point3 own_disp = stepped[p] - rest_nodes[p];
                // Low-support nodes lean harder on their neighborhood.
                const double beta = options.smoothing +
                                    (1.0 - round_confidence[p]) *
                                        std::max(0.0, 0.7 - options.smoothing);
                pos[p] = stepped[p] + beta * (mean_disp - own_disp);
            }, options.threads);
        } else {
            pos = stepped;
        }

        // Halfway through, re-estimate node descriptors from the target
        // around the current positions and refresh the global candidates.
        if (rounds >= 2 && m + 1 == rounds / 2) {
            for (std::size_t p = 0; p < node_count; ++p)
                node_desc[p] = target_field.at(pos[p]);
            node_features = whiten_descriptors(node_desc, whitener);
            far_candidates =
                global_candidates(node_features, node_count, target_features, target.size(),
                                  fdim, options.global_candidates, options.threads);
        }
    }
    if (confidence_out) *confidence_out = std::move(worst_confidence);
    return pos;
}

std::vector<PointCloud> match_sequence(const PointCloud& rest_nodes,
                                       const std::vector<Descriptor>& rest_desc,
                                       const PointCloudSeq& seq,
                                       const std::vector<TriplaneGrid>& grids,
                                       const MatchOptions& options,
                                       std::vector<std::vector<double>>* confidence_out) {
    require_seq(seq);
    if (grids.size() != seq.size())
        throw std::invalid_argument("match_sequence: need one grid per frame");

    std::vector<PointCloud> out(seq.size());
    if (confidence_out) confidence_out->assign(seq.size(), {});
    for (std::size_t f = 0; f < seq.size(); ++f) {
        try {
            out[f] = match_frame(rest_nodes, rest_desc, seq[f], grids[f], options,
                                 confidence_out ? &(*confidence_out)[f] : nullptr);
        } catch (const std::exception& e) {
            throw std::runtime_error("match_sequence: frame " + std::to_string(f) + ": " +
                                     e.what());
        }
    }
    return out;
}

}  // namespace defgraph
