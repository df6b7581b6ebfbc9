#pragma once

#include <optional>
#include <span>
#include <vector>

#include "latflow/latent_grid.hpp"
#include "latflow/mlp.hpp"

namespace latflow {

struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;  // optional; unit length when present

    std::size_t size() const { return positions.size(); }
    bool has_normals() const { return !normals.empty(); }
    void validate() const;
};

/// Exact k-nearest-neighbour queries over a fixed point set. Ties in
/// distance break toward the lower point index, so results are fully
/// deterministic and match a brute-force scan bit for bit.
class KdTree {
public:
    explicit KdTree(std::span<const Vec3> points);

    /// k nearest neighbours of `query`, sorted by (distance, index).
    /// `exclude` skips one index (used for self-exclusion).
    std::vector<int> nearest(const Vec3& query, int k, int exclude = -1) const;
    int nearest_one(const Vec3& query) const;

private:
    struct Node {
        int axis = -1;
        int point = -1;
        int left = -1, right = -1;
    };
    std::vector<Vec3> pts_;
    std::vector<Node> nodes_;
    int root_ = -1;
    int build(std::vector<int>& idx, int lo, int hi);
    struct Candidate {
        double d2;
        int idx;
        bool operator<(const Candidate& o) const {
            return d2 < o.d2 || (d2 == o.d2 && idx < o.idx);
        }
    };
    void search(int node, const Vec3& q, int k, int exclude,
                std::vector<Candidate>& heap) const;
};

struct KnnGraph {
    int k = 0;
    std::vector<std::vector<int>> neighbors;  // per point, sorted by (distance, index)
};

/// Exact Euclidean k-NN graph (self excluded) via the kd-tree.
KnnGraph knn_graph(const PointCloud& pc, int k);

/// Per-point local-frame estimates from the k-neighbourhood covariance.
/// `ok[i]` is false where the neighbourhood is rank-deficient (no plane fits).
struct NormalEstimate {
    std::vector<Vec3> normals;
    std::vector<bool> ok;
};
NormalEstimate estimate_normals(const PointCloud& pc, int k);

struct CurvatureEstimate {
    std::vector<double> kappa;
    std::vector<bool> ok;
};
/// Surface-variation proxy: lambda_min / (l0+l1+l2) of the neighbourhood
/// covariance, rescaled by the inverse neighbourhood radius so it carries
/// 1/length units.
CurvatureEstimate estimate_curvature(const PointCloud& pc, int k);

/// Distance to the nearest surface point, signed by the normal there.
/// Exactly zero when the query coincides with a surface point.
double signed_distance(const Vec3& query, const PointCloud& pc, const KdTree& tree);
double signed_distance(const Vec3& query, const PointCloud& pc);

/// Per-point feature block [x(3), n(3), sdf(1), kappa(1), reserved(1)].
inline constexpr int kEmbedWidth = 9;
struct GeomEmbedding {
    std::vector<double> features;  // N x 9, row-major
    std::vector<bool> ok;
    std::size_t size() const { return ok.size(); }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * kEmbedWidth, kEmbedWidth};
    }
};
GeomEmbedding embed(const PointCloud& pc, int k);

/// One graph message-passing layer:
/// h'(x_i) = tanh(W h(x_i) + mean_j kernel(x_i - x_j) .* h(x_j)).
struct MessagePassingLayer {
    std::vector<double> self_weight;  // C x C, row-major
    Mlp kernel;                       // 3 -> hidden -> C
    int channels = 0;

    static MessagePassingLayer init(int channels, int hidden, Rng& rng, double scale = 0.5);
};

std::vector<double> message_pass(const KnnGraph& graph, const PointCloud& pc,
                                 const std::vector<double>& features,
                                 const MessagePassingLayer& layer);

/// Inverse-distance projection of point features onto grid anchors.
/// Weights w(d) = 1/(d + weight_floor) are normalized to a partition of
/// unity per anchor; the payload is kernel(anchor - x_j) .* h_j. Exactly
/// coincident source points are collapsed to their first occurrence, so the
/// projection depends only on the geometric envelope, never on sampling
/// multiplicity.
struct NWProjector {
    int anchor_k = 8;            // nearest distinct source positions per anchor
    double weight_floor = 1e-6;  // epsilon in w(d) = 1/(d + eps)
    Mlp kernel;                  // 3 -> hidden -> C
    std::vector<double> ln_gain;  // per-channel affine of the layer norm
    std::vector<double> ln_bias;
    bool use_layer_norm = true;
    double ln_eps = 1e-5;
    int channels = 0;

    static NWProjector init(int channels, int hidden, Rng& rng, double scale = 0.5);
};

/// Deduplicated view of a source set: one representative (lowest original
/// index) per distinct position.
struct SourceSet {
    std::vector<Vec3> positions;
    std::vector<int> representative;
};
SourceSet dedup_sources(std::span<const Vec3> points);

/// Evaluate the projector payload at one anchor location (pre layer norm
/// when `normalized` is false).
std::vector<double> nw_eval(const NWProjector& proj, const SourceSet& src,
                            const KdTree& tree, std::span<const Vec3> points,
                            const std::vector<double>& features, const Vec3& anchor,
                            bool normalized = true);

/// Normalized anchor weights (diagnostic; sums to 1 within 1e-12).
std::vector<std::pair<int, double>> nw_weights(const NWProjector& proj,
                                               const SourceSet& src, const KdTree& tree,
                                               const Vec3& anchor);

/// Project features of `points` (latent coordinates) onto every node of a
/// fresh grid shaped like `shape`.
LatentGrid nw_project(const NWProjector& proj, std::span<const Vec3> points,
                      const std::vector<double>& features, const LatentGrid& shape);

/// Empirical Lipschitz bound of the projection field over probe pairs;
/// coincident pairs are skipped.
double lipschitz_estimate(const NWProjector& proj, std::span<const Vec3> points,
                          const std::vector<double>& features,
                          std::span<const std::pair<Vec3, Vec3>> probe_pairs);

}  // namespace latflow
