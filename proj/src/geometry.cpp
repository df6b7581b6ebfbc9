#include "latflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace latflow {

void PointCloud::validate() const {
    require(!positions.empty(), "PointCloud: empty");
    for (const Vec3& p : positions) require(finite(p), "PointCloud: non-finite position");
    if (!normals.empty()) {
        require(normals.size() == positions.size(), "PointCloud: normal count mismatch");
        for (const Vec3& n : normals)
            require(std::abs(norm(n) - 1.0) <= 1e-6, "PointCloud: normals must be unit");
    }
}

// ---------------------------------------------------------------------------
// kd-tree
// ---------------------------------------------------------------------------

KdTree::KdTree(std::span<const Vec3> points) : pts_(points.begin(), points.end()) {
    require(!pts_.empty(), "KdTree: empty point set");
    std::vector<int> idx(pts_.size());
    std::iota(idx.begin(), idx.end(), 0);
    nodes_.reserve(pts_.size());
    root_ = build(idx, 0, int(idx.size()));
}

int KdTree::build(std::vector<int>& idx, int lo, int hi) {
    if (lo >= hi) return -1;
    // Split on the widest axis of the subset's bounding box.
    Vec3 mn = pts_[idx[lo]], mx = pts_[idx[lo]];
    for (int q = lo; q < hi; ++q)
        for (int a = 0; a < 3; ++a) {
            mn[a] = std::min(mn[a], pts_[idx[q]][a]);
            mx[a] = std::max(mx[a], pts_[idx[q]][a]);
        }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (mx[a] - mn[a] > mx[axis] - mn[axis]) axis = a;
    const int mid = (lo + hi) / 2;
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                     [&](int a, int b) {
                         return pts_[a][axis] < pts_[b][axis] ||
                                (pts_[a][axis] == pts_[b][axis] && a < b);
                     });
    Node node;
    node.axis = axis;
    node.point = idx[mid];
    const int self = int(nodes_.size());
    nodes_.push_back(node);
    const int left = build(idx, lo, mid);
    const int right = build(idx, mid + 1, hi);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

void KdTree::search(int node, const Vec3& q, int k, int exclude,
                    std::vector<Candidate>& heap) const {
    if (node < 0) return;
    const Node& nd = nodes_[node];
    const Vec3& p = pts_[nd.point];
    if (nd.point != exclude) {
        const Candidate cand{norm2(q - p), nd.point};
        if (int(heap.size()) < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end());
        }
    }
    const double delta = q[nd.axis] - p[nd.axis];
    const int near = delta < 0 ? nd.left : nd.right;
    const int far = delta < 0 ? nd.right : nd.left;
    search(near, q, k, exclude, heap);
    // The far side can still hold a tie that wins on index, so descend on <=.
    if (int(heap.size()) < k || delta * delta <= heap.front().d2)
        search(far, q, k, exclude, heap);
}

std::vector<int> KdTree::nearest(const Vec3& query, int k, int exclude) const {
    require(k >= 1, "KdTree::nearest: k must be >= 1");
    std::vector<Candidate> heap;
    heap.reserve(k + 1);
    search(root_, query, k, exclude, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<int> out;
    out.reserve(heap.size());
    for (const Candidate& c : heap) out.push_back(c.idx);
    return out;
}

int KdTree::nearest_one(const Vec3& query) const { return nearest(query, 1)[0]; }

KnnGraph knn_graph(const PointCloud& pc, int k) {
    pc.validate();
    const int n = int(pc.size());
    require(k >= 1 && k < n, "knn_graph: need 1 <= k < N");
    KdTree tree(pc.positions);
    KnnGraph g;
    g.k = k;
    g.neighbors.resize(n);
    // Deterministic regardless of thread count: each row is independent.
    parallel_for(n, [&](std::int64_t i) {
        g.neighbors[i] = tree.nearest(pc.positions[i], k, int(i));
    });
    return g;
}

// ---------------------------------------------------------------------------
// local differential frames
// ---------------------------------------------------------------------------

namespace {

/// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix.
/// Eigenvalues ascend; eigenvectors are the matching columns.
void eig_sym3(const double m[3][3], double eval[3], double evec[3][3]) {
    double a[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a[i][j] = m[i][j];
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
        if (off < 1e-15 * (std::abs(a[0][0]) + std::abs(a[1][1]) + std::abs(a[2][2]) + 1e-300))
            break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int r = 0; r < 3; ++r) {
                    const double arp = a[r][p], arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for (int r = 0; r < 3; ++r) {
                    const double apr = a[p][r], aqr = a[q][r];
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for (int r = 0; r < 3; ++r) {
                    const double vrp = v[r][p], vrq = v[r][q];
                    v[r][p] = c * vrp - s * vrq;
                    v[r][q] = s * vrp + c * vrq;
                }
            }
    }
    int order[3] = {0, 1, 2};
    double d[3] = {a[0][0], a[1][1], a[2][2]};
    std::sort(order, order + 3, [&](int x, int y) { return d[x] < d[y]; });
    for (int i = 0; i < 3; ++i) {
        eval[i] = d[order[i]];
        for (int r = 0; r < 3; ++r) evec[r][i] = v[r][order[i]];
    }
}

struct LocalFrame {
    Vec3 normal;
    double eval[3];  // ascending covariance eigenvalues
    double radius;   // farthest neighbour distance
    bool ok;
};

LocalFrame local_frame(const PointCloud& pc, const KdTree& tree, int i, int k) {
    const std::vector<int> nb = tree.nearest(pc.positions[i], k, i);
    Vec3 mean = pc.positions[i];
    for (int j : nb) mean += pc.positions[j];
    mean = mean / double(nb.size() + 1);
    double cov[3][3] = {};
    double radius = 0.0;
    auto accumulate = [&](const Vec3& p) {
        const Vec3 d = p - mean;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
    };
    accumulate(pc.positions[i]);
    for (int j : nb) {
        accumulate(pc.positions[j]);
        radius = std::max(radius, norm(pc.positions[j] - pc.positions[i]));
    }
    const double inv = 1.0 / double(nb.size() + 1);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov[r][c] *= inv;

    LocalFrame f;
    double evec[3][3];
    eig_sym3(cov, f.eval, evec);
    f.radius = radius;
    const double trace = f.eval[0] + f.eval[1] + f.eval[2];
    // Rank < 2: the mid eigenvalue vanishes, so no tangent plane exists.
    f.ok = trace > 0.0 && f.eval[1] > 1e-12 * trace;
    f.normal = {evec[0][0], evec[1][0], evec[2][0]};
    const double len = norm(f.normal);
    if (len > 0) f.normal = f.normal / len;
    return f;
}

Vec3 orient_away(const Vec3& n, const Vec3& point, const Vec3& centroid, double scale) {
    const double d = dot(n, point - centroid);
    if (std::abs(d) > 1e-9 * std::max(scale, 1e-300)) return d < 0 ? n * -1.0 : n;
    // Ambiguous (point sits on the centroid plane): canonical sign instead.
    int major = 0;
    for (int a = 1; a < 3; ++a)
        if (std::abs(n[a]) > std::abs(n[major])) major = a;
    return n[major] < 0 ? n * -1.0 : n;
}

}  // namespace

NormalEstimate estimate_normals(const PointCloud& pc, int k) {
    pc.validate();
    const int n = int(pc.size());
    require(k >= 3 && k < n, "estimate_normals: need 3 <= k < N");
    KdTree tree(pc.positions);
    Vec3 centroid{};
    for (const Vec3& p : pc.positions) centroid += p;
    centroid = centroid / double(n);

    NormalEstimate est;
    est.normals.resize(n);
    est.ok.assign(n, true);
    std::vector<std::uint8_t> okbuf(n, 1);
    parallel_for(n, [&](std::int64_t i) {
        const LocalFrame f = local_frame(pc, tree, int(i), k);
        okbuf[i] = f.ok ? 1 : 0;
        est.normals[i] =
            f.ok ? orient_away(f.normal, pc.positions[i], centroid, f.radius) : Vec3{0, 0, 0};
    });
    for (int i = 0; i < n; ++i) est.ok[i] = okbuf[i] != 0;
    return est;
}

CurvatureEstimate estimate_curvature(const PointCloud& pc, int k) {
    pc.validate();
    const int n = int(pc.size());
    require(k >= 3 && k < n, "estimate_curvature: need 3 <= k < N");
    KdTree tree(pc.positions);
    CurvatureEstimate est;
    est.kappa.assign(n, 0.0);
    est.ok.assign(n, true);
    std::vector<std::uint8_t> okbuf(n, 1);
    parallel_for(n, [&](std::int64_t i) {
        const LocalFrame f = local_frame(pc, tree, int(i), k);
        okbuf[i] = f.ok ? 1 : 0;
        if (f.ok) {
            const double trace = f.eval[0] + f.eval[1] + f.eval[2];
            const double variation = std::max(f.eval[0], 0.0) / trace;
            est.kappa[i] = variation / std::max(f.radius, 1e-300);
        }
    });
    for (int i = 0; i < n; ++i) est.ok[i] = okbuf[i] != 0;
    return est;
}

double signed_distance(const Vec3& query, const PointCloud& pc, const KdTree& tree) {
    require(pc.has_normals(), "signed_distance: cloud has no normals");
    const int j = tree.nearest_one(query);
    const Vec3 d = query - pc.positions[j];
    const double dist = norm(d);
    if (dist == 0.0) return 0.0;
    return dot(d, pc.normals[j]) >= 0 ? dist : -dist;
}

double signed_distance(const Vec3& query, const PointCloud& pc) {
    pc.validate();
    KdTree tree(pc.positions);
    return signed_distance(query, pc, tree);
}

GeomEmbedding embed(const PointCloud& pc, int k) {
    pc.validate();
    const int n = int(pc.size());
    const NormalEstimate nrm = estimate_normals(pc, k);
    const CurvatureEstimate curv = estimate_curvature(pc, k);

    PointCloud surface = pc;
    if (!surface.has_normals()) surface.normals = nrm.normals;
    KdTree tree(surface.positions);

    GeomEmbedding emb;
    emb.features.assign(std::size_t(n) * kEmbedWidth, 0.0);
    emb.ok.assign(n, true);
    parallel_for(n, [&](std::int64_t i) {
        double* row = emb.features.data() + i * kEmbedWidth;
        const Vec3& p = pc.positions[i];
        const Vec3& nv = pc.has_normals() ? pc.normals[i] : nrm.normals[i];
        row[0] = p.x;
        row[1] = p.y;
        row[2] = p.z;
        row[3] = nv.x;
        row[4] = nv.y;
        row[5] = nv.z;
        row[6] = signed_distance(p, surface, tree);
        row[7] = curv.kappa[i];
        row[8] = 0.0;  // reserved channel, keeps the 9-wide contract
    });
    for (int i = 0; i < n; ++i) emb.ok[i] = nrm.ok[i] && curv.ok[i];
    return emb;
}

// ---------------------------------------------------------------------------
// message passing
// ---------------------------------------------------------------------------

MessagePassingLayer MessagePassingLayer::init(int channels, int hidden, Rng& rng,
                                              double scale) {
    MessagePassingLayer l;
    l.channels = channels;
    l.self_weight.resize(std::size_t(channels) * channels);
    const double s = scale / std::sqrt(double(channels));
    for (double& v : l.self_weight) v = s * rng.normal();
    l.kernel = Mlp::init({3, hidden, channels}, {Activation::Tanh, Activation::Identity},
                         rng, scale);
    return l;
}

std::vector<double> message_pass(const KnnGraph& graph, const PointCloud& pc,
                                 const std::vector<double>& features,
                                 const MessagePassingLayer& layer) {
    const int n = int(pc.size());
    const int c = layer.channels;
    require(int(graph.neighbors.size()) == n, "message_pass: graph size mismatch");
    require(int(features.size()) == n * c, "message_pass: feature width mismatch");
    require(layer.kernel.input_width() == 3 && layer.kernel.output_width() == c,
            "message_pass: kernel width mismatch");

    std::vector<double> out(features.size());
    parallel_for(n, [&](std::int64_t i) {
        const double* hi = features.data() + i * c;
        std::vector<double> acc(c, 0.0);
        for (int o = 0; o < c; ++o) {
            const double* row = layer.self_weight.data() + std::size_t(o) * c;
            double s = 0.0;
            for (int q = 0; q < c; ++q) s += row[q] * hi[q];
            acc[o] = s;
        }
        const auto& nb = graph.neighbors[i];
        if (!nb.empty()) {
            std::vector<double> mean(c, 0.0);
            for (int j : nb) {
                const Vec3 offset = pc.positions[i] - pc.positions[j];
                const double off[3] = {offset.x, offset.y, offset.z};
                const std::vector<double> kv = layer.kernel.forward(off);
                const double* hj = features.data() + std::size_t(j) * c;
                for (int q = 0; q < c; ++q) mean[q] += kv[q] * hj[q];
            }
            const double inv = 1.0 / double(nb.size());
            for (int q = 0; q < c; ++q) acc[q] += mean[q] * inv;
        }
        double* row = out.data() + i * c;
        for (int q = 0; q < c; ++q) row[q] = std::tanh(acc[q]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// inverse-distance projection
// ---------------------------------------------------------------------------

NWProjector NWProjector::init(int channels, int hidden, Rng& rng, double scale) {
    NWProjector p;
    p.channels = channels;
    p.kernel = Mlp::init({3, hidden, channels}, {Activation::Tanh, Activation::Identity},
                         rng, scale);
    p.ln_gain.assign(channels, 1.0);
    p.ln_bias.assign(channels, 0.0);
    return p;
}

SourceSet dedup_sources(std::span<const Vec3> points) {
    require(!points.empty(), "dedup_sources: empty source set");
    std::map<std::tuple<double, double, double>, int> seen;
    SourceSet s;
    for (int i = 0; i < int(points.size()); ++i) {
        const auto key = std::make_tuple(points[i].x, points[i].y, points[i].z);
        if (seen.emplace(key, i).second) {
            s.positions.push_back(points[i]);
            s.representative.push_back(i);
        }
    }
    return s;
}

std::vector<std::pair<int, double>> nw_weights(const NWProjector& proj,
                                               const SourceSet& src, const KdTree& tree,
                                               const Vec3& anchor) {
    const int k = std::min<int>(proj.anchor_k, int(src.positions.size()));
    const std::vector<int> nb = tree.nearest(anchor, k);
    require(!nb.empty(), "nw_project: anchor has empty neighborhood");
    double total = 0.0;
    std::vector<std::pair<int, double>> w;
    w.reserve(nb.size());
    for (int j : nb) {
        const double d = norm(anchor - src.positions[j]);
        const double wj = 1.0 / (d + proj.weight_floor);
        w.emplace_back(j, wj);
        total += wj;
    }
    for (auto& [j, wj] : w) wj /= total;
    return w;
}

std::vector<double> nw_eval(const NWProjector& proj, const SourceSet& src,
                            const KdTree& tree, std::span<const Vec3> points,
                            const std::vector<double>& features, const Vec3& anchor,
                            bool normalized) {
    const int c = proj.channels;
    require(int(features.size()) == int(points.size()) * c,
            "nw_project: feature width mismatch");
    const auto weights = nw_weights(proj, src, tree, anchor);
    std::vector<double> acc(c, 0.0);
    for (const auto& [j, wj] : weights) {
        const int rep = src.representative[j];
        const Vec3 offset = anchor - src.positions[j];
        const double off[3] = {offset.x, offset.y, offset.z};
        const std::vector<double> kv = proj.kernel.forward(off);
        const double* h = features.data() + std::size_t(rep) * c;
        for (int q = 0; q < c; ++q) acc[q] += wj * kv[q] * h[q];
    }
    if (normalized && proj.use_layer_norm) {
        double mean = 0.0;
        for (double v : acc) mean += v;
        mean /= c;
        double var = 0.0;
        for (double v : acc) var += (v - mean) * (v - mean);
        var /= c;
        const double inv = 1.0 / std::sqrt(var + proj.ln_eps);
        for (int q = 0; q < c; ++q)
            acc[q] = proj.ln_gain[q] * (acc[q] - mean) * inv + proj.ln_bias[q];
    }
    return acc;
}

LatentGrid nw_project(const NWProjector& proj, std::span<const Vec3> points,
                      const std::vector<double>& features, const LatentGrid& shape) {
    const SourceSet src = dedup_sources(points);
    KdTree tree(src.positions);
    LatentGrid out = shape;
    out.channels = proj.channels;
    out.values.assign(out.nodes() * proj.channels, 0.0);
    const int W = shape.dims[1], D = shape.dims[2];
    parallel_for(out.nodes(), [&](std::int64_t node) {
        const int k = int(node % D);
        const int j = int((node / D) % W);
        const int i = int(node / (std::int64_t(W) * D));
        const std::vector<double> v =
            nw_eval(proj, src, tree, points, features, shape.node_coord(i, j, k));
        std::copy(v.begin(), v.end(), out.values.begin() + node * proj.channels);
    });
    return out;
}

double lipschitz_estimate(const NWProjector& proj, std::span<const Vec3> points,
                          const std::vector<double>& features,
                          std::span<const std::pair<Vec3, Vec3>> probe_pairs) {
    const SourceSet src = dedup_sources(points);
    KdTree tree(src.positions);
    double best = 0.0;
    for (const auto& [a, b] : probe_pairs) {
        const double sep = norm(a - b);
        if (sep == 0.0) continue;
        const std::vector<double> fa = nw_eval(proj, src, tree, points, features, a);
        const std::vector<double> fb = nw_eval(proj, src, tree, points, features, b);
        double diff = 0.0;
        for (std::size_t q = 0; q < fa.size(); ++q)
            diff += (fa[q] - fb[q]) * (fa[q] - fb[q]);
        best = std::max(best, std::sqrt(diff) / sep);
    }
    return best;
}

}  // namespace latflow
