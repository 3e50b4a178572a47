#include "llmhg/hypergraph.hpp"

#include "llmhg/errors.hpp"
#include "llmhg/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace llmhg {

namespace {

void finalize(MultiViewHypergraph& hg) {
    hg.isolated.assign(hg.vertices.size(), true);
    for (int e = 0; e < static_cast<int>(hg.edges.size()); ++e) {
        hg.edges[e].edge_id = e;
        for (int v : hg.edges[e].members) hg.isolated[static_cast<std::size_t>(v)] = false;
    }
}

std::unordered_map<std::string, int> index_of(const std::vector<std::string>& vertices) {
    std::unordered_map<std::string, int> idx;
    for (int i = 0; i < static_cast<int>(vertices.size()); ++i) idx.emplace(vertices[i], i);
    return idx;
}

}  // namespace

int MultiViewHypergraph::vertex_index(const std::string& item_id) const {
    auto it = std::find(vertices.begin(), vertices.end(), item_id);
    if (it == vertices.end()) return -1;
    return static_cast<int>(it - vertices.begin());
}

MultiViewHypergraph assemble(const std::string& user_id,
                             const std::vector<std::string>& vertices,
                             const InterestAngleSet& angles,
                             const std::vector<CategoryAssignment>& assignments,
                             const std::map<std::string, TextEmbedding>& embeddings) {
    MultiViewHypergraph hg;
    hg.user_id = user_id;
    hg.vertices = vertices;
    auto idx = index_of(vertices);

    for (const auto& angle : angles.angles) {
        auto it = std::find_if(assignments.begin(), assignments.end(),
                               [&](const CategoryAssignment& a) { return a.angle == angle; });
        if (it == assignments.end())
            throw InvalidConfig("no category assignment for angle " + angle);
        hg.angle_order.push_back(angle);

        // label -> sorted member indices
        std::map<std::string, std::set<int>> groups;
        for (const auto& [item, labels] : it->labels) {
            auto vit = idx.find(item);
            if (vit == idx.end()) continue;  // item outside this hypergraph's vertex set
            for (const auto& label : labels) {
                if (label == "unknown") continue;
                groups[label].insert(vit->second);
            }
        }
        for (auto& [label, members] : groups) {
            Hyperedge edge;
            edge.angle = angle;
            edge.label = label;
            edge.members.assign(members.begin(), members.end());
            auto eit = embeddings.find(label);
            if (eit != embeddings.end()) edge.text_embedding = eit->second;
            hg.edges.push_back(std::move(edge));
        }
    }
    if (hg.edges.empty())
        throw DegenerateHypergraph("no non-unknown categories for user " + user_id);
    finalize(hg);
    return hg;
}

HypergraphTensors incidence(const MultiViewHypergraph& hg) {
    const auto n_v = static_cast<Eigen::Index>(hg.n_v());
    const auto n_e = static_cast<Eigen::Index>(hg.n_e());
    HypergraphTensors t;
    t.H = Eigen::MatrixXd::Zero(n_v, n_e);
    for (Eigen::Index e = 0; e < n_e; ++e)
        for (int v : hg.edges[static_cast<std::size_t>(e)].members) t.H(v, e) = 1.0;
    t.w = Eigen::VectorXd::Ones(n_e);
    t.delta = t.H.colwise().sum();
    t.d = t.H * t.w;
    t.iso = Eigen::VectorXd::Zero(n_v);
    for (Eigen::Index v = 0; v < n_v; ++v)
        if (v < static_cast<Eigen::Index>(hg.isolated.size()) &&
            hg.isolated[static_cast<std::size_t>(v)])
            t.iso[v] = 1.0;
    return t;
}

const Eigen::MatrixXd& laplacian(HypergraphTensors& t) {
    const Eigen::Index n_v = t.H.rows();
    const Eigen::Index n_e = t.H.cols();
    for (Eigen::Index e = 0; e < n_e; ++e)
        if (t.delta[e] <= 0.0)
            throw InternalInvariantViolation("empty hyperedge in tensors");
    t.d = t.H * t.w;
    for (Eigen::Index v = 0; v < n_v; ++v)
        if (t.d[v] <= 0.0 && t.iso[v] == 0.0)
            throw InternalInvariantViolation("zero-degree vertex not flagged isolated");

    // isolated vertices keep d=0; padding to 1 leaves their L row an identity
    // row because the corresponding H row is zero
    Eigen::VectorXd d_safe = t.d + t.iso;
    Eigen::VectorXd inv_sqrt_d = d_safe.array().pow(-0.5);
    Eigen::VectorXd inv_delta = t.delta.array().inverse();

    Eigen::MatrixXd scaled = t.H * (t.w.cwiseProduct(inv_delta)).asDiagonal();
    Eigen::MatrixXd theta = inv_sqrt_d.asDiagonal() * (scaled * t.H.transpose()) *
                            inv_sqrt_d.asDiagonal();
    t.L = Eigen::MatrixXd::Identity(n_v, n_v) - theta;
    return t.L;
}

MultiViewHypergraph transition_hyperedges(const std::string& user_id,
                                          const std::vector<std::string>& sequence) {
    if (sequence.size() < 2)
        throw DegenerateHypergraph("transition builder needs a sequence of length >= 2");
    MultiViewHypergraph hg;
    hg.user_id = user_id;
    hg.vertices = sequence;
    hg.angle_order = {"transition"};
    auto idx = index_of(sequence);
    char label[16];
    for (std::size_t t = 0; t + 1 < sequence.size(); ++t) {
        Hyperedge edge;
        edge.angle = "transition";
        std::snprintf(label, sizeof(label), "t%04zu", t);
        edge.label = label;
        int a = idx[sequence[t]];
        int b = idx[sequence[t + 1]];
        edge.members = {std::min(a, b), std::max(a, b)};
        hg.edges.push_back(std::move(edge));
    }
    finalize(hg);
    return hg;
}

MultiViewHypergraph contextual_hyperedges(const std::string& user_id,
                                          const std::vector<std::string>& sequence,
                                          const std::vector<std::size_t>& window_sizes) {
    for (std::size_t k : window_sizes)
        if (k < 2) throw InvalidConfig("context window must be >= 2");
    MultiViewHypergraph hg;
    hg.user_id = user_id;
    hg.vertices = sequence;
    hg.angle_order = {"context"};
    auto idx = index_of(sequence);
    char label[32];
    for (std::size_t k : window_sizes) {
        if (k > sequence.size()) continue;
        for (std::size_t start = 0; start + k <= sequence.size(); ++start) {
            Hyperedge edge;
            edge.angle = "context";
            std::snprintf(label, sizeof(label), "w%03zu-%04zu", k, start);
            edge.label = label;
            std::set<int> members;
            for (std::size_t t = start; t < start + k; ++t) members.insert(idx[sequence[t]]);
            edge.members.assign(members.begin(), members.end());
            hg.edges.push_back(std::move(edge));
        }
    }
    finalize(hg);
    return hg;
}

MultiViewHypergraph intent_hyperedges(const std::string& user_id,
                                      const std::vector<std::string>& items,
                                      const Eigen::MatrixXd& item_embeddings,
                                      const std::vector<Eigen::VectorXd>& intent_prototypes,
                                      std::size_t top_n) {
    if (top_n < 2) throw InvalidConfig("intent top_n must be >= 2");
    if (intent_prototypes.empty()) throw InvalidConfig("no intent prototypes");
    if (item_embeddings.rows() != static_cast<Eigen::Index>(items.size()))
        throw ShapeError("item embedding rows must match item count");

    MultiViewHypergraph hg;
    hg.user_id = user_id;
    hg.vertices = items;
    hg.angle_order = {"intent"};
    std::size_t take = std::min(top_n, items.size());
    char label[16];
    for (std::size_t p = 0; p < intent_prototypes.size(); ++p) {
        const auto& proto = intent_prototypes[p];
        double pnorm = proto.norm();
        std::vector<std::pair<double, int>> ranked;  // (-cosine, index) for stable sort
        for (Eigen::Index i = 0; i < item_embeddings.rows(); ++i) {
            double inorm = item_embeddings.row(i).norm();
            double cos = 0.0;
            if (pnorm > 0.0 && inorm > 0.0)
                cos = item_embeddings.row(i).dot(proto) / (pnorm * inorm);
            ranked.emplace_back(-cos, static_cast<int>(i));
        }
        std::sort(ranked.begin(), ranked.end());
        Hyperedge edge;
        edge.angle = "intent";
        std::snprintf(label, sizeof(label), "intent%03zu", p);
        edge.label = label;
        std::set<int> members;
        for (std::size_t i = 0; i < take; ++i) members.insert(ranked[i].second);
        edge.members.assign(members.begin(), members.end());
        hg.edges.push_back(std::move(edge));
    }
    finalize(hg);
    return hg;
}

std::vector<Eigen::VectorXd> kmeans_centroids(const Eigen::MatrixXd& points, std::size_t k,
                                              std::uint64_t seed, int iterations) {
    if (k == 0 || points.rows() == 0) throw InvalidConfig("kmeans needs k >= 1 and points");
    const auto n = static_cast<std::size_t>(points.rows());
    k = std::min(k, n);
    Rng rng(seed);

    // seed centroids from distinct points
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);
    std::vector<Eigen::VectorXd> centroids;
    for (std::size_t i = 0; i < k; ++i) centroids.push_back(points.row(order[i]).transpose());

    std::vector<int> assign(n, 0);
    for (int it = 0; it < iterations; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                double dist = (points.row(i).transpose() - centroids[c]).squaredNorm();
                if (dist < best) {
                    best = dist;
                    best_c = static_cast<int>(c);
                }
            }
            if (assign[i] != best_c) changed = true;
            assign[i] = best_c;
        }
        for (std::size_t c = 0; c < k; ++c) {
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(points.cols());
            int count = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (assign[i] == static_cast<int>(c)) {
                    sum += points.row(i).transpose();
                    ++count;
                }
            if (count > 0) centroids[c] = sum / count;
        }
        if (!changed) break;
    }
    return centroids;
}

void write_hypergraph_dump(const MultiViewHypergraph& hg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    for (const auto& edge : hg.edges) {
        out << edge.angle << '\t' << edge.label << '\t';
        for (std::size_t i = 0; i < edge.members.size(); ++i) {
            if (i) out << ',';
            out << hg.vertices[static_cast<std::size_t>(edge.members[i])];
        }
        out << '\n';
    }
}

MultiViewHypergraph read_hypergraph_dump(const std::string& path, const std::string& user_id,
                                         const std::vector<std::string>& vertices) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    MultiViewHypergraph hg;
    hg.user_id = user_id;
    hg.vertices = vertices;
    auto idx = index_of(vertices);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string angle, label, members;
        if (!std::getline(ls, angle, '\t') || !std::getline(ls, label, '\t') ||
            !std::getline(ls, members))
            throw ParseError("expected view<TAB>label<TAB>items", line_no);
        Hyperedge edge;
        edge.angle = angle;
        edge.label = label;
        std::set<int> member_set;
        std::istringstream ms(members);
        std::string item;
        while (std::getline(ms, item, ',')) {
            auto it = idx.find(item);
            if (it == idx.end())
                throw ParseError("edge member not in vertex set: " + item, line_no);
            member_set.insert(it->second);
        }
        if (member_set.empty()) throw ParseError("empty edge member list", line_no);
        edge.members.assign(member_set.begin(), member_set.end());
        if (std::find(hg.angle_order.begin(), hg.angle_order.end(), angle) ==
            hg.angle_order.end())
            hg.angle_order.push_back(angle);
        hg.edges.push_back(std::move(edge));
    }
    finalize(hg);
    return hg;
}

}  // namespace llmhg
