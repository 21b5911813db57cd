#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvp/camera.hpp"
#include "mvp/graph.hpp"
#include "mvp/params.hpp"
#include "mvp/pose.hpp"
#include "mvp/scene.hpp"

namespace mvp {

enum class AttentionMode { projective, dense };
enum class PosEncoding { rays, coords2d, none };
enum class QueryMode { per_joint, hierarchical, hierarchical_adaptive };

struct ModelConfig {
    int persons = 4;   // N prediction slots
    int joints = 5;    // J
    int channels = 64; // C embedding width
    int views = 5;     // V
    int layers = 6;    // L decoder layers
    int points = 4;    // K sample points per view
    int heads = 4;     // self-attention heads
    int ffn_width = 0; // 0 means 4*channels
    int in_channels = 5;
    AttentionMode attention = AttentionMode::projective;
    PosEncoding pos_encoding = PosEncoding::rays;
    QueryMode query_mode = QueryMode::hierarchical_adaptive;
    Workspace workspace;
    double feature_stride = 1.0;  // image pixels per feature pixel
    // When false (default), attention anchors use the current joint positions
    // as constants and no gradient flows through the projection; the
    // position chain itself stays differentiable. Enable for gradient
    // checking the complete graph.
    bool differentiable_anchors = false;
    int dense_cap = 1 << 16;  // refuse dense attention above V*H*W keys
    Precision precision = Precision::f64;

    int ffn() const { return ffn_width > 0 ? ffn_width : 4 * channels; }
    int queries() const { return persons * joints; }
    void validate() const;
};

// Number of scalars in the query embeddings proper: (N+J)*C for the
// hierarchical modes, N*J*C for per_joint.
std::size_t query_embedding_param_count(const ModelConfig& cfg);

struct ProjAttnWeights {
    Node* wp;  // [C, 2K] offset head
    Node* wa;  // [C, K] weight head
    Node* wf;  // [C, C] per-view value projection
    Node* wP;  // [V*C, C] cross-view output projection
    Node* bP;  // [C]
};

// Sample-point nodes per view ([M*K, 2] feature coordinates), exposed so
// tests can verify the bilinear support of each joint's samples. The nodes
// belong to the graph that built them; copy values out before it dies.
struct ProjAttnTrace {
    std::vector<Node*> sample_points;
    std::vector<std::vector<unsigned char>> valid;  // per view, per joint
};

// Core projective attention: per view, offsets and attention weights come
// from the fused vector q + sample(feat, anchor); K deformed samples are
// averaged under softmax weights, projected, masked by `valid`, and the
// per-view results are concatenated and projected to [M, C]. `anchors` are
// [M,2] nodes in feature coordinates (constants unless anchors are
// differentiable).
Node* projective_attention(Node* q, const std::vector<Node*>& feats,
                           const std::vector<Node*>& anchors,
                           const std::vector<std::vector<unsigned char>>& valid, int k_points,
                           const ProjAttnWeights& w, ProjAttnTrace* trace = nullptr);

// Convenience wrapper matching the conceptual signature: anchors computed by
// projecting 3D joint positions `y` (meters, constant) through every camera,
// divided by `feature_stride`.
Node* projective_attention(Node* q, const Array& y, const std::vector<Node*>& feats,
                           const std::vector<CameraParams>& cams, double feature_stride,
                           int k_points, const ProjAttnWeights& w, ProjAttnTrace* trace = nullptr);

struct DenseAttnWeights {
    Node *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;  // all [C,C] / [C]
};

// Single-head scaled dot-product attention of M queries over every spatial
// location of every view. Ablation baseline; throws ConfigError when the
// total key count V*H*W exceeds `cap`.
Node* dense_attention(Node* q, const std::vector<Node*>& feats, const DenseAttnWeights& w, int cap);

// Positional-channel concatenation (ray directions or normalized 2D
// coordinates) followed by a 1x1 convolution to the embedding width.
// `pos` must be [P,H,W] with P=3 (rays), P=2 (coords2d); pass an empty
// array for PosEncoding::none.
Node* rayconv(Node* z, const Array& pos, Node* w, Node* b);

// Query construction. Hierarchical modes take person [N,C] and joint [J,C]
// embeddings (rows person-major: m = n*J + j); per_joint takes full [M,C].
// hierarchical_adaptive additionally adds g = Concat(pool(feats)) * adapt_w
// to every row.
Node* build_queries(QueryMode mode, Node* person_embed, Node* joint_embed, Node* full_embed,
                    Node* adapt_w, const std::vector<Node*>& feats);

// Positional channels for one camera: "rays" gives the unit ray field,
// "coords2d" gives (u,v)/(W,H) at pixel centers, "none" gives an empty array.
Array positional_channels(PosEncoding mode, const CameraParams& cam, int h, int w);

class PoseTransformer {
public:
    // Fresh model with seeded random initialization.
    PoseTransformer(const ModelConfig& cfg, std::uint64_t seed);
    // Model wrapping existing parameters (checkpoint load path). Throws
    // ConfigError when the store's entries do not match the config.
    PoseTransformer(const ModelConfig& cfg, ParamStore params);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    struct LayerOut {
        Node* positions;    // [M,3] normalized workspace coordinates in [0,1]
        Node* person_conf;  // [N] person confidence probabilities
        Node* logits;       // [M,1] per-joint confidence logits
        Array offset_m;     // this layer's pre-clamp position delta, meters
    };
    struct ForwardResult {
        std::vector<LayerOut> layers;
        std::vector<Node*> bound;  // parameter nodes, store order
        Array initial_norm;        // layer-0 positions (normalized)
    };

    // Runs the network on one scene's features inside caller-owned graph
    // `g`. Features are per-view [C_in,H,W]; cameras must match the views.
    ForwardResult forward(Graph& g, const std::vector<Array>& features,
                          const std::vector<CameraParams>& cams) const;

    // Final-layer prediction as plain data (positions in meters).
    PoseSet infer(const Scene& scene) const;
    // One PoseSet per decoder layer (layer L-1 last).
    std::vector<PoseSet> infer_all_layers(const Scene& scene) const;

    // Meters <-> normalized workspace coordinate conversion.
    Array to_meters(const Array& norm) const;

private:
    void register_params(std::uint64_t seed);
    ModelConfig cfg_;
    ParamStore params_;
};

}  // namespace mvp
