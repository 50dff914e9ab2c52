#pragma once

#include <compare>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "flocode/attention.hpp"
#include "flocode/data.hpp"
#include "flocode/geometry.hpp"
#include "flocode/params.hpp"

namespace flocode {

/// Class-level key of a relation: (subject class, predicate, object class).
struct TripletKey {
    int subject_class = -1;
    int predicate = -1;
    int object_class = -1;
    auto operator<=>(const TripletKey&) const = default;
};

/// Epoch-persistent record of how much cross-attention mass each triplet
/// class received. Committed values are frozen during an epoch; forward
/// passes only append to a pending accumulator that the commit folds in.
class CorrelationStore {
public:
    explicit CorrelationStore(double eta);

    double eta() const { return eta_; }
    /// Number of committed epochs == index of the epoch now accumulating.
    int epoch() const { return committed_epochs_; }
    size_t size() const { return values_.size(); }
    bool has(const TripletKey& key) const;
    double get(const TripletKey& key) const;

    /// Records one attention-weight observation for this epoch.
    void observe(const TripletKey& key, double weight);
    size_t pending_observations() const;

    /// Folds the epoch's observations in (per-cell mean); cells without
    /// observations keep their previous value. `expected_epoch` guards
    /// against committing the same epoch twice.
    void commit_epoch(int expected_epoch);

    std::string serialize() const;
    static CorrelationStore deserialize(const std::string& text);

private:
    double eta_;
    int committed_epochs_ = 0;
    std::map<TripletKey, double> values_;
    std::map<TripletKey, std::pair<double, long>> pending_;  // sum, count
};

/// Matches next-frame detections to same-class previous-frame detections
/// with IoU above the threshold, greedily by descending IoU; each side is
/// used at most once. Returns (prev id, next id) pairs.
std::vector<std::pair<int, int>> match_pairs(const std::vector<GtObject>& prev,
                                             const std::vector<GtObject>& next,
                                             double iou_threshold = 0.8);

/// One subject-object pair in one frame, with its union-region feature.
struct RelationInstance {
    int frame = -1;
    int subject_id = -1;
    int object_id = -1;
    int subject_class = -1;
    int object_class = -1;
    std::vector<int> predicates;  // ground-truth labels; may be empty at inference
    Box subject_box;
    Box object_box;
    Tensor union_feature;  // [union_dim]
};

struct RelrepConfig {
    int model_dim = 66;  // divisible by 3: subject / spatial / frame parts
    int heads = 2;
    int enc_layers = 1;
    int dec_layers = 1;
    int ffn_dim = 128;
    int window = 10;  // cross-attention frame window
    double dropout = 0.0;
    int max_frames = 64;   // frame-index embedding table length
    int union_dim = 32;    // width of union-region features
    int object_dim = 64;   // width of encoded object features
};
void validate(const RelrepConfig& cfg);

void init_relrep_params(ParamStore& store, Rng& rng, const std::string& prefix,
                        const RelrepConfig& cfg);

/// Geometry of a box pair: centers, sizes, offset, overlap. [12] values.
Tensor box_pair_features(const Box& a, const Box& b);

/// Relation tokens for one subject, one row per instance:
/// concat(projected subject encoding,
///        union feature + box-geometry projection, then projected,
///        fixed frame-index embedding).
/// subject_encodings[i] is the subject's encoded feature [1, object_dim] at
/// instance i's frame.
ad::VarPtr build_relation_features(ParamContext& ctx, const std::string& prefix,
                                   const RelrepConfig& cfg,
                                   const std::vector<RelationInstance>& instances,
                                   const std::vector<ad::VarPtr>& subject_encodings);

struct DebiasOptions {
    CorrelationStore* store = nullptr;  // null → vanilla attention
    bool training = false;
    bool enabled = true;
};

/// Elementwise recipe for blending post-softmax attention rows:
/// blended = keep ∘ rows + addend. Cells that keep their raw weight have
/// keep 1 / addend 0; a blending cell has keep = eta and
/// addend = (1 - eta) * stored value.
struct DebiasPlan {
    bool active = false;
    Tensor keep;    // [n, n]
    Tensor addend;  // [n, n]
};

/// Builds the blend recipe for one forward pass: a cell (q, k) blends when
/// the mask allows it and the key instance has at least one committed
/// triplet cell; the target is the mean of its labels' stored values.
DebiasPlan plan_debias(const CorrelationStore& store,
                       const std::vector<RelationInstance>& instances,
                       const Tensor& cross_mask);

/// Applies the recipe and renormalizes each row to sum to 1.
ad::VarPtr apply_debias(const ad::VarPtr& rows, const DebiasPlan& plan);

struct DecodedPredicates {
    ad::VarPtr rows;  // [num_instances, model_dim]
    std::vector<RelationInstance> instances;
};

/// Per-subject predicate decoding: a causal encoder over the relation
/// tokens, then a decoder whose queries combine the subject and object
/// encodings, with causal self-attention and frame-windowed cross-attention.
/// During training with a committed store, cross-attention weights for cells
/// whose key triplet is stored are blended toward the stored value and rows
/// renormalized; raw weights are used at inference. Instances must be sorted
/// by (frame, object id).
DecodedPredicates decode_predicates(ParamContext& ctx, const std::string& prefix,
                                    const RelrepConfig& cfg,
                                    const std::vector<RelationInstance>& instances,
                                    const std::vector<ad::VarPtr>& subject_encodings,
                                    const std::vector<ad::VarPtr>& object_encodings,
                                    const DebiasOptions& debias = {},
                                    const DropoutState& drop = {});

}  // namespace flocode
