#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flocode/attention.hpp"
#include "flocode/flowwarp.hpp"
#include "flocode/params.hpp"

namespace flocode {

/// Temporal encoder geometry. The positional table is indexed by frame
/// number, so gaps in a sequence keep their true temporal distance.
struct TEncConfig {
    int layers = 1;
    int heads = 2;
    int model_dim = 64;
    int ffn_dim = 128;
    double dropout = 0.0;
    int max_sequence_length = 64;
};
void validate(const TEncConfig& cfg);

/// Fixed simplex classifier: num_classes prototype directions of unit norm
/// with pairwise cosine -1/(num_classes-1), rotated by an orthonormal basis.
struct EtfClassifier {
    int num_classes = 0;
    int dim = 0;
    Tensor rotation;  // [dim, num_classes], orthonormal columns
    Tensor weights;   // [dim, num_classes], unit-norm columns
};

/// Rotation drawn as the orthonormalization of a seeded Gaussian matrix.
EtfClassifier make_etf(int num_classes, int dim, uint64_t seed);
/// Builds the classifier from a caller-supplied orthonormal rotation.
EtfClassifier etf_from_rotation(const Tensor& rotation);

/// One encoded object token with its provenance.
struct EncodedObject {
    Tensor feature;  // [model_dim]
    int class_id = -1;
    int frame = -1;
    int object_index = -1;  // detection slot within the frame
};

/// Differentiable view of an encoded sequence: row i of `rows` is the
/// encoding of entry i, with per-row provenance kept alongside.
struct EncodedSequence {
    ad::VarPtr rows;  // [len, model_dim]
    std::vector<int> frames;
    std::vector<int> object_indices;
    int class_id = -1;
    int track_id = -1;
};

/// Plain scaled-dot-product attention over full matrices; mask uses
/// 1 = attend, 0 = blocked, applied before the softmax.
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask);

/// Registers the input projection and `layers` encoder layers under prefix.
void init_tenc_params(ParamStore& store, Rng& rng, const std::string& prefix,
                      const TEncConfig& cfg, int in_dim);

/// Runs the temporal encoder over one object sequence: project features to
/// model_dim, add frame-indexed sinusoidal positions, then causally masked
/// encoder layers. Errors when a frame index falls outside the table.
EncodedSequence tenc_forward(ParamContext& ctx, const std::string& prefix,
                             const TEncConfig& cfg, const ObjectSequence& seq,
                             const DropoutState& drop = {});

/// Snapshot of the encoded rows as plain per-object tensors.
std::vector<EncodedObject> encoded_objects(const EncodedSequence& es);

/// Alignment loss of one feature against its class prototype:
/// half the squared gap between the normalized feature's cosine with the
/// prototype and 1. Range [0, 2]; zero-norm features are rejected.
double object_loss(const Tensor& x, int class_id, const EtfClassifier& etf);
ad::VarPtr object_loss_ad(const ad::VarPtr& x_row, int class_id, const EtfClassifier& etf);

/// Mean alignment loss over all rows of an encoded sequence batch.
ad::VarPtr object_loss_rows(const ad::VarPtr& rows, const std::vector<int>& class_ids,
                            const EtfClassifier& etf);

/// Argmax of prototype cosines; ties break toward the lowest class index.
int classify_object(const Tensor& x, const EtfClassifier& etf);

}  // namespace flocode
