#include "flocode/tfod.hpp"

#include <cmath>
#include <stdexcept>

#include "flocode/tensor_ops.hpp"

namespace flocode {

void validate(const TEncConfig& cfg) {
    if (cfg.layers < 0) throw std::invalid_argument("TEncConfig: negative layer count");
    if (cfg.heads < 1) throw std::invalid_argument("TEncConfig: heads must be >= 1");
    if (cfg.model_dim < 1 || cfg.model_dim % cfg.heads != 0)
        throw std::invalid_argument("TEncConfig: model_dim must be a positive multiple of heads");
    if (cfg.ffn_dim < 1) throw std::invalid_argument("TEncConfig: ffn_dim must be >= 1");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw std::invalid_argument("TEncConfig: dropout must be in [0, 1)");
    if (cfg.max_sequence_length < 1)
        throw std::invalid_argument("TEncConfig: max_sequence_length must be >= 1");
}

namespace {

// Modified Gram-Schmidt with a second sweep; columns of a random Gaussian
// matrix are almost surely independent, so degeneracy is an input error.
Tensor orthonormal_columns(Rng& rng, int rows, int cols) {
    std::vector<std::vector<double>> q(static_cast<size_t>(cols), std::vector<double>(static_cast<size_t>(rows)));
    for (auto& col : q)
        for (auto& v : col) v = rng.normal();
    for (int j = 0; j < cols; ++j) {
        auto& vj = q[static_cast<size_t>(j)];
        for (int sweep = 0; sweep < 2; ++sweep) {
            for (int i = 0; i < j; ++i) {
                const auto& qi = q[static_cast<size_t>(i)];
                double proj = 0.0;
                for (int r = 0; r < rows; ++r) proj += qi[static_cast<size_t>(r)] * vj[static_cast<size_t>(r)];
                for (int r = 0; r < rows; ++r) vj[static_cast<size_t>(r)] -= proj * qi[static_cast<size_t>(r)];
            }
        }
        double norm = 0.0;
        for (double v : vj) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-10) throw std::runtime_error("orthonormal_columns: rank-deficient draw");
        for (auto& v : vj) v /= norm;
    }
    std::vector<double> flat(static_cast<size_t>(rows) * static_cast<size_t>(cols));
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < cols; ++j)
            flat[static_cast<size_t>(r) * cols + j] = q[static_cast<size_t>(j)][static_cast<size_t>(r)];
    return Tensor::from_data({rows, cols}, std::move(flat));
}

}  // namespace

EtfClassifier etf_from_rotation(const Tensor& rotation) {
    if (rotation.ndim() != 2) throw std::invalid_argument("etf_from_rotation: rotation must be 2-D");
    const int d = rotation.dim(0);
    const int c = rotation.dim(1);
    if (c < 2) throw std::invalid_argument("etf_from_rotation: need at least 2 classes");
    if (d < c) throw std::invalid_argument("etf_from_rotation: dim must be >= num_classes");
    // Orthonormal-column check.
    for (int i = 0; i < c; ++i)
        for (int j = i; j < c; ++j) {
            double g = 0.0;
            for (int r = 0; r < d; ++r) g += rotation(r, i) * rotation(r, j);
            if (std::abs(g - (i == j ? 1.0 : 0.0)) > 1e-8)
                throw std::invalid_argument("etf_from_rotation: columns not orthonormal");
        }

    // Center the columns and rescale so every prototype has unit norm and
    // pairwise cosine -1/(c-1).
    std::vector<double> mean(static_cast<size_t>(d), 0.0);
    for (int r = 0; r < d; ++r) {
        for (int j = 0; j < c; ++j) mean[static_cast<size_t>(r)] += rotation(r, j);
        mean[static_cast<size_t>(r)] /= c;
    }
    const double s = std::sqrt(static_cast<double>(c) / (c - 1));
    std::vector<double> w(static_cast<size_t>(d) * static_cast<size_t>(c));
    for (int r = 0; r < d; ++r)
        for (int j = 0; j < c; ++j)
            w[static_cast<size_t>(r) * c + j] = s * (rotation(r, j) - mean[static_cast<size_t>(r)]);

    EtfClassifier etf;
    etf.num_classes = c;
    etf.dim = d;
    etf.rotation = rotation;
    etf.weights = Tensor::from_data({d, c}, std::move(w));
    return etf;
}

EtfClassifier make_etf(int num_classes, int dim, uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("make_etf: need at least 2 classes");
    if (dim < num_classes) throw std::invalid_argument("make_etf: dim must be >= num_classes");
    Rng rng(mix64(seed ^ 0x45544675u));  // decorrelate from other consumers of the seed
    return etf_from_rotation(orthonormal_columns(rng, dim, num_classes));
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 || mask.ndim() != 2)
        throw std::invalid_argument("masked_attention: all inputs must be 2-D");
    if (q.dim(1) != k.dim(1)) throw std::invalid_argument("masked_attention: query/key dim mismatch");
    if (k.dim(0) != v.dim(0)) throw std::invalid_argument("masked_attention: key/value length mismatch");
    if (mask.dim(0) != q.dim(0) || mask.dim(1) != k.dim(0))
        throw std::invalid_argument("masked_attention: mask shape mismatch");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
    Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt);
    Tensor weights = ops::softmax_rows(ops::masked_fill(scores, mask));
    return ops::matmul(weights, v);
}

void init_tenc_params(ParamStore& store, Rng& rng, const std::string& prefix,
                      const TEncConfig& cfg, int in_dim) {
    validate(cfg);
    if (in_dim < 1) throw std::invalid_argument("init_tenc_params: in_dim must be >= 1");
    init_linear_params(store, rng, prefix + ".proj", in_dim, cfg.model_dim);
    for (int i = 0; i < cfg.layers; ++i)
        init_encoder_layer_params(store, rng, prefix + ".layer" + std::to_string(i),
                                  cfg.model_dim, cfg.ffn_dim);
}

EncodedSequence tenc_forward(ParamContext& ctx, const std::string& prefix,
                             const TEncConfig& cfg, const ObjectSequence& seq,
                             const DropoutState& drop) {
    validate(cfg);
    const int len = static_cast<int>(seq.entries.size());
    if (len == 0) throw std::invalid_argument("tenc_forward: empty sequence");
    if (len > cfg.max_sequence_length)
        throw std::invalid_argument("tenc_forward: sequence longer than positional table");

    const int in_dim = seq.entries.front().feature.numel();
    std::vector<double> stacked;
    stacked.reserve(static_cast<size_t>(len) * static_cast<size_t>(in_dim));
    EncodedSequence out;
    out.class_id = seq.class_id;
    out.track_id = seq.track_id;
    for (const auto& e : seq.entries) {
        if (e.feature.numel() != in_dim)
            throw std::invalid_argument("tenc_forward: inconsistent feature widths");
        if (e.frame < 0 || e.frame >= cfg.max_sequence_length)
            throw std::invalid_argument("tenc_forward: frame index outside positional table");
        stacked.insert(stacked.end(), e.feature.data(), e.feature.data() + e.feature.numel());
        out.frames.push_back(e.frame);
        out.object_indices.push_back(e.object_index);
    }

    Tensor pe = sinusoidal_embedding(cfg.max_sequence_length, cfg.model_dim);
    std::vector<double> pos(static_cast<size_t>(len) * static_cast<size_t>(cfg.model_dim));
    for (int i = 0; i < len; ++i)
        for (int c = 0; c < cfg.model_dim; ++c)
            pos[static_cast<size_t>(i) * cfg.model_dim + c] = pe(out.frames[static_cast<size_t>(i)], c);

    auto x = ad::add(linear(ctx, prefix + ".proj", ad::constant(Tensor::from_data({len, in_dim}, std::move(stacked)))),
                     ad::constant(Tensor::from_data({len, cfg.model_dim}, std::move(pos))));
    Tensor mask = causal_mask(len);
    for (int i = 0; i < cfg.layers; ++i)
        x = encoder_layer(ctx, prefix + ".layer" + std::to_string(i), x, mask, cfg.heads, drop);
    out.rows = x;
    return out;
}

std::vector<EncodedObject> encoded_objects(const EncodedSequence& es) {
    const Tensor& rows = es.rows->value;
    const int len = rows.dim(0);
    const int d = rows.dim(1);
    std::vector<EncodedObject> objs;
    objs.reserve(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
        std::vector<double> row(rows.data() + static_cast<size_t>(i) * d,
                                rows.data() + static_cast<size_t>(i + 1) * d);
        objs.push_back({Tensor::from_data({d}, std::move(row)), es.class_id,
                        es.frames[static_cast<size_t>(i)], es.object_indices[static_cast<size_t>(i)]});
    }
    return objs;
}

namespace {

void check_class(const EtfClassifier& etf, int class_id, int numel) {
    if (class_id < 0 || class_id >= etf.num_classes)
        throw std::invalid_argument("object class out of range");
    if (numel != etf.dim) throw std::invalid_argument("feature width does not match classifier dim");
}

}  // namespace

double object_loss(const Tensor& x, int class_id, const EtfClassifier& etf) {
    check_class(etf, class_id, x.numel());
    const double norm = ops::l2_norm(x);
    if (norm < 1e-300) throw std::invalid_argument("object_loss: zero-norm feature");
    double cos = 0.0;
    for (int r = 0; r < etf.dim; ++r) cos += x.data()[r] * etf.weights(r, class_id);
    cos /= norm;
    const double gap = cos - 1.0;
    return 0.5 * gap * gap;
}

ad::VarPtr object_loss_ad(const ad::VarPtr& x_row, int class_id, const EtfClassifier& etf) {
    if (x_row->value.ndim() != 2 || x_row->value.dim(0) != 1)
        throw std::invalid_argument("object_loss_ad: expected a [1, dim] row");
    check_class(etf, class_id, x_row->value.numel());
    std::vector<double> col(static_cast<size_t>(etf.dim));
    for (int r = 0; r < etf.dim; ++r) col[static_cast<size_t>(r)] = etf.weights(r, class_id);
    auto cos = ad::matmul(ad::l2_normalize_rows(x_row),
                          ad::constant(Tensor::from_data({etf.dim, 1}, std::move(col))));
    return ad::scale(ad::square(ad::add_scalar(cos, -1.0)), 0.5);
}

ad::VarPtr object_loss_rows(const ad::VarPtr& rows, const std::vector<int>& class_ids,
                            const EtfClassifier& etf) {
    const int len = rows->value.dim(0);
    if (static_cast<int>(class_ids.size()) != len)
        throw std::invalid_argument("object_loss_rows: one class per row required");
    if (rows->value.dim(1) != etf.dim)
        throw std::invalid_argument("object_loss_rows: feature width does not match classifier dim");
    std::vector<double> protos(static_cast<size_t>(len) * static_cast<size_t>(etf.dim));
    for (int i = 0; i < len; ++i) {
        check_class(etf, class_ids[static_cast<size_t>(i)], etf.dim);
        for (int r = 0; r < etf.dim; ++r)
            protos[static_cast<size_t>(i) * etf.dim + r] = etf.weights(r, class_ids[static_cast<size_t>(i)]);
    }
    auto cos = ad::rowsum(ad::mul(ad::l2_normalize_rows(rows),
                                  ad::constant(Tensor::from_data({len, etf.dim}, std::move(protos)))));
    return ad::mean(ad::scale(ad::square(ad::add_scalar(cos, -1.0)), 0.5));
}

int classify_object(const Tensor& x, const EtfClassifier& etf) {
    if (x.numel() != etf.dim) throw std::invalid_argument("classify_object: feature width mismatch");
    const double norm = ops::l2_norm(x);
    if (norm < 1e-300) throw std::invalid_argument("classify_object: zero-norm feature");
    int best = 0;
    double best_score = -2.0;
    for (int c = 0; c < etf.num_classes; ++c) {
        double cos = 0.0;
        for (int r = 0; r < etf.dim; ++r) cos += x.data()[r] * etf.weights(r, c);
        cos /= norm;
        if (cos > best_score) {
            best_score = cos;
            best = c;
        }
    }
    return best;
}

}  // namespace flocode
