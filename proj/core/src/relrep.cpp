#include "flocode/relrep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace flocode {

// ---------------------------------------------------------------------------
// CorrelationStore

CorrelationStore::CorrelationStore(double eta) : eta_(eta) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw std::invalid_argument("CorrelationStore: eta must be in [0, 1]");
}

bool CorrelationStore::has(const TripletKey& key) const { return values_.count(key) > 0; }

double CorrelationStore::get(const TripletKey& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::out_of_range("CorrelationStore: unknown triplet");
    return it->second;
}

void CorrelationStore::observe(const TripletKey& key, double weight) {
    if (!(weight >= -1e-12 && weight <= 1.0 + 1e-12))
        throw std::invalid_argument("CorrelationStore: weight outside [0, 1]");
    weight = std::min(1.0, std::max(0.0, weight));
    auto& cell = pending_[key];
    cell.first += weight;
    cell.second += 1;
}

size_t CorrelationStore::pending_observations() const {
    size_t n = 0;
    for (const auto& [k, sc] : pending_) n += static_cast<size_t>(sc.second);
    return n;
}

void CorrelationStore::commit_epoch(int expected_epoch) {
    if (expected_epoch != committed_epochs_)
        throw std::logic_error("CorrelationStore: epoch already committed or committed out of order");
    for (const auto& [key, sum_count] : pending_)
        values_[key] = sum_count.first / static_cast<double>(sum_count.second);
    pending_.clear();
    ++committed_epochs_;
}

std::string CorrelationStore::serialize() const {
    nlohmann::json j;
    j["version"] = 1;
    j["eta"] = eta_;
    j["epochs"] = committed_epochs_;
    auto& cells = j["cells"] = nlohmann::json::array();
    for (const auto& [k, v] : values_)
        cells.push_back({k.subject_class, k.predicate, k.object_class, v});
    auto& pending = j["pending"] = nlohmann::json::array();
    for (const auto& [k, sc] : pending_)
        pending.push_back({k.subject_class, k.predicate, k.object_class, sc.first, sc.second});
    return j.dump();
}

CorrelationStore CorrelationStore::deserialize(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw std::invalid_argument("CorrelationStore: unsupported serialization version");
    CorrelationStore store(j.at("eta").get<double>());
    store.committed_epochs_ = j.at("epochs").get<int>();
    for (const auto& cell : j.at("cells")) {
        TripletKey key{cell.at(0).get<int>(), cell.at(1).get<int>(), cell.at(2).get<int>()};
        store.values_[key] = cell.at(3).get<double>();
    }
    for (const auto& cell : j.at("pending")) {
        TripletKey key{cell.at(0).get<int>(), cell.at(1).get<int>(), cell.at(2).get<int>()};
        store.pending_[key] = {cell.at(3).get<double>(), cell.at(4).get<long>()};
    }
    return store;
}

// ---------------------------------------------------------------------------
// Pair matching across frames

std::vector<std::pair<int, int>> match_pairs(const std::vector<GtObject>& prev,
                                             const std::vector<GtObject>& next,
                                             double iou_threshold) {
    struct Candidate {
        double iou;
        int prev_id;
        int next_id;
    };
    std::vector<Candidate> candidates;
    for (const auto& p : prev)
        for (const auto& n : next) {
            if (p.class_id != n.class_id) continue;
            const double overlap = iou(p.box, n.box);
            if (overlap > iou_threshold) candidates.push_back({overlap, p.id, n.id});
        }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.prev_id != b.prev_id) return a.prev_id < b.prev_id;
        return a.next_id < b.next_id;
    });
    std::vector<std::pair<int, int>> matches;
    std::vector<int> used_prev, used_next;
    for (const auto& c : candidates) {
        if (std::count(used_prev.begin(), used_prev.end(), c.prev_id)) continue;
        if (std::count(used_next.begin(), used_next.end(), c.next_id)) continue;
        used_prev.push_back(c.prev_id);
        used_next.push_back(c.next_id);
        matches.emplace_back(c.prev_id, c.next_id);
    }
    std::sort(matches.begin(), matches.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return matches;
}

// ---------------------------------------------------------------------------
// Relation features and decoding

void validate(const RelrepConfig& cfg) {
    if (cfg.model_dim < 3 || cfg.model_dim % 3 != 0)
        throw std::invalid_argument("RelrepConfig: model_dim must be a positive multiple of 3");
    if (cfg.heads < 1 || cfg.model_dim % cfg.heads != 0)
        throw std::invalid_argument("RelrepConfig: model_dim must be a multiple of heads");
    if (cfg.enc_layers < 0 || cfg.dec_layers < 0)
        throw std::invalid_argument("RelrepConfig: negative layer count");
    if (cfg.ffn_dim < 1) throw std::invalid_argument("RelrepConfig: ffn_dim must be >= 1");
    if (cfg.window < 1) throw std::invalid_argument("RelrepConfig: window must be >= 1");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw std::invalid_argument("RelrepConfig: dropout must be in [0, 1)");
    if (cfg.max_frames < 1) throw std::invalid_argument("RelrepConfig: max_frames must be >= 1");
    if (cfg.union_dim < 1 || cfg.object_dim < 1)
        throw std::invalid_argument("RelrepConfig: feature widths must be >= 1");
}

void init_relrep_params(ParamStore& store, Rng& rng, const std::string& prefix,
                        const RelrepConfig& cfg) {
    validate(cfg);
    const int part = cfg.model_dim / 3;
    init_linear_params(store, rng, prefix + ".f_s", cfg.object_dim, part);
    init_linear_params(store, rng, prefix + ".f_box", 12, cfg.union_dim);
    init_linear_params(store, rng, prefix + ".f_u", cfg.union_dim, part);
    init_linear_params(store, rng, prefix + ".query", 2 * cfg.object_dim, cfg.model_dim);
    for (int i = 0; i < cfg.enc_layers; ++i)
        init_encoder_layer_params(store, rng, prefix + ".enc.layer" + std::to_string(i),
                                  cfg.model_dim, cfg.ffn_dim);
    for (int i = 0; i < cfg.dec_layers; ++i)
        init_decoder_layer_params(store, rng, prefix + ".dec.layer" + std::to_string(i),
                                  cfg.model_dim, cfg.ffn_dim);
}

Tensor box_pair_features(const Box& a, const Box& b) {
    const double cxa = 0.5 * (a.x1 + a.x2), cya = 0.5 * (a.y1 + a.y2);
    const double cxb = 0.5 * (b.x1 + b.x2), cyb = 0.5 * (b.y1 + b.y2);
    const double wa = a.x2 - a.x1, ha = a.y2 - a.y1;
    const double wb = b.x2 - b.x1, hb = b.y2 - b.y1;
    Box u = union_box(a, b);
    const double union_area = (u.x2 - u.x1) * (u.y2 - u.y1);
    return Tensor::from_data({1, 12}, {cxa, cya, wa, ha, cxb, cyb, wb, hb,
                                       cxa - cxb, cya - cyb, iou(a, b), union_area});
}

namespace {

void validate_instances(const RelrepConfig& cfg, const std::vector<RelationInstance>& instances,
                        const std::vector<ad::VarPtr>& subject_encodings) {
    if (instances.empty()) throw std::invalid_argument("relrep: no relation instances");
    if (subject_encodings.size() != instances.size())
        throw std::invalid_argument("relrep: one subject encoding per instance required");
    for (size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        if (inst.frame < 0 || inst.frame >= cfg.max_frames)
            throw std::invalid_argument("relrep: frame index outside embedding table");
        if (inst.union_feature.numel() != cfg.union_dim)
            throw std::invalid_argument("relrep: missing or mis-sized union feature");
        const auto& enc = subject_encodings[i]->value;
        if (enc.ndim() != 2 || enc.dim(0) != 1 || enc.dim(1) != cfg.object_dim)
            throw std::invalid_argument("relrep: subject encoding must be [1, object_dim]");
        if (i > 0) {
            const auto& prev = instances[i - 1];
            if (std::pair(prev.frame, prev.object_id) > std::pair(inst.frame, inst.object_id))
                throw std::invalid_argument("relrep: instances must be sorted by (frame, object id)");
        }
    }
}

std::vector<int> instance_frames(const std::vector<RelationInstance>& instances) {
    std::vector<int> frames;
    frames.reserve(instances.size());
    for (const auto& inst : instances) frames.push_back(inst.frame);
    return frames;
}

}  // namespace

ad::VarPtr build_relation_features(ParamContext& ctx, const std::string& prefix,
                                   const RelrepConfig& cfg,
                                   const std::vector<RelationInstance>& instances,
                                   const std::vector<ad::VarPtr>& subject_encodings) {
    validate(cfg);
    validate_instances(cfg, instances, subject_encodings);
    const int n = static_cast<int>(instances.size());
    const int part = cfg.model_dim / 3;

    auto subj_part = linear(ctx, prefix + ".f_s", ad::stack_rows(subject_encodings));

    std::vector<double> unions, geoms;
    unions.reserve(static_cast<size_t>(n) * cfg.union_dim);
    geoms.reserve(static_cast<size_t>(n) * 12);
    Tensor frame_table = sinusoidal_embedding(cfg.max_frames, part);
    std::vector<double> frame_rows(static_cast<size_t>(n) * part);
    for (int i = 0; i < n; ++i) {
        const auto& inst = instances[static_cast<size_t>(i)];
        unions.insert(unions.end(), inst.union_feature.data(),
                      inst.union_feature.data() + inst.union_feature.numel());
        Tensor g = box_pair_features(inst.subject_box, inst.object_box);
        geoms.insert(geoms.end(), g.data(), g.data() + g.numel());
        for (int c = 0; c < part; ++c)
            frame_rows[static_cast<size_t>(i) * part + c] = frame_table(inst.frame, c);
    }
    auto spatial = ad::add(ad::constant(Tensor::from_data({n, cfg.union_dim}, std::move(unions))),
                           linear(ctx, prefix + ".f_box",
                                  ad::constant(Tensor::from_data({n, 12}, std::move(geoms)))));
    auto spatial_part = linear(ctx, prefix + ".f_u", spatial);
    auto frame_part = ad::constant(Tensor::from_data({n, part}, std::move(frame_rows)));
    return ad::concat_cols(ad::concat_cols(subj_part, spatial_part), frame_part);
}

DebiasPlan plan_debias(const CorrelationStore& store,
                       const std::vector<RelationInstance>& instances,
                       const Tensor& cross_mask) {
    const int n = static_cast<int>(instances.size());
    if (cross_mask.ndim() != 2 || cross_mask.dim(0) != n || cross_mask.dim(1) != n)
        throw std::invalid_argument("plan_debias: mask shape mismatch");
    const double eta = store.eta();

    std::vector<char> key_stored(static_cast<size_t>(n), 0);
    std::vector<double> key_value(static_cast<size_t>(n), 0.0);
    bool any = false;
    for (int k = 0; k < n; ++k) {
        const auto& inst = instances[static_cast<size_t>(k)];
        double sum = 0.0;
        int found = 0;
        for (int p : inst.predicates) {
            TripletKey key{inst.subject_class, p, inst.object_class};
            if (store.has(key)) {
                sum += store.get(key);
                ++found;
            }
        }
        if (found > 0) {
            key_stored[static_cast<size_t>(k)] = 1;
            key_value[static_cast<size_t>(k)] = sum / found;
            any = true;
        }
    }

    DebiasPlan plan;
    plan.active = any;
    if (!any) return plan;
    std::vector<double> keep(static_cast<size_t>(n) * n, 1.0);
    std::vector<double> addend(static_cast<size_t>(n) * n, 0.0);
    const double* m = cross_mask.data();
    for (int q = 0; q < n; ++q)
        for (int k = 0; k < n; ++k) {
            const size_t idx = static_cast<size_t>(q) * n + k;
            if (m[idx] != 0.0 && key_stored[static_cast<size_t>(k)]) {
                keep[idx] = eta;
                addend[idx] = (1.0 - eta) * key_value[static_cast<size_t>(k)];
            }
        }
    plan.keep = Tensor::from_data({n, n}, std::move(keep));
    plan.addend = Tensor::from_data({n, n}, std::move(addend));
    return plan;
}

ad::VarPtr apply_debias(const ad::VarPtr& rows, const DebiasPlan& plan) {
    if (!plan.active) return rows;
    if (rows->value.shape() != plan.keep.shape())
        throw std::invalid_argument("apply_debias: plan shape mismatch");
    auto blended = ad::add(ad::mul(rows, ad::constant(plan.keep)), ad::constant(plan.addend));
    return ad::div_rows(blended, ad::rowsum(blended));
}

DecodedPredicates decode_predicates(ParamContext& ctx, const std::string& prefix,
                                    const RelrepConfig& cfg,
                                    const std::vector<RelationInstance>& instances,
                                    const std::vector<ad::VarPtr>& subject_encodings,
                                    const std::vector<ad::VarPtr>& object_encodings,
                                    const DebiasOptions& debias, const DropoutState& drop) {
    validate(cfg);
    validate_instances(cfg, instances, subject_encodings);
    if (object_encodings.size() != instances.size())
        throw std::invalid_argument("relrep: one object encoding per instance required");
    const int n = static_cast<int>(instances.size());

    auto memory = build_relation_features(ctx, prefix, cfg, instances, subject_encodings);
    Tensor enc_mask = causal_mask(n);
    for (int i = 0; i < cfg.enc_layers; ++i)
        memory = encoder_layer(ctx, prefix + ".enc.layer" + std::to_string(i), memory,
                               enc_mask, cfg.heads, drop);

    auto queries = linear(ctx, prefix + ".query",
                          ad::concat_cols(ad::stack_rows(subject_encodings),
                                          ad::stack_rows(object_encodings)));

    const std::vector<int> frames = instance_frames(instances);
    Tensor self_mask = causal_mask(n);
    Tensor cross_mask = window_mask(frames, frames, cfg.window);

    // Blending happens only in training once the store holds a committed
    // epoch; observations accumulate in every training pass so the first
    // committed epoch records the raw attention means.
    const bool may_blend = debias.store != nullptr && debias.training && debias.enabled &&
                           debias.store->epoch() >= 1;
    const bool accumulate = debias.store != nullptr && debias.training && debias.enabled;

    DebiasPlan plan;
    if (may_blend) plan = plan_debias(*debias.store, instances, cross_mask);

    AttentionHook cross_hook;
    std::vector<Tensor> observed;
    if (accumulate) {
        cross_hook = [&observed, &plan](const ad::VarPtr& rows, int) {
            if (!plan.active) {
                observed.push_back(rows->value);
                return rows;
            }
            auto blended = ad::add(ad::mul(rows, ad::constant(plan.keep)),
                                   ad::constant(plan.addend));
            observed.push_back(blended->value);
            return ad::div_rows(blended, ad::rowsum(blended));
        };
    }

    auto x = queries;
    for (int i = 0; i < cfg.dec_layers; ++i)
        x = decoder_layer(ctx, prefix + ".dec.layer" + std::to_string(i), x, memory,
                          self_mask, cross_mask, cfg.heads, drop, cross_hook);

    if (accumulate && !observed.empty()) {
        std::vector<double> avg(static_cast<size_t>(n) * n, 0.0);
        for (const Tensor& t : observed)
            for (int i = 0; i < t.numel(); ++i) avg[static_cast<size_t>(i)] += t.data()[i];
        for (auto& v : avg) v /= static_cast<double>(observed.size());
        const double* m = cross_mask.data();
        for (int q = 0; q < n; ++q)
            for (int k = 0; k < n; ++k) {
                if (m[static_cast<size_t>(q) * n + k] == 0.0) continue;
                const auto& inst = instances[static_cast<size_t>(k)];
                for (int p : inst.predicates)
                    debias.store->observe({inst.subject_class, p, inst.object_class},
                                          avg[static_cast<size_t>(q) * n + k]);
            }
    }

    return {x, instances};
}

}  // namespace flocode
