#include "flocode/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "flocode/flowwarp.hpp"
#include "flocode/serialize.hpp"

namespace flocode {

namespace {

ad::VarPtr zero_scalar() { return ad::constant(Tensor::zeros({1, 1})); }

int object_index_of(const VideoFrame& frame, int id) {
    for (size_t i = 0; i < frame.objects.size(); ++i)
        if (frame.objects[i].id == id) return static_cast<int>(i);
    return -1;
}

bool prediction_before(const PredTriplet& a, const PredTriplet& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.subj_id != b.subj_id) return a.subj_id < b.subj_id;
    if (a.obj_id != b.obj_id) return a.obj_id < b.obj_id;
    return a.predicate < b.predicate;
}

/// One candidate relation with the differentiable encodings of both ends.
struct PendingInstance {
    RelationInstance inst;
    ad::VarPtr subj_enc;
    ad::VarPtr obj_enc;
};

/// Encodes every object sequence of `video` and returns the per-detection
/// row handles keyed by (frame, object index), plus the stacked alignment
/// loss inputs.
struct EncodedVideo {
    std::map<std::pair<int, int>, ad::VarPtr> row_of;
    ad::VarPtr all_rows;  // [total_objects, model_dim]
    std::vector<int> all_classes;
};

EncodedVideo encode_video(ParamContext& ctx, const TrainConfig& cfg, const VideoSample& video,
                          const DropoutState& drop) {
    std::vector<Tensor> steps;
    steps.reserve(video.frames.size());
    for (const VideoFrame& f : video.frames) steps.push_back(f.flow);
    FlowProvider flows(std::move(steps));

    SequenceOptions so;
    so.grid = cfg.model.pool_grid;
    so.flatten = true;
    so.by_instance = true;
    so.warp = cfg.use_tfod;
    std::vector<ObjectSequence> seqs = build_object_sequences(video, flows, so);
    if (seqs.empty()) throw std::invalid_argument("video has no objects to encode");

    EncodedVideo out;
    for (const ObjectSequence& seq : seqs) {
        EncodedSequence enc = tenc_forward(ctx, "tenc", cfg.model.tenc, seq, drop);
        const int len = enc.rows->value.dim(0);
        for (int r = 0; r < len; ++r) {
            out.row_of[{enc.frames[static_cast<size_t>(r)],
                        enc.object_indices[static_cast<size_t>(r)]}] = ad::row(enc.rows, r);
            out.all_classes.push_back(enc.class_id);
        }
        out.all_rows = out.all_rows ? ad::concat_rows(out.all_rows, enc.rows) : enc.rows;
    }
    return out;
}

RelationInstance make_instance(const TrainConfig& cfg, const VideoFrame& frame, int t,
                               int subj_idx, int obj_idx, std::vector<int> predicates) {
    const GtObject& s = frame.objects[static_cast<size_t>(subj_idx)];
    const GtObject& o = frame.objects[static_cast<size_t>(obj_idx)];
    RelationInstance inst;
    inst.frame = t;
    inst.subject_id = s.id;
    inst.object_id = o.id;
    inst.subject_class = s.class_id;
    inst.object_class = o.class_id;
    inst.predicates = std::move(predicates);
    inst.subject_box = s.box;
    inst.object_box = o.box;
    inst.union_feature =
        roi_pool(frame.feature_map, union_box(s.box, o.box), cfg.model.pool_grid, true);
    if (inst.union_feature.numel() != cfg.model.relrep.union_dim)
        throw std::invalid_argument("union feature width does not match the relation config");
    return inst;
}

/// Decodes instance groups subject by subject and appends the mixture
/// parameters (and labels when training) for every decoded relation.
void decode_groups(ParamContext& ctx, const TrainConfig& cfg,
                   std::map<int, std::vector<PendingInstance>>& groups,
                   const DebiasOptions& debias, const DropoutState& drop,
                   std::vector<MixtureParams>* batch, std::vector<std::vector<int>>* labels,
                   std::vector<RelationInstance>* decoded_instances) {
    for (auto& [subject_id, pending] : groups) {
        std::sort(pending.begin(), pending.end(),
                  [](const PendingInstance& a, const PendingInstance& b) {
                      if (a.inst.frame != b.inst.frame) return a.inst.frame < b.inst.frame;
                      return a.inst.object_id < b.inst.object_id;
                  });
        std::vector<RelationInstance> instances;
        std::vector<ad::VarPtr> subj_encs, obj_encs;
        instances.reserve(pending.size());
        for (PendingInstance& p : pending) {
            instances.push_back(p.inst);
            subj_encs.push_back(p.subj_enc);
            obj_encs.push_back(p.obj_enc);
        }
        DecodedPredicates dec = decode_predicates(ctx, "rel", cfg.model.relrep, instances,
                                                  subj_encs, obj_encs, debias, drop);
        const int n = dec.rows->value.dim(0);
        for (int i = 0; i < n; ++i) {
            batch->push_back(mixture_heads(ctx, "mln", cfg.model.mln, ad::row(dec.rows, i)));
            if (labels) labels->push_back(dec.instances[static_cast<size_t>(i)].predicates);
            if (decoded_instances)
                decoded_instances->push_back(dec.instances[static_cast<size_t>(i)]);
        }
    }
}

ad::VarPtr batch_mean(const std::vector<ad::VarPtr>& terms) {
    if (terms.empty()) return zero_scalar();
    return ad::scale(ad::add_many(terms), 1.0 / static_cast<double>(terms.size()));
}

void write_params(std::ostream& out, const ParamStore& store) {
    io::write_u32(out, static_cast<uint32_t>(store.size()));
    for (const auto& [name, value] : store) {
        io::write_string(out, name);
        io::write_tensor(out, value);
    }
}

ParamStore read_params(std::istream& in) {
    ParamStore store;
    const uint32_t count = io::read_u32(in);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = io::read_string(in);
        store.insert(name, io::read_tensor(in));
    }
    return store;
}

AdamWConfig optimizer_config(const TrainConfig& cfg) {
    AdamWConfig oc;
    oc.lr = cfg.lr_main;
    oc.weight_decay = cfg.weight_decay;
    return oc;
}

constexpr const char kCheckpointMagic[4] = {'F', 'L', 'C', 'D'};
constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

void validate(const LossConfig& cfg) {
    if (!(cfg.lambda1 >= 0.0) || !(cfg.lambda2 >= 0.0))
        throw std::invalid_argument("loss weights must be non-negative");
}

double total_loss(double l_o, double l_mal, double l_kmcl, double sigma_e, double sigma_a,
                  const LossConfig& cfg) {
    validate(cfg);
    for (double v : {l_o, l_mal, l_kmcl, sigma_e, sigma_a})
        if (!std::isfinite(v)) throw std::invalid_argument("loss component must be finite");
    const double sign = cfg.penalize_epistemic ? 1.0 : -1.0;
    return l_o + l_mal + l_kmcl + sign * cfg.lambda1 * sigma_e + cfg.lambda2 * sigma_a;
}

ad::VarPtr total_loss_ad(const ad::VarPtr& l_o, const ad::VarPtr& l_mal,
                         const ad::VarPtr& l_kmcl, const ad::VarPtr& sigma_e,
                         const ad::VarPtr& sigma_a, const LossConfig& cfg) {
    validate(cfg);
    // Scalar terms arrive as [1] or [1,1] depending on which reduction
    // produced them; unify before combining.
    auto as_scalar = [](const ad::VarPtr& v) {
        if (v->value.numel() != 1) throw std::invalid_argument("loss component must be scalar");
        return v->value.ndim() == 2 ? v : ad::reshape(v, {1, 1});
    };
    const double sign = cfg.penalize_epistemic ? 1.0 : -1.0;
    ad::VarPtr out = ad::add(ad::add(as_scalar(l_o), as_scalar(l_mal)), as_scalar(l_kmcl));
    out = ad::add(out, ad::scale(as_scalar(sigma_e), sign * cfg.lambda1));
    return ad::add(out, ad::scale(as_scalar(sigma_a), cfg.lambda2));
}

EmaTeacher::EmaTeacher(double alpha, std::string prefix)
    : alpha_(alpha), prefix_(std::move(prefix)) {
    if (!(alpha_ >= 0.0 && alpha_ <= 1.0))
        throw std::invalid_argument("teacher decay must lie in [0, 1]");
}

void EmaTeacher::initialize_from(const ParamStore& student) {
    params_ = ParamStore();
    for (const auto& [name, value] : student)
        if (name.rfind(prefix_, 0) == 0) params_.insert(name, value);
}

void EmaTeacher::update(const ParamStore& student) {
    for (const auto& [name, old_value] : params_) {
        if (!student.has(name))
            throw std::invalid_argument("teacher parameter missing from student: " + name);
        const Tensor& s = student.get(name);
        if (s.numel() != old_value.numel())
            throw std::invalid_argument("teacher/student shape mismatch: " + name);
        std::vector<double> mixed(static_cast<size_t>(s.numel()));
        for (int i = 0; i < s.numel(); ++i)
            mixed[static_cast<size_t>(i)] =
                alpha_ * old_value.data()[i] + (1.0 - alpha_) * s.data()[i];
        params_.set(name, Tensor::from_data_unchecked(old_value.shape(), std::move(mixed)));
    }
}

void EmaTeacher::save(std::ostream& out) const {
    io::write_f64(out, alpha_);
    io::write_string(out, prefix_);
    write_params(out, params_);
}

EmaTeacher EmaTeacher::load(std::istream& in) {
    EmaTeacher t;
    t.alpha_ = io::read_f64(in);
    t.prefix_ = io::read_string(in);
    t.params_ = read_params(in);
    return t;
}

void validate(const ModelConfig& cfg) {
    validate(cfg.tenc);
    validate(cfg.relrep);
    validate(cfg.mln);
    validate(cfg.kmcl);
    if (cfg.object_classes < 2) throw std::invalid_argument("need at least two object classes");
    if (cfg.feature_dim < 1) throw std::invalid_argument("feature width must be positive");
    if (cfg.pool_grid < 1) throw std::invalid_argument("pooling grid must be positive");
    if (cfg.subject_class < 0 || cfg.subject_class >= cfg.object_classes)
        throw std::invalid_argument("subject class outside the object label space");
    if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0))
        throw std::invalid_argument("attention blend weight must lie in [0, 1]");
    if (cfg.relrep.object_dim != cfg.tenc.model_dim)
        throw std::invalid_argument("relation object width must match the encoder width");
    if (cfg.mln.embed_dim != cfg.relrep.model_dim)
        throw std::invalid_argument("mixture input width must match the decoder width");
    if (cfg.mln.num_classes < 1) throw std::invalid_argument("need at least one predicate class");
}

void validate(const TrainConfig& cfg) {
    validate(cfg.model);
    validate(cfg.loss);
    cfg.det_noise.validate();
    if (cfg.epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
    if (!(cfg.lr_main > 0.0) || !(cfg.lr_debias > 0.0))
        throw std::invalid_argument("learning rates must be positive");
    if (!(cfg.weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be >= 0");
    if (!(cfg.plateau_factor > 0.0 && cfg.plateau_factor < 1.0))
        throw std::invalid_argument("plateau factor must lie in (0, 1)");
    if (cfg.plateau_patience < 1) throw std::invalid_argument("plateau patience must be >= 1");
    if (!(cfg.ema_alpha >= 0.0 && cfg.ema_alpha <= 1.0))
        throw std::invalid_argument("teacher decay must lie in [0, 1]");
    if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0))
        throw std::invalid_argument("holdout fraction must lie in [0, 1)");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
        throw std::invalid_argument("dropout must lie in [0, 1)");
}

TrainConfig default_train_config(Task task) {
    TrainConfig cfg;
    cfg.task = task;
    cfg.model.mln.mixtures = task == Task::SGCLS ? 4 : 6;
    return cfg;
}

ad::VarPtr video_loss(ParamContext& ctx, const TrainConfig& cfg, const EtfClassifier& etf,
                      const VideoSample& video, CorrelationStore* store, bool training,
                      const DropoutState& drop, VideoLossBreakdown* breakdown) {
    if (video.frames.empty()) throw std::invalid_argument("video has no frames");
    const DropoutState active_drop = training ? drop : DropoutState{};
    EncodedVideo enc = encode_video(ctx, cfg, video, active_drop);
    ad::VarPtr l_o = object_loss_rows(enc.all_rows, enc.all_classes, etf);

    std::map<int, std::vector<PendingInstance>> groups;
    for (size_t t = 0; t < video.frames.size(); ++t) {
        const VideoFrame& frame = video.frames[t];
        for (const GtTriplet& g : frame.triplets) {
            const int si = object_index_of(frame, g.subj_id);
            const int oi = object_index_of(frame, g.obj_id);
            if (si < 0 || oi < 0)
                throw std::invalid_argument("relation references an object missing from its frame");
            PendingInstance p;
            p.inst = make_instance(cfg, frame, static_cast<int>(t), si, oi, g.predicates);
            p.subj_enc = enc.row_of.at({static_cast<int>(t), si});
            p.obj_enc = enc.row_of.at({static_cast<int>(t), oi});
            groups[g.subj_id].push_back(std::move(p));
        }
    }

    DebiasOptions debias;
    debias.store = store;
    debias.training = training;
    debias.enabled = cfg.use_debias;
    std::vector<MixtureParams> batch;
    std::vector<std::vector<int>> labels;
    decode_groups(ctx, cfg, groups, debias, active_drop, &batch, &labels, nullptr);

    ad::VarPtr l_mal = batch.empty()
                           ? zero_scalar()
                           : mal_loss(batch, labels, cfg.model.mln.num_classes);
    ad::VarPtr l_kmcl = (cfg.use_kmcl && batch.size() >= 2)
                            ? kmcl_loss(batch, labels, cfg.model.mln.num_classes, cfg.model.kmcl)
                            : zero_scalar();
    std::vector<ad::VarPtr> eps, als;
    eps.reserve(batch.size());
    als.reserve(batch.size());
    for (const MixtureParams& mp : batch) {
        eps.push_back(epistemic(mp));
        als.push_back(aleatoric(mp));
    }
    ad::VarPtr sigma_e = batch_mean(eps);
    ad::VarPtr sigma_a = batch_mean(als);
    ad::VarPtr total = total_loss_ad(l_o, l_mal, l_kmcl, sigma_e, sigma_a, cfg.loss);

    if (breakdown) {
        breakdown->l_o = l_o->value.item();
        breakdown->l_mal = l_mal->value.item();
        breakdown->l_kmcl = l_kmcl->value.item();
        breakdown->sigma_e = sigma_e->value.item();
        breakdown->sigma_a = sigma_a->value.item();
        breakdown->total = total->value.item();
        breakdown->relations = static_cast<int>(batch.size());
        breakdown->objects = static_cast<int>(enc.all_classes.size());
    }
    return total;
}

VideoSample detections_to_video(const VideoSample& source,
                                const std::vector<FrameDetections>& detections,
                                double iou_threshold) {
    if (detections.size() != source.frames.size())
        throw std::invalid_argument("one detection set per frame required");
    VideoSample out;
    out.frames.resize(source.frames.size());
    std::vector<GtObject> prev;
    int next_track = 0;
    for (size_t t = 0; t < source.frames.size(); ++t) {
        VideoFrame& vf = out.frames[t];
        vf.feature_map = source.frames[t].feature_map;
        vf.flow = source.frames[t].flow;
        std::vector<GtObject> cur = detections[t].objects;
        if (t == 0) {
            for (GtObject& o : cur) o.id = next_track++;
        } else {
            std::vector<std::pair<int, int>> links = match_pairs(prev, cur, iou_threshold);
            std::map<int, int> track_of;  // per-frame detection id -> track id
            for (const auto& [prev_id, cur_id] : links) track_of[cur_id] = prev_id;
            for (GtObject& o : cur) {
                auto it = track_of.find(o.id);
                o.id = it != track_of.end() ? it->second : next_track++;
            }
        }
        vf.objects = std::move(cur);
        prev = vf.objects;
    }
    return out;
}

std::vector<PredTriplet> constrained_graph(const std::vector<PredTriplet>& predictions) {
    std::map<std::pair<int, int>, PredTriplet> best;
    for (const PredTriplet& p : predictions) {
        auto key = std::make_pair(p.subj_id, p.obj_id);
        auto it = best.find(key);
        if (it == best.end() || prediction_before(p, it->second)) best[key] = p;
    }
    std::vector<PredTriplet> out;
    out.reserve(best.size());
    for (const auto& [key, p] : best) out.push_back(p);
    std::sort(out.begin(), out.end(), prediction_before);
    return out;
}

std::vector<std::vector<PredTriplet>> infer_video(const TrainConfig& cfg,
                                                  const ParamStore& params,
                                                  const EtfClassifier& etf,
                                                  const VideoSample& video, uint64_t det_seed) {
    validate(cfg);
    VideoSample working;
    const VideoSample* src = &video;
    if (cfg.task == Task::SGDET) {
        DetectionNoise noise = cfg.det_noise;
        noise.seed ^= det_seed;
        working = detections_to_video(video, simulate_detections(video, noise,
                                                                 cfg.model.pool_grid));
        src = &working;
    }

    std::vector<std::vector<PredTriplet>> out(video.frames.size());
    bool any_object = false;
    for (const VideoFrame& f : src->frames) any_object = any_object || !f.objects.empty();
    if (!any_object) return out;

    ParamContext ctx(params);
    EncodedVideo enc = encode_video(ctx, cfg, *src, DropoutState{});

    // Task-visible class per detection: given for PREDCLS, read off the
    // prototype classifier otherwise.
    std::map<std::pair<int, int>, int> visible_class;
    for (size_t t = 0; t < src->frames.size(); ++t) {
        const VideoFrame& frame = src->frames[t];
        for (size_t i = 0; i < frame.objects.size(); ++i) {
            const auto key = std::make_pair(static_cast<int>(t), static_cast<int>(i));
            visible_class[key] = cfg.task == Task::PREDCLS
                                     ? frame.objects[i].class_id
                                     : classify_object(enc.row_of.at(key)->value, etf);
        }
    }

    std::map<int, std::vector<PendingInstance>> groups;
    for (size_t t = 0; t < src->frames.size(); ++t) {
        const VideoFrame& frame = src->frames[t];
        for (size_t si = 0; si < frame.objects.size(); ++si) {
            if (visible_class.at({static_cast<int>(t), static_cast<int>(si)}) !=
                cfg.model.subject_class)
                continue;
            for (size_t oi = 0; oi < frame.objects.size(); ++oi) {
                if (oi == si) continue;
                PendingInstance p;
                p.inst = make_instance(cfg, frame, static_cast<int>(t), static_cast<int>(si),
                                       static_cast<int>(oi), {});
                p.inst.subject_class =
                    visible_class.at({static_cast<int>(t), static_cast<int>(si)});
                p.inst.object_class =
                    visible_class.at({static_cast<int>(t), static_cast<int>(oi)});
                p.subj_enc = enc.row_of.at({static_cast<int>(t), static_cast<int>(si)});
                p.obj_enc = enc.row_of.at({static_cast<int>(t), static_cast<int>(oi)});
                groups[p.inst.subject_id].push_back(std::move(p));
            }
        }
    }

    // Inference always reads raw attention; no store, no blending.
    DebiasOptions debias;
    debias.store = nullptr;
    debias.training = false;
    debias.enabled = false;
    std::vector<MixtureParams> batch;
    std::vector<RelationInstance> decoded;
    decode_groups(ctx, cfg, groups, debias, DropoutState{}, &batch, nullptr, &decoded);

    for (size_t i = 0; i < batch.size(); ++i) {
        const RelationInstance& inst = decoded[i];
        Tensor scores = predict_scores(batch[i]);
        for (int p = 0; p < scores.numel(); ++p) {
            PredTriplet pred;
            pred.subj_id = inst.subject_id;
            pred.obj_id = inst.object_id;
            pred.subj_class = inst.subject_class;
            pred.obj_class = inst.object_class;
            pred.subj_box = inst.subject_box;
            pred.obj_box = inst.object_box;
            pred.predicate = p;
            pred.confidence = scores.data()[p];
            out[static_cast<size_t>(inst.frame)].push_back(pred);
        }
    }
    for (auto& frame_preds : out)
        std::sort(frame_preds.begin(), frame_preds.end(), prediction_before);
    return out;
}

EtfClassifier make_model_classifier(const TrainConfig& cfg) {
    return make_etf(cfg.model.object_classes, cfg.model.tenc.model_dim,
                    mix64(cfg.seed ^ 0x455446ULL));
}

EvalReport evaluate_with_params(const TrainConfig& cfg, const ParamStore& params,
                                const EtfClassifier& etf, const Dataset& videos, Regime regime,
                                const std::vector<long>& train_counts) {
    std::vector<EvalFrame> frames;
    for (size_t i = 0; i < videos.size(); ++i) {
        const VideoSample& video = videos[i];
        std::vector<std::vector<PredTriplet>> preds =
            infer_video(cfg, params, etf, video, mix64(cfg.seed ^ (0xEA10000ULL + i)));
        for (size_t t = 0; t < video.frames.size(); ++t) {
            EvalFrame f;
            f.gt_objects = video.frames[t].objects;
            f.gt_triplets = video.frames[t].triplets;
            f.predictions = preds[t];
            frames.push_back(std::move(f));
        }
    }
    std::vector<Bucket> buckets = split_head_body_tail(train_counts);
    return evaluate(frames, cfg.task, regime, {10, 20, 50}, buckets,
                    cfg.model.mln.num_classes);
}

std::string metrics_to_csv(const std::vector<EpochMetrics>& history) {
    std::string out =
        "epoch,L_o,L_MAL,L_KMCL,sigma_e,sigma_a,total,R@10,R@20,R@50,mR@10,mR@20,mR@50\n";
    char buf[64];
    for (const EpochMetrics& m : history) {
        out += std::to_string(m.epoch);
        for (double v : {m.l_o, m.l_mal, m.l_kmcl, m.sigma_e, m.sigma_a, m.total, m.r10, m.r20,
                         m.r50, m.mr10, m.mr20, m.mr50}) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void Checkpoint::save(std::ostream& out) const {
    out.write(kCheckpointMagic, 4);
    io::write_u32(out, kCheckpointVersion);
    io::write_i64(out, epoch);
    io::write_i64(out, static_cast<int64_t>(config_hash));
    write_params(out, student);
    teacher.save(out);
    io::write_string(out, correlation);
    io::write_string(out, optimizer);
    io::write_string(out, scheduler);
    io::write_string(out, rng_state);
    io::write_u32(out, static_cast<uint32_t>(predicate_counts.size()));
    for (long c : predicate_counts) io::write_i64(out, c);
    io::write_u32(out, static_cast<uint32_t>(history.size()));
    for (const EpochMetrics& m : history) {
        io::write_i64(out, m.epoch);
        for (double v : {m.l_o, m.l_mal, m.l_kmcl, m.sigma_e, m.sigma_a, m.total, m.r10, m.r20,
                         m.r50, m.mr10, m.mr20, m.mr50})
            io::write_f64(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint write failed");
}

Checkpoint Checkpoint::load(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kCheckpointMagic, 4))
        throw std::runtime_error("not a checkpoint file");
    const uint32_t version = io::read_u32(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");
    Checkpoint ck;
    ck.epoch = io::read_i64(in);
    ck.config_hash = static_cast<uint64_t>(io::read_i64(in));
    ck.student = read_params(in);
    ck.teacher = EmaTeacher::load(in);
    ck.correlation = io::read_string(in);
    ck.optimizer = io::read_string(in);
    ck.scheduler = io::read_string(in);
    ck.rng_state = io::read_string(in);
    const uint32_t n_counts = io::read_u32(in);
    ck.predicate_counts.resize(n_counts);
    for (uint32_t i = 0; i < n_counts; ++i)
        ck.predicate_counts[i] = static_cast<long>(io::read_i64(in));
    const uint32_t rows = io::read_u32(in);
    ck.history.resize(rows);
    for (uint32_t i = 0; i < rows; ++i) {
        EpochMetrics& m = ck.history[i];
        m.epoch = static_cast<int>(io::read_i64(in));
        for (double* v : {&m.l_o, &m.l_mal, &m.l_kmcl, &m.sigma_e, &m.sigma_a, &m.total, &m.r10,
                          &m.r20, &m.r50, &m.mr10, &m.mr20, &m.mr50})
            *v = io::read_f64(in);
    }
    return ck;
}

Trainer::Trainer(TrainConfig cfg, Dataset dataset)
    : cfg_(std::move(cfg)),
      data_(std::move(dataset)),
      store_(cfg_.model.eta),
      opt_(optimizer_config(cfg_)),
      scheduler_(cfg_.plateau_factor, cfg_.plateau_patience),
      run_rng_(mix64(cfg_.seed ^ 0x52554e5354524dULL)) {
    validate(cfg_);
    if (data_.empty()) throw std::invalid_argument("training dataset is empty");

    // Deterministic holdout split, independent of the run stream so a resume
    // recomputes the identical partition from the config alone.
    const int n = static_cast<int>(data_.size());
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng split_rng(mix64(cfg_.seed ^ 0x53504c4954ULL));
    for (int i = n - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)],
                  order[static_cast<size_t>(split_rng.uniform_int(0, i))]);
    const int n_val = static_cast<int>(cfg_.holdout_fraction * n);
    val_idx_.assign(order.begin(), order.begin() + n_val);
    train_idx_.assign(order.begin() + n_val, order.end());
    std::sort(val_idx_.begin(), val_idx_.end());
    std::sort(train_idx_.begin(), train_idx_.end());
    if (train_idx_.empty()) throw std::invalid_argument("holdout leaves no training videos");

    train_counts_.assign(static_cast<size_t>(cfg_.model.mln.num_classes), 0);
    for (int idx : train_idx_)
        for (const VideoFrame& f : data_[static_cast<size_t>(idx)].frames)
            for (const GtTriplet& g : f.triplets)
                for (int p : g.predicates) {
                    if (p < 0 || p >= cfg_.model.mln.num_classes)
                        throw std::invalid_argument(
                            "dataset predicate label outside the configured label space");
                    train_counts_[static_cast<size_t>(p)] += 1;
                }

    Rng init_rng(mix64(cfg_.seed ^ 0x494e4954ULL));
    init_tenc_params(params_, init_rng, "tenc", cfg_.model.tenc, cfg_.model.feature_dim);
    init_relrep_params(params_, init_rng, "rel", cfg_.model.relrep);
    init_mln_params(params_, init_rng, "mln", cfg_.model.mln);
    etf_ = make_model_classifier(cfg_);

    teacher_ = EmaTeacher(cfg_.use_ema ? cfg_.ema_alpha : 0.0, "rel");
    teacher_.initialize_from(params_);
    opt_.set_group_lr("rel", cfg_.lr_debias);
}

Trainer::Trainer(TrainConfig cfg, Dataset dataset, const Checkpoint& resume_from)
    : Trainer(std::move(cfg), std::move(dataset)) {
    if (cfg_.config_hash != 0 && resume_from.config_hash != 0 &&
        cfg_.config_hash != resume_from.config_hash)
        throw std::invalid_argument("checkpoint was produced by a different configuration");
    params_ = resume_from.student;
    teacher_ = resume_from.teacher;
    store_ = CorrelationStore::deserialize(resume_from.correlation);
    {
        std::istringstream in(resume_from.optimizer);
        opt_ = AdamW::load(in);
    }
    {
        std::istringstream in(resume_from.scheduler);
        scheduler_ = PlateauScheduler::load(in);
    }
    run_rng_.restore_state(resume_from.rng_state);
    epoch_ = static_cast<int>(resume_from.epoch);
    history_ = resume_from.history;
}

EpochMetrics Trainer::run_epoch() {
    std::vector<int> order = train_idx_;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)],
                  order[static_cast<size_t>(run_rng_.uniform_int(0, i))]);

    DropoutState drop;
    drop.rate = cfg_.dropout;
    drop.rng = &run_rng_;

    EpochMetrics m;
    for (int idx : order) {
        ParamContext ctx(params_);
        VideoLossBreakdown b;
        ad::VarPtr loss = video_loss(ctx, cfg_, etf_, data_[static_cast<size_t>(idx)], &store_,
                                     true, drop, &b);
        ad::backward(loss);
        opt_.step(params_, ctx.grads());
        m.l_o += b.l_o;
        m.l_mal += b.l_mal;
        m.l_kmcl += b.l_kmcl;
        m.sigma_e += b.sigma_e;
        m.sigma_a += b.sigma_a;
        m.total += b.total;
    }
    const double inv = 1.0 / static_cast<double>(order.size());
    m.l_o *= inv;
    m.l_mal *= inv;
    m.l_kmcl *= inv;
    m.sigma_e *= inv;
    m.sigma_a *= inv;
    m.total *= inv;

    store_.commit_epoch(epoch_);
    teacher_.update(params_);
    epoch_ += 1;
    m.epoch = epoch_;

    if (!val_idx_.empty()) {
        EvalReport rep = evaluate_videos(val_idx_, Regime::WITH_CONSTRAINT);
        m.r10 = rep.recall.at(10);
        m.r20 = rep.recall.at(20);
        m.r50 = rep.recall.at(50);
        m.mr10 = rep.mean_recall.at(10).mean;
        m.mr20 = rep.mean_recall.at(20).mean;
        m.mr50 = rep.mean_recall.at(50).mean;
        if (scheduler_.observe(m.mr10)) {
            const double current = opt_.groups().at("rel");
            opt_.set_group_lr("rel", current * cfg_.plateau_factor);
        }
    }
    history_.push_back(m);
    return m;
}

void Trainer::run() {
    while (epoch_ < cfg_.epochs) run_epoch();
}

ParamStore Trainer::inference_params() const {
    ParamStore out = params_;
    for (const auto& [name, value] : teacher_.params()) out.set(name, value);
    return out;
}

std::vector<std::vector<PredTriplet>> Trainer::infer(const VideoSample& video,
                                                     uint64_t det_seed) const {
    return infer_video(cfg_, inference_params(), etf_, video, det_seed);
}

EvalReport Trainer::evaluate_videos(const std::vector<int>& indices, Regime regime) const {
    Dataset videos;
    videos.reserve(indices.size());
    for (int idx : indices) videos.push_back(data_[static_cast<size_t>(idx)]);
    return evaluate_with_params(cfg_, inference_params(), etf_, videos, regime, train_counts_);
}

EvalReport Trainer::evaluate_holdout(Regime regime) const {
    if (val_idx_.empty()) throw std::logic_error("no holdout videos were reserved");
    return evaluate_videos(val_idx_, regime);
}

EvalReport Trainer::evaluate_dataset(const Dataset& videos, Regime regime) const {
    return evaluate_with_params(cfg_, inference_params(), etf_, videos, regime, train_counts_);
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ck;
    ck.epoch = epoch_;
    ck.config_hash = cfg_.config_hash;
    ck.student = params_;
    ck.teacher = teacher_;
    ck.correlation = store_.serialize();
    {
        std::ostringstream out;
        opt_.save(out);
        ck.optimizer = out.str();
    }
    {
        std::ostringstream out;
        scheduler_.save(out);
        ck.scheduler = out.str();
    }
    ck.rng_state = run_rng_.serialize_state();
    ck.predicate_counts = train_counts_;
    ck.history = history_;
    return ck;
}

}  // namespace flocode
