#include "flocode/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace flocode {

std::string task_name(Task task) {
    switch (task) {
        case Task::PREDCLS: return "predcls";
        case Task::SGCLS: return "sgcls";
        case Task::SGDET: return "sgdet";
    }
    throw std::logic_error("unknown task");
}

std::string regime_name(Regime regime) {
    return regime == Regime::WITH_CONSTRAINT ? "with_constraint" : "no_constraints";
}

Task parse_task(const std::string& name) {
    if (name == "predcls") return Task::PREDCLS;
    if (name == "sgcls") return Task::SGCLS;
    if (name == "sgdet") return Task::SGDET;
    throw std::invalid_argument("unknown task: " + name + " (expected predcls|sgcls|sgdet)");
}

Regime parse_regime(const std::string& name) {
    if (name == "with_constraint") return Regime::WITH_CONSTRAINT;
    if (name == "no_constraints") return Regime::NO_CONSTRAINTS;
    throw std::invalid_argument("unknown regime: " + name +
                                " (expected with_constraint|no_constraints)");
}

bool match_triplet(const PredTriplet& pred, const GtObject& gt_subj, const GtObject& gt_obj,
                   int gt_predicate, Task task) {
    if (pred.predicate != gt_predicate) return false;
    switch (task) {
        case Task::PREDCLS:
            return pred.subj_id == gt_subj.id && pred.obj_id == gt_obj.id;
        case Task::SGCLS:
            return pred.subj_id == gt_subj.id && pred.obj_id == gt_obj.id &&
                   pred.subj_class == gt_subj.class_id && pred.obj_class == gt_obj.class_id;
        case Task::SGDET:
            return pred.subj_class == gt_subj.class_id && pred.obj_class == gt_obj.class_id &&
                   iou(pred.subj_box, gt_subj.box) >= 0.5 && iou(pred.obj_box, gt_obj.box) >= 0.5;
    }
    throw std::logic_error("unknown task");
}

namespace {

bool ranks_before(const PredTriplet& a, const PredTriplet& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.subj_id != b.subj_id) return a.subj_id < b.subj_id;
    if (a.obj_id != b.obj_id) return a.obj_id < b.obj_id;
    return a.predicate < b.predicate;
}

/// Regime filter + deterministic ranking, truncated to the top k.
std::vector<PredTriplet> ranked_candidates(const EvalFrame& frame, int k, Regime regime) {
    std::vector<PredTriplet> pool;
    if (regime == Regime::NO_CONSTRAINTS) {
        pool = frame.predictions;
    } else {
        std::map<std::pair<int, int>, PredTriplet> best;
        for (const PredTriplet& p : frame.predictions) {
            auto key = std::make_pair(p.subj_id, p.obj_id);
            auto it = best.find(key);
            if (it == best.end() || ranks_before(p, it->second)) best[key] = p;
        }
        for (const auto& [key, p] : best) pool.push_back(p);
    }
    std::stable_sort(pool.begin(), pool.end(), ranks_before);
    if (static_cast<int>(pool.size()) > k) pool.resize(static_cast<size_t>(k));
    return pool;
}

const GtObject& find_object(const EvalFrame& frame, int id) {
    for (const GtObject& obj : frame.gt_objects)
        if (obj.id == id) return obj;
    throw std::invalid_argument("ground-truth triplet references unknown object id " +
                                std::to_string(id));
}

struct FrameTally {
    long matched = 0;
    long total = 0;
};

/// Per-frame matched/total counts, optionally restricted to one predicate
/// class (restrict < 0 scores every instance).
FrameTally tally_frame(const EvalFrame& frame, const std::vector<PredTriplet>& top, Task task,
                       int restrict_class) {
    FrameTally tally;
    for (const GtTriplet& gt : frame.gt_triplets) {
        const GtObject& subj = find_object(frame, gt.subj_id);
        const GtObject& obj = find_object(frame, gt.obj_id);
        for (int predicate : gt.predicates) {
            if (restrict_class >= 0 && predicate != restrict_class) continue;
            tally.total += 1;
            for (const PredTriplet& p : top) {
                if (match_triplet(p, subj, obj, predicate, task)) {
                    tally.matched += 1;
                    break;
                }
            }
        }
    }
    return tally;
}

}  // namespace

double recall_at_k(const std::vector<EvalFrame>& frames, int k, Regime regime, Task task) {
    if (k < 1) throw std::invalid_argument("recall cutoff must be positive");
    double sum = 0.0;
    long counted = 0;
    for (const EvalFrame& frame : frames) {
        std::vector<PredTriplet> top = ranked_candidates(frame, k, regime);
        FrameTally tally = tally_frame(frame, top, task, -1);
        if (tally.total == 0) continue;  // frames without ground truth are skipped
        sum += static_cast<double>(tally.matched) / static_cast<double>(tally.total);
        counted += 1;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

MeanRecall mean_recall_at_k(const std::vector<EvalFrame>& frames, int k, Regime regime, Task task,
                            int predicate_classes) {
    if (k < 1) throw std::invalid_argument("recall cutoff must be positive");
    if (predicate_classes < 1) throw std::invalid_argument("predicate class count must be positive");
    MeanRecall out;
    out.per_class.assign(static_cast<size_t>(predicate_classes), 0.0);
    out.present.assign(static_cast<size_t>(predicate_classes), 0);

    std::vector<double> sums(static_cast<size_t>(predicate_classes), 0.0);
    std::vector<long> frames_with(static_cast<size_t>(predicate_classes), 0);
    for (const EvalFrame& frame : frames) {
        std::vector<PredTriplet> top = ranked_candidates(frame, k, regime);
        for (int c = 0; c < predicate_classes; ++c) {
            FrameTally tally = tally_frame(frame, top, task, c);
            if (tally.total == 0) continue;
            sums[static_cast<size_t>(c)] +=
                static_cast<double>(tally.matched) / static_cast<double>(tally.total);
            frames_with[static_cast<size_t>(c)] += 1;
        }
    }
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < predicate_classes; ++c) {
        if (frames_with[static_cast<size_t>(c)] == 0) continue;
        out.present[static_cast<size_t>(c)] = 1;
        out.per_class[static_cast<size_t>(c)] =
            sums[static_cast<size_t>(c)] / static_cast<double>(frames_with[static_cast<size_t>(c)]);
        total += out.per_class[static_cast<size_t>(c)];
        present += 1;
    }
    out.mean = present == 0 ? 0.0 : total / static_cast<double>(present);
    return out;
}

std::vector<Bucket> split_head_body_tail(const std::vector<long>& train_counts,
                                         double head_fraction, double tail_fraction) {
    if (!(head_fraction > tail_fraction))
        throw std::invalid_argument("head cutoff must exceed the tail cutoff");
    if (!(tail_fraction >= 0.0)) throw std::invalid_argument("tail cutoff must be non-negative");
    long total = 0;
    for (long c : train_counts) {
        if (c < 0) throw std::invalid_argument("training counts must be non-negative");
        total += c;
    }
    std::vector<Bucket> buckets(train_counts.size(), Bucket::BODY);
    if (total == 0) return buckets;
    for (size_t i = 0; i < train_counts.size(); ++i) {
        double fraction = static_cast<double>(train_counts[i]) / static_cast<double>(total);
        if (fraction >= head_fraction)
            buckets[i] = Bucket::HEAD;
        else if (fraction <= tail_fraction)
            buckets[i] = Bucket::TAIL;
    }
    return buckets;
}

EvalReport evaluate(const std::vector<EvalFrame>& frames, Task task, Regime regime,
                    const std::vector<int>& ks, const std::vector<Bucket>& buckets,
                    int predicate_classes) {
    if (static_cast<int>(buckets.size()) != predicate_classes)
        throw std::invalid_argument("bucket partition size must equal the predicate class count");
    EvalReport report;
    report.task = task;
    report.regime = regime;
    for (int k : ks) {
        report.recall[k] = recall_at_k(frames, k, regime, task);
        report.mean_recall[k] = mean_recall_at_k(frames, k, regime, task, predicate_classes);
    }
    auto it = report.mean_recall.find(10);
    const MeanRecall& base =
        it != report.mean_recall.end()
            ? it->second
            : report.mean_recall
                  .emplace(10, mean_recall_at_k(frames, 10, regime, task, predicate_classes))
                  .first->second;
    auto aggregate = [&](Bucket which) {
        BucketRecall agg;
        double sum = 0.0;
        int n = 0;
        for (int c = 0; c < predicate_classes; ++c) {
            if (buckets[static_cast<size_t>(c)] != which) continue;
            if (!base.present[static_cast<size_t>(c)]) continue;
            sum += base.per_class[static_cast<size_t>(c)];
            n += 1;
        }
        if (n > 0) {
            agg.defined = true;
            agg.value = sum / static_cast<double>(n);
        }
        return agg;
    };
    report.head_mr10 = aggregate(Bucket::HEAD);
    report.body_mr10 = aggregate(Bucket::BODY);
    report.tail_mr10 = aggregate(Bucket::TAIL);
    return report;
}

namespace {

std::string bucket_cell(const BucketRecall& b) {
    if (!b.defined) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", b.value);
    return buf;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "task,regime,metric,k,value\n";
    const std::string prefix = task_name(report.task) + "," + regime_name(report.regime) + ",";
    for (const auto& [k, v] : report.recall) out << prefix << "recall," << k << "," << num(v) << "\n";
    for (const auto& [k, v] : report.mean_recall)
        out << prefix << "mean_recall," << k << "," << num(v.mean) << "\n";
    out << prefix << "head_mr,10," << bucket_cell(report.head_mr10) << "\n";
    out << prefix << "body_mr,10," << bucket_cell(report.body_mr10) << "\n";
    out << prefix << "tail_mr,10," << bucket_cell(report.tail_mr10) << "\n";
    out << "class,present";
    for (const auto& [k, v] : report.mean_recall) out << ",recall_at_" << k;
    out << "\n";
    if (!report.mean_recall.empty()) {
        const size_t classes = report.mean_recall.begin()->second.per_class.size();
        for (size_t c = 0; c < classes; ++c) {
            out << c << "," << static_cast<int>(report.mean_recall.begin()->second.present[c]);
            for (const auto& [k, v] : report.mean_recall) out << "," << num(v.per_class[c]);
            out << "\n";
        }
    }
    return out.str();
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["task"] = task_name(report.task);
    j["regime"] = regime_name(report.regime);
    for (const auto& [k, v] : report.recall) j["recall"][std::to_string(k)] = v;
    for (const auto& [k, v] : report.mean_recall) {
        auto& jm = j["mean_recall"][std::to_string(k)];
        jm["mean"] = v.mean;
        jm["per_class"] = v.per_class;
        std::vector<int> present(v.present.begin(), v.present.end());
        jm["present"] = present;
    }
    auto bucket = [](const BucketRecall& b) {
        nlohmann::json jb;
        jb["defined"] = b.defined;
        if (b.defined) jb["value"] = b.value;
        return jb;
    };
    j["head_mr10"] = bucket(report.head_mr10);
    j["body_mr10"] = bucket(report.body_mr10);
    j["tail_mr10"] = bucket(report.tail_mr10);
    return j.dump(2);
}

}  // namespace flocode
