#pragma once

#include <map>
#include <string>
#include <vector>

#include "flocode/data.hpp"

namespace flocode {

enum class Task { PREDCLS, SGCLS, SGDET };
enum class Regime { WITH_CONSTRAINT, NO_CONSTRAINTS };

std::string task_name(Task task);
std::string regime_name(Regime regime);
Task parse_task(const std::string& name);
Regime parse_regime(const std::string& name);

/// One scored candidate triplet for a frame. Identity ids drive matching
/// for PREDCLS/SGCLS; boxes and classes drive it for SGDET.
struct PredTriplet {
    int subj_id = -1;
    int obj_id = -1;
    int subj_class = -1;
    int obj_class = -1;
    Box subj_box;
    Box obj_box;
    int predicate = -1;
    double confidence = 0.0;
};

/// Everything needed to score one frame.
struct EvalFrame {
    std::vector<GtObject> gt_objects;
    std::vector<GtTriplet> gt_triplets;  // multi-label; each label is one instance
    std::vector<PredTriplet> predictions;
};

/// Does `pred` recover the ground-truth instance (subject, object, label)?
/// PREDCLS: identity and predicate. SGCLS: additionally predicted classes.
/// SGDET: boxes at IoU >= 0.5 with matching classes and predicate.
bool match_triplet(const PredTriplet& pred, const GtObject& gt_subj, const GtObject& gt_obj,
                   int gt_predicate, Task task);

/// Fraction of ground-truth instances recovered by the top-K predictions,
/// averaged over frames with ground truth. With Constraint keeps only each
/// pair's best predicate before ranking; ranking breaks confidence ties by
/// (subject id, object id, predicate id).
double recall_at_k(const std::vector<EvalFrame>& frames, int k, Regime regime, Task task);

struct MeanRecall {
    double mean = 0.0;                 // unweighted over classes present in gt
    std::vector<double> per_class;     // indexed by predicate; 0 when absent
    std::vector<char> present;         // 1 when the class appears in gt
};

MeanRecall mean_recall_at_k(const std::vector<EvalFrame>& frames, int k, Regime regime, Task task,
                            int predicate_classes);

enum class Bucket { HEAD, BODY, TAIL };

/// Partitions classes by their share of training instances: HEAD when the
/// fraction reaches `head_fraction`, TAIL when it is at most `tail_fraction`,
/// BODY otherwise. Default cutoffs are the reference absolute counts
/// (100000 and 8000 of 1715568) expressed as dataset-size fractions.
std::vector<Bucket> split_head_body_tail(const std::vector<long>& train_counts,
                                         double head_fraction = 100000.0 / 1715568.0,
                                         double tail_fraction = 8000.0 / 1715568.0);

struct BucketRecall {
    double value = 0.0;
    bool defined = false;  // false when no class of the bucket appears in gt
};

struct EvalReport {
    Task task = Task::PREDCLS;
    Regime regime = Regime::WITH_CONSTRAINT;
    std::map<int, double> recall;          // K -> R@K
    std::map<int, MeanRecall> mean_recall; // K -> mR@K with per-class detail
    BucketRecall head_mr10, body_mr10, tail_mr10;
};

/// Scores one task x regime at the given cutoffs and aggregates the
/// HEAD/BODY/TAIL mR@10 from the supplied training-frequency partition.
EvalReport evaluate(const std::vector<EvalFrame>& frames, Task task, Regime regime,
                    const std::vector<int>& ks, const std::vector<Bucket>& buckets,
                    int predicate_classes);

/// CSV: one summary block plus a per-class table (rows == predicate classes).
std::string report_to_csv(const EvalReport& report);
std::string report_to_json(const EvalReport& report);

}  // namespace flocode
