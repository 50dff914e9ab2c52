#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flocode/data.hpp"
#include "flocode/evalkit.hpp"
#include "flocode/mln.hpp"
#include "flocode/optim.hpp"
#include "flocode/params.hpp"
#include "flocode/relrep.hpp"
#include "flocode/rng.hpp"
#include "flocode/synthdata.hpp"
#include "flocode/tfod.hpp"

namespace flocode {

/// Weights of the two uncertainty regularizers in the combined objective.
/// The default subtracts the epistemic term (rewarding mean spread) while
/// adding the aleatoric term; `penalize_epistemic` flips the first sign.
struct LossConfig {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    bool penalize_epistemic = false;
};
void validate(const LossConfig& cfg);

/// object + attenuated-classification + contrastive losses, minus
/// lambda1 * epistemic (plus, when flipped), plus lambda2 * aleatoric.
double total_loss(double l_o, double l_mal, double l_kmcl, double sigma_e, double sigma_a,
                  const LossConfig& cfg);
ad::VarPtr total_loss_ad(const ad::VarPtr& l_o, const ad::VarPtr& l_mal,
                         const ad::VarPtr& l_kmcl, const ad::VarPtr& sigma_e,
                         const ad::VarPtr& sigma_a, const LossConfig& cfg);

/// Slow-moving copy of every student parameter under `prefix`, advanced once
/// per epoch as alpha * teacher + (1 - alpha) * student. Inference reads the
/// predicate-decoder weights from this copy.
class EmaTeacher {
public:
    EmaTeacher() = default;
    EmaTeacher(double alpha, std::string prefix);

    double alpha() const { return alpha_; }
    const std::string& prefix() const { return prefix_; }
    const ParamStore& params() const { return params_; }

    /// Copies the student's matching parameters verbatim (training start).
    void initialize_from(const ParamStore& student);
    /// One epoch tick; every tracked parameter must still exist with the
    /// same shape in the student.
    void update(const ParamStore& student);

    void save(std::ostream& out) const;
    static EmaTeacher load(std::istream& in);

private:
    double alpha_ = 0.999;
    std::string prefix_;
    ParamStore params_;
};

/// Widths and counts of every sub-network, plus the label-space constants
/// the model is wired for.
struct ModelConfig {
    TEncConfig tenc;        // object temporal encoder
    RelrepConfig relrep;    // relation encoder/decoder
    MlnConfig mln;          // mixture heads
    KmclConfig kmcl;        // contrastive settings
    int object_classes = 36;
    int feature_dim = 32;   // pooled appearance width entering the encoder
    int pool_grid = 2;      // roi lattice for union-region features
    int subject_class = 0;  // class whose instances anchor candidate pairs
    double eta = 0.9;       // attention blend retained for the raw weight
};
void validate(const ModelConfig& cfg);

struct TrainConfig {
    Task task = Task::PREDCLS;
    int epochs = 10;
    uint64_t seed = 0;
    double lr_main = 2e-5;
    double lr_debias = 1e-5;
    double weight_decay = 0.01;
    double plateau_factor = 0.5;
    int plateau_patience = 3;
    double ema_alpha = 0.999;
    double holdout_fraction = 0.1;
    double dropout = 0.0;
    LossConfig loss;
    ModelConfig model;
    DetectionNoise det_noise;  // proposal simulation for the detection task
    // Component switches for ablation runs.
    bool use_kmcl = true;
    bool use_debias = true;
    bool use_tfod = true;  // off: sequences keep raw per-frame features
    bool use_ema = true;   // off: the teacher mirrors the student each epoch
    uint64_t config_hash = 0;  // provenance stamp carried into checkpoints
};
void validate(const TrainConfig& cfg);

/// Desk-scale defaults wired for the built-in synthetic data; the mixture
/// count follows the task (4 for SGCLS, 6 otherwise).
TrainConfig default_train_config(Task task);

/// Scalar components of one video's objective.
struct VideoLossBreakdown {
    double l_o = 0.0;
    double l_mal = 0.0;
    double l_kmcl = 0.0;
    double sigma_e = 0.0;
    double sigma_a = 0.0;
    double total = 0.0;
    int relations = 0;
    int objects = 0;
};

/// Full differentiable objective of one video: flow-consistent object
/// sequences -> temporal encoding + prototype alignment -> relation tokens
/// -> (optionally debiased) predicate decoding -> mixture losses and
/// uncertainty terms. `store` may be null for a correlation-free pass.
ad::VarPtr video_loss(ParamContext& ctx, const TrainConfig& cfg, const EtfClassifier& etf,
                      const VideoSample& video, CorrelationStore* store, bool training,
                      const DropoutState& drop = {}, VideoLossBreakdown* breakdown = nullptr);

/// Scores every candidate pair of every frame with the given parameters
/// (raw attention, no label information). Returns one prediction list per
/// frame, each entry carrying per-predicate confidences. For the detection
/// task, proposals are simulated from the video with `det_seed`.
std::vector<std::vector<PredTriplet>> infer_video(const TrainConfig& cfg,
                                                  const ParamStore& params,
                                                  const EtfClassifier& etf,
                                                  const VideoSample& video,
                                                  uint64_t det_seed = 0);

/// Keeps each pair's single best predicate (the constrained regime's scene
/// graph); the unconstrained graph is the input list itself.
std::vector<PredTriplet> constrained_graph(const std::vector<PredTriplet>& predictions);

/// Rebuilds a video whose objects are detector proposals chained into
/// tracks: same-class proposals in consecutive frames link when their boxes
/// overlap above `iou_threshold`, and every proposal keeps its detector
/// class and pooled feature. Relation annotations are not carried over.
VideoSample detections_to_video(const VideoSample& source,
                                const std::vector<FrameDetections>& detections,
                                double iou_threshold = 0.8);

/// One row of the training log.
struct EpochMetrics {
    int epoch = 0;
    double l_o = 0.0;
    double l_mal = 0.0;
    double l_kmcl = 0.0;
    double sigma_e = 0.0;
    double sigma_a = 0.0;
    double total = 0.0;
    double r10 = 0.0, r20 = 0.0, r50 = 0.0;
    double mr10 = 0.0, mr20 = 0.0, mr50 = 0.0;
};

/// Deterministic CSV rendering of the log (17 significant digits).
std::string metrics_to_csv(const std::vector<EpochMetrics>& history);

/// Everything needed to resume training or run inference.
struct Checkpoint {
    int64_t epoch = 0;
    uint64_t config_hash = 0;
    ParamStore student;
    EmaTeacher teacher;
    std::string correlation;  // serialized correlation store
    std::string optimizer;    // serialized optimizer state
    std::string scheduler;    // serialized plateau state
    std::string rng_state;
    std::vector<long> predicate_counts;  // training-set label frequencies
    std::vector<EpochMetrics> history;

    void save(std::ostream& out) const;
    static Checkpoint load(std::istream& in);
};

/// The fixed prototype classifier implied by a configuration (the rotation
/// is derived from the training seed, so it is reproducible anywhere).
EtfClassifier make_model_classifier(const TrainConfig& cfg);

/// Scores `videos` with fixed parameters and reports recall metrics;
/// `train_counts` drives the head/body/tail split (size = predicate classes).
EvalReport evaluate_with_params(const TrainConfig& cfg, const ParamStore& params,
                                const EtfClassifier& etf, const Dataset& videos, Regime regime,
                                const std::vector<long>& train_counts);

/// Owns one training run: parameter initialization, the per-video step
/// loop, per-epoch correlation commits, teacher updates, holdout
/// evaluation, and plateau-driven learning-rate reduction. Fully
/// deterministic given (config, dataset).
class Trainer {
public:
    Trainer(TrainConfig cfg, Dataset dataset);
    Trainer(TrainConfig cfg, Dataset dataset, const Checkpoint& resume_from);

    /// Runs one full epoch and returns its log row.
    EpochMetrics run_epoch();
    /// Runs `epochs_remaining` epochs (config epochs minus completed).
    void run();

    int epoch() const { return epoch_; }
    const TrainConfig& config() const { return cfg_; }
    const std::vector<EpochMetrics>& history() const { return history_; }
    const ParamStore& student() const { return params_; }
    const EmaTeacher& teacher() const { return teacher_; }
    const CorrelationStore& correlations() const { return store_; }
    const EtfClassifier& classifier() const { return etf_; }
    const std::vector<int>& train_indices() const { return train_idx_; }
    const std::vector<int>& val_indices() const { return val_idx_; }

    Checkpoint checkpoint() const;

    /// Parameters used at inference: the student with the teacher's copies
    /// layered on top.
    ParamStore inference_params() const;
    /// Scores one video with the inference parameters.
    std::vector<std::vector<PredTriplet>> infer(const VideoSample& video,
                                                uint64_t det_seed = 0) const;
    /// Holdout metrics at the current parameters.
    EvalReport evaluate_holdout(Regime regime) const;
    /// Metrics on an external video set (e.g., a held-out test split),
    /// bucketed by this run's training-label frequencies.
    EvalReport evaluate_dataset(const Dataset& videos, Regime regime) const;

private:
    void init_params();
    EvalReport evaluate_videos(const std::vector<int>& indices, Regime regime) const;

    TrainConfig cfg_;
    Dataset data_;
    std::vector<int> train_idx_, val_idx_;
    std::vector<long> train_counts_;
    ParamStore params_;
    EtfClassifier etf_;
    EmaTeacher teacher_;
    CorrelationStore store_;
    AdamW opt_;
    PlateauScheduler scheduler_;
    Rng run_rng_;
    int epoch_ = 0;
    std::vector<EpochMetrics> history_;
};

}  // namespace flocode
