#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flocode/data.hpp"

namespace flocode {

/// Class vocabulary and the long-tailed predicate frequency profile.
/// Object class 0 is the person; predicates follow a power law over rank.
struct LabelSpace {
    int object_classes = 36;
    int predicate_classes = 26;
    double exponent = 1.6;

    void validate() const;
    /// freq[p] proportional to (p+1)^(-exponent); positive, sums to 1.
    /// Exponent 0 gives the uniform distribution.
    std::vector<double> frequencies() const;
};

/// Generator configuration. Every video contains one person (id 0) plus
/// `objects` other objects; each person-object pair carries a per-video
/// anchor predicate that steers the object's class, its placement relative
/// to the person (angle encodes the predicate, distance encodes its band,
/// band 0 overlaps the person), and the emitted per-frame labels.
struct GenConfig {
    LabelSpace labels;
    int frames = 8;
    int objects = 2;
    int map_channels = 8;
    int map_height = 16;
    int map_width = 16;
    int pool_grid = 2;
    /// Chance a frame redraws its primary predicate instead of the anchor.
    double label_refresh_rate = 0.2;
    /// Chance a frame additionally emits the paired predicate (p+1 mod C).
    double co_label_rate = 0.25;
    /// Chance the object's class deterministically encodes its anchor.
    double class_link_rate = 0.7;
    /// Stddev of the white noise added to every feature-map cell.
    double feature_noise = 0.05;

    void validate() const;
    int feature_dim() const { return map_channels * pool_grid * pool_grid; }
};

/// Analytic per-token predicate marginal implied by the label model:
/// (freq[p] + co_label_rate * freq[(p-1) mod C]) / (1 + co_label_rate).
std::vector<double> predicate_token_marginal(const GenConfig& cfg);

/// One video, deterministic in (cfg, seed, video_index).
VideoSample generate_video(const GenConfig& cfg, uint64_t seed, int video_index);

/// A dataset of `videos` independent videos; per-video streams derive from
/// (seed, index) so generation order never matters.
Dataset generate(const GenConfig& cfg, uint64_t seed, int videos);

/// Detector-noise model for the detection task: box jitter, dropped
/// ground-truth objects, injected false positives, then per-class
/// non-maximum suppression at IoU 0.4.
struct DetectionNoise {
    double jitter_sigma = 0.0;
    double miss_rate = 0.0;
    double false_positive_rate = 0.0;
    uint64_t seed = 0;

    void validate() const;
};

struct FrameDetections {
    std::vector<GtObject> objects;  // ids are per-frame ranks by score
    std::vector<double> scores;     // parallel to objects, descending
};

std::vector<FrameDetections> simulate_detections(const VideoSample& video,
                                                 const DetectionNoise& noise,
                                                 int pool_grid);

/// JSON-lines persistence, one video per line. Numbers round-trip exactly;
/// load(save(x)) compares equal tensor for tensor. Malformed input reports
/// the offending line and field.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Token counts per predicate class over every (frame, triplet, predicate).
std::vector<long> predicate_histogram(const Dataset& dataset, int predicate_classes);

}  // namespace flocode
