// Command-line entry point: dataset generation, training, evaluation,
// gradient checking, and component-ablation comparisons, all driven by a
// flat key-value config file with flag overrides. Every run writes the
// merged effective config and a manifest into its output directory.

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flocode/config.hpp"
#include "flocode/grad_check.hpp"
#include "flocode/synthdata.hpp"
#include "flocode/trainer.hpp"

namespace fs = std::filesystem;
using namespace flocode;

namespace {

// Exit codes: 0 success, 1 validation error, 2 runtime error,
// 3 acceptance-check failure.
constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;
constexpr int kCheckFailure = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::string task;
    std::string regime;
    std::string ablate;
    uint64_t seed = 0;
    bool seed_set = false;
    bool strict = false;
    bool inject_bad_gradient = false;
};

/// Full schema with defaults; parsed files may only use these keys.
KvConfig default_config() {
    KvConfig kv;
    kv.set("data.path", "dataset.jsonl");
    kv.set("data.test_path", "none");

    kv.set_int("run.seed", 0);

    kv.set_int("gen.videos", 50);
    GenConfig g;
    kv.set_int("gen.frames", g.frames);
    kv.set_int("gen.objects", g.objects);
    kv.set_int("gen.map_channels", g.map_channels);
    kv.set_int("gen.map_height", g.map_height);
    kv.set_int("gen.map_width", g.map_width);
    kv.set_int("gen.pool_grid", g.pool_grid);
    kv.set_double("gen.label_refresh_rate", g.label_refresh_rate);
    kv.set_double("gen.co_label_rate", g.co_label_rate);
    kv.set_double("gen.class_link_rate", g.class_link_rate);
    kv.set_double("gen.feature_noise", g.feature_noise);
    kv.set_int("labels.object_classes", g.labels.object_classes);
    kv.set_int("labels.predicate_classes", g.labels.predicate_classes);
    kv.set_double("labels.exponent", g.labels.exponent);

    TrainConfig t;
    kv.set("train.task", "predcls");
    kv.set_int("train.epochs", t.epochs);
    kv.set("train.resume_from", "none");
    kv.set_double("train.lr_main", t.lr_main);
    kv.set_double("train.lr_debias", t.lr_debias);
    kv.set_double("train.weight_decay", t.weight_decay);
    kv.set_double("train.plateau_factor", t.plateau_factor);
    kv.set_int("train.plateau_patience", t.plateau_patience);
    kv.set_double("train.ema_alpha", t.ema_alpha);
    kv.set_double("train.holdout_fraction", t.holdout_fraction);
    kv.set_double("train.dropout", t.dropout);

    kv.set_double("loss.lambda1", t.loss.lambda1);
    kv.set_double("loss.lambda2", t.loss.lambda2);
    kv.set_bool("loss.penalize_epistemic", t.loss.penalize_epistemic);

    kv.set_int("model.object_classes", t.model.object_classes);
    kv.set_int("model.feature_dim", t.model.feature_dim);
    kv.set_int("model.pool_grid", t.model.pool_grid);
    kv.set_int("model.subject_class", t.model.subject_class);
    kv.set_double("model.eta", t.model.eta);
    kv.set_int("model.tenc.layers", t.model.tenc.layers);
    kv.set_int("model.tenc.heads", t.model.tenc.heads);
    kv.set_int("model.tenc.dim", t.model.tenc.model_dim);
    kv.set_int("model.tenc.ffn", t.model.tenc.ffn_dim);
    kv.set_int("model.tenc.max_seq", t.model.tenc.max_sequence_length);
    kv.set_int("model.rel.dim", t.model.relrep.model_dim);
    kv.set_int("model.rel.heads", t.model.relrep.heads);
    kv.set_int("model.rel.enc_layers", t.model.relrep.enc_layers);
    kv.set_int("model.rel.dec_layers", t.model.relrep.dec_layers);
    kv.set_int("model.rel.ffn", t.model.relrep.ffn_dim);
    kv.set_int("model.rel.window", t.model.relrep.window);
    kv.set_int("model.rel.max_frames", t.model.relrep.max_frames);
    kv.set_int("model.rel.union_dim", t.model.relrep.union_dim);
    kv.set_int("model.mln.mixtures", t.model.mln.mixtures);
    kv.set_int("model.mln.classes", t.model.mln.num_classes);
    kv.set_double("model.mln.tau", t.model.kmcl.tau);

    kv.set_double("det.jitter_sigma", t.det_noise.jitter_sigma);
    kv.set_double("det.miss_rate", t.det_noise.miss_rate);
    kv.set_double("det.false_positive_rate", t.det_noise.false_positive_rate);
    kv.set_int("det.seed", static_cast<long>(t.det_noise.seed));

    kv.set_bool("components.kmcl", true);
    kv.set_bool("components.debias", true);
    kv.set_bool("components.tfod", true);
    kv.set_bool("components.regularizer", true);
    kv.set_bool("components.ema", true);

    kv.set("eval.checkpoint", "checkpoint.bin");
    kv.set("eval.tasks", "predcls");
    kv.set("eval.regimes", "with_constraint,no_constraints");

    kv.set("ablate.seeds", "1,2,3");
    kv.set("ablate.variants", "full,baseline,no_kmcl,no_debias,no_tfod");
    kv.set_int("ablate.epochs", 10);
    return kv;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// File config + flag overrides on top of the schema defaults. Unknown keys
/// in the file are validation errors (a typo must never silently fall back
/// to a default).
KvConfig effective_config(const CommonFlags& flags) {
    KvConfig kv = default_config();
    if (!flags.config_path.empty()) {
        KvConfig file = KvConfig::parse_file(flags.config_path);
        for (const std::string& key : file.keys())
            if (!kv.has(key)) throw std::invalid_argument("unknown config key: " + key);
        kv.merge_overrides(file);
    }
    if (flags.seed_set) kv.set_int("run.seed", static_cast<long>(flags.seed));
    if (!flags.task.empty()) kv.set("train.task", flags.task);
    if (!flags.regime.empty()) kv.set("eval.regimes", flags.regime);
    for (const std::string& component : split_list(flags.ablate)) {
        const std::string key = "components." + component;
        if (!kv.has(key))
            throw std::invalid_argument("unknown ablation component: " + component);
        kv.set_bool(key, false);
    }
    return kv;
}

GenConfig gen_config_from(const KvConfig& kv) {
    GenConfig g;
    g.labels.object_classes = static_cast<int>(kv.get_int("labels.object_classes"));
    g.labels.predicate_classes = static_cast<int>(kv.get_int("labels.predicate_classes"));
    g.labels.exponent = kv.get_double("labels.exponent");
    g.frames = static_cast<int>(kv.get_int("gen.frames"));
    g.objects = static_cast<int>(kv.get_int("gen.objects"));
    g.map_channels = static_cast<int>(kv.get_int("gen.map_channels"));
    g.map_height = static_cast<int>(kv.get_int("gen.map_height"));
    g.map_width = static_cast<int>(kv.get_int("gen.map_width"));
    g.pool_grid = static_cast<int>(kv.get_int("gen.pool_grid"));
    g.label_refresh_rate = kv.get_double("gen.label_refresh_rate");
    g.co_label_rate = kv.get_double("gen.co_label_rate");
    g.class_link_rate = kv.get_double("gen.class_link_rate");
    g.feature_noise = kv.get_double("gen.feature_noise");
    g.validate();
    return g;
}

/// Hash over only the keys that decide whether a checkpoint fits the model:
/// architecture, label spaces, and the task. Run-only settings (paths,
/// schedules, eval lists) must not change checkpoint identity.
uint64_t model_identity_hash(const KvConfig& kv) {
    KvConfig identity;
    for (const std::string& key : kv.keys())
        if (key.rfind("model.", 0) == 0 || key.rfind("labels.", 0) == 0 || key == "train.task")
            identity.set(key, kv.get_string(key));
    return identity.hash();
}

TrainConfig train_config_from(const KvConfig& kv) {
    TrainConfig t;
    t.task = parse_task(kv.get_string("train.task"));
    t.epochs = static_cast<int>(kv.get_int("train.epochs"));
    t.seed = static_cast<uint64_t>(kv.get_int("run.seed"));
    t.lr_main = kv.get_double("train.lr_main");
    t.lr_debias = kv.get_double("train.lr_debias");
    t.weight_decay = kv.get_double("train.weight_decay");
    t.plateau_factor = kv.get_double("train.plateau_factor");
    t.plateau_patience = static_cast<int>(kv.get_int("train.plateau_patience"));
    t.ema_alpha = kv.get_double("train.ema_alpha");
    t.holdout_fraction = kv.get_double("train.holdout_fraction");
    t.dropout = kv.get_double("train.dropout");
    t.loss.lambda1 = kv.get_double("loss.lambda1");
    t.loss.lambda2 = kv.get_double("loss.lambda2");
    t.loss.penalize_epistemic = kv.get_bool("loss.penalize_epistemic");
    t.model.object_classes = static_cast<int>(kv.get_int("model.object_classes"));
    t.model.feature_dim = static_cast<int>(kv.get_int("model.feature_dim"));
    t.model.pool_grid = static_cast<int>(kv.get_int("model.pool_grid"));
    t.model.subject_class = static_cast<int>(kv.get_int("model.subject_class"));
    t.model.eta = kv.get_double("model.eta");
    t.model.tenc.layers = static_cast<int>(kv.get_int("model.tenc.layers"));
    t.model.tenc.heads = static_cast<int>(kv.get_int("model.tenc.heads"));
    t.model.tenc.model_dim = static_cast<int>(kv.get_int("model.tenc.dim"));
    t.model.tenc.ffn_dim = static_cast<int>(kv.get_int("model.tenc.ffn"));
    t.model.tenc.max_sequence_length = static_cast<int>(kv.get_int("model.tenc.max_seq"));
    t.model.tenc.dropout = t.dropout;
    t.model.relrep.model_dim = static_cast<int>(kv.get_int("model.rel.dim"));
    t.model.relrep.heads = static_cast<int>(kv.get_int("model.rel.heads"));
    t.model.relrep.enc_layers = static_cast<int>(kv.get_int("model.rel.enc_layers"));
    t.model.relrep.dec_layers = static_cast<int>(kv.get_int("model.rel.dec_layers"));
    t.model.relrep.ffn_dim = static_cast<int>(kv.get_int("model.rel.ffn"));
    t.model.relrep.window = static_cast<int>(kv.get_int("model.rel.window"));
    t.model.relrep.max_frames = static_cast<int>(kv.get_int("model.rel.max_frames"));
    t.model.relrep.union_dim = static_cast<int>(kv.get_int("model.rel.union_dim"));
    t.model.relrep.object_dim = t.model.tenc.model_dim;
    t.model.relrep.dropout = t.dropout;
    t.model.mln.mixtures = static_cast<int>(kv.get_int("model.mln.mixtures"));
    t.model.mln.num_classes = static_cast<int>(kv.get_int("model.mln.classes"));
    t.model.mln.embed_dim = t.model.relrep.model_dim;
    t.model.kmcl.tau = kv.get_double("model.mln.tau");
    t.det_noise.jitter_sigma = kv.get_double("det.jitter_sigma");
    t.det_noise.miss_rate = kv.get_double("det.miss_rate");
    t.det_noise.false_positive_rate = kv.get_double("det.false_positive_rate");
    t.det_noise.seed = static_cast<uint64_t>(kv.get_int("det.seed"));
    t.use_kmcl = kv.get_bool("components.kmcl");
    t.use_debias = kv.get_bool("components.debias");
    t.use_tfod = kv.get_bool("components.tfod");
    t.use_ema = kv.get_bool("components.ema");
    if (!kv.get_bool("components.regularizer")) {
        t.loss.lambda1 = 0.0;
        t.loss.lambda2 = 0.0;
    }
    t.config_hash = model_identity_hash(kv);
    validate(t);
    return t;
}

/// Honors the documented parallelism cap. The implementation is
/// single-threaded, so any positive cap is already satisfied; the value is
/// still validated so misconfiguration fails loudly.
void check_thread_cap() {
    const char* raw = std::getenv("FLOCODE_THREADS");
    if (raw == nullptr) return;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v < 1)
        throw std::invalid_argument("FLOCODE_THREADS must be a positive integer");
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const KvConfig& kv,
                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["config_hash"] = hash_hex(kv.hash());
    j["seed"] = kv.get_int("run.seed");
    j["outputs"] = outputs;
    char stamp[32];
    std::time_t now = std::time(nullptr);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["created"] = stamp;  // timestamps live only here, never in artifacts
    std::ofstream out(out_dir / "manifest.json");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed to write manifest");
}

fs::path prepare_out_dir(const CommonFlags& flags, const KvConfig& kv) {
    fs::path dir(flags.out_dir);
    fs::create_directories(dir);
    kv.write_file((dir / "config.effective").string());
    return dir;
}

Dataset load_dataset_checked(const std::string& path, const TrainConfig& cfg) {
    Dataset data = load_dataset(path);
    if (data.empty()) throw std::invalid_argument("dataset is empty: " + path);
    for (const VideoFrame& f : data[0].frames)
        for (const GtObject& o : f.objects) {
            if (o.feature.numel() != cfg.model.feature_dim)
                throw std::invalid_argument(
                    "dataset feature width does not match model.feature_dim");
            if (o.class_id < 0 || o.class_id >= cfg.model.object_classes)
                throw std::invalid_argument(
                    "dataset object class outside model.object_classes");
        }
    return data;
}

int cmd_generate(const CommonFlags& flags) {
    KvConfig kv = effective_config(flags);
    GenConfig gen = gen_config_from(kv);
    const long videos = kv.get_int("gen.videos");
    if (videos < 1) throw std::invalid_argument("gen.videos must be positive");
    const uint64_t seed = static_cast<uint64_t>(kv.get_int("run.seed"));

    fs::path dir = prepare_out_dir(flags, kv);
    Dataset data = generate(gen, seed, static_cast<int>(videos));
    const std::string dataset_path = (dir / "dataset.jsonl").string();
    save_dataset(data, dataset_path);
    write_manifest(dir, "generate", kv, {"dataset.jsonl", "config.effective"});
    std::cout << "generated " << data.size() << " videos -> " << dataset_path << "\n";
    return kOk;
}

int cmd_train(const CommonFlags& flags) {
    KvConfig kv = effective_config(flags);
    TrainConfig cfg = train_config_from(kv);
    Dataset data = load_dataset_checked(kv.get_string("data.path"), cfg);

    fs::path dir = prepare_out_dir(flags, kv);
    std::unique_ptr<Trainer> trainer;
    const std::string resume = kv.get_string("train.resume_from");
    if (resume != "none") {
        std::ifstream in(resume, std::ios::binary);
        if (!in) throw std::invalid_argument("cannot open checkpoint: " + resume);
        Checkpoint ck = Checkpoint::load(in);
        trainer = std::make_unique<Trainer>(cfg, std::move(data), ck);
    } else {
        trainer = std::make_unique<Trainer>(cfg, std::move(data));
    }

    while (trainer->epoch() < cfg.epochs) {
        EpochMetrics m = trainer->run_epoch();
        std::cout << "epoch " << m.epoch << " total " << m.total << " mR@10 " << m.mr10
                  << "\n";
    }

    {
        std::ofstream out(dir / "checkpoint.bin", std::ios::binary);
        trainer->checkpoint().save(out);
    }
    {
        std::ofstream out(dir / "metrics.csv");
        out << metrics_to_csv(trainer->history());
        if (!out) throw std::runtime_error("failed to write metrics.csv");
    }
    write_manifest(dir, "train", kv, {"checkpoint.bin", "metrics.csv", "config.effective"});
    return kOk;
}

int cmd_eval(const CommonFlags& flags) {
    KvConfig kv = effective_config(flags);
    TrainConfig cfg = train_config_from(kv);
    if (!flags.task.empty()) kv.set("eval.tasks", flags.task);
    Dataset data = load_dataset_checked(kv.get_string("data.path"), cfg);

    const std::string ck_path = kv.get_string("eval.checkpoint");
    std::ifstream in(ck_path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open checkpoint: " + ck_path);
    Checkpoint ck = Checkpoint::load(in);
    if (cfg.config_hash != 0 && ck.config_hash != 0 && cfg.config_hash != ck.config_hash)
        std::cerr << "warning: checkpoint was produced by a different configuration\n";

    ParamStore params = ck.student;
    for (const auto& [name, value] : ck.teacher.params()) params.set(name, value);
    std::vector<long> counts = ck.predicate_counts;
    if (static_cast<int>(counts.size()) != cfg.model.mln.num_classes)
        throw std::invalid_argument("checkpoint label frequencies do not match the config");

    fs::path dir = prepare_out_dir(flags, kv);
    std::vector<std::string> outputs{"config.effective"};
    for (const std::string& task_name : split_list(kv.get_string("eval.tasks"))) {
        for (const std::string& regime_name : split_list(kv.get_string("eval.regimes"))) {
            TrainConfig run_cfg = cfg;
            run_cfg.task = parse_task(task_name);
            EtfClassifier etf = make_model_classifier(run_cfg);
            EvalReport rep = evaluate_with_params(run_cfg, params, etf, data,
                                                  parse_regime(regime_name), counts);
            const std::string stem = "report_" + task_name + "_" + regime_name;
            {
                std::ofstream out(dir / (stem + ".csv"));
                out << report_to_csv(rep);
            }
            {
                std::ofstream out(dir / (stem + ".json"));
                out << report_to_json(rep) << "\n";
            }
            outputs.push_back(stem + ".csv");
            outputs.push_back(stem + ".json");
            std::cout << task_name << " " << regime_name << " R@10 " << rep.recall.at(10)
                      << " mR@10 " << rep.mean_recall.at(10).mean << "\n";
        }
    }
    write_manifest(dir, "eval", kv, outputs);
    return kOk;
}

struct NamedCheck {
    std::string name;
    GradReport report;
    bool passed;
};

int cmd_gradcheck(const CommonFlags& flags) {
    KvConfig kv = effective_config(flags);

    // Small fixed fixture: a two-frame synthetic video and a reduced model.
    GenConfig g;
    g.labels.object_classes = 6;
    g.labels.predicate_classes = 8;
    g.frames = 2;
    g.objects = 2;
    g.map_channels = 2;
    g.map_height = 12;
    g.map_width = 12;
    VideoSample video = generate_video(g, 11, 0);

    TrainConfig cfg;
    cfg.seed = static_cast<uint64_t>(kv.get_int("run.seed"));
    cfg.model.tenc.model_dim = 16;
    cfg.model.tenc.ffn_dim = 32;
    cfg.model.tenc.max_sequence_length = 16;
    cfg.model.relrep.model_dim = 18;
    cfg.model.relrep.ffn_dim = 32;
    cfg.model.relrep.max_frames = 16;
    cfg.model.relrep.union_dim = 8;
    cfg.model.relrep.object_dim = 16;
    cfg.model.mln.mixtures = 2;
    cfg.model.mln.num_classes = 8;
    cfg.model.mln.embed_dim = 18;
    cfg.model.object_classes = 6;
    cfg.model.feature_dim = 8;
    validate(cfg);

    ParamStore store;
    Rng rng(mix64(cfg.seed ^ 0x474331ULL));
    init_tenc_params(store, rng, "tenc", cfg.model.tenc, cfg.model.feature_dim);
    init_relrep_params(store, rng, "rel", cfg.model.relrep);
    init_mln_params(store, rng, "mln", cfg.model.mln);
    EtfClassifier etf = make_model_classifier(cfg);

    CorrelationStore corr(cfg.model.eta);
    {
        ParamContext warm(store);
        video_loss(warm, cfg, etf, video, &corr, true);
        corr.commit_epoch(0);
    }

    const double tol = 1e-4;
    const double eps = 1e-5;
    const bool inject = flags.inject_bad_gradient;

    std::vector<NamedCheck> checks;
    auto run_check = [&](const std::string& name,
                         const std::function<ad::VarPtr(ParamContext&)>& build,
                         const std::string& group = "") {
        Rng probe_rng(mix64(cfg.seed ^ 0x50524f42ULL));
        try {
            GradReport rep = check_gradients(store, build, eps, 2, &probe_rng, group);
            checks.push_back({name, rep, rep.max_rel_error < tol});
        } catch (const std::exception& e) {
            throw std::runtime_error("gradient check `" + name + "`: " + e.what());
        }
    };

    // A value-only contribution is invisible to the analytic gradient, so
    // the detector must flag it.
    auto corrupt = [&](const ad::VarPtr& loss, ParamContext& ctx) -> ad::VarPtr {
        if (!inject) return loss;
        ad::VarPtr leak = ad::constant(ad::sum(ctx["mln.pi.w"])->value);
        return ad::add(loss, ad::reshape(leak, {1, 1}));
    };

    run_check("object_alignment", [&](ParamContext& ctx) {
        std::vector<Tensor> steps;
        for (const VideoFrame& f : video.frames) steps.push_back(f.flow);
        FlowProvider flows(steps);
        SequenceOptions so;
        so.grid = cfg.model.pool_grid;
        so.by_instance = true;
        auto seqs = build_object_sequences(video, flows, so);
        ad::VarPtr rows;
        std::vector<int> classes;
        for (const ObjectSequence& s : seqs) {
            EncodedSequence enc = tenc_forward(ctx, "tenc", cfg.model.tenc, s);
            rows = rows ? ad::concat_rows(rows, enc.rows) : enc.rows;
            for (size_t r = 0; r < s.entries.size(); ++r) classes.push_back(s.class_id);
        }
        return corrupt(ad::reshape(object_loss_rows(rows, classes, etf), {1, 1}), ctx);
    });

    // Shared label fixture for the two mixture objectives.
    const std::vector<std::vector<int>> labels{{0, 2}, {3}, {1}};
    auto heads = [&](ParamContext& ctx) {
        std::vector<MixtureParams> batch;
        Rng zr(417);
        for (size_t i = 0; i < labels.size(); ++i) {
            Tensor z = normal_init(zr, 1.0, {1, cfg.model.mln.embed_dim});
            batch.push_back(mixture_heads(ctx, "mln", cfg.model.mln, ad::constant(z)));
        }
        return batch;
    };
    run_check("attenuated_classification", [&](ParamContext& ctx) {
        return corrupt(mal_loss(heads(ctx), labels, cfg.model.mln.num_classes), ctx);
    });
    run_check("contrastive", [&](ParamContext& ctx) {
        return corrupt(kmcl_loss(heads(ctx), labels, cfg.model.mln.num_classes, cfg.model.kmcl),
                       ctx);
    });
    // The combined objective touches every parameter group, so it is checked
    // group by group; the per-group maxima partition the overall maximum.
    auto combined = [&](ParamContext& ctx) {
        return corrupt(video_loss(ctx, cfg, etf, video, &corr, true), ctx);
    };
    for (const char* group : {"tenc", "rel", "mln"})
        run_check(std::string("combined_objective[") + group + "]", combined, group);

    fs::path dir = prepare_out_dir(flags, kv);
    std::ostringstream report;
    bool all_passed = true;
    report << "tolerance " << tol << " (relative), step " << eps << "\n";
    for (const NamedCheck& c : checks) {
        all_passed = all_passed && c.passed;
        report << c.name << ": max_rel_error " << c.report.max_rel_error << " at "
               << c.report.worst_param << "[" << c.report.worst_index << "] analytic "
               << c.report.analytic << " numeric " << c.report.numeric << " probes "
               << c.report.probes << " -> " << (c.passed ? "pass" : "FAIL") << "\n";
    }
    report << (all_passed ? "all checks passed\n" : "gradient check FAILED\n");
    {
        std::ofstream out(dir / "gradcheck.txt");
        out << report.str();
    }
    write_manifest(dir, "gradcheck", kv, {"gradcheck.txt", "config.effective"});
    std::cout << report.str();
    return all_passed ? kOk : kCheckFailure;
}

struct AblationRow {
    std::string variant;
    uint64_t seed;
    double tail_mr10;
    double mr10;
    double r10;
};

TrainConfig variant_config(const TrainConfig& base, const std::string& variant) {
    TrainConfig cfg = base;
    if (variant == "full") return cfg;
    if (variant == "baseline") {
        cfg.use_kmcl = false;
        cfg.use_debias = false;
        cfg.use_tfod = false;
        cfg.use_ema = false;
        cfg.loss.lambda1 = 0.0;
        cfg.loss.lambda2 = 0.0;
        return cfg;
    }
    if (variant == "no_kmcl") {
        cfg.use_kmcl = false;
        return cfg;
    }
    if (variant == "no_debias") {
        cfg.use_debias = false;
        return cfg;
    }
    if (variant == "no_tfod") {
        cfg.use_tfod = false;
        return cfg;
    }
    if (variant == "no_regularizer") {
        cfg.loss.lambda1 = 0.0;
        cfg.loss.lambda2 = 0.0;
        return cfg;
    }
    if (variant == "no_ema") {
        cfg.use_ema = false;
        return cfg;
    }
    throw std::invalid_argument("unknown ablation variant: " + variant);
}

int cmd_ablate(const CommonFlags& flags) {
    KvConfig kv = effective_config(flags);
    TrainConfig base = train_config_from(kv);
    base.epochs = static_cast<int>(kv.get_int("ablate.epochs"));
    Dataset train_data = load_dataset_checked(kv.get_string("data.path"), base);
    const std::string test_path = kv.get_string("data.test_path");
    if (test_path == "none")
        throw std::invalid_argument("ablation needs data.test_path for the held-out split");
    Dataset test_data = load_dataset_checked(test_path, base);

    std::vector<uint64_t> seeds;
    for (const std::string& s : split_list(kv.get_string("ablate.seeds")))
        seeds.push_back(static_cast<uint64_t>(std::stoull(s)));
    if (seeds.empty()) throw std::invalid_argument("ablate.seeds must not be empty");
    std::vector<std::string> variants = split_list(kv.get_string("ablate.variants"));
    if (variants.empty()) throw std::invalid_argument("ablate.variants must not be empty");

    fs::path dir = prepare_out_dir(flags, kv);
    std::vector<AblationRow> rows;
    std::map<std::string, double> mean_tail;
    for (const std::string& variant : variants) {
        double tail_sum = 0.0;
        for (uint64_t seed : seeds) {
            TrainConfig cfg = variant_config(base, variant);
            cfg.seed = seed;
            Trainer trainer(cfg, train_data);
            trainer.run();
            EvalReport rep = trainer.evaluate_dataset(test_data, Regime::WITH_CONSTRAINT);
            AblationRow row;
            row.variant = variant;
            row.seed = seed;
            row.tail_mr10 = rep.tail_mr10.defined ? rep.tail_mr10.value : 0.0;
            row.mr10 = rep.mean_recall.at(10).mean;
            row.r10 = rep.recall.at(10);
            rows.push_back(row);
            tail_sum += row.tail_mr10;
            std::cout << variant << " seed " << seed << " tail-mR@10 " << row.tail_mr10
                      << " mR@10 " << row.mr10 << "\n";
        }
        mean_tail[variant] = tail_sum / static_cast<double>(seeds.size());
    }

    std::ostringstream csv;
    csv << "variant,seed,tail_mR@10,mR@10,R@10\n";
    char buf[64];
    for (const AblationRow& r : rows) {
        csv << r.variant << "," << r.seed;
        for (double v : {r.tail_mr10, r.mr10, r.r10}) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            csv << buf;
        }
        csv << "\n";
    }
    csv << "\nvariant,mean_tail_mR@10\n";
    for (const auto& [variant, value] : mean_tail) {
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        csv << variant << "," << buf << "\n";
    }
    {
        std::ofstream out(dir / "ablation.csv");
        out << csv.str();
    }
    write_manifest(dir, "ablate", kv, {"ablation.csv", "config.effective"});

    if (flags.strict) {
        if (!mean_tail.count("full"))
            throw std::invalid_argument("strict mode needs the full variant in the run");
        const double full = mean_tail.at("full");
        bool ok = true;
        for (const auto& [variant, value] : mean_tail) {
            if (variant == "full") continue;
            if (!(full > value)) {
                std::cerr << "ordering violated: full (" << full << ") <= " << variant << " ("
                          << value << ")\n";
                ok = false;
            }
        }
        if (!ok) return kCheckFailure;
        std::cout << "ordering holds: full beats every variant on tail-mR@10\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flocode: long-tail-aware video scene-graph pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "key-value config file");
        cmd->add_option("--out", flags.out_dir, "output directory");
        cmd->add_option("--seed", flags.seed, "run seed")->each([&](const std::string&) {
            flags.seed_set = true;
        });
        cmd->add_option("--task", flags.task, "predcls | sgcls | sgdet (lists allowed for eval)");
        cmd->add_option("--regime", flags.regime, "with_constraint | no_constraints");
        cmd->add_option("--ablate", flags.ablate,
                        "components to disable: kmcl,debias,tfod,regularizer,ema");
    };

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
    add_common(generate);
    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train);
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd);
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    add_common(gradcheck);
    gradcheck->add_flag("--inject-bad-gradient", flags.inject_bad_gradient,
                        "corrupt one objective to prove the detector fires");
    CLI::App* ablate = app.add_subcommand("ablate", "component-removal comparison");
    add_common(ablate);
    ablate->add_flag("--strict", flags.strict,
                     "exit 3 unless the full model beats every variant on tail-mR@10");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kValidationError;
    }

    try {
        check_thread_cap();
        if (generate->parsed()) return cmd_generate(flags);
        if (train->parsed()) return cmd_train(flags);
        if (eval_cmd->parsed()) return cmd_eval(flags);
        if (gradcheck->parsed()) return cmd_gradcheck(flags);
        if (ablate->parsed()) return cmd_ablate(flags);
        std::cerr << "no command selected\n";
        return kValidationError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }
}
