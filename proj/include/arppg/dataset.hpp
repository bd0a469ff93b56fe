#pragma once

#include "arppg/config.hpp"

namespace arppg {

struct DatasetManifest {
    struct Entry {
        int id = 0;
        uint64_t seed = 0;
        double hr_bpm = 0.0;
        int frames = 0;
        std::string dir;  // relative to the dataset root
    };
    std::vector<Entry> train, val;
};

namespace detail {

inline SyntheticClip render_video(const RunConfig& cfg, double hr, uint64_t seed) {
    SceneParams scene;
    scene.noise_sigma = cfg.data.noise_sigma;
    // Masters are stored at full base resolution; schedules are applied at
    // training/eval time so one dataset serves every resolution protocol.
    ResolutionSchedule sched;
    sched.start_size = sched.end_size = scene.base_size;
    return render_clip(cfg.data.video_frames, cfg.pulse_params(hr), scene,
                       cfg.motion_schedule(), sched, seed);
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    auto split = [](const std::vector<DatasetManifest::Entry>& es) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : es)
            arr.push_back({{"id", e.id},
                           {"seed", e.seed},
                           {"hr_bpm", e.hr_bpm},
                           {"frames", e.frames},
                           {"dir", e.dir}});
        return arr;
    };
    return {{"train", split(m.train)}, {"val", split(m.val)}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    auto split = [](const nlohmann::json& arr) {
        std::vector<DatasetManifest::Entry> es;
        for (const auto& e : arr)
            es.push_back({e.at("id").get<int>(), e.at("seed").get<uint64_t>(),
                          e.at("hr_bpm").get<double>(), e.at("frames").get<int>(),
                          e.at("dir").get<std::string>()});
        return es;
    };
    m.train = split(j.at("train"));
    m.val = split(j.at("val"));
    return m;
}

}  // namespace detail

// Renders the train/val video trees plus manifest.json. Per-video seeds and
// heart rates derive deterministically from the master seed.
inline DatasetManifest generate_dataset(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                        bool force = false) {
    cfg.validate();
    if (std::filesystem::exists(out_dir) && !std::filesystem::is_empty(out_dir) && !force)
        throw ArgumentError("generate: output directory " + out_dir.string() +
                            " is not empty (use --force to overwrite)");
    std::filesystem::create_directories(out_dir);
    DatasetManifest manifest;
    Rng master(cfg.seed);
    Rng hr_stream = master.child(1);
    Rng seed_stream = master.child(2);
    auto emit = [&](const std::string& split, int count, std::vector<DatasetManifest::Entry>& out) {
        char name[32];
        for (int i = 0; i < count; ++i) {
            double hr = hr_stream.uniform(cfg.data.hr_min, cfg.data.hr_max);
            uint64_t seed = seed_stream.uniform_int(0, std::numeric_limits<int64_t>::max() - 1);
            std::snprintf(name, sizeof(name), "video_%03d", i);
            std::filesystem::path dir = out_dir / split / name;
            export_clip(detail::render_video(cfg, hr, seed), dir);
            out.push_back({i, seed, hr, cfg.data.video_frames, split + "/" + name});
        }
    };
    emit("train", cfg.data.num_train_videos, manifest.train);
    emit("val", cfg.data.num_val_videos, manifest.val);
    std::ofstream f(out_dir / "manifest.json");
    f << detail::manifest_to_json(manifest).dump(2) << '\n';
    if (!f) throw ArgumentError("generate: cannot write manifest under " + out_dir.string());
    return manifest;
}

struct Dataset {
    DatasetManifest manifest;
    std::vector<SyntheticClip> train, val;
};

inline Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f) throw ArgumentError("dataset: missing manifest.json under " + dir.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError("dataset: malformed manifest.json: " + std::string(e.what()));
    }
    Dataset ds;
    ds.manifest = detail::manifest_from_json(j);
    for (const auto& e : ds.manifest.train) {
        ds.train.push_back(load_clip(dir / e.dir));
        ds.train.back().gt_hr_bpm = e.hr_bpm;
    }
    for (const auto& e : ds.manifest.val) {
        ds.val.push_back(load_clip(dir / e.dir));
        ds.val.back().gt_hr_bpm = e.hr_bpm;
    }
    return ds;
}

}  // namespace arppg
