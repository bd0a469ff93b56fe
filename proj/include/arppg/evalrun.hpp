#pragma once

#include <iomanip>
#include <map>

#include "arppg/cost.hpp"
#include "arppg/svg.hpp"
#include "arppg/train.hpp"

namespace arppg {

inline std::vector<std::string> fixed_schedule_labels() {
    return {"128", "96", "85", "75", "64", "51", "42", "36", "32"};
}

inline std::vector<std::string> varying_schedule_labels() {
    return {"128to64", "64to32", "128to64to128", "64to32to64"};
}

inline std::vector<std::string> all_schedule_labels() {
    auto v = fixed_schedule_labels();
    for (auto& s : varying_schedule_labels()) v.push_back(s);
    return v;
}

inline ResolutionSchedule schedule_from_label(const std::string& label) {
    auto fixed = fixed_schedule_labels();
    ResolutionSchedule s;
    if (std::find(fixed.begin(), fixed.end(), label) != fixed.end()) {
        s.kind = ResolutionSchedule::Kind::Fixed;
        s.start_size = s.end_size = std::stoi(label);
        return s;
    }
    // AtoB: linear ramp; AtoBtoA: ramp to the trough and back
    size_t p1 = label.find("to");
    size_t p2 = p1 == std::string::npos ? std::string::npos : label.find("to", p1 + 2);
    auto fail = [&]() -> ArgumentError {
        std::string valid;
        for (const auto& l : all_schedule_labels()) valid += (valid.empty() ? "" : ", ") + l;
        return ArgumentError("unknown resolution schedule '" + label + "' (valid: " + valid + ")");
    };
    try {
        if (p1 == std::string::npos) throw fail();
        int a = std::stoi(label.substr(0, p1));
        if (p2 == std::string::npos) {
            int b = std::stoi(label.substr(p1 + 2));
            s.kind = ResolutionSchedule::Kind::RampDown;
            s.start_size = a;
            s.end_size = b;
        } else {
            int b = std::stoi(label.substr(p1 + 2, p2 - p1 - 2));
            int a2 = std::stoi(label.substr(p2 + 2));
            if (a2 != a) throw fail();
            s.kind = ResolutionSchedule::Kind::RampDownUp;
            s.start_size = a;
            s.end_size = b;
        }
    } catch (const std::invalid_argument&) {
        throw fail();
    } catch (const std::out_of_range&) {
        throw fail();
    }
    s.validate();
    return s;
}

struct ScheduleEval {
    std::string label;
    MetricsReport metrics;
    // first video's first window, handy for the signal-overlay plot
    std::vector<double> first_pred, first_gt;
};

// Evaluate one checkpointed model over a set of videos under a resolution
// schedule applied per inference window.
inline ScheduleEval eval_schedule(const std::vector<SyntheticClip>& videos,
                                  const ModelParams& params, const RunConfig& cfg,
                                  const std::string& label,
                                  std::vector<EvalResult>* per_video = nullptr) {
    const ModelConfig mc = cfg.model_config();
    ResolutionSchedule sched = schedule_from_label(label);
    ScheduleEval out;
    out.label = label;
    auto model = [&](const VideoClip& clip) {
        NoGradGuard ng;
        auto sizes = schedule_resolution(sched, (int)clip.size());
        VideoClip sized;
        sized.reserve(clip.size());
        for (size_t t = 0; t < clip.size(); ++t)
            sized.push_back(bilinear_resize(clip[t], sizes[t].first, sizes[t].second));
        Tensor y = model_forward(sized, params, mc);
        if (out.first_pred.empty()) out.first_pred = y.data();
        return y;
    };
    std::vector<MetricsReport> reports;
    for (const auto& v : videos) {
        EvalResult r = eval_video(model, v, cfg.eval);
        reports.push_back(r.report);
        if (per_video) per_video->push_back(std::move(r));
    }
    if (!videos.empty()) {
        int n = std::min<int>(cfg.eval.clip_len, (int)videos.front().gt_signal.size());
        out.first_gt.assign(videos.front().gt_signal.begin(),
                            videos.front().gt_signal.begin() + n);
    }
    out.metrics = merge_reports(reports);
    return out;
}

struct AblationRow {
    std::string variant;
    std::map<std::string, double> mae_by_schedule;
};

inline std::vector<std::pair<std::string, RunConfig>> ablation_variants(const RunConfig& base) {
    auto with = [&](auto f) {
        RunConfig c = base;
        f(c);
        return c;
    };
    std::vector<std::pair<std::string, RunConfig>> v;
    v.push_back({"baseline", with([](RunConfig& c) {
                     c.model.use_pfe = false;
                     c.model.tfa_mode = TfaMode::Off;
                 })});
    v.push_back({"pfe_no_rae", with([](RunConfig& c) {
                     c.model.tfa_mode = TfaMode::Off;
                     c.model.use_rae = false;
                 })});
    v.push_back({"pfe_no_crc", with([](RunConfig& c) {
                     c.model.tfa_mode = TfaMode::Off;
                     c.train.alpha = 0.0;
                 })});
    v.push_back({"pfe", with([](RunConfig& c) { c.model.tfa_mode = TfaMode::Off; })});
    v.push_back({"tfa", with([](RunConfig& c) { c.model.use_pfe = false; })});
    v.push_back({"tfa_single_pfe",
                 with([](RunConfig& c) { c.model.tfa_mode = TfaMode::Single; })});
    v.push_back({"tfa_pfe", with([](RunConfig&) {})});
    return v;
}

inline std::vector<std::string> ablation_mode_names() {
    return {"baseline", "pfe_no_rae", "pfe_no_crc", "pfe",    "tfa",    "tfa_single_pfe",
            "tfa_pfe",  "pfe_n1",     "pfe_n3",     "pfe_n5", "pfe_n7"};
}

// Map a mode name to a config; pfe_n<k> widens the neighborhood stack.
inline RunConfig ablation_mode_config(const RunConfig& base, const std::string& mode) {
    for (auto& [name, cfg] : ablation_variants(base))
        if (name == mode) return cfg;
    if (mode.rfind("pfe_n", 0) == 0) {
        for (int n : {1, 3, 5, 7})
            if (mode == "pfe_n" + std::to_string(n)) {
                RunConfig c = base;
                c.model.tfa_mode = TfaMode::Off;
                c.model.n = n;
                return c;
            }
    }
    std::string valid;
    for (const auto& m : ablation_mode_names()) valid += (valid.empty() ? "" : ", ") + m;
    throw ArgumentError("unknown ablation mode '" + mode + "' (valid: " + valid + ")");
}

inline std::string ablation_table(const std::vector<AblationRow>& rows,
                                  const std::vector<std::string>& schedules) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "variant";
    for (const auto& s : schedules) os << std::right << std::setw(14) << s;
    os << '\n';
    for (const auto& r : rows) {
        os << std::left << std::setw(16) << r.variant;
        for (const auto& s : schedules) {
            auto it = r.mae_by_schedule.find(s);
            if (it == r.mae_by_schedule.end())
                os << std::right << std::setw(14) << "-";
            else {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.3f", it->second);
                os << std::right << std::setw(14) << buf;
            }
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace arppg
