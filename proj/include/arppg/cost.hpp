#pragma once

#include "arppg/config.hpp"

namespace arppg {

struct ModuleCost {
    std::string name;
    int64_t params = 0;
    int64_t flops = 0;  // 2 * multiply-accumulates
};

struct CostReport {
    std::vector<ModuleCost> modules;
    int64_t total_params = 0;
    int64_t total_flops = 0;
};

// Analytic parameter and FLOP counts for the inference path (one PFE stream).
// FLOPs count 2*MAC for conv/linear layers; elementwise work and the
// non-parametric flow solver are excluded. input_h/input_w is the raw frame
// size fed to the first PFE conv (defaults to the canonical stream size).
inline CostReport compute_cost(const RunConfig& cfg, int T = 0, int input_h = 0, int input_w = 0) {
    const ModelConfig m = cfg.model_config();
    if (T <= 0) T = cfg.T;
    if (input_h <= 0) input_h = m.H;
    if (input_w <= 0) input_w = m.W;
    const int64_t C = m.C, B = m.backbone_channels;
    const int64_t H = m.H, W = m.W;
    const int64_t sh = m.stream_h(), sw = m.stream_w();
    auto conv_flops = [](int64_t cin, int64_t k, int64_t cout, int64_t positions) {
        return 2 * cin * k * cout * positions;
    };

    CostReport r;
    if (m.use_pfe) {
        ModuleCost pfe{"pfe", 0, 0};
        int64_t mlp_in = (int64_t)m.n * m.n * C + (m.use_rae ? 2 : 0);
        int64_t hid = m.mlp_hidden;
        pfe.params = C * 3 * 25 + 2 * C + hid * mlp_in + hid + C * hid + C;
        pfe.flops = T * (conv_flops(3, 25, C, (int64_t)input_h * input_w) +
                         conv_flops(mlp_in, 1, hid, H * W) + conv_flops(hid, 1, C, H * W));
        r.modules.push_back(pfe);
        // the second training view carries its own PFE stream; inference uses
        // only the first, so its FLOPs stay at zero
        r.modules.push_back({"pfe_view2", pfe.params, 0});
    } else {
        // fixed-resolution conv stem used by the no-PFE baseline
        ModuleCost stem{"conv_stem", C * 3 * 25 + 2 * C,
                        T * conv_flops(3, 25, C, sh * sw)};
        r.modules.push_back(stem);
        r.modules.push_back({"conv_stem_view2", stem.params, 0});
    }
    if (m.tfa_mode != TfaMode::Off) {
        ModuleCost tfa{"tfa", 0, 0};
        int dirs = m.tfa_mode == TfaMode::Bidirectional ? 2 : 1;
        int64_t entry_p = C * (3 + C) * 9 + C;
        int64_t rb_p = m.num_resblocks * (2 * (C * C * 9 + C) + 2 * C);
        int64_t agg_in = dirs * C;
        tfa.params = dirs * (entry_p + rb_p) + C * agg_in + C;
        int64_t pos = sh * sw;
        tfa.flops = T * (dirs * (conv_flops(3 + C, 9, C, pos) +
                                 m.num_resblocks * 2 * conv_flops(C, 9, C, pos)) +
                         conv_flops(agg_in, 1, C, pos));
        r.modules.push_back(tfa);
    }
    {
        ModuleCost bb{"backbone", 0, 0};
        // stages 0..3 with spatial pooling after stages 0 and 1
        int64_t ins[4] = {C, B, B, B};
        int64_t hs[4] = {sh, sh / 2, sh / 4, sh / 4};
        int64_t ws[4] = {sw, sw / 2, sw / 4, sw / 4};
        for (int s = 0; s < 4; ++s) {
            bb.params += B * ins[s] * 27 + B + 2 * B;
            bb.flops += conv_flops(ins[s], 27, B, (int64_t)T * hs[s] * ws[s]);
        }
        bb.params += B + 1;  // 1x1x1 head
        bb.flops += conv_flops(B, 1, 1, (int64_t)T * (sh / 4) * (sw / 4));
        r.modules.push_back(bb);
    }
    for (const auto& mod : r.modules) {
        r.total_params += mod.params;
        r.total_flops += mod.flops;
    }
    return r;
}

inline nlohmann::json cost_to_json(const CostReport& r) {
    nlohmann::json mods = nlohmann::json::array();
    for (const auto& m : r.modules)
        mods.push_back({{"name", m.name}, {"params", m.params}, {"flops", m.flops}});
    return {{"modules", mods}, {"total_params", r.total_params}, {"total_flops", r.total_flops}};
}

}  // namespace arppg
