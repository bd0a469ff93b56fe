#pragma once

#include "arppg/config.hpp"
#include "arppg/optim.hpp"

namespace arppg {

struct Checkpoint {
    RunConfig config;
    ModelParams params;
    AdamState adam;
    int epoch = 0;
    double best_val_mae = std::numeric_limits<double>::infinity();
    std::string rng_state;  // training stream state for bit-exact resume
};

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), s.size());
}
inline void put_vec(std::ostream& os, const std::vector<double>& v) {
    put_u64(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

inline uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline std::string get_str(std::istream& is) {
    std::string s(get_u64(is), '\0');
    is.read(s.data(), s.size());
    return s;
}
inline std::vector<double> get_vec(std::istream& is) {
    std::vector<double> v(get_u64(is));
    is.read(reinterpret_cast<char*>(v.data()), v.size() * sizeof(double));
    return v;
}

constexpr char kCkptMagic[8] = {'A', 'R', 'P', 'P', 'G', 'C', 'K', '1'};

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ArgumentError("checkpoint: cannot write " + path.string());
    f.write(detail::kCkptMagic, 8);
    detail::put_u32(f, 1);  // format version
    detail::put_str(f, config_to_json(ck.config).dump());
    detail::put_u32(f, static_cast<uint32_t>(ck.epoch));
    detail::put_f64(f, ck.best_val_mae);
    detail::put_str(f, ck.rng_state);
    ParamSet ps = ck.params.collect(ck.config.model_config());
    detail::put_u64(f, ps.size());
    for (const auto& np : ps) {
        detail::put_str(f, np.name);
        const Shape& s = np.tensor.shape();
        detail::put_u32(f, static_cast<uint32_t>(s.size()));
        for (int d : s) detail::put_u32(f, static_cast<uint32_t>(d));
        detail::put_vec(f, np.tensor.data());
    }
    detail::put_u64(f, static_cast<uint64_t>(ck.adam.step));
    detail::put_u64(f, ck.adam.m.size());
    for (size_t k = 0; k < ck.adam.m.size(); ++k) {
        detail::put_vec(f, ck.adam.m[k]);
        detail::put_vec(f, ck.adam.v[k]);
    }
    if (!f) throw ArgumentError("checkpoint: write failure on " + path.string());
}

// Loads a checkpoint, rebuilding ModelParams from the stored config. When
// `expected` is given, its model/flow sections must match the stored ones.
inline Checkpoint load_checkpoint(const std::filesystem::path& path,
                                  const RunConfig* expected = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArgumentError("checkpoint: cannot open " + path.string());
    char magic[8] = {};
    f.read(magic, 8);
    if (std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw ArgumentError("checkpoint: bad magic in " + path.string());
    uint32_t version = detail::get_u32(f);
    if (version != 1)
        throw ArgumentError("checkpoint: unsupported format version " + std::to_string(version));
    Checkpoint ck;
    nlohmann::json stored = nlohmann::json::parse(detail::get_str(f));
    ck.config = config_from_json(stored);
    if (expected) {
        nlohmann::json want = config_to_json(*expected);
        if (stored["model"] != want["model"] || stored["flow"] != want["flow"])
            throw ArgumentError("checkpoint: stored model/flow config does not match the run config");
    }
    ck.epoch = static_cast<int>(detail::get_u32(f));
    ck.best_val_mae = detail::get_f64(f);
    ck.rng_state = detail::get_str(f);

    Rng shape_rng(0);
    ck.params = ModelParams::init(ck.config.model_config(), shape_rng);
    ParamSet ps = ck.params.collect(ck.config.model_config());
    uint64_t n = detail::get_u64(f);
    if (n != ps.size())
        throw ArgumentError("checkpoint: parameter count mismatch (" + std::to_string(n) +
                            " stored vs " + std::to_string(ps.size()) + " expected)");
    for (auto& np : ps) {
        std::string name = detail::get_str(f);
        if (name != np.name)
            throw ArgumentError("checkpoint: parameter order mismatch at '" + name + "'");
        uint32_t rank = detail::get_u32(f);
        Shape s(rank);
        for (auto& d : s) d = static_cast<int>(detail::get_u32(f));
        if (s != np.tensor.shape())
            throw ArgumentError("checkpoint: shape mismatch for '" + name + "'");
        np.tensor.data() = detail::get_vec(f);
        if (np.tensor.data().size() != static_cast<size_t>(np.tensor.numel()))
            throw ArgumentError("checkpoint: truncated data for '" + name + "'");
    }
    ck.adam.step = static_cast<int64_t>(detail::get_u64(f));
    uint64_t nk = detail::get_u64(f);
    ck.adam.m.resize(nk);
    ck.adam.v.resize(nk);
    for (uint64_t k = 0; k < nk; ++k) {
        ck.adam.m[k] = detail::get_vec(f);
        ck.adam.v[k] = detail::get_vec(f);
    }
    if (!f) throw ArgumentError("checkpoint: truncated file " + path.string());
    return ck;
}

}  // namespace arppg
