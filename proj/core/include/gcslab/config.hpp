#pragma once

#include "gcslab/beg.hpp"
#include "gcslab/losses.hpp"
#include "gcslab/types.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace gcslab {

/// Flat `key = value` configuration with dotted keys, `#` comments, UTF-8.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, int value);
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, bool value);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Canonical text form: sorted keys, `key = value`, LF endings.
    std::string serialize() const;
    void write(const std::string& path) const;

private:
    std::map<std::string, std::string> values_;
};

/// Fully-typed run configuration. from_config materializes defaults;
/// to_config round-trips every field so run.lock replays are exact.
struct RunConfig {
    std::uint64_t seed = 1;
    int epochs = 5000;
    int batch = 4;
    int n_splats = 64;
    int delta = 100;
    int n_poses = 8;
    int snapshot_every = 500;

    CanvasDims canvas{16, 16, 4};
    std::string schedule_kind = "vp-linear";
    int schedule_steps = 1000;

    std::string teacher_file;        // empty: build the reference teacher
    double teacher_variance = 0.0025; // 0.05^2
    std::string condition_label = "target";

    LossSpec loss;

    bool beg_enabled = true;
    BegConfig beg;

    double lr_position = 1e-3;
    double lr_color = 5e-3;
    double lr_scale = 1e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 2e-3;

    int decoder_upsample = 2;
    std::uint64_t decoder_seed = 7;

    std::string out_dir = "runs/out";

    static RunConfig from_config(const Config& cfg);
    Config to_config() const;

    void validate() const;
};

} // namespace gcslab
