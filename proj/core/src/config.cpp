#include "gcslab/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gcslab {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key");
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

void Config::set(const std::string& key, double value) { values_[key] = format_double(value); }
void Config::set(const std::string& key, int value) { values_[key] = std::to_string(value); }
void Config::set(const std::string& key, std::uint64_t value) {
    values_[key] = std::to_string(value);
}
void Config::set(const std::string& key, bool value) {
    values_[key] = value ? "true" : "false";
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not a number: " + it->second);
    }
}

int Config::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        std::uint64_t v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config key " + key + ": not a boolean: " + it->second);
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [key, value] : values_) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

void Config::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << serialize();
    if (!out) throw std::runtime_error("failed writing config file: " + path);
}

RunConfig RunConfig::from_config(const Config& cfg) {
    RunConfig rc;
    rc.seed = cfg.get_u64("train.seed", rc.seed);
    rc.epochs = cfg.get_int("train.epochs", rc.epochs);
    rc.batch = cfg.get_int("train.batch", rc.batch);
    rc.n_splats = cfg.get_int("train.n_splats", rc.n_splats);
    rc.delta = cfg.get_int("train.delta", rc.delta);
    rc.n_poses = cfg.get_int("train.views", rc.n_poses);
    rc.snapshot_every = cfg.get_int("train.snapshot_every", rc.snapshot_every);

    rc.canvas.height = cfg.get_int("canvas.h", rc.canvas.height);
    rc.canvas.width = cfg.get_int("canvas.w", rc.canvas.width);
    rc.canvas.channels = cfg.get_int("canvas.c", rc.canvas.channels);

    rc.schedule_kind = cfg.get_string("schedule.kind", rc.schedule_kind);
    rc.schedule_steps = cfg.get_int("schedule.steps", rc.schedule_steps);

    rc.teacher_file = cfg.get_string("teacher.file", rc.teacher_file);
    rc.teacher_variance = cfg.get_double("teacher.variance", rc.teacher_variance);
    rc.condition_label = cfg.get_string("teacher.condition", rc.condition_label);

    rc.loss.kind = loss_kind_from_string(cfg.get_string("loss.kind", to_string(rc.loss.kind)));
    rc.loss.cfg_weight = cfg.get_double("loss.w", rc.loss.cfg_weight);
    rc.loss.w_cc = cfg.get_double("loss.w_cc", rc.loss.w_cc);
    rc.loss.w_cg = cfg.get_double("loss.w_cg", rc.loss.w_cg);
    rc.loss.w_cp = cfg.get_double("loss.w_cp", rc.loss.w_cp);
    rc.loss.omega = weight_fn_from_string(cfg.get_string("loss.omega", to_string(rc.loss.omega)));
    rc.loss.c_fn = weight_fn_from_string(cfg.get_string("loss.c", to_string(rc.loss.c_fn)));
    rc.loss.grad_mode =
        grad_mode_from_string(cfg.get_string("loss.grad_mode", to_string(rc.loss.grad_mode)));
    rc.loss.cg_cfg_weight = cfg.get_double("loss.cg_cfg_weight", rc.loss.cg_cfg_weight);
    rc.loss.cfg_mode =
        cfg_mode_from_string(cfg.get_string("solver.cfg_mode", to_string(rc.loss.cfg_mode)));
    rc.loss.solver_order = cfg.get_int("solver.order", rc.loss.solver_order);
    rc.loss.inversion_steps = cfg.get_int("solver.inversion_steps", rc.loss.inversion_steps);

    rc.beg_enabled = cfg.get_bool("beg.enabled", rc.beg_enabled);
    rc.beg.m = cfg.get_double("beg.m", rc.beg.m);
    rc.beg.t_gs = cfg.get_double("beg.t_gs", rc.beg.t_gs);
    rc.beg.t_b = cfg.get_double("beg.t_b", rc.beg.t_b);

    rc.lr_position = cfg.get_double("lr.position", rc.lr_position);
    rc.lr_color = cfg.get_double("lr.color", rc.lr_color);
    rc.lr_scale = cfg.get_double("lr.scale", rc.lr_scale);
    rc.lr_rotation = cfg.get_double("lr.rotation", rc.lr_rotation);
    rc.lr_opacity = cfg.get_double("lr.opacity", rc.lr_opacity);

    rc.decoder_upsample = cfg.get_int("decoder.upsample", rc.decoder_upsample);
    rc.decoder_seed = cfg.get_u64("decoder.seed", rc.decoder_seed);

    rc.out_dir = cfg.get_string("out.dir", rc.out_dir);
    rc.validate();
    return rc;
}

Config RunConfig::to_config() const {
    Config cfg;
    cfg.set("train.seed", seed);
    cfg.set("train.epochs", epochs);
    cfg.set("train.batch", batch);
    cfg.set("train.n_splats", n_splats);
    cfg.set("train.delta", delta);
    cfg.set("train.views", n_poses);
    cfg.set("train.snapshot_every", snapshot_every);
    cfg.set("canvas.h", canvas.height);
    cfg.set("canvas.w", canvas.width);
    cfg.set("canvas.c", canvas.channels);
    cfg.set("schedule.kind", schedule_kind);
    cfg.set("schedule.steps", schedule_steps);
    cfg.set("teacher.file", teacher_file);
    cfg.set("teacher.variance", teacher_variance);
    cfg.set("teacher.condition", condition_label);
    cfg.set("loss.kind", to_string(loss.kind));
    cfg.set("loss.w", loss.cfg_weight);
    cfg.set("loss.w_cc", loss.w_cc);
    cfg.set("loss.w_cg", loss.w_cg);
    cfg.set("loss.w_cp", loss.w_cp);
    cfg.set("loss.omega", to_string(loss.omega));
    cfg.set("loss.c", to_string(loss.c_fn));
    cfg.set("loss.grad_mode", to_string(loss.grad_mode));
    cfg.set("loss.cg_cfg_weight", loss.cg_cfg_weight);
    cfg.set("solver.cfg_mode", to_string(loss.cfg_mode));
    cfg.set("solver.order", loss.solver_order);
    cfg.set("solver.inversion_steps", loss.inversion_steps);
    cfg.set("beg.enabled", beg_enabled);
    cfg.set("beg.m", beg.m);
    cfg.set("beg.t_gs", beg.t_gs);
    cfg.set("beg.t_b", beg.t_b);
    cfg.set("lr.position", lr_position);
    cfg.set("lr.color", lr_color);
    cfg.set("lr.scale", lr_scale);
    cfg.set("lr.rotation", lr_rotation);
    cfg.set("lr.opacity", lr_opacity);
    cfg.set("decoder.upsample", decoder_upsample);
    cfg.set("decoder.seed", decoder_seed);
    cfg.set("out.dir", out_dir);
    return cfg;
}

void RunConfig::validate() const {
    require(epochs >= 1, "train.epochs must be >= 1");
    require(batch >= 1, "train.batch must be >= 1");
    require(n_splats >= 1, "train.n_splats must be >= 1");
    require(n_poses >= 1, "train.views must be >= 1");
    require(delta >= 10, "train.delta must be >= 10");
    require(schedule_steps >= 2, "schedule.steps must be >= 2");
    require(teacher_variance > 0.0, "teacher.variance must be > 0");
    require(lr_position > 0 && lr_color > 0 && lr_scale > 0 && lr_rotation > 0 &&
                lr_opacity > 0,
            "learning rates must be > 0");
    loss.validate();
    beg.validate();
}

} // namespace gcslab
