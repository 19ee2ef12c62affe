#include "gcslab/harness.hpp"
#include "gcslab/image_io.hpp"
#include "gcslab/renderer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace gcslab;

// Every RunConfig key is mirrored as a --key override.
void add_override_options(CLI::App* cmd, std::map<std::string, std::string>* overrides) {
    for (const auto& [key, value] : RunConfig().to_config().values()) {
        std::string name = "--" + key;
        cmd->add_option_function<std::string>(
               name, [overrides, k = key](const std::string& v) { (*overrides)[k] = v; })
            ->type_name("VALUE")
            ->group("Config overrides");
    }
}

RunConfig load_run_config(const std::string& path,
                          const std::map<std::string, std::string>& overrides) {
    Config cfg = Config::parse_file(path);
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    return RunConfig::from_config(cfg);
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::string token;
    for (char ch : csv + ",") {
        if (ch == ',') {
            if (!token.empty()) out.push_back(std::stoi(token));
            token.clear();
        } else {
            token.push_back(ch);
        }
    }
    require(!out.empty(), "empty integer list");
    return out;
}

std::vector<std::string> parse_str_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string token;
    for (char ch : csv + ",") {
        if (ch == ',') {
            if (!token.empty()) out.push_back(token);
            token.clear();
        } else {
            token.push_back(ch);
        }
    }
    require(!out.empty(), "empty list");
    return out;
}

int cmd_render(const std::string& scene_path, const std::string& pose_token,
               const std::string& out_prefix) {
    SplatScene scene = SplatScene::load(scene_path);
    int pose_id = 0;
    if (pose_token.rfind("pose", 0) == 0) {
        pose_id = std::stoi(pose_token.substr(4));
    } else {
        pose_id = std::stoi(pose_token);
    }
    int n_poses = 8;
    LatentImage img = render(scene, make_view(pose_id % n_poses, n_poses));

    std::string prefix = out_prefix.empty() ? pose_token : out_prefix;
    write_ppm(prefix + ".ppm", img);
    Decoder decoder(scene.canvas);
    write_ppm(prefix + "_decoded.ppm", decoder.decode_image(img));
    for (int c = 0; c < scene.canvas.channels; ++c) {
        write_pgm(prefix + "_c" + std::to_string(c) + ".pgm", img, c);
    }
    std::printf("wrote %s.ppm (+decoded, +%d channel pgms)\n", prefix.c_str(),
                scene.canvas.channels);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gcslab - score/consistency distillation laboratory"};
    app.require_subcommand(1);

    std::map<std::string, std::string> overrides;
    std::string config_path, deltas_csv = "25,50,100,200";
    std::string losses_csv = "sds,isd,cds,cc+cg,gcs";
    std::string scene_path, pose_token, out_prefix;
    int beg_epochs = 200;

    CLI::App* train_cmd = app.add_subcommand("train", "run the optimization loop");
    train_cmd->add_option("config", config_path, "run config file")->required();
    train_cmd->add_option("--loss", overrides["loss.kind"], "loss kind (alias of --loss.kind)");
    train_cmd->add_option("--cfg-weight", overrides["loss.w"], "CFG weight (alias of --loss.w)");
    add_override_options(train_cmd, &overrides);

    CLI::App* sweep_cmd = app.add_subcommand("sweep-dt", "endpoint error vs step size");
    sweep_cmd->add_option("config", config_path)->required();
    sweep_cmd->add_option("--deltas", deltas_csv, "comma-separated step sizes");
    add_override_options(sweep_cmd, &overrides);

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "loss-zoo comparison grid");
    ablate_cmd->add_option("config", config_path)->required();
    ablate_cmd->add_option("--losses", losses_csv, "comma-separated loss tokens");
    add_override_options(ablate_cmd, &overrides);

    CLI::App* beg_cmd = app.add_subcommand("beg-ab", "brightness-equalization A/B driver");
    beg_cmd->add_option("config", config_path)->required();
    beg_cmd->add_option("--epochs", beg_epochs, "driver epochs");
    add_override_options(beg_cmd, &overrides);

    CLI::App* render_cmd = app.add_subcommand("render", "render a scene file at a pose");
    render_cmd->add_option("scene", scene_path, "scene file")->required();
    render_cmd->add_option("pose", pose_token, "pose id (pose0..pose7 or integer)")->required();
    render_cmd->add_option("--out", out_prefix, "output path prefix");

    CLI::App* verify_cmd = app.add_subcommand("verify-bound", "solver-order slope fit");
    verify_cmd->add_option("config", config_path)->required();
    add_override_options(verify_cmd, &overrides);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        // Aliases may have registered empty entries; drop them.
        for (auto it = overrides.begin(); it != overrides.end();) {
            it = it->second.empty() ? overrides.erase(it) : std::next(it);
        }

        if (train_cmd->parsed()) {
            TrainOutput out = run_train(load_run_config(config_path, overrides));
            std::printf("train: %d epochs, dist %.6f -> %.6f, metrics at %s\n",
                        int(out.result.metrics.size()), out.result.initial_dist,
                        out.result.final_dist, out.metrics_path.c_str());
            return 0;
        }
        if (sweep_cmd->parsed()) {
            RunConfig cfg = load_run_config(config_path, overrides);
            std::string dir = resolve_out_dir(cfg.out_dir);
            std::filesystem::create_directories(dir);
            std::string csv = (std::filesystem::path(dir) / "sweep_dt.csv").string();
            SweepDtResult res =
                run_sweep_dt(cfg, parse_int_list(deltas_csv), cfg.loss.solver_order, csv);
            std::printf("sweep-dt: slope %.3f (R2 %.3f), data at %s\n", res.fit.slope,
                        res.fit.r2, csv.c_str());
            return 0;
        }
        if (ablate_cmd->parsed()) {
            RunConfig cfg = load_run_config(config_path, overrides);
            AblateResult res = run_ablate(cfg, parse_str_list(losses_csv));
            for (size_t i = 0; i < res.names.size(); ++i) {
                std::printf("ablate %-8s final dist %.6f\n", res.names[i].c_str(),
                            res.final_dist[i]);
            }
            return 0;
        }
        if (beg_cmd->parsed()) {
            RunConfig cfg = load_run_config(config_path, overrides);
            BegAbResult res = run_beg_ab(cfg, beg_epochs);
            std::printf("beg-ab: final p85 %.6f (off) vs %.6f (on)\n", res.final_disabled,
                        res.final_enabled);
            return 0;
        }
        if (render_cmd->parsed()) {
            return cmd_render(scene_path, pose_token, out_prefix);
        }
        if (verify_cmd->parsed()) {
            RunConfig cfg = load_run_config(config_path, overrides);
            VerifyBoundResult res = run_verify_bound(cfg);
            std::printf("order-1 slope %.3f +- %.3f (R2 %.3f)\n", res.order1.slope,
                        res.order1.slope_stderr, res.order1.r2);
            std::printf("order-2 slope %.3f +- %.3f (R2 %.3f)\n", res.order2.slope,
                        res.order2.slope_stderr, res.order2.r2);
            std::printf("error growth vs (T - e): slope %.3g (R2 %.3f)\n", res.growth.slope,
                        res.growth.r2);
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 1;
    }
    return 2;
}
