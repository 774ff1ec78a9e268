#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "adaradar/config.hpp"
#include "adaradar/dataset.hpp"
#include "adaradar/tensor_io.hpp"
#include "adaradar/train.hpp"

using namespace adaradar;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help)
{
    cmd->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Overrides the config seed");
    cmd->add_option("--out", c.out, out_help);
}

TrainConfig load(const Common& c)
{
    TrainConfig config = c.config.empty() ? TrainConfig{} : load_train_config(c.config);
    if (c.seed) {
        config.seed = *c.seed;
    }
    return config;
}

synth::Dataset open_dataset(const std::string& dir)
{
    if (!fs::exists(fs::path(dir) / "manifest.json")) {
        throw std::runtime_error("no dataset at '" + dir + "' (run `adaradar generate` first)");
    }
    return synth::read_dataset(dir);
}

void print_report(const std::string& label, const EvalReport& r)
{
    std::printf("%-6s mIoU RD %.4f  RA %.4f   mDice RD %.4f  RA %.4f\n", label.c_str(), r.rd.miou,
                r.ra.miou, r.rd.mdice, r.ra.mdice);
}

int cmd_generate(const Common& c)
{
    TrainConfig config = load(c);
    std::string dir = c.out.empty() ? config.dataset : c.out;
    synth::Dataset data = synth::generate_dataset(generate_options(config), config.seed);
    synth::write_dataset(data, dir);
    std::printf("wrote %zu samples (%zu train, %zu val, %zu test) to %s\n", data.samples.size(),
                data.split(synth::Split::Train).size(), data.split(synth::Split::Val).size(),
                data.split(synth::Split::Test).size(), dir.c_str());
    return 0;
}

int cmd_train(const Common& c)
{
    TrainConfig config = load(c);
    std::string out = c.out.empty() ? "run" : c.out;
    synth::Dataset data = open_dataset(config.dataset);
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "config.json") << train_config_json(config) << '\n';
    TrainResult r = train(config, data, out, [](const EpochLog& e) {
        std::printf("epoch %3zu  lr %.3g  loss %.4f (oc %.4f cl %.4f sd %.4f mv %.4f)  val mIoU RD %.4f RA %.4f\n",
                    e.epoch, e.lr, e.total, e.oc, e.cl, e.sd, e.mv, e.val_miou_rd, e.val_miou_ra);
        std::fflush(stdout);
    });
    std::printf("kept epoch %ld; wrote %s\n", r.best_epoch, out.c_str());
    return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& split_name)
{
    TrainConfig config = load(c);
    std::string ckpt = checkpoint.empty() ? (fs::path(c.out.empty() ? "run" : c.out) / "checkpoint.adck").string()
                                          : checkpoint;
    TransRadarNet model = load_checkpoint(ckpt);
    synth::Dataset data = open_dataset(config.dataset);
    synth::Split split = synth::parse_split(split_name);
    EvalReport r = evaluate(model, data, split);
    print_report(split_name, r);
    std::cout << report_csv_header(model.config().num_classes, "view") << '\n'
              << report_csv_row(r.rd, "RD") << '\n'
              << report_csv_row(r.ra, "RA") << '\n';
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        nlohmann::ordered_json j;
        j["split"] = split_name;
        j["rd"] = nlohmann::ordered_json::parse(report_json(r.rd));
        j["ra"] = nlohmann::ordered_json::parse(report_json(r.ra));
        std::ofstream(fs::path(c.out) / ("eval_" + split_name + ".json")) << j.dump(2) << '\n';
    }
    return 0;
}

int cmd_gradcheck(const Common& c, bool corrupt, bool constant_loss)
{
    GradCheckCommand cmd;
    cmd.seed = c.seed.value_or(0);
    cmd.corrupt = corrupt;
    cmd.constant_loss = constant_loss;
    GradCheckReport r = gradcheck_command(cmd);
    std::printf("%s\n", r.summary().c_str());
    return r.passed ? 0 : 1;
}

int cmd_ablate(const Common& c, std::size_t n_seeds)
{
    TrainConfig config = load(c);
    std::string out = c.out.empty() ? "ablation" : c.out;
    synth::Dataset data = open_dataset(config.dataset);
    auto rows = config.ablation.empty() ? default_ablation_matrix() : config.ablation;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n_seeds; ++i) {
        seeds.push_back(config.seed + i);
    }
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "ablation.csv");
    csv << ablation_csv_header() << '\n';
    std::map<std::string, std::pair<double, double>> sums;
    std::map<std::string, int> counts;
    auto results = ablate(config, data, rows, seeds, [&](const AblationResult& r) {
        csv << ablation_csv_row(r) << '\n';
        csv.flush();
        if (r.ok) {
            std::printf("%-14s seed %llu  val mIoU RD %.4f  RA %.4f\n", r.row.name.c_str(),
                        static_cast<unsigned long long>(r.seed), r.val_miou_rd, r.val_miou_ra);
        } else {
            std::printf("%-14s seed %llu  FAILED: %s\n", r.row.name.c_str(),
                        static_cast<unsigned long long>(r.seed), r.error.c_str());
        }
        std::fflush(stdout);
    });
    std::printf("\n%-14s %10s %10s\n", "row", "mIoU RD", "mIoU RA");
    for (const auto& row : rows) {
        double rd = 0, ra = 0;
        int n = 0;
        for (const auto& r : results) {
            if (r.ok && r.row.name == row.name) {
                rd += r.val_miou_rd;
                ra += r.val_miou_ra;
                ++n;
            }
        }
        if (n) {
            std::printf("%-14s %10.4f %10.4f\n", row.name.c_str(), rd / n, ra / n);
        } else {
            std::printf("%-14s %10s %10s\n", row.name.c_str(), "failed", "failed");
        }
    }
    return 0;
}

int cmd_infer(const Common& c, const std::string& checkpoint, const std::string& split_name)
{
    TrainConfig config = load(c);
    std::string out = c.out.empty() ? "predictions" : c.out;
    TransRadarNet model = load_checkpoint(checkpoint);
    synth::Dataset data = open_dataset(config.dataset);
    check_compatible(data, model.config());
    auto samples = data.split(synth::parse_split(split_name));
    if (samples.empty()) {
        throw std::runtime_error(split_name + " split is empty");
    }
    fs::create_directories(out);
    std::size_t k = model.config().num_classes;
    for (const synth::Sample* s : samples) {
        SegMasks m = model.forward(s->views);
        fs::path base = fs::path(out) / s->id;
        save_tensor(base.string() + "_rd.adrt", m.rd_probs.value());
        save_tensor(base.string() + "_ra.adrt", m.ra_probs.value());
        write_pgm(base.string() + "_rd.pgm", argmax_labels(m.rd_probs.value()), k);
        write_pgm(base.string() + "_ra.pgm", argmax_labels(m.ra_probs.value()), k);
        write_pgm(base.string() + "_rd_gt.pgm", s->target_rd(), k);
        write_pgm(base.string() + "_ra_gt.pgm", s->target_ra(), k);
    }
    std::printf("wrote predictions for %zu samples to %s\n", samples.size(), out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adaptive-attention radar segmentation on synthetic data"};
    app.require_subcommand(1);

    Common gen, tr, ev, gc, ab, inf;
    add_common(app.add_subcommand("generate", "Write a synthetic dataset"), gen,
               "Dataset directory (default: config dataset)");

    add_common(app.add_subcommand("train", "Train and keep the best-val checkpoint"), tr,
               "Run directory (default: run)");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    add_common(eval, ev, "Run directory holding checkpoint.adck; also receives eval_<split>.json");
    std::string eval_ckpt, eval_split = "test";
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
    eval->add_option("--split", eval_split, "train, val or test");

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the micro model");
    add_common(grad, gc, "Unused");
    bool corrupt = false, constant_loss = false;
    grad->add_flag("--corrupt", corrupt, "Perturb one analytic gradient (must fail)");
    grad->add_flag("--constant-loss", constant_loss, "Check a parameter-independent loss");

    auto* abl = app.add_subcommand("ablate", "Train every ablation row, write ablation.csv");
    add_common(abl, ab, "Output directory (default: ablation)");
    std::size_t n_seeds = 1;
    abl->add_option("--seeds", n_seeds, "Number of consecutive seeds per row")->check(CLI::PositiveNumber);

    auto* infer = app.add_subcommand("infer", "Write predicted probabilities and PGM previews");
    add_common(infer, inf, "Output directory (default: predictions)");
    std::string infer_ckpt, infer_split = "test";
    infer->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
    infer->add_option("--split", infer_split, "train, val or test");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("generate")) return cmd_generate(gen);
        if (app.got_subcommand("train")) return cmd_train(tr);
        if (app.got_subcommand("eval")) return cmd_eval(ev, eval_ckpt, eval_split);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck(gc, corrupt, constant_loss);
        if (app.got_subcommand("ablate")) return cmd_ablate(ab, n_seeds);
        if (app.got_subcommand("infer")) return cmd_infer(inf, infer_ckpt, infer_split);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
