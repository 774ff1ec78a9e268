#include "adaradar/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "adaradar/tensor_io.hpp"
#include "json.hpp"

namespace adaradar {

using json = nlohmann::ordered_json;

void save_checkpoint(const std::filesystem::path& path, TransRadarNet& model)
{
    ParameterList params = model.parameters();
    json header;
    header["model"] = json::parse(model_config_json(model.config()));
    header["params"] = json::array();
    for (const Parameter* p : params) {
        header["params"].push_back({{"name", p->name()}, {"shape", p->value().shape()}});
    }
    std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot write checkpoint " + path.string());
    }
    os.write("ADCK", 4);
    os.put(static_cast<char>(kCheckpointVersion));
    auto n = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) {
        os.put(static_cast<char>((n >> (8 * i)) & 0xFF));
    }
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Parameter* p : params) {
        write_tensor(os, p->value());
    }
    if (!os) {
        throw std::runtime_error("error writing checkpoint " + path.string());
    }
}

TransRadarNet load_checkpoint(const std::filesystem::path& path)
{
    auto fail = [&](const std::string& what) {
        return std::runtime_error(path.string() + ": " + what);
    };
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw fail("cannot open checkpoint");
    }
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "ADCK") {
        throw fail("not a checkpoint (bad magic)");
    }
    int version = is.get();
    if (version != kCheckpointVersion) {
        throw fail("unsupported checkpoint version " + std::to_string(version));
    }
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) {
        int b = is.get();
        if (b < 0) {
            throw fail("truncated header");
        }
        n |= static_cast<std::uint32_t>(b) << (8 * i);
    }
    std::string text(n, '\0');
    is.read(text.data(), n);
    if (!is) {
        throw fail("truncated header");
    }

    json header;
    ModelConfig config;
    try {
        header = json::parse(text);
        config = parse_model_config(header.at("model").dump());
        config.validate();
    } catch (const std::exception& e) {
        throw fail(std::string("bad header: ") + e.what());
    }
    TransRadarNet model(config, 0);
    ParameterList params = model.parameters();
    const json& listed = header["params"];
    if (!listed.is_array() || listed.size() != params.size()) {
        throw fail("parameter count does not match the model");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (listed[i].value("name", "") != p.name()) {
            throw fail("expected parameter " + p.name() + ", found " + listed[i].value("name", "?"));
        }
        Tensor t;
        try {
            t = read_tensor(is);
        } catch (const std::exception& e) {
            throw fail(p.name() + ": " + e.what());
        }
        if (t.shape() != p.value().shape()) {
            throw fail("shape mismatch for " + p.name());
        }
        p.mutable_value() = t;
    }
    return model;
}

void check_compatible(const synth::Dataset& dataset, const ModelConfig& model)
{
    if (!(dataset.dims == model.dims)) {
        throw std::invalid_argument(
            "dataset cube is " + std::to_string(dataset.dims.range) + "x" +
            std::to_string(dataset.dims.angle) + "x" + std::to_string(dataset.dims.doppler) +
            " but the model expects " + std::to_string(model.dims.range) + "x" +
            std::to_string(model.dims.angle) + "x" + std::to_string(model.dims.doppler));
    }
    if (dataset.frames != model.frames) {
        throw std::invalid_argument("dataset has " + std::to_string(dataset.frames) +
                                    " frames but the model expects " + std::to_string(model.frames));
    }
    if (dataset.num_classes != model.num_classes) {
        throw std::invalid_argument("dataset has " + std::to_string(dataset.num_classes) +
                                    " classes but the model expects " +
                                    std::to_string(model.num_classes));
    }
}

EvalReport evaluate(const TransRadarNet& model, const std::vector<const synth::Sample*>& samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("evaluate: split is empty");
    }
    std::size_t k = model.config().num_classes;
    ConfusionMatrix rd(k), ra(k);
    for (const synth::Sample* s : samples) {
        SegMasks out = model.forward(s->views);
        rd.add(argmax_labels(out.rd_probs.value()), s->target_rd());
        ra.add(argmax_labels(out.ra_probs.value()), s->target_ra());
    }
    return {iou_dice(rd), iou_dice(ra)};
}

EvalReport evaluate(const TransRadarNet& model, const synth::Dataset& dataset, synth::Split split)
{
    check_compatible(dataset, model.config());
    auto samples = dataset.split(split);
    if (samples.empty()) {
        throw std::invalid_argument("evaluate: " + synth::split_name(split) + " split is empty");
    }
    return evaluate(model, samples);
}

Trainer::Trainer(const TrainConfig& config, Binarize mode)
    : config_(config), mode_(mode), model_(config.model, config.seed)
{
    config_.validate();
}

LossReport Trainer::loss(const std::vector<const synth::Sample*>& batch) const
{
    if (batch.empty()) {
        throw std::invalid_argument("empty batch");
    }
    std::size_t k = config_.model.num_classes;
    std::vector<Var> rd, ra;
    std::vector<Tensor> rd_gt, ra_gt;
    for (const synth::Sample* s : batch) {
        SegMasks out = model_.forward(s->views);
        rd.push_back(out.rd_probs);
        ra.push_back(out.ra_probs);
        rd_gt.push_back(one_hot(s->target_rd(), k));
        ra_gt.push_back(one_hot(s->target_ra(), k));
    }
    LossTerms terms = batch_terms(rd, ra, rd_gt, ra_gt, config_.loss, mode_);
    LossReport report = combine(terms, config_.loss);

    const std::pair<const char*, double> named[] = {
        {"oc", report.oc}, {"cl", report.cl}, {"sd", report.sd},
        {"mv", report.mv}, {"coherence", report.col}, {"total", report.total}};
    for (const auto& [name, v] : named) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("non-finite loss in term '" + std::string(name) + "'");
        }
    }
    return report;
}

LossReport Trainer::step(const std::vector<const synth::Sample*>& batch, double lr)
{
    LossReport report = loss(batch);
    ParameterList params = model_.parameters();
    zero_grads(params);
    report.objective.backward();
    adam_.step(params, lr);
    return report;
}

std::string epoch_csv_header()
{
    return "epoch,lr,oc,cl,sd,mv,col,total,val_miou_rd,val_miou_ra";
}

std::string epoch_csv_row(const EpochLog& e)
{
    char buf[320];
    std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", e.epoch, e.lr,
                  e.oc, e.cl, e.sd, e.mv, e.col, e.total, e.val_miou_rd, e.val_miou_ra);
    return buf;
}

namespace {

json eval_json(const EvalReport& r)
{
    return {{"rd", json::parse(report_json(r.rd))}, {"ra", json::parse(report_json(r.ra))}};
}

} // namespace

TrainResult train(const TrainConfig& config, const synth::Dataset& dataset,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const EpochLog&)>& on_epoch)
{
    config.validate();
    check_compatible(dataset, config.model);
    auto train_set = dataset.split(synth::Split::Train);
    auto val_set = dataset.split(synth::Split::Val);
    if (train_set.empty()) {
        throw std::invalid_argument("dataset has no training samples");
    }

    std::ofstream log;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        log.open(out_dir / "log.csv");
        if (!log) {
            throw std::runtime_error("cannot write " + (out_dir / "log.csv").string());
        }
        log << epoch_csv_header() << '\n';
    }

    Trainer trainer(config);
    ExponentialSchedule schedule{config.lr, config.scheduler.step, config.scheduler.gamma};
    std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.best = trainer.model();
    double best_score = -1.0;
    if (!val_set.empty()) {
        result.val = evaluate(trainer.model(), val_set);
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        EpochLog e;
        e.epoch = epoch;
        e.lr = schedule.lr(epoch);
        std::shuffle(order.begin(), order.end(), rng);
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            if (config.max_batches_per_epoch && batches == config.max_batches_per_epoch) {
                break;
            }
            std::vector<const synth::Sample*> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
                batch.push_back(train_set[order[i]]);
            }
            LossReport r = trainer.step(batch, e.lr);
            e.oc += r.oc;
            e.cl += r.cl;
            e.sd += r.sd;
            e.mv += r.mv;
            e.col += r.col;
            e.total += r.total;
            ++batches;
        }
        double nb = static_cast<double>(batches);
        e.oc /= nb;
        e.cl /= nb;
        e.sd /= nb;
        e.mv /= nb;
        e.col /= nb;
        e.total /= nb;

        EvalReport val;
        double score = 0.0;
        if (!val_set.empty()) {
            val = evaluate(trainer.model(), val_set);
            e.val_miou_rd = val.rd.miou;
            e.val_miou_ra = val.ra.miou;
            score = 0.5 * (val.rd.miou + val.ra.miou);
        } else {
            e.val_miou_rd = e.val_miou_ra = std::nan("");
        }
        if (val_set.empty() || score > best_score) {
            best_score = score;
            result.best = trainer.model();
            result.best_epoch = static_cast<long>(epoch);
            result.val = val;
        }
        result.epochs.push_back(e);
        if (log) {
            log << epoch_csv_row(e) << '\n';
            log.flush();
        }
        if (on_epoch) {
            on_epoch(e);
        }
    }

    if (!out_dir.empty()) {
        save_checkpoint(out_dir / "checkpoint.adck", result.best);
        json metrics;
        metrics["best_epoch"] = result.best_epoch;
        metrics["train"] = eval_json(evaluate(result.best, train_set));
        if (!val_set.empty()) {
            metrics["val"] = eval_json(result.val);
        }
        auto test_set = dataset.split(synth::Split::Test);
        if (!test_set.empty()) {
            metrics["test"] = eval_json(evaluate(result.best, test_set));
        }
        std::ofstream m(out_dir / "metrics.json");
        m << metrics.dump(2) << '\n';
    }
    return result;
}

std::vector<AblationResult> ablate(const TrainConfig& config, const synth::Dataset& dataset,
                                   const std::vector<AblationRow>& rows,
                                   const std::vector<std::uint64_t>& seeds,
                                   const std::function<void(const AblationResult&)>& on_row)
{
    std::vector<AblationResult> results;
    for (const AblationRow& row : rows) {
        for (std::uint64_t seed : seeds) {
            AblationResult r;
            r.row = row;
            r.seed = seed;
            try {
                TrainConfig c = apply_row(config, row);
                c.seed = seed;
                TrainResult t = train(c, dataset);
                r.val_miou_rd = t.val.rd.miou;
                r.val_miou_ra = t.val.ra.miou;
                r.ok = true;
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            results.push_back(r);
            if (on_row) {
                on_row(r);
            }
        }
    }
    return results;
}

std::string ablation_csv_header()
{
    return "row,oc,cl,sd,col,mv,no_adaptive,seed,status,val_miou_rd,val_miou_ra";
}

std::string ablation_csv_row(const AblationResult& r)
{
    std::ostringstream os;
    auto flag = [](bool b) { return b ? "1" : "0"; };
    std::string status = r.ok ? "ok" : r.error;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    os << '"' << r.row.name << "\"," << flag(r.row.oc) << ',' << flag(r.row.cl) << ','
       << flag(r.row.sd) << ',' << flag(r.row.coherence) << ',' << flag(r.row.mv) << ','
       << flag(r.row.no_adaptive) << ',' << r.seed << ',' << status << ',';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.val_miou_rd, r.val_miou_ra);
    os << buf;
    return os.str();
}

GradCheckReport gradcheck_command(const GradCheckCommand& cmd)
{
    ModelConfig config = micro_config();
    synth::GenerateOptions g;
    g.dims = config.dims;
    g.sampler.frames = config.frames;
    g.sampler.foreground_cap = 0.2;
    g.num_samples = 1;
    g.train_fraction = 1.0;
    g.val_fraction = 0.0;
    synth::Dataset data = synth::generate_dataset(g, cmd.seed);
    const synth::Sample& s = data.samples.front();
    auto remap = [&](LabelMap m) {
        for (int& v : m.labels) {
            v = std::min(v, static_cast<int>(config.num_classes) - 1);
        }
        return one_hot(m, config.num_classes);
    };
    Tensor rd_gt = remap(s.target_rd());
    Tensor ra_gt = remap(s.target_ra());

    TransRadarNet model(config, cmd.seed);
    // The interpolated sampler has kinks at integer positions; move the
    // offsets to fractional values so central differences are meaningful.
    std::mt19937_64 rng(cmd.seed + 1);
    std::uniform_real_distribution<double> frac(0.15, 0.85);
    for (auto& b : model.blocks()) {
        for (Parameter* d : {&b.delta_h, &b.delta_w}) {
            for (double& v : d->mutable_value().storage()) {
                v = std::floor(v) + frac(rng);
            }
        }
    }

    LossWeights w;
    auto f = [&] {
        SegMasks out = model.forward(s.views);
        LossTerms terms = compute_terms(out.rd_probs, out.ra_probs, rd_gt, ra_gt, w, Binarize::Soft);
        Var total = combine(terms, w).objective;
        return cmd.constant_loss ? add_scalar(mul_scalar(total, 0.0), 1.0) : total;
    };
    GradCheckOptions opt = cmd.check;
    if (cmd.corrupt) {
        auto inner = opt.after_backward;
        opt.after_backward = [inner](ParameterList& ps) {
            if (inner) {
                inner(ps);
            }
            Tensor& g = ps.back()->var().node()->grad_buffer();
            g[0] += 0.5 * std::abs(g[0]) + 1e-3;
        };
    }
    return grad_check(f, model.parameters(), opt);
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels, std::size_t num_classes)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot write " + path.string());
    }
    os << "P5\n" << labels.width << ' ' << labels.height << "\n255\n";
    int scale = num_classes > 1 ? static_cast<int>(255 / (num_classes - 1)) : 0;
    for (int v : labels.labels) {
        os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v * scale, 0, 255))));
    }
}

} // namespace adaradar
