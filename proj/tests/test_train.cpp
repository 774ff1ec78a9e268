#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "adaradar/config.hpp"
#include "adaradar/optim.hpp"
#include "adaradar/train.hpp"

using namespace adaradar;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config()
{
    TrainConfig c;
    c.model = micro_config();
    c.model.num_classes = synth::kNumClasses;
    c.data.num_samples = 6;
    c.data.train_fraction = 0.5;
    c.data.val_fraction = 0.25;
    c.data.foreground_cap = 0.2;
    c.batch_size = 3;
    c.epochs = 2;
    c.seed = 7;
    return c;
}

synth::Dataset tiny_data(const TrainConfig& c) { return synth::generate_dataset(generate_options(c), 3); }

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("adaradar_test_train_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void require_same_params(TransRadarNet& a, TransRadarNet& b)
{
    auto pa = a.parameters();
    auto pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name() == pb[i]->name());
        REQUIRE(pa[i]->value().shape() == pb[i]->value().shape());
        CHECK(pa[i]->value().storage() == pb[i]->value().storage());
    }
}

void require_same_report(const MetricReport& a, const MetricReport& b)
{
    CHECK(a.iou == b.iou);
    CHECK(a.dice == b.dice);
    CHECK(a.miou == b.miou);
}

} // namespace

TEST_CASE("exponential schedule steps every `step` epochs")
{
    ExponentialSchedule s{1e-4, 10, 0.9};
    CHECK(s.lr(0) == 1e-4);
    CHECK(s.lr(9) == 1e-4);
    CHECK(s.lr(10) == 1e-4 * 0.9);
    CHECK(s.lr(25) == 1e-4 * std::pow(0.9, 2.0));
    CHECK(s.lr(100) == 1e-4 * std::pow(0.9, 10.0));
    ExponentialSchedule bad{1e-4, 0, 0.9};
    CHECK_THROWS(bad.lr(1));
}

TEST_CASE("adam matches a hand-rolled update over three steps")
{
    Parameter p("w", Tensor({3}, {1.0, -2.0, 0.5}));
    ParameterList params{&p};
    const double grads[3][3] = {{0.3, -1.0, 0.0}, {-0.2, 4.0, 1e-3}, {0.5, 0.5, -0.5}};
    long double w[3] = {1.0L, -2.0L, 0.5L}, m[3] = {}, v[3] = {};
    Adam adam;
    const double lr = 0.01;
    for (int t = 1; t <= 3; ++t) {
        zero_grads(params);
        sum(mul(p.var(), constant(Tensor({3}, {grads[t - 1][0], grads[t - 1][1], grads[t - 1][2]}))))
            .backward();
        adam.step(params, lr);
        for (int j = 0; j < 3; ++j) {
            long double g = grads[t - 1][j];
            m[j] = 0.9L * m[j] + 0.1L * g;
            v[j] = 0.999L * v[j] + 0.001L * g * g;
            long double mh = m[j] / (1.0L - std::pow(0.9L, t));
            long double vh = v[j] / (1.0L - std::pow(0.999L, t));
            w[j] -= lr * mh / (std::sqrt(vh) + 1e-8L);
        }
        for (int j = 0; j < 3; ++j) {
            CHECK(p.value()[j] == doctest::Approx(static_cast<double>(w[j])).epsilon(1e-13));
        }
    }
    CHECK(adam.steps() == 3);
}

TEST_CASE("adam first step moves each weight by about lr against its gradient sign")
{
    Parameter p("w", Tensor({2}, {0.0, 0.0}));
    ParameterList params{&p};
    sum(mul(p.var(), constant(Tensor({2}, {3.0, -0.01})))).backward();
    Adam adam;
    adam.step(params, 1e-3);
    CHECK(p.value()[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p.value()[1] == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("config parsing is strict and round-trips")
{
    TrainConfig d = parse_train_config("{}");
    CHECK(d.batch_size == 6);
    CHECK(d.lr == 1e-4);
    CHECK(d.scheduler.step == 10);
    CHECK(d.scheduler.gamma == 0.9);
    CHECK(d.model.frames == 3);

    TrainConfig c = tiny_config();
    c.ablation = default_ablation_matrix();
    TrainConfig back = parse_train_config(train_config_json(c));
    CHECK(train_config_json(back) == train_config_json(c));
    CHECK(back.model == c.model);

    CHECK_THROWS_WITH_AS(parse_train_config(R"({"bogus": 1})"), doctest::Contains("bogus"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_train_config(R"({"model": {"dims": {"range": 16, "x": 1}}})"),
                         doctest::Contains("'x'"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_train_config(R"({"lr": "fast"})"), doctest::Contains("lr"),
                         std::invalid_argument);
    CHECK_THROWS_AS(parse_train_config(R"({"lr": 0})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_train_config(R"({"batch_size": 0})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_train_config(R"({"scheduler": {"type": "cosine"}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_train_config("{"), std::invalid_argument);
}

TEST_CASE("ablation matrix covers the loss rows and the architecture row")
{
    auto rows = default_ablation_matrix();
    REQUIRE(rows.size() == 8);
    int no_sd = 0, arch = 0;
    for (const auto& r : rows) {
        no_sd += !r.sd;
        arch += r.no_adaptive;
    }
    CHECK(no_sd == 1);
    CHECK(arch == 1);
    TrainConfig c = apply_row(tiny_config(), rows.back());
    CHECK(c.model.no_adaptive);
    CHECK(c.loss.use_sd);
}

TEST_CASE("checkpoint round-trip preserves weights and evaluation")
{
    TrainConfig c = tiny_config();
    auto data = tiny_data(c);
    TrainResult r = train(c, data);
    fs::path dir = scratch("ckpt");
    save_checkpoint(dir / "m.adck", r.best);
    TransRadarNet back = load_checkpoint(dir / "m.adck");
    CHECK(back.config() == r.best.config());
    require_same_params(back, r.best);
    auto e1 = evaluate(r.best, data, synth::Split::Val);
    auto e2 = evaluate(back, data, synth::Split::Val);
    require_same_report(e1.rd, e2.rd);
    require_same_report(e1.ra, e2.ra);

    {
        std::ofstream bad(dir / "bad.adck", std::ios::binary);
        bad << "NOPE";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "bad.adck"), doctest::Contains("bad.adck"),
                         std::runtime_error);
    auto size = fs::file_size(dir / "m.adck");
    fs::resize_file(dir / "m.adck", size - 9);
    CHECK_THROWS_AS(load_checkpoint(dir / "m.adck"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("zero epochs keeps the initialization")
{
    TrainConfig c = tiny_config();
    c.epochs = 0;
    auto data = tiny_data(c);
    fs::path dir = scratch("zero");
    TrainResult r = train(c, data, dir);
    CHECK(r.epochs.empty());
    CHECK(r.best_epoch == -1);
    TransRadarNet init(c.model, c.seed);
    TransRadarNet saved = load_checkpoint(dir / "checkpoint.adck");
    require_same_params(saved, init);
    CHECK(fs::exists(dir / "log.csv"));
    CHECK(fs::exists(dir / "metrics.json"));
    fs::remove_all(dir);
}

TEST_CASE("training is deterministic and writes one log row per epoch")
{
    TrainConfig c = tiny_config();
    auto data = tiny_data(c);
    fs::path dir = scratch("det");
    TrainResult a = train(c, data, dir);
    TrainResult b = train(c, data);
    REQUIRE(a.epochs.size() == 2);
    REQUIRE(b.epochs.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(epoch_csv_row(a.epochs[i]) == epoch_csv_row(b.epochs[i]));
        CHECK(a.epochs[i].total == b.epochs[i].total);
        CHECK(std::isfinite(a.epochs[i].total));
    }
    require_same_params(a.best, b.best);

    std::ifstream log(dir / "log.csv");
    std::string line;
    std::getline(log, line);
    CHECK(line == epoch_csv_header());
    int rows = 0;
    while (std::getline(log, line)) {
        ++rows;
    }
    CHECK(rows == 2);
    fs::remove_all(dir);
}

TEST_CASE("a different seed changes the run")
{
    TrainConfig c = tiny_config();
    c.epochs = 1;
    auto data = tiny_data(c);
    TrainResult a = train(c, data);
    c.seed = 8;
    TrainResult b = train(c, data);
    CHECK(a.epochs[0].total != b.epochs[0].total);
}

TEST_CASE("mismatched data is rejected before the first step")
{
    TrainConfig c = tiny_config();
    auto data = tiny_data(c);
    TrainConfig other = c;
    other.model.dims = {32, 32, 8};
    CHECK_THROWS_WITH_AS(train(other, data), doctest::Contains("cube"), std::invalid_argument);
    other = c;
    other.model.frames = 3;
    CHECK_THROWS_WITH_AS(train(other, data), doctest::Contains("frames"), std::invalid_argument);
}

TEST_CASE("a non-finite loss aborts and names the first term that sees it")
{
    TrainConfig c = tiny_config();
    auto data = tiny_data(c);
    Trainer t(c);
    auto batch = data.split(synth::Split::Train);
    LossReport ok = t.step(batch, 1e-4);
    CHECK(std::isfinite(ok.total));
    auto params = t.model().parameters();
    params.back()->mutable_value()[0] = std::nan("");
    CHECK_THROWS_WITH(t.step(batch, 1e-4), doctest::Contains("oc_loss"));
}

TEST_CASE("a trainer step lowers the loss of its batch")
{
    TrainConfig c = tiny_config();
    auto data = tiny_data(c);
    Trainer t(c);
    auto batch = data.split(synth::Split::Train);
    double before = t.loss(batch).total;
    for (int i = 0; i < 5; ++i) {
        t.step(batch, 1e-3);
    }
    CHECK(t.loss(batch).total < before);
}

TEST_CASE("evaluate is repeatable and rejects an empty split")
{
    TrainConfig c = tiny_config();
    auto data = tiny_data(c);
    TransRadarNet m(c.model, 1);
    auto a = evaluate(m, data, synth::Split::Test);
    auto b = evaluate(m, data, synth::Split::Test);
    require_same_report(a.rd, b.rd);
    require_same_report(a.ra, b.ra);
    CHECK(a.rd.iou.size() == 4);

    TrainConfig all_train = c;
    all_train.data.train_fraction = 1.0;
    all_train.data.val_fraction = 0.0;
    auto only_train = tiny_data(all_train);
    CHECK_THROWS_WITH_AS(evaluate(m, only_train, synth::Split::Val), doctest::Contains("empty"),
                         std::invalid_argument);
}

TEST_CASE("ablation rows match plain training and failures do not stop the run")
{
    TrainConfig c = tiny_config();
    c.epochs = 1;
    auto data = tiny_data(c);
    AblationRow full{"full", true, true, true, false, true, false};
    auto res = ablate(c, data, {full, full}, {c.seed});
    REQUIRE(res.size() == 2);
    TrainResult plain = train(c, data);
    for (const auto& r : res) {
        CHECK(r.ok);
        CHECK(r.val_miou_rd == plain.val.rd.miou);
        CHECK(r.val_miou_ra == plain.val.ra.miou);
    }

    TrainConfig broken = c;
    broken.model.dims = {32, 32, 8};
    auto failed = ablate(broken, data, {full, full}, {1, 2});
    REQUIRE(failed.size() == 4);
    for (const auto& r : failed) {
        CHECK_FALSE(r.ok);
        CHECK(r.error.find("cube") != std::string::npos);
    }
    CHECK(ablation_csv_row(failed[0]).find("\"full\",1,1,1,0,1,0,1,") == 0);
}

TEST_CASE("pgm preview spreads labels over the grey range")
{
    LabelMap m(2, 3);
    m.labels = {0, 1, 2, 3, 0, 3};
    fs::path dir = scratch("pgm");
    write_pgm(dir / "m.pgm", m, 4);
    std::ifstream in(dir / "m.pgm", std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string header = "P5\n3 2\n255\n";
    REQUIRE(content.size() == header.size() + 6);
    CHECK(content.substr(0, header.size()) == header);
    CHECK(static_cast<unsigned char>(content[header.size() + 3]) == 255);
    CHECK(static_cast<unsigned char>(content[header.size() + 1]) == 85);
    fs::remove_all(dir);
}

TEST_CASE("an untrained model scores the all-background baseline")
{
    TrainConfig c = tiny_config();
    c.data.num_samples = 12;
    auto data = tiny_data(c);
    TransRadarNet m(c.model, 4);
    auto val = data.split(synth::Split::Val);
    ConfusionMatrix rd(4), ra(4);
    for (const auto* s : val) {
        rd.add(LabelMap(s->target_rd().height, s->target_rd().width), s->target_rd());
        ra.add(LabelMap(s->target_ra().height, s->target_ra().width), s->target_ra());
    }
    // Background IoU of the baseline is the background fraction of the targets.
    std::size_t fg = 0, px = 0;
    for (const auto* s : val) {
        fg += s->target_ra().foreground_count();
        px += s->target_ra().size();
    }
    CHECK(iou_dice(ra).iou[0] == doctest::Approx(1.0 - static_cast<double>(fg) / px));
    auto r = evaluate(m, val);
    CHECK(std::abs(r.rd.miou - iou_dice(rd).miou) < 0.05);
    CHECK(std::abs(r.ra.miou - iou_dice(ra).miou) < 0.05);
}

TEST_CASE("gradcheck command negative and constant controls")
{
    GradCheckCommand bad;
    bad.corrupt = true;
    GradCheckReport r = gradcheck_command(bad);
    CHECK_FALSE(r.passed);
    CHECK(r.failed >= 1);
    CHECK(r.worst_param == "dec_ra.classify.bias");
    CHECK(r.worst_index == 0);

    GradCheckCommand flat;
    flat.constant_loss = true;
    GradCheckReport z = gradcheck_command(flat);
    CHECK(z.passed);
    CHECK(z.max_rel_error == 0.0);
}
