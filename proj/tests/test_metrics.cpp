#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"

#include "adaradar/metrics.hpp"

using namespace adaradar;

namespace {

LabelMap make_map(std::size_t h, std::size_t w, std::vector<int> labels)
{
    LabelMap m(h, w);
    m.labels = std::move(labels);
    return m;
}

LabelMap random_map(std::size_t h, std::size_t w, int K, std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> u(0, K - 1);
    LabelMap m(h, w);
    for (auto& l : m.labels) {
        l = u(rng);
    }
    return m;
}

ConfusionMatrix random_cm(std::size_t K, std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::uint64_t> u(0, 50);
    std::bernoulli_distribution sparse(0.3);
    ConfusionMatrix cm(K);
    for (std::size_t g = 0; g < K; ++g) {
        for (std::size_t p = 0; p < K; ++p) {
            cm.at(g, p) = sparse(rng) ? 0 : u(rng);
        }
    }
    return cm;
}

} // namespace

TEST_CASE("confusion of identical maps is diagonal")
{
    auto m = make_map(2, 3, {0, 1, 2, 2, 1, 0});
    auto cm = confusion(m, m, 3);
    std::uint64_t trace = 0;
    for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t p = 0; p < 3; ++p) {
            if (g != p) {
                CHECK(cm.at(g, p) == 0);
            }
        }
        trace += cm.at(g, g);
    }
    CHECK(trace == 6);
    CHECK(ConfusionMatrix(3).total() == 0);
}

TEST_CASE("confusion 2x2 example")
{
    auto gt = make_map(2, 2, {0, 0, 1, 1});
    auto pred = make_map(2, 2, {0, 1, 1, 1});
    auto cm = confusion(pred, gt, 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.at(1, 1) == 2);
}

TEST_CASE("confusion rejects bad input")
{
    auto a = make_map(1, 2, {0, 3});
    auto b = make_map(1, 2, {0, 1});
    CHECK_THROWS_AS(confusion(a, b, 3), std::out_of_range);
    CHECK_THROWS_AS(confusion(b, make_map(2, 1, {0, 1}), 3), std::invalid_argument);
    CHECK_THROWS_AS(confusion(make_map(1, 1, {-1}), make_map(1, 1, {0}), 2), std::out_of_range);
}

TEST_CASE("iou and dice from counts")
{
    // Class 1: TP 3, FP 1, FN 2.
    ConfusionMatrix cm(2);
    cm.at(1, 1) = 3;
    cm.at(0, 1) = 1;
    cm.at(1, 0) = 2;
    cm.at(0, 0) = 4;
    auto r = iou_dice(cm);
    CHECK(r.iou[1] == 0.5);
    CHECK(std::abs(r.dice[1] - 2.0 / 3.0) < 1e-15);
    CHECK(r.iou[0] == 4.0 / 7.0);
    CHECK(r.miou == doctest::Approx((0.5 + 4.0 / 7.0) / 2));

    auto m = make_map(2, 2, {0, 1, 1, 2});
    auto perfect = iou_dice(confusion(m, m, 4));
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(perfect.iou[k] == 1.0);
        CHECK(perfect.dice[k] == 1.0);
    }
    CHECK(perfect.miou == 1.0);

    auto excluded = iou_dice(confusion(m, m, 4), AbsentClass::Exclude);
    CHECK(std::isnan(excluded.iou[3]));
    CHECK(excluded.miou == 1.0);
}

TEST_CASE("dice and iou satisfy the identity on random matrices")
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        auto cm = random_cm(4, rng);
        auto r = iou_dice(cm);
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(r.dice[k] >= r.iou[k]);
            CHECK(std::abs(r.dice[k] - 2 * r.iou[k] / (1 + r.iou[k])) <= 4e-16);
            std::uint64_t tp = cm.at(k, k), fp = 0, fn = 0;
            for (std::size_t j = 0; j < 4; ++j) {
                if (j != k) {
                    fp += cm.at(j, k);
                    fn += cm.at(k, j);
                }
            }
            // Each score is the correctly rounded value of a rational, TP/U and
            // 2TP/(U+TP) with U = TP+FP+FN, and those satisfy the identity exactly.
            std::uint64_t u = tp + fp + fn;
            CHECK(r.iou[k] == (u ? static_cast<double>(tp) / static_cast<double>(u) : 1.0));
            CHECK(r.dice[k] == (u ? static_cast<double>(2 * tp) / static_cast<double>(u + tp) : 1.0));
        }
    }
}

TEST_CASE("streaming accumulation equals one concatenated map and is order independent")
{
    std::mt19937_64 rng(2);
    std::vector<LabelMap> preds, gts;
    for (int i = 0; i < 7; ++i) {
        preds.push_back(random_map(3, 5, 4, rng));
        gts.push_back(random_map(3, 5, 4, rng));
    }
    ConfusionMatrix forward(4), backward(4);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        forward.add(preds[i], gts[i]);
        backward += confusion(preds[6 - i], gts[6 - i], 4);
    }
    CHECK(forward == backward);

    LabelMap cp(21, 5), cg(21, 5);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::copy(preds[i].labels.begin(), preds[i].labels.end(), cp.labels.begin() + i * 15);
        std::copy(gts[i].labels.begin(), gts[i].labels.end(), cg.labels.begin() + i * 15);
    }
    auto whole = confusion(cp, cg, 4);
    CHECK(whole == forward);
    auto a = iou_dice(whole), b = iou_dice(forward);
    CHECK(a.iou == b.iou);
    CHECK(a.dice == b.dice);
    CHECK(forward.total() == 105);
}

TEST_CASE("report serialisation follows the class column order")
{
    ConfusionMatrix cm(4);
    cm.at(0, 0) = 10;
    cm.at(1, 1) = 1;
    cm.at(2, 0) = 1;
    auto r = iou_dice(cm);
    auto j = nlohmann::ordered_json::parse(report_json(r));
    std::vector<std::string> keys;
    for (auto& [k, v] : j["iou"].items()) {
        keys.push_back(k);
    }
    CHECK(keys == std::vector<std::string>{"Bkg.", "Ped.", "Cycl.", "Car"});
    CHECK(j["iou"]["Cycl."].get<double>() == 0.0);
    CHECK(j["miou"].get<double>() == doctest::Approx(r.miou));

    CHECK(report_csv_header(4, "view") ==
          "view,iou_Bkg.,iou_Ped.,iou_Cycl.,iou_Car,iou_mean,dice_Bkg.,dice_Ped.,dice_Cycl.,"
          "dice_Car,dice_mean");
    auto row = report_csv_row(r, "RD");
    CHECK(row.rfind("RD,0.909091,1.000000,0.000000,1.000000,", 0) == 0);
    CHECK(class_names(3) == std::vector<std::string>{"c0", "c1", "c2"});
}
