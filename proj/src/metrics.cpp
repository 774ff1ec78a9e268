#include "adaradar/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace adaradar {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0)
{
}

std::uint64_t ConfusionMatrix::total() const
{
    std::uint64_t n = 0;
    for (auto c : counts_) {
        n += c;
    }
    return n;
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt)
{
    if (pred.height != gt.height || pred.width != gt.width) {
        throw std::invalid_argument("confusion: prediction " + std::to_string(pred.height) + "x" +
                                    std::to_string(pred.width) + " vs ground truth " +
                                    std::to_string(gt.height) + "x" + std::to_string(gt.width));
    }
    auto k = static_cast<int>(k_);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        int g = gt.labels[i], p = pred.labels[i];
        if (g < 0 || g >= k || p < 0 || p >= k) {
            throw std::out_of_range("confusion: label outside [0, " + std::to_string(k_) + ") at pixel " +
                                    std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < gt.size(); ++i) {
        ++at(static_cast<std::size_t>(gt.labels[i]), static_cast<std::size_t>(pred.labels[i]));
    }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other)
{
    if (other.k_ != k_) {
        throw std::invalid_argument("confusion: class counts differ");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
    return *this;
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes)
{
    ConfusionMatrix cm(num_classes);
    cm.add(pred, gt);
    return cm;
}

MetricReport iou_dice(const ConfusionMatrix& cm, AbsentClass absent)
{
    std::size_t K = cm.num_classes();
    MetricReport r;
    r.iou.resize(K);
    r.dice.resize(K);
    double si = 0.0, sd = 0.0;
    std::size_t counted = 0;
    for (std::size_t k = 0; k < K; ++k) {
        std::uint64_t tp = cm.at(k, k), fp = 0, fn = 0;
        for (std::size_t j = 0; j < K; ++j) {
            if (j != k) {
                fp += cm.at(j, k);
                fn += cm.at(k, j);
            }
        }
        if (tp + fp + fn == 0) {
            double v = absent == AbsentClass::ScoreOne ? 1.0 : std::numeric_limits<double>::quiet_NaN();
            r.iou[k] = r.dice[k] = v;
        } else {
            auto t = static_cast<double>(tp);
            r.iou[k] = t / static_cast<double>(tp + fp + fn);
            r.dice[k] = 2.0 * t / static_cast<double>(2 * tp + fp + fn);
        }
        if (!std::isnan(r.iou[k])) {
            si += r.iou[k];
            sd += r.dice[k];
            ++counted;
        }
    }
    double nan = std::numeric_limits<double>::quiet_NaN();
    r.miou = counted ? si / static_cast<double>(counted) : nan;
    r.mdice = counted ? sd / static_cast<double>(counted) : nan;
    return r;
}

std::vector<std::string> class_names(std::size_t num_classes)
{
    if (num_classes == 4) {
        return {"Bkg.", "Ped.", "Cycl.", "Car"};
    }
    std::vector<std::string> names;
    for (std::size_t k = 0; k < num_classes; ++k) {
        names.push_back("c" + std::to_string(k));
    }
    return names;
}

std::string report_json(const MetricReport& r, int indent)
{
    auto names = class_names(r.iou.size());
    nlohmann::ordered_json j;
    for (std::size_t k = 0; k < names.size(); ++k) {
        j["iou"][names[k]] = r.iou[k];
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
        j["dice"][names[k]] = r.dice[k];
    }
    j["miou"] = r.miou;
    j["mdice"] = r.mdice;
    return j.dump(indent);
}

std::string report_csv_header(std::size_t num_classes, const std::string& prefix)
{
    std::string out = prefix;
    for (const char* metric : {"iou", "dice"}) {
        for (const auto& n : class_names(num_classes)) {
            out += "," + std::string(metric) + "_" + n;
        }
        out += "," + std::string(metric) + "_mean";
    }
    return out;
}

std::string report_csv_row(const MetricReport& r, const std::string& prefix)
{
    std::ostringstream os;
    os << prefix << std::setprecision(6) << std::fixed;
    for (const auto* v : {&r.iou, &r.dice}) {
        for (double x : *v) {
            os << ',' << x;
        }
        os << ',' << (v == &r.iou ? r.miou : r.mdice);
    }
    return os.str();
}

} // namespace adaradar
