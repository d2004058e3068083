#include "qkernel/metrics.hpp"

#include <string>

#include "qkernel/errors.hpp"

namespace qk {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_label(int v) {
    if (v != 1 && v != -1) throw ArgumentError("labels must be +1 or -1, got " + std::to_string(v));
}

}  // namespace

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw ArgumentError("label counts differ: " + std::to_string(y_true.size()) + " true vs " +
                            std::to_string(y_pred.size()) + " predicted");
    }
    if (y_true.empty()) throw ArgumentError("no labels to compare");
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        check_label(y_true[i]);
        check_label(y_pred[i]);
        if (y_true[i] == 1) (y_pred[i] == 1 ? c.tp : c.fn)++;
        else (y_pred[i] == 1 ? c.fp : c.tn)++;
    }
    return c;
}

double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw ArgumentError("accuracy of zero samples is undefined");
    return ratio(c.tp + c.tn, c.total());
}

double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }

double recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

double f1(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }

nlohmann::json metrics_report(const ConfusionCounts& c) {
    return {{"accuracy", accuracy(c)}, {"precision", precision(c)}, {"recall", recall(c)}, {"f1", f1(c)}, {"counts", c}};
}

void to_json(nlohmann::json& j, const ConfusionCounts& c) {
    j = {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

void from_json(const nlohmann::json& j, ConfusionCounts& c) {
    c.tp = j.at("tp").get<std::size_t>();
    c.tn = j.at("tn").get<std::size_t>();
    c.fp = j.at("fp").get<std::size_t>();
    c.fn = j.at("fn").get<std::size_t>();
}

}  // namespace qk
