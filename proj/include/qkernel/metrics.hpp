#pragma once

// Binary classification metrics from confusion counts. The positive class is +1 (malware).

#include <cstddef>
#include <span>

#include "json.hpp"

namespace qk {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred);

/// (TP + TN) / total. Throws ArgumentError on zero samples.
double accuracy(const ConfusionCounts& c);
/// The next three return 0 when their denominator is 0.
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
/// 2 TP / (2 TP + FP + FN), the harmonic mean of precision and recall.
double f1(const ConfusionCounts& c);

/// {accuracy, precision, recall, f1, counts: {tp, tn, fp, fn}}
nlohmann::json metrics_report(const ConfusionCounts& c);

void to_json(nlohmann::json& j, const ConfusionCounts& c);
void from_json(const nlohmann::json& j, ConfusionCounts& c);

}  // namespace qk
