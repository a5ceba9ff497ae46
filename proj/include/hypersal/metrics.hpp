#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hypersal/csv.hpp"
#include "hypersal/dataset.hpp"
#include "hypersal/io_util.hpp"
#include "hypersal/model.hpp"
#include "hypersal/parallel.hpp"

namespace hypersal {

/// Classification quality with infected as the positive class.
struct EvalReport {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Metrics from raw confusion counts; rates with an empty denominator are 0.
inline EvalReport report_from_confusion(std::size_t tp, std::size_t fp, std::size_t fn,
                                        std::size_t tn) {
    EvalReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.tn = tn;
    const std::size_t total = tp + fp + fn + tn;
    r.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
    r.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.f1 = (r.precision + r.recall) > 0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

/// Argmax predictions over a test set. Samples fan out across threads with a
/// read-only detached copy of the parameters; counts merge associatively.
inline EvalReport evaluate(const ModelParams& params, const std::vector<LabeledPatch>& test) {
    if (test.empty()) throw ValueError("evaluate: empty test set");

    const ModelParams frozen = params.detached_copy();
    std::vector<ClassLabel> predictions(test.size());
    parallel_for(test.size(), [&](std::size_t i) {
        Tape tape;
        std::mt19937_64 unused_rng(0);
        const ForwardResult out =
            forward(tape, frozen, test[i].patch, ForwardMode::eval, unused_rng);
        predictions[i] = predicted_class(out.probs);
    });

    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const bool actual = test[i].label == ClassLabel::infected;
        const bool predicted = predictions[i] == ClassLabel::infected;
        if (actual && predicted) ++tp;
        else if (!actual && predicted) ++fp;
        else if (actual && !predicted) ++fn;
        else ++tn;
    }
    return report_from_confusion(tp, fp, fn, tn);
}

inline void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::string text = "accuracy,precision,recall,f1,tp,fp,fn,tn\n";
    text += format_real(report.accuracy) + "," + format_real(report.precision) + "," +
            format_real(report.recall) + "," + format_real(report.f1) + "," +
            std::to_string(report.tp) + "," + std::to_string(report.fp) + "," +
            std::to_string(report.fn) + "," + std::to_string(report.tn) + "\n";
    io::write_text_file(path, text);
}

}  // namespace hypersal
