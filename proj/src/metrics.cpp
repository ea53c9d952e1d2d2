#include "grainform/metrics.hpp"

#include <sstream>

namespace grainform {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t n = 0;
    for (std::uint64_t v : counts) n += v;
    return n;
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream out;
    out << "true\\pred";
    for (const auto& name : class_names) out << "," << name;
    out << "\n";
    for (std::size_t t = 0; t < classes(); ++t) {
        out << class_names[t];
        for (std::size_t p = 0; p < classes(); ++p) out << "," << at(t, p);
        out << "\n";
    }
    return out.str();
}

ConfusionMatrix confusion(const std::vector<std::size_t>& preds,
                          const std::vector<std::size_t>& labels,
                          const std::vector<std::string>& class_names) {
    if (preds.size() != labels.size())
        throw ValidationError("confusion: prediction and label counts differ");
    ConfusionMatrix cm;
    cm.class_names = class_names;
    cm.counts.assign(class_names.size() * class_names.size(), 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] >= cm.classes() || labels[i] >= cm.classes())
            throw ValidationError("confusion: class index out of range at sample " +
                                  std::to_string(i));
        ++cm.at(labels[i], preds[i]);
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t n = cm.total();
    if (n == 0) throw ValidationError("accuracy: empty confusion matrix");
    std::uint64_t correct = 0;
    for (std::size_t c = 0; c < cm.classes(); ++c) correct += cm.at(c, c);
    return static_cast<double>(correct) / static_cast<double>(n);
}

std::string TrainReport::to_csv() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "epoch,train_loss,train_accuracy,test_accuracy\n";
    for (const auto& e : epochs) {
        out << e.epoch << "," << e.train_loss << "," << e.train_accuracy << ",";
        if (e.test_accuracy >= 0.0) out << e.test_accuracy;
        out << "\n";
    }
    return out.str();
}

}  // namespace grainform
