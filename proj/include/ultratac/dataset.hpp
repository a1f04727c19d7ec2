#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ultratac::ml {

/// Labelled feature rows. Labels index into `label_names`.
struct Dataset {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    std::vector<std::string> label_names;
    std::vector<std::string> feature_names;  // optional, used for CSV headers
    std::uint64_t split_seed = 0;

    std::size_t size() const { return features.size(); }
    std::size_t arity() const { return features.empty() ? 0 : features.front().size(); }
    std::size_t num_classes() const { return label_names.size(); }

    void add(std::vector<double> row, int label);
    /// Throws std::invalid_argument on ragged rows or out-of-range labels.
    void validate() const;
    std::vector<std::size_t> class_counts() const;
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

/// Per-class shuffle (seeded by `split_seed`), first round(fraction * n_c) rows of each
/// class go to train. Row order inside each part follows the original index order.
TrainTestSplit stratified_split(const Dataset& data, double train_fraction = 0.8);

/// Header `label,<feature names>`; label written by name.
void write_dataset_csv(std::ostream& out, const Dataset& data);
/// Reads the format above; label names are collected in first-seen order.
Dataset read_dataset_csv(std::istream& in);

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<std::string> label_names);

    void add(int truth, int predicted);
    std::size_t count(int truth, int predicted) const;
    std::size_t total() const;
    std::size_t row_total(int truth) const;
    /// trace / total (0 for an empty matrix).
    double accuracy() const;
    double class_recall(int truth) const;
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& label_names() const { return names_; }

    /// Header `truth\predicted,<names>`, one row per true class.
    void write_csv(std::ostream& out) const;

private:
    std::vector<std::string> names_;
    std::vector<std::size_t> counts_;  // row-major K x K
};

}  // namespace ultratac::ml
