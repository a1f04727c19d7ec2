#include "ultratac/dataset.hpp"

#include "ultratac/config.hpp"
#include "ultratac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ultratac::ml {

void Dataset::add(std::vector<double> row, int label) {
    features.push_back(std::move(row));
    labels.push_back(label);
}

void Dataset::validate() const {
    if (features.size() != labels.size()) throw std::invalid_argument("dataset: feature/label count mismatch");
    const auto a = arity();
    for (const auto& row : features)
        if (row.size() != a) throw std::invalid_argument("dataset: rows differ in arity");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= label_names.size())
            throw std::invalid_argument("dataset: label out of range");
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> c(label_names.size(), 0);
    for (int l : labels) ++c.at(static_cast<std::size_t>(l));
    return c;
}

TrainTestSplit stratified_split(const Dataset& data, double train_fraction) {
    data.validate();
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("train fraction must be in [0,1]");

    std::vector<std::vector<std::size_t>> by_class(data.num_classes());
    for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

    Rng rng(mix_seed(data.split_seed));
    std::vector<char> to_train(data.size(), 0);
    for (auto& rows : by_class) {
        // Fisher-Yates with our own index draw so the split does not depend on std::shuffle.
        for (std::size_t i = rows.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng() % i);
            std::swap(rows[i - 1], rows[j]);
        }
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
        for (std::size_t k = 0; k < n_train; ++k) to_train[rows[k]] = 1;
    }

    TrainTestSplit out;
    for (auto* part : {&out.train, &out.test}) {
        part->label_names = data.label_names;
        part->feature_names = data.feature_names;
        part->split_seed = data.split_seed;
    }
    for (std::size_t i = 0; i < data.size(); ++i) (to_train[i] ? out.train : out.test).add(data.features[i], data.labels[i]);
    return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    data.validate();
    out << "label";
    for (std::size_t j = 0; j < data.arity(); ++j)
        out << ',' << (j < data.feature_names.size() ? data.feature_names[j] : "f" + std::to_string(j));
    out << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << data.label_names[static_cast<std::size_t>(data.labels[i])];
        for (double v : data.features[i]) out << ',' << format_double(v);
        out << '\n';
    }
}

Dataset read_dataset_csv(std::istream& in) {
    Dataset data;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("dataset csv: missing header");
    {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        if (trim(cell) != "label") throw std::invalid_argument("dataset csv: first column must be 'label'");
        while (std::getline(ss, cell, ',')) data.feature_names.push_back(trim(cell));
    }
    std::map<std::string, int> index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const auto label = trim(cell);
        auto [it, inserted] = index.emplace(label, static_cast<int>(data.label_names.size()));
        if (inserted) data.label_names.push_back(label);
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell, "dataset line " + std::to_string(line_no)));
        if (row.size() != data.feature_names.size())
            throw std::invalid_argument("dataset csv: wrong column count on line " + std::to_string(line_no));
        data.add(std::move(row), it->second);
    }
    return data;
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> label_names)
    : names_(std::move(label_names)), counts_(names_.size() * names_.size(), 0) {}

void ConfusionMatrix::add(int truth, int predicted) {
    const auto k = names_.size();
    if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= k || static_cast<std::size_t>(predicted) >= k)
        throw std::invalid_argument("confusion matrix: label out of range");
    ++counts_[static_cast<std::size_t>(truth) * k + static_cast<std::size_t>(predicted)];
}

std::size_t ConfusionMatrix::count(int truth, int predicted) const {
    return counts_.at(static_cast<std::size_t>(truth) * names_.size() + static_cast<std::size_t>(predicted));
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::row_total(int truth) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < names_.size(); ++j) s += count(truth, static_cast<int>(j));
    return s;
}

double ConfusionMatrix::accuracy() const {
    const auto t = total();
    if (t == 0) return 0.0;
    std::size_t diag = 0;
    for (std::size_t i = 0; i < names_.size(); ++i) diag += count(static_cast<int>(i), static_cast<int>(i));
    return static_cast<double>(diag) / static_cast<double>(t);
}

double ConfusionMatrix::class_recall(int truth) const {
    const auto r = row_total(truth);
    return r == 0 ? 0.0 : static_cast<double>(count(truth, truth)) / static_cast<double>(r);
}

void ConfusionMatrix::write_csv(std::ostream& out) const {
    out << "truth\\predicted";
    for (const auto& n : names_) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < names_.size(); ++i) {
        out << names_[i];
        for (std::size_t j = 0; j < names_.size(); ++j) out << ',' << count(static_cast<int>(i), static_cast<int>(j));
        out << '\n';
    }
}

}  // namespace ultratac::ml
