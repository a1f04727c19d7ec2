#pragma once

// Multiclass gradient-boosted regression trees on the softmax cross-entropy.
//
// Each round fits one depth-limited tree per class to the Newton step of the loss
// (gradient p - y, hessian p (1 - p)), with exact greedy splits over the sorted
// feature values. The round's trees are shrunk by the learning rate and, if the
// training loss would rise, halved again until it does not.

#include "ultratac/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ultratac::ml {

struct GbdtHyper {
    int n_rounds = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    std::uint64_t seed = 42;
    double l2_lambda = 1.0;
    double min_child_weight = 1.0;
    double subsample = 1.0;  // row fraction per round; the seed drives the draw

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] < threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> x) const;
    int depth() const;
};

struct Prediction {
    int label = 0;
    std::vector<double> probabilities;
};

/// Index of the largest score; ties go to the lowest index.
int argmax_label(std::span<const double> scores);

std::vector<double> softmax(std::span<const double> scores);

class GbdtModel {
public:
    GbdtModel() = default;

    std::size_t num_classes() const { return label_names_.size(); }
    std::size_t arity() const { return arity_; }
    const std::vector<std::string>& label_names() const { return label_names_; }
    std::size_t rounds() const { return trees_.size(); }
    double learning_rate() const { return learning_rate_; }
    int max_depth() const { return max_depth_; }
    /// Training log-loss before round 1 and after every round.
    const std::vector<double>& loss_history() const { return loss_history_; }
    /// True when training saw fewer than two distinct classes; the model is then constant.
    bool degenerate() const { return degenerate_; }
    const std::vector<std::vector<RegressionTree>>& trees() const { return trees_; }

    /// Summed per-class scores. Throws std::invalid_argument on arity mismatch.
    std::vector<double> raw_scores(std::span<const double> x) const;
    Prediction predict(std::span<const double> x) const;

    void save(std::ostream& out) const;
    /// Throws std::runtime_error on malformed input or an unsupported version.
    static GbdtModel load(std::istream& in);

private:
    friend GbdtModel train_gbdt(const Dataset&, const GbdtHyper&);
    static GbdtModel load_unchecked(std::istream& in);

    std::vector<std::string> label_names_;
    std::size_t arity_ = 0;
    double learning_rate_ = 0.1;
    int max_depth_ = 3;
    std::vector<double> base_scores_;
    std::vector<std::vector<RegressionTree>> trees_;  // [round][class]
    std::vector<double> loss_history_;
    bool degenerate_ = false;
};

GbdtModel train_gbdt(const Dataset& train, const GbdtHyper& hyper = {});

ConfusionMatrix evaluate(const GbdtModel& model, const Dataset& test);

inline constexpr int kModelFormatVersion = 1;

}  // namespace ultratac::ml
