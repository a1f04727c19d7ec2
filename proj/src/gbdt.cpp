#include "ultratac/gbdt.hpp"

#include "ultratac/config.hpp"
#include "ultratac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ultratac::ml {

void GbdtHyper::validate() const {
    if (n_rounds < 0) throw std::invalid_argument("n_rounds must be >= 0");
    if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw std::invalid_argument("learning_rate must be in (0,1]");
    if (!(l2_lambda >= 0.0)) throw std::invalid_argument("l2_lambda must be >= 0");
    if (!(min_child_weight >= 0.0)) throw std::invalid_argument("min_child_weight must be >= 0");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw std::invalid_argument("subsample must be in (0,1]");
}

double RegressionTree::predict(std::span<const double> x) const {
    if (nodes.empty()) return 0.0;
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

int RegressionTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

int argmax_label(std::span<const double> scores) {
    int best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k)
        if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> p(scores.begin(), scores.end());
    if (p.empty()) return p;
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto& v : p) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

std::vector<double> GbdtModel::raw_scores(std::span<const double> x) const {
    if (x.size() != arity_)
        throw std::invalid_argument("predict: expected " + std::to_string(arity_) + " features, got " +
                                    std::to_string(x.size()));
    std::vector<double> s = base_scores_;
    for (const auto& round : trees_)
        for (std::size_t c = 0; c < round.size(); ++c) s[c] += round[c].predict(x);
    return s;
}

Prediction GbdtModel::predict(std::span<const double> x) const {
    auto scores = raw_scores(x);
    Prediction p;
    p.label = argmax_label(scores);
    p.probabilities = softmax(scores);
    return p;
}

namespace {

struct TreeBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<std::vector<std::size_t>>& sorted;  // per feature, row indices by ascending value
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    const std::vector<char>& in_sample;
    const GbdtHyper& hyper;

    struct Candidate {
        double gain = -std::numeric_limits<double>::infinity();
        int feature = -1;
        double threshold = 0.0;
    };

    double leaf_value(double g, double h) const { return -g / (h + hyper.l2_lambda); }
    double score(double g, double h) const { return g * g / (h + hyper.l2_lambda); }

    RegressionTree build() const {
        RegressionTree tree;
        const std::size_t n = x.size();
        const std::size_t n_features = sorted.size();
        std::vector<int> node_of(n, -1);
        double g0 = 0.0, h0 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (in_sample[i]) {
                node_of[i] = 0;
                g0 += grad[i];
                h0 += hess[i];
            }
        tree.nodes.push_back({-1, 0.0, -1, -1, leaf_value(g0, h0)});
        std::vector<std::pair<double, double>> stats{{g0, h0}};  // per tree node (G, H)

        std::vector<int> frontier{0};
        for (int depth = 0; depth < hyper.max_depth && !frontier.empty(); ++depth) {
            // Slot lookup for frontier nodes.
            std::vector<int> slot(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < frontier.size(); ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
            std::vector<Candidate> best(frontier.size());

            for (std::size_t f = 0; f < n_features; ++f) {
                std::vector<double> gl(frontier.size(), 0.0), hl(frontier.size(), 0.0);
                std::vector<double> last(frontier.size(), std::numeric_limits<double>::quiet_NaN());
                std::vector<std::size_t> seen(frontier.size(), 0);
                for (std::size_t row : sorted[f]) {
                    const int node = node_of[row];
                    if (node < 0) continue;
                    const int s = slot[static_cast<std::size_t>(node)];
                    if (s < 0) continue;
                    const auto si = static_cast<std::size_t>(s);
                    const double v = x[row][f];
                    if (seen[si] > 0 && v > last[si]) {
                        const auto [gt, ht] = stats[static_cast<std::size_t>(node)];
                        const double gr = gt - gl[si];
                        const double hr = ht - hl[si];
                        if (hl[si] >= hyper.min_child_weight && hr >= hyper.min_child_weight) {
                            const double gain = score(gl[si], hl[si]) + score(gr, hr) - score(gt, ht);
                            if (gain > best[si].gain) {
                                best[si].gain = gain;
                                best[si].feature = static_cast<int>(f);
                                best[si].threshold = last[si] + 0.5 * (v - last[si]);
                            }
                        }
                    }
                    gl[si] += grad[row];
                    hl[si] += hess[row];
                    last[si] = v;
                    ++seen[si];
                }
            }

            std::vector<int> next;
            for (std::size_t s = 0; s < frontier.size(); ++s) {
                const auto& cand = best[s];
                if (cand.feature < 0 || cand.gain < 0.0) continue;
                const int parent = frontier[s];
                const int left = static_cast<int>(tree.nodes.size());
                const int right = left + 1;
                tree.nodes.push_back({});
                tree.nodes.push_back({});
                stats.emplace_back(0.0, 0.0);
                stats.emplace_back(0.0, 0.0);
                auto& p = tree.nodes[static_cast<std::size_t>(parent)];
                p.feature = cand.feature;
                p.threshold = cand.threshold;
                p.left = left;
                p.right = right;
                next.push_back(left);
                next.push_back(right);
            }
            if (next.empty()) break;
            for (std::size_t i = 0; i < n; ++i) {
                const int node = node_of[i];
                if (node < 0) continue;
                const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
                if (nd.is_leaf()) continue;
                const int child = x[i][static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
                node_of[i] = child;
                stats[static_cast<std::size_t>(child)].first += grad[i];
                stats[static_cast<std::size_t>(child)].second += hess[i];
            }
            for (int c : next) {
                auto& nd = tree.nodes[static_cast<std::size_t>(c)];
                const auto [g, h] = stats[static_cast<std::size_t>(c)];
                nd.value = leaf_value(g, h);
            }
            frontier = std::move(next);
        }
        return tree;
    }
};

double mean_log_loss(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels) {
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& s = scores[i];
        const double m = *std::max_element(s.begin(), s.end());
        double z = 0.0;
        for (double v : s) z += std::exp(v - m);
        loss += (m + std::log(z)) - s[static_cast<std::size_t>(labels[i])];
    }
    return scores.empty() ? 0.0 : loss / static_cast<double>(scores.size());
}

void scale_leaves(RegressionTree& tree, double factor) {
    for (auto& n : tree.nodes)
        if (n.is_leaf()) n.value *= factor;
}

}  // namespace

GbdtModel train_gbdt(const Dataset& train, const GbdtHyper& hyper) {
    hyper.validate();
    train.validate();
    if (train.size() == 0) throw std::invalid_argument("train_gbdt: empty dataset");
    const std::size_t k = train.num_classes();
    if (k == 0) throw std::invalid_argument("train_gbdt: no label names");

    GbdtModel model;
    model.label_names_ = train.label_names;
    model.arity_ = train.arity();
    model.learning_rate_ = hyper.learning_rate;
    model.max_depth_ = hyper.max_depth;

    const auto counts = train.class_counts();
    const std::size_t n = train.size();
    model.base_scores_.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        model.base_scores_[c] = std::log((static_cast<double>(counts[c]) + 1.0) / (static_cast<double>(n) + static_cast<double>(k)));

    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    std::vector<std::vector<double>> scores(n, model.base_scores_);
    model.loss_history_.push_back(mean_log_loss(scores, train.labels));
    if (present < 2) {
        model.degenerate_ = true;
        return model;
    }

    const std::size_t n_features = model.arity_;
    std::vector<std::vector<std::size_t>> sorted(n_features);
    for (std::size_t f = 0; f < n_features; ++f) {
        auto& idx = sorted[f];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return train.features[a][f] < train.features[b][f]; });
    }

    Rng rng(mix_seed(hyper.seed));
    std::vector<double> grad(n), hess(n);
    std::vector<char> in_sample(n, 1);
    for (int round = 0; round < hyper.n_rounds; ++round) {
        if (hyper.subsample < 1.0) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (auto& s : in_sample) s = u(rng) < hyper.subsample ? 1 : 0;
        }
        std::vector<std::vector<double>> probs(n);
        for (std::size_t i = 0; i < n; ++i) probs[i] = softmax(scores[i]);

        std::vector<RegressionTree> round_trees(k);
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = probs[i][c];
                const double y = static_cast<std::size_t>(train.labels[i]) == c ? 1.0 : 0.0;
                grad[i] = p - y;
                hess[i] = std::max(p * (1.0 - p), 1e-16);
            }
            TreeBuilder builder{train.features, sorted, grad, hess, in_sample, hyper};
            round_trees[c] = builder.build();
            scale_leaves(round_trees[c], hyper.learning_rate);
        }

        // Per-row tree outputs for this round, then a backtracking step on the full loss.
        std::vector<std::vector<double>> delta(n, std::vector<double>(k));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c) delta[i][c] = round_trees[c].predict(train.features[i]);

        const double previous = model.loss_history_.back();
        double step = 1.0;
        double loss = previous;
        std::vector<std::vector<double>> trial(n, std::vector<double>(k));
        for (int attempt = 0; attempt < 40; ++attempt) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < k; ++c) trial[i][c] = scores[i][c] + step * delta[i][c];
            loss = mean_log_loss(trial, train.labels);
            if (loss <= previous) break;
            step *= 0.5;
        }
        if (loss > previous) {
            step = 0.0;
            loss = previous;
        } else {
            scores.swap(trial);
        }
        if (step != 1.0)
            for (auto& t : round_trees) scale_leaves(t, step);
        model.trees_.push_back(std::move(round_trees));
        model.loss_history_.push_back(loss);
    }
    return model;
}

ConfusionMatrix evaluate(const GbdtModel& model, const Dataset& test) {
    test.validate();
    ConfusionMatrix cm(test.label_names);
    for (std::size_t i = 0; i < test.size(); ++i) cm.add(test.labels[i], model.predict(test.features[i]).label);
    return cm;
}

void GbdtModel::save(std::ostream& out) const {
    out << "ultratac-gbdt " << kModelFormatVersion << '\n';
    out << "classes " << label_names_.size() << '\n';
    for (const auto& name : label_names_) out << "label " << name << '\n';
    out << "arity " << arity_ << '\n';
    out << "learning_rate " << format_double(learning_rate_) << '\n';
    out << "max_depth " << max_depth_ << '\n';
    out << "degenerate " << (degenerate_ ? 1 : 0) << '\n';
    out << "base";
    for (double b : base_scores_) out << ' ' << format_double(b);
    out << '\n';
    out << "rounds " << trees_.size() << '\n';
    for (std::size_t r = 0; r < trees_.size(); ++r)
        for (std::size_t c = 0; c < trees_[r].size(); ++c) {
            const auto& t = trees_[r][c];
            out << "tree " << r << ' ' << c << ' ' << t.nodes.size() << '\n';
            for (const auto& nd : t.nodes)
                out << nd.feature << ' ' << format_double(nd.threshold) << ' ' << nd.left << ' ' << nd.right << ' '
                    << format_double(nd.value) << '\n';
        }
    out << "end\n";
}

namespace {

[[noreturn]] void malformed(const std::string& what) { throw std::runtime_error("model file: " + what); }

std::string expect_line(std::istream& in, const std::string& keyword) {
    std::string line;
    if (!std::getline(in, line)) malformed("unexpected end of input, wanted '" + keyword + "'");
    if (line.rfind(keyword + " ", 0) != 0 && line != keyword) malformed("expected '" + keyword + "', got '" + line + "'");
    return line.size() > keyword.size() ? line.substr(keyword.size() + 1) : std::string{};
}

double to_double(const std::string& s) {
    try {
        return parse_double(s, "model value");
    } catch (const ConfigError& e) {
        malformed(e.what());
    }
}

}  // namespace

GbdtModel GbdtModel::load(std::istream& in) {
    try {
        return load_unchecked(in);
    } catch (const std::logic_error& e) {
        // std::stoul and friends report malformed integers this way.
        malformed(e.what());
    }
}

GbdtModel GbdtModel::load_unchecked(std::istream& in) {
    GbdtModel m;
    const auto version = expect_line(in, "ultratac-gbdt");
    if (version != std::to_string(kModelFormatVersion)) malformed("unsupported version " + version);
    const auto k = std::stoul(expect_line(in, "classes"));
    for (std::size_t c = 0; c < k; ++c) m.label_names_.push_back(expect_line(in, "label"));
    m.arity_ = std::stoul(expect_line(in, "arity"));
    m.learning_rate_ = to_double(expect_line(in, "learning_rate"));
    m.max_depth_ = std::stoi(expect_line(in, "max_depth"));
    m.degenerate_ = expect_line(in, "degenerate") == "1";
    {
        std::istringstream ss(expect_line(in, "base"));
        std::string tok;
        while (ss >> tok) m.base_scores_.push_back(to_double(tok));
        if (m.base_scores_.size() != k) malformed("base score count does not match classes");
    }
    const auto rounds = std::stoul(expect_line(in, "rounds"));
    m.trees_.assign(rounds, std::vector<RegressionTree>(k));
    for (std::size_t r = 0; r < rounds; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            std::istringstream head(expect_line(in, "tree"));
            std::size_t rr = 0, cc = 0, count = 0;
            if (!(head >> rr >> cc >> count) || rr != r || cc != c) malformed("tree header out of order");
            auto& t = m.trees_[r][c];
            t.nodes.resize(count);
            for (auto& nd : t.nodes) {
                std::string line;
                if (!std::getline(in, line)) malformed("truncated tree");
                std::istringstream ss(line);
                std::string thr, val;
                if (!(ss >> nd.feature >> thr >> nd.left >> nd.right >> val)) malformed("bad node line '" + line + "'");
                nd.threshold = to_double(thr);
                nd.value = to_double(val);
                if (!nd.is_leaf()) {
                    if (nd.left < 0 || nd.right < 0 || static_cast<std::size_t>(nd.left) >= count ||
                        static_cast<std::size_t>(nd.right) >= count ||
                        static_cast<std::size_t>(nd.feature) >= m.arity_)
                        malformed("node references out of range");
                }
            }
        }
    expect_line(in, "end");
    // Loss history is a training artefact and is not persisted.
    return m;
}

}  // namespace ultratac::ml
