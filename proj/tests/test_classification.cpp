#include "generators.hpp"
#include "ultratac/dataset.hpp"
#include "ultratac/gbdt.hpp"
#include "ultratac/pca.hpp"
#include "ultratac/texture.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

using namespace ultratac;
using namespace ultratac::ml;

namespace {

// Gaussian blobs, one per class, centred on the simplex corners scaled by `spread`.
Dataset blobs(int classes, int per_class, int dims, double spread, std::uint64_t seed) {
    gen::Gen g(seed);
    Dataset d;
    for (int c = 0; c < classes; ++c) d.label_names.push_back("c" + std::to_string(c));
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> row(static_cast<std::size_t>(dims));
            for (int j = 0; j < dims; ++j) row[static_cast<std::size_t>(j)] = (j == c % dims ? spread : 0.0) + g.normal();
            d.add(row, c);
        }
    d.split_seed = seed;
    return d;
}

double accuracy_on(const GbdtModel& m, const Dataset& d) { return evaluate(m, d).accuracy(); }

}  // namespace

// ---- dataset and confusion matrix ----

TEST_CASE("dataset validation and counts") {
    Dataset d;
    d.label_names = {"a", "b", "c"};
    d.add({1.0, 2.0}, 0);
    d.add({1.0, 2.0}, 2);
    d.add({1.0, 2.0}, 2);
    CHECK_NOTHROW(d.validate());
    CHECK(d.class_counts() == std::vector<std::size_t>{1, 0, 2});
    CHECK(d.arity() == 2);
    auto ragged = d;
    ragged.features[1].push_back(3.0);
    CHECK_THROWS_AS(ragged.validate(), std::invalid_argument);
    auto bad = d;
    bad.labels[0] = 3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("stratified split keeps class proportions and is deterministic") {
    gen::for_all(20, 41, [](gen::Gen& g, int i) {
        const int k = g.integer(2, 6);
        Dataset d;
        for (int c = 0; c < k; ++c) d.label_names.push_back(std::to_string(c));
        std::vector<int> n(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
            n[static_cast<std::size_t>(c)] = g.integer(1, 60);
            for (int j = 0; j < n[static_cast<std::size_t>(c)]; ++j) d.add({static_cast<double>(d.size())}, c);
        }
        d.split_seed = static_cast<std::uint64_t>(i);
        const double frac = g.uniform(0.0, 1.0);
        const auto s = stratified_split(d, frac);
        INFO("case " << i);
        const auto tr = s.train.class_counts(), te = s.test.class_counts();
        for (int c = 0; c < k; ++c) {
            const auto nc = static_cast<std::size_t>(n[static_cast<std::size_t>(c)]);
            CHECK(tr[static_cast<std::size_t>(c)] == static_cast<std::size_t>(std::lround(frac * static_cast<double>(nc))));
            CHECK(tr[static_cast<std::size_t>(c)] + te[static_cast<std::size_t>(c)] == nc);
        }
        // Row ids are unique, so disjointness and coverage are checked through them.
        std::set<double> ids;
        for (const auto& r : s.train.features) ids.insert(r[0]);
        for (const auto& r : s.test.features) ids.insert(r[0]);
        CHECK(ids.size() == d.size());
        const auto again = stratified_split(d, frac);
        CHECK(again.train.features == s.train.features);
        CHECK(again.test.features == s.test.features);
    });
}

TEST_CASE("dataset CSV round trip") {
    Dataset d;
    d.label_names = {"Iron", "Wood"};
    d.feature_names = {"f0", "f1"};
    d.add({0.1, -2.5e-7}, 1);
    d.add({3.0, 1.0 / 3.0}, 0);
    std::stringstream io;
    write_dataset_csv(io, d);
    const auto back = read_dataset_csv(io);
    CHECK(back.feature_names == d.feature_names);
    CHECK(back.features == d.features);
    REQUIRE(back.size() == 2);
    CHECK(back.label_names[static_cast<std::size_t>(back.labels[0])] == "Wood");
    CHECK(back.label_names[static_cast<std::size_t>(back.labels[1])] == "Iron");

    std::istringstream bad("label,a\nx,1,2\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), std::invalid_argument);
}

TEST_CASE("confusion matrix") {
    ConfusionMatrix cm({"a", "b", "c"});
    CHECK(cm.accuracy() == 0.0);
    for (int t = 0; t < 3; ++t)
        for (int i = 0; i < 4; ++i) cm.add(t, t);
    CHECK(cm.accuracy() == 1.0);

    // A constant predictor on balanced classes scores 1/K.
    ConfusionMatrix constant({"a", "b", "c", "d"});
    for (int t = 0; t < 4; ++t)
        for (int i = 0; i < 5; ++i) constant.add(t, 2);
    CHECK(constant.accuracy() == doctest::Approx(0.25));
    CHECK(constant.class_recall(2) == 1.0);
    CHECK(constant.class_recall(0) == 0.0);
    for (int t = 0; t < 4; ++t) CHECK(constant.row_total(t) == 5);
    CHECK_THROWS_AS(constant.add(4, 0), std::invalid_argument);

    std::ostringstream out;
    ConfusionMatrix small({"x", "y"});
    small.add(0, 1);
    small.write_csv(out);
    CHECK(out.str() == "truth\\predicted,x,y\nx,0,1\ny,0,0\n");
}

// ---- boosted trees ----

TEST_CASE("separable data is learned within 20 rounds") {
    auto d = blobs(2, 25, 2, 12.0, 3);
    GbdtHyper h;
    h.n_rounds = 20;
    const auto m = train_gbdt(d, h);
    CHECK(accuracy_on(m, d) == 1.0);
}

TEST_CASE("depth-two trees learn XOR") {
    gen::Gen g(5);
    Dataset d;
    d.label_names = {"even", "odd"};
    for (int i = 0; i < 200; ++i) {
        const int a = g.integer(0, 1), b = g.integer(0, 1);
        d.add({a + g.uniform(-0.3, 0.3), b + g.uniform(-0.3, 0.3)}, a ^ b);
    }
    GbdtHyper h;
    h.max_depth = 2;
    h.n_rounds = 50;
    const auto m = train_gbdt(d, h);
    CHECK(accuracy_on(m, d) == 1.0);
    for (const auto& round : m.trees())
        for (const auto& t : round) CHECK(t.depth() <= 2);
}

TEST_CASE("single-class training gives a degenerate constant model") {
    Dataset d;
    d.label_names = {"only", "never"};
    for (int i = 0; i < 10; ++i) d.add({static_cast<double>(i)}, 0);
    const auto m = train_gbdt(d);
    CHECK(m.degenerate());
    CHECK(m.predict(std::vector<double>{100.0}).label == 0);
    CHECK(m.predict(std::vector<double>{-5.0}).label == 0);
}

TEST_CASE("training loss never increases") {
    gen::for_all(12, 42, [](gen::Gen& g, int i) {
        auto d = blobs(g.integer(2, 5), g.integer(10, 40), g.integer(1, 4), g.uniform(0.0, 3.0), static_cast<std::uint64_t>(i));
        GbdtHyper h;
        h.n_rounds = g.integer(1, 30);
        h.max_depth = g.integer(1, 4);
        h.learning_rate = g.uniform(0.05, 1.0);
        h.l2_lambda = g.uniform(0.0, 2.0);
        h.subsample = g.coin() ? 1.0 : g.uniform(0.3, 1.0);
        h.seed = static_cast<std::uint64_t>(i);
        const auto m = train_gbdt(d, h);
        const auto& loss = m.loss_history();
        INFO("case " << i);
        REQUIRE(loss.size() == static_cast<std::size_t>(h.n_rounds) + 1);
        for (std::size_t r = 1; r < loss.size(); ++r) CHECK(loss[r] <= loss[r - 1] + 1e-12);
        for (const auto& round : m.trees())
            for (const auto& t : round) CHECK(t.depth() <= h.max_depth);
    });
}

TEST_CASE("predicted probabilities form a distribution") {
    auto d = blobs(4, 20, 3, 2.0, 9);
    const auto m = train_gbdt(d);
    gen::for_all(100, 43, [&](gen::Gen& g, int) {
        std::vector<double> x{g.normal(5.0), g.normal(5.0), g.normal(5.0)};
        const auto p = m.predict(x);
        CHECK(std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (double v : p.probabilities) CHECK(v >= 0.0);
        CHECK(p.label == argmax_label(p.probabilities));
    });
}

TEST_CASE("argmax breaks ties low and ignores positive scaling") {
    CHECK(argmax_label(std::vector<double>{1.0, 3.0, 3.0}) == 1);
    CHECK(argmax_label(std::vector<double>{0.0, 0.0}) == 0);
    gen::for_all(100, 44, [](gen::Gen& g, int) {
        std::vector<double> s(static_cast<std::size_t>(g.integer(1, 8)));
        for (auto& v : s) v = static_cast<double>(g.integer(-3, 3));
        const double k = g.log_uniform(1e-3, 1e3);
        auto scaled = s;
        for (auto& v : scaled) v *= k;
        CHECK(argmax_label(scaled) == argmax_label(s));
        CHECK(argmax_label(softmax(s)) == argmax_label(s));
    });
}

TEST_CASE("training is deterministic in the seed") {
    auto d = blobs(3, 30, 2, 1.5, 11);
    GbdtHyper h;
    h.subsample = 0.7;
    h.n_rounds = 30;
    std::ostringstream a, b;
    train_gbdt(d, h).save(a);
    train_gbdt(d, h).save(b);
    CHECK(a.str() == b.str());
}

TEST_CASE("model save and load round trip") {
    auto d = blobs(3, 30, 4, 2.0, 12);
    const auto m = train_gbdt(d);
    std::stringstream io;
    m.save(io);
    const auto back = GbdtModel::load(io);
    CHECK(back.label_names() == m.label_names());
    CHECK(back.arity() == m.arity());
    for (const auto& row : d.features) CHECK(back.raw_scores(row) == m.raw_scores(row));

    CHECK_THROWS_AS(m.predict(std::vector<double>{1.0}), std::invalid_argument);

    std::istringstream wrong_version("ultratac-gbdt 99\n");
    CHECK_THROWS_AS(GbdtModel::load(wrong_version), std::runtime_error);
    std::istringstream garbage("hello\n");
    CHECK_THROWS_AS(GbdtModel::load(garbage), std::runtime_error);
    std::string text = io.str();
    std::istringstream truncated(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(GbdtModel::load(truncated), std::runtime_error);
    std::istringstream bad_count("ultratac-gbdt 1\nclasses x\n");
    CHECK_THROWS_AS(GbdtModel::load(bad_count), std::runtime_error);
}

TEST_CASE("hyper-parameter validation") {
    GbdtHyper h;
    h.max_depth = 0;
    CHECK_THROWS_AS(h.validate(), std::invalid_argument);
    h = {};
    h.learning_rate = 0.0;
    CHECK_THROWS_AS(h.validate(), std::invalid_argument);
    h = {};
    h.subsample = 1.5;
    CHECK_THROWS_AS(h.validate(), std::invalid_argument);
    CHECK_THROWS_AS(train_gbdt(Dataset{}), std::invalid_argument);
}

// ---- PCA ----

TEST_CASE("PCA finds the dominant axis") {
    gen::Gen g(50);
    Eigen::MatrixXd x(500, 2);
    for (int i = 0; i < 500; ++i) {
        x(i, 0) = g.normal(10.0);
        x(i, 1) = 0.0;
    }
    const auto p = pca_fit(x, 2);
    CHECK(p.components(0, 0) == doctest::Approx(1.0));
    CHECK(p.components(0, 1) == doctest::Approx(0.0).scale(1.0));
    CHECK(p.explained_variance_ratio[0] == doctest::Approx(1.0));
}

TEST_CASE("isotropic data splits variance evenly") {
    gen::Gen g(51);
    Eigen::MatrixXd x(10000, 2);
    for (int i = 0; i < x.rows(); ++i) x(i, 0) = g.normal(), x(i, 1) = g.normal();
    const auto p = pca_fit(x, 2);
    CHECK(std::abs(p.explained_variance_ratio[0] - 0.5) <= 0.02);
    CHECK(std::abs(p.explained_variance_ratio[1] - 0.5) <= 0.02);
}

TEST_CASE("PCA structural properties") {
    gen::for_all(30, 52, [](gen::Gen& g, int i) {
        const int n = g.integer(3, 60), d = g.integer(1, 6), rank = g.integer(1, d);
        // Rank-limited data: n x rank factors times a rank x d mixing matrix.
        Eigen::MatrixXd f(n, rank), mix(rank, d);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < rank; ++c) f(r, c) = g.normal(g.uniform(0.5, 5.0));
        for (int r = 0; r < rank; ++r)
            for (int c = 0; c < d; ++c) mix(r, c) = g.normal();
        Eigen::MatrixXd x = f * mix;
        x.rowwise() += Eigen::RowVectorXd::Constant(d, g.uniform(-3.0, 3.0));
        const int k = g.integer(1, d);
        const auto p = pca_fit(x, k);
        INFO("case " << i << " n=" << n << " d=" << d << " rank=" << rank << " k=" << k);

        const Eigen::MatrixXd gram = p.components * p.components.transpose();
        CHECK((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-9);
        double total = 0.0;
        for (std::size_t j = 0; j < p.explained_variance_ratio.size(); ++j) {
            total += p.explained_variance_ratio[j];
            if (j > 0) CHECK(p.explained_variance_ratio[j] <= p.explained_variance_ratio[j - 1] + 1e-12);
        }
        CHECK(total <= 1.0 + 1e-9);

        // With k >= rank the projection loses nothing.
        if (k >= rank) {
            const auto back = pca_inverse_transform(p, pca_transform(p, x));
            CHECK((back - x).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff()));
        }

        // Row order does not matter.
        Eigen::MatrixXd shuffled(n, d);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), g.rng());
        for (int r = 0; r < n; ++r) shuffled.row(r) = x.row(perm[static_cast<std::size_t>(r)]);
        const auto q = pca_fit(shuffled, k);
        for (int j = 0; j < k; ++j)
            CHECK(q.explained_variance_ratio[static_cast<std::size_t>(j)] ==
                  doctest::Approx(p.explained_variance_ratio[static_cast<std::size_t>(j)]).epsilon(1e-8).scale(1.0));
    });
}

TEST_CASE("PCA degenerate and invalid input") {
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(5, 3, 2.0);
    const auto p = pca_fit(flat, 2);
    CHECK(p.degenerate);
    for (double r : p.explained_variance_ratio) CHECK(r == 0.0);
    CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Zero(1, 3), 1), std::invalid_argument);
    CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Zero(4, 3), 4), std::invalid_argument);
    CHECK_THROWS_AS(pca_transform(p, Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);
    CHECK_THROWS_AS(to_matrix({{1.0, 2.0}, {1.0}}), std::invalid_argument);
}

TEST_CASE("standardize gives unit columns and centres flat ones") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 5, 2, 5, 3, 5, 4, 5;
    const auto z = standardize(x);
    CHECK(z.col(0).mean() == doctest::Approx(0.0).scale(1.0));
    CHECK(std::sqrt(z.col(0).squaredNorm() / 3.0) == doctest::Approx(1.0));
    CHECK(z.col(1).cwiseAbs().maxCoeff() == 0.0);
}

// ---- texture ----

namespace {

const double kRotations[] = {0.0, 0.3, 0.7, 1.0, 1.3, 2.0, 2.9, 4.1, 5.5};

// Largest |feature| over every template and pose: the scale each feature lives on.
std::vector<double> feature_scales(int size) {
    std::vector<double> scale(kTextureFeatureCount, 0.0);
    for (auto p : kAllPatterns)
        for (double r : kRotations) {
            RenderParams rp;
            rp.size = size;
            rp.rotation = r;
            const auto f = texture_features(render_pattern(p, rp)).values;
            for (std::size_t i = 0; i < f.size(); ++i) scale[i] = std::max(scale[i], std::abs(f[i]));
        }
    return scale;
}

// Rotated copies against the upright template. `tol[i]` is relative to that feature's scale;
// a 1e-5 absolute floor covers invariants that vanish for every template by symmetry.
void check_rotation(int size, const std::vector<double>& tol, std::uint64_t seed) {
    const auto scale = feature_scales(size);
    const auto names = texture_feature_names();
    for (auto p : kAllPatterns) {
        RenderParams upright;
        upright.size = size;
        const auto a = texture_features(render_pattern(p, upright)).values;
        gen::for_all(12, seed, [&](gen::Gen& g, int) {
            RenderParams rp = upright;
            rp.rotation = g.uniform(-std::numbers::pi, std::numbers::pi);
            const auto b = texture_features(render_pattern(p, rp)).values;
            for (std::size_t i = 0; i < a.size(); ++i) {
                INFO(to_string(p) << " " << names[i] << " at " << rp.rotation << " rad, " << size << " px");
                CHECK(std::abs(b[i] - a[i]) <= tol[i] * scale[i] + 1e-5);
            }
        });
    }
}

}  // namespace

TEST_CASE("texture features are rotation invariant") {
    // At the 64 px working size the sixth-order moment of the thinnest pattern carries about
    // 2-3% pixel-sampling error; it falls under 2% once the imprint is resolved more finely.
    std::vector<double> at64(kTextureFeatureCount, 0.02);
    at64[9] = 0.03;
    check_rotation(64, at64, 60);
    check_rotation(128, std::vector<double>(kTextureFeatureCount, 0.02), 61);
}

TEST_CASE("texture features are translation and intensity invariant") {
    gen::for_all(40, 62, [](gen::Gen& g, int i) {
        const auto p = g.pick(std::vector<Pattern>(std::begin(kAllPatterns), std::end(kAllPatterns)));
        RenderParams rp;
        rp.rotation = g.uniform(-3.0, 3.0);
        rp.scale = g.uniform(0.85, 1.15);
        const auto base = render_pattern(p, rp);
        const auto a = texture_features(base).values;
        INFO("case " << i << " " << to_string(p));

        // Whole-pixel shift of the rendered image.
        const int dx = g.integer(-6, 6), dy = g.integer(-6, 6);
        GrayImage shifted(base.width, base.height);
        for (int y = 0; y < base.height; ++y)
            for (int x = 0; x < base.width; ++x) {
                const int sx = x - dx, sy = y - dy;
                if (sx >= 0 && sy >= 0 && sx < base.width && sy < base.height) shifted.at(x, y) = base.at(sx, sy);
            }
        const auto b = texture_features(shifted).values;

        auto dimmer = rp;
        dimmer.intensity = g.uniform(0.2, 1.0);
        const auto c = texture_features(render_pattern(p, dimmer)).values;
        for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(b[j] == doctest::Approx(a[j]).epsilon(1e-9).scale(1e-6));
            CHECK(c[j] == doctest::Approx(a[j]).epsilon(1e-9).scale(1e-6));
        }
    });
}

TEST_CASE("texture templates are distinguishable") {
    RenderParams rp;
    const auto circle = texture_features(render_pattern(Pattern::Circle, rp)).values;
    const auto rect = texture_features(render_pattern(Pattern::Rectangle, rp)).values;
    // A disc has the smallest first invariant of any shape: 1 / (2 pi).
    CHECK(circle[0] == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(0.01));
    CHECK(rect[0] > circle[0] * 1.2);
    CHECK(rect[1] > 100.0 * circle[1] + 1e-6);

    std::vector<GrayImage> images;
    std::vector<int> labels;
    RenderJitter jit;
    jit.noise_std = 0.02;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 40; ++i) {
            images.push_back(render_augmented(c == 0 ? Pattern::Circle : Pattern::Rectangle, jit,
                                              derive_seed(63, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)})));
            labels.push_back(c);
        }
    const auto clf = train_texture_classifier(images, labels, {"circle", "rectangle"});
    int correct = 0;
    for (int i = 0; i < 40; ++i) {
        const int c = i % 2;
        const auto img = render_augmented(c == 0 ? Pattern::Circle : Pattern::Rectangle, jit, derive_seed(64, {static_cast<std::uint64_t>(i)}));
        correct += clf.predict(img) == c;
    }
    CHECK(correct == 40);
}

TEST_CASE("blank images are degenerate") {
    const auto f = texture_features(GrayImage(16, 16));
    CHECK(f.degenerate);
    for (double v : f.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(texture_features(GrayImage{}), std::invalid_argument);
    CHECK(texture_feature_names().size() == kTextureFeatureCount);
}

TEST_CASE("pattern names") {
    for (auto p : kAllPatterns) CHECK(parse_pattern(to_string(p)) == p);
    CHECK(parse_pattern("HEXAGON") == Pattern::Hexagon);
    CHECK_THROWS_AS(parse_pattern("star"), std::invalid_argument);
}

TEST_CASE("rendering is reproducible and stays in range") {
    RenderParams rp;
    rp.noise_std = 0.2;
    rp.seed = 5;
    const auto a = render_pattern(Pattern::Triangle, rp), b = render_pattern(Pattern::Triangle, rp);
    CHECK(a.pixels == b.pixels);
    CHECK(std::all_of(a.pixels.begin(), a.pixels.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));
    rp.size = 0;
    CHECK_THROWS_AS(render_pattern(Pattern::Circle, rp), std::invalid_argument);
}
