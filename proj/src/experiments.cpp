#include "ultratac/experiments.hpp"

#include "svg.hpp"
#include "ultratac/echo.hpp"
#include "ultratac/fusion.hpp"
#include "ultratac/pca.hpp"
#include "ultratac/rng.hpp"
#include "ultratac/signal.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace ultratac::experiments {

namespace fs = std::filesystem;

std::string_view to_string(Experiment e) {
    switch (e) {
        case Experiment::Proximity: return "proximity";
        case Experiment::Material: return "material";
        case Experiment::DualModal: return "dualmodal";
        case Experiment::Inspection: return "inspection";
    }
    return "?";
}

Experiment parse_experiment(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (auto e : {Experiment::Proximity, Experiment::Material, Experiment::DualModal, Experiment::Inspection})
        if (to_string(e) == t) return e;
    throw ConfigError("unknown experiment '" + std::string(text) + "' (proximity, material, dualmodal, inspection)");
}

std::optional<double> ExperimentResult::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------
// Configuration

namespace {

std::vector<double> grid_cm(double lo, double hi, double step) {
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back((lo + static_cast<double>(i) * step) / 100.0);
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(Experiment e) {
    ExperimentConfig c;
    c.experiment = e;
    c.patterns = {"circle", "rectangle", "hexagon", "triangle", "stripe"};
    switch (e) {
        case Experiment::Proximity:
            c.materials = {"Acrylic", "Iron", "Nylon", "Resin", "Wood"};
            c.distances = grid_cm(3.0, 8.0, 0.5);
            c.noise_std = kDefaultProximityNoise;
            break;
        case Experiment::Material:
            c.materials = {"Acrylic", "Iron", "Nylon", "Rubber", "Wood"};
            c.noise_std = kDefaultMaterialNoise;
            break;
        case Experiment::DualModal:
            c.materials = {"Iron", "Nylon", "Plastic"};
            c.noise_std = kDefaultMaterialNoise;
            break;
        case Experiment::Inspection:
            c.contents = {"Air", "Water", "Oil"};
            c.patterns = {"circle", "rectangle", "hexagon"};
            c.noise_std = kDefaultMaterialNoise;
            break;
    }
    return c;
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& k, Experiment e) {
    auto c = defaults(e);
    if (auto named = k.find("experiment"); named && parse_experiment(*named) != e)
        throw ConfigError("config is for experiment '" + *named + "'");
    if (!k.sections().empty()) c.registry = acoustics::MaterialRegistry::from_config(k, true);

    auto int_key = [&](const char* key, int& dst) {
        const auto v = k.get_int(key, dst);
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
            throw ConfigError(std::string(key) + " out of range");
        dst = static_cast<int>(v);
    };
    if (k.has("seed")) {
        const auto s = k.get_int("seed", 0);
        if (s < 0) throw ConfigError("seed must be >= 0");
        c.seed = static_cast<std::uint64_t>(s);
    }
    int_key("trials", c.trials);
    c.noise_std = k.get_double("noise_std", c.noise_std);
    if (k.has("threads")) {
        const auto t = k.get_int("threads", 0);
        if (t < 0) throw ConfigError("threads must be >= 0");
        c.threads = static_cast<unsigned>(t);
    }
    c.materials = k.get_list("materials", c.materials);
    if (k.has("distances_cm")) {
        c.distances.clear();
        for (double d : k.get_double_list("distances_cm", {})) c.distances.push_back(d / 100.0);
    } else if (k.has("distance_min_cm") || k.has("distance_max_cm") || k.has("distance_step_cm")) {
        const double lo = k.get_double("distance_min_cm", 3.0);
        const double hi = k.get_double("distance_max_cm", 8.0);
        const double step = k.get_double("distance_step_cm", 0.5);
        if (!(step > 0.0) || hi < lo) throw ConfigError("distance grid needs step > 0 and max >= min");
        c.distances = grid_cm(lo, hi, step);
    }
    int_key("empty_frames", c.empty_frames);
    int_key("target_frames", c.target_frames);
    int_key("samples_per_class", c.samples_per_class);
    c.train_fraction = k.get_double("train_fraction", c.train_fraction);
    c.slab_thickness = k.get_double("slab_thickness_m", c.slab_thickness);
    int_key("frames_per_sample", c.frames_per_sample);
    int_key("n_rounds", c.hyper.n_rounds);
    int_key("max_depth", c.hyper.max_depth);
    c.hyper.learning_rate = k.get_double("learning_rate", c.hyper.learning_rate);
    c.hyper.l2_lambda = k.get_double("l2_lambda", c.hyper.l2_lambda);
    c.hyper.min_child_weight = k.get_double("min_child_weight", c.hyper.min_child_weight);
    c.hyper.subsample = k.get_double("subsample", c.hyper.subsample);
    if (k.has("gbdt_seed")) c.hyper.seed = static_cast<std::uint64_t>(k.get_int("gbdt_seed", 42));
    c.texture_noise = k.get_double("texture_noise", c.texture_noise);
    int_key("image_size", c.image_size);
    c.contents = k.get_list("contents", c.contents);
    c.patterns = k.get_list("patterns", c.patterns);
    c.camera_noise = k.get_double("camera_noise", c.camera_noise);
    int_key("training_per_class", c.training_per_class);
    if (auto s = k.find("scenario_file")) c.scenario_file = fs::path(*s);
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    auto known = [&](const std::vector<std::string>& names, const char* what) {
        for (const auto& n : names)
            need(registry.contains(n), std::string("unknown ") + what + " '" + n + "'");
    };
    need(std::isfinite(noise_std) && noise_std >= 0.0, "noise_std must be >= 0");
    need(std::isfinite(texture_noise) && texture_noise >= 0.0, "texture_noise must be >= 0");
    need(std::isfinite(camera_noise) && camera_noise >= 0.0, "camera_noise must be >= 0");
    try {
        hyper.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    switch (experiment) {
        case Experiment::Proximity:
            need(materials.size() >= 2, "proximity needs at least two materials");
            known(materials, "material");
            need(!distances.empty(), "distance grid is empty");
            for (double d : distances)
                need(std::isfinite(d) && d >= 0.03 - 1e-9 && d <= 0.08 + 1e-9, "distances must lie within 3-8 cm");
            need(trials >= 1, "trials must be >= 1");
            need(empty_frames >= 2 && target_frames >= 1, "need >= 2 empty frames and >= 1 target frame");
            break;
        case Experiment::Material:
        case Experiment::DualModal:
            need(materials.size() >= 2, "need at least two materials");
            known(materials, "material");
            need(samples_per_class >= 50, "samples_per_class must be >= 50");
            need(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0, 1)");
            need(slab_thickness > 0.0, "slab_thickness_m must be > 0");
            need(frames_per_sample >= 1, "frames_per_sample must be >= 1");
            if (experiment == Experiment::DualModal) {
                need(patterns.size() >= 2, "need at least two patterns");
                need(image_size >= 16, "image_size must be >= 16");
            }
            break;
        case Experiment::Inspection:
            need(contents.size() >= 2, "inspection needs at least two contents");
            known(contents, "content");
            need(patterns.size() >= 2, "inspection needs at least two patterns");
            need(training_per_class >= 2, "training_per_class must be >= 2");
            break;
    }
    for (const auto& p : patterns) {
        try {
            ml::parse_pattern(p);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
}

// ---------------------------------------------------------------------------------------
// Helpers

unsigned default_thread_count() {
    if (const char* env = std::getenv("ULTRATAC_SIM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(std::max(1u, threads), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    pool.clear();
    if (error) std::rethrow_exception(error);
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line needs >= 2 paired points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line needs two distinct x values");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        sse += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return f;
}

std::vector<std::string> unique_labels(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    std::map<std::string, int> seen;
    for (const auto& n : names) {
        const int k = ++seen[n];
        out.push_back(k == 1 ? n : n + "#" + std::to_string(k));
    }
    return out;
}

namespace {

unsigned thread_count(const ExperimentConfig& cfg) { return cfg.threads ? cfg.threads : default_thread_count(); }

fs::path open_out(const ExperimentConfig& cfg, const std::string& name, std::ofstream& out) {
    fs::create_directories(cfg.output_dir);
    const auto path = cfg.output_dir / name;
    out.open(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return path;
}

std::string fx(double v, int digits = 6) { return format_fixed(v, digits); }

void write_metrics(const ExperimentConfig& cfg, const std::string& name, ExperimentResult& result) {
    std::ofstream out;
    result.files.push_back(open_out(cfg, name, out));
    out << "metric,value\n";
    for (const auto& [k, v] : result.metrics) out << k << ',' << fx(v) << '\n';
}

void write_confusion(const ExperimentConfig& cfg, const std::string& stem, const std::string& title,
                     const ml::ConfusionMatrix& cm, ExperimentResult& result) {
    std::ofstream csv;
    result.files.push_back(open_out(cfg, stem + ".csv", csv));
    cm.write_csv(csv);
    std::vector<std::size_t> counts;
    for (std::size_t r = 0; r < cm.size(); ++r)
        for (std::size_t c = 0; c < cm.size(); ++c) counts.push_back(cm.count(static_cast<int>(r), static_cast<int>(c)));
    std::ofstream svg_out;
    result.files.push_back(open_out(cfg, stem + ".svg", svg_out));
    svg::heatmap(svg_out, title, cm.label_names(), counts);
}

echo::SceneSpec slab_scene(const ExperimentConfig& cfg, const std::string& material, std::uint64_t seed) {
    echo::SceneSpec s;
    s.kind = echo::SceneKind::ContactSlab;
    s.slab_material = material;
    s.slab_thickness = cfg.slab_thickness;
    s = fusion::jitter_placement(s, fusion::PlacementJitter{}, seed);
    s.seed = mix_seed(seed);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Proximity

ExperimentResult run_proximity(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto labels = unique_labels(cfg.materials);
    const std::size_t nm = cfg.materials.size(), nd = cfg.distances.size(), nt = static_cast<std::size_t>(cfg.trials);
    std::vector<signal::DistanceEstimate> est(nm * nd * nt);
    const auto prox = timing_for(SensorMode::Proximity);
    const auto kparams = signal::kalman_params_for_noise(cfg.noise_std);

    parallel_for(est.size(), thread_count(cfg), [&](std::size_t slot) {
        const std::size_t m = slot / (nd * nt), d = (slot / nt) % nd, t = slot % nt;
        const auto seed = derive_seed(cfg.seed, {1, m, d, t});
        signal::KalmanFrameFilter kf(kparams);
        std::vector<echo::EchoFrame> filtered;
        std::size_t cycle = 0;
        for (int k = 0; k < cfg.empty_frames; ++k, ++cycle) {
            echo::SceneSpec s;
            s.noise_std = cfg.noise_std;
            s.seed = derive_seed(seed, {cycle});
            auto f = echo::synthesize(s, prox, cfg.registry);
            f.t0 = static_cast<double>(cycle) * prox.cycle_period;
            filtered.push_back(kf.update(f));
        }
        const auto reference = signal::capture_reference(filtered);
        echo::EchoFrame last;
        for (int k = 0; k < cfg.target_frames; ++k, ++cycle) {
            echo::SceneSpec s;
            s.kind = echo::SceneKind::AirTarget;
            s.distance = cfg.distances[d];
            s.target = cfg.materials[m];
            s.noise_std = cfg.noise_std;
            s.seed = derive_seed(seed, {cycle});
            auto f = echo::synthesize(s, prox, cfg.registry);
            f.t0 = static_cast<double>(cycle) * prox.cycle_period;
            last = kf.update(f);
        }
        est[slot] = signal::estimate_distance(last, reference);
    });

    ExperimentResult result;
    std::ofstream trials;
    result.files.push_back(open_out(cfg, "proximity_trials.csv", trials));
    trials << "material,distance_cm,trial,estimate_cm,valid,error_cm\n";
    std::ofstream points;
    result.files.push_back(open_out(cfg, "proximity_points.csv", points));
    points << "material,distance_cm,n_valid,mean_cm,std_cm,min_cm,max_cm,mean_abs_error_cm\n";

    std::vector<double> xs, ys;
    std::vector<svg::Series> series;
    double worst_point = 0.0, worst_trial = 0.0;
    std::size_t invalid = 0;
    for (std::size_t m = 0; m < nm; ++m) {
        svg::Series s{labels[m], {}, {}};
        for (std::size_t d = 0; d < nd; ++d) {
            const double truth = cfg.distances[d] * 100.0;
            std::vector<double> v;
            double abs_err = 0.0;
            for (std::size_t t = 0; t < nt; ++t) {
                const auto& e = est[(m * nd + d) * nt + t];
                const double cm = e.distance * 100.0;
                trials << labels[m] << ',' << fx(truth, 2) << ',' << t << ',' << fx(cm) << ',' << (e.valid ? 1 : 0)
                       << ',' << (e.valid ? fx(cm - truth) : std::string("")) << '\n';
                if (!e.valid) {
                    ++invalid;
                    continue;
                }
                v.push_back(cm);
                abs_err += std::abs(cm - truth);
                worst_trial = std::max(worst_trial, std::abs(cm - truth));
                xs.push_back(truth);
                ys.push_back(cm);
                s.x.push_back(truth);
                s.y.push_back(cm);
            }
            points << labels[m] << ',' << fx(truth, 2) << ',' << v.size();
            if (v.empty()) {
                points << ",,,,,\n";
                worst_point = INFINITY;
                continue;
            }
            const double n = static_cast<double>(v.size());
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            const double sd = v.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
            const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
            worst_point = std::max(worst_point, abs_err / n);
            points << ',' << fx(mean) << ',' << fx(sd) << ',' << fx(*lo) << ',' << fx(*hi) << ',' << fx(abs_err / n) << '\n';
        }
        series.push_back(std::move(s));
    }

    LinearFit fit;
    if (xs.size() >= 2 && std::adjacent_find(xs.begin(), xs.end(), std::not_equal_to<>()) != xs.end())
        fit = fit_line(xs, ys);
    result.metrics = {{"slope", fit.slope},
                      {"intercept_cm", fit.intercept},
                      {"r2", fit.r2},
                      {"estimates", static_cast<double>(xs.size())},
                      {"invalid_estimates", static_cast<double>(invalid)},
                      {"max_point_mean_abs_error_cm", worst_point},
                      {"max_abs_error_cm", worst_trial}};
    write_metrics(cfg, "proximity_summary.csv", result);

    std::ofstream plot;
    result.files.push_back(open_out(cfg, "proximity.svg", plot));
    svg::scatter(plot, "Proximity estimates", "actual distance (cm)", "estimated distance (cm)", series,
                 {{fit.slope, fit.intercept, "fit R2 = " + fx(fit.r2, 4)}});
    return result;
}

// ---------------------------------------------------------------------------------------
// Material

ExperimentResult run_material(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto labels = unique_labels(cfg.materials);
    const std::size_t nm = cfg.materials.size(), ns = static_cast<std::size_t>(cfg.samples_per_class);
    std::vector<std::vector<double>> rows(nm * ns);
    parallel_for(rows.size(), thread_count(cfg), [&](std::size_t slot) {
        const std::size_t m = slot / ns, i = slot % ns;
        const auto scene = slab_scene(cfg, cfg.materials[m], derive_seed(cfg.seed, {2, m, i}));
        rows[slot] = fusion::material_sample(scene, cfg.noise_std, cfg.frames_per_sample, cfg.registry).to_vector();
    });

    ml::Dataset data;
    data.label_names = labels;
    data.feature_names = signal::SpectralFeatures::column_names(signal::kDefaultBands);
    data.split_seed = derive_seed(cfg.seed, {3});
    for (std::size_t s = 0; s < rows.size(); ++s) data.add(rows[s], static_cast<int>(s / ns));

    const auto split = ml::stratified_split(data, cfg.train_fraction);
    const auto model = ml::train_gbdt(split.train, cfg.hyper);
    const auto cm = ml::evaluate(model, split.test);

    ExperimentResult result;
    {
        std::ofstream out;
        result.files.push_back(open_out(cfg, "material_features.csv", out));
        ml::write_dataset_csv(out, data);
    }
    write_confusion(cfg, "material_confusion", "Material confusion", cm, result);

    // PCA on z-scored features so no single unit dominates.
    const auto z = ml::standardize(ml::to_matrix(data.features));
    const auto pca = ml::pca_fit(z, std::min<int>(2, static_cast<int>(z.cols())));
    const auto proj = ml::pca_transform(pca, z);
    {
        std::ofstream out;
        result.files.push_back(open_out(cfg, "material_pca.csv", out));
        out << "label,pc1,pc2\n";
        for (Eigen::Index r = 0; r < proj.rows(); ++r)
            out << labels[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(r)])] << ',' << fx(proj(r, 0))
                << ',' << fx(proj.cols() > 1 ? proj(r, 1) : 0.0) << '\n';
        std::ofstream ev;
        result.files.push_back(open_out(cfg, "material_pca_variance.csv", ev));
        ev << "component,eigenvalue,explained_ratio\n";
        for (Eigen::Index i = 0; i < pca.eigenvalues.size(); ++i)
            ev << i + 1 << ',' << fx(pca.eigenvalues(i)) << ','
               << fx(pca.degenerate ? 0.0 : pca.eigenvalues(i) / pca.eigenvalues.sum()) << '\n';
        std::vector<svg::Series> series;
        for (std::size_t m = 0; m < nm; ++m) series.push_back({labels[m], {}, {}});
        for (Eigen::Index r = 0; r < proj.rows(); ++r) {
            auto& s = series[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(r)])];
            s.x.push_back(proj(r, 0));
            s.y.push_back(proj.cols() > 1 ? proj(r, 1) : 0.0);
        }
        std::ofstream plot;
        result.files.push_back(open_out(cfg, "material_pca.svg", plot));
        svg::scatter(plot, "Spectral features, first two principal components", "PC1", "PC2", series);
    }

    // Repeated materials share one generative distribution; report how they split.
    std::map<std::string, std::vector<int>> groups;
    for (std::size_t m = 0; m < nm; ++m) groups[cfg.materials[m]].push_back(static_cast<int>(m));
    std::size_t dup_groups = 0, in_group = 0, in_group_right = 0;
    for (const auto& [name, members] : groups) {
        if (members.size() < 2) continue;
        ++dup_groups;
        for (int t : members)
            for (int p : members) {
                in_group += cm.count(t, p);
                if (t == p) in_group_right += cm.count(t, p);
            }
    }

    result.metrics = {{"accuracy", cm.accuracy()},
                      {"train_samples", static_cast<double>(split.train.size())},
                      {"test_samples", static_cast<double>(split.test.size())},
                      {"pc1_ratio", pca.explained_variance_ratio.empty() ? 0.0 : pca.explained_variance_ratio[0]},
                      {"pc2_ratio", pca.explained_variance_ratio.size() > 1 ? pca.explained_variance_ratio[1] : 0.0},
                      {"duplicate_groups", static_cast<double>(dup_groups)}};
    if (dup_groups)
        result.metrics.emplace_back("duplicate_within_group_accuracy",
                                    in_group ? static_cast<double>(in_group_right) / static_cast<double>(in_group) : 0.0);
    for (std::size_t m = 0; m < nm; ++m) result.metrics.emplace_back("recall_" + labels[m], cm.class_recall(static_cast<int>(m)));
    write_metrics(cfg, "material_summary.csv", result);
    return result;
}

// ---------------------------------------------------------------------------------------
// Dual-modal

ExperimentResult run_dualmodal(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto mlabels = unique_labels(cfg.materials);
    std::vector<ml::Pattern> patterns;
    for (const auto& p : cfg.patterns) patterns.push_back(ml::parse_pattern(p));
    const auto plabels = unique_labels(cfg.patterns);
    const std::size_t nm = mlabels.size(), np = patterns.size(), ns = static_cast<std::size_t>(cfg.samples_per_class);

    struct Sample {
        std::vector<double> echo;
        std::vector<double> texture;
    };
    std::vector<Sample> samples(nm * np * ns);
    ml::RenderJitter jitter;
    jitter.noise_std = cfg.texture_noise;
    parallel_for(samples.size(), thread_count(cfg), [&](std::size_t slot) {
        const std::size_t m = slot / (np * ns), p = (slot / ns) % np, i = slot % ns;
        const auto scene = slab_scene(cfg, cfg.materials[m], derive_seed(cfg.seed, {4, m, p, i}));
        samples[slot].echo = fusion::material_sample(scene, cfg.noise_std, cfg.frames_per_sample, cfg.registry).to_vector();
        const auto img = ml::render_augmented(patterns[p], jitter, derive_seed(cfg.seed, {5, m, p, i}), cfg.image_size);
        samples[slot].texture = ml::texture_features(img).values;
    });

    // Split on the joint label; the row index rides along as the only feature.
    ml::Dataset index;
    index.split_seed = derive_seed(cfg.seed, {3});
    for (std::size_t m = 0; m < nm; ++m)
        for (std::size_t p = 0; p < np; ++p) index.label_names.push_back(mlabels[m] + "/" + plabels[p]);
    for (std::size_t s = 0; s < samples.size(); ++s) index.add({static_cast<double>(s)}, static_cast<int>(s / ns));
    const auto split = ml::stratified_split(index, cfg.train_fraction);

    ml::Dataset echo_train, tex_train;
    echo_train.label_names = mlabels;
    tex_train.label_names = plabels;
    for (const auto& row : split.train.features) {
        const auto s = static_cast<std::size_t>(row[0]);
        const auto joint = s / ns;
        echo_train.add(samples[s].echo, static_cast<int>(joint / np));
        tex_train.add(samples[s].texture, static_cast<int>(joint % np));
    }
    const auto echo_model = ml::train_gbdt(echo_train, cfg.hyper);
    const auto tex_model = ml::train_gbdt(tex_train, cfg.hyper);

    ml::ConfusionMatrix cm(index.label_names);
    std::size_t mat_ok = 0, tex_ok = 0, within = 0, cross = 0;
    for (const auto& row : split.test.features) {
        const auto s = static_cast<std::size_t>(row[0]);
        const auto joint = static_cast<int>(s / ns);
        const int pm = echo_model.predict(samples[s].echo).label;
        const int pp = tex_model.predict(samples[s].texture).label;
        const int tm = joint / static_cast<int>(np), tp = joint % static_cast<int>(np);
        cm.add(joint, pm * static_cast<int>(np) + pp);
        mat_ok += pm == tm;
        tex_ok += pp == tp;
        if (pm == tm && pp != tp) ++within;
        if (pm != tm) ++cross;
    }
    const double n = static_cast<double>(split.test.size());

    ExperimentResult result;
    write_confusion(cfg, "dualmodal_confusion", "Joint material and pattern confusion", cm, result);
    result.metrics = {{"accuracy", cm.accuracy()},
                      {"material_accuracy", static_cast<double>(mat_ok) / n},
                      {"texture_accuracy", static_cast<double>(tex_ok) / n},
                      {"within_material_errors", static_cast<double>(within)},
                      {"cross_material_errors", static_cast<double>(cross)},
                      {"test_samples", n}};
    write_metrics(cfg, "dualmodal_summary.csv", result);
    return result;
}

// ---------------------------------------------------------------------------------------
// Inspection

ExperimentResult run_inspection(const ExperimentConfig& cfg) {
    cfg.validate();
    fusion::FusionTraining training;
    training.contents = cfg.contents;
    training.patterns.clear();
    for (const auto& p : cfg.patterns) training.patterns.push_back(ml::parse_pattern(p));
    training.samples_per_class = cfg.training_per_class;
    training.echo_noise = cfg.noise_std;
    training.camera_noise = cfg.camera_noise;
    training.seed = derive_seed(cfg.seed, {6});
    training.hyper = cfg.hyper;

    struct Container {
        std::string name;
        fusion::Scenario scenario;
        std::optional<std::string> content;
        std::optional<ml::Pattern> pattern;
    };
    std::vector<Container> containers;
    if (cfg.scenario_file) {
        auto sc = fusion::load_scenario(cfg.scenario_file->string());
        training.echo_noise = sc.echo_noise;
        training.camera_noise = sc.camera_noise;
        training.wall_material = sc.wall_material;
        training.wall_thickness = sc.wall_thickness;
        training.content_depth = sc.content_depth;
        const auto& last = sc.rows.back();
        containers.push_back({"scenario", sc, last.content, last.pattern});
    } else {
        for (std::size_t c = 0; c < cfg.contents.size(); ++c)
            for (std::size_t p = 0; p < training.patterns.size(); ++p) {
                const auto seed = derive_seed(cfg.seed, {7, name_key(cfg.contents[c]), name_key(ml::to_string(training.patterns[p]))});
                auto sc = fusion::inspection_scenario(cfg.contents[c], training.patterns[p], seed);
                sc.echo_noise = cfg.noise_std;
                sc.camera_noise = cfg.camera_noise;
                containers.push_back({std::to_string(containers.size() + 1), sc, cfg.contents[c], training.patterns[p]});
            }
    }
    for (const auto& c : containers)
        if (!cfg.registry.contains(c.scenario.wall_material) || (c.content && !cfg.registry.contains(*c.content)))
            throw ConfigError("scenario references an unknown material");

    const auto models = fusion::train_fusion_models(training);
    std::vector<fusion::TimelineResult> runs(containers.size());
    parallel_for(containers.size(), thread_count(cfg),
                 [&](std::size_t i) { runs[i] = fusion::run_timeline(containers[i].scenario, models, cfg.registry); });

    ExperimentResult result;
    std::ofstream verdicts;
    result.files.push_back(open_out(cfg, "inspection_verdicts.csv", verdicts));
    verdicts << "container,true_pattern,true_content,predicted_pattern,predicted_content,status,correct,transitions\n";
    std::size_t correct = 0, incomplete = 0;
    for (std::size_t i = 0; i < containers.size(); ++i) {
        const auto& c = containers[i];
        const auto& r = runs[i];
        const bool ok = r.verdict && c.pattern && c.content && r.verdict->pattern == *c.pattern &&
                        r.verdict->content == *c.content;
        correct += ok;
        incomplete += !r.verdict;
        verdicts << c.name << ',' << (c.pattern ? std::string(ml::to_string(*c.pattern)) : "") << ','
                 << c.content.value_or("") << ',' << (r.verdict ? std::string(ml::to_string(r.verdict->pattern)) : "")
                 << ',' << (r.verdict ? r.verdict->content : "") << ',' << (r.verdict ? "complete" : "incomplete") << ','
                 << (ok ? 1 : 0) << ',' << r.transitions.size() << '\n';
        std::ofstream log;
        std::string stem = "inspection_timeline_" + c.name;
        if (c.content && c.pattern && !cfg.scenario_file) stem += "_" + *c.content + "_" + std::string(ml::to_string(*c.pattern));
        result.files.push_back(open_out(cfg, stem + ".csv", log));
        fusion::write_event_log_csv(log, r.events);
    }
    result.metrics = {{"containers", static_cast<double>(containers.size())},
                      {"correct", static_cast<double>(correct)},
                      {"incomplete", static_cast<double>(incomplete)},
                      {"joint_accuracy", static_cast<double>(correct) / static_cast<double>(containers.size())}};
    write_metrics(cfg, "inspection_summary.csv", result);
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case Experiment::Proximity: return run_proximity(cfg);
        case Experiment::Material: return run_material(cfg);
        case Experiment::DualModal: return run_dualmodal(cfg);
        case Experiment::Inspection: return run_inspection(cfg);
    }
    throw ConfigError("unhandled experiment");
}

}  // namespace ultratac::experiments
