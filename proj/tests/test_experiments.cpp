#include "generators.hpp"
#include "ultratac/config.hpp"
#include "ultratac/experiments.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace ultratac;
using namespace ultratac::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ultratac_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

ExperimentConfig configured(Experiment e, const std::string& text) {
    return ExperimentConfig::from_config(KeyValueConfig::parse(text), e);
}

// Every CSV in `files` byte-compared between two runs.
void check_same_csvs(const ExperimentResult& a, const ExperimentResult& b) {
    REQUIRE(a.files.size() == b.files.size());
    for (std::size_t i = 0; i < a.files.size(); ++i) {
        CHECK(a.files[i].filename() == b.files[i].filename());
        if (a.files[i].extension() == ".csv") {
            INFO(a.files[i].filename());
            CHECK(slurp(a.files[i]) == slurp(b.files[i]));
        }
    }
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ULTRATAC_SIM_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("experiment names") {
    for (auto e : {Experiment::Proximity, Experiment::Material, Experiment::DualModal, Experiment::Inspection})
        CHECK(parse_experiment(to_string(e)) == e);
    CHECK_THROWS_AS(parse_experiment("telepathy"), ConfigError);
}

TEST_CASE("defaults") {
    const auto p = ExperimentConfig::defaults(Experiment::Proximity);
    CHECK(p.materials == std::vector<std::string>{"Acrylic", "Iron", "Nylon", "Resin", "Wood"});
    REQUIRE(p.distances.size() == 11);
    CHECK(p.distances.front() == doctest::Approx(0.03));
    CHECK(p.distances.back() == doctest::Approx(0.08));
    CHECK(p.trials == 10);
    CHECK_NOTHROW(p.validate());
    const auto m = ExperimentConfig::defaults(Experiment::Material);
    CHECK(m.samples_per_class == 200);
    CHECK(m.train_fraction == 0.8);
    CHECK(ExperimentConfig::defaults(Experiment::DualModal).patterns.size() == 5);
    CHECK(ExperimentConfig::defaults(Experiment::Inspection).contents.size() == 3);
    // "Resin" resolves through the registry to the acrylic entry.
    CHECK(p.registry.lookup("Resin").impedance == p.registry.lookup("Acrylic").impedance);
}

TEST_CASE("config keys") {
    auto c = configured(Experiment::Proximity,
                        "seed = 9\ntrials = 3\nnoise_std = 0.05\nmaterials = Iron, Wood\ndistances_cm = 3, 4.5\n");
    CHECK(c.seed == 9);
    CHECK(c.trials == 3);
    CHECK(c.noise_std == 0.05);
    CHECK(c.materials == std::vector<std::string>{"Iron", "Wood"});
    REQUIRE(c.distances.size() == 2);
    CHECK(c.distances[1] == doctest::Approx(0.045));

    c = configured(Experiment::Proximity, "distance_min_cm = 4\ndistance_max_cm = 6\ndistance_step_cm = 1\n");
    REQUIRE(c.distances.size() == 3);
    CHECK(c.distances[2] == doctest::Approx(0.06));

    c = configured(Experiment::Material, "materials = Iron, Glass\n[Glass]\nimpedance_mrayl = 13\nsound_speed_mps = 5600\n");
    CHECK(c.registry.lookup("Glass").impedance == 13.0);

    c = configured(Experiment::DualModal, "n_rounds = 7\nmax_depth = 2\ntexture_noise = 0.1\npatterns = circle, stripe\n");
    CHECK(c.hyper.n_rounds == 7);
    CHECK(c.hyper.max_depth == 2);
    CHECK(c.texture_noise == 0.1);
    CHECK(c.patterns.size() == 2);
}

TEST_CASE("config errors are reported before any run") {
    const std::map<Experiment, std::vector<std::string>> bad{
        {Experiment::Proximity,
         {"distances_cm = 2, 5\n", "distances_cm = 5, 9\n", "materials = Iron\n", "materials = Iron, Mithril\n",
          "trials = 0\n", "seed = -1\n", "noise_std = -0.1\n", "distance_step_cm = 0\n", "experiment = material\n",
          "trials = many\n"}},
        {Experiment::Material, {"samples_per_class = 10\n", "train_fraction = 1\n", "materials = Iron\n", "max_depth = 0\n"}},
        {Experiment::DualModal, {"patterns = circle, star\n", "patterns = circle\n"}},
        {Experiment::Inspection, {"contents = Water\n", "contents = Water, Lava\n"}},
    };
    for (const auto& [e, texts] : bad)
        for (const auto& t : texts) {
            INFO(to_string(e) << ": " << t);
            CHECK_THROWS_AS(configured(e, t), ConfigError);
        }
}

TEST_CASE("least-squares line") {
    const auto exact = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(exact.slope == doctest::Approx(2.0));
    CHECK(exact.intercept == doctest::Approx(1.0));
    CHECK(exact.r2 == doctest::Approx(1.0));

    // Against the closed form from the normal equations, solved here by Cramer's rule.
    gen::for_all(50, 80, [](gen::Gen& g, int) {
        const int n = g.integer(3, 40);
        std::vector<double> x, y;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < n; ++i) {
            x.push_back(g.uniform(-5, 5));
            y.push_back(g.uniform(-1, 1) * x.back() + g.normal());
            sx += x.back(), sy += y.back(), sxx += x.back() * x.back(), sxy += x.back() * y.back();
        }
        const double det = n * sxx - sx * sx;
        const auto f = fit_line(x, y);
        CHECK(f.slope == doctest::Approx((n * sxy - sx * sy) / det).epsilon(1e-9));
        CHECK(f.intercept == doctest::Approx((sxx * sy - sx * sxy) / det).epsilon(1e-9).scale(1.0));
        CHECK(f.r2 >= 0.0);
        CHECK(f.r2 <= 1.0 + 1e-12);
    });
    CHECK_THROWS_AS(fit_line({1, 1}, {2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(fit_line({1}, {2}), std::invalid_argument);
}

TEST_CASE("duplicate labels are numbered") {
    CHECK(unique_labels({"Iron", "Wood", "Iron", "Iron"}) == std::vector<std::string>{"Iron", "Wood", "Iron#2", "Iron#3"});
}

TEST_CASE("parallel_for visits every index once") {
    for (unsigned threads : {0u, 1u, 3u, 16u})
        for (std::size_t n : {0, 1, 7, 1000}) {
            std::vector<std::atomic<int>> hits(n);
            parallel_for(n, threads, [&](std::size_t i) { ++hits[i]; });
            for (auto& h : hits) CHECK(h.load() == 1);
        }
    CHECK_THROWS_AS(parallel_for(10, 4, [](std::size_t i) {
                        if (i == 5) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
}

TEST_CASE("thread count honours the environment") {
    const char* old = std::getenv("ULTRATAC_SIM_THREADS");
    const std::string saved = old ? old : "";
    setenv("ULTRATAC_SIM_THREADS", "3", 1);
    CHECK(default_thread_count() == 3);
    setenv("ULTRATAC_SIM_THREADS", "zero", 1);
    CHECK(default_thread_count() >= 1);
    if (old) setenv("ULTRATAC_SIM_THREADS", saved.c_str(), 1);
    else unsetenv("ULTRATAC_SIM_THREADS");
}

TEST_CASE("noiseless proximity run is exact and reproducible") {
    auto cfg = configured(Experiment::Proximity, "materials = Iron, Wood\ndistances_cm = 3, 5.5, 8\ntrials = 2\n");
    cfg.noise_std = 0.0;
    cfg.output_dir = scratch_dir("prox_a");
    cfg.threads = 1;
    const auto a = run_proximity(cfg);
    CHECK(*a.metric("r2") == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(*a.metric("max_abs_error_cm") <= 343.0 / (2.0 * 2.4e6) * 100.0);
    CHECK(*a.metric("invalid_estimates") == 0.0);
    CHECK(*a.metric("estimates") == 12.0);
    CHECK(first_line(cfg.output_dir / "proximity_trials.csv") == "material,distance_cm,trial,estimate_cm,valid,error_cm");
    CHECK(first_line(cfg.output_dir / "proximity_points.csv") ==
          "material,distance_cm,n_valid,mean_cm,std_cm,min_cm,max_cm,mean_abs_error_cm");
    CHECK(slurp(cfg.output_dir / "proximity.svg").rfind("<svg", 0) == 0);

    auto again = cfg;
    again.output_dir = scratch_dir("prox_b");
    again.threads = 4;
    again.noise_std = 0.0;
    check_same_csvs(a, run_proximity(again));
}

TEST_CASE("material run is reproducible and flags duplicates") {
    auto cfg = configured(Experiment::Material, "materials = Iron, Iron, Rubber\nsamples_per_class = 100\n");
    cfg.output_dir = scratch_dir("mat_a");
    const auto a = run_material(cfg);
    CHECK(*a.metric("duplicate_groups") == 1.0);
    // Iron vs Iron#2 come from one distribution, so the model can only guess between them.
    CHECK(std::abs(*a.metric("duplicate_within_group_accuracy") - 0.5) <= 0.25);
    CHECK(*a.metric("recall_Rubber") >= 0.9);
    CHECK(*a.metric("pc1_ratio") >= *a.metric("pc2_ratio"));
    CHECK(*a.metric("pc1_ratio") + *a.metric("pc2_ratio") <= 1.0 + 1e-9);
    CHECK(first_line(cfg.output_dir / "material_confusion.csv") == "truth\\predicted,Iron,Iron#2,Rubber");
    CHECK(first_line(cfg.output_dir / "material_pca.csv") == "label,pc1,pc2");

    auto again = cfg;
    again.output_dir = scratch_dir("mat_b");
    check_same_csvs(a, run_material(again));
}

TEST_CASE("dual-modal errors stay within a material when texture noise dominates") {
    auto cfg = configured(Experiment::DualModal, "samples_per_class = 50\ntexture_noise = 0.3\n");
    cfg.noise_std = 0.005;
    cfg.output_dir = scratch_dir("dual");
    const auto r = run_dualmodal(cfg);
    CHECK(*r.metric("within_material_errors") > 0.0);
    CHECK(*r.metric("cross_material_errors") <= 0.1 * *r.metric("within_material_errors"));
    CHECK(*r.metric("material_accuracy") >= 0.98);
}

TEST_CASE("inspection without contact is incomplete") {
    const auto dir = scratch_dir("insp_nc");
    {
        std::ofstream sc(dir / "approach.txt");
        sc << "duration_ms = 1000\n0 0.07 Water circle\n900 0.04 Water circle\n";
    }
    auto cfg = configured(Experiment::Inspection, "training_per_class = 20\n");
    cfg.scenario_file = dir / "approach.txt";
    cfg.output_dir = dir / "out";
    const auto r = run_inspection(cfg);
    CHECK(*r.metric("containers") == 1.0);
    CHECK(*r.metric("incomplete") == 1.0);
    CHECK(*r.metric("correct") == 0.0);
    const auto verdicts = slurp(cfg.output_dir / "inspection_verdicts.csv");
    CHECK(verdicts.find(",incomplete,") != std::string::npos);
}

TEST_CASE("reordering pattern labels permutes nothing but the labels") {
    auto a = configured(Experiment::Inspection, "training_per_class = 30\ncamera_noise = 0.05\n");
    a.output_dir = scratch_dir("insp_a");
    auto b = configured(Experiment::Inspection, "training_per_class = 30\ncamera_noise = 0.05\npatterns = hexagon, circle, rectangle\n");
    b.output_dir = scratch_dir("insp_b");
    const auto ra = run_inspection(a), rb = run_inspection(b);
    // Timelines are named <index>_<content>_<pattern>; match them up by content and pattern.
    auto by_case = [](const ExperimentResult& r) {
        std::map<std::string, std::string> out;
        for (const auto& f : r.files) {
            const auto name = f.stem().string();
            if (name.rfind("inspection_timeline_", 0) != 0) continue;
            out[name.substr(name.find('_', std::string("inspection_timeline_").size()) + 1)] = slurp(f);
        }
        return out;
    };
    const auto ta = by_case(ra), tb = by_case(rb);
    CHECK(ta.size() == 9);
    CHECK(ta == tb);
    CHECK(*ra.metric("correct") == *rb.metric("correct"));
}

TEST_CASE("command-line exit codes") {
    const auto dir = scratch_dir("cli");
    {
        std::ofstream(dir / "ok.ini") << "materials = Iron, Wood\ndistances_cm = 4\ntrials = 1\n";
        std::ofstream(dir / "bad.ini") << "distances_cm = 12\n";
    }
    const auto out = (dir / "out").string();
    CHECK(run_cli("proximity --config " + (dir / "ok.ini").string() + " --seed 1 --out " + out) == 0);
    CHECK(fs::exists(dir / "out" / "proximity_summary.csv"));
    CHECK(run_cli("proximity --config " + (dir / "ok.ini").string() + " --seed 1 --out " + out + " --noise 0 --trials 2") == 0);
    CHECK(run_cli("proximity --config " + (dir / "bad.ini").string() + " --seed 1 --out " + out) == 2);
    CHECK(run_cli("proximity --config " + (dir / "missing.ini").string() + " --seed 1 --out " + out) == 2);
    CHECK(run_cli("astrology --config " + (dir / "ok.ini").string() + " --seed 1 --out " + out) == 2);
    CHECK(run_cli("proximity --config " + (dir / "ok.ini").string() + " --out " + out) == 2);
    CHECK(run_cli("proximity --config " + (dir / "ok.ini").string() + " --seed 1 --out " + out + " --noise -1") == 2);
    CHECK(run_cli("--help") == 0);
}
