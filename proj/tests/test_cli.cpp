#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ibnc/io.hpp"
#include "ibnc/repr.hpp"
#include "ibnc/rng.hpp"
#include "ibnc/synth.hpp"

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        std::ostringstream name;
        name << "ibnc_cli_test_" << Catch::rngSeed() << "_" << static_cast<const void*>(this);
        path = fs::temp_directory_path() / name.str();
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
    int exit_code = -1;
    std::string out;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

/** Run the tool through the shell, capturing exit code and stdout. */
RunResult run(const TempDir& dir, const std::string& args) {
    static int counter = 0;
    const std::string capture = dir.file("stdout_" + std::to_string(counter++) + ".txt");
    const std::string cmd =
        std::string(IBNC_CLI_PATH) + " " + args + " > '" + capture + "' 2> /dev/null";
    const int status = std::system(cmd.c_str());
    RunResult result;
    REQUIRE(WIFEXITED(status));
    result.exit_code = WEXITSTATUS(status);
    result.out = slurp(capture);
    return result;
}

nlohmann::json parse_report(const std::string& text) {
    return nlohmann::json::parse(text);
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

/** A 200x3 source whose first two columns carry a 2-D relevance signal. */
void write_mgib_pair(const TempDir& dir, const std::string& src, const std::string& rel) {
    ibnc::rng gen(301);
    const Eigen::MatrixXd r = gen.gaussian(200, 2);
    Eigen::MatrixXd s(200, 3);
    s.leftCols(2) = r + 0.5 * gen.gaussian(200, 2);
    s.col(2) = gen.gaussian(200, 1);
    std::vector<std::int64_t> labels(200);
    for (int i = 0; i < 200; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
    ibnc::save_representation(ibnc::make_representation(s, labels, "src"), dir.file(src),
                              ibnc::file_format::csv);
    ibnc::save_representation(ibnc::make_representation(r, labels, "rel"), dir.file(rel),
                              ibnc::file_format::csv);
}

}  // namespace

TEST_CASE("version and usage errors") {
    TempDir dir;
    REQUIRE(run(dir, "--version").exit_code == 0);
    REQUIRE_FALSE(run(dir, "--version").out.empty());
    REQUIRE(run(dir, "").exit_code == 2);           // a subcommand is required
    REQUIRE(run(dir, "frobnicate").exit_code == 2);  // unknown subcommand
    REQUIRE(run(dir, "synth --classes 3").exit_code == 2);  // missing required options
}

TEST_CASE("sampling writes a representation and echoes the resolved config") {
    TempDir dir;
    const std::string out = dir.file("z.ibnc");
    const std::string cmd =
        "synth --classes 4 --dim 6 --per-class 50 --sigma 0.1 --seed 3 -o '" + out + "'";

    const auto first = run(dir, cmd);
    REQUIRE(first.exit_code == 0);
    const auto report = parse_report(first.out);
    REQUIRE(report["config"]["classes"] == 4);
    REQUIRE(report["config"]["format"] == "ibnc-bin");
    REQUIRE(report["config"]["seed"] == 3);
    REQUIRE(report["name"] == "mixture-k4-d6-n50-seed3");
    REQUIRE(report["rows"] == 200);
    REQUIRE(report["cols"] == 6);
    REQUIRE(report["version"].is_string());

    const auto set = ibnc::load_representation(out, ibnc::file_format::ibnc_bin);
    REQUIRE(set.n() == 200);
    REQUIRE(set.class_count == 4);

    SECTION("existing outputs are protected, --force overwrites reproducibly") {
        const std::string bytes = slurp(out);
        REQUIRE(run(dir, cmd).exit_code == 2);
        const auto forced = run(dir, cmd + " --force");
        REQUIRE(forced.exit_code == 0);
        REQUIRE(slurp(out) == bytes);
        REQUIRE(forced.out == first.out);
    }

    SECTION("an ambient dimension below K-1 is a usage error") {
        REQUIRE(run(dir, "synth --classes 10 --dim 8 --per-class 5 --sigma 0.1 --seed 1 -o '" +
                             dir.file("bad.ibnc") + "'")
                    .exit_code == 2);
    }
}

TEST_CASE("collapse metrics of a collapsed sample") {
    TempDir dir;
    const std::string data = dir.file("collapsed.csv");
    REQUIRE(run(dir, "synth --classes 5 --dim 8 --per-class 3 --sigma 0 --seed 9 -o '" + data +
                         "'")
                .exit_code == 0);

    const std::string angles = dir.file("angles.csv");
    const auto result = run(dir, "nc '" + data + "' --angles-csv '" + angles + "'");
    REQUIRE(result.exit_code == 0);
    const auto report = parse_report(result.out);
    const double target = report["target_cos"].get<double>();
    REQUIRE(target == -0.25);
    REQUIRE(report["mean_cos"].get<double>() == Catch::Approx(target).margin(1e-9));
    REQUIRE(report["nc1"].get<double>() == 0.0);
    REQUIRE(report["ncm_accuracy"].get<double>() == 1.0);
    REQUIRE(report["nc4_agreement"].is_null());
    REQUIRE(report["config"]["papyan_nc1"] == false);

    const std::string csv = slurp(angles);
    REQUIRE(csv.rfind("class_i,class_j,cosine,angle_deg\n", 0) == 0);
    REQUIRE(count_lines(csv) == 1 + 10);  // header + C(5,2) pairs

    SECTION("reports can go to a file, which is also overwrite-protected") {
        const std::string report_path = dir.file("nc.json");
        const auto filed =
            run(dir, "nc '" + data + "' --report '" + report_path + "'");
        REQUIRE(filed.exit_code == 0);
        REQUIRE(filed.out.empty());
        REQUIRE(parse_report(slurp(report_path))["nc1"].get<double>() == 0.0);
        REQUIRE(run(dir, "nc '" + data + "' --report '" + report_path + "'").exit_code == 2);
    }

    SECTION("malformed and missing inputs are usage errors") {
        const std::string broken = dir.file("broken.csv");
        spit(broken, "f0,f1,label\n1.0,oops,0\n2.0,3.0,1\n");
        REQUIRE(run(dir, "nc '" + broken + "'").exit_code == 2);
        REQUIRE(run(dir, "nc '" + dir.file("absent.csv") + "'").exit_code == 2);
    }
}

TEST_CASE("canonical correlations through the pipeline") {
    TempDir dir;
    ibnc::rng gen(211);
    const Eigen::MatrixXd z = gen.gaussian(200, 4);
    const Eigen::MatrixXd t = gen.haar_orthogonal(4);
    std::vector<std::int64_t> labels(200);
    for (int i = 0; i < 200; ++i) labels[static_cast<std::size_t>(i)] = i % 2;

    const auto a = ibnc::make_representation(z, labels, "a");
    const auto b = ibnc::make_representation(
        ((z * t.transpose()).rowwise() + Eigen::RowVectorXd::Constant(4, 0.7)).eval(), labels,
        "b");
    ibnc::save_representation(a, dir.file("a.csv"), ibnc::file_format::csv);
    ibnc::save_representation(b, dir.file("b.csv"), ibnc::file_format::csv);

    const auto result = run(dir, "cca '" + dir.file("a.csv") + "' '" + dir.file("b.csv") + "'");
    REQUIRE(result.exit_code == 0);
    const auto report = parse_report(result.out);
    REQUIRE(report["mean_top_k"].get<double>() >= 0.999);
    REQUIRE(report["correlations"].size() == 4);
    REQUIRE(report["config"]["ranked"] == false);

    SECTION("rank preprocessing makes warped inputs indistinguishable") {
        const auto warped = ibnc::monotone_warp(b, ibnc::warp_kind::exp);
        ibnc::save_representation(warped, dir.file("bw.csv"), ibnc::file_format::csv);
        const auto plain =
            run(dir, "cca --ranked '" + dir.file("a.csv") + "' '" + dir.file("b.csv") + "'");
        const auto warped_run =
            run(dir, "cca --ranked '" + dir.file("a.csv") + "' '" + dir.file("bw.csv") + "'");
        REQUIRE(plain.exit_code == 0);
        REQUIRE(warped_run.exit_code == 0);
        const auto pj = parse_report(plain.out);
        const auto wj = parse_report(warped_run.out);
        REQUIRE(pj["correlations"] == wj["correlations"]);
        REQUIRE(pj["mean_top_k"] == wj["mean_top_k"]);
    }

    SECTION("row mismatch is a usage error") {
        ibnc::save_representation(
            ibnc::make_representation(z.topRows(100),
                                      std::vector<std::int64_t>(labels.begin(),
                                                                labels.begin() + 100),
                                      "short"),
            dir.file("short.csv"), ibnc::file_format::csv);
        REQUIRE(run(dir, "cca '" + dir.file("a.csv") + "' '" + dir.file("short.csv") + "'")
                    .exit_code == 2);
    }
}

TEST_CASE("bottleneck solves produce reports, compressed sets, and curves") {
    TempDir dir;
    write_mgib_pair(dir, "src.csv", "rel.csv");
    const std::string base = "mgib --source '" + dir.file("src.csv") + "' --relevance '" +
                             dir.file("rel.csv") + "'";

    const std::string comp = dir.file("comp.ibnc");
    const std::string curve = dir.file("curve.csv");
    const auto result = run(dir, base + " --rank 2 --compressed-out '" + comp +
                                     "' --curve-csv '" + curve + "' --curve-points 40");
    REQUIRE(result.exit_code == 0);
    const auto report = parse_report(result.out);
    REQUIRE(report["target"]["kind"] == "rank");
    REQUIRE(report["target"]["value"] == 2);
    REQUIRE(report["active_rank"] == 2);
    REQUIRE(report["beta_used"].get<double>() > 1.0);
    REQUIRE(report["lambdas"].size() == 3);
    REQUIRE(report["alphas"].size() == 2);
    REQUIRE(report["alphas_normalized"].size() == 2);
    for (const auto& a : report["alphas_normalized"]) REQUIRE(a.get<double>() > 0.0);
    REQUIRE(report["alpha_capped"] == false);
    REQUIRE(report["i_ty_nats"].get<double>() <= report["i_tx_nats"].get<double>());
    // CSV inputs carry no embedded name, so the loader names sets by path.
    REQUIRE(report["source"] == dir.file("src.csv"));
    REQUIRE(report["relevance"] == dir.file("rel.csv"));

    const auto compressed = ibnc::load_representation(comp, ibnc::file_format::ibnc_bin);
    REQUIRE(compressed.n() == 200);
    REQUIRE(compressed.dim() == 2);
    REQUIRE(compressed.name == comp);  // loaded sets are named by their path
    REQUIRE(compressed.labels == ibnc::load_representation(dir.file("src.csv"),
                                                           ibnc::file_format::csv)
                                     .labels);

    const std::string curve_text = slurp(curve);
    REQUIRE(curve_text.rfind("beta,i_tx_nats,i_ty_nats,active_rank\n", 0) == 0);
    REQUIRE(count_lines(curve_text) == 1 + 40);

    SECTION("target validation") {
        REQUIRE(run(dir, base + " --rank 99").exit_code == 2);
        REQUIRE(run(dir, base + " --rank 2 --beta 3.0").exit_code == 2);
        REQUIRE(run(dir, base).exit_code == 2);
        REQUIRE(run(dir, base + " --fraction 1.5").exit_code == 2);
    }
}

TEST_CASE("probe compares representation variants side by side") {
    TempDir dir;
    const auto full = ibnc::sample_mixture([] {
        ibnc::MixtureSpec spec;
        spec.etf.class_count = 3;
        spec.etf.ambient_dim = 5;
        spec.within_std = 0.2;
        spec.samples_per_class = 60;
        spec.seed = 77;
        return spec;
    }());
    const auto split = ibnc::split_train_test(full, 0.75, 19);
    ibnc::save_representation(split.first, dir.file("train.csv"), ibnc::file_format::csv);
    ibnc::save_representation(split.second, dir.file("test.csv"), ibnc::file_format::csv);

    const std::string base =
        "probe --train '" + dir.file("train.csv") + "' --test '" + dir.file("test.csv") + "'";
    const auto plain = run(dir, base);
    REQUIRE(plain.exit_code == 0);
    const auto report = parse_report(plain.out);
    REQUIRE(report["variants"].size() == 2);
    REQUIRE(report["variants"][0]["name"] == "raw");
    REQUIRE(report["variants"][1]["name"] == "ranked");
    for (const auto& v : report["variants"]) {
        REQUIRE(v["probe_accuracy"].get<double>() >= 0.8);
        REQUIRE(v["ncm_accuracy"].get<double>() >= 0.8);
        REQUIRE(v["probe_iterations"].get<int>() >= 1);
    }

    SECTION("compressed variants come from their own files") {
        ibnc::save_representation(split.first, dir.file("ctrain.csv"),
                                  ibnc::file_format::csv);
        ibnc::save_representation(split.second, dir.file("ctest.csv"), ibnc::file_format::csv);
        const auto three = run(dir, base + " --compressed-train '" + dir.file("ctrain.csv") +
                                        "' --compressed-test '" + dir.file("ctest.csv") + "'");
        REQUIRE(three.exit_code == 0);
        const auto full_report = parse_report(three.out);
        REQUIRE(full_report["variants"].size() == 3);
        REQUIRE(full_report["variants"][2]["name"] == "compressed");
        REQUIRE(full_report["variants"][2]["probe_accuracy"] ==
                full_report["variants"][0]["probe_accuracy"]);
    }

    SECTION("argument validation") {
        REQUIRE(run(dir, base + " --compressed-train '" + dir.file("ctrain.csv") + "'")
                    .exit_code == 2);
        REQUIRE(run(dir, "probe --train '" + dir.file("train.csv") + "' --test '" +
                             dir.file("missing.csv") + "'")
                    .exit_code == 2);
    }
}

TEST_CASE("agreement summarizes two prediction files against the truth") {
    TempDir dir;
    spit(dir.file("truth.txt"), "0\n1\n2\n0\n");
    spit(dir.file("a.txt"), "0\n1\n0\n0\n");
    spit(dir.file("b.txt"), "0\n0\n1\n0\n");

    const auto result = run(dir, "agreement --pred-a '" + dir.file("a.txt") + "' --pred-b '" +
                                     dir.file("b.txt") + "' --truth '" + dir.file("truth.txt") +
                                     "'");
    REQUIRE(result.exit_code == 0);
    const auto report = parse_report(result.out);
    REQUIRE(report["n"] == 4);
    REQUIRE(report["accuracy_a"].get<double>() == 0.75);
    REQUIRE(report["accuracy_b"].get<double>() == 0.5);
    REQUIRE(report["joint_correct_fraction"].get<double>() == 0.5);
    REQUIRE(report["frechet_lower_bound"].get<double>() == 0.25);
    REQUIRE(report["min_individual"].get<double>() == 0.5);

    SECTION("length and format errors") {
        spit(dir.file("short.txt"), "0\n1\n");
        REQUIRE(run(dir, "agreement --pred-a '" + dir.file("short.txt") + "' --pred-b '" +
                             dir.file("b.txt") + "' --truth '" + dir.file("truth.txt") + "'")
                    .exit_code == 2);
        spit(dir.file("junk.txt"), "0\nx\n2\n0\n");
        REQUIRE(run(dir, "agreement --pred-a '" + dir.file("junk.txt") + "' --pred-b '" +
                             dir.file("b.txt") + "' --truth '" + dir.file("truth.txt") + "'")
                    .exit_code == 2);
    }
}

TEST_CASE("reports are byte-identical across reruns and thread counts") {
    TempDir dir;
    write_mgib_pair(dir, "src.csv", "rel.csv");
    spit(dir.file("t.txt"), "0\n1\n0\n1\n");
    spit(dir.file("p.txt"), "0\n1\n1\n1\n");

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"nc", "nc '" + dir.file("src.csv") + "'"},
        {"cca", "cca --ranked '" + dir.file("src.csv") + "' '" + dir.file("rel.csv") + "'"},
        {"mgib", "mgib --source '" + dir.file("src.csv") + "' --relevance '" +
                     dir.file("rel.csv") + "' --rank 1"},
        {"probe", "probe --train '" + dir.file("src.csv") + "' --test '" +
                      dir.file("src.csv") + "'"},
        {"agreement", "agreement --pred-a '" + dir.file("p.txt") + "' --pred-b '" +
                          dir.file("p.txt") + "' --truth '" + dir.file("t.txt") + "'"},
    };
    for (const auto& [name, cmd] : commands) {
        CAPTURE(name);
        const auto once = run(dir, cmd + " --threads 1");
        const auto twice = run(dir, cmd + " --threads 1");
        const auto wide = run(dir, cmd + " --threads 4");
        REQUIRE(once.exit_code == 0);
        REQUIRE(once.out == twice.out);
        REQUIRE(once.out == wide.out);
        REQUIRE_FALSE(once.out.empty());
    }

    SECTION("the threads environment variable is an accepted fallback") {
        const auto flagged = run(dir, "nc '" + dir.file("src.csv") + "' --threads 2");
        const std::string env_cmd = "IBNC_THREADS=2 " + std::string(IBNC_CLI_PATH) + " nc '" +
                                    dir.file("src.csv") + "'";
        const std::string capture = dir.file("env_stdout.txt");
        REQUIRE(std::system((env_cmd + " > '" + capture + "'").c_str()) == 0);
        REQUIRE(slurp(capture) == flagged.out);
    }

    SECTION("sampled files are byte-identical for the same seed") {
        const std::string cmd =
            "synth --classes 3 --dim 4 --per-class 10 --sigma 0.2 --seed 5 -o ";
        REQUIRE(run(dir, cmd + "'" + dir.file("s1.ibnc") + "'").exit_code == 0);
        REQUIRE(run(dir, cmd + "'" + dir.file("s2.ibnc") + "' --threads 4").exit_code == 0);
        REQUIRE(slurp(dir.file("s1.ibnc")) == slurp(dir.file("s2.ibnc")));
    }
}
