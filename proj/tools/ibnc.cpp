// ibnc — batch pipeline for representation-geometry and bottleneck analyses.
//
// Subcommands: synth, nc, cca, mgib, probe, agreement. Every run emits a JSON
// report (stdout by default) embedding the resolved configuration and the
// library version; plot data goes to tidy CSV. Exit codes: 0 success,
// 2 usage/validation, 3 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "ibnc/copula.hpp"
#include "ibnc/error.hpp"
#include "ibnc/gib.hpp"
#include "ibnc/identifiability.hpp"
#include "ibnc/io.hpp"
#include "ibnc/nc.hpp"
#include "ibnc/reports.hpp"
#include "ibnc/repr.hpp"
#include "ibnc/synth.hpp"
#include "ibnc/version.hpp"

namespace {

using json = ibnc::reports::json;

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void guard_overwrite(const std::string& path, bool force) {
    if (path.empty()) return;
    if (!force && std::filesystem::exists(path))
        throw ibnc::validation_error("output '" + path + "' already exists; pass --force to overwrite");
}

/** npy-pair writes two sibling files; guard whichever paths a save will touch. */
void guard_representation_output(const std::string& path, ibnc::file_format format, bool force) {
    if (format == ibnc::file_format::npy_pair) {
        const std::string base = ibnc::detail::npy_base(path);
        guard_overwrite(base + ".features.npy", force);
        guard_overwrite(base + ".labels.npy", force);
    } else {
        guard_overwrite(path, force);
    }
}

ibnc::file_format resolve_format(const std::string& flag, const std::string& path) {
    return flag.empty() ? ibnc::detect_format(path) : ibnc::parse_format(flag);
}

ibnc::RepresentationSet load_input(const std::string& path, const std::string& format_flag) {
    return ibnc::load_representation(path, resolve_format(format_flag, path));
}

void emit_report(const json& report, const std::string& report_path, bool force) {
    const std::string text = ibnc::reports::dump(report);
    if (report_path.empty()) {
        std::fwrite(text.data(), 1, text.size(), stdout);
    } else {
        guard_overwrite(report_path, force);
        ibnc::detail::write_file(report_path, text);
    }
}

json report_skeleton(json config) {
    json report;
    report["version"] = ibnc::version();
    report["config"] = std::move(config);
    return report;
}

/** Plain-text labels, one integer per line; blank lines ignored. */
std::vector<std::int64_t> read_label_file(const std::string& path) {
    const std::string text = ibnc::detail::read_file(path);
    std::vector<std::int64_t> labels;
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = nl == std::string::npos ? text.substr(pos)
                                                   : text.substr(pos, nl - pos);
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.erase(0, 1);
        if (!line.empty()) {
            const char* begin = line.c_str();
            char* end = nullptr;
            const long long v = std::strtoll(begin, &end, 10);
            if (end == begin || *end != '\0')
                throw ibnc::format_error("label file '" + path + "' line " +
                                         std::to_string(line_no) + ": '" + line +
                                         "' is not an integer");
            labels.push_back(v);
        }
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    if (labels.empty())
        throw ibnc::format_error("label file '" + path + "' contains no labels");
    return labels;
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
    int classes = 0;
    int dim = 0;
    int per_class = 0;
    double sigma = 0.0;
    double norm = 1.0;
    std::uint64_t seed = 0;
    std::string output;
    std::string format;
    bool force = false;
    int threads = 0;
};

void run_synth(const SynthOpts& o) {
    ibnc::MixtureSpec spec;
    spec.etf.class_count = o.classes;
    spec.etf.ambient_dim = o.dim;
    spec.etf.norm = o.norm;
    spec.within_std = o.sigma;
    spec.samples_per_class = o.per_class;
    spec.seed = o.seed;

    const ibnc::file_format fmt = resolve_format(o.format, o.output);
    guard_representation_output(o.output, fmt, o.force);
    const ibnc::RepresentationSet set = ibnc::sample_mixture(spec);
    ibnc::save_representation(set, o.output, fmt);

    json config;
    config["classes"] = o.classes;
    config["dim"] = o.dim;
    config["per_class"] = o.per_class;
    config["sigma"] = o.sigma;
    config["norm"] = o.norm;
    config["seed"] = o.seed;
    config["output"] = o.output;
    config["format"] = ibnc::format_name(fmt);
    json report = report_skeleton(std::move(config));
    report["name"] = set.name;
    report["rows"] = set.n();
    report["cols"] = set.dim();
    emit_report(report, "", false);
}

// ------------------------------------------------------------------- nc ----

struct NcOpts {
    std::string input;
    std::string format;
    std::string predictions;
    bool papyan = false;
    std::string report_path;
    std::string angles_csv;
    bool force = false;
    int threads = 0;
};

void run_nc(const NcOpts& o) {
    const auto set = load_input(o.input, o.format);
    std::vector<std::int64_t> preds;
    if (!o.predictions.empty()) {
        preds = read_label_file(o.predictions);
        if (preds.size() != set.labels.size())
            throw ibnc::validation_error("prediction count does not match input rows");
    }
    ibnc::NcOptions nc_options;
    nc_options.papyan_nc1 = o.papyan;
    const ibnc::NcReport nc =
        ibnc::nc_report(set, o.predictions.empty() ? nullptr : &preds, nc_options);

    json config;
    config["input"] = o.input;
    config["predictions"] = o.predictions.empty() ? json(nullptr) : json(o.predictions);
    config["papyan_nc1"] = o.papyan;
    json report = report_skeleton(std::move(config));
    report.update(ibnc::reports::nc_report_json(nc));

    if (!o.angles_csv.empty()) {
        guard_overwrite(o.angles_csv, o.force);
        const auto cs = ibnc::class_statistics(set);
        const Eigen::MatrixXd centered = cs.class_means.rowwise() - cs.global_mean;
        std::string csv = "class_i,class_j,cosine,angle_deg\n";
        for (int i = 0; i < set.class_count; ++i) {
            for (int j = i + 1; j < set.class_count; ++j) {
                const double denom = centered.row(i).norm() * centered.row(j).norm();
                const double c =
                    denom > 0.0 ? centered.row(i).dot(centered.row(j)) / denom : 0.0;
                const double clamped = std::min(1.0, std::max(-1.0, c));
                csv += std::to_string(i) + "," + std::to_string(j) + "," +
                       ibnc::reports::format_double(clamped) + "," +
                       ibnc::reports::format_double(std::acos(clamped) * 180.0 /
                                                    std::numbers::pi) +
                       "\n";
            }
        }
        ibnc::detail::write_file(o.angles_csv, csv);
    }
    emit_report(report, o.report_path, o.force);
}

// ------------------------------------------------------------------ cca ----

struct CcaOpts {
    std::string input_a;
    std::string input_b;
    std::string format;
    bool ranked = false;
    int top_k = 0;
    double epsilon = 1e-8;
    std::string report_path;
    bool force = false;
    int threads = 0;
};

void run_cca(const CcaOpts& o) {
    auto a = load_input(o.input_a, o.format);
    auto b = load_input(o.input_b, o.format);
    const int threads = resolve_threads(o.threads);
    if (o.ranked) {
        a.features = ibnc::rank_transform(a.features, threads);
        b.features = ibnc::rank_transform(b.features, threads);
    }
    const ibnc::CcaResult result = ibnc::cca(a, b, o.top_k, o.epsilon);

    json config;
    config["input_a"] = o.input_a;
    config["input_b"] = o.input_b;
    config["ranked"] = o.ranked;
    config["top_k"] = o.top_k;
    config["epsilon"] = o.epsilon;
    json report = report_skeleton(std::move(config));
    report.update(ibnc::reports::cca_report(result));
    emit_report(report, o.report_path, o.force);
}

// ----------------------------------------------------------------- mgib ----

struct MgibOpts {
    std::string source;
    std::string relevance;
    std::string format;
    double beta = 0.0;
    int rank = 0;
    double fraction = 0.0;
    bool beta_set = false, rank_set = false, fraction_set = false;
    double epsilon = 1e-6;
    std::string compressed_out;
    std::string curve_csv;
    int curve_points = 49;
    std::string report_path;
    bool force = false;
    int threads = 0;
};

void run_mgib(const MgibOpts& o) {
    const int chosen = (o.beta_set ? 1 : 0) + (o.rank_set ? 1 : 0) + (o.fraction_set ? 1 : 0);
    if (chosen != 1)
        throw ibnc::validation_error("exactly one of --beta, --rank, --fraction is required");
    ibnc::RankTarget target = o.beta_set       ? ibnc::RankTarget::explicit_beta(o.beta)
                              : o.rank_set     ? ibnc::RankTarget::for_rank(o.rank)
                                               : ibnc::RankTarget::relevance_fraction(o.fraction);

    const auto source = load_input(o.source, o.format);
    const auto relevance = load_input(o.relevance, o.format);
    ibnc::MgibOptions options;
    options.epsilon = o.epsilon;
    options.threads = resolve_threads(o.threads);
    const ibnc::MgibSolution solution = ibnc::mgib_solve(source, relevance, target, options);

    if (!o.compressed_out.empty()) {
        const ibnc::file_format fmt = resolve_format(o.format, o.compressed_out);
        guard_representation_output(o.compressed_out, fmt, o.force);
        ibnc::RepresentationSet compressed;
        compressed.features = solution.compressed;
        compressed.labels = source.labels;
        compressed.class_count = source.class_count;
        ibnc::save_representation(compressed, o.compressed_out, fmt);
    }

    if (!o.curve_csv.empty()) {
        guard_overwrite(o.curve_csv, o.force);
        if (o.curve_points < 2)
            throw ibnc::validation_error("--curve-points must be at least 2");
        const Eigen::VectorXd bc = ibnc::critical_betas(solution.spectrum);
        double first = 0.0, last = 0.0;
        for (Eigen::Index i = 0; i < bc.size(); ++i) {
            if (std::isfinite(bc(i))) {
                if (first == 0.0) first = bc(i);
                last = bc(i);
            }
        }
        const double lo = first > 0.0 ? 0.5 * first : 0.1;
        const double hi = last > 0.0 ? 4.0 * last : 1000.0;
        std::vector<double> grid(static_cast<std::size_t>(o.curve_points));
        const double step = (std::log(hi) - std::log(lo)) / (o.curve_points - 1);
        for (int i = 0; i < o.curve_points; ++i) grid[static_cast<std::size_t>(i)] =
            std::exp(std::log(lo) + step * i);

        std::vector<ibnc::InfoPoint> points(grid.size());
        std::vector<int> ranks(grid.size());
        ibnc::parallel_for(grid.size(), options.threads, [&](std::size_t i) {
            const auto proj = ibnc::projection_matrix(solution.spectrum, grid[i]);
            points[i] = ibnc::gaussian_info(proj, solution.joint);
            ranks[i] = proj.active_rank;
        });
        std::string csv = "beta,i_tx_nats,i_ty_nats,active_rank\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            csv += ibnc::reports::format_double(grid[i]) + "," +
                   ibnc::reports::format_double(points[i].i_tx) + "," +
                   ibnc::reports::format_double(points[i].i_ty) + "," +
                   std::to_string(ranks[i]) + "\n";
        }
        ibnc::detail::write_file(o.curve_csv, csv);
    }

    json config;
    config["source"] = o.source;
    config["relevance"] = o.relevance;
    config["epsilon"] = o.epsilon;
    config["compressed_out"] =
        o.compressed_out.empty() ? json(nullptr) : json(o.compressed_out);
    config["curve_csv"] = o.curve_csv.empty() ? json(nullptr) : json(o.curve_csv);
    config["curve_points"] = o.curve_points;
    json report = report_skeleton(std::move(config));
    report.update(ibnc::reports::mgib_report(solution, target));
    emit_report(report, o.report_path, o.force);
}

// ---------------------------------------------------------------- probe ----

struct ProbeOpts {
    std::string train;
    std::string test;
    std::string compressed_train;
    std::string compressed_test;
    std::string format;
    double l2 = 1e-3;
    std::string report_path;
    bool force = false;
    int threads = 0;
};

void run_probe(const ProbeOpts& o) {
    if (o.compressed_train.empty() != o.compressed_test.empty())
        throw ibnc::validation_error(
            "--compressed-train and --compressed-test must be given together");
    const auto train = load_input(o.train, o.format);
    const auto test = load_input(o.test, o.format);
    const int threads = resolve_threads(o.threads);

    json variants = json::array();
    auto evaluate = [&](const std::string& name, const ibnc::RepresentationSet& tr,
                        const ibnc::RepresentationSet& te) {
        const ibnc::ProbeResult probe = ibnc::linear_probe(tr, te, o.l2);
        const auto ncm = ibnc::ncm_classify(tr, te.features);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < ncm.size(); ++i)
            if (ncm[i] == te.labels[i]) ++correct;
        json v;
        v["name"] = name;
        v["probe_accuracy"] = probe.accuracy;
        v["ncm_accuracy"] = static_cast<double>(correct) / static_cast<double>(ncm.size());
        v["probe_iterations"] = probe.iterations;
        variants.push_back(std::move(v));
    };

    evaluate("raw", train, test);

    ibnc::RepresentationSet train_ranked = train;
    ibnc::RepresentationSet test_ranked = test;
    train_ranked.features =
        ibnc::normal_scores(ibnc::rank_transform(train.features, threads), threads);
    test_ranked.features = ibnc::reference_scores(test.features, train.features, threads);
    evaluate("ranked", train_ranked, test_ranked);

    if (!o.compressed_train.empty()) {
        const auto ctrain = load_input(o.compressed_train, o.format);
        const auto ctest = load_input(o.compressed_test, o.format);
        evaluate("compressed", ctrain, ctest);
    }

    json config;
    config["train"] = o.train;
    config["test"] = o.test;
    config["compressed_train"] =
        o.compressed_train.empty() ? json(nullptr) : json(o.compressed_train);
    config["compressed_test"] =
        o.compressed_test.empty() ? json(nullptr) : json(o.compressed_test);
    config["l2"] = o.l2;
    json report = report_skeleton(std::move(config));
    report["variants"] = std::move(variants);
    emit_report(report, o.report_path, o.force);
}

// ------------------------------------------------------------ agreement ----

struct AgreementOpts {
    std::string pred_a;
    std::string pred_b;
    std::string truth;
    std::string report_path;
    bool force = false;
    int threads = 0;  // accepted for uniformity; the computation is serial
};

void run_agreement(const AgreementOpts& o) {
    const auto a = read_label_file(o.pred_a);
    const auto b = read_label_file(o.pred_b);
    const auto truth = read_label_file(o.truth);
    const double joint = ibnc::joint_correct_fraction(a, b, truth);
    auto accuracy = [&](const std::vector<std::int64_t>& p) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < truth.size(); ++i)
            if (p[i] == truth[i]) ++correct;
        return static_cast<double>(correct) / static_cast<double>(truth.size());
    };
    const double acc_a = accuracy(a);
    const double acc_b = accuracy(b);

    json config;
    config["pred_a"] = o.pred_a;
    config["pred_b"] = o.pred_b;
    config["truth"] = o.truth;
    json report = report_skeleton(std::move(config));
    report["n"] = truth.size();
    report["accuracy_a"] = acc_a;
    report["accuracy_b"] = acc_b;
    report["joint_correct_fraction"] = joint;
    report["frechet_lower_bound"] = std::max(0.0, acc_a + acc_b - 1.0);
    report["min_individual"] = std::min(acc_a, acc_b);
    emit_report(report, o.report_path, o.force);
}

void add_common(CLI::App* cmd, std::string& report_path, bool& force, int* threads) {
    cmd->add_option("--report", report_path, "Write the JSON report here instead of stdout");
    cmd->add_flag("--force", force, "Allow overwriting existing output files");
    if (threads)
        cmd->add_option("--threads", *threads, "Worker threads (default: hardware concurrency)")
            ->envname("IBNC_THREADS");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Representation geometry and information-bottleneck toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ibnc::version());

    SynthOpts synth;
    auto* synth_cmd =
        app.add_subcommand("synth", "Sample a simplex-ETF Gaussian mixture and save it");
    synth_cmd->add_option("--classes", synth.classes, "Number of mixture components")->required();
    synth_cmd->add_option("--dim", synth.dim, "Ambient dimension (>= classes - 1)")->required();
    synth_cmd->add_option("--per-class", synth.per_class, "Samples per class")->required();
    synth_cmd->add_option("--sigma", synth.sigma, "Within-class standard deviation")->required();
    synth_cmd->add_option("--norm", synth.norm, "Vertex norm of the simplex")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "RNG seed")->required();
    synth_cmd->add_option("-o,--output", synth.output, "Output representation file")->required();
    synth_cmd->add_option("--format", synth.format,
                          "csv | ibnc-bin | npy-pair (default: by extension)");
    synth_cmd->add_flag("--force", synth.force, "Allow overwriting existing output files");
    synth_cmd->add_option("--threads", synth.threads, "Accepted for uniformity; sampling is serial")
        ->envname("IBNC_THREADS");
    synth_cmd->callback([&] { run_synth(synth); });

    NcOpts nc;
    auto* nc_cmd = app.add_subcommand("nc", "Neural-collapse metrics of a representation");
    nc_cmd->add_option("input", nc.input, "Representation file")->required();
    nc_cmd->add_option("--format", nc.format, "csv | ibnc-bin | npy-pair (default: by extension)");
    nc_cmd->add_option("--predictions", nc.predictions,
                       "Probe predictions (one label per line) for the NC4 agreement");
    nc_cmd->add_flag("--papyan", nc.papyan,
                     "NC1 as Tr(S_W pinv(S_B))/K instead of the trace ratio");
    nc_cmd->add_option("--angles-csv", nc.angles_csv, "Write per-pair angles CSV here");
    add_common(nc_cmd, nc.report_path, nc.force, &nc.threads);
    nc_cmd->callback([&] { run_nc(nc); });

    CcaOpts cca;
    auto* cca_cmd = app.add_subcommand("cca", "Canonical correlations between two representations");
    cca_cmd->add_option("input_a", cca.input_a, "First representation file")->required();
    cca_cmd->add_option("input_b", cca.input_b, "Second representation file")->required();
    cca_cmd->add_option("--format", cca.format,
                        "csv | ibnc-bin | npy-pair (default: by extension)");
    cca_cmd->add_flag("--ranked", cca.ranked, "Rank-transform both inputs first");
    cca_cmd->add_option("--top-k", cca.top_k, "Leading correlations to summarize (0 = all)")
        ->capture_default_str();
    cca_cmd->add_option("--epsilon", cca.epsilon, "Relative whitening ridge (0 = exact)")
        ->capture_default_str();
    add_common(cca_cmd, cca.report_path, cca.force, &cca.threads);
    cca_cmd->callback([&] { run_cca(cca); });

    MgibOpts mgib;
    auto* mgib_cmd = app.add_subcommand(
        "mgib", "Meta-Gaussian bottleneck: compress a source against a relevance variable");
    mgib_cmd->add_option("--source", mgib.source, "Representation to compress")->required();
    mgib_cmd->add_option("--relevance", mgib.relevance, "Representation to stay informative about")
        ->required();
    mgib_cmd->add_option("--format", mgib.format,
                         "csv | ibnc-bin | npy-pair (default: by extension)");
    auto* beta_opt = mgib_cmd->add_option("--beta", mgib.beta, "Explicit tradeoff beta");
    auto* rank_opt = mgib_cmd->add_option("--rank", mgib.rank, "Exact compression rank");
    auto* fraction_opt =
        mgib_cmd->add_option("--fraction", mgib.fraction, "Relevant-information fraction in (0,1)");
    mgib_cmd->add_option("--epsilon", mgib.epsilon, "Ridge used only if factorization fails")
        ->capture_default_str();
    mgib_cmd->add_option("--compressed-out", mgib.compressed_out,
                         "Save the compressed representation here");
    mgib_cmd->add_option("--curve-csv", mgib.curve_csv, "Write the information curve CSV here");
    mgib_cmd->add_option("--curve-points", mgib.curve_points, "Points on the beta grid")
        ->capture_default_str();
    add_common(mgib_cmd, mgib.report_path, mgib.force, &mgib.threads);
    mgib_cmd->callback([&] {
        mgib.beta_set = beta_opt->count() > 0;
        mgib.rank_set = rank_opt->count() > 0;
        mgib.fraction_set = fraction_opt->count() > 0;
        run_mgib(mgib);
    });

    ProbeOpts probe;
    auto* probe_cmd = app.add_subcommand(
        "probe", "Linear-probe and nearest-mean accuracy: raw vs ranked vs compressed");
    probe_cmd->add_option("--train", probe.train, "Training representation")->required();
    probe_cmd->add_option("--test", probe.test, "Held-out representation")->required();
    probe_cmd->add_option("--compressed-train", probe.compressed_train,
                          "Compressed training representation");
    probe_cmd->add_option("--compressed-test", probe.compressed_test,
                          "Compressed held-out representation");
    probe_cmd->add_option("--format", probe.format,
                          "csv | ibnc-bin | npy-pair (default: by extension)");
    probe_cmd->add_option("--l2", probe.l2, "Probe weight penalty")->capture_default_str();
    add_common(probe_cmd, probe.report_path, probe.force, &probe.threads);
    probe_cmd->callback([&] { run_probe(probe); });

    AgreementOpts agreement;
    auto* agree_cmd = app.add_subcommand(
        "agreement", "Joint-correctness of two prediction files against ground truth");
    agree_cmd->add_option("--pred-a", agreement.pred_a, "First predictions file")->required();
    agree_cmd->add_option("--pred-b", agreement.pred_b, "Second predictions file")->required();
    agree_cmd->add_option("--truth", agreement.truth, "Ground-truth labels file")->required();
    add_common(agree_cmd, agreement.report_path, agreement.force, &agreement.threads);
    agree_cmd->callback([&] { run_agreement(agreement); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ibnc::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ibnc::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
