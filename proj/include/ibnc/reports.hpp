#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibnc/gib.hpp"
#include "ibnc/identifiability.hpp"
#include "ibnc/nc.hpp"

namespace ibnc::reports {

using json = nlohmann::ordered_json;

/** JSON has no infinities: non-finite values serialize as null. */
inline json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline json number_array(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v(i)));
    return a;
}

inline json number_array(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number_or_null(x));
    return a;
}

inline json spectrum_report(const GibSpectrum& spectrum) {
    json r;
    r["lambdas"] = number_array(spectrum.lambdas);
    r["critical_betas"] = number_array(critical_betas(spectrum));
    r["r"] = number_array(spectrum.r);
    r["regularization_used"] = spectrum.regularization_used;
    return r;
}

inline json target_description(const RankTarget& target) {
    json t;
    switch (target.which) {
        case RankTarget::kind::explicit_beta:
            t["kind"] = "beta";
            t["value"] = target.beta;
            break;
        case RankTarget::kind::rank:
            t["kind"] = "rank";
            t["value"] = target.rank;
            break;
        default:
            t["kind"] = "relevance_fraction";
            t["value"] = target.fraction;
            break;
    }
    return t;
}

inline json mgib_report(const MgibSolution& solution, const RankTarget& target) {
    json r;
    r["target"] = target_description(target);
    r["beta_used"] = solution.projection.beta;
    r["active_rank"] = solution.projection.active_rank;
    r["lambdas"] = number_array(solution.spectrum.lambdas);
    r["critical_betas"] = number_array(critical_betas(solution.spectrum));
    r["alphas"] = number_array(solution.projection.alphas);
    r["i_tx_nats"] = solution.info.i_tx;
    r["i_ty_nats"] = solution.info.i_ty;

    const Eigen::VectorXd& alphas = solution.projection.alphas;
    json normalized = json::array();
    if (alphas.size() > 0 && alphas.mean() > 0.0) {
        const double mean = alphas.mean();
        for (Eigen::Index i = 0; i < alphas.size(); ++i)
            normalized.push_back(number_or_null(alphas(i) / mean));
    }
    r["alphas_normalized"] = normalized;
    bool any_capped = false;
    for (char c : solution.projection.alpha_capped) any_capped |= (c != 0);
    r["alpha_capped"] = any_capped;
    r["regularization_used"] = solution.spectrum.regularization_used;
    r["source"] = solution.source_name;
    r["relevance"] = solution.relevance_name;
    return r;
}

inline json cca_report(const CcaResult& result) {
    json r;
    r["correlations"] = number_array(result.correlations);
    r["top_k"] = result.top_k;
    r["mean_top_k"] = number_or_null(result.mean_top_k);
    r["std_top_k"] = number_or_null(result.std_top_k);
    r["var_top_k"] = number_or_null(result.var_top_k);
    r["regularization"] = result.regularization;
    return r;
}

inline json nc_report_json(const NcReport& report) {
    json r;
    r["equinorm_std"] = number_or_null(report.equinorm_std);
    r["angle_std_deg"] = number_or_null(report.angle_std_deg);
    r["mean_cos"] = number_or_null(report.mean_cos);
    r["target_cos"] = number_or_null(report.target_cos);
    r["nc1"] = number_or_null(report.nc1);
    r["ncm_accuracy"] = report.ncm_accuracy;
    r["nc4_agreement"] =
        report.nc4_agreement ? json(*report.nc4_agreement) : json(nullptr);
    return r;
}

/** Fixed-width decimal text used by every CSV emitter (round-trips doubles). */
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace ibnc::reports
