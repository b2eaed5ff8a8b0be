#pragma once

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metaage {

struct CsPoint {
    int theta = 0;
    double cs = 0.0;  // percentage
};

struct EvalResult {
    double mae = 0.0;
    std::vector<CsPoint> cs_curve;
    std::optional<double> eps_error;
    std::size_t n_samples = 0;
};

namespace detail {

inline void check_pairs(std::span<const double> preds, std::span<const double> labels, const char* what) {
    if (preds.empty()) {
        throw std::invalid_argument(std::string(what) + ": empty input");
    }
    if (preds.size() != labels.size()) {
        throw std::invalid_argument(std::string(what) + ": " + std::to_string(preds.size()) + " predictions vs " +
                                    std::to_string(labels.size()) + " labels");
    }
}

}  // namespace detail

inline double mae(std::span<const double> preds, std::span<const double> labels) {
    detail::check_pairs(preds, labels, "mae");
    double sum = 0.0;
    for (std::size_t m = 0; m < preds.size(); ++m) {
        sum += std::abs(preds[m] - labels[m]);
    }
    return sum / static_cast<double>(preds.size());
}

/// Percentage of samples with |error| <= theta (boundary counts as a hit).
inline double cs(std::span<const double> preds, std::span<const double> labels, double theta) {
    detail::check_pairs(preds, labels, "cs");
    if (!(theta >= 0.0)) {
        throw std::invalid_argument("cs: theta must be >= 0");
    }
    std::size_t hits = 0;
    for (std::size_t m = 0; m < preds.size(); ++m) {
        if (std::abs(preds[m] - labels[m]) <= theta) {
            ++hits;
        }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

/// CS at integer thresholds 0..theta_max.
inline std::vector<CsPoint> cs_curve(std::span<const double> preds, std::span<const double> labels, int theta_max) {
    if (theta_max < 0) {
        throw std::invalid_argument("cs_curve: theta_max must be >= 0");
    }
    std::vector<CsPoint> curve;
    curve.reserve(static_cast<std::size_t>(theta_max) + 1);
    for (int t = 0; t <= theta_max; ++t) {
        curve.push_back({t, cs(preds, labels, static_cast<double>(t))});
    }
    return curve;
}

/// 1 - mean exp(-(pred - label)^2 / (2 sigma^2)). Every sigma must be > 0.
inline double eps_error(std::span<const double> preds, std::span<const double> labels, std::span<const double> sigmas) {
    detail::check_pairs(preds, labels, "eps_error");
    if (sigmas.size() != preds.size()) {
        throw std::invalid_argument("eps_error: " + std::to_string(sigmas.size()) + " sigmas for " +
                                    std::to_string(preds.size()) + " samples");
    }
    double sum = 0.0;
    for (std::size_t m = 0; m < preds.size(); ++m) {
        if (!(sigmas[m] > 0.0) || !std::isfinite(sigmas[m])) {
            throw std::invalid_argument("eps_error: sigma at index " + std::to_string(m) + " must be finite and > 0");
        }
        const double e = preds[m] - labels[m];
        sum += std::exp(-e * e / (2.0 * sigmas[m] * sigmas[m]));
    }
    return 1.0 - sum / static_cast<double>(preds.size());
}

/// `sigmas` empty means unknown; eps_error is then omitted.
inline EvalResult evaluate_predictions(std::span<const double> preds, std::span<const double> labels,
                                       std::span<const double> sigmas, int theta_max = 10) {
    EvalResult r;
    r.mae = mae(preds, labels);
    r.cs_curve = cs_curve(preds, labels, theta_max);
    if (!sigmas.empty()) {
        r.eps_error = eps_error(preds, labels, sigmas);
    }
    r.n_samples = preds.size();
    return r;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Shortest decimal form that round-trips.
inline std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline nlohmann::json to_json(const EvalResult& r) {
    nlohmann::json j;
    j["mae"] = r.mae;
    nlohmann::json curve = nlohmann::json::array();
    for (const CsPoint& p : r.cs_curve) {
        curve.push_back(nlohmann::json::array({p.theta, p.cs}));
    }
    j["cs_curve"] = std::move(curve);
    j["eps_error"] = r.eps_error ? nlohmann::json(*r.eps_error) : nlohmann::json(nullptr);
    j["n_samples"] = r.n_samples;
    return j;
}

inline EvalResult eval_result_from_json(const nlohmann::json& j) {
    EvalResult r;
    r.mae = j.at("mae").get<double>();
    for (const auto& p : j.at("cs_curve")) {
        r.cs_curve.push_back({p.at(0).get<int>(), p.at(1).get<double>()});
    }
    if (!j.at("eps_error").is_null()) {
        r.eps_error = j.at("eps_error").get<double>();
    }
    r.n_samples = j.at("n_samples").get<std::size_t>();
    return r;
}

inline std::string cs_curve_csv(const std::vector<CsPoint>& curve) {
    std::string out = "theta,cs\n";
    for (const CsPoint& p : curve) {
        out += std::to_string(p.theta) + "," + format_real(p.cs) + "\n";
    }
    return out;
}

}  // namespace metaage
