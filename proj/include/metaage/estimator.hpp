#pragma once

#include "metaage/head.hpp"
#include "metaage/metalearner.hpp"

namespace metaage {

/// generate_weights -> class_scores -> age_distribution, BN on running stats.
inline AgeDistribution predict(const MetaLearnerParams& params, const Vector& h, const Vector& g) {
    return age_distribution(class_scores(generate_weights(params, h), g));
}

/// The identity-blind estimator parameterized by W alone.
inline AgeDistribution predict_global(const Matrix& W, const Vector& g) { return age_distribution(class_scores(W, g)); }

}  // namespace metaage
