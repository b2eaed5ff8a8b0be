#pragma once

#include "metaage/layers.hpp"
#include "metaage/matrix.hpp"

namespace metaage {

/// Bias-free K x D classifier; row i scores class i.
struct PersonalizedWeights {
    Matrix W;

    Eigen::Index classes() const { return W.rows(); }
    Eigen::Index dim() const { return W.cols(); }
};

struct AgeDistribution {
    Vector probs;
    double expected_age = 0.0;
};

/// scores[i] = <W.row(i), g>
inline Vector class_scores(const Matrix& W, const Vector& g) {
    if (W.cols() != g.size()) {
        throw ShapeError("class_scores: weight has " + std::to_string(W.cols()) + " columns, age features have " +
                         std::to_string(g.size()));
    }
    return W * g;
}

inline Vector class_scores(const PersonalizedWeights& w, const Vector& g) { return class_scores(w.W, g); }

/// Softmax distribution and its expectation over class indices 0..K-1.
inline AgeDistribution age_distribution(const Vector& scores) {
    AgeDistribution out;
    out.probs = softmax(scores);
    const Vector ages = Vector::LinSpaced(scores.size(), 0.0, static_cast<double>(scores.size() - 1));
    out.expected_age = out.probs.dot(ages);
    return out;
}

/// Diagnostic decoding only; metrics always use the expectation.
inline Eigen::Index argmax_age(const AgeDistribution& d) {
    Eigen::Index best = 0;
    d.probs.maxCoeff(&best);
    return best;
}

}  // namespace metaage
