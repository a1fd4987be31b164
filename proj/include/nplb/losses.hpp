#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nplb/distance.hpp"
#include "nplb/error.hpp"
#include "nplb/matrix.hpp"

namespace nplb {

// The three pairwise distances every triplet objective is built from:
//   delta_plus  = d(anchor, positive)
//   delta_minus = d(anchor, negative)
//   rho         = d(positive, negative)
struct TripletGeometry {
    double delta_plus = 0.0;
    double delta_minus = 0.0;
    double rho = 0.0;

    static TripletGeometry from_points(std::span<const double> anchor, std::span<const double> positive,
                                       std::span<const double> negative) {
        return {euclidean_distance(anchor, positive), euclidean_distance(anchor, negative),
                euclidean_distance(positive, negative)};
    }
};

struct Margin {
    double epsilon = 1.0;

    explicit Margin(double eps = 1.0) : epsilon(eps) {
        if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("margin must be finite and positive");
    }
};

struct LossKind {
    enum class Type { Traditional, DistanceSwap, Nplb };

    Type type = Type::Nplb;
    int power = 2;  // NPLB regularizer exponent; must be even and positive

    static LossKind traditional() { return {Type::Traditional, 0}; }
    static LossKind distance_swap() { return {Type::DistanceSwap, 0}; }

    static LossKind nplb(int p = 2) {
        if (p <= 0 || p % 2 != 0) {
            throw ConfigError("NPLB power must be a positive even integer (odd powers make the "
                              "objective unbounded below); got p=" + std::to_string(p));
        }
        return {Type::Nplb, p};
    }

    std::string name() const {
        switch (type) {
            case Type::Traditional: return "traditional";
            case Type::DistanceSwap: return "swap";
            case Type::Nplb: return power == 2 ? std::string("nplb") : "nplb_p" + std::to_string(power);
        }
        return "?";
    }
};

inline LossKind loss_kind_from_name(const std::string& name, int p = 2) {
    if (name == "traditional") return LossKind::traditional();
    if (name == "swap" || name == "distance_swap") return LossKind::distance_swap();
    if (name == "nplb") return LossKind::nplb(p);
    throw ConfigError("unknown loss kind '" + name + "' (expected traditional|swap|nplb)");
}

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }

// [delta_plus - delta_minus + eps]^+
inline double traditional_loss(const TripletGeometry& g, const Margin& m) {
    return hinge(g.delta_plus - g.delta_minus + m.epsilon);
}

// [delta_plus - delta_minus + eps]^+ + (rho - delta_minus)^p, p even.
inline double nplb_loss(const TripletGeometry& g, const Margin& m, int p = 2) {
    if (p <= 0 || p % 2 != 0) {
        throw ConfigError("nplb_loss: power must be a positive even integer, got " + std::to_string(p));
    }
    const double reg = std::pow(g.rho - g.delta_minus, p);
    return traditional_loss(g, m) + reg;
}

// The p=1 variant; unbounded below, kept only to demonstrate why odd powers
// are rejected. Never used for training.
inline double nplb_unbounded_demo(const TripletGeometry& g, const Margin& m) {
    return traditional_loss(g, m) + (g.rho - g.delta_minus);
}

// In-triplet hard negative: when the positive is closer to the negative than
// the anchor is (rho < delta_minus), anchor and positive swap roles, which
// replaces delta_minus with rho. delta_plus is symmetric under the swap.
inline double distance_swap_loss(const TripletGeometry& g, const Margin& m) {
    return hinge(g.delta_plus - std::min(g.delta_minus, g.rho) + m.epsilon);
}

inline double triplet_loss(const LossKind& kind, const TripletGeometry& g, const Margin& m) {
    switch (kind.type) {
        case LossKind::Type::Traditional: return traditional_loss(g, m);
        case LossKind::Type::DistanceSwap: return distance_swap_loss(g, m);
        case LossKind::Type::Nplb: return nplb_loss(g, m, kind.power);
    }
    throw ConfigError("triplet_loss: unknown kind");
}

// Gradients of one triplet term with respect to the three embeddings.
// Subgradient 0 at the hinge kink and at coincident points (d == 0).
struct TripletGradient {
    std::vector<double> anchor;
    std::vector<double> positive;
    std::vector<double> negative;
};

namespace detail {

// Adds scale * d||u - v|| / du to grad_u and the mirrored term to grad_v.
// No-op when the points coincide (subgradient 0 at d = 0).
inline void add_distance_gradient(std::span<const double> u, std::span<const double> v, double dist, double scale,
                                  std::vector<double>& grad_u, std::vector<double>& grad_v) {
    if (dist == 0.0 || scale == 0.0) return;
    for (size_t i = 0; i < u.size(); ++i) {
        const double g = scale * (u[i] - v[i]) / dist;
        grad_u[i] += g;
        grad_v[i] -= g;
    }
}

}  // namespace detail

inline TripletGradient loss_gradient(const LossKind& kind, std::span<const double> anchor,
                                     std::span<const double> positive, std::span<const double> negative,
                                     const Margin& m) {
    if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
        throw DimensionError("loss_gradient: embedding lengths differ");
    }
    const TripletGeometry g = TripletGeometry::from_points(anchor, positive, negative);
    TripletGradient out;
    out.anchor.assign(anchor.size(), 0.0);
    out.positive.assign(anchor.size(), 0.0);
    out.negative.assign(anchor.size(), 0.0);

    // Hinge term; swap replaces delta_minus with rho when rho < delta_minus.
    const bool swapped = kind.type == LossKind::Type::DistanceSwap && g.rho < g.delta_minus;
    const double neg_dist = swapped ? g.rho : g.delta_minus;
    if (g.delta_plus - neg_dist + m.epsilon > 0.0) {
        detail::add_distance_gradient(anchor, positive, g.delta_plus, 1.0, out.anchor, out.positive);
        if (swapped) {
            detail::add_distance_gradient(positive, negative, g.rho, -1.0, out.positive, out.negative);
        } else {
            detail::add_distance_gradient(anchor, negative, g.delta_minus, -1.0, out.anchor, out.negative);
        }
    }

    if (kind.type == LossKind::Type::Nplb) {
        // d/dx (rho - delta_minus)^p = p (rho - delta_minus)^(p-1) * (drho - ddelta_minus)
        const double coeff =
            static_cast<double>(kind.power) * std::pow(g.rho - g.delta_minus, kind.power - 1);
        detail::add_distance_gradient(positive, negative, g.rho, coeff, out.positive, out.negative);
        detail::add_distance_gradient(anchor, negative, g.delta_minus, -coeff, out.anchor, out.negative);
    }
    return out;
}

// Per-class embedding diagnostics:
//   LD   = minimum pairwise intra-class distance
//   AD   = mean over points of the nearest intra-class neighbor distance
//   Unif = |LD - AD| / (AD + xi), or 0 for singleton classes.
struct DensityMetrics {
    double local_density = 0.0;
    double average_density = 0.0;
    double uniformity = 0.0;
    size_t count = 0;
};

inline std::map<int, DensityMetrics> class_density_metrics(const Matrix& embeddings,
                                                           std::span<const int> labels, double xi = 1e-8) {
    if (embeddings.rows() != labels.size()) throw DimensionError("class_density_metrics: labels/rows mismatch");
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::map<int, DensityMetrics> out;
    for (const auto& [label, members] : by_class) {
        DensityMetrics dm;
        dm.count = members.size();
        if (members.size() > 1) {
            double min_all = std::numeric_limits<double>::infinity();
            double nn_sum = 0.0;
            for (size_t a = 0; a < members.size(); ++a) {
                double nn = std::numeric_limits<double>::infinity();
                for (size_t b = 0; b < members.size(); ++b) {
                    if (a == b) continue;
                    const double d = euclidean_distance(embeddings.row(members[a]), embeddings.row(members[b]));
                    nn = std::min(nn, d);
                }
                nn_sum += nn;
                min_all = std::min(min_all, nn);
            }
            dm.local_density = min_all;
            dm.average_density = nn_sum / static_cast<double>(members.size());
            dm.uniformity = std::abs(dm.local_density - dm.average_density) / (dm.average_density + xi);
        }
        out[label] = dm;
    }
    return out;
}

inline double mean_uniformity(const std::map<int, DensityMetrics>& metrics) {
    if (metrics.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [label, dm] : metrics) s += dm.uniformity;
    return s / static_cast<double>(metrics.size());
}

}  // namespace nplb
