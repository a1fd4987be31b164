#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nplb/losses.hpp"
#include "nplb/random.hpp"

using namespace nplb;

namespace {

std::vector<double> random_vec(RandomSource& rng, size_t d, double scale = 3.0) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.uniform(-scale, scale);
    return v;
}

double loss_of_points(const LossKind& kind, const std::vector<double>& a, const std::vector<double>& p,
                      const std::vector<double>& n, const Margin& m) {
    return triplet_loss(kind, TripletGeometry::from_points(a, p, n), m);
}

// Central finite differences of the loss w.r.t. every embedding coordinate.
TripletGradient fd_gradient(const LossKind& kind, std::vector<double> a, std::vector<double> p,
                            std::vector<double> n, const Margin& m, double h = 1e-6) {
    TripletGradient g;
    auto fd = [&](std::vector<double>& vec, std::vector<double>& out) {
        out.resize(vec.size());
        for (size_t i = 0; i < vec.size(); ++i) {
            const double keep = vec[i];
            vec[i] = keep + h;
            const double hi = loss_of_points(kind, a, p, n, m);
            vec[i] = keep - h;
            const double lo = loss_of_points(kind, a, p, n, m);
            vec[i] = keep;
            out[i] = (hi - lo) / (2 * h);
        }
    };
    fd(a, g.anchor);
    fd(p, g.positive);
    fd(n, g.negative);
    return g;
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
        const double scale = std::max({std::abs(got[i]), std::abs(want[i]), 1e-3});
        CHECK(std::abs(got[i] - want[i]) / scale < tol);
    }
}

// Applies a fixed rotation in the first two coordinates plus a translation.
std::vector<double> rigid(const std::vector<double>& v, double angle, double shift) {
    std::vector<double> out = v;
    const double c = std::cos(angle), s = std::sin(angle);
    out[0] = c * v[0] - s * v[1];
    out[1] = s * v[0] + c * v[1];
    for (double& x : out) x += shift;
    return out;
}

}  // namespace

TEST_CASE("traditional loss hand values") {
    Margin eps{1.0};
    CHECK(traditional_loss({1, 2, 0.5}, eps) == doctest::Approx(0.0));
    CHECK(traditional_loss({0, 0, 0}, eps) == doctest::Approx(1.0));
    CHECK(traditional_loss({2, 1, 1.5}, eps) == doctest::Approx(2.0));
}

TEST_CASE("nplb loss hand values and the zero-loss identity") {
    Margin eps{1.0};
    CHECK(nplb_loss({1, 2, 2}, eps) == doctest::Approx(0.0));
    CHECK(nplb_loss({0, 0, 0}, eps) == doctest::Approx(1.0));

    // a=(0,0), p=(1,0), n=(0,2): hinge closed, regularizer (sqrt(5)-2)^2
    const auto g = TripletGeometry::from_points(std::vector<double>{0, 0}, std::vector<double>{1, 0},
                                                std::vector<double>{0, 2});
    CHECK(g.delta_plus == doctest::Approx(1.0));
    CHECK(g.delta_minus == doctest::Approx(2.0));
    CHECK(g.rho == doctest::Approx(std::sqrt(5.0)));
    const double expected = std::pow(std::sqrt(5.0) - 2.0, 2.0);
    CHECK(expected == doctest::Approx(0.0557280900008412).epsilon(1e-10));
    CHECK(nplb_loss(g, eps) == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_AS(nplb_loss({1, 2, 2}, eps, 3), ConfigError);
    CHECK_THROWS_AS(nplb_loss({1, 2, 2}, eps, 0), ConfigError);
    CHECK_THROWS_AS(nplb_loss({1, 2, 2}, eps, -2), ConfigError);
    CHECK_THROWS_AS(LossKind::nplb(5), ConfigError);
}

TEST_CASE("nplb zero iff rho equals delta_minus and margin satisfied") {
    Margin eps{1.0};
    RandomSource rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const double dp = rng.uniform(0.0, 3.0);
        const double dm = dp + eps.epsilon + rng.uniform(0.0, 3.0);
        CHECK(nplb_loss({dp, dm, dm}, eps) <= 1e-12);

        // Either broken condition forces a strictly positive loss.
        const double rho_off = dm + rng.uniform(0.1, 1.0);
        CHECK(nplb_loss({dp, dm, rho_off}, eps) >= 0.01 - 1e-9);
        const double dm_short = dp + rng.uniform(0.0, 0.9) * eps.epsilon;
        CHECK(nplb_loss({dp, dm_short, dm_short}, eps) > 0.0);
    }
}

TEST_CASE("nplb dominates the traditional loss pointwise for even p") {
    RandomSource rng(23);
    Margin eps{1.0};
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = random_vec(rng, 4);
        const auto p = random_vec(rng, 4);
        const auto n = random_vec(rng, 4);
        const auto g = TripletGeometry::from_points(a, p, n);
        CHECK(nplb_loss(g, eps) >= traditional_loss(g, eps));
        CHECK(nplb_loss(g, eps, 4) >= traditional_loss(g, eps));
    }
}

TEST_CASE("p=1 variant is unbounded below; even p stays non-negative") {
    Margin eps{1.0};
    CHECK(nplb_unbounded_demo({1, 10, 1}, eps) == doctest::Approx(-9.0));
    CHECK(nplb_unbounded_demo({2, 1, 1}, eps) == doctest::Approx(2.0));
    // rho == delta_minus reduces to the traditional loss
    CHECK(nplb_unbounded_demo({1.5, 2.5, 2.5}, eps) == doctest::Approx(traditional_loss({1.5, 2.5, 2.5}, eps)));

    RandomSource rng(29);
    for (int trial = 0; trial < 10000; ++trial) {
        TripletGeometry g{rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 5)};
        CHECK(nplb_loss(g, eps) >= 0.0);
    }
}

TEST_CASE("distance swap hand values") {
    Margin eps{1.0};
    // no swap when rho >= delta_minus
    CHECK(distance_swap_loss({1.0, 2.0, 2.5}, eps) == doctest::Approx(traditional_loss({1.0, 2.0, 2.5}, eps)));
    CHECK(distance_swap_loss({3, 4, 1}, eps) == doctest::Approx(3.0));
    CHECK(distance_swap_loss({0, 5, 5}, eps) == doctest::Approx(0.0));
}

TEST_CASE("losses are invariant under rigid motions of the triple") {
    RandomSource rng(31);
    Margin eps{1.0};
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_vec(rng, 3);
        const auto p = random_vec(rng, 3);
        const auto n = random_vec(rng, 3);
        const double angle = rng.uniform(0, 6.28);
        const double shift = rng.uniform(-5, 5);
        for (const LossKind& kind :
             {LossKind::traditional(), LossKind::distance_swap(), LossKind::nplb(), LossKind::nplb(4)}) {
            const double before = loss_of_points(kind, a, p, n, eps);
            const double after =
                loss_of_points(kind, rigid(a, angle, shift), rigid(p, angle, shift), rigid(n, angle, shift), eps);
            CHECK(after == doctest::Approx(before).epsilon(1e-9));
        }
    }
}

TEST_CASE("loss gradients match finite differences away from kinks") {
    RandomSource rng(37);
    Margin eps{1.0};
    for (const LossKind& kind :
         {LossKind::traditional(), LossKind::distance_swap(), LossKind::nplb(), LossKind::nplb(4)}) {
        int checked = 0;
        while (checked < 40) {
            const auto a = random_vec(rng, 5);
            const auto p = random_vec(rng, 5);
            const auto n = random_vec(rng, 5);
            const auto g = TripletGeometry::from_points(a, p, n);
            // Skip configurations near the hinge kink or a swap tie, where
            // one-sided derivatives differ.
            if (std::abs(g.delta_plus - std::min(g.delta_minus, g.rho) + eps.epsilon) < 1e-3) continue;
            if (kind.type == LossKind::Type::DistanceSwap && std::abs(g.rho - g.delta_minus) < 1e-3) continue;
            const TripletGradient analytic = loss_gradient(kind, a, p, n, eps);
            const TripletGradient fd = fd_gradient(kind, a, p, n, eps);
            check_close(analytic.anchor, fd.anchor, 1e-4);
            check_close(analytic.positive, fd.positive, 1e-4);
            check_close(analytic.negative, fd.negative, 1e-4);
            ++checked;
        }
    }
}

TEST_CASE("gradients vanish at the nplb minimum") {
    // hinge inactive and rho == delta_minus
    std::vector<double> a{0, 0};
    std::vector<double> p{1, 0};
    std::vector<double> n{0.5, 3.0};  // d(a,n) = d(p,n) by symmetry about x=0.5
    const auto g = TripletGeometry::from_points(a, p, n);
    REQUIRE(g.rho == doctest::Approx(g.delta_minus));
    REQUIRE(g.delta_minus >= g.delta_plus + 1.0);
    const TripletGradient grad = loss_gradient(LossKind::nplb(), a, p, n, Margin{1.0});
    for (const auto& part : {grad.anchor, grad.positive, grad.negative}) {
        for (double v : part) CHECK(v == doctest::Approx(0.0));
    }
}

TEST_CASE("traditional gradient w.r.t. the positive is the unit offset when active") {
    std::vector<double> a{0, 0};
    std::vector<double> p{3, 4};
    std::vector<double> n{0.5, 0};
    const auto g = TripletGeometry::from_points(a, p, n);
    REQUIRE(traditional_loss(g, Margin{1.0}) > 0.0);
    const TripletGradient grad = loss_gradient(LossKind::traditional(), a, p, n, Margin{1.0});
    CHECK(grad.positive[0] == doctest::Approx((p[0] - a[0]) / g.delta_plus));
    CHECK(grad.positive[1] == doctest::Approx((p[1] - a[1]) / g.delta_plus));
}

TEST_CASE("zero-gradient subgradient convention at coincident points") {
    std::vector<double> a{1, 1};
    const TripletGradient grad = loss_gradient(LossKind::nplb(), a, a, a, Margin{1.0});
    for (const auto& part : {grad.anchor, grad.positive, grad.negative}) {
        for (double v : part) CHECK(v == 0.0);
    }
}

TEST_CASE("class density metrics against a brute-force oracle") {
    // class {0, 1, 3} on a line: LD=1, AD=4/3, Unif ~ 0.25
    Matrix emb(3, 1, std::vector<double>{0, 1, 3});
    std::vector<int> labels{0, 0, 0};
    const auto metrics = class_density_metrics(emb, labels);
    const auto& dm = metrics.at(0);
    CHECK(dm.local_density == doctest::Approx(1.0));
    CHECK(dm.average_density == doctest::Approx(4.0 / 3.0));
    CHECK(dm.uniformity == doctest::Approx((1.0 / 3.0) / (4.0 / 3.0 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("density metrics: singleton class and uniform grid") {
    Matrix emb(5, 1, std::vector<double>{0, 1, 2, 3, 100});
    std::vector<int> labels{0, 0, 0, 0, 1};
    const auto metrics = class_density_metrics(emb, labels);
    CHECK(metrics.at(1).uniformity == 0.0);
    CHECK(metrics.at(1).count == 1);
    // grid class: LD = AD = 1
    CHECK(metrics.at(0).local_density == doctest::Approx(1.0));
    CHECK(metrics.at(0).average_density == doctest::Approx(1.0));
    CHECK(metrics.at(0).uniformity == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("density metrics match a pairwise brute force on random data") {
    RandomSource rng(41);
    Matrix emb(20, 3);
    std::vector<int> labels(20);
    for (size_t i = 0; i < 20; ++i) {
        labels[i] = static_cast<int>(i % 3);
        for (size_t j = 0; j < 3; ++j) emb(i, j) = rng.uniform(-5, 5);
    }
    const auto metrics = class_density_metrics(emb, labels);
    for (int cls = 0; cls < 3; ++cls) {
        std::vector<size_t> members;
        for (size_t i = 0; i < 20; ++i) {
            if (labels[i] == cls) members.push_back(i);
        }
        double min_all = 1e300, nn_sum = 0.0;
        for (size_t a : members) {
            double nn = 1e300;
            for (size_t b : members) {
                if (a == b) continue;
                nn = std::min(nn, euclidean_distance(emb.row(a), emb.row(b)));
            }
            nn_sum += nn;
            min_all = std::min(min_all, nn);
        }
        CHECK(metrics.at(cls).local_density == doctest::Approx(min_all));
        CHECK(metrics.at(cls).average_density == doctest::Approx(nn_sum / members.size()));
    }
}
