#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "deloclab/ensemble.hpp"
#include "helpers.hpp"

using namespace deloclab;

namespace {

EnsembleSpec square_spec(Eigen::Index n, EntryDist dist,
                         Dependency dep = Dependency::independent) {
    EnsembleSpec spec;
    spec.n_rows = spec.n_cols = n;
    spec.entry_dist = std::move(dist);
    spec.dependency = dep;
    return spec;
}

}  // namespace

TEST_CASE("symmetric sign draw honors the symmetric pairing") {
    const auto a = sample_matrix(square_spec(2, SymmetricSign{}, Dependency::symmetric), 7);
    CHECK(a(0, 1) == a(1, 0));
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) {
            CHECK(std::abs(std::abs(a(i, j).real()) - 1.0) == 0.0);
            CHECK(a(i, j).imag() == 0.0);
        }
}

TEST_CASE("gaussian draw without fixed imaginary part is real") {
    const auto a = sample_matrix(square_spec(3, GaussianDist{0.0, 1.0}), 11);
    CHECK(a.imag().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("skew pairing zeroes the off-diagonal of A + A^T") {
    const auto a = sample_matrix(square_spec(4, GaussianDist{0.0, 1.0}, Dependency::skew), 3);
    const Eigen::MatrixXd sum = a.real() + a.real().transpose();
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 4; ++j)
            if (i != j) CHECK(sum(i, j) == 0.0);
}

TEST_CASE("sampling is a pure function of (spec, seed)") {
    const auto spec = square_spec(6, GaussianDist{0.5, 2.0}, Dependency::symmetric);
    const auto a = sample_matrix(spec, 12345);
    const auto b = sample_matrix(spec, 12345);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    const auto c = sample_matrix(spec, 12346);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fixed imaginary part is copied through") {
    auto spec = square_spec(3, SymmetricSign{});
    spec.fixed_imag = Eigen::MatrixXd::Constant(3, 3, 0.25);
    const auto a = sample_matrix(spec, 5);
    CHECK((a.imag().array() == 0.25).all());
    spec.fixed_imag = Eigen::MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(sample_matrix(spec, 5), ValidationError);
}

TEST_CASE("spec validation names the offending field") {
    auto spec = square_spec(3, DiscreteDist{{0.0, 1.0}, {0.6, 0.6}});
    CHECK_THROWS_WITH_AS(spec.validate(),
                         "entry_dist: discrete table probabilities must sum to 1",
                         ValidationError);
    EnsembleSpec rect;
    rect.n_rows = 2;
    rect.n_cols = 3;
    rect.dependency = Dependency::symmetric;
    CHECK_THROWS_AS(rect.validate(), ValidationError);
}

TEST_CASE("audit: symmetric sign under (K=2, p=0.4)") {
    const auto audit = audit_distribution(SymmetricSign{}, 2.0, 0.4, 1000, 1);
    CHECK(audit.sup_shift_prob == doctest::Approx(0.5));
    CHECK(audit.tail_prob == 0.0);
    CHECK(audit.passes);
    CHECK(audit.n_samples == 0);  // exact enumeration
}

TEST_CASE("audit: point mass fails the spread condition") {
    const auto audit = audit_distribution(DiscreteDist{{0.0}, {1.0}}, 1.0, 0.1, 1000, 1);
    CHECK(audit.sup_shift_prob == doctest::Approx(1.0));
    CHECK_FALSE(audit.passes);
}

TEST_CASE("audit: standard gaussian tail matches the normal oracle") {
    const auto audit = audit_distribution(GaussianDist{0.0, 1.0}, 3.0, 0.3, 200000, 42);
    const double tail = 2.0 * oracle::normal_cdf(-3.0);
    CHECK(audit.tail_prob == doctest::Approx(tail).epsilon(0.5));
    CHECK(audit.tail_prob <= 0.15);
    CHECK(audit.passes);
    // sup_u P(|xi - u| < 1) = P(|xi| < 1) at the optimal center u = 0.
    const double spread = oracle::normal_cdf(1.0) - oracle::normal_cdf(-1.0);
    CHECK(audit.sup_shift_prob == doctest::Approx(spread).epsilon(0.02));
}

TEST_CASE("audit on discrete tables equals direct window enumeration") {
    Rng rng(99);
    for (int rep = 0; rep < 40; ++rep) {
        const int atoms = 2 + static_cast<int>(rng.uniform_below(5));
        DiscreteDist tab;
        double total = 0.0;
        for (int i = 0; i < atoms; ++i) {
            tab.values.push_back(rng.uniform(-3.0, 3.0));
            tab.probs.push_back(rng.uniform01() + 0.05);
            total += tab.probs.back();
        }
        for (auto& p : tab.probs) p /= total;
        const auto audit = audit_distribution(tab, 2.0, 0.3, 1000, 1);

        // Independent route: evaluate the open window mass at every midpoint
        // and atom center directly from the definition.
        double best = 0.0;
        std::vector<double> candidates = tab.values;
        for (std::size_t i = 0; i < tab.values.size(); ++i)
            for (std::size_t j = 0; j < tab.values.size(); ++j)
                candidates.push_back(0.5 * (tab.values[i] + tab.values[j]));
        for (const double u : candidates) {
            double mass = 0.0;
            for (std::size_t i = 0; i < tab.values.size(); ++i)
                if (std::abs(tab.values[i] - u) < 1.0) mass += tab.probs[i];
            best = std::max(best, mass);
        }
        CHECK(audit.sup_shift_prob == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("boundedness calibration: degenerate all-zero law returns the grid minimum") {
    const auto spec = square_spec(8, DiscreteDist{{0.0}, {1.0}});
    CHECK(calibrate_boundedness(spec, 0.5, 30, 1) == doctest::Approx(0.05));
}

TEST_CASE("boundedness calibration: gaussian iid at n = 128 concentrates near 2") {
    const auto m = calibrate_boundedness(square_spec(128, GaussianDist{0.0, 1.0}), 0.5, 50, 7);
    CHECK(m >= 1.9);
    CHECK(m <= 2.1);
}

TEST_CASE("boundedness calibration: symmetric sign iid at n = 64") {
    const auto m = calibrate_boundedness(square_spec(64, SymmetricSign{}), 0.5, 50, 7);
    CHECK(m >= 1.8);
    CHECK(m <= 2.4);
}

TEST_CASE("boundedness calibration is monotone in the target probability") {
    const auto spec = square_spec(32, GaussianDist{0.0, 1.0});
    const double m_low = calibrate_boundedness(spec, 0.2, 40, 3);
    const double m_mid = calibrate_boundedness(spec, 0.5, 40, 3);
    const double m_high = calibrate_boundedness(spec, 0.9, 40, 3);
    CHECK(m_low <= m_mid);
    CHECK(m_mid <= m_high);
    CHECK_THROWS_AS(calibrate_boundedness(spec, 0.5, 10, 3), ParameterError);
}

TEST_CASE("shift_matrix") {
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(2, 2);
    CHECK(shift_matrix(id, Complex(1.0, 0.0)).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(3, 3);
    const auto shifted = shift_matrix(zero, Complex(0.0, 1.0));
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(shifted(i, i) == Complex(0.0, -1.0));

    Rng rng(5);
    const Eigen::MatrixXcd a = oracle::random_complex_matrix(rng, 4, 4);
    CHECK((shift_matrix(a, Complex(0.0, 0.0)) - a).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(shift_matrix(Eigen::MatrixXcd::Zero(2, 3), Complex(1.0, 0.0)), ShapeError);
}
