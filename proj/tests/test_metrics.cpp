#include <catch_amalgamated.hpp>

#include <cmath>

#include "cf/error.hpp"
#include "cf/metrics.hpp"
#include "cf/rng.hpp"
#include "fixtures.hpp"

using namespace cf;

TEST_CASE("worked ranking example") {
    const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
    const std::vector<std::uint8_t> y{1, 0, 1, 0};
    REQUIRE(auroc(s, y) == 0.75);
    REQUIRE(auprc(s, y) == Catch::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("metrics agree with brute-force enumeration on random instances") {
    Rng rng(123);
    int checked = 0;
    while (checked < 1000) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 12));
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        // coarse scores so ties are common
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.uniform_int(0, 5)) / 5.0;
            y[i] = rng.uniform() < 0.4 ? 1 : 0;
        }
        const auto pos = std::count(y.begin(), y.end(), 1);
        if (pos == 0 || pos == static_cast<long>(n)) continue;
        REQUIRE(std::abs(auroc(s, y) - fx::brute_auroc(s, y)) <= 1e-12);
        REQUIRE(std::abs(auprc(s, y) - fx::brute_auprc(s, y)) <= 1e-12);
        ++checked;
    }
}

TEST_CASE("metric edge cases") {
    const std::vector<double> s{0.1, 0.2, 0.3};
    REQUIRE_THROWS_AS(auroc(s, std::vector<std::uint8_t>{1, 1, 1}), ValidationError);
    REQUIRE_THROWS_AS(auroc(s, std::vector<std::uint8_t>{0, 0, 0}), ValidationError);
    REQUIRE_THROWS_AS(auprc(s, std::vector<std::uint8_t>{0, 0, 0}), ValidationError);
    REQUIRE_THROWS_AS(auroc(s, std::vector<std::uint8_t>{0, 1}), ValidationError);
    // all tied: chance level
    const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    const std::vector<std::uint8_t> y{1, 0, 0, 0};
    REQUIRE(auroc(flat, y) == 0.5);
    REQUIRE(auprc(flat, y) == 0.25);
    REQUIRE(auroc(s, std::vector<std::uint8_t>{0, 0, 1}) == 1.0);
    REQUIRE(auroc(s, std::vector<std::uint8_t>{1, 0, 0}) == 0.0);
}
