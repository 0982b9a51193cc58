#include <doctest.h>

#include <cmath>
#include <numbers>

#include "semitrans/simulation.hpp"

using namespace semitrans;

TEST_CASE("model constants") {
    const ModelConstants m1 = model_constants(1);
    CHECK(m1.b1 == 5.0);
    CHECK(m1.b2 == 2.0);
    CHECK(m1.sigma == 1.5);
    CHECK(m1.b0 == 6.5);
    CHECK(model_constants(2).b0 == 4.5);
    CHECK(model_constants(3).b0 == 2.5);
    CHECK_THROWS_AS(model_constants(4), InvalidValue);
    CHECK_THROWS_AS(model_constants(0), InvalidValue);
}

TEST_CASE("generated samples") {
    DgpSpec spec;
    spec.theta_o = 0.5;
    spec.n = 10000;
    spec.seed = 77;
    const SimulatedSample s = simulate(spec);
    const ModelConstants c = model_constants(1);

    CHECK(s.data.size() == 10000);
    CHECK(s.data.dim() == 2);
    CHECK(s.signal.minCoeff() >= 0.0);
    CHECK(s.errors.cwiseAbs().maxCoeff() <= 3.0);
    CHECK(s.data.x.cwiseAbs().maxCoeff() <= 0.5);
    for (Eigen::Index i = 0; i < 10000; ++i) {
        const double x1 = s.data.x(i, 0), x2 = s.data.x(i, 1);
        const double z = c.b0 + c.b1 * x1 * x1 + c.b2 * std::sin(std::numbers::pi * x2) + c.sigma * s.errors[i];
        REQUIRE(s.signal[i] == doctest::Approx(z).epsilon(1e-14));
        REQUIRE(forward(Family::BoxCox, 0.5, s.data.y[i]) == doctest::Approx(z).epsilon(1e-12));
    }
    const double mean_e = s.errors.mean();
    const double sd_e = std::sqrt((s.errors.array() - mean_e).square().sum() / 9999.0);
    CHECK(sd_e >= 0.95);
    CHECK(sd_e <= 1.0);
}

TEST_CASE("signal mean") {
    DgpSpec spec;
    spec.n = 100000;
    spec.seed = 78;
    const SimulatedSample s = simulate(spec);
    const ModelConstants c = model_constants(1);
    const double mean = s.signal.mean();
    const double sd = std::sqrt((s.signal.array() - mean).square().sum() / (100000.0 - 1));
    // E X1^2 = 1/12 and E sin(pi X2) = 0 for uniform covariates on [-1/2, 1/2].
    CHECK(std::abs(mean - (c.b0 + c.b1 / 12.0)) <= 3.0 * sd / std::sqrt(100000.0));
}

TEST_CASE("generation is deterministic in the seed") {
    DgpSpec spec;
    spec.n = 50;
    spec.seed = 3;
    const Dataset a = generate(spec), b = generate(spec);
    CHECK(a.y == b.y);
    CHECK(a.x == b.x);
    spec.seed = 4;
    CHECK(generate(spec).y != a.y);

    SUBCASE("zero noise leaves the deterministic signal") {
        spec.sigma_override = 0.0;
        const SimulatedSample s = simulate(spec);
        const ModelConstants c = model_constants(1);
        for (Eigen::Index i = 0; i < 50; ++i) {
            const double x1 = s.data.x(i, 0), x2 = s.data.x(i, 1);
            CHECK(s.signal[i] == doctest::Approx(c.b0 + c.b1 * x1 * x1 + c.b2 * std::sin(std::numbers::pi * x2)));
        }
    }
    SUBCASE("empty") {
        spec.n = 0;
        CHECK_THROWS_AS(generate(spec), EmptyData);
    }
}

TEST_CASE("responses exceed one for nonnegative theta") {
    for (int model : {1, 2, 3})
        for (double theta : {0.0, 0.5, 1.0, 1.5}) {
            DgpSpec spec;
            spec.model = model;
            spec.theta_o = theta;
            spec.n = 2000;
            spec.seed = 100 + static_cast<std::uint64_t>(model);
            CHECK(generate(spec).y.minCoeff() >= 1.0);
        }
}

TEST_CASE("cell summaries") {
    McCell cell;
    cell.theta_o = 0.5;
    cell.estimates = {0.25, 0.5, 1.0, 0.375};
    summarize(cell);
    const double r = 4.0;
    const double bias = *cell.mean - 0.5;
    CHECK(cell.reps == 4);
    CHECK(*cell.mean == doctest::Approx(0.53125));
    CHECK(std::abs(*cell.mse - (bias * bias + *cell.sd * *cell.sd * (r - 1) / r)) <= 1e-12);

    McCell one;
    one.theta_o = 1.0;
    one.estimates = {0.75};
    summarize(one);
    CHECK_FALSE(one.sd.has_value());
    CHECK(*one.mse == doctest::Approx(0.0625));

    McCell none;
    summarize(none);
    CHECK_FALSE(none.mean.has_value());
}

TEST_CASE("run_mc") {
    McConfig config;
    config.thetas = {0.0, 1.0};
    config.methods = {Method::MD, Method::PL};
    config.bandwidths = {BandwidthPolicy::fixed(0.3)};
    config.sample_sizes = {40};
    config.reps = 3;
    config.seed = 11;
    config.fit.grid = {-0.5, 1.5, 0.25};
    const McReport a = run_mc(config);

    CHECK(a.reps == 3);
    REQUIRE(a.cells.size() == 4);
    for (const auto& cell : a.cells) {
        CHECK(cell.reps + cell.failures == 3);
        CHECK(cell.bandwidth == "0.3");
        if (cell.reps >= 2) {
            const double r = cell.reps;
            const double bias = *cell.mean - cell.theta_o;
            CHECK(std::abs(*cell.mse - (bias * bias + *cell.sd * *cell.sd * (r - 1) / r)) <= 1e-10);
        }
    }
    REQUIRE(a.find(1, 1.0, "0.3", Method::PL, 40) != nullptr);
    CHECK(a.find(2, 1.0, "0.3", Method::PL, 40) == nullptr);

    SUBCASE("thread count does not change the estimates") {
        config.threads = 3;
        const McReport b = run_mc(config);
        REQUIRE(b.cells.size() == a.cells.size());
        for (std::size_t k = 0; k < a.cells.size(); ++k) CHECK(a.cells[k] == b.cells[k]);
    }
    SUBCASE("methods see the same datasets") {
        // PL and MD cells at one theta share replicate seeds.
        config.methods = {Method::MD};
        const McReport md_only = run_mc(config);
        CHECK(md_only.find(1, 0.0, "0.3", Method::MD, 40)->estimates ==
              a.find(1, 0.0, "0.3", Method::MD, 40)->estimates);
    }
    SUBCASE("single replication") {
        config.reps = 1;
        for (const auto& cell : run_mc(config).cells) {
            CHECK_FALSE(cell.sd.has_value());
            if (cell.mean) CHECK(*cell.mse == doctest::Approx((*cell.mean - cell.theta_o) * (*cell.mean - cell.theta_o)));
        }
    }
    SUBCASE("validation") {
        config.reps = 0;
        CHECK_THROWS_AS(run_mc(config), InvalidValue);
        config.reps = 1;
        config.thetas.clear();
        CHECK_THROWS_AS(run_mc(config), InvalidValue);
    }
}

TEST_CASE("replicate seeds") {
    CHECK(replicate_seed(1, 1, 0.5, 100, 0) == replicate_seed(1, 1, 0.5, 100, 0));
    CHECK(replicate_seed(1, 1, 0.5, 100, 0) != replicate_seed(1, 1, 0.5, 100, 1));
    CHECK(replicate_seed(1, 1, 0.5, 100, 0) != replicate_seed(1, 2, 0.5, 100, 0));
    CHECK(replicate_seed(1, 1, 0.5, 100, 0) != replicate_seed(1, 1, 1.0, 100, 0));
}

TEST_CASE("baseline criteria") {
    DgpSpec spec;
    spec.theta_o = 0.5;
    spec.n = 80;
    spec.seed = 21;
    const Dataset data = generate(spec);

    SUBCASE("one-point grid returns that point") {
        BaselineOptions opt;
        opt.grid = {0.25, 0.5, 0.5};
        CHECK(baseline_q3(data, Family::BoxCox, opt).theta_hat == 0.25);
        CHECK(baseline_q4(data, Family::BoxCox, opt).theta_hat == 0.25);
    }
    SUBCASE("full grid") {
        BaselineOptions opt;
        opt.grid = {-0.5, 1.5, 0.125};
        const GridSearchResult q3 = baseline_q3(data, Family::BoxCox, opt);
        const GridSearchResult q4 = baseline_q4(data, Family::BoxCox, opt);
        CHECK(q3.curve.size() == 17);
        CHECK(q4.curve.size() == 17);
        for (const auto& p : q3.curve) CHECK(p.value >= 0.0);
        opt.normalized = true;
        const GridSearchResult q3n = baseline_q3(data, Family::BoxCox, opt);
        bool differs = false;
        for (std::size_t k = 0; k < q3.curve.size(); ++k) differs |= q3.curve[k].value != q3n.curve[k].value;
        CHECK(differs);
    }
    SUBCASE("gaussian likelihood at theta = 1 reduces to the residual variance") {
        BaselineOptions opt;
        opt.grid = {1.0, 1.25, 0.5};
        const GridSearchResult q4 = baseline_q4(data, Family::BoxCox, opt);
        const Eigen::VectorXd z = forward(Family::BoxCox, 1.0, data.y);
        const AdditiveFit f = smooth_backfit(data.x, z, Bandwidths::scaled(0.3, 2, 80));
        const Eigen::VectorXd eps = z - predict_rows(f, data.x);
        REQUIRE(q4.curve.size() == 1);
        CHECK(q4.curve[0].value == doctest::Approx(-std::log(eps.squaredNorm() / 80)).epsilon(1e-9));
    }
    SUBCASE("instrument validation") {
        BaselineOptions opt;
        opt.instruments = Eigen::MatrixXd::Ones(5, 2);
        CHECK_THROWS_AS(baseline_q3(data, Family::BoxCox, opt), InvalidValue);
    }
}
