#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "cmerl/cme_model.hpp"
#include "cmerl/sketched_model.hpp"

using namespace cmerl;

namespace {

Transition make_transition(const Point& s, const Point& a, const Point& next, std::size_t episode,
                           std::size_t step, double reward = 0.0) {
    Transition tr;
    tr.state = s;
    tr.action_point = a;
    tr.next_state = next;
    tr.reward = reward;
    tr.episode = episode;
    tr.step = step;
    return tr;
}

// Continuous transitions on R^2 states with two one-hot actions.
std::vector<Transition> random_transitions(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Transition> out;
    for (std::size_t i = 0; i < n; ++i) {
        Point s(2), next(2);
        s << normal(rng), normal(rng);
        next << normal(rng), normal(rng);
        out.push_back(make_transition(s, one_hot(i % 2, 2), next, i / 4 + 1, i % 4 + 1));
    }
    return out;
}

// Dense reference: (K + lambda I)^{-1} k(q) by explicit inversion.
Eigen::VectorXd dense_alpha(const KernelSpec& spec, const std::vector<Point>& xs, const Point& q, double lambda) {
    const Eigen::MatrixXd k = gram_matrix(spec, xs);
    const Eigen::MatrixXd inv = (k + lambda * Eigen::MatrixXd::Identity(k.rows(), k.cols())).inverse();
    return inv * cross_kernel(spec, xs, q);
}

}  // namespace

TEST_CASE("weights, variance and prediction on tiny data") {
    const Point s = one_hot(0, 2);
    const Point a = one_hot(0, 1);
    const Point q = join(s, a);
    CmeModel model(KernelSpec::delta(), 1.0);
    CHECK(model.alpha_weights(q).size() == 0);
    CHECK(model.predictive_variance(q) == 1.0);
    CHECK(model.info_gain() == 0.0);
    CHECK(model.mean_embedding_prediction(q, Eigen::VectorXd(0)) == 0.0);

    model.append(make_transition(s, a, s, 1, 1));
    CHECK(model.alpha_weights(q)(0) == doctest::Approx(0.5));
    CHECK(model.predictive_variance(q) == doctest::Approx(0.5));
    CHECK(model.info_gain() == doctest::Approx(0.5 * std::log(2.0)));
    CHECK(model.mean_embedding_prediction(q, Eigen::VectorXd::Constant(1, 2.0)) == doctest::Approx(1.0));

    model.append(make_transition(s, a, s, 1, 2));
    const Eigen::VectorXd alpha = model.alpha_weights(q);
    CHECK(alpha(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(alpha(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(model.predictive_variance(q) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(model.mean_embedding_prediction(q, Eigen::VectorXd::Constant(2, 3.0)) == doctest::Approx(2.0));
    CHECK_THROWS_AS((void)model.mean_embedding_prediction(q, Eigen::VectorXd::Constant(3, 3.0)), Error);
    CHECK_THROWS_AS((void)model.alpha_weights(Point::Zero(5)), Error);
}

TEST_CASE("information gain of distinct one-hot points") {
    CmeModel model(KernelSpec::delta(), 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        model.append(make_transition(one_hot(i, 3), one_hot(0, 1), one_hot(0, 3), 1, i + 1));
    }
    CHECK(model.info_gain() == doctest::Approx(1.0397207708399179).epsilon(1e-14));
}

TEST_CASE("replay buffer ordering and validation") {
    CmeModel model(KernelSpec::delta(), 1.0);
    const Point s = one_hot(0, 2);
    const Point a = one_hot(0, 2);
    model.append(make_transition(s, a, s, 2, 1));
    CHECK_THROWS_AS(model.append(make_transition(s, a, s, 1, 3)), Error);
    CHECK_THROWS_AS(model.append(make_transition(s, a, s, 2, 1)), Error);
    CHECK_THROWS_AS(model.append(make_transition(s, a, s, 2, 2, 1.5)), Error);
    CHECK_THROWS_AS(model.append(make_transition(one_hot(0, 3), a, s, 2, 2)), Error);
    CHECK(model.size() == 1);
    CHECK(model.factor().size() == 1);
    model.append(make_transition(s, a, s, 2, 2));
    CHECK(model.size() == 2);
}

TEST_CASE("confidence width") {
    ConfidenceConfig cfg;
    CmeModel model(KernelSpec::squared_exponential(), 1.0);
    CHECK(beta(model, cfg, 1, 1, 0.1) == doctest::Approx(std::sqrt(2.0)));
    model.append(make_transition(one_hot(0, 1), one_hot(0, 1), one_hot(0, 1), 1, 1));
    CHECK(beta(model, cfg, 2, 1, 0.1) == doctest::Approx(27.920811023007072).epsilon(1e-13));
    CHECK(beta(model, cfg, 2, 2, 0.1) > beta(model, cfg, 2, 1, 0.1));
    CHECK(beta(model, cfg, 3, 1, 0.1) > beta(model, cfg, 2, 1, 0.1));
    CHECK_THROWS_AS((void)beta(model, cfg, 0, 1, 0.1), Error);
    CHECK_THROWS_AS((void)beta(model, cfg, 1, 1, 0.0), Error);

    ConfidenceConfig bad;
    bad.delta = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = ConfidenceConfig{};
    bad.lambda = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("variance clamp") {
    CHECK(clamp_variance(-5e-11) == 0.0);
    CHECK(clamp_variance(0.25) == 0.25);
    CHECK_THROWS_AS((void)clamp_variance(-1e-9), Error);
}

TEST_CASE("incremental model agrees with a from-scratch refit") {
    const KernelSpec spec = KernelSpec::squared_exponential(1.2);
    const auto data = random_transitions(20, 9);
    CmeModel model(spec, 0.7);
    std::vector<Point> inputs;
    double logdet_prev = 0.0;
    for (const auto& tr : data) {
        model.append(tr);
        inputs.push_back(tr.input());
        CHECK(model.log_det() >= logdet_prev - 1e-12);
        logdet_prev = model.log_det();
    }
    const auto queries = random_transitions(10, 10);
    for (const auto& q : queries) {
        const Eigen::VectorXd ref = dense_alpha(spec, inputs, q.input(), 0.7);
        CHECK((model.alpha_weights(q.input()) - ref).cwiseAbs().maxCoeff() < 1e-8);
    }
    // log det(I + K / lambda) from the factor.
    const double from_factor = model.factor().log_det() - 20.0 * std::log(0.7);
    CHECK(model.log_det() == doctest::Approx(from_factor).epsilon(1e-10));
    const Eigen::MatrixXd k = gram_matrix(spec, inputs);
    const double dense = (Eigen::MatrixXd::Identity(20, 20) + k / 0.7).determinant();
    CHECK(model.log_det() == doctest::Approx(std::log(dense)).epsilon(1e-10));
}

TEST_CASE("variance shrinks and the potential stays below the elliptical bound") {
    const KernelSpec spec = KernelSpec::matern(MaternNu::FiveHalves, 0.9);
    const auto data = random_transitions(60, 21);
    const auto queries = random_transitions(15, 22);
    CmeModel model(spec, 0.5);
    std::vector<double> prev;
    for (const auto& q : queries) prev.push_back(model.predictive_variance(q.input()));
    double manual = 0.0;
    for (const auto& tr : data) {
        manual += model.predictive_variance(tr.input()) / 0.5;
        model.append(tr);
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const double v = model.predictive_variance(queries[i].input());
            CHECK(v <= prev[i] + 1e-10);
            CHECK(v >= 0.0);
            prev[i] = v;
        }
    }
    CHECK(model.potential_sum() == doctest::Approx(manual).epsilon(1e-9));
    // sum lambda^{-1} sigma^2 <= 2 (1 + 1/lambda) * (1/2) log det, with k(x, x) = 1.
    CHECK(model.potential_sum() <= 2.0 * (1.0 + 1.0 / 0.5) * model.info_gain() + 1e-8);
}

TEST_CASE("refreshed query factors match fresh ones") {
    const KernelSpec spec = KernelSpec::squared_exponential();
    const auto data = random_transitions(30, 3);
    CmeModel model(spec, 1.0);
    const Point q = random_transitions(1, 99)[0].input();
    QueryFactor f = model.factor_query(q);
    for (std::size_t i = 0; i < data.size(); ++i) {
        model.append(data[i]);
        if (i % 7 == 0) model.refresh_query(f);
    }
    model.refresh_query(f);
    const QueryFactor fresh = model.factor_query(q);
    CHECK((f.u - fresh.u).norm() < 1e-12);
    CHECK(f.variance == doctest::Approx(fresh.variance).epsilon(1e-12));
    CHECK(f.fitted_size == model.size());
}

TEST_CASE("Nystrom sketch on the full dataset reproduces the exact model") {
    const KernelSpec spec = KernelSpec::squared_exponential(1.1);
    const auto data = random_transitions(25, 4);
    std::vector<Point> landmarks;
    for (const auto& tr : data) landmarks.push_back(tr.input());
    CmeModel exact(spec, 0.8);
    SketchedCmeModel sketched(FeatureSketch::nystrom(spec, landmarks), 0.8);
    for (const auto& tr : data) {
        exact.append(tr);
        sketched.append(tr);
    }
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(25, 0.0, 3.0);
    for (const auto& tr : data) {
        const Point q = tr.input();
        CHECK(sketched.mean_embedding_prediction(q, v) ==
              doctest::Approx(exact.mean_embedding_prediction(q, v)).epsilon(1e-8));
        CHECK(std::abs(sketched.predictive_variance(q) - exact.predictive_variance(q)) < 1e-8);
    }
    CHECK(sketched.log_det() == doctest::Approx(exact.log_det()).epsilon(1e-8));
}

TEST_CASE("random Fourier sketched model tracks the exact one") {
    const KernelSpec spec = KernelSpec::squared_exponential(1.0);
    const auto data = random_transitions(40, 8);
    CmeModel exact(spec, 1.0);
    SketchedCmeModel sketched(FeatureSketch::random_fourier(spec, 4, 4000, 17), 1.0);
    for (const auto& tr : data) {
        exact.append(tr);
        sketched.append(tr);
    }
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(40);
    for (const auto& q : random_transitions(10, 31)) {
        CHECK(std::abs(sketched.predictive_variance(q.input()) - exact.predictive_variance(q.input())) < 0.05);
        CHECK(std::abs(sketched.mean_embedding_prediction(q.input(), v) -
                       exact.mean_embedding_prediction(q.input(), v)) < 0.1);
    }
    CHECK(sketched.potential_sum() <= 2.0 * 2.0 * sketched.info_gain() + 1e-8);
}
