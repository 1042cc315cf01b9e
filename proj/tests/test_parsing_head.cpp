#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>

#include "isp/common.hpp"
#include "isp/parsing_head.hpp"
#include "oracles.hpp"

using namespace isp;
using testutil::make_map;

namespace {

PartClassifier random_classifier(std::mt19937_64& g, std::size_t K, std::size_t c, bool bias) {
    std::normal_distribution<double> n(0.0, 0.7);
    auto clf = PartClassifier::zeros(K, c, bias);
    for (auto& v : clf.W) v = n(g);
    for (auto& v : clf.bias) v = n(g);
    return clf;
}

LabelMap random_labels(std::mt19937_64& g, const FeatureMap& m, std::size_t K) {
    LabelMap l{m.image_id, m.person_id, m.h, m.w, std::vector<std::uint8_t>(m.pixels())};
    for (auto& v : l.labels) {
        v = g() % 7 == 0 ? kUnlabeled : static_cast<std::uint8_t>(g() % K);
    }
    l.labels[0] = 0;
    return l;
}

ConfidenceMaps conf_from(std::size_t K, std::size_t h, std::size_t w, std::vector<double> probs) {
    ConfidenceMaps c;
    c.K = K;
    c.h = h;
    c.w = w;
    c.probs = std::move(probs);
    return c;
}

double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("softmax examples") {
    std::mt19937_64 g(1);
    const auto m = testutil::random_map(g, 3, 0, 5, 2, 3);
    auto conf = forward_confidences(PartClassifier::zeros(4, 5), m);
    CHECK(conf.image_id == 3);
    for (double p : conf.probs) CHECK(p == 0.25);

    auto clf = PartClassifier::zeros(2, 1);
    clf.W = {0.0, std::log(3.0)};
    conf = forward_confidences(clf, make_map(1, 1, 1, {1.f}));
    CHECK(conf.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(conf.at(1, 0) == doctest::Approx(0.75).epsilon(1e-12));

    CHECK_THROWS_AS(forward_confidences(PartClassifier::zeros(3, 4), m), ValidationError);
}

TEST_CASE("confidences sum to one and ignore a shared row shift") {
    std::mt19937_64 g(2);
    for (int t = 0; t < 40; ++t) {
        const std::size_t K = 2 + t % 6, c = 1 + t % 8;
        const auto m = testutil::random_map(g, 0, 0, c, 3, 4, 4.0);
        auto clf = random_classifier(g, K, c, t % 2 == 0);
        const auto a = forward_confidences(clf, m);
        for (std::size_t p = 0; p < m.pixels(); ++p) {
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                CHECK(a.at(k, p) >= 0.0);
                CHECK(a.at(k, p) <= 1.0);
                s += a.at(k, p);
            }
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
        std::normal_distribution<double> n(0.0, 3.0);
        std::vector<double> shift(c);
        for (auto& v : shift) v = n(g);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t d = 0; d < c; ++d) clf.W[k * c + d] += shift[d];
        }
        const auto b = forward_confidences(clf, m);
        for (std::size_t i = 0; i < a.probs.size(); ++i) CHECK(std::abs(a.probs[i] - b.probs[i]) < 1e-6);
    }
}

TEST_CASE("argmax ties go to the lower index") {
    const auto conf = conf_from(3, 1, 2, {0.4, 0.2, 0.4, 0.4, 0.2, 0.4});
    CHECK(conf.argmax(0) == 0);
    CHECK(conf.argmax(1) == 1);
    const auto pred = predict_labels(conf, 9);
    CHECK(pred.person_id == 9);
    CHECK(pred.labels == std::vector<std::uint8_t>{0, 1});
}

TEST_CASE("parsing loss examples") {
    const auto one_hot = conf_from(3, 1, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    LabelMap l{0, 0, 1, 3, {0, 1, 2}};
    CHECK(parsing_loss(one_hot, l) == 0.0);

    const auto uniform = conf_from(4, 2, 5, std::vector<double>(40, 0.25));
    LabelMap ten{0, 0, 2, 5, {0, 1, 2, 3, 0, 1, 2, 3, 0, 1}};
    CHECK(parsing_loss(uniform, ten) == doctest::Approx(10.0 * std::log(4.0)).epsilon(1e-12));
    CHECK(parsing_loss(uniform, ten, Reduction::Mean) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    ten.labels[3] = kUnlabeled;
    CHECK(parsing_loss(uniform, ten) == doctest::Approx(9.0 * std::log(4.0)).epsilon(1e-12));

    LabelMap none{0, 0, 2, 5, std::vector<std::uint8_t>(10, kUnlabeled)};
    CHECK_THROWS_AS(parsing_loss(uniform, none), DegenerateInputError);
    LabelMap wrong{0, 0, 1, 3, {0, 1, 2}};
    CHECK_THROWS_AS(parsing_loss(uniform, wrong), ValidationError);
}

TEST_CASE("parsing loss depends on the labels") {
    std::mt19937_64 g(3);
    const auto m = testutil::random_map(g, 0, 0, 3, 2, 4, 2.0);
    const auto clf = random_classifier(g, 3, 3, false);
    const auto conf = forward_confidences(clf, m);
    LabelMap a{0, 0, 2, 4, {0, 1, 2, 0, 1, 2, 0, 1}};
    LabelMap b{0, 0, 2, 4, {1, 2, 0, 1, 2, 0, 1, 2}};
    const double la = parsing_loss(conf, a), lb = parsing_loss(conf, b);
    CHECK(la != lb);
    CHECK(la == doctest::Approx(oracle::parsing_loss(clf, {m}, {a}, false)).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 g(4);
    const double eps = 1e-4;
    double worst = 0.0;
    for (int t = 0; t < 60; ++t) {
        const std::size_t c = 1 + g() % 8, K = 2 + g() % 4;
        const std::size_t images = 1 + g() % 3;
        const bool bias = t % 2 == 1;
        const bool mean = t % 3 != 0;
        const std::size_t h = 1 + g() % 4, w = 1 + g() % 4;
        std::vector<FeatureMap> maps;
        std::vector<LabelMap> labels;
        for (std::size_t i = 0; i < images; ++i) {
            maps.push_back(testutil::random_map(g, static_cast<std::uint32_t>(i), 0, c, h, w, 1.5));
            labels.push_back(random_labels(g, maps.back(), K));
        }
        const auto clf = random_classifier(g, K, c, bias);
        std::vector<const FeatureMap*> mp;
        std::vector<const LabelMap*> lp;
        for (std::size_t i = 0; i < images; ++i) {
            mp.push_back(&maps[i]);
            lp.push_back(&labels[i]);
        }
        const auto grad = parsing_loss_gradient(clf, mp, lp, mean ? Reduction::Mean : Reduction::Sum);
        CHECK(grad.loss == doctest::Approx(oracle::parsing_loss(clf, maps, labels, mean)).epsilon(1e-12));

        for (std::size_t i = 0; i < clf.W.size(); ++i) {
            auto plus = clf, minus = clf;
            plus.W[i] += eps;
            minus.W[i] -= eps;
            const double fd = (oracle::parsing_loss(plus, maps, labels, mean) -
                               oracle::parsing_loss(minus, maps, labels, mean)) /
                              (2 * eps);
            worst = std::max(worst, rel_err(grad.dW[i], fd));
        }
        for (std::size_t k = 0; k < clf.bias.size(); ++k) {
            auto plus = clf, minus = clf;
            plus.bias[k] += eps;
            minus.bias[k] -= eps;
            const double fd = (oracle::parsing_loss(plus, maps, labels, mean) -
                               oracle::parsing_loss(minus, maps, labels, mean)) /
                              (2 * eps);
            worst = std::max(worst, rel_err(grad.dbias[k], fd));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("training separates a linearly separable two class set") {
    // Class 1 pixels point along +e0, class 0 along -e0, with jitter.
    std::mt19937_64 g(5);
    std::normal_distribution<double> n(0.0, 0.2);
    FeatureMapSet set;
    std::vector<LabelMap> labels;
    for (std::uint32_t i = 0; i < 4; ++i) {
        std::vector<float> d;
        LabelMap l{i, 0, 4, 4, {}};
        for (int p = 0; p < 16; ++p) {
            const int cls = (p + static_cast<int>(i)) % 2;
            d.push_back(static_cast<float>((cls ? 1.0 : -1.0) + n(g)));
            d.push_back(static_cast<float>(n(g)));
            l.labels.push_back(static_cast<std::uint8_t>(cls));
        }
        set.maps.push_back(make_map(2, 4, 4, d, i, 0));
        labels.push_back(l);
    }
    const auto res = train_classifier(PartClassifier::zeros(2, 2), set, labels,
                                      LrSchedule::constant(1e-2, 200), 200, 0);
    REQUIRE(res.loss_history.size() == 200);
    const auto& fitted = res.classifier;
    std::vector<FeatureMap> maps(set.maps.begin(), set.maps.end());
    const double final_loss = oracle::parsing_loss(fitted, maps, labels, true);
    CHECK(final_loss < 0.1);

    // Plain gradient-descent logistic regression on the same pixels reaches
    // the same regime.
    double w0 = 0, w1 = 0, lr_loss = 0;
    for (int it = 0; it < 2000; ++it) {
        double g0 = 0, g1 = 0;
        lr_loss = 0;
        for (std::size_t i = 0; i < maps.size(); ++i) {
            for (std::size_t p = 0; p < 16; ++p) {
                const double x0 = maps[i].pixel(p)[0], x1 = maps[i].pixel(p)[1];
                const double y = labels[i].labels[p];
                const double pr = 1.0 / (1.0 + std::exp(-(w0 * x0 + w1 * x1)));
                g0 += (pr - y) * x0;
                g1 += (pr - y) * x1;
                lr_loss -= y * std::log(pr) + (1 - y) * std::log(1 - pr);
            }
        }
        w0 -= 0.05 * g0 / 64;
        w1 -= 0.05 * g1 / 64;
        lr_loss /= 64;
    }
    CHECK(lr_loss < 0.1);
}

TEST_CASE("loss decreases on a fixed full batch") {
    std::mt19937_64 g(6);
    FeatureMapSet set;
    std::vector<LabelMap> labels;
    for (std::uint32_t i = 0; i < 3; ++i) {
        set.maps.push_back(testutil::random_map(g, i, 0, 4, 3, 3));
        labels.push_back(random_labels(g, set.maps.back(), 3));
    }
    std::vector<FeatureMap> maps(set.maps.begin(), set.maps.end());
    const auto init = PartClassifier::zeros(3, 4);
    TrainOptions opts;
    opts.batch_size = 3;
    const auto res = train_classifier(init, set, labels, LrSchedule::constant(1e-3, 50), 50, 1, opts);
    CHECK(oracle::parsing_loss(res.classifier, maps, labels, true) <
          oracle::parsing_loss(init, maps, labels, true));
    CHECK(res.loss_history.back() < res.loss_history.front());
}

TEST_CASE("training preconditions and divergence") {
    std::mt19937_64 g(7);
    FeatureMapSet set;
    set.maps = {testutil::random_map(g, 0, 0, 2, 2, 2)};
    std::vector<LabelMap> labels{random_labels(g, set.maps[0], 2)};
    const auto clf = PartClassifier::zeros(2, 2);
    CHECK_THROWS_AS(train_classifier(clf, set, labels, LrSchedule::constant(1e-2, 5), 0, 0),
                    ValidationError);
    CHECK_THROWS_AS(train_classifier(PartClassifier::zeros(2, 3), set, labels,
                                     LrSchedule::constant(1e-2, 5), 1, 0),
                    ValidationError);
    try {
        train_classifier(clf, set, labels, LrSchedule::constant(1e308, 5), 5, 0);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() >= 1);
        CHECK(e.epoch() < 5);
    }
}

TEST_CASE("pooling examples") {
    std::mt19937_64 g(8);
    const auto m = testutil::random_map(g, 4, 2, 3, 2, 3);
    std::vector<double> fg(3, 0.0);
    for (std::size_t p = 0; p < 6; ++p) {
        for (std::size_t d = 0; d < 3; ++d) fg[d] += m.pixel(p)[d] / 6.0;
    }

    // All mass on part 2.
    std::vector<double> probs(4 * 6, 0.0);
    for (std::size_t p = 0; p < 6; ++p) probs[2 * 6 + p] = 1.0;
    auto d = pool_descriptor(conf_from(4, 2, 3, probs), m);
    CHECK(d.image_id == 4);
    CHECK(d.person_id == 2);
    CHECK(d.visibility == std::vector<std::uint8_t>{0, 1, 0});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(d.part(2)[i] == doctest::Approx(fg[i]).epsilon(1e-9));
        CHECK(d.fg_feat[i] == doctest::Approx(fg[i]).epsilon(1e-9));
        CHECK(d.global_feat[i] == doctest::Approx(fg[i]).epsilon(1e-9));
        CHECK(d.part(1)[i] == 0.0);
    }

    d = pool_descriptor(conf_from(4, 2, 3, std::vector<double>(24, 0.25)), m);
    CHECK(d.visibility == std::vector<std::uint8_t>{0, 0, 0});
    for (std::size_t k = 1; k <= 3; ++k) {
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(d.part(k)[i] == doctest::Approx(d.global_feat[i] / 4).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(pool_descriptor(PartClassifier::zeros(3, 2), m), ValidationError);
}

TEST_CASE("foreground feature is the sum of the part features") {
    std::mt19937_64 g(9);
    for (int t = 0; t < 40; ++t) {
        const std::size_t K = 2 + t % 6, c = 1 + t % 7;
        const auto m = testutil::random_map(g, 0, 0, c, 4, 3, 3.0);
        const auto d = pool_descriptor(random_classifier(g, K, c, t % 2 == 0), m);
        REQUIRE(d.parts == K - 1);
        for (std::size_t i = 0; i < c; ++i) {
            double s = 0.0;
            for (std::size_t k = 1; k < K; ++k) s += d.part(k)[i];
            CHECK(std::abs(s - d.fg_feat[i]) < 1e-6);
        }
    }
}

TEST_CASE("checkpoint round trip") {
    testutil::TempDir dir("ckpt");
    std::mt19937_64 g(10);
    const auto plain = random_classifier(g, 4, 3, false);
    save_classifier(plain, dir / "a.ispw");
    {
        std::ifstream in(dir / "a.ispw", std::ios::binary | std::ios::ate);
        CHECK(static_cast<std::size_t>(in.tellg()) == 4 + 3 * 4 + 12 * 4);
    }
    auto back = load_classifier(dir / "a.ispw");
    CHECK(back.K == 4);
    CHECK(back.c == 3);
    CHECK_FALSE(back.has_bias());
    for (std::size_t i = 0; i < 12; ++i) CHECK(back.W[i] == static_cast<double>(static_cast<float>(plain.W[i])));

    const auto biased = random_classifier(g, 3, 2, true);
    save_classifier(biased, dir / "b.ispw");
    back = load_classifier(dir / "b.ispw");
    REQUIRE(back.has_bias());
    for (std::size_t k = 0; k < 3; ++k) CHECK(back.bias[k] == static_cast<double>(static_cast<float>(biased.bias[k])));

    {
        std::ofstream out(dir / "bad.ispw", std::ios::binary);
        out << "ISPX";
    }
    CHECK_THROWS_AS(load_classifier(dir / "bad.ispw"), FormatError);
    CHECK_THROWS_AS(load_classifier(dir / "none.ispw"), IoError);
}
