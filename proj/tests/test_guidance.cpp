#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "xattn/guidance.hpp"
#include "xattn/rng.hpp"

using namespace xattn;
using namespace xattn::guidance;
using xattn::attention::AttentionMode;

namespace {

NoisePrediction prediction(std::initializer_list<float> values, AttentionMode mode) {
    NoisePrediction p;
    p.epsilon = LatentGrid(1, 1, static_cast<int>(values.size()));
    std::copy(values.begin(), values.end(), p.epsilon.data.begin());
    p.source_mode = mode;
    return p;
}

} // namespace

TEST_CASE("alpha 0 returns the self prediction exactly") {
    const auto self = prediction({1.0f, 0.0f}, AttentionMode::SelfAttention);
    const auto cross = prediction({0.0f, 1.0f}, AttentionMode::CrossImageAppearance);
    const auto out = combine(self, cross, 0.0f);
    CHECK(out.epsilon.data[0] == self.epsilon.data[0]);
    CHECK(out.epsilon.data[1] == self.epsilon.data[1]);
}

TEST_CASE("alpha 1 returns the cross prediction exactly") {
    const auto self = prediction({1.0f, 0.0f}, AttentionMode::SelfAttention);
    const auto cross = prediction({0.0f, 1.0f}, AttentionMode::CrossImageAppearance);
    const auto out = combine(self, cross, 1.0f);
    CHECK(out.epsilon.data[0] == cross.epsilon.data[0]);
    CHECK(out.epsilon.data[1] == cross.epsilon.data[1]);
}

TEST_CASE("hand case at alpha 3.5") {
    const auto self = prediction({1.0f, 0.0f}, AttentionMode::SelfAttention);
    const auto cross = prediction({0.0f, 1.0f}, AttentionMode::CrossImageAppearance);
    const auto out = combine(self, cross, 3.5f);
    CHECK(out.epsilon.data[0] == doctest::Approx(-2.5).epsilon(1e-7));
    CHECK(out.epsilon.data[1] == doctest::Approx(3.5).epsilon(1e-7));
}

TEST_CASE("combining a prediction with itself is the identity for every alpha") {
    const CounterRng rng(1);
    NoisePrediction p;
    p.epsilon = LatentGrid(2, 3, 3);
    rng.fill_normal(p.epsilon.data, 0);
    auto cross = p;
    cross.source_mode = AttentionMode::CrossImageAppearance;
    for (float alpha : {0.0f, 0.3f, 1.0f, 3.5f, 10.0f}) {
        const auto out = combine(p, cross, alpha);
        for (size_t i = 0; i < p.epsilon.data.size(); ++i)
            CHECK(out.epsilon.data[i] == p.epsilon.data[i]);
    }
}

TEST_CASE("guided step extrapolates by alpha times the prediction gap") {
    const CounterRng rng(2);
    NoisePrediction self, cross;
    self.epsilon = LatentGrid(1, 4, 4);
    cross.epsilon = LatentGrid(1, 4, 4);
    rng.fill_normal(self.epsilon.data, 0);
    rng.fill_normal(cross.epsilon.data, 1);
    cross.source_mode = AttentionMode::CrossImageAppearance;

    for (float alpha : {0.5f, 2.0f, 3.5f}) {
        const auto out = combine(self, cross, alpha);
        double moved = 0.0, gap = 0.0;
        for (size_t i = 0; i < self.epsilon.data.size(); ++i) {
            const double d = out.epsilon.data[i] - self.epsilon.data[i];
            const double g = cross.epsilon.data[i] - self.epsilon.data[i];
            moved += d * d;
            gap += g * g;
        }
        CHECK(std::sqrt(moved) == doctest::Approx(alpha * std::sqrt(gap)).epsilon(1e-6));
    }
}

TEST_CASE("mode and shape preconditions") {
    const auto self = prediction({1.0f}, AttentionMode::SelfAttention);
    const auto cross = prediction({0.0f}, AttentionMode::CrossImageAppearance);
    CHECK_THROWS_AS(combine(cross, cross, 1.0f), ConfigError);
    CHECK_THROWS_AS(combine(self, self, 1.0f), ConfigError);
    const auto wide = prediction({0.0f, 1.0f}, AttentionMode::CrossImageAppearance);
    CHECK_THROWS_AS(combine(self, wide, 1.0f), InvalidShapeError);
}
