#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "reftraj/core.hpp"
#include "reftraj/csv.hpp"
#include "reftraj/geo.hpp"
#include "reftraj/hash.hpp"
#include "reftraj/rng.hpp"
#include "reftraj/similarity.hpp"

using namespace reftraj;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected reftraj::Error";
    return ErrorCode::InvalidValue;
}

}  // namespace

TEST(Embedding, ZeroVectorIsValid) {
    const std::vector<double> zeros(64, 0.0);
    const auto e = validate_embedding(zeros, 64);
    EXPECT_EQ(e.size(), 64u);
    EXPECT_EQ(norm(e.values()), 0.0);
}

TEST(Embedding, WrongDimension) {
    const std::vector<double> v(63, 0.1);
    EXPECT_EQ(code_of([&] { validate_embedding(v, 64); }), ErrorCode::WrongDimension);
}

TEST(Embedding, NonFinite) {
    std::vector<double> v(64, 0.0);
    v[0] = 1.0;
    v[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(code_of([&] { validate_embedding(v, 64); }), ErrorCode::NonFinite);
    v[1] = std::numeric_limits<double>::infinity();
    EXPECT_EQ(code_of([&] { validate_embedding(v, 64); }), ErrorCode::NonFinite);
}

TEST(Embedding, MeanOf) {
    const EmbeddingVector a({1.0, 2.0});
    const EmbeddingVector b({3.0, 6.0});
    const std::vector<const EmbeddingVector*> members{&a, &b};
    EXPECT_EQ(mean_of(members), EmbeddingVector({2.0, 4.0}));
}

TEST(Lulc, ParseNamesAndOther) {
    EXPECT_EQ(LulcClass::parse("SugarCane"), LulcClass(LulcKind::SugarCane));
    EXPECT_EQ(LulcClass::parse("Sugar Cane"), LulcClass(LulcKind::SugarCane));
    EXPECT_EQ(LulcClass::parse("Other(99)"), LulcClass::other(99));
    EXPECT_EQ(LulcClass::other(99).name(), "Other(99)");
    EXPECT_FALSE(LulcClass::parse("Tundra"));
    EXPECT_NE(LulcClass::other(1), LulcClass::other(2));
}

TEST(Lulc, CodeTableIsBijective) {
    auto t = LulcCodeTable::mapbiomas_default();
    EXPECT_EQ(t.lookup(15).first, LulcClass(LulcKind::Pasture));
    EXPECT_TRUE(t.lookup(15).second);
    const auto [cls, mapped] = t.lookup(99);
    EXPECT_FALSE(mapped);
    EXPECT_EQ(cls, LulcClass::other(99));
    EXPECT_EQ(t.code_of(LulcKind::SecondaryForest), 302);
    EXPECT_EQ(code_of([&] { t.add(15, LulcKind::Urban); }), ErrorCode::DuplicateKey);
    EXPECT_EQ(code_of([&] { t.add(999, LulcKind::Pasture); }), ErrorCode::DuplicateKey);
}

TEST(Strategy, ParseLabels) {
    EXPECT_EQ(parse_strategy("Full-Area Planting"), Strategy::FullAreaPlanting);
    EXPECT_EQ(parse_strategy(""), Strategy::NotIdentified);
    EXPECT_EQ(parse_strategy("  "), Strategy::NotIdentified);
    EXPECT_EQ(parse_strategy("Agroforestry Systems"), Strategy::Agroforestry);
    EXPECT_EQ(code_of([] { parse_strategy("Coppicing"); }), ErrorCode::UnknownStrategy);
    for (auto s : kAllStrategies) {
        EXPECT_EQ(parse_strategy(label(s)), s);
        EXPECT_EQ(parse_strategy(identifier(s)), s);
    }
}

TEST(Stability, ChangingRequiresDistinctClasses) {
    EXPECT_EQ(code_of([] { Stability::changing(LulcKind::Pasture, LulcKind::Pasture); }),
              ErrorCode::InvalidArgument);
    EXPECT_TRUE(Stability::changing(LulcKind::Pasture, LulcKind::Urban).is_changing());
}

TEST(Validation, CovariatesAndSpectral) {
    EXPECT_EQ(code_of([] { validate(SpectralValues{1.5, 0.2}); }), ErrorCode::InvalidValue);
    EXPECT_NO_THROW(validate(SpectralValues{0.5, 0.2}));
    EXPECT_EQ(code_of([] { validate_coordinates(200.0, 0.0); }), ErrorCode::InvalidValue);
    EXPECT_EQ(code_of([] { validate_coordinates(0.0, -91.0); }), ErrorCode::InvalidValue);
}

TEST(Similarity, AnalyticCases) {
    const EmbeddingVector a({1.0, 0.0, 0.0});
    const EmbeddingVector b({0.0, 1.0, 0.0});
    const EmbeddingVector c({1.0, 1.0, 0.0});
    EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(c, c), 1.0);
    EXPECT_EQ(cosine_similarity(a, b), 0.0);
    EXPECT_NEAR(cosine_similarity(c, a), 0.7071067811865475, 1e-15);
    EXPECT_EQ(code_of([&] { cosine_similarity(a, EmbeddingVector({0.0, 0.0, 0.0})); }), ErrorCode::ZeroVector);
    EXPECT_EQ(code_of([&] { cosine_similarity(a, EmbeddingVector({1.0, 0.0})); }), ErrorCode::WrongDimension);
}

TEST(Similarity, ScaleInvariantSymmetricBounded) {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> a(64), b(64);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        const double lambda = rng.uniform(0.01, 100.0);
        const double mu = rng.uniform(0.01, 100.0);
        auto sa = a;
        auto sb = b;
        for (auto& x : sa) x *= lambda;
        for (auto& x : sb) x *= mu;
        const double s = cosine_similarity(a, b);
        EXPECT_NEAR(cosine_similarity(sa, sb), s, 1e-12);
        EXPECT_EQ(cosine_similarity(b, a), s);
        EXPECT_LE(std::abs(s), 1.0 + 1e-12);
    }
}

TEST(Geo, HaversineDegreeOfLatitude) {
    // One degree of arc on the mean-radius sphere is R * pi / 180.
    const double per_degree = kEarthRadiusKm * std::acos(-1.0) / 180.0;
    EXPECT_NEAR(haversine_km(0, 0, 0, 1), per_degree, 1e-9);
    EXPECT_NEAR(haversine_km(0, 0, 0, 0.4), 0.4 * per_degree, 1e-9);
    EXPECT_NEAR(haversine_km(0, 0, 0, 0.4), 44.5, 0.05);
    EXPECT_EQ(haversine_km(-47.1, -22.3, -47.1, -22.3), 0.0);
    EXPECT_DOUBLE_EQ(haversine_km(10, 20, 30, 40), haversine_km(30, 40, 10, 20));
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        differs |= x != c.next_u64();
    }
    EXPECT_TRUE(differs);
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}

TEST(Rng, BelowAndUniformRanges) {
    Rng rng(5);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        ASSERT_LT(v, 7u);
        ++counts[v];
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
    for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Csv, SplitQuotedFields) {
    const auto f = csv::split_record(R"(a,"b,c","d ""e""",)");
    ASSERT_EQ(f.size(), 4u);
    EXPECT_EQ(f[1], "b,c");
    EXPECT_EQ(f[2], "d \"e\"");
    EXPECT_EQ(f[3], "");
    EXPECT_EQ(csv::escape("b,c"), "\"b,c\"");
}

TEST(Csv, FormatDoubleRoundTrips) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
        EXPECT_EQ(csv::parse_double(csv::format_double(v), 1, "v"), v);
    }
    EXPECT_EQ(csv::format_double(0.1), "0.1");
    EXPECT_EQ(code_of([] { csv::parse_double("abc", 7, "x"); }), ErrorCode::ParseError);
}

TEST(Hash, StableAndSensitive) {
    EXPECT_EQ(Fnv1a{}.text("abc").value(), Fnv1a{}.text("abc").value());
    EXPECT_NE(Fnv1a{}.text("abc").value(), Fnv1a{}.text("abd").value());
    // FNV-1a 64 of the empty input is the offset basis.
    EXPECT_EQ(Fnv1a{}.value(), 0xcbf29ce484222325ULL);
}
