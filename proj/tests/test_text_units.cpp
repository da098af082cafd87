#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "tmq/errors.hpp"
#include "tmq/text_format.hpp"
#include "tmq/units.hpp"

using namespace tmq;

TEST(TextFormat, FormatDoubleRoundTripsRandomBitPatterns) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 20000; ++i) {
        const std::uint64_t bits = rng();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        if (!std::isfinite(v)) continue;
        EXPECT_EQ(parse_double(format_double(v)), v) << format_double(v);
    }
}

TEST(TextFormat, FormatDoubleIsShortForSimpleValues) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(format_double(-0.5), "-0.5");
}

TEST(TextFormat, ParseRejectsGarbage) {
    EXPECT_THROW(parse_double(""), ConfigError);
    EXPECT_THROW(parse_double("1.0x"), ConfigError);
    EXPECT_THROW(parse_double("abc"), ConfigError);
    EXPECT_THROW(parse_int("3.5"), ConfigError);
    EXPECT_EQ(parse_int(" 42 "), 42);
}

TEST(TextFormat, TrimAndSplit) {
    EXPECT_EQ(trim("  a b \t"), "a b");
    const auto parts = split("a,b,,c", ',');
    ASSERT_EQ(parts.size(), 4u);
    EXPECT_EQ(parts[2], "");
    EXPECT_EQ(parts[3], "c");
}

TEST(Units, GaussTeslaConversion) {
    constexpr auto b = MagneticField::gauss(0.6);
    EXPECT_DOUBLE_EQ(b.in_tesla(), 0.6e-4);
    EXPECT_DOUBLE_EQ(b.in_gauss(), 0.6);
    EXPECT_LT(MagneticField::gauss(0.1), b);
    EXPECT_DOUBLE_EQ((b - MagneticField::gauss(0.1)).in_gauss(), 0.5);
}
