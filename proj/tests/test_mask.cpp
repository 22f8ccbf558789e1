#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "psi/mask.hpp"
#include "psi/rng.hpp"

using namespace psi;

namespace {

// Block structure of the product: entry (d, l) nonzero exactly on feature d's
// embedding band, with one positive integer value per feature.
void check_block_structure(const MaskSpec& spec, const MaskStack& stack) {
    Matrix prod = mask_product(stack);
    const std::size_t D = spec.feature_count;
    const std::size_t e = spec.embed_dim;
    REQUIRE(prod.rows() == D);
    REQUIRE(prod.cols() == D * e);
    for (std::size_t d = 0; d < D; ++d) {
        double gamma = 0.0;
        for (std::size_t l = 0; l < D * e; ++l) {
            const bool inside = l >= d * e && l < (d + 1) * e;
            if (inside) {
                CHECK(prod(d, l) > 0.0);
                CHECK(prod(d, l) == std::floor(prod(d, l)));
                if (gamma == 0.0) gamma = prod(d, l);
                CHECK(prod(d, l) == gamma);
            } else {
                CHECK(prod(d, l) == 0.0);
            }
        }
    }
}

} // namespace

TEST_CASE("worked example: D=3, hidden (10,10,10), output width 6") {
    MaskSpec spec{3, {10, 10, 10}, 2, 0};
    MaskStack stack = build_mask_stack(spec);
    REQUIRE(stack.masks.size() == 4);
    REQUIRE(stack.masks[0].rows() == 3);
    REQUIRE(stack.masks[0].cols() == 10);
    REQUIRE(stack.masks[3].cols() == 6);

    // First mask: contiguous bands of 3, 3 and 4 columns.
    const double m1_expected[3][10] = {
        {1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
        {0, 0, 0, 1, 1, 1, 0, 0, 0, 0},
        {0, 0, 0, 0, 0, 0, 1, 1, 1, 1},
    };
    for (std::size_t d = 0; d < 3; ++d) {
        for (std::size_t l = 0; l < 10; ++l) {
            CHECK(stack.masks[0](d, l) == m1_expected[d][l]);
        }
    }

    // Product: block matrix with gamma = (27, 27, 64).
    Matrix prod = mask_product(stack);
    const double expected[3][6] = {
        {27, 27, 0, 0, 0, 0},
        {0, 0, 27, 27, 0, 0},
        {0, 0, 0, 0, 64, 64},
    };
    for (std::size_t d = 0; d < 3; ++d) {
        for (std::size_t l = 0; l < 6; ++l) {
            CHECK(prod(d, l) == expected[d][l]);
        }
    }
}

TEST_CASE("intermediate products repeat binarized rows") {
    MaskSpec spec{3, {10, 10, 10}, 2, 0};
    MaskStack stack = build_mask_stack(spec);
    Matrix p12 = matmul_serial(stack.masks[0], stack.masks[1]);
    const double expected12[3][10] = {
        {3, 3, 3, 0, 0, 0, 0, 0, 0, 0},
        {0, 0, 0, 3, 3, 3, 0, 0, 0, 0},
        {0, 0, 0, 0, 0, 0, 4, 4, 4, 4},
    };
    for (std::size_t d = 0; d < 3; ++d) {
        for (std::size_t l = 0; l < 10; ++l) {
            CHECK(p12(d, l) == expected12[d][l]);
        }
    }
    Matrix p13 = matmul_serial(p12, stack.masks[2]);
    CHECK(p13(0, 0) == 9);
    CHECK(p13(2, 6) == 16);
}

TEST_CASE("single feature owns every neuron") {
    MaskSpec spec{1, {5, 7}, 3, 0};
    MaskStack stack = build_mask_stack(spec);
    for (const Matrix& m : stack.masks) {
        for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] == 1.0);
    }
}

TEST_CASE("width below the feature count is a configuration error") {
    MaskSpec spec{4, {3}, 2, 0};
    CHECK_THROWS_AS(build_mask_stack(spec), ConfigError);
}

TEST_CASE("block structure holds over random specs") {
    Rng rng(17);
    for (int trial = 0; trial < 120; ++trial) {
        MaskSpec spec;
        spec.feature_count = 1 + static_cast<std::size_t>(rng.uniform_below(10));
        const std::size_t layers = 1 + static_cast<std::size_t>(rng.uniform_below(4));
        for (std::size_t k = 0; k < layers; ++k) {
            spec.hidden_widths.push_back(
                spec.feature_count + static_cast<std::size_t>(rng.uniform_below(20)));
        }
        spec.embed_dim = 1 + static_cast<std::size_t>(rng.uniform_below(6));
        spec.rounding_seed = rng.next_u64();
        MaskStack stack = build_mask_stack(spec);
        check_block_structure(spec, stack);

        // Every row of every mask keeps at least one connection.
        for (const Matrix& m : stack.masks) {
            for (std::size_t r = 0; r < m.rows(); ++r) {
                double row_sum = 0.0;
                for (std::size_t c = 0; c < m.cols(); ++c) row_sum += m(r, c);
                CHECK(row_sum > 0.0);
            }
        }
    }
}

TEST_CASE("tie rounding is reproducible under the seed") {
    // width/D = 6/4 = 1.5 is an exact tie.
    MaskSpec spec{4, {6, 6, 6}, 2, 42};
    MaskStack a = build_mask_stack(spec);
    MaskStack b = build_mask_stack(spec);
    REQUIRE(a.masks.size() == b.masks.size());
    for (std::size_t k = 0; k < a.masks.size(); ++k) {
        for (std::size_t i = 0; i < a.masks[k].size(); ++i) {
            CHECK(a.masks[k][i] == b.masks[k][i]);
        }
    }
    check_block_structure(spec, a);
}
