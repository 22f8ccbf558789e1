#include "psi/mask.hpp"

#include <cmath>
#include <string>

#include "psi/rng.hpp"

namespace psi {

void MaskSpec::validate() const {
    if (feature_count == 0) throw ConfigError("mask spec: feature count must be positive");
    if (embed_dim == 0) throw ConfigError("mask spec: embed dim must be positive");
    for (std::size_t w : hidden_widths) {
        if (w < feature_count) {
            throw ConfigError("mask spec: layer width " + std::to_string(w) +
                              " is below the feature count " + std::to_string(feature_count));
        }
    }
}

namespace {

// Nearest-integer band size; exact .5 ties round up or down per the seeded
// stream. The last feature absorbs the remainder, so the size is clamped to
// leave it at least one column.
std::size_t band_size(std::size_t width, std::size_t d_count, Rng& tie_rng) {
    if (d_count == 1) return width;
    const double ratio = static_cast<double>(width) / static_cast<double>(d_count);
    const double fl = std::floor(ratio);
    double rounded;
    if (ratio - fl == 0.5) {
        rounded = tie_rng.uniform() < 0.5 ? fl : fl + 1.0;
    } else {
        rounded = std::floor(ratio + 0.5);
    }
    auto e = static_cast<std::size_t>(rounded);
    if (e < 1) e = 1;
    const std::size_t max_e = (width - 1) / (d_count - 1);
    if (e > max_e) e = max_e;
    return e;
}

std::vector<std::pair<std::size_t, std::size_t>> layer_bands(std::size_t width,
                                                             std::size_t d_count,
                                                             std::size_t band) {
    std::vector<std::pair<std::size_t, std::size_t>> bands(d_count);
    for (std::size_t d = 0; d < d_count; ++d) {
        const std::size_t begin = d * band;
        const std::size_t end = d + 1 == d_count ? width : (d + 1) * band;
        bands[d] = {begin, end};
    }
    return bands;
}

} // namespace

MaskStack build_mask_stack(const MaskSpec& spec) {
    spec.validate();
    const std::size_t D = spec.feature_count;
    Rng tie_rng(spec.rounding_seed);

    MaskStack stack;
    stack.masks.reserve(spec.layer_count());
    stack.bands.reserve(spec.layer_count());

    // owner[j] = feature owning neuron j of the previous layer.
    std::vector<std::size_t> owner(D);
    for (std::size_t d = 0; d < D; ++d) owner[d] = d;

    for (std::size_t k = 0; k < spec.layer_count(); ++k) {
        const std::size_t width = spec.width_of(k);
        const std::size_t band =
            k + 1 == spec.layer_count() ? spec.embed_dim : band_size(width, D, tie_rng);
        auto bands = layer_bands(width, D, band);

        Matrix mask(owner.size(), width, 0.0);
        std::vector<std::size_t> next_owner(width);
        for (std::size_t d = 0; d < D; ++d) {
            for (std::size_t l = bands[d].first; l < bands[d].second; ++l) {
                next_owner[l] = d;
                for (std::size_t j = 0; j < owner.size(); ++j) {
                    if (owner[j] == d) mask(j, l) = 1.0;
                }
            }
        }
        stack.masks.push_back(std::move(mask));
        stack.bands.push_back(std::move(bands));
        owner = std::move(next_owner);
    }
    return stack;
}

Matrix mask_product(const MaskStack& stack) {
    Matrix prod = stack.masks.front();
    for (std::size_t k = 1; k < stack.masks.size(); ++k) {
        prod = matmul_serial(prod, stack.masks[k]);
    }
    return prod;
}

} // namespace psi
