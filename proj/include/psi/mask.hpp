#ifndef PSI_MASK_HPP
#define PSI_MASK_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "psi/matrix.hpp"

namespace psi {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Layout of a masked embedding stack: D inputs, hidden widths, and a final
/// layer of exactly feature_count * embed_dim neurons (embed_dim per feature).
struct MaskSpec {
    std::size_t feature_count = 0;
    std::vector<std::size_t> hidden_widths;
    std::size_t embed_dim = 1;
    /// Seed for the tie-break when a width is exactly halfway between two
    /// band sizes; fixed seed keeps the stack reproducible.
    std::uint64_t rounding_seed = 0;

    std::size_t layer_count() const { return hidden_widths.size() + 1; }
    std::size_t output_width() const { return feature_count * embed_dim; }
    std::size_t width_of(std::size_t k) const {
        return k < hidden_widths.size() ? hidden_widths[k] : output_width();
    }
    void validate() const;
};

/// Binary weight masks M_1..M_K plus, per layer, the contiguous column band
/// [begin, end) owned by each feature.
struct MaskStack {
    std::vector<Matrix> masks;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> bands;

    std::size_t layer_count() const { return masks.size(); }
};

/// Build the mask stack: the first mask assigns each feature a contiguous
/// column band; each later mask connects a neuron to a column exactly when
/// both belong to the same feature. The resulting product M_1*...*M_K is
/// block diagonal with embed_dim columns per feature.
MaskStack build_mask_stack(const MaskSpec& spec);

/// Product M_1*...*M_K (D x D*embed_dim), used by the block-structure checks.
Matrix mask_product(const MaskStack& stack);

} // namespace psi

#endif
