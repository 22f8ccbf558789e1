#ifndef PSI_REMOVAL_HPP
#define PSI_REMOVAL_HPP

#include <cstdint>
#include <vector>

namespace psi {

/// Per-instance feature removal indicator: 1 = feature present, 0 = removed
/// (its embedding is replaced by the learned baseline and its output zeroed).
struct RemovalMask {
    std::vector<std::uint8_t> bits;

    RemovalMask() = default;
    explicit RemovalMask(std::size_t d, bool present = true)
        : bits(d, present ? std::uint8_t{1} : std::uint8_t{0}) {}

    static RemovalMask all_present(std::size_t d) { return RemovalMask(d, true); }
    static RemovalMask none_present(std::size_t d) { return RemovalMask(d, false); }

    std::size_t size() const { return bits.size(); }
    bool present(std::size_t d) const { return bits[d] != 0; }
    void set(std::size_t d, bool present) { bits[d] = present ? 1 : 0; }

    std::size_t retained_count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }

    std::vector<std::size_t> retained_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t d = 0; d < bits.size(); ++d) {
            if (bits[d]) out.push_back(d);
        }
        return out;
    }

    bool operator==(const RemovalMask&) const = default;
};

} // namespace psi

#endif
