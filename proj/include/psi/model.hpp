#ifndef PSI_MODEL_HPP
#define PSI_MODEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psi/mask.hpp"
#include "psi/nn.hpp"
#include "psi/removal.hpp"

namespace psi {

enum class Architecture { menn, ffnn_baseline };

Architecture architecture_from_string(const std::string& s);
std::string to_string(Architecture a);

struct ModelConfig {
    std::size_t feature_count = 0;
    Architecture arch = Architecture::menn;
    Activation activation = Activation::elu;
    std::size_t embed_dim = 16;
    std::vector<std::size_t> menn_hidden = {64, 64};
    std::vector<std::size_t> menn2_hidden = {64};
    std::vector<std::size_t> f_hidden = {64};
    std::vector<std::size_t> sigma_hidden = {64};
    std::vector<std::size_t> ffnn_hidden = {128, 128};
    /// Baseline fill for removed features in the ffnn architecture; sits
    /// outside the support of standardized inputs.
    double ffnn_baseline_value = -5.0;
    double sigma_floor = 1e-6;
    std::uint64_t init_seed = 1;
    std::uint64_t mask_rounding_seed = 0;

    void validate() const;
};

/// A masked sub-network: dense layers whose weights are elementwise-gated by
/// the binary mask stack, so each feature keeps a private neuron band.
struct MaskedNet {
    MaskSpec spec;
    MaskStack stack;
    std::vector<DenseLayer> layers;
};

/// The trained artifact: per-feature embedding network, baseline table,
/// reducer, f head, a second masked net embedding the f outputs, sigma head,
/// global bias phi0 and global log-scale.
class PsiModel {
public:
    static PsiModel build(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    std::size_t feature_count() const { return config_.feature_count; }
    std::size_t embed_dim() const { return config_.embed_dim; }

    // --- tape forwards (training path) -------------------------------------

    /// f outputs (batch x D) for a batch with per-row removal masks given as a
    /// 0/1 matrix. Row-masked so that f(empty set) is exactly zero.
    Var forward_f(Tape& tape, const Matrix& inputs, const Matrix& removal);

    struct ForwardVars {
        Var f;     // batch x D
        Var sigma; // batch x D, strictly positive
    };

    /// f plus the heteroscedastic head. Gradients through sigma do not reach
    /// the embedding, baseline, reducer or f-head parameters: their inputs
    /// cross a gradient barrier.
    ForwardVars forward(Tape& tape, const Matrix& inputs, const Matrix& removal);

    // --- plain forwards (inference path; bit-identical to the tape path) ----

    Matrix forward_f(const Matrix& inputs, const Matrix& removal) const;

    struct ForwardValues {
        Matrix f;
        Matrix sigma;
    };
    ForwardValues forward(const Matrix& inputs, const Matrix& removal) const;

    /// Per-feature embeddings of one instance as a D x embed_dim matrix;
    /// row d depends only on x_d.
    Matrix embed_features(std::span<const double> x) const;

    std::vector<double> f_values(std::span<const double> x, const RemovalMask& mask) const;
    double f_sum(std::span<const double> x, const RemovalMask& mask) const;
    ForwardValues forward_one(std::span<const double> x, const RemovalMask& mask) const;

    // --- parameters ----------------------------------------------------------

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    Parameter& phi0() { return phi0_; }
    const Parameter& phi0() const { return phi0_; }
    Parameter& log_sigma0() { return log_sigma0_; }
    const Parameter& log_sigma0() const { return log_sigma0_; }
    double sigma0() const { return std::exp(log_sigma0_.value[0]); }

    Parameter& baseline() { return baseline_; }
    MaskedNet& menn1() { return menn1_; }
    MaskedNet& menn2() { return menn2_; }
    std::vector<DenseLayer>& f_head() { return f_head_; }
    std::vector<DenseLayer>& sigma_head() { return sigma_head_; }
    std::vector<DenseLayer>& ffnn() { return ffnn_; }
    DenseLayer& reducer() { return reducer_; }

    /// Expand a batch removal matrix (B x D) to embedding width (B x D*Dz).
    Matrix expand_removal(const Matrix& removal) const;

private:
    ModelConfig config_;
    MaskedNet menn1_;
    Parameter baseline_; // 1 x (D * embed_dim), row-major feature blocks
    DenseLayer reducer_; // (D * embed_dim) x embed_dim affine
    std::vector<DenseLayer> f_head_;
    MaskedNet menn2_;
    std::vector<DenseLayer> sigma_head_;
    std::vector<DenseLayer> ffnn_; // ffnn_baseline architecture trunk
    Parameter phi0_;
    Parameter log_sigma0_;

    Matrix ffnn_input(const Matrix& inputs, const Matrix& removal) const;
    void check_forward_args(const Matrix& inputs, const Matrix& removal) const;
};

/// 0/1 matrix with one row per mask.
Matrix removal_matrix(const std::vector<RemovalMask>& masks);

} // namespace psi

#endif
