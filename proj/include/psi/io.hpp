#ifndef PSI_IO_HPP
#define PSI_IO_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "psi/datagen.hpp"
#include "psi/model.hpp"
#include "psi/train.hpp"

namespace psi {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

std::uint64_t fnv1a_hash(std::string_view text);

/// Dataset CSV: optional leading '#' comment lines, header x1..xD,y.
void write_dataset_csv(const std::string& path, const DatasetTabular& data,
                       std::uint64_t config_hash);
DatasetTabular read_dataset_csv(const std::string& path, Task task);

/// Latent attribution CSV: header phi1..phiD, one row of drawn values per
/// instance.
void write_latent_csv(const std::string& path, const DatasetTabular& data,
                      std::uint64_t config_hash);

/// Flat key = value run configuration with [data] / [model] / [train] / [eval]
/// sections. Unknown sections or keys are rejected.
struct RunConfig {
    // [data]
    std::string dataset_path;
    int synth_id = 0; // 1..5 when generating synthetic data
    bool synth_class = false;
    std::size_t synth_n = kSynthDefaultN;
    std::uint64_t data_seed = 0;
    Task task = Task::regression;
    std::size_t folds = 5;
    std::size_t fold = 0;
    std::uint64_t split_seed = 0;

    // [model] (feature_count is resolved from the data at train time)
    ModelConfig model;

    // [train]
    TrainConfig train;
    bool has_beta_prime = false;
    double beta_prime = 0.0;

    // [eval]
    std::vector<double> z_list = {0.0, 2.0};
    std::size_t jdiv_samples = 4096;

    std::uint64_t config_hash = 0;

    /// beta, or 2 * beta_prime / D when beta_prime was given.
    double resolved_beta(std::size_t d_count) const;
    void validate() const;
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

struct CheckpointMeta {
    Task task = Task::regression;
    Standardizer standardizer;
    std::uint64_t train_seed = 0;
    std::uint64_t config_hash = 0;
    std::size_t folds = 0; // 0 = trained on all rows
    std::size_t fold = 0;
    std::uint64_t split_seed = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Self-describing container: magic + version, a JSON header (model config,
/// task, standardizer, provenance, parameter manifest) and a raw float64
/// blob. Load-then-save is byte-identical; version mismatches are refused.
void save_checkpoint(const std::string& path, const PsiModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    PsiModel model;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace psi

#endif
