#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "psi/elbo.hpp"
#include "psi/io.hpp"
#include "psi/metrics.hpp"
#include "psi/shapley.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace psi;

namespace {

void ensure_writable(const std::string& path, bool force) {
    if (!force && fs::exists(path)) {
        throw ConfigError("refusing to overwrite existing file '" + path +
                          "' (use --force)");
    }
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw ConfigError("--out directory is required");
    fs::create_directories(dir);
}

std::string hash_line(std::uint64_t hash) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string("# config_hash=") + buf + "\n";
}

DatasetTabular dataset_from_config(const RunConfig& cfg) {
    if (!cfg.dataset_path.empty()) {
        return read_dataset_csv(cfg.dataset_path, cfg.task);
    }
    if (cfg.synth_class) return gen_synth_class(cfg.synth_n, cfg.data_seed);
    return gen_synth(cfg.synth_id, cfg.synth_n, cfg.data_seed);
}

struct SplitData {
    DatasetTabular standardized; // full dataset, standardized with train-fold stats
    Standardizer standardizer;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

SplitData standardize_with_folds(const DatasetTabular& data, std::size_t folds,
                                 std::size_t fold, std::uint64_t split_seed) {
    SplitData out;
    if (folds == 0) {
        out.train_rows.resize(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) out.train_rows[i] = i;
    } else {
        std::vector<FoldSplit> splits = kfold_split(data.n(), folds, split_seed);
        out.train_rows = splits[fold].train;
        out.test_rows = splits[fold].test;
    }
    out.standardizer = fit_standardizer(data, out.train_rows);
    out.standardized = data;
    out.standardizer.apply(out.standardized);
    return out;
}

int cmd_datagen(const std::string& synth, std::size_t n, std::uint64_t seed,
                const std::string& out_dir, bool force) {
    ensure_out_dir(out_dir);
    DatasetTabular data;
    if (synth == "class1") {
        data = gen_synth_class(n, seed);
    } else {
        data = gen_synth(std::stoi(synth), n, seed);
    }
    const std::uint64_t hash =
        fnv1a_hash("datagen synth=" + synth + " n=" + std::to_string(n) +
                   " seed=" + std::to_string(seed));
    const std::string data_path = out_dir + "/data.csv";
    const std::string latent_path = out_dir + "/latent.csv";
    ensure_writable(data_path, force);
    ensure_writable(latent_path, force);
    write_dataset_csv(data_path, data, hash);
    write_latent_csv(latent_path, data, hash);
    std::cout << "wrote " << data_path << " (" << data.n() << " rows) and " << latent_path
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
              const std::string& out_override, bool force) {
    RunConfig cfg = load_run_config(config_path);
    if (has_seed) cfg.train.seed = seed_override;
    const std::string out_dir = out_override.empty() ? "." : out_override;
    ensure_out_dir(out_dir);
    const std::string ckpt_path = out_dir + "/checkpoint.psick";
    const std::string trace_path = out_dir + "/trace.csv";
    ensure_writable(ckpt_path, force);
    ensure_writable(trace_path, force);

    DatasetTabular data = dataset_from_config(cfg);
    SplitData split = standardize_with_folds(data, cfg.folds, cfg.fold, cfg.split_seed);
    DatasetTabular train_data = select_rows(split.standardized, split.train_rows);

    ModelConfig model_cfg = cfg.model;
    model_cfg.feature_count = data.d();
    PsiModel model = PsiModel::build(model_cfg);

    TrainConfig train_cfg = cfg.train;
    train_cfg.task = cfg.task;
    train_cfg.beta = cfg.resolved_beta(data.d());

    std::ostringstream trace;
    trace << hash_line(cfg.config_hash);
    trace << "epoch,loss";
    for (std::size_t d = 0; d < data.d(); ++d) trace << ",mean_f" << (d + 1);
    trace << ",seconds\n";
    fit(model, train_data.features, train_data.target, train_cfg, &trace);

    CheckpointMeta meta;
    meta.task = cfg.task;
    meta.standardizer = split.standardizer;
    meta.train_seed = train_cfg.seed;
    meta.config_hash = cfg.config_hash;
    meta.folds = cfg.folds;
    meta.fold = cfg.fold;
    meta.split_seed = cfg.split_seed;

    write_text_file(trace_path, trace.str());
    save_checkpoint(ckpt_path, model, meta);
    std::cout << "wrote " << ckpt_path << " and " << trace_path << "\n";
    return 0;
}

std::vector<std::size_t> eval_rows(const LoadedCheckpoint& ckpt, const DatasetTabular& data,
                                   const std::string& split) {
    std::vector<std::size_t> rows;
    if (split == "all" || ckpt.meta.folds == 0) {
        rows.resize(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) rows[i] = i;
        return rows;
    }
    std::vector<FoldSplit> splits =
        kfold_split(data.n(), ckpt.meta.folds, ckpt.meta.split_seed);
    if (split == "test") return splits[ckpt.meta.fold].test;
    if (split == "train") return splits[ckpt.meta.fold].train;
    throw ConfigError("unknown --split value: " + split);
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& metrics_list, const std::string& split,
             const std::string& mask_file, double prf_z, std::uint64_t seed,
             std::size_t jdiv_samples, const std::string& out_dir, bool force) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    DatasetTabular data = read_dataset_csv(data_path, ckpt.meta.task);
    std::vector<std::size_t> rows = eval_rows(ckpt, data, split);
    DatasetTabular subset = select_rows(data, rows);
    ckpt.meta.standardizer.apply(subset);

    const std::size_t D = subset.d();
    Matrix full_mask(subset.n(), D, 1.0);
    PsiModel::ForwardValues fw = ckpt.model.forward(subset.features, full_mask);
    const double phi0 = ckpt.model.phi0().value[0];
    const double sigma0 = ckpt.model.sigma0();
    std::vector<double> mu(subset.n());
    for (std::size_t i = 0; i < subset.n(); ++i) {
        double m = phi0;
        for (std::size_t d = 0; d < D; ++d) m += fw.f(i, d);
        mu[i] = m;
    }

    ensure_out_dir(out_dir);
    const std::string metrics_path = out_dir + "/metrics.csv";
    ensure_writable(metrics_path, force);

    std::ostringstream out;
    out << hash_line(ckpt.meta.config_hash);
    out << "metric,value\n";
    std::istringstream metrics_in(metrics_list);
    std::string metric;
    while (std::getline(metrics_in, metric, ',')) {
        if (metric == "rmse") {
            if (ckpt.meta.task != Task::regression) {
                throw ConfigError("rmse requested on a classification checkpoint");
            }
            out << "rmse," << format_double(rmse(mu, subset.target)) << "\n";
        } else if (metric == "prauc") {
            if (ckpt.meta.task != Task::classification) {
                throw ConfigError("prauc requested on a regression checkpoint");
            }
            out << "prauc," << format_double(pr_auc(mu, subset.target)) << "\n";
        } else if (metric == "jdiv") {
            JDivergenceConfig jcfg;
            jcfg.seed = seed;
            jcfg.samples_per_side = jdiv_samples;
            out << "jdiv,"
                << format_double(j_divergence_protocol(ckpt.model, subset.features,
                                                       subset.target, jcfg))
                << "\n";
        } else if (metric == "prf") {
            if (mask_file.empty()) {
                throw ConfigError("prf metric needs --mask-file");
            }
            DatasetTabular masks_csv = read_dataset_csv(mask_file, Task::regression);
            if (masks_csv.n() != data.n() || masks_csv.d() + 1 != D + 1) {
                throw ConfigError("mask file shape does not match the dataset");
            }
            std::vector<std::vector<double>> att_std(subset.n());
            std::vector<std::vector<std::uint8_t>> masks(subset.n());
            for (std::size_t i = 0; i < subset.n(); ++i) {
                std::vector<double> x(D);
                for (std::size_t d = 0; d < D; ++d) x[d] = subset.features(i, d);
                AttributionReport rep =
                    attribute(ckpt.model, x, std::vector<double>{prf_z});
                att_std[i] = rep.per_z[0].att_std;
                masks[i].resize(D);
                for (std::size_t d = 0; d < D; ++d) {
                    masks[i][d] = masks_csv.features(rows[i], d) > 0.5 ? 1 : 0;
                }
            }
            PrfResult prf = attribution_prf(att_std, masks);
            out << "prf_precision," << format_double(prf.precision) << "\n";
            out << "prf_recall," << format_double(prf.recall) << "\n";
            out << "prf_f," << format_double(prf.f_measure) << "\n";
        } else {
            throw ConfigError("unknown metric: " + metric);
        }
    }
    write_text_file(metrics_path, out.str());
    std::cout << "wrote " << metrics_path << "\n";
    return 0;
}

int cmd_attribute(const std::string& ckpt_path, const std::string& data_path,
                  const std::string& z_csv, std::size_t max_rows, const std::string& out_dir,
                  bool force) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    DatasetTabular data = read_dataset_csv(data_path, ckpt.meta.task);
    ckpt.meta.standardizer.apply(data);
    std::vector<double> z_list;
    {
        std::istringstream zs(z_csv);
        std::string tok;
        while (std::getline(zs, tok, ',')) {
            if (!tok.empty()) z_list.push_back(parse_double(tok));
        }
    }
    if (z_list.empty()) throw ConfigError("--z list is empty");
    const std::size_t n = max_rows == 0 ? data.n() : std::min(max_rows, data.n());
    const std::size_t D = data.d();

    ensure_out_dir(out_dir);
    const std::string path = out_dir + "/attributions.csv";
    ensure_writable(path, force);
    std::ostringstream out;
    out << hash_line(ckpt.meta.config_hash);
    out << "instance,feature,z,f,sigma,att,att_std,rank\n";
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(D);
        for (std::size_t d = 0; d < D; ++d) x[d] = data.features(i, d);
        AttributionReport rep = attribute(ckpt.model, x, z_list);
        for (const AttributionEntry& entry : rep.per_z) {
            for (std::size_t d = 0; d < D; ++d) {
                out << i << ',' << (d + 1) << ',' << format_double(entry.z) << ','
                    << format_double(rep.f[d]) << ',' << format_double(rep.sigma[d]) << ','
                    << format_double(entry.att[d]) << ',' << format_double(entry.att_std[d])
                    << ',' << entry.rank[d] << '\n';
            }
        }
    }
    write_text_file(path, out.str());
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_shapley(const std::string& ckpt_path, const std::string& data_path,
                std::size_t max_rows, const std::string& out_dir, bool force) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    DatasetTabular data = read_dataset_csv(data_path, ckpt.meta.task);
    ckpt.meta.standardizer.apply(data);
    const std::size_t n = max_rows == 0 ? data.n() : std::min(max_rows, data.n());
    const std::size_t D = data.d();

    struct Row {
        ShapleyResult shapley;
        std::vector<double> f;
    };
    std::vector<Row> results(n);
    const long long N = static_cast<long long>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (max_threads() > 1)
#endif
    for (long long i = 0; i < N; ++i) {
        std::vector<double> x(D);
        for (std::size_t d = 0; d < D; ++d) x[d] = data.features(static_cast<std::size_t>(i), d);
        Row row;
        row.shapley = exact_shapley_all(ckpt.model, x);
        row.f = ckpt.model.f_values(x, RemovalMask::all_present(D));
        results[static_cast<std::size_t>(i)] = std::move(row);
    }

    ensure_out_dir(out_dir);
    const std::string path = out_dir + "/shapley.csv";
    ensure_writable(path, force);
    std::ostringstream out;
    out << hash_line(ckpt.meta.config_hash);
    out << "instance,feature,phi,f,gap,efficiency_residual\n";
    for (std::size_t i = 0; i < n; ++i) {
        const Row& row = results[i];
        double phi_sum = 0.0;
        for (double p : row.shapley.phi) phi_sum += p;
        const double residual = phi_sum - (row.shapley.f_full - row.shapley.f_empty);
        for (std::size_t d = 0; d < D; ++d) {
            out << i << ',' << (d + 1) << ',' << format_double(row.shapley.phi[d]) << ','
                << format_double(row.f[d]) << ','
                << format_double(row.shapley.phi[d] - row.f[d]) << ','
                << format_double(residual) << '\n';
        }
    }
    write_text_file(path, out.str());
    std::cout << "wrote " << path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic Shapley inference: train, evaluate and explain"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    bool force = false;
    int threads = 1;
    std::string out_dir;
    app.add_option("--seed", seed, "Random seed override")->group("Global");
    app.add_flag("--force", force, "Overwrite existing outputs")->group("Global");
    app.add_option("--threads", threads, "Worker thread cap")->group("Global");
    app.add_option("--out", out_dir, "Output directory")->group("Global");
    app.fallthrough();

    auto* datagen = app.add_subcommand("datagen", "Generate a synthetic dataset");
    std::string synth = "1";
    std::size_t n = kSynthDefaultN;
    datagen->add_option("--synth", synth, "Synthetic process id (1..5 or class1)");
    datagen->add_option("--n", n, "Number of rows");

    auto* train = app.add_subcommand("train", "Train a model from a config file");
    std::string config_path;
    train->add_option("--config", config_path, "Run configuration file")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    std::string ckpt_path, data_path, metrics_list = "rmse", split = "test", mask_file;
    double prf_z = 0.0;
    std::size_t jdiv_samples = 4096;
    eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    eval->add_option("--data", data_path, "Dataset CSV")->required();
    eval->add_option("--metrics", metrics_list, "Comma list: rmse,prauc,jdiv,prf");
    eval->add_option("--split", split, "Rows to evaluate: test, train or all");
    eval->add_option("--mask-file", mask_file, "Ground-truth mask CSV for prf");
    eval->add_option("--prf-z", prf_z, "z value for the prf metric");
    eval->add_option("--jdiv-samples", jdiv_samples, "Samples per side for jdiv");

    auto* attr = app.add_subcommand("attribute", "Write probabilistic attributions");
    std::string attr_ckpt, attr_data, z_csv = "0,2";
    std::size_t attr_rows = 0;
    attr->add_option("--checkpoint", attr_ckpt, "Checkpoint file")->required();
    attr->add_option("--data", attr_data, "Dataset CSV")->required();
    attr->add_option("--z", z_csv, "Comma list of z values");
    attr->add_option("--rows", attr_rows, "Limit to the first N rows (0 = all)");

    auto* shap = app.add_subcommand("shapley", "Exact Shapley oracle over a checkpoint");
    std::string shap_ckpt, shap_data;
    std::size_t shap_rows = 16;
    shap->add_option("--checkpoint", shap_ckpt, "Checkpoint file")->required();
    shap->add_option("--data", shap_data, "Dataset CSV")->required();
    shap->add_option("--rows", shap_rows, "Limit to the first N rows (0 = all)");

    CLI11_PARSE(app, argc, argv);
    set_max_threads(threads);

    try {
        if (datagen->parsed()) {
            return cmd_datagen(synth, n, seed, out_dir, force);
        }
        if (train->parsed()) {
            return cmd_train(config_path, seed, app.count("--seed") > 0, out_dir, force);
        }
        if (eval->parsed()) {
            return cmd_eval(ckpt_path, data_path, metrics_list, split, mask_file, prf_z,
                            seed, jdiv_samples, out_dir.empty() ? "." : out_dir, force);
        }
        if (attr->parsed()) {
            return cmd_attribute(attr_ckpt, attr_data, z_csv, attr_rows,
                                 out_dir.empty() ? "." : out_dir, force);
        }
        if (shap->parsed()) {
            return cmd_shapley(shap_ckpt, shap_data, shap_rows,
                               out_dir.empty() ? "." : out_dir, force);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
