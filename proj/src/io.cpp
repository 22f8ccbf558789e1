#include "psi/io.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace psi {

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ConfigError("could not parse number: '" + std::string(text) + "'");
    }
    return v;
}

std::uint64_t fnv1a_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
    if (!out) throw ConfigError("write failed: " + path);
}

namespace {

std::string hash_comment(std::uint64_t hash) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string("# config_hash=") + buf + "\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

} // namespace

void write_dataset_csv(const std::string& path, const DatasetTabular& data,
                       std::uint64_t config_hash) {
    std::ostringstream out;
    out << hash_comment(config_hash);
    for (std::size_t d = 0; d < data.d(); ++d) out << 'x' << (d + 1) << ',';
    out << "y\n";
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t d = 0; d < data.d(); ++d) {
            out << format_double(data.features(i, d)) << ',';
        }
        out << format_double(data.target[i]) << '\n';
    }
    write_text_file(path, out.str());
}

void write_latent_csv(const std::string& path, const DatasetTabular& data,
                      std::uint64_t config_hash) {
    if (!data.has_latent()) throw ConfigError("dataset has no latent record to write");
    std::ostringstream out;
    out << hash_comment(config_hash);
    for (std::size_t d = 0; d < data.d(); ++d) {
        out << "phi" << (d + 1) << (d + 1 < data.d() ? "," : "\n");
    }
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t d = 0; d < data.d(); ++d) {
            out << format_double(data.latent_draw(i, d)) << (d + 1 < data.d() ? "," : "\n");
        }
    }
    write_text_file(path, out.str());
}

DatasetTabular read_dataset_csv(const std::string& path, Task task) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    std::string header;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') continue;
        header = trim(line);
        break;
    }
    if (header.empty()) throw ConfigError("dataset has no header: " + path);
    std::vector<std::string> cols = split(header, ',');
    if (cols.size() < 2 || trim(cols.back()) != "y") {
        throw ConfigError("dataset header must be x1..xD,y: " + path);
    }
    const std::size_t D = cols.size() - 1;
    for (std::size_t d = 0; d < D; ++d) {
        if (trim(cols[d]) != "x" + std::to_string(d + 1)) {
            throw ConfigError("dataset header column " + std::to_string(d + 1) +
                              " must be x" + std::to_string(d + 1) + ": " + path);
        }
    }

    std::vector<double> flat;
    std::vector<double> targets;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> parts = split(t, ',');
        if (parts.size() != D + 1) {
            throw ConfigError("dataset row has " + std::to_string(parts.size()) +
                              " columns, expected " + std::to_string(D + 1));
        }
        for (std::size_t d = 0; d < D; ++d) flat.push_back(parse_double(trim(parts[d])));
        targets.push_back(parse_double(trim(parts[D])));
    }

    DatasetTabular data;
    data.task = task;
    data.features = Matrix(targets.size(), D);
    std::memcpy(data.features.data(), flat.data(), flat.size() * sizeof(double));
    data.target = std::move(targets);
    data.validate();
    return data;
}

double RunConfig::resolved_beta(std::size_t d_count) const {
    if (has_beta_prime) return 2.0 * beta_prime / static_cast<double>(d_count);
    return train.beta;
}

void RunConfig::validate() const {
    if (dataset_path.empty() && synth_id == 0 && !synth_class) {
        throw ConfigError("config: [data] needs either path or synth");
    }
    if (!dataset_path.empty() && (synth_id != 0 || synth_class)) {
        throw ConfigError("config: [data] path and synth are mutually exclusive");
    }
    if (folds != 0 && folds < 2) throw ConfigError("config: folds must be 0 or >= 2");
    if (folds != 0 && fold >= folds) throw ConfigError("config: fold index out of range");
    if (has_beta_prime && train.beta != 0.0) {
        throw ConfigError("config: give beta or beta_prime, not both");
    }
}

namespace {

std::vector<std::size_t> parse_size_list(const std::string& v) {
    std::vector<std::size_t> out;
    for (const std::string& part : split(v, ',')) {
        const std::string t = trim(part);
        if (t.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(t)));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& v) {
    std::vector<double> out;
    for (const std::string& part : split(v, ',')) {
        const std::string t = trim(part);
        if (t.empty()) continue;
        out.push_back(parse_double(t));
    }
    return out;
}

std::uint64_t parse_u64(const std::string& v) { return std::stoull(v); }

} // namespace

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig cfg;
    cfg.config_hash = fnv1a_hash(text);

    std::istringstream in(text);
    std::string line;
    std::string section;
    bool synth_given = false;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (section != "data" && section != "model" && section != "train" &&
                section != "eval") {
                throw ConfigError("config: unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: expected key = value, got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("config: key '" + key + "' outside any section");
        }

        if (section == "data") {
            if (key == "path") {
                cfg.dataset_path = value;
            } else if (key == "synth") {
                synth_given = true;
                if (value == "class1") {
                    cfg.synth_class = true;
                    cfg.task = Task::classification;
                } else {
                    cfg.synth_id = std::stoi(value);
                }
            } else if (key == "n") {
                cfg.synth_n = parse_u64(value);
            } else if (key == "data_seed") {
                cfg.data_seed = parse_u64(value);
            } else if (key == "task") {
                cfg.task = task_from_string(value);
            } else if (key == "folds") {
                cfg.folds = parse_u64(value);
            } else if (key == "fold") {
                cfg.fold = parse_u64(value);
            } else if (key == "split_seed") {
                cfg.split_seed = parse_u64(value);
            } else {
                throw ConfigError("config: unknown key '" + key + "' in [data]");
            }
        } else if (section == "model") {
            if (key == "arch") {
                cfg.model.arch = architecture_from_string(value);
            } else if (key == "activation") {
                cfg.model.activation = activation_from_string(value);
            } else if (key == "embed_dim") {
                cfg.model.embed_dim = parse_u64(value);
            } else if (key == "menn_hidden") {
                cfg.model.menn_hidden = parse_size_list(value);
            } else if (key == "menn2_hidden") {
                cfg.model.menn2_hidden = parse_size_list(value);
            } else if (key == "f_hidden") {
                cfg.model.f_hidden = parse_size_list(value);
            } else if (key == "sigma_hidden") {
                cfg.model.sigma_hidden = parse_size_list(value);
            } else if (key == "ffnn_hidden") {
                cfg.model.ffnn_hidden = parse_size_list(value);
            } else if (key == "ffnn_baseline") {
                cfg.model.ffnn_baseline_value = parse_double(value);
            } else if (key == "sigma_floor") {
                cfg.model.sigma_floor = parse_double(value);
            } else if (key == "init_seed") {
                cfg.model.init_seed = parse_u64(value);
            } else if (key == "mask_rounding_seed") {
                cfg.model.mask_rounding_seed = parse_u64(value);
            } else {
                throw ConfigError("config: unknown key '" + key + "' in [model]");
            }
        } else if (section == "train") {
            if (key == "batch_size") {
                cfg.train.batch_size = parse_u64(value);
            } else if (key == "removal") {
                cfg.train.removal_mode = removal_mode_from_string(value);
            } else if (key == "p") {
                cfg.train.removal_p = parse_double(value);
            } else if (key == "beta") {
                cfg.train.beta = parse_double(value);
            } else if (key == "beta_prime") {
                cfg.has_beta_prime = true;
                cfg.beta_prime = parse_double(value);
            } else if (key == "epochs") {
                cfg.train.epochs = parse_u64(value);
            } else if (key == "optimizer") {
                cfg.train.optimizer = optimizer_kind_from_string(value);
            } else if (key == "learning_rate") {
                cfg.train.learning_rate = parse_double(value);
            } else if (key == "weight_decay") {
                cfg.train.weight_decay = parse_double(value);
            } else if (key == "seed") {
                cfg.train.seed = parse_u64(value);
            } else if (key == "eval_subsample") {
                cfg.train.eval_subsample = parse_u64(value);
            } else if (key == "grad_clip_norm") {
                cfg.train.grad_clip_norm = parse_double(value);
            } else {
                throw ConfigError("config: unknown key '" + key + "' in [train]");
            }
        } else if (section == "eval") {
            if (key == "z_list") {
                cfg.z_list = parse_double_list(value);
            } else if (key == "jdiv_samples") {
                cfg.jdiv_samples = parse_u64(value);
            } else {
                throw ConfigError("config: unknown key '" + key + "' in [eval]");
            }
        }
    }
    if (!synth_given && cfg.dataset_path.empty()) {
        throw ConfigError("config: [data] needs either path or synth");
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config_text(read_text_file(path));
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json model_config_to_json(const ModelConfig& c) {
    ordered_json j;
    j["feature_count"] = c.feature_count;
    j["arch"] = to_string(c.arch);
    j["activation"] = to_string(c.activation);
    j["embed_dim"] = c.embed_dim;
    j["menn_hidden"] = c.menn_hidden;
    j["menn2_hidden"] = c.menn2_hidden;
    j["f_hidden"] = c.f_hidden;
    j["sigma_hidden"] = c.sigma_hidden;
    j["ffnn_hidden"] = c.ffnn_hidden;
    j["ffnn_baseline_value"] = c.ffnn_baseline_value;
    j["sigma_floor"] = c.sigma_floor;
    j["init_seed"] = c.init_seed;
    j["mask_rounding_seed"] = c.mask_rounding_seed;
    return j;
}

ModelConfig model_config_from_json(const ordered_json& j) {
    ModelConfig c;
    c.feature_count = j.at("feature_count").get<std::size_t>();
    c.arch = architecture_from_string(j.at("arch").get<std::string>());
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.menn_hidden = j.at("menn_hidden").get<std::vector<std::size_t>>();
    c.menn2_hidden = j.at("menn2_hidden").get<std::vector<std::size_t>>();
    c.f_hidden = j.at("f_hidden").get<std::vector<std::size_t>>();
    c.sigma_hidden = j.at("sigma_hidden").get<std::vector<std::size_t>>();
    c.ffnn_hidden = j.at("ffnn_hidden").get<std::vector<std::size_t>>();
    c.ffnn_baseline_value = j.at("ffnn_baseline_value").get<double>();
    c.sigma_floor = j.at("sigma_floor").get<double>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    c.mask_rounding_seed = j.at("mask_rounding_seed").get<std::uint64_t>();
    return c;
}

constexpr char kCheckpointMagic[8] = {'P', 'S', 'I', 'C', 'K', 'P', 'T', '\0'};

} // namespace

void save_checkpoint(const std::string& path, const PsiModel& model,
                     const CheckpointMeta& meta) {
    ordered_json header;
    header["model"] = model_config_to_json(model.config());
    header["task"] = to_string(meta.task);
    header["standardizer"] = {
        {"feature_mean", meta.standardizer.feature_mean},
        {"feature_stddev", meta.standardizer.feature_stddev},
        {"standardize_target", meta.standardizer.standardize_target},
        {"target_mean", meta.standardizer.target_mean},
        {"target_stddev", meta.standardizer.target_stddev},
    };
    header["train_seed"] = meta.train_seed;
    header["config_hash"] = meta.config_hash;
    header["folds"] = meta.folds;
    header["fold"] = meta.fold;
    header["split_seed"] = meta.split_seed;

    ordered_json manifest = ordered_json::array();
    std::vector<const Parameter*> params = model.parameters();
    std::size_t doubles = 0;
    for (const Parameter* p : params) {
        manifest.push_back({{"name", p->name},
                            {"rows", p->value.rows()},
                            {"cols", p->value.cols()}});
        doubles += p->value.size();
    }
    header["parameters"] = manifest;

    const std::string header_text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const Parameter* p : params) {
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!out) throw ConfigError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw ConfigError("not a checkpoint file: " + path);
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCheckpointVersion) {
        throw ConfigError("checkpoint version " + std::to_string(version) +
                          " not supported (expected " + std::to_string(kCheckpointVersion) +
                          ")");
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ConfigError("truncated checkpoint header: " + path);

    ordered_json header = ordered_json::parse(header_text);

    LoadedCheckpoint loaded{PsiModel::build(model_config_from_json(header.at("model"))), {}};
    loaded.meta.task = task_from_string(header.at("task").get<std::string>());
    const auto& st = header.at("standardizer");
    loaded.meta.standardizer.feature_mean = st.at("feature_mean").get<std::vector<double>>();
    loaded.meta.standardizer.feature_stddev =
        st.at("feature_stddev").get<std::vector<double>>();
    loaded.meta.standardizer.standardize_target = st.at("standardize_target").get<bool>();
    loaded.meta.standardizer.target_mean = st.at("target_mean").get<double>();
    loaded.meta.standardizer.target_stddev = st.at("target_stddev").get<double>();
    loaded.meta.train_seed = header.at("train_seed").get<std::uint64_t>();
    loaded.meta.config_hash = header.at("config_hash").get<std::uint64_t>();
    loaded.meta.folds = header.at("folds").get<std::size_t>();
    loaded.meta.fold = header.at("fold").get<std::size_t>();
    loaded.meta.split_seed = header.at("split_seed").get<std::uint64_t>();

    std::vector<Parameter*> params = loaded.model.parameters();
    const auto& manifest = header.at("parameters");
    if (manifest.size() != params.size()) {
        throw ConfigError("checkpoint parameter manifest does not match the model");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = manifest.at(i);
        if (entry.at("name").get<std::string>() != params[i]->name ||
            entry.at("rows").get<std::size_t>() != params[i]->value.rows() ||
            entry.at("cols").get<std::size_t>() != params[i]->value.cols()) {
            throw ConfigError("checkpoint parameter '" + params[i]->name +
                              "' does not match the rebuilt model");
        }
        in.read(reinterpret_cast<char*>(params[i]->value.data()),
                static_cast<std::streamsize>(params[i]->value.size() * sizeof(double)));
    }
    if (!in) throw ConfigError("truncated checkpoint blob: " + path);
    return loaded;
}

} // namespace psi
