#include "lc/config.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace lc::config {

using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "data_dir",      "output_dir",    "seed",
        "lr",            "batch",         "latent_dim",
        "margin",        "phase1_epochs", "phase2_epochs",
        "mining_subset", "neg_threshold", "k",
        "pca_components", "nmi_variant",  "tsne_perplexity",
        "tsne_iterations", "tsne_learning_rate", "tsne_early_exaggeration"};
    return keys;
}

}  // namespace

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must contain a single JSON object");
    for (const auto& [key, value] : j.items())
        if (known_keys().count(key) == 0)
            throw ConfigError("unknown config key '" + key + "'");

    read_key(j, "data_dir", base.data_dir);
    read_key(j, "output_dir", base.output_dir);
    read_key(j, "seed", base.seed);
    read_key(j, "lr", base.lr);
    read_key(j, "batch", base.batch);
    read_key(j, "latent_dim", base.latent_dim);
    read_key(j, "margin", base.margin);
    read_key(j, "phase1_epochs", base.phase1_epochs);
    read_key(j, "phase2_epochs", base.phase2_epochs);
    read_key(j, "mining_subset", base.mining_subset);
    read_key(j, "neg_threshold", base.neg_threshold);
    read_key(j, "k", base.k);
    read_key(j, "pca_components", base.pca_components);
    read_key(j, "nmi_variant", base.nmi_variant);
    read_key(j, "tsne_perplexity", base.tsne_perplexity);
    read_key(j, "tsne_iterations", base.tsne_iterations);
    read_key(j, "tsne_learning_rate", base.tsne_learning_rate);
    read_key(j, "tsne_early_exaggeration", base.tsne_early_exaggeration);
    return base;
}

void validate(const RunConfig& cfg) {
    if (cfg.nmi_variant != "arithmetic" && cfg.nmi_variant != "geometric")
        throw ConfigError("nmi_variant must be 'arithmetic' or 'geometric'");
    if (cfg.lr <= 0) throw ConfigError("lr must be positive");
    if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
    if (cfg.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (cfg.margin <= 0) throw ConfigError("margin must be positive");
    if (cfg.phase1_epochs < 0 || cfg.phase2_epochs < 0)
        throw ConfigError("epoch counts must be non-negative");
    if (cfg.mining_subset < 3) throw ConfigError("mining_subset must be >= 3");
    if (cfg.neg_threshold <= 0) throw ConfigError("neg_threshold must be positive");
    if (cfg.k < 2) throw ConfigError("k must be >= 2");
    if (cfg.pca_components < 1) throw ConfigError("pca_components must be >= 1");
    if (cfg.tsne_perplexity <= 0 || cfg.tsne_iterations < 1 || cfg.tsne_learning_rate <= 0 ||
        cfg.tsne_early_exaggeration < 1)
        throw ConfigError("tsne settings must be positive");
}

std::string resolve_data_dir(const RunConfig& cfg) {
    if (!cfg.data_dir.empty()) return cfg.data_dir;
    if (const char* env = std::getenv("LATENT_CLUSTER_DATA_DIR")) return env;
    throw ConfigError("no data directory: set data_dir or LATENT_CLUSTER_DATA_DIR");
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot hash missing file '" + path + "'");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string config_to_json(const RunConfig& cfg) {
    json j{{"data_dir", cfg.data_dir},
           {"output_dir", cfg.output_dir},
           {"seed", cfg.seed},
           {"lr", cfg.lr},
           {"batch", cfg.batch},
           {"latent_dim", cfg.latent_dim},
           {"margin", cfg.margin},
           {"phase1_epochs", cfg.phase1_epochs},
           {"phase2_epochs", cfg.phase2_epochs},
           {"mining_subset", cfg.mining_subset},
           {"neg_threshold", cfg.neg_threshold},
           {"k", cfg.k},
           {"pca_components", cfg.pca_components},
           {"nmi_variant", cfg.nmi_variant},
           {"tsne_perplexity", cfg.tsne_perplexity},
           {"tsne_iterations", cfg.tsne_iterations},
           {"tsne_learning_rate", cfg.tsne_learning_rate},
           {"tsne_early_exaggeration", cfg.tsne_early_exaggeration}};
    return j.dump(2);
}

void PipelineManifest::add_file(const std::string& path) {
    entries_.emplace_back(path, file_hash_hex(path));
}

void PipelineManifest::write(const std::string& path) const {
    json files = json::object();
    for (const auto& [file, hash] : entries_) files[file] = hash;
    json j{{"config", json::parse(config_to_json(cfg_))}, {"files", files}};
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write manifest '" + path + "'");
    os << j.dump(2) << "\n";
}

}  // namespace lc::config
