#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lc::config {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Flat run configuration; defaults are the training hyperparameters used
// throughout. Loadable from a flat JSON file with exactly these keys.
struct RunConfig {
    std::string data_dir;  // falls back to $LATENT_CLUSTER_DATA_DIR
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    double lr = 0.001;
    int batch = 128;
    int latent_dim = 64;
    double margin = 1.0;
    int phase1_epochs = 12;
    int phase2_epochs = 5;
    int mining_subset = 20000;
    double neg_threshold = 0.5;
    int k = 10;
    int pca_components = 50;
    std::string nmi_variant = "arithmetic";  // or "geometric"
    double tsne_perplexity = 30.0;
    int tsne_iterations = 1000;
    double tsne_learning_rate = 200.0;
    double tsne_early_exaggeration = 12.0;
};

// Parses a flat JSON object; unknown keys are a hard error, as are wrongly
// typed values. Missing keys keep their defaults.
RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Range/enum checks shared by every command.
void validate(const RunConfig& cfg);

// data_dir from the config or the LATENT_CLUSTER_DATA_DIR environment variable.
std::string resolve_data_dir(const RunConfig& cfg);

// FNV-1a 64-bit content hash, hex encoded.
std::string file_hash_hex(const std::string& path);

// Records every produced artifact with a content hash plus the config used.
class PipelineManifest {
public:
    explicit PipelineManifest(const RunConfig& cfg) : cfg_(cfg) {}

    void add_file(const std::string& path);
    void write(const std::string& path) const;

private:
    RunConfig cfg_;
    std::vector<std::pair<std::string, std::string>> entries_;  // path, hash
};

std::string config_to_json(const RunConfig& cfg);

}  // namespace lc::config
