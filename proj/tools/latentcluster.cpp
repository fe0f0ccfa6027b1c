#include "lc/cluster.hpp"
#include "lc/config.hpp"
#include "lc/data.hpp"
#include "lc/embed_viz.hpp"
#include "lc/eval.hpp"
#include "lc/model.hpp"
#include "lc/train.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

namespace {

namespace fs = std::filesystem;
using lc::config::ConfigError;
using lc::config::RunConfig;
using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

lc::data::Dataset load_train(const std::string& dir) {
    return lc::data::load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
}

lc::data::Dataset load_test(const std::string& dir) {
    return lc::data::load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
}

lc::data::Dataset head(const lc::data::Dataset& ds, int n) {
    if (n <= 0 || n >= ds.size()) return ds;
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    return lc::data::take(ds, idx);
}

Matrix pixels_matrix(const lc::data::Dataset& ds) {
    Matrix X(ds.size(), 784);
    const float* src = ds.images.data();
    for (int i = 0; i < ds.size(); ++i)
        for (int j = 0; j < 784; ++j) X(i, j) = src[static_cast<std::size_t>(i) * 784 + j];
    return X;
}

lc::eval::NmiVariant nmi_variant_of(const RunConfig& cfg) {
    return cfg.nmi_variant == "geometric" ? lc::eval::NmiVariant::geometric
                                          : lc::eval::NmiVariant::arithmetic;
}

int cmd_train(const RunConfig& cfg, bool phase1_only, int subset) {
    const std::string data_dir = lc::config::resolve_data_dir(cfg);
    fs::create_directories(cfg.output_dir);

    auto full = load_train(data_dir);
    auto [train_ds, val_ds] = lc::data::split(full, {.train_fraction = 0.8, .seed = cfg.seed});
    if (subset > 0) {
        train_ds = head(train_ds, subset);
        val_ds = head(val_ds, std::max(2, subset / 4));
    }
    std::cout << "training on " << train_ds.size() << " samples, validating on "
              << val_ds.size() << "\n";

    lc::Autoencoder<float> model(cfg.seed, cfg.latent_dim);
    lc::nn::Adam<float> opt(static_cast<float>(cfg.lr));
    lc::config::PipelineManifest manifest(cfg);
    lc::train::TrainLog log;

    if (cfg.phase1_epochs > 0) {
        auto phase1_log = lc::train::train_phase1(
            model, train_ds, val_ds, opt,
            {.epochs = cfg.phase1_epochs, .batch_size = cfg.batch, .seed = cfg.seed});
        for (auto& rec : phase1_log.records) {
            std::cout << "phase1 epoch " << rec.epoch << ": train " << rec.train_loss
                      << ", val " << rec.val_loss << "\n";
            log.records.push_back(rec);
        }
    }
    const std::string phase1_path = cfg.output_dir + "/phase1.ckpt";
    lc::save_checkpoint(model, phase1_path,
                        {.phase = "phase1", .epoch = static_cast<std::uint32_t>(cfg.phase1_epochs),
                         .has_optimizer = true},
                        &opt);
    manifest.add_file(phase1_path);

    if (!phase1_only && cfg.phase2_epochs > 0) {
        // seed-shuffled prefix of the training split; labels are carried along
        // but never consulted by mining
        std::vector<int> order(static_cast<std::size_t>(train_ds.size()));
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(cfg.seed ^ 0x6d696e65ull);
        lc::data::shuffle_indices(order, rng);
        order.resize(static_cast<std::size_t>(
            std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.mining_subset))));
        auto mining_ds = lc::data::take(train_ds, order);

        auto phase2_log = lc::train::train_phase2(
            model, mining_ds, val_ds, opt,
            {.epochs = cfg.phase2_epochs,
             .batch_size = cfg.batch,
             .margin = static_cast<float>(cfg.margin),
             .neg_threshold = static_cast<float>(cfg.neg_threshold),
             .seed = cfg.seed});
        for (auto& rec : phase2_log.records) {
            std::cout << "phase2 epoch " << rec.epoch << ": train " << rec.train_loss
                      << ", val " << rec.val_loss << "\n";
            log.records.push_back(rec);
        }
        const std::string phase2_path = cfg.output_dir + "/phase2.ckpt";
        lc::save_checkpoint(
            model, phase2_path,
            {.phase = "phase2", .epoch = static_cast<std::uint32_t>(cfg.phase2_epochs),
             .has_optimizer = true}, &opt);
        manifest.add_file(phase2_path);
    }

    const std::string log_path = cfg.output_dir + "/train_log.csv";
    lc::train::write_train_log_csv(log, log_path);
    manifest.add_file(log_path);
    manifest.write(cfg.output_dir + "/manifest.json");
    std::cout << "wrote " << log_path << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& method, const std::string& checkpoint,
                 int sample_size) {
    const std::string data_dir = lc::config::resolve_data_dir(cfg);
    fs::create_directories(cfg.output_dir);
    auto test_ds = head(load_test(data_dir), sample_size);

    Matrix X;
    if (method == "triplet_ae") {
        if (checkpoint.empty())
            throw ConfigError("evaluate --method triplet_ae requires --checkpoint");
        lc::Autoencoder<float> model(cfg.seed, cfg.latent_dim);
        lc::load_checkpoint(model, checkpoint);
        X = lc::train::embed_all(model, test_ds);
    } else if (method == "raw_pixels") {
        X = pixels_matrix(test_ds);
    } else if (method == "pca50") {
        X = lc::cluster::pca_fit_transform(pixels_matrix(test_ds), cfg.pca_components).first;
    } else {
        throw ConfigError("unknown method '" + method +
                          "'; expected triplet_ae, raw_pixels, or pca50");
    }

    auto km = lc::cluster::kmeans_fit(X, cfg.k, cfg.seed);
    auto report =
        lc::eval::compute_report(X, test_ds.labels, km.assignments, cfg.k, nmi_variant_of(cfg));
    const std::string json = lc::eval::report_to_json(report);

    const std::string metrics_path = cfg.output_dir + "/metrics_" + method + ".json";
    std::ofstream(metrics_path) << json << "\n";
    const std::string assign_path = cfg.output_dir + "/assignments_" + method + ".csv";
    lc::cluster::export_assignments_csv(km.assignments, assign_path);

    lc::config::PipelineManifest manifest(cfg);
    manifest.add_file(metrics_path);
    manifest.add_file(assign_path);
    manifest.write(cfg.output_dir + "/manifest_evaluate_" + method + ".json");

    std::cout << json << "\n";
    std::cout << "kmeans seed " << cfg.seed << ", " << km.iterations << " iterations, inertia "
              << km.inertia << "\n";
    return 0;
}

int cmd_visualize(const RunConfig& cfg, const std::string& checkpoint, int points) {
    const std::string data_dir = lc::config::resolve_data_dir(cfg);
    fs::create_directories(cfg.output_dir);
    auto test_ds = head(load_test(data_dir), points);

    lc::Autoencoder<float> model(cfg.seed, cfg.latent_dim);
    lc::load_checkpoint(model, checkpoint);
    Matrix E = lc::train::embed_all(model, test_ds);
    auto km = lc::cluster::kmeans_fit(E, cfg.k, cfg.seed);

    lc::viz::TsneConfig tsne_cfg;
    tsne_cfg.perplexity = cfg.tsne_perplexity;
    tsne_cfg.iterations = cfg.tsne_iterations;
    tsne_cfg.learning_rate = cfg.tsne_learning_rate;
    tsne_cfg.early_exaggeration = cfg.tsne_early_exaggeration;
    tsne_cfg.seed = cfg.seed;
    auto tsne = lc::viz::tsne(E, tsne_cfg);
    std::cout << "t-SNE KL at iteration 500: " << tsne.kl_at_500 << ", final: " << tsne.kl_final
              << "\n";

    const std::string csv_path = cfg.output_dir + "/tsne.csv";
    lc::viz::export_embeddings_csv(tsne.points, km.assignments, test_ds.labels, csv_path);
    const std::string svg_path = cfg.output_dir + "/tsne.svg";
    lc::viz::render_scatter_svg(tsne.points, km.assignments, svg_path);

    // silhouette comparison across the three methods, on the same subset
    const double sil_embed = lc::eval::silhouette(E, km.assignments);
    Matrix pixels = pixels_matrix(test_ds);
    auto km_raw = lc::cluster::kmeans_fit(pixels, cfg.k, cfg.seed);
    const double sil_raw = lc::eval::silhouette(pixels, km_raw.assignments);
    Matrix reduced = lc::cluster::pca_fit_transform(pixels, cfg.pca_components).first;
    auto km_pca = lc::cluster::kmeans_fit(reduced, cfg.k, cfg.seed);
    const double sil_pca = lc::eval::silhouette(reduced, km_pca.assignments);
    const std::string bars_path = cfg.output_dir + "/silhouette_bars.svg";
    lc::viz::render_bar_svg({"triplet_ae", "raw_pixels", "pca50"},
                            {sil_embed, sil_raw, sil_pca}, bars_path);

    lc::config::PipelineManifest manifest(cfg);
    manifest.add_file(csv_path);
    manifest.add_file(svg_path);
    manifest.add_file(bars_path);
    manifest.write(cfg.output_dir + "/manifest_visualize.json");
    std::cout << "wrote " << csv_path << ", " << svg_path << ", " << bars_path << "\n";
    return 0;
}

int cmd_inspect(const RunConfig& cfg, const std::string& path) {
    lc::Autoencoder<float> model(0, cfg.latent_dim);
    lc::nn::Adam<float> opt;
    auto meta = lc::load_checkpoint(model, path, &opt);
    std::cout << "checkpoint: " << path << "\n"
              << "phase: " << meta.phase << "\n"
              << "epoch: " << meta.epoch << "\n"
              << "optimizer state: " << (meta.has_optimizer ? "present" : "absent");
    if (meta.has_optimizer) std::cout << " (step " << opt.step_count() << ")";
    std::cout << "\n"
              << "trainable parameters: " << lc::count_parameters(model) << "\n"
              << "  encoder: " << model.encoder_parameter_count() << "\n"
              << "  decoder: " << model.decoder_parameter_count() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentcluster: two-phase convolutional autoencoder clustering of MNIST"};
    app.require_subcommand(1);

    std::string config_path;
    RunConfig cfg;
    app.add_option("--config", config_path, "flat JSON config file; flags override its values");

    // one flag per config key so --help documents all of them
    std::string data_dir, output_dir, nmi_variant;
    std::uint64_t seed = 0;
    double lr = 0, margin = 0, neg_threshold = 0, tsne_perplexity = 0, tsne_learning_rate = 0,
           tsne_early_exaggeration = 0;
    int batch = 0, latent_dim = 0, phase1_epochs = 0, phase2_epochs = 0, mining_subset = 0,
        k = 0, pca_components = 0, tsne_iterations = 0;
    auto* o_data = app.add_option("--data-dir", data_dir,
                                  "directory with the four MNIST IDX files "
                                  "(default: $LATENT_CLUSTER_DATA_DIR)");
    auto* o_out = app.add_option("--output-dir", output_dir, "artifact directory (default: out)");
    auto* o_seed = app.add_option("--seed", seed, "global seed for every stochastic step");
    auto* o_lr = app.add_option("--lr", lr, "Adam learning rate (default 0.001)");
    auto* o_batch = app.add_option("--batch", batch, "minibatch size (default 128)");
    auto* o_latent = app.add_option("--latent-dim", latent_dim, "embedding width (default 64)");
    auto* o_margin = app.add_option("--margin", margin, "triplet margin (default 1.0)");
    auto* o_p1 = app.add_option("--phase1-epochs", phase1_epochs,
                                "reconstruction epochs (default 12)");
    auto* o_p2 = app.add_option("--phase2-epochs", phase2_epochs,
                                "triplet fine-tuning epochs (default 5)");
    auto* o_mine = app.add_option("--mining-subset", mining_subset,
                                  "samples used for triplet mining (default 20000)");
    auto* o_thresh = app.add_option("--neg-threshold", neg_threshold,
                                    "negative mining distance threshold (default 0.5)");
    auto* o_k = app.add_option("--k", k, "number of KMeans clusters (default 10)");
    auto* o_pca = app.add_option("--pca-components", pca_components,
                                 "PCA baseline dimensionality (default 50)");
    auto* o_nmi = app.add_option("--nmi-variant", nmi_variant,
                                 "NMI normalization: arithmetic or geometric");
    auto* o_tp = app.add_option("--tsne-perplexity", tsne_perplexity,
                                "t-SNE perplexity (default 30)");
    auto* o_ti = app.add_option("--tsne-iterations", tsne_iterations,
                                "t-SNE iterations (default 1000)");
    auto* o_tl = app.add_option("--tsne-learning-rate", tsne_learning_rate,
                                "t-SNE learning rate (default 200)");
    auto* o_te = app.add_option("--tsne-early-exaggeration", tsne_early_exaggeration,
                                "t-SNE early exaggeration factor (default 12)");

    auto* train = app.add_subcommand("train", "run Phase 1 (reconstruction) then Phase 2 (triplet)");
    bool phase1_only = false;
    int train_subset = 0, train_epochs = -1;
    train->add_flag("--phase1-only", phase1_only, "stop after the reconstruction phase");
    train->add_option("--subset", train_subset, "train on only the first N split samples");
    train->add_option("--epochs", train_epochs, "override the Phase 1 epoch count");

    auto* evaluate = app.add_subcommand("evaluate", "cluster the test set and report metrics");
    std::string method = "triplet_ae", checkpoint;
    int sample_size = 0;
    evaluate->add_option("--method", method, "triplet_ae, raw_pixels, or pca50");
    evaluate->add_option("--checkpoint", checkpoint, "model checkpoint (triplet_ae only)");
    evaluate->add_option("--sample-size", sample_size,
                         "evaluate only the first N test samples (default: all)");

    auto* visualize = app.add_subcommand("visualize", "t-SNE projection and silhouette chart");
    std::string viz_checkpoint;
    int viz_points = 3000;
    visualize->add_option("--checkpoint", viz_checkpoint, "model checkpoint")->required();
    visualize->add_option("--points", viz_points, "test samples to project (default 3000)");

    auto* inspect = app.add_subcommand("inspect-checkpoint", "print checkpoint metadata");
    std::string inspect_path;
    inspect->add_option("path", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);

        if (!config_path.empty()) cfg = lc::config::load_config_file(config_path, cfg);
        if (o_data->count()) cfg.data_dir = data_dir;
        if (o_out->count()) cfg.output_dir = output_dir;
        if (o_seed->count()) cfg.seed = seed;
        if (o_lr->count()) cfg.lr = lr;
        if (o_batch->count()) cfg.batch = batch;
        if (o_latent->count()) cfg.latent_dim = latent_dim;
        if (o_margin->count()) cfg.margin = margin;
        if (o_p1->count()) cfg.phase1_epochs = phase1_epochs;
        if (o_p2->count()) cfg.phase2_epochs = phase2_epochs;
        if (o_mine->count()) cfg.mining_subset = mining_subset;
        if (o_thresh->count()) cfg.neg_threshold = neg_threshold;
        if (o_k->count()) cfg.k = k;
        if (o_pca->count()) cfg.pca_components = pca_components;
        if (o_nmi->count()) cfg.nmi_variant = nmi_variant;
        if (o_tp->count()) cfg.tsne_perplexity = tsne_perplexity;
        if (o_ti->count()) cfg.tsne_iterations = tsne_iterations;
        if (o_tl->count()) cfg.tsne_learning_rate = tsne_learning_rate;
        if (o_te->count()) cfg.tsne_early_exaggeration = tsne_early_exaggeration;
        if (train_epochs >= 0) cfg.phase1_epochs = train_epochs;
        lc::config::validate(cfg);

        if (train->parsed()) return cmd_train(cfg, phase1_only, train_subset);
        if (evaluate->parsed()) return cmd_evaluate(cfg, method, checkpoint, sample_size);
        if (visualize->parsed()) return cmd_visualize(cfg, viz_checkpoint, viz_points);
        if (inspect->parsed()) return cmd_inspect(cfg, inspect_path);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const lc::data::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const lc::CheckpointError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const lc::train::NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
