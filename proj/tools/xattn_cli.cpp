// Command-line front end: transfer, reconstruct, correspond, evaluate, and
// config inspection over the toy backbone or a registered adapter.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "xattn/analysis.hpp"
#include "xattn/config.hpp"
#include "xattn/image_io.hpp"
#include "xattn/pipeline.hpp"
#include "xattn/tensor_io.hpp"
#include "xattn/toy_denoiser.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xattn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInversion = 3;
constexpr int kExitBackbone = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string backbone_kind = "toy";
    std::optional<uint64_t> seed_override;
    std::string model_path;
    bool free_u = false;
};

std::string cache_dir_from_env() {
    const char* dir = std::getenv("XATTN_CACHE_DIR");
    return dir ? std::string(dir) : std::string();
}

pipeline::TransferConfig resolve_config(const CommonArgs& args,
                                        pipeline::MaskStrategy* strategy) {
    pipeline::TransferConfig config;
    if (!args.config_path.empty())
        config = io::load_config_file(args.config_path, strategy);
    if (args.seed_override)
        config.seed = *args.seed_override;
    config.validate();
    return config;
}

backbone::Backbone resolve_backbone(const CommonArgs& args) {
    backbone::AdapterOptions options;
    options.model_path = args.model_path;
    options.free_u = args.free_u;
    return backbone::make_backbone(args.backbone_kind, options);
}

bool has_extension(const std::string& path, const char* ext) {
    return fs::path(path).extension() == ext;
}

// Images arrive either as 8-bit RGB PNGs (through the codec) or as raw
// latent tensors, which skip quantization entirely.
LatentGrid load_input_latent(const std::string& path,
                             const backbone::LatentCodec& codec) {
    if (!fs::exists(path))
        throw IoError("input '" + path + "' does not exist");
    if (has_extension(path, ".ten"))
        return io::read_latent(path);
    return codec.encode(io::read_png(path));
}

MaskGrid load_mask(const std::string& path) {
    if (!fs::exists(path))
        throw IoError("mask '" + path + "' does not exist");
    if (has_extension(path, ".ten"))
        return io::read_mask(path);
    return io::read_mask_png(path);
}

json config_json(const pipeline::TransferConfig& config,
                 pipeline::MaskStrategy strategy) {
    json j;
    j["num_steps"] = config.num_steps;
    j["window32"] = {config.injection_window_32.lo, config.injection_window_32.hi};
    j["window64"] = {config.injection_window_64.lo, config.injection_window_64.hi};
    j["contrast_beta"] = config.contrast_beta;
    j["guidance_alpha"] = config.guidance_alpha;
    j["adain_window"] = {config.adain_window.lo, config.adain_window.hi};
    j["structure_injection_period"] = config.structure_injection_period;
    j["domain_prompt"] = config.domain_prompt;
    j["seed"] = config.seed;
    j["use_masks"] = config.use_masks;
    j["mask_strategy"] = io::to_string(strategy);
    j["eta"] = config.eta;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    out << text;
}

// Manifest content is fully determined by the command inputs so reruns are
// byte-identical; wall-clock timings go to run_log.txt instead.
void write_manifest(const fs::path& out_dir, const json& manifest) {
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void write_run_log(const fs::path& out_dir, double elapsed_ms,
                   const std::vector<std::string>& extra = {}) {
    std::string text = "elapsed_ms = " + std::to_string(elapsed_ms) + "\n";
    for (const auto& line : extra)
        text += line + "\n";
    write_text(out_dir / "run_log.txt", text);
}

std::string config_echo_text(const pipeline::TransferConfig& config,
                             pipeline::MaskStrategy strategy,
                             const std::vector<std::string>& step_log) {
    std::string text = io::config_to_text(config, strategy);
    if (!step_log.empty()) {
        text += "\n# per-step plan\n";
        for (const auto& line : step_log)
            text += "# " + line + "\n";
    }
    return text;
}

int cmd_transfer(const CommonArgs& common, const std::string& struct_path,
                 const std::string& app_path, const std::string& mask_struct_path,
                 const std::string& mask_app_path, bool capture_attention) {
    const auto start = std::chrono::steady_clock::now();
    pipeline::MaskStrategy strategy = pipeline::MaskStrategy::None;
    auto config = resolve_config(common, &strategy);
    const auto backbone = resolve_backbone(common);

    const auto z0_struct = load_input_latent(struct_path, *backbone.codec);
    const auto z0_app = load_input_latent(app_path, *backbone.codec);

    pipeline::MaskProvider masks;
    masks.strategy = strategy;
    if (!mask_struct_path.empty() || !mask_app_path.empty()) {
        if (mask_struct_path.empty() || mask_app_path.empty())
            throw ConfigError("provide both --mask-struct and --mask-app or neither");
        masks.strategy = pipeline::MaskStrategy::UserFile;
        masks.output_mask = load_mask(mask_struct_path);
        masks.appearance_mask = load_mask(mask_app_path);
        config.use_masks = true;
    }

    pipeline::TransferOptions options;
    options.capture_correspondence = capture_attention;
    options.inversion_cache_dir = cache_dir_from_env();

    fs::create_directories(common.out_dir);
    const auto result = pipeline::transfer_latents(z0_struct, z0_app, config,
                                                   *backbone.denoiser, masks, options);
    const auto image = backbone.codec->decode(result.output_latent);

    const fs::path out_dir(common.out_dir);
    io::write_png((out_dir / "output.png").string(), image);
    io::write_latent((out_dir / "output.ten").string(), result.output_latent);
    write_text(out_dir / "config_echo.txt",
               config_echo_text(config, masks.strategy, result.step_log));
    write_text(out_dir / "drift_log.txt",
               "appearance_drift_mean = " + std::to_string(result.appearance_drift_mean) +
                   "\nappearance_drift_max = " +
                   std::to_string(result.appearance_drift_max) + "\n");
    if (result.appearance_drift_max > 1e-3f)
        std::cerr << "warning: appearance branch drifted "
                  << result.appearance_drift_max << " from its input\n";

    json artifacts = {{"output_png", "output.png"},
                      {"output_latent", "output.ten"},
                      {"config_echo", "config_echo.txt"},
                      {"drift_log", "drift_log.txt"}};
    if (capture_attention && !result.correspondence_maps.empty()) {
        fs::create_directories(out_dir / "attention");
        for (size_t m = 0; m < result.correspondence_maps.size(); ++m) {
            const auto& map = result.correspondence_maps[m];
            io::write_tensor_f32(
                (out_dir / "attention" / ("cross_map_" + std::to_string(m) + ".ten"))
                    .string(),
                map.weights.data,
                {static_cast<uint32_t>(map.weights.rows),
                 static_cast<uint32_t>(map.weights.cols)});
        }
        artifacts["attention_dir"] = "attention";
    }

    json manifest;
    manifest["command"] = "transfer";
    manifest["backbone"] = common.backbone_kind;
    manifest["config"] = config_json(config, masks.strategy);
    manifest["inputs"] = {{"struct", struct_path},
                          {"app", app_path},
                          {"struct_hash", io::file_hash_hex(struct_path)},
                          {"app_hash", io::file_hash_hex(app_path)}};
    manifest["seed"] = config.seed;
    manifest["artifacts"] = artifacts;
    write_manifest(out_dir, manifest);

    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    write_run_log(out_dir, ms);
    return kExitOk;
}

int cmd_reconstruct(const CommonArgs& common, const std::string& input_path) {
    const auto start = std::chrono::steady_clock::now();
    pipeline::MaskStrategy strategy = pipeline::MaskStrategy::None;
    const auto config = resolve_config(common, &strategy);
    const auto backbone = resolve_backbone(common);
    const auto z0 = load_input_latent(input_path, *backbone.codec);

    fs::create_directories(common.out_dir);
    const auto latent =
        pipeline::reconstruct_latent(z0, config, *backbone.denoiser, cache_dir_from_env());
    const fs::path out_dir(common.out_dir);
    io::write_png((out_dir / "output.png").string(), backbone.codec->decode(latent));
    io::write_latent((out_dir / "output.ten").string(), latent);
    write_text(out_dir / "config_echo.txt", config_echo_text(config, strategy, {}));
    write_text(out_dir / "drift_log.txt",
               "reconstruction_max_abs = " +
                   std::to_string(max_abs_difference(latent, z0)) + "\n");

    json manifest;
    manifest["command"] = "reconstruct";
    manifest["backbone"] = common.backbone_kind;
    manifest["config"] = config_json(config, strategy);
    manifest["inputs"] = {{"input", input_path},
                          {"input_hash", io::file_hash_hex(input_path)}};
    manifest["seed"] = config.seed;
    manifest["artifacts"] = {{"output_png", "output.png"},
                             {"output_latent", "output.ten"},
                             {"config_echo", "config_echo.txt"},
                             {"drift_log", "drift_log.txt"}};
    write_manifest(out_dir, manifest);
    write_run_log(out_dir, std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count());
    return kExitOk;
}

int cmd_correspond(const CommonArgs& common, const std::string& struct_path,
                   const std::string& app_path) {
    const auto start = std::chrono::steady_clock::now();
    pipeline::MaskStrategy strategy = pipeline::MaskStrategy::None;
    const auto config = resolve_config(common, &strategy);
    const auto backbone = resolve_backbone(common);

    const auto z0_struct = load_input_latent(struct_path, *backbone.codec);
    const auto z0_app = load_input_latent(app_path, *backbone.codec);

    pipeline::TransferOptions options;
    options.capture_correspondence = true;
    options.inversion_cache_dir = cache_dir_from_env();
    const auto result = pipeline::transfer_latents(z0_struct, z0_app, config,
                                                   *backbone.denoiser, {}, options);
    if (result.correspondence_maps.empty())
        throw ConfigError("no attention maps captured; check the injection windows");

    const auto corr = analysis::extract_correspondences(
        result.correspondence_maps, analysis::Aggregation::MeanOverSelected,
        z0_struct.height, z0_struct.width, z0_app.height, z0_app.width);

    // Color-code the appearance grid, then gather through the mapping.
    const auto appearance_image = backbone.codec->decode(z0_app);
    const auto rendered = analysis::render_correspondence(corr, appearance_image);

    fs::create_directories(common.out_dir);
    const fs::path out_dir(common.out_dir);
    io::write_png((out_dir / "correspondence.png").string(), rendered);
    std::vector<int32_t> flat(corr.rows.size());
    for (size_t p = 0; p < flat.size(); ++p)
        flat[p] = corr.flat_index(static_cast<int>(p));
    io::write_tensor_i32((out_dir / "correspondence_index.ten").string(), flat,
                         {static_cast<uint32_t>(corr.height),
                          static_cast<uint32_t>(corr.width)});
    io::write_tensor_f32((out_dir / "correspondence_confidence.ten").string(),
                         corr.confidence,
                         {static_cast<uint32_t>(corr.height),
                          static_cast<uint32_t>(corr.width)});

    json manifest;
    manifest["command"] = "correspond";
    manifest["backbone"] = common.backbone_kind;
    manifest["config"] = config_json(config, strategy);
    manifest["inputs"] = {{"struct", struct_path},
                          {"app", app_path},
                          {"struct_hash", io::file_hash_hex(struct_path)},
                          {"app_hash", io::file_hash_hex(app_path)}};
    manifest["seed"] = config.seed;
    manifest["correspondence_step"] = result.correspondence_step;
    manifest["artifacts"] = {{"render", "correspondence.png"},
                             {"index", "correspondence_index.ten"},
                             {"confidence", "correspondence_confidence.ten"}};
    write_manifest(out_dir, manifest);
    write_run_log(out_dir, std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count());
    return kExitOk;
}

struct PairRow {
    std::string name;
    std::string struct_path;
    std::string app_path;
};

std::vector<PairRow> read_pairs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open pairs file '" + path + "'");
    std::vector<PairRow> rows;
    std::string line;
    const fs::path base = fs::path(path).parent_path();
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::array<std::string, 3> cells;
        size_t start = 0;
        for (int c = 0; c < 3; ++c) {
            const size_t comma = line.find(',', start);
            if (comma == std::string::npos && c < 2)
                throw ConfigError("pairs file: expected 'name,struct,app' per line");
            cells[c] = line.substr(start, comma == std::string::npos
                                              ? std::string::npos
                                              : comma - start);
            start = comma + 1;
        }
        if (cells[0] == "name")
            continue;  // header
        PairRow row;
        row.name = cells[0];
        row.struct_path = (base / cells[1]).string();
        row.app_path = (base / cells[2]).string();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<std::string> find_mask_file(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".png", ".ten"}) {
        const fs::path candidate = dir / (stem + ext);
        if (fs::exists(candidate))
            return candidate.string();
    }
    return std::nullopt;
}

int cmd_evaluate(const CommonArgs& common, const std::string& pairs_path,
                 const std::string& outputs_dir, const std::string& masks_dir,
                 uint64_t extractor_seed) {
    const auto start = std::chrono::steady_clock::now();
    const auto rows = read_pairs_csv(pairs_path);
    if (rows.empty())
        throw ConfigError("pairs file '" + pairs_path + "' lists no pairs");

    const analysis::SeededConvExtractor extractor(extractor_seed);
    const std::vector<double> layer_weights(extractor.num_layers(), 1.0);

    std::string csv = "pair,iou,gram_distance\n";
    double iou_sum = 0.0, gram_sum = 0.0;
    int iou_count = 0, gram_count = 0;

    for (const auto& row : rows) {
        std::string iou_cell = "NA", gram_cell = "NA";
        const fs::path output_path = fs::path(outputs_dir) / (row.name + ".png");

        if (fs::exists(output_path)) {
            const auto mask_struct = find_mask_file(masks_dir, row.name + "_struct");
            const auto mask_output = find_mask_file(masks_dir, row.name + "_output");
            if (mask_struct && mask_output) {
                const auto ms = load_mask(*mask_struct);
                const auto mo = load_mask(*mask_output);
                const double iou = analysis::structure_iou(mo, ms);
                iou_cell = std::to_string(iou);
                iou_sum += iou;
                ++iou_count;
            }
            if (fs::exists(row.app_path)) {
                const auto app_features = extractor.extract(io::read_png(row.app_path));
                const auto out_features =
                    extractor.extract(io::read_png(output_path.string()));
                const double gram =
                    analysis::gram_distance(app_features, out_features, layer_weights);
                gram_cell = std::to_string(gram);
                gram_sum += gram;
                ++gram_count;
            }
        }
        csv += row.name + "," + iou_cell + "," + gram_cell + "\n";
    }
    csv += "mean,";
    csv += (iou_count ? std::to_string(iou_sum / iou_count) : std::string("NA")) + ",";
    csv += (gram_count ? std::to_string(gram_sum / gram_count) : std::string("NA")) + "\n";

    fs::create_directories(common.out_dir);
    const fs::path out_dir(common.out_dir);
    write_text(out_dir / "metrics.csv", csv);
    std::cout << csv;

    json manifest;
    manifest["command"] = "evaluate";
    manifest["inputs"] = {{"pairs", pairs_path},
                          {"outputs_dir", outputs_dir},
                          {"masks_dir", masks_dir}};
    manifest["extractor_seed"] = extractor_seed;
    manifest["extractor_layers"] = extractor.num_layers();
    manifest["artifacts"] = {{"metrics", "metrics.csv"}};
    write_manifest(out_dir, manifest);
    write_run_log(out_dir, std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count());
    return kExitOk;
}

int cmd_config(const CommonArgs& common) {
    pipeline::MaskStrategy strategy = pipeline::MaskStrategy::None;
    const auto config = resolve_config(common, &strategy);
    const std::string text = io::config_to_text(config, strategy);
    std::cout << text;
    if (!common.out_dir.empty()) {
        fs::create_directories(common.out_dir);
        write_text(fs::path(common.out_dir) / "config_echo.txt", text);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot semantic appearance transfer via cross-image attention"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string struct_path, app_path, input_path;
    std::string mask_struct_path, mask_app_path;
    std::string pairs_path, outputs_dir, masks_dir;
    bool capture_attention = false;
    uint64_t extractor_seed = 0;

    const auto add_common = [&](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--config", common.config_path, "key = value config file");
        auto* out = cmd->add_option("--out", common.out_dir, "artifact directory");
        if (needs_out)
            out->required();
        cmd->add_option("--backbone", common.backbone_kind, "toy or adapter")
            ->check(CLI::IsMember({"toy", "adapter"}));
        cmd->add_option("--seed", common.seed_override, "override the config seed");
        cmd->add_option("--model", common.model_path, "adapter model path");
        cmd->add_flag("--freeu", common.free_u, "pass the FreeU toggle to the adapter");
    };

    auto* transfer = app.add_subcommand("transfer", "transfer appearance onto structure");
    transfer->add_option("--struct", struct_path, "structure image (.png or .ten)")
        ->required();
    transfer->add_option("--app", app_path, "appearance image (.png or .ten)")->required();
    transfer->add_option("--mask-struct", mask_struct_path, "structure-side AdaIN mask");
    transfer->add_option("--mask-app", mask_app_path, "appearance-side AdaIN mask");
    transfer->add_flag("--capture-attention", capture_attention,
                       "export midpoint cross-attention maps");
    add_common(transfer, true);

    auto* reconstruct = app.add_subcommand("reconstruct", "invert and replay one image");
    reconstruct->add_option("--input", input_path, "image (.png or .ten)")->required();
    add_common(reconstruct, true);

    auto* correspond =
        app.add_subcommand("correspond", "render cross-image correspondences");
    correspond->add_option("--struct", struct_path, "structure image")->required();
    correspond->add_option("--app", app_path, "appearance image")->required();
    add_common(correspond, true);

    auto* evaluate = app.add_subcommand("evaluate", "score output pairs (IoU, Gram)");
    evaluate->add_option("--pairs", pairs_path, "CSV: name,struct,app")->required();
    evaluate->add_option("--outputs", outputs_dir, "directory of <name>.png outputs")
        ->required();
    evaluate->add_option("--masks", masks_dir,
                         "directory of <name>_struct / <name>_output masks")
        ->required();
    evaluate->add_option("--extractor-seed", extractor_seed,
                         "seed of the feature extractor");
    add_common(evaluate, true);

    auto* config_cmd = app.add_subcommand("config", "print the resolved configuration");
    add_common(config_cmd, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (transfer->parsed())
            return cmd_transfer(common, struct_path, app_path, mask_struct_path,
                                mask_app_path, capture_attention);
        if (reconstruct->parsed())
            return cmd_reconstruct(common, input_path);
        if (correspond->parsed())
            return cmd_correspond(common, struct_path, app_path);
        if (evaluate->parsed())
            return cmd_evaluate(common, pairs_path, outputs_dir, masks_dir,
                                extractor_seed);
        if (config_cmd->parsed())
            return cmd_config(common);
    } catch (const InversionError& e) {
        std::cerr << "inversion error: " << e.what() << "\n";
        return kExitInversion;
    } catch (const BackboneError& e) {
        std::cerr << "backbone error: " << e.what() << "\n";
        return kExitBackbone;
    } catch (const PlanError& e) {
        std::cerr << "backbone error: " << e.what() << "\n";
        return kExitBackbone;
    } catch (const Error& e) {
        // config, I/O, and shape problems all stem from the invocation
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
