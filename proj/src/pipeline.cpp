#include "xattn/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "xattn/analysis.hpp"
#include "xattn/guidance.hpp"
#include "xattn/rng.hpp"
#include "xattn/tensor_io.hpp"

namespace xattn::pipeline {

using attention::AttentionMode;
using backbone::AttentionPlan;
using backbone::CaptureSet;
using backbone::Conditioning;
using backbone::Denoiser;
using backbone::LayerInfo;
using backbone::LayerLocation;

void TransferConfig::validate() const {
    if (num_steps < 1)
        throw ConfigError("config: num_steps must be >= 1");
    for (const auto& [name, w] : {std::pair<const char*, StepWindow>{"window_32", injection_window_32},
                                  {"window_64", injection_window_64},
                                  {"adain_window", adain_window}}) {
        if (w.lo < 0 || w.hi > num_steps || w.lo > w.hi)
            throw ConfigError(std::string("config: ") + name + " [" +
                              std::to_string(w.lo) + "," + std::to_string(w.hi) +
                              ") must lie inside [0," + std::to_string(num_steps) + "]");
    }
    if (structure_injection_period < 1)
        throw ConfigError("config: structure_injection_period must be >= 1");
    if (contrast_beta < 0.0f)
        throw ConfigError("config: contrast_beta must be >= 0");
    if (eta < 0.0f || eta > 1.0f)
        throw ConfigError("config: eta must lie in [0,1]");
}

std::optional<StepWindow> TransferConfig::window_for_resolution(int resolution) const {
    if (resolution == 32) return injection_window_32;
    if (resolution == 64) return injection_window_64;
    return std::nullopt;
}

backbone::AttentionPlan step_plan(int step_index, const TransferConfig& config,
                                  const std::vector<LayerInfo>& catalog) {
    if (step_index < 0 || step_index >= config.num_steps)
        throw ConfigError("step_plan: step index " + std::to_string(step_index) +
                          " outside [0, " + std::to_string(config.num_steps) + ")");
    AttentionPlan plan;
    const bool structure_step =
        step_index % config.structure_injection_period == 0;
    for (const LayerInfo& layer : catalog) {
        if (layer.location != LayerLocation::Decoder)
            continue;
        const auto window = config.window_for_resolution(layer.resolution);
        if (!window || !window->contains(step_index))
            continue;
        backbone::LayerDirective directive;
        directive.mode = structure_step ? AttentionMode::CrossImageStructure
                                        : AttentionMode::CrossImageAppearance;
        directive.contrast_factor = config.contrast_beta;
        plan.directives.emplace(layer.id, std::move(directive));
    }
    return plan;
}

namespace {

// Running cross-attention statistics for attention-derived masks: per output
// pixel the winning weight, per appearance pixel the incoming mass, both
// averaged over heads and accumulated over injected steps.
struct MaskAccumulator {
    std::vector<double> query_confidence;
    std::vector<double> key_mass;
    int samples = 0;

    void add(const attention::AttentionMap& map) {
        if (query_confidence.empty()) {
            query_confidence.assign(map.num_queries(), 0.0);
            key_mass.assign(map.num_keys(), 0.0);
        }
        for (int i = 0; i < map.num_queries(); ++i) {
            const float* row = map.weights.row(i);
            float best = row[0];
            for (int j = 1; j < map.num_keys(); ++j)
                best = std::max(best, row[j]);
            query_confidence[i] += best;
            for (int j = 0; j < map.num_keys(); ++j)
                key_mass[j] += row[j];
        }
        ++samples;
    }

    static std::optional<MaskGrid> threshold(const std::vector<double>& values,
                                             int height, int width) {
        std::vector<float> v(values.begin(), values.end());
        const float cut = analysis::otsu_threshold(v);
        MaskGrid mask(height, width);
        int selected = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            mask.data[i] = v[i] > cut ? 1 : 0;
            selected += mask.data[i];
        }
        if (selected < 2 || selected > static_cast<int>(v.size()) - 1)
            return std::nullopt;  // degenerate split; run AdaIN unmasked
        return mask;
    }
};

std::string describe_plan(const AttentionPlan& plan) {
    if (plan.directives.empty())
        return "plain";
    std::string out;
    for (const auto& [id, d] : plan.directives) {
        if (!out.empty()) out += ' ';
        out += attention::to_string(d.mode) + "@" + id;
    }
    return out;
}

// Layers whose midpoint maps feed correspondence extraction: decoder layers
// at resolution 32 when the catalog has them, otherwise every decoder layer
// with a configured window.
std::vector<const LayerInfo*> correspondence_layers(
    const std::vector<LayerInfo>& catalog, const TransferConfig& config) {
    std::vector<const LayerInfo*> at32, windowed;
    for (const LayerInfo& layer : catalog) {
        if (layer.location != LayerLocation::Decoder)
            continue;
        if (layer.resolution == 32)
            at32.push_back(&layer);
        if (config.window_for_resolution(layer.resolution))
            windowed.push_back(&layer);
    }
    return at32.empty() ? windowed : at32;
}

// invert() with an optional on-disk cache keyed by content and parameters.
diffusion::InversionRecord cached_invert(const LatentGrid& z0,
                                         const diffusion::DiffusionSchedule& schedule,
                                         const diffusion::DenoiseFn& denoise,
                                         const std::string& prompt, uint64_t seed,
                                         const std::string& cache_dir) {
    if (cache_dir.empty())
        return diffusion::invert(z0, schedule, denoise, prompt, seed);

    uint64_t key = fnv1a64(z0.data.data(), z0.data.size() * sizeof(float));
    key = fnv1a64(prompt.data(), prompt.size(), key);
    key = fnv1a64(&seed, sizeof(seed), key);
    key = fnv1a64(&schedule.num_steps, sizeof(schedule.num_steps), key);
    const int dims[3] = {z0.channels, z0.height, z0.width};
    key = fnv1a64(dims, sizeof(dims), key);

    char name[32];
    std::snprintf(name, sizeof(name), "inv_%016llx.inv",
                  static_cast<unsigned long long>(key));
    const auto path = std::filesystem::path(cache_dir) / name;

    if (std::filesystem::exists(path)) {
        auto record = io::read_inversion_record(path.string());
        if (record.num_steps() == schedule.num_steps &&
            record.terminal_latent.same_shape(z0))
            return record;
    }
    auto record = diffusion::invert(z0, schedule, denoise, prompt, seed);
    std::filesystem::create_directories(cache_dir);
    io::write_inversion_record(path.string(), record);
    return record;
}

attention::AttentionMap head_map(const Matrix& q, const Matrix& k, int heads,
                                 int head, float scale) {
    const int d_head = q.cols / heads;
    Matrix qh(q.rows, d_head), kh(k.rows, d_head);
    for (int i = 0; i < q.rows; ++i)
        for (int j = 0; j < d_head; ++j)
            qh.at(i, j) = q.at(i, head * d_head + j);
    for (int i = 0; i < k.rows; ++i)
        for (int j = 0; j < d_head; ++j)
            kh.at(i, j) = k.at(i, head * d_head + j);
    return attention::compute_attention_map(qh, kh, scale);
}

} // namespace

TransferResult transfer_latents(const LatentGrid& z0_struct, const LatentGrid& z0_app,
                                const TransferConfig& config,
                                const Denoiser& denoiser, const MaskProvider& masks,
                                const TransferOptions& options) {
    config.validate();
    z0_struct.require_same_shape(z0_app, "transfer inputs");

    const std::vector<LayerInfo>& catalog = denoiser.layer_catalog();
    bool any_injectable = false;
    for (const LayerInfo& layer : catalog)
        if (layer.location == LayerLocation::Decoder &&
            config.window_for_resolution(layer.resolution))
            any_injectable = true;
    if (!any_injectable)
        throw ConfigError("transfer: denoiser catalog exposes no decoder layer at a "
                          "configured injection resolution");

    const auto schedule = diffusion::default_inference_schedule(config.num_steps);
    const Conditioning cond{config.domain_prompt};
    const diffusion::DenoiseFn plain = [&](const LatentGrid& z, int t) {
        return denoiser.predict(z, t, cond).epsilon;
    };

    // Both inversions share the seed so that identical inputs produce
    // identical trajectories and injection degenerates to a branch's own
    // keys and values.
    const auto rec_struct = cached_invert(z0_struct, schedule, plain,
                                          config.domain_prompt, config.seed,
                                          options.inversion_cache_dir);
    const auto rec_app = cached_invert(z0_app, schedule, plain, config.domain_prompt,
                                       config.seed, options.inversion_cache_dir);

    BranchState state;
    state.z_out = rec_struct.terminal_latent;  // z_T^out = z_T^struct
    state.z_app = rec_app.terminal_latent;
    state.z_struct = rec_struct.terminal_latent;

    const MaskStrategy strategy = config.use_masks ? masks.strategy : MaskStrategy::None;
    if (strategy == MaskStrategy::UserFile) {
        if (!masks.output_mask || !masks.appearance_mask)
            throw ConfigError("transfer: UserFile mask strategy requires both masks");
    }

    MaskAccumulator mask_acc;
    const int T = config.num_steps;
    const int midpoint = T / 2;

    TransferResult result;
    result.step_log.reserve(T);

    for (int i = 0; i < T; ++i) {
        const int t = T - i;
        state.step_index = i;
        AttentionPlan plan = step_plan(i, config, catalog);

        bool wants_appearance = false, wants_structure = false;
        for (const auto& [id, d] : plan.directives) {
            wants_appearance |= d.mode == AttentionMode::CrossImageAppearance;
            wants_structure |= d.mode == AttentionMode::CrossImageStructure;
        }

        const bool capture_midpoint =
            options.capture_correspondence && i == midpoint;

        // Appearance branch: one plain pass provides both its own prediction
        // and the K/V captures reused by every output-branch pass this step.
        AttentionPlan app_plan;
        for (const auto& [id, d] : plan.directives)
            if (d.mode == AttentionMode::CrossImageAppearance)
                app_plan.capture_layers.insert(id);
        if (capture_midpoint)
            for (const LayerInfo* layer : correspondence_layers(catalog, config))
                app_plan.capture_layers.insert(layer->id);
        auto app_pass = denoiser.predict_with_plan(state.z_app, t, cond, app_plan);
        state.appearance_captures = std::move(app_pass.captures);

        // Structure branch replays its own reconstruction; captures are only
        // needed on structure-injection steps.
        AttentionPlan struct_plan;
        for (const auto& [id, d] : plan.directives)
            if (d.mode == AttentionMode::CrossImageStructure)
                struct_plan.capture_layers.insert(id);
        auto struct_pass = denoiser.predict_with_plan(state.z_struct, t, cond, struct_plan);
        state.structure_captures = std::move(struct_pass.captures);

        for (auto& [id, d] : plan.directives) {
            const CaptureSet& source = d.mode == AttentionMode::CrossImageStructure
                                           ? state.structure_captures
                                           : state.appearance_captures;
            const auto it = source.find(id);
            if (it == source.end())
                throw PlanError("transfer: no captures for directed layer '" + id + "'");
            d.external_keys = it->second.keys;
            d.external_values = it->second.values;
        }

        // Midpoint correspondence maps are recomputed from captured Q/K so
        // they reflect pre-contrast weights regardless of the step's plan.
        const auto collect_correspondence = [&](const backbone::PredictResult& out_pass) {
            result.correspondence_step = i;
            for (const LayerInfo* layer : correspondence_layers(catalog, config)) {
                const auto qit = out_pass.captures.find(layer->id);
                const auto kit = state.appearance_captures.find(layer->id);
                if (qit == out_pass.captures.end() ||
                    kit == state.appearance_captures.end())
                    continue;
                const float scale = 1.0f /
                    std::sqrt(static_cast<float>(layer->key_dim / layer->head_count));
                for (int h = 0; h < layer->head_count; ++h)
                    result.correspondence_maps.push_back(
                        head_map(qit->second.queries, kit->second.keys,
                                 layer->head_count, h, scale));
            }
        };

        // Output branch: guided combination of the plain and rewired passes.
        // Outside every window the rewired pass would equal the plain one, so
        // it is skipped and the step is exactly the plain forward pass.
        guidance::NoisePrediction eps_final;
        AttentionPlan out_plan = plan;
        if (capture_midpoint)
            for (const LayerInfo* layer : correspondence_layers(catalog, config))
                out_plan.capture_layers.insert(layer->id);
        if (plan.has_substitutions()) {
            const auto eps_self = denoiser.predict(state.z_out, t, cond);
            const auto cross_pass =
                denoiser.predict_with_plan(state.z_out, t, cond, out_plan);
            eps_final =
                guidance::combine(eps_self, cross_pass.prediction, config.guidance_alpha);
            if (strategy == MaskStrategy::AttentionDerived)
                for (const auto& [id, capture] : cross_pass.captures)
                    if (plan.directives.count(id))
                        for (const auto& map : capture.head_maps)
                            mask_acc.add(map);
            if (capture_midpoint)
                collect_correspondence(cross_pass);
        } else {
            const auto self_pass =
                denoiser.predict_with_plan(state.z_out, t, cond, out_plan);
            eps_final = self_pass.prediction;
            if (capture_midpoint)
                collect_correspondence(self_pass);
        }

        // The output branch inherits the structure trajectory's noise maps.
        state.z_out = diffusion::sampling_step(state.z_out, eps_final.epsilon, t,
                                               schedule, &rec_struct.noise_at(t),
                                               config.eta);
        state.z_app = diffusion::sampling_step(state.z_app, app_pass.prediction.epsilon,
                                               t, schedule, &rec_app.noise_at(t),
                                               config.eta);
        state.z_struct = diffusion::sampling_step(state.z_struct,
                                                  struct_pass.prediction.epsilon, t,
                                                  schedule, &rec_struct.noise_at(t),
                                                  config.eta);

        if (config.adain_window.contains(i)) {
            const MaskGrid* out_mask = nullptr;
            const MaskGrid* app_mask = nullptr;
            std::optional<MaskGrid> derived_out, derived_app;
            if (strategy == MaskStrategy::UserFile) {
                out_mask = &*masks.output_mask;
                app_mask = &*masks.appearance_mask;
            } else if (strategy == MaskStrategy::AttentionDerived &&
                       mask_acc.samples > 0) {
                derived_out = MaskAccumulator::threshold(
                    mask_acc.query_confidence, state.z_out.height, state.z_out.width);
                derived_app = MaskAccumulator::threshold(
                    mask_acc.key_mass, state.z_app.height, state.z_app.width);
                if (derived_out && derived_app) {
                    out_mask = &*derived_out;
                    app_mask = &*derived_app;
                }
            }
            state.z_out = latent::adain(state.z_out, state.z_app, out_mask, app_mask);
        }

        result.step_log.push_back("step " + std::to_string(i) + " t=" +
                                  std::to_string(t) + ": " + describe_plan(plan));
    }

    result.appearance_drift_max = max_abs_difference(state.z_app, z0_app);
    result.appearance_drift_mean = mean_abs_difference(state.z_app, z0_app);
    result.appearance_latent = std::move(state.z_app);
    result.output_latent = std::move(state.z_out);
    result.output_latent.timestep_index = 0;
    return result;
}

LatentGrid reconstruct_latent(const LatentGrid& z0, const TransferConfig& config,
                              const Denoiser& denoiser,
                              const std::string& inversion_cache_dir) {
    config.validate();
    const auto schedule = diffusion::default_inference_schedule(config.num_steps);
    const Conditioning cond{config.domain_prompt};
    const diffusion::DenoiseFn plain = [&](const LatentGrid& z, int t) {
        return denoiser.predict(z, t, cond).epsilon;
    };
    const auto record = cached_invert(z0, schedule, plain, config.domain_prompt,
                                      config.seed, inversion_cache_dir);
    return diffusion::replay(record, schedule, plain);
}

ImageTransferResult transfer(const backbone::ImageRgb& image_struct,
                             const backbone::ImageRgb& image_app,
                             const TransferConfig& config,
                             const backbone::Backbone& backbone,
                             const MaskProvider& masks,
                             const TransferOptions& options) {
    ImageTransferResult out;
    out.detail = transfer_latents(backbone.codec->encode(image_struct),
                                  backbone.codec->encode(image_app), config,
                                  *backbone.denoiser, masks, options);
    out.image = backbone.codec->decode(out.detail.output_latent);
    return out;
}

backbone::ImageRgb reconstruct(const backbone::ImageRgb& image,
                               const TransferConfig& config,
                               const backbone::Backbone& backbone) {
    return backbone.codec->decode(reconstruct_latent(
        backbone.codec->encode(image), config, *backbone.denoiser));
}

} // namespace xattn::pipeline
