#include "xattn/schedule.hpp"

#include <cmath>

#include "xattn/rng.hpp"

namespace xattn::diffusion {

namespace {

// RNG stream layout for inversion: one stream per auxiliary timestep.
constexpr uint64_t kAuxNoiseStreamBase = 0x100;

} // namespace

void DiffusionSchedule::validate() const {
    if (num_steps < 1)
        throw ConfigError("schedule: num_steps must be >= 1");
    if (static_cast<int>(betas.size()) != num_steps ||
        static_cast<int>(alpha_bars.size()) != num_steps)
        throw ConfigError("schedule: betas/alpha_bars length disagrees with num_steps");
    float prev = final_alpha_bar;
    if (!(prev > 0.0f && prev < 1.0f))
        throw ConfigError("schedule: final_alpha_bar must lie in (0,1)");
    for (int t = 1; t <= num_steps; ++t) {
        const float b = betas[t - 1];
        const float ab = alpha_bars[t - 1];
        if (!(b > 0.0f && b < 1.0f))
            throw ConfigError("schedule: beta out of (0,1) at t=" + std::to_string(t));
        if (!(ab > 0.0f && ab < 1.0f))
            throw ConfigError("schedule: alpha_bar out of (0,1) at t=" + std::to_string(t));
        if (!(ab < prev))
            throw ConfigError("schedule: alpha_bars must be strictly decreasing "
                              "(violated at t=" + std::to_string(t) + ")");
        prev = ab;
    }
}

DiffusionSchedule schedule_from_betas(std::vector<float> betas) {
    DiffusionSchedule s;
    s.num_steps = static_cast<int>(betas.size());
    s.betas = std::move(betas);
    s.alpha_bars.resize(s.num_steps);
    double prod = 1.0;
    for (int i = 0; i < s.num_steps; ++i) {
        if (!(s.betas[i] > 0.0f && s.betas[i] < 1.0f))
            throw ConfigError("schedule: beta out of (0,1) at index " + std::to_string(i));
        prod *= 1.0 - s.betas[i];
        s.alpha_bars[i] = static_cast<float>(prod);
    }
    s.final_alpha_bar = 1.0f - 0.5f * s.betas.front();
    s.validate();
    return s;
}

DiffusionSchedule make_schedule(int num_steps, float beta_start, float beta_end,
                                BetaSpacing spacing) {
    if (num_steps < 1)
        throw ConfigError("make_schedule: num_steps must be >= 1");
    if (!(beta_start > 0.0f) || !(beta_start <= beta_end) || !(beta_end < 1.0f))
        throw ConfigError("make_schedule: need 0 < beta_start <= beta_end < 1");
    (void)spacing;  // only linear spacing exists

    std::vector<float> betas(num_steps);
    if (num_steps == 1) {
        betas[0] = beta_start;
    } else {
        const double step = (static_cast<double>(beta_end) - beta_start) / (num_steps - 1);
        for (int i = 0; i < num_steps; ++i)
            betas[i] = static_cast<float>(beta_start + step * i);
    }
    return schedule_from_betas(std::move(betas));
}

DiffusionSchedule default_inference_schedule(int num_steps) {
    constexpr int kTrainSteps = 1000;
    constexpr double kTrainBetaStart = 1e-4;
    constexpr double kTrainBetaEnd = 2e-2;
    if (num_steps < 1 || num_steps > kTrainSteps)
        throw ConfigError("default_inference_schedule: num_steps must be in [1, 1000]");

    // Cumulative alpha products of the linear training schedule.
    std::vector<double> train_ab(kTrainSteps);
    double prod = 1.0;
    for (int i = 0; i < kTrainSteps; ++i) {
        const double beta =
            kTrainBetaStart + (kTrainBetaEnd - kTrainBetaStart) * i / (kTrainSteps - 1);
        prod *= 1.0 - beta;
        train_ab[i] = prod;
    }

    // Stride the cumulative products so the last inference step reaches the
    // training schedule's terminal noise level.
    const int stride = kTrainSteps / num_steps;
    std::vector<float> betas(num_steps);
    double prev = 1.0;
    for (int s = 0; s < num_steps; ++s) {
        const double ab = train_ab[(s + 1) * stride - 1];
        betas[s] = static_cast<float>(1.0 - ab / prev);
        prev = ab;
    }
    return schedule_from_betas(std::move(betas));
}

LatentGrid predict_x0(const LatentGrid& x_t, const LatentGrid& epsilon,
                      float alpha_bar_t) {
    x_t.require_same_shape(epsilon, "predict_x0");
    if (!(alpha_bar_t > 0.0f && alpha_bar_t < 1.0f))
        throw ConfigError("predict_x0: alpha_bar_t must lie in (0,1)");
    const float inv_sqrt_ab = 1.0f / std::sqrt(alpha_bar_t);
    const float sqrt_one_minus = std::sqrt(1.0f - alpha_bar_t);
    LatentGrid out = x_t;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (x_t.data[i] - sqrt_one_minus * epsilon.data[i]) * inv_sqrt_ab;
    return out;
}

namespace {

// Deterministic part of the update; sigma enters only through the direction
// coefficient sqrt(1 - ab_prev - sigma^2).
LatentGrid ddim_mean(const LatentGrid& x_t, const LatentGrid& epsilon,
                     float alpha_bar_t, float alpha_bar_prev, float sigma) {
    x_t.require_same_shape(epsilon, "ddim_update");
    const float dir_sq = 1.0f - alpha_bar_prev - sigma * sigma;
    if (dir_sq < -1e-6f)
        throw ConfigError("ddim_update: sigma too large for alpha_bar_prev");
    const float sqrt_ab_prev = std::sqrt(alpha_bar_prev);
    const float dir_coeff = std::sqrt(std::max(dir_sq, 0.0f));
    const float inv_sqrt_ab = 1.0f / std::sqrt(alpha_bar_t);
    const float sqrt_one_minus = std::sqrt(1.0f - alpha_bar_t);

    LatentGrid out = x_t;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const float x0 = (x_t.data[i] - sqrt_one_minus * epsilon.data[i]) * inv_sqrt_ab;
        out.data[i] = sqrt_ab_prev * x0 + dir_coeff * epsilon.data[i];
    }
    out.timestep_index = std::max(x_t.timestep_index - 1, 0);
    return out;
}

} // namespace

LatentGrid ddim_update(const LatentGrid& x_t, const LatentGrid& epsilon,
                       float alpha_bar_t, float alpha_bar_prev, float sigma,
                       const LatentGrid* noise) {
    if (sigma > 0.0f && noise == nullptr)
        throw ConfigError("ddim_update: sigma > 0 requires an injected noise map");
    LatentGrid out = ddim_mean(x_t, epsilon, alpha_bar_t, alpha_bar_prev, sigma);
    if (sigma > 0.0f) {
        x_t.require_same_shape(*noise, "ddim_update noise");
        for (size_t i = 0; i < out.data.size(); ++i)
            out.data[i] += sigma * noise->data[i];
    }
    return out;
}

float step_sigma(const DiffusionSchedule& schedule, int t, float eta) {
    const float ab_t = schedule.alpha_bar(t);
    const float ab_prev = schedule.alpha_bar(t - 1);
    // DDIM variance: eta^2 * (1-ab_prev)/(1-ab_t) * (1 - ab_t/ab_prev)
    const double var = (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev);
    return eta * static_cast<float>(std::sqrt(std::max(var, 0.0)));
}

LatentGrid sampling_step(const LatentGrid& x_t, const LatentGrid& epsilon, int t,
                         const DiffusionSchedule& schedule,
                         const LatentGrid* injected_noise, float eta) {
    if (t < 1 || t > schedule.num_steps)
        throw ConfigError("sampling_step: t=" + std::to_string(t) +
                          " outside [1, " + std::to_string(schedule.num_steps) + "]");
    if (eta < 0.0f || eta > 1.0f)
        throw ConfigError("sampling_step: eta must lie in [0,1]");
    if (eta > 0.0f && injected_noise == nullptr)
        throw ConfigError("sampling_step: eta > 0 requires an injected noise map");
    const float sigma = step_sigma(schedule, t, eta);
    return ddim_update(x_t, epsilon, schedule.alpha_bar(t), schedule.alpha_bar(t - 1),
                       sigma, injected_noise);
}

InversionRecord invert(const LatentGrid& x0, const DiffusionSchedule& schedule,
                       const DenoiseFn& denoiser, const std::string& prompt,
                       uint64_t seed) {
    schedule.validate();
    const int T = schedule.num_steps;
    const CounterRng rng(seed);

    // Independent auxiliary latents x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eta_t.
    // xts[t] holds x_t; xts[0] is the source latent itself.
    std::vector<LatentGrid> xts(T + 1, x0);
    LatentGrid eta_noise(x0.channels, x0.height, x0.width);
    for (int t = 1; t <= T; ++t) {
        rng.fill_normal(eta_noise.data, kAuxNoiseStreamBase + static_cast<uint64_t>(t));
        const float ab = schedule.alpha_bar(t);
        const float sa = std::sqrt(ab);
        const float sb = std::sqrt(1.0f - ab);
        for (size_t i = 0; i < x0.data.size(); ++i)
            xts[t].data[i] = sa * x0.data[i] + sb * eta_noise.data[i];
        xts[t].timestep_index = t;
    }

    InversionRecord record;
    record.prompt = prompt;
    record.seed = seed;
    record.terminal_latent = xts[T];
    record.noise_maps.assign(T, LatentGrid(x0.channels, x0.height, x0.width));

    // Solve each step for the noise map that maps x_t to x_{t-1} exactly,
    // then overwrite x_{t-1} with the value the replay will actually produce
    // so rounding cannot accumulate across steps. The mean must be computed
    // with the replay sigma, which shrinks the direction coefficient.
    for (int t = T; t >= 1; --t) {
        const float sigma = step_sigma(schedule, t, 1.0f);
        if (!(sigma > 1e-12f))
            throw InversionError("invert: sigma is zero at t=" + std::to_string(t) +
                                 "; the noise map is unsolvable");
        const LatentGrid eps = denoiser(xts[t], t);
        xts[t].require_same_shape(eps, "invert denoiser output");
        const LatentGrid mu = ddim_mean(xts[t], eps, schedule.alpha_bar(t),
                                        schedule.alpha_bar(t - 1), sigma);
        LatentGrid& z = record.noise_maps[t - 1];
        const float inv_sigma = 1.0f / sigma;
        for (size_t i = 0; i < x0.data.size(); ++i) {
            z.data[i] = (xts[t - 1].data[i] - mu.data[i]) * inv_sigma;
            xts[t - 1].data[i] = mu.data[i] + sigma * z.data[i];
        }
    }
    return record;
}

LatentGrid replay(const InversionRecord& record, const DiffusionSchedule& schedule,
                  const DenoiseFn& denoiser) {
    if (record.num_steps() != schedule.num_steps)
        throw ConfigError("replay: record has " + std::to_string(record.num_steps()) +
                          " noise maps, schedule has " +
                          std::to_string(schedule.num_steps) + " steps");
    LatentGrid z = record.terminal_latent;
    for (int t = schedule.num_steps; t >= 1; --t) {
        const LatentGrid eps = denoiser(z, t);
        z = sampling_step(z, eps, t, schedule, &record.noise_at(t), 1.0f);
    }
    return z;
}

} // namespace xattn::diffusion
