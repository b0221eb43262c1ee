#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "xattn/config.hpp"
#include "xattn/image_io.hpp"
#include "xattn/rng.hpp"
#include "xattn/tensor_io.hpp"

using namespace xattn;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("xattn_io_" + name)).string();
}

} // namespace

TEST_CASE("f32 tensor container roundtrip") {
    const std::string path = temp_path("a.ten");
    const std::vector<float> data = {1.5f, -2.25f, 0.0f, 3.14159f, -0.0f, 1e-20f};
    io::write_tensor_f32(path, data, {2, 3});
    const auto t = io::read_tensor(path);
    CHECK(t.dtype == 0);
    REQUIRE(t.dims == std::vector<uint32_t>{2, 3});
    CHECK(t.f32 == data);
    std::remove(path.c_str());
}

TEST_CASE("i32 tensor container roundtrip") {
    const std::string path = temp_path("b.ten");
    const std::vector<int32_t> data = {-7, 0, 123456, -2147483647};
    io::write_tensor_i32(path, data, {4});
    const auto t = io::read_tensor(path);
    CHECK(t.dtype == 1);
    CHECK(t.i32 == data);
    std::remove(path.c_str());
}

TEST_CASE("dims element-count mismatch is rejected") {
    CHECK_THROWS_AS(io::write_tensor_f32(temp_path("bad.ten"), {1.0f, 2.0f}, {3}),
                    InvalidShapeError);
}

TEST_CASE("latent and mask roundtrip") {
    const CounterRng rng(1);
    LatentGrid latent(4, 8, 8);
    rng.fill_normal(latent.data, 0);
    const std::string lpath = temp_path("c.ten");
    io::write_latent(lpath, latent);
    const auto back = io::read_latent(lpath);
    CHECK(back.data == latent.data);
    CHECK(back.channels == 4);
    std::remove(lpath.c_str());

    MaskGrid mask(8, 8);
    for (int i = 0; i < 64; i += 3)
        mask.data[i] = 1;
    const std::string mpath = temp_path("d.ten");
    io::write_mask(mpath, mask);
    const auto mback = io::read_mask(mpath);
    CHECK(mback.data == mask.data);
    std::remove(mpath.c_str());
}

TEST_CASE("missing files raise IoError") {
    CHECK_THROWS_AS(io::read_tensor("/nonexistent/path.ten"), IoError);
    CHECK_THROWS_AS(io::read_png("/nonexistent/path.png"), IoError);
}

TEST_CASE("inversion record roundtrip is bitwise") {
    const CounterRng rng(2);
    diffusion::InversionRecord record;
    record.prompt = "A photo of a giraffe";
    record.seed = 0xdeadbeef12345678ull;
    record.terminal_latent = LatentGrid(4, 8, 8);
    rng.fill_normal(record.terminal_latent.data, 0);
    record.terminal_latent.timestep_index = 3;
    for (int t = 1; t <= 3; ++t) {
        LatentGrid z(4, 8, 8);
        rng.fill_normal(z.data, t);
        record.noise_maps.push_back(z);
    }

    const std::string path = temp_path("e.inv");
    io::write_inversion_record(path, record);
    const auto back = io::read_inversion_record(path);
    CHECK(back.prompt == record.prompt);
    CHECK(back.seed == record.seed);
    REQUIRE(back.num_steps() == 3);
    CHECK(back.terminal_latent.data == record.terminal_latent.data);
    for (int t = 1; t <= 3; ++t)
        CHECK(back.noise_at(t).data == record.noise_at(t).data);
    std::remove(path.c_str());
}

TEST_CASE("png roundtrip preserves RGB bytes") {
    backbone::ImageRgb image(8, 6);
    const CounterRng rng(3);
    for (size_t i = 0; i < image.pixels.size(); ++i)
        image.pixels[i] = static_cast<uint8_t>(rng.word(0, i) % 256);
    const std::string path = temp_path("f.png");
    io::write_png(path, image);
    const auto back = io::read_png(path);
    CHECK(back.width == 8);
    CHECK(back.height == 6);
    CHECK(back.pixels == image.pixels);
    std::remove(path.c_str());
}

TEST_CASE("mask png thresholds luminance at 128") {
    backbone::ImageRgb image(3, 1);
    // dark, mid-above, bright
    const uint8_t values[3] = {10, 128, 250};
    for (int p = 0; p < 3; ++p)
        for (int c = 0; c < 3; ++c)
            image.pixels[p * 3 + c] = values[p];
    const std::string path = temp_path("g.png");
    io::write_png(path, image);
    const auto mask = io::read_mask_png(path);
    CHECK(mask.data[0] == 0);
    CHECK(mask.data[1] == 1);
    CHECK(mask.data[2] == 1);
    std::remove(path.c_str());
}

TEST_CASE("config defaults echo the reference hyperparameters") {
    const pipeline::TransferConfig defaults;
    const std::string text = io::config_to_text(defaults, pipeline::MaskStrategy::None);
    CHECK(text.find("num_steps = 100") != std::string::npos);
    CHECK(text.find("window32_lo = 10") != std::string::npos);
    CHECK(text.find("window32_hi = 70") != std::string::npos);
    CHECK(text.find("window64_hi = 90") != std::string::npos);
    CHECK(text.find("contrast_beta = 1.6") != std::string::npos);
    CHECK(text.find("guidance_alpha = 3.5") != std::string::npos);
    CHECK(text.find("adain_lo = 20") != std::string::npos);
    CHECK(text.find("adain_hi = 100") != std::string::npos);
    CHECK(text.find("structure_injection_period = 5") != std::string::npos);
    CHECK(text.find("eta = 1") != std::string::npos);
}

TEST_CASE("config text parses back to the same values") {
    pipeline::TransferConfig config;
    config.num_steps = 40;
    config.injection_window_32 = {4, 28};
    config.injection_window_64 = {4, 36};
    config.contrast_beta = 2.0f;
    config.guidance_alpha = 1.25f;
    config.adain_window = {8, 40};
    config.structure_injection_period = 3;
    config.domain_prompt = "A photo of a zebra";
    config.seed = 77;
    config.use_masks = true;
    config.eta = 0.5f;

    pipeline::MaskStrategy strategy = pipeline::MaskStrategy::None;
    const auto parsed = io::parse_config_text(
        io::config_to_text(config, pipeline::MaskStrategy::AttentionDerived), &strategy);
    CHECK(parsed.num_steps == 40);
    CHECK(parsed.injection_window_32.lo == 4);
    CHECK(parsed.injection_window_32.hi == 28);
    CHECK(parsed.injection_window_64.hi == 36);
    CHECK(parsed.contrast_beta == doctest::Approx(2.0));
    CHECK(parsed.guidance_alpha == doctest::Approx(1.25));
    CHECK(parsed.adain_window.lo == 8);
    CHECK(parsed.structure_injection_period == 3);
    CHECK(parsed.domain_prompt == "A photo of a zebra");
    CHECK(parsed.seed == 77);
    CHECK(parsed.use_masks == true);
    CHECK(parsed.eta == doctest::Approx(0.5));
    CHECK(strategy == pipeline::MaskStrategy::AttentionDerived);
}

TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(io::parse_config_text("nun_steps = 100\n"), ConfigError);
    CHECK_THROWS_AS(io::parse_config_text("num_steps = fast\n"), ConfigError);
    CHECK_THROWS_AS(io::parse_config_text("num_steps\n"), ConfigError);
    CHECK_THROWS_AS(io::parse_config_text("use_masks = maybe\n"), ConfigError);
    CHECK_THROWS_AS(io::parse_config_text("num_steps = 50\nwindow64_hi = 60\n"),
                    ConfigError);  // window exceeds num_steps
}

TEST_CASE("comments and blank lines are ignored") {
    const auto config = io::parse_config_text(
        "# reference setup\n\nnum_steps = 100   # paper default\n  seed = 3\n");
    CHECK(config.num_steps == 100);
    CHECK(config.seed == 3);
}

TEST_CASE("file hash is stable and content-sensitive") {
    const std::string path = temp_path("h.bin");
    {
        std::vector<float> payload = {1.0f, 2.0f};
        io::write_tensor_f32(path, payload, {2});
    }
    const std::string h1 = io::file_hash_hex(path);
    const std::string h2 = io::file_hash_hex(path);
    CHECK(h1 == h2);
    CHECK(h1.size() == 16);
    {
        std::vector<float> payload = {1.0f, 2.5f};
        io::write_tensor_f32(path, payload, {2});
    }
    CHECK(io::file_hash_hex(path) != h1);
    std::remove(path.c_str());
}
