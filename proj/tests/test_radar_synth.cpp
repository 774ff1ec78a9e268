#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "adaradar/dataset.hpp"

using namespace adaradar;
using namespace adaradar::synth;
namespace fs = std::filesystem;

namespace {

double total(const Tensor& t)
{
    double s = 0.0;
    for (double v : t.data()) {
        s += v;
    }
    return s;
}

RadObject car_at(double r, double a, double d)
{
    RadObject o;
    o.class_id = kCar;
    o.range_bin = r;
    o.angle_bin = a;
    o.doppler_bin = d;
    o.extent = {1.5, 1.4, 0.9};
    o.amplitude = 5.0;
    return o;
}

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("adaradar_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("empty scene without speckle renders an all-zero cube")
{
    RadScene scene;
    scene.frames = 2;
    auto cube = render_scene(scene, {16, 16, 8}, 1);
    CHECK(cube.intensity.shape() == Shape{2, 16, 16, 8});
    CHECK(total(cube.intensity) == 0.0);
    for (const auto& m : cube.masks_ra) {
        CHECK(m.foreground_count() == 0);
    }
    for (const auto& m : cube.masks_rd) {
        CHECK(m.foreground_count() == 0);
    }
}

TEST_CASE("a centred car peaks at its centre in every frame")
{
    CubeDims dims{64, 64, 16};
    RadScene scene;
    scene.frames = 3;
    scene.objects.push_back(car_at(32, 32, 8));
    auto cube = render_scene(scene, dims, 7);
    for (std::size_t t = 0; t < 3; ++t) {
        std::size_t best = 0;
        const double* p = &cube.intensity.at(t, 0, 0, 0);
        for (std::size_t i = 1; i < 64 * 64 * 16; ++i) {
            if (p[i] > p[best]) {
                best = i;
            }
        }
        CHECK(best == (32 * 64 + 32) * 16 + 8);
        CHECK(cube.masks_ra[t].at(32, 32) == kCar);
        CHECK(cube.masks_rd[t].at(32, 8) == kCar);
        CHECK(cube.masks_ra[t].at(0, 0) == kBackground);
    }
}

TEST_CASE("rendering is deterministic given the seed")
{
    CubeDims dims{32, 32, 8};
    RadScene scene;
    scene.frames = 2;
    scene.objects.push_back(car_at(10, 20, 3));
    scene.noise = {0.3, 2, 1.5};
    auto a = render_scene(scene, dims, 42, 0.05);
    auto b = render_scene(scene, dims, 42, 0.05);
    auto c = render_scene(scene, dims, 43, 0.05);
    CHECK(bit_identical(a.intensity, b.intensity));
    CHECK_FALSE(bit_identical(a.intensity, c.intensity));
    for (double v : a.intensity.data()) {
        CHECK(v >= 0.0);
    }
}

TEST_CASE("object outside the cube at frame 0 is rejected")
{
    RadScene scene;
    scene.objects.push_back(car_at(70, 10, 3));
    CHECK_THROWS_AS(render_scene(scene, {64, 64, 16}, 0), std::invalid_argument);
    scene.objects[0] = car_at(10, 10, -0.5);
    CHECK_THROWS_AS(render_scene(scene, {64, 64, 16}, 0), std::invalid_argument);
    scene.objects[0] = car_at(10, 10, 3);
    scene.objects[0].class_id = 4;
    CHECK_THROWS_AS(render_scene(scene, {64, 64, 16}, 0), std::invalid_argument);
}

TEST_CASE("foreground cap is enforced by render_scene")
{
    RadScene scene;
    scene.objects.push_back(car_at(8, 8, 4));
    // One car covers well over 1% of a 16x8 range-doppler map.
    CHECK_THROWS_AS(render_scene(scene, {16, 16, 8}, 0, 0.01), std::invalid_argument);
    CHECK_NOTHROW(render_scene(scene, {16, 16, 8}, 0, 0.5));
}

TEST_CASE("slicing a unit impulse marginalises to the right bins")
{
    RadCube cube;
    cube.intensity = Tensor(Shape{1, 6, 5, 4}, 0.0);
    cube.intensity.at(0, 4, 2, 1) = 1.0;
    auto v = marginalize(cube);
    CHECK(v.ra.data.at(0, 0, 4, 2) == 1.0);
    CHECK(v.rd.data.at(0, 0, 4, 1) == 1.0);
    CHECK(v.ad.data.at(0, 0, 2, 1) == 1.0);
    CHECK(total(v.ra.data) == 1.0);
    CHECK(total(v.rd.data) == 1.0);
    CHECK(total(v.ad.data) == 1.0);
}

TEST_CASE("standardising an all-zero cube gives zeros")
{
    RadCube cube;
    cube.intensity = Tensor(Shape{2, 4, 4, 2}, 0.0);
    auto v = slice_views(cube);
    for (const auto* view : {&v.ra, &v.rd, &v.ad}) {
        for (double x : view->data.data()) {
            CHECK(x == 0.0);
        }
    }
}

TEST_CASE("standardised frames have zero mean and unit variance")
{
    CubeDims dims{32, 32, 8};
    RadScene scene;
    scene.frames = 2;
    scene.objects.push_back(car_at(16, 16, 4));
    scene.noise.speckle_level = 0.2;
    auto v = slice_views(render_scene(scene, dims, 3, 0.05));
    const Tensor& x = v.ra.data;
    for (std::size_t t = 0; t < 2; ++t) {
        double m = 0, s = 0;
        for (std::size_t i = 0; i < 32 * 32; ++i) {
            m += x[t * 1024 + i];
        }
        m /= 1024;
        for (std::size_t i = 0; i < 32 * 32; ++i) {
            s += (x[t * 1024 + i] - m) * (x[t * 1024 + i] - m);
        }
        CHECK(std::abs(m) < 1e-12);
        CHECK(std::abs(s / 1024 - 1.0) < 1e-9);
    }
}

TEST_CASE("property: sampled scenes respect the cap, conserve mass, and ghosts never touch masks")
{
    CubeDims dims{64, 64, 16};
    SceneSampler sampler;
    sampler.frames = 2;
    std::mt19937_64 rng(2023);
    for (int i = 0; i < 100; ++i) {
        RadScene scene = sample_scene(sampler, dims, rng);
        auto cube = render_scene(scene, dims, rng());
        for (std::size_t t = 0; t < scene.frames; ++t) {
            CHECK(static_cast<double>(cube.masks_ra[t].foreground_count()) / (64.0 * 64.0) <= 0.01);
            CHECK(static_cast<double>(cube.masks_rd[t].foreground_count()) / (64.0 * 16.0) <= 0.01);
        }
        auto v = marginalize(cube);
        double mass = total(cube.intensity);
        for (const auto* view : {&v.ra, &v.rd, &v.ad}) {
            CHECK(std::abs(total(view->data) - mass) <= 1e-9 * std::max(1.0, mass));
        }

        RadScene quiet = scene;
        quiet.noise = {};
        auto clean = render_scene(quiet, dims, 0);
        CHECK(clean.masks_ra == cube.masks_ra);
        CHECK(clean.masks_rd == cube.masks_rd);
    }
}

TEST_CASE("dataset round-trip is bit-identical")
{
    GenerateOptions opt;
    opt.dims = {16, 16, 8};
    opt.num_samples = 3;
    opt.sampler.frames = 2;
    opt.sampler.foreground_cap = 0.2;
    Dataset ds = generate_dataset(opt, 5);
    auto dir = scratch("ds_roundtrip");
    write_dataset(ds, dir);
    Dataset back = read_dataset(dir);
    REQUIRE(back.samples.size() == 3);
    CHECK(back.frames == 2);
    CHECK(back.dims.range == 16);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& a = ds.samples[i];
        const auto& b = back.samples[i];
        CHECK(a.id == b.id);
        CHECK(a.seed == b.seed);
        CHECK(a.split == b.split);
        CHECK(bit_identical(a.views.ra.data, b.views.ra.data));
        CHECK(bit_identical(a.views.rd.data, b.views.rd.data));
        CHECK(bit_identical(a.views.ad.data, b.views.ad.data));
        CHECK(a.mask_ra == b.mask_ra);
        CHECK(a.mask_rd == b.mask_rd);
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset read errors")
{
    auto empty = scratch("ds_empty");
    fs::create_directories(empty);
    CHECK_THROWS_AS(read_dataset(empty), std::runtime_error);
    CHECK_THROWS_AS(read_dataset(scratch("ds_nonexistent")), std::runtime_error);

    GenerateOptions opt;
    opt.dims = {16, 16, 8};
    opt.num_samples = 2;
    opt.sampler.frames = 1;
    opt.sampler.foreground_cap = 0.2;
    auto dir = scratch("ds_mismatch");
    write_dataset(generate_dataset(opt, 1), dir);
    fs::remove(dir / "s00001.rd.adrt");
    try {
        read_dataset(dir);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("manifest") != std::string::npos);
    }

    // Same count but a corrupted blob: the error names the file.
    {
        std::ofstream bad(dir / "s00001.rd.adrt", std::ios::binary);
        bad << "garbage";
    }
    try {
        read_dataset(dir);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("s00001.rd.adrt") != std::string::npos);
    }
    fs::remove_all(dir);
    fs::remove_all(empty);
}
