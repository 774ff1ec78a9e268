#include "adaradar/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "adaradar/tensor_io.hpp"
#include "json.hpp"

namespace adaradar::synth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string split_name(Split s)
{
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s)
{
    if (s == "train") {
        return Split::Train;
    }
    if (s == "val") {
        return Split::Val;
    }
    if (s == "test") {
        return Split::Test;
    }
    throw std::invalid_argument("unknown split '" + s + "'");
}

std::vector<const Sample*> Dataset::split(Split s) const
{
    std::vector<const Sample*> out;
    for (const auto& smp : samples) {
        if (smp.split == s) {
            out.push_back(&smp);
        }
    }
    return out;
}

Sample make_sample(std::string id, const RadScene& scene, const CubeDims& dims, std::uint64_t seed,
                   Split split, double foreground_cap)
{
    RadCube cube = render_scene(scene, dims, seed, foreground_cap);
    Sample s;
    s.id = std::move(id);
    s.seed = seed;
    s.split = split;
    s.views = slice_views(cube);
    s.mask_ra = std::move(cube.masks_ra);
    s.mask_rd = std::move(cube.masks_rd);
    return s;
}

Dataset generate_dataset(const GenerateOptions& options, std::uint64_t seed)
{
    Dataset ds;
    ds.dims = options.dims;
    ds.frames = options.sampler.frames;
    std::mt19937_64 rng(seed);
    auto n = options.num_samples;
    auto n_train = static_cast<std::size_t>(std::lround(options.train_fraction * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::lround(options.val_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
        RadScene scene = sample_scene(options.sampler, options.dims, rng);
        std::uint64_t render_seed = rng();
        Split split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
        char id[32];
        std::snprintf(id, sizeof id, "s%05zu", i);
        ds.samples.push_back(make_sample(id, scene, options.dims, render_seed, split,
                                         options.sampler.foreground_cap));
    }
    return ds;
}

namespace {

const char* kKinds[] = {"ra", "rd", "ad", "mask_ra", "mask_rd"};

fs::path sample_file(const fs::path& dir, const std::string& id, const char* kind)
{
    return dir / (id + "." + kind + ".adrt");
}

void check_shape(const Tensor& t, const Shape& expected, const fs::path& file)
{
    if (t.shape() != expected) {
        throw std::runtime_error(file.string() + ": expected shape " + shape_str(expected) +
                                 ", found " + shape_str(t.shape()));
    }
}

} // namespace

void write_dataset(const Dataset& dataset, const fs::path& dir)
{
    fs::create_directories(dir);
    json manifest;
    manifest["version"] = dataset.version;
    manifest["dims"] = {{"R", dataset.dims.range}, {"A", dataset.dims.angle}, {"D", dataset.dims.doppler}};
    manifest["T"] = dataset.frames;
    manifest["K"] = dataset.num_classes;
    manifest["samples"] = json::array();
    for (const auto& s : dataset.samples) {
        manifest["samples"].push_back({{"id", s.id}, {"seed", s.seed}, {"split", split_name(s.split)}});
        save_tensor(sample_file(dir, s.id, "ra"), s.views.ra.data);
        save_tensor(sample_file(dir, s.id, "rd"), s.views.rd.data);
        save_tensor(sample_file(dir, s.id, "ad"), s.views.ad.data);
        save_tensor(sample_file(dir, s.id, "mask_ra"), labels_to_tensor(s.mask_ra));
        save_tensor(sample_file(dir, s.id, "mask_rd"), labels_to_tensor(s.mask_rd));
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) {
        throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    }
    os << manifest.dump(2) << "\n";
}

Dataset read_dataset(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        throw std::runtime_error(dir.string() + ": dataset directory does not exist");
    }
    fs::path mpath = dir / "manifest.json";
    std::ifstream is(mpath);
    if (!is) {
        throw std::runtime_error(mpath.string() + ": missing dataset manifest");
    }
    json manifest;
    Dataset ds;
    std::vector<std::tuple<std::string, std::uint64_t, Split>> entries;
    try {
        is >> manifest;
        ds.version = manifest.at("version").get<int>();
        if (ds.version != 1) {
            throw std::runtime_error("unsupported dataset version " + std::to_string(ds.version));
        }
        ds.dims = {manifest.at("dims").at("R").get<std::size_t>(),
                   manifest.at("dims").at("A").get<std::size_t>(),
                   manifest.at("dims").at("D").get<std::size_t>()};
        ds.frames = manifest.at("T").get<std::size_t>();
        ds.num_classes = manifest.at("K").get<std::size_t>();
        for (const auto& e : manifest.at("samples")) {
            entries.emplace_back(e.at("id").get<std::string>(), e.at("seed").get<std::uint64_t>(),
                                 parse_split(e.at("split").get<std::string>()));
        }
    } catch (const std::exception& e) {
        throw std::runtime_error(mpath.string() + ": " + e.what());
    }
    if (entries.empty()) {
        throw std::runtime_error(mpath.string() + ": dataset lists no samples");
    }

    std::size_t on_disk = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".adrt") {
            ++on_disk;
        }
    }
    std::size_t expected = entries.size() * std::size(kKinds);
    if (on_disk != expected) {
        throw std::runtime_error(mpath.string() + ": manifest lists " + std::to_string(entries.size()) +
                                 " samples (" + std::to_string(expected) + " files) but " +
                                 std::to_string(on_disk) + " .adrt files are present");
    }

    const auto T = ds.frames, R = ds.dims.range, A = ds.dims.angle, D = ds.dims.doppler;
    std::set<std::string> ids;
    for (const auto& [id, seed, split] : entries) {
        if (!ids.insert(id).second) {
            throw std::runtime_error(mpath.string() + ": duplicate sample id " + id);
        }
        Sample s;
        s.id = id;
        s.seed = seed;
        s.split = split;
        auto load = [&](const char* kind, const Shape& shape) {
            fs::path f = sample_file(dir, id, kind);
            Tensor t = load_tensor(f);
            check_shape(t, shape, f);
            return t;
        };
        s.views.ra = {ViewId::RA, load("ra", {1, T, R, A})};
        s.views.rd = {ViewId::RD, load("rd", {1, T, R, D})};
        s.views.ad = {ViewId::AD, load("ad", {1, T, A, D})};
        for (const char* kind : {"mask_ra", "mask_rd"}) {
            fs::path f = sample_file(dir, id, kind);
            Tensor t = load(kind, {T, R, std::string(kind) == "mask_ra" ? A : D});
            try {
                auto frames = labels_from_tensor(t);
                for (const auto& m : frames) {
                    for (int l : m.labels) {
                        if (static_cast<std::size_t>(l) >= ds.num_classes) {
                            throw std::runtime_error("label " + std::to_string(l) + " out of range");
                        }
                    }
                }
                (std::string(kind) == "mask_ra" ? s.mask_ra : s.mask_rd) = std::move(frames);
            } catch (const std::exception& e) {
                throw std::runtime_error(f.string() + ": " + e.what());
            }
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

} // namespace adaradar::synth
