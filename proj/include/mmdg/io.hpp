#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmdg/batch.hpp"

namespace mmdg {

// samples.csv layout: header z0..z{d-1} (plus p0..p{dp-1} when prompts are
// present), one sample per row, 17 significant digits.
void write_samples_csv(const std::filesystem::path& path, const Batch& batch);
Batch read_samples_csv(const std::filesystem::path& path);

std::string format_double(double v);  // shortest lossless decimal (17 sig digits)

// 2D scatter of the first two coordinates; one <g> series per entry.
struct ScatterSeries {
    std::string label;
    std::string color;
    const Batch* batch;
};
void write_scatter_svg(const std::filesystem::path& path, const std::vector<ScatterSeries>& series);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Records what a command produced. Wall-clock timings are opt-in so default
// outputs stay byte-identical across runs.
class RunManifest {
public:
    RunManifest(nlohmann::json config, std::uint64_t seed, bool with_timings);

    void add_file(const std::filesystem::path& path);
    void add_timing(const std::string& phase, double seconds);
    void write(const std::filesystem::path& path) const;

private:
    nlohmann::json manifest_;
    bool with_timings_;
};

}  // namespace mmdg
